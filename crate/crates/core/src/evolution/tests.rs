use super::*;
use crate::datasetgen::build_target_dataset;
use crate::geometry::PrimitiveKind;
use crate::meshing::canonical_mesh;
use crate::surrogate::{Architecture, TrainConfig};

fn label_sum(p: &Policy) -> Result<f64> {
    Ok(p.labels().iter().map(|&l| f64::from(l)).sum())
}

fn planted(hidden: Policy) -> impl FnMut(&Policy) -> Result<f64> {
    move |p: &Policy| Ok(p.hamming(&hidden) as f64)
}

fn cfg(population: usize, trials: usize, seed: u64) -> SearchConfig {
    SearchConfig {
        population,
        trials,
        seed,
    }
}

#[test]
fn two_member_population_keeps_the_lower_sum_as_best() {
    let state = init_population(&cfg(2, 1, 4), &mut label_sum).unwrap();
    assert_eq!(state.population.len(), 2);
    let min = state.population.iter().map(|m| m.score).fold(f64::INFINITY, f64::min);
    assert_eq!(state.best.score, min);
    assert_eq!(state.best.score, label_sum(&state.best.policy).unwrap());
    assert_eq!(state, init_population(&cfg(2, 1, 4), &mut label_sum).unwrap());
}

#[test]
fn tournament_picks_the_lower_score() {
    let a = Policy::new([5; 11]).unwrap();
    let b = Policy::new([3; 11]).unwrap();
    let mut state = init_population(&cfg(2, 1, 0), &mut label_sum).unwrap();
    state.population = vec![
        ScoredPolicy { policy: a, score: 0.5, trial: 0 },
        ScoredPolicy { policy: b, score: 0.3, trial: 0 },
    ];
    let report = state.step(&mut |_: &Policy| Ok(1.0)).unwrap();
    assert_eq!(report.parent, 1);
    assert_eq!(state.history[0].parent, b);
    assert_eq!(b.hamming(&report.child.policy), 1);
}

#[test]
fn tied_contestants_favour_the_first_drawn() {
    let mut state = init_population(&cfg(6, 1, 8), &mut |_: &Policy| Ok(2.0)).unwrap();
    for _ in 0..50 {
        let report = state.step(&mut |_: &Policy| Ok(2.0)).unwrap();
        assert_eq!(report.parent, report.contestants.0);
        // all scores tie, so the oldest member leaves
        assert_eq!(report.removed.trial, state.population.iter().map(|m| m.trial).min().unwrap().min(report.removed.trial));
    }
}

#[test]
fn a_hopeless_child_is_removed_and_the_pool_is_unchanged() {
    let mut state = init_population(&cfg(5, 1, 2), &mut label_sum).unwrap();
    let before = state.population.clone();
    let report = state.step(&mut |_: &Policy| Ok(1e9)).unwrap();
    assert_eq!(report.removed, report.child);
    assert_eq!(state.population, before);
    assert_eq!(state.trials, 1);
    assert_eq!(state.history[0].child_score, 1e9);
}

#[test]
fn pool_size_is_constant_and_the_worst_leaves() {
    let mut ev = planted(Policy::new([1, 2, 3, 4, 5, 6, 7, 8, 0, 1, 2]).unwrap());
    let mut state = init_population(&cfg(7, 1, 13), &mut ev).unwrap();
    for _ in 0..1_000 {
        let mut enlarged = state.population.clone();
        let report = state.step(&mut ev).unwrap();
        enlarged.push(report.child);
        assert_eq!(state.population.len(), 7);
        let max = enlarged.iter().map(|m| m.score).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(report.removed.score, max);
        let (a, b) = report.contestants;
        assert_ne!(a, b);
        assert!(enlarged[report.parent].score <= enlarged[a].score.min(enlarged[b].score));
    }
}

#[test]
fn planted_optimum_is_found() {
    // single-label mutations reach a distance-1 neighbour with odds 1/88 per
    // step, so 1,000 trials leave a wide margin for k = 16
    let mut hits = 0;
    for s in 0..10 {
        let hidden = Policy::random(&mut seed::sub_rng(1_000 + s, 0));
        let state = run_search(&cfg(16, 1_000, s), &mut planted(hidden)).unwrap();
        if state.best.score == 0.0 {
            assert_eq!(state.best.policy, hidden);
            hits += 1;
        }
    }
    assert!(hits >= 9, "found the optimum in {hits}/10 runs");
}

#[test]
fn best_so_far_is_monotone_and_global() {
    let mut ev = planted(Policy::full_range());
    let state = run_search(&cfg(8, 300, 5), &mut ev).unwrap();
    let series: Vec<f64> = state.best_score_series().collect();
    assert_eq!(series.len(), 300);
    assert!(series.windows(2).all(|w| w[1] <= w[0]));
    let ever = state
        .initial
        .iter()
        .map(|m| m.score)
        .chain(state.history.iter().map(|h| h.child_score))
        .fold(f64::INFINITY, f64::min);
    assert_eq!(state.best.score, ever);
    assert_eq!(*series.last().unwrap(), ever);
}

#[test]
fn search_beats_the_random_median() {
    let runs = 20;
    let mut wins = 0;
    for s in 0..runs {
        let hidden = Policy::random(&mut seed::sub_rng(77 + s, 0));
        let state = run_search(&cfg(16, 200, s), &mut planted(hidden)).unwrap();
        let mut baseline: Vec<f64> = random_baseline(200, s, &mut planted(hidden))
            .unwrap()
            .iter()
            .map(|m| m.score)
            .collect();
        baseline.sort_by(f64::total_cmp);
        let median = (baseline[99] + baseline[100]) / 2.0;
        if state.best.score < median {
            wins += 1;
        }
    }
    assert!(wins * 100 >= 95 * runs, "won {wins}/{runs}");
}

#[test]
fn replay_is_exact() {
    let hidden = Policy::new([4; 11]).unwrap();
    let a = run_search(&cfg(8, 100, 3), &mut planted(hidden)).unwrap();
    let b = run_search(&cfg(8, 100, 3), &mut planted(hidden)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.history, run_search(&cfg(8, 100, 4), &mut planted(hidden)).unwrap().history);
}

#[test]
fn resumed_search_matches_the_uninterrupted_run() {
    let hidden = Policy::new([0, 8, 0, 8, 0, 8, 0, 8, 0, 8, 0]).unwrap();
    let full = run_search(&cfg(6, 120, 9), &mut planted(hidden)).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.json");
    let mut partial = init_population(&cfg(6, 120, 9), &mut planted(hidden)).unwrap();
    resume_search(&mut partial, &cfg(6, 45, 9), &mut planted(hidden), |_, _| Ok(())).unwrap();
    partial.save(&path).unwrap();
    let mut resumed = SearchState::load(&path).unwrap();
    assert_eq!(resumed, partial);
    resume_search(&mut resumed, &cfg(6, 120, 9), &mut planted(hidden), |_, _| Ok(())).unwrap();
    assert_eq!(resumed, full);

    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    write_history(&full.history, &a).unwrap();
    write_history(&resumed.history, &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn failed_evaluation_leaves_the_state_alone() {
    let mut state = init_population(&cfg(4, 1, 1), &mut label_sum).unwrap();
    state.step(&mut label_sum).unwrap();
    let before = state.clone();
    let err = state
        .step(&mut |_: &Policy| -> Result<f64> { Err(Error::NonFinite("boom".into())) })
        .unwrap_err();
    assert!(matches!(err, Error::Evaluation { .. }));
    assert!(matches!(err.root(), Error::NonFinite(_)));
    assert_eq!(state, before);
    let err = state.step(&mut |_: &Policy| Ok(f64::NAN)).unwrap_err();
    assert!(matches!(err, Error::Evaluation { .. }));
    assert_eq!(state, before);
}

#[test]
fn aborted_search_keeps_its_history() {
    let mut state = init_population(&cfg(4, 10, 1), &mut label_sum).unwrap();
    let mut calls = 0;
    let mut flaky = |p: &Policy| {
        calls += 1;
        if calls > 6 {
            Err(Error::NonFinite("late failure".into()))
        } else {
            label_sum(p)
        }
    };
    assert!(resume_search(&mut state, &cfg(4, 10, 1), &mut flaky, |_, _| Ok(())).is_err());
    assert_eq!(state.trials, 6);
    assert_eq!(state.history.len(), 6);
}

#[test]
fn invalid_configurations_are_rejected() {
    assert!(init_population(&cfg(1, 10, 0), &mut label_sum).is_err());
    assert!(init_population(&cfg(4, 0, 0), &mut label_sum).is_err());
    let mut state = init_population(&cfg(4, 10, 0), &mut label_sum).unwrap();
    assert!(resume_search(&mut state, &cfg(4, 10, 1), &mut label_sum, |_, _| Ok(())).is_err());
}

#[test]
fn history_and_population_files_round_trip() {
    let state = run_search(&cfg(5, 30, 2), &mut |p: &Policy| Ok(label_sum(p)? / 7.0)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("history.csv");
    write_history(&state.history, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 31);
    assert!(text.starts_with(HISTORY_HEADER));
    let rows = read_history(&path).unwrap();
    assert_eq!(rows.len(), 30);
    for (row, h) in rows.iter().zip(&state.history) {
        assert_eq!(row.trial, h.trial);
        assert_eq!(row.parent_hash, h.parent.stable_hash());
        assert_eq!(row.child, h.child);
        assert_eq!(row.child_score, h.child_score);
        assert_eq!(row.best_score, h.best_score);
    }

    let pop = dir.path().join("pop.csv");
    write_population(&state.initial, &pop).unwrap();
    let back = read_population(&pop).unwrap();
    assert_eq!(back.len(), 5);
    for ((p, s), m) in back.iter().zip(&state.initial) {
        assert_eq!((*p, *s), (m.policy, m.score));
    }

    std::fs::write(&path, format!("{HISTORY_HEADER}\n1,00ff,0123,1e0,1e0\n")).unwrap();
    let err = read_history(&path).unwrap_err().to_string();
    assert!(err.contains("row 2"), "{err}");
}

fn tiny_evaluator_config() -> EvaluatorConfig {
    EvaluatorConfig {
        objects: 4,
        points: 16,
        train: TrainConfig {
            batch_size: 2,
            iterations: 5,
            architecture: Architecture {
                encoder: vec![8],
                latent: 4,
                decoder: vec![8],
            },
            ..TrainConfig::default()
        },
    }
}

#[test]
fn evaluator_scores_are_cached_and_reproducible() {
    let target = build_target_dataset(canonical_mesh(PrimitiveKind::Sphere), 3, 16, 0).unwrap();
    let cfg = tiny_evaluator_config();
    let mut ev = AutoSynthEvaluator::new(cfg.clone(), &target, 12).unwrap();
    let p = Policy::new([2; 11]).unwrap();
    let first = ev.evaluate(&p).unwrap();
    assert!(first.is_finite() && first >= 0.0);
    assert_eq!(ev.evaluations(), 1);
    assert_eq!(ev.evaluate(&p).unwrap(), first);
    assert_eq!(ev.evaluations(), 1);
    assert_eq!(score_policy(&p, &cfg, &target.clouds(), 12).unwrap(), first);

    let mut other_run = AutoSynthEvaluator::new(cfg.clone(), &target, 12).unwrap();
    assert_eq!(other_run.evaluate(&p).unwrap(), first);
    assert!(other_run.evaluate(&Policy::full_range()).unwrap() >= 0.0);
    assert_eq!(other_run.evaluations(), 2);

    let mismatched = build_target_dataset(canonical_mesh(PrimitiveKind::Sphere), 3, 32, 0).unwrap();
    assert!(AutoSynthEvaluator::new(cfg, &mismatched, 0).is_err());
}

#[test]
fn search_with_the_real_evaluator_records_cached_scores() {
    let target = build_target_dataset(canonical_mesh(PrimitiveKind::Sphere), 2, 16, 1).unwrap();
    let mut ev = AutoSynthEvaluator::new(tiny_evaluator_config(), &target, 3).unwrap();
    let state = run_search(&cfg(3, 6, 3), &mut ev).unwrap();
    for h in &state.history {
        assert_eq!(ev.cached(&h.child), Some(h.child_score));
    }
    let distinct: std::collections::HashSet<Policy> = state
        .initial
        .iter()
        .map(|m| m.policy)
        .chain(state.history.iter().map(|h| h.child))
        .collect();
    assert_eq!(ev.evaluations(), distinct.len());
}
