use std::path::{Path, PathBuf};
use std::time::Instant;

use autosynth::datasetgen::{build_target_dataset, demo_target_mesh, export_dataset, generate_dataset, Dataset};
use autosynth::evolution::{
    init_population, random_baseline, read_history, read_population, resume_search, write_history,
    write_population, AutoSynthEvaluator, Evaluator, SearchState,
};
use autosynth::meshing::io::{read_mesh, MeshFormat};
use autosynth::policy::Policy;
use autosynth::sampling::io::CloudFormat;
use autosynth::seed;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;

pub const HISTORY_FILE: &str = "history.csv";
pub const POPULATION_FILE: &str = "initial_population.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const BEST_POLICY_FILE: &str = "best_policy.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const REPORT_FILE: &str = "report.csv";

const TARGET_STREAM: u64 = 2;
const EVALUATOR_STREAM: u64 = 3;

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("plain data serializes") + "\n";
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// The rotated target set the search is guided by.
pub fn target_dataset(cfg: &RunConfig) -> Result<Dataset, CliError> {
    let mesh = match &cfg.target {
        Some(path) => read_mesh(path)?,
        None => demo_target_mesh(),
    };
    let seed = seed::derive(cfg.seed, TARGET_STREAM);
    Ok(build_target_dataset(&mesh, cfg.augmentations, cfg.points, seed)?)
}

/// Evaluator shared by `search`, `eval` and `baseline`, so every command
/// assigns a policy the same score under the same config.
pub fn evaluator(cfg: &RunConfig) -> Result<AutoSynthEvaluator, CliError> {
    let target = target_dataset(cfg)?;
    let run_seed = seed::derive(cfg.seed, EVALUATOR_STREAM);
    Ok(AutoSynthEvaluator::new(cfg.evaluator(), &target, run_seed)?)
}

#[derive(Debug, Serialize)]
pub struct SearchSummary {
    pub best_policy: Policy,
    pub best_score: f64,
    pub best_trial: usize,
    pub evaluations: usize,
    pub population: usize,
    pub seed: u64,
    pub trials: usize,
    pub wall_time_seconds: f64,
}

pub fn search(cfg: &RunConfig, resume: bool) -> Result<SearchSummary, CliError> {
    let started = Instant::now();
    create_dir(&cfg.output)?;
    let search_cfg = cfg.search();
    let mut evaluator = evaluator(cfg)?;
    let checkpoint = cfg.output.join(CHECKPOINT_FILE);
    let history = cfg.output.join(HISTORY_FILE);

    let mut state = if resume && checkpoint.is_file() {
        let state = SearchState::load(&checkpoint)?;
        eprintln!("resuming after trial {}", state.trials);
        state
    } else {
        let state = init_population(&search_cfg, &mut evaluator)?;
        write_population(&state.initial, &cfg.output.join(POPULATION_FILE))?;
        state.save(&checkpoint)?;
        state
    };
    write_history(&state.history, &history)?;

    let total = search_cfg.trials;
    let outcome = resume_search(&mut state, &search_cfg, &mut evaluator, |s, report| {
        eprintln!(
            "trial {}/{total}: child {} scored {:.5e}, best {:.5e}",
            s.trials, report.child.policy, report.child.score, s.best.score
        );
        write_history(&s.history, &history)?;
        s.save(&checkpoint)
    });
    // keep whatever finished when a step fails
    write_history(&state.history, &history)?;
    state.save(&checkpoint)?;
    outcome?;

    state.best.policy.save(&cfg.output.join(BEST_POLICY_FILE))?;
    let summary = SearchSummary {
        best_policy: state.best.policy,
        best_score: state.best.score,
        best_trial: state.best.trial,
        evaluations: evaluator.evaluations(),
        population: search_cfg.population,
        seed: cfg.seed,
        trials: state.trials,
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };
    write_json(&cfg.output.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}

pub struct GenArgs {
    pub policy: Policy,
    pub objects: usize,
    pub points: usize,
    pub seed: u64,
    pub output: PathBuf,
    pub mesh_format: MeshFormat,
    pub cloud_format: CloudFormat,
}

/// Generates and exports a dataset; returns the manifest path.
pub fn gen(args: &GenArgs) -> Result<PathBuf, CliError> {
    let dataset = generate_dataset(&args.policy, args.objects, args.points, args.seed)?;
    Ok(export_dataset(&dataset, &args.output, args.mesh_format, args.cloud_format)?)
}

#[derive(Debug, Serialize)]
pub struct EvalRecord {
    pub policy: Policy,
    pub score: f64,
    pub seed: u64,
}

pub fn eval(cfg: &RunConfig, policy: Policy) -> Result<EvalRecord, CliError> {
    let score = evaluator(cfg)?.evaluate(&policy)?;
    let record = EvalRecord {
        policy,
        score,
        seed: cfg.seed,
    };
    create_dir(&cfg.output)?;
    write_json(&cfg.output.join(format!("eval_{policy}.json")), &record)?;
    Ok(record)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum BaselineMode {
    /// Independent uniformly random policies
    Random,
    /// Every label at its maximum
    FullRange,
}

#[derive(Debug, Serialize)]
pub struct BaselineReport {
    pub mode: String,
    pub scores: Vec<(Policy, f64)>,
    pub min: f64,
    pub median: f64,
}

pub fn baseline(cfg: &RunConfig, mode: BaselineMode) -> Result<BaselineReport, CliError> {
    let mut evaluator = evaluator(cfg)?;
    let (name, scores) = match mode {
        BaselineMode::Random => {
            let members = random_baseline(cfg.baseline_count, cfg.seed, &mut evaluator)?;
            ("random", members.iter().map(|m| (m.policy, m.score)).collect::<Vec<_>>())
        }
        BaselineMode::FullRange => {
            let p = Policy::full_range();
            ("full-range", vec![(p, evaluator.evaluate(&p)?)])
        }
    };
    let mut sorted: Vec<f64> = scores.iter().map(|s| s.1).collect();
    sorted.sort_by(f64::total_cmp);
    let report = BaselineReport {
        mode: name.into(),
        min: sorted[0],
        median: quantile(&sorted, 0.5),
        scores,
    };
    create_dir(&cfg.output)?;
    write_json(&cfg.output.join(format!("baseline_{name}.json")), &report)?;
    Ok(report)
}

/// Linearly interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub const REPORT_HEADER: &str = "trial,best_score,pop_min,pop_q25,pop_median,pop_q75,pop_max";

/// Replays the pool's scores from the initial population and the history
/// and writes one row per trial; returns the number of rows.
pub fn report(history: &Path, population: &Path, output: &Path) -> Result<usize, CliError> {
    let rows = read_history(history)?;
    let mut pool: Vec<f64> = read_population(population)?.into_iter().map(|(_, s)| s).collect();
    if pool.len() < 2 {
        return Err(CliError::Config(format!(
            "{}: population needs at least two members",
            population.display()
        )));
    }
    let mut text = format!("{REPORT_HEADER}\n");
    for (i, row) in rows.iter().enumerate() {
        if row.trial != i + 1 {
            return Err(CliError::Config(format!(
                "{}: row {}: expected trial {}, found {}",
                history.display(),
                i + 2,
                i + 1,
                row.trial
            )));
        }
        pool.push(row.child_score);
        let mut worst = 0;
        for (j, &s) in pool.iter().enumerate() {
            if s > pool[worst] {
                worst = j;
            }
        }
        pool.remove(worst);
        let mut sorted = pool.clone();
        sorted.sort_by(f64::total_cmp);
        text.push_str(&format!(
            "{},{:e},{:e},{:e},{:e},{:e},{:e}\n",
            row.trial,
            row.best_score,
            sorted[0],
            quantile(&sorted, 0.25),
            quantile(&sorted, 0.5),
            quantile(&sorted, 0.75),
            sorted[sorted.len() - 1],
        ));
    }
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    std::fs::write(output, text).map_err(|e| CliError::Io(format!("{}: {e}", output.display())))?;
    Ok(rows.len())
}
