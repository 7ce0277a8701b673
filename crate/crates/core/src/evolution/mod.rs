//! Tournament-selection search over policies: two random members compete,
//! the winner's mutant joins the pool and the pool's worst member leaves.

mod evaluator;

pub use evaluator::{score_policy, AutoSynthEvaluator, EvaluatorConfig, FAILED_POLICY_SCORE};

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::Policy;
use crate::seed;

/// Scores a policy; lower is better.
pub trait Evaluator {
    fn evaluate(&mut self, policy: &Policy) -> Result<f64>;
}

impl<F: FnMut(&Policy) -> Result<f64>> Evaluator for F {
    fn evaluate(&mut self, policy: &Policy) -> Result<f64> {
        self(policy)
    }
}

fn checked_score(evaluator: &mut impl Evaluator, policy: &Policy) -> Result<f64> {
    let wrap = |source: Error| Error::Evaluation {
        policy: *policy,
        source: Box::new(source),
    };
    let score = evaluator.evaluate(policy).map_err(wrap)?;
    if !score.is_finite() {
        return Err(wrap(Error::NonFinite(format!("score {score}"))));
    }
    Ok(score)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredPolicy {
    pub policy: Policy,
    pub score: f64,
    /// Trial that created the member; 0 for the initial population.
    pub trial: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub population: usize,
    pub trials: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            population: 32,
            trials: 1_000,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::InvalidParameter(format!(
                "population must be >= 2, got {}",
                self.population
            )));
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub trial: usize,
    pub parent: Policy,
    pub child: Policy,
    pub child_score: f64,
    pub best_score: f64,
}

/// What one step did, for callers that audit the selection rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    /// Population indices drawn for the tournament, in draw order.
    pub contestants: (usize, usize),
    pub parent: usize,
    pub child: ScoredPolicy,
    pub removed: ScoredPolicy,
}

const INIT_STREAM: u64 = 0;
const STEP_STREAM: u64 = 1;
const STATE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchState {
    pub version: u32,
    pub seed: u64,
    /// Members in order of arrival.
    pub population: Vec<ScoredPolicy>,
    pub initial: Vec<ScoredPolicy>,
    pub trials: usize,
    pub best: ScoredPolicy,
    pub history: Vec<HistoryRecord>,
}

/// Draws and scores `cfg.population` random policies.
pub fn init_population(cfg: &SearchConfig, evaluator: &mut impl Evaluator) -> Result<SearchState> {
    cfg.validate()?;
    let mut rng = seed::sub_rng(cfg.seed, INIT_STREAM);
    let mut population = Vec::with_capacity(cfg.population);
    for _ in 0..cfg.population {
        let policy = Policy::random(&mut rng);
        let score = checked_score(evaluator, &policy)?;
        population.push(ScoredPolicy {
            policy,
            score,
            trial: 0,
        });
    }
    let best = *population
        .iter()
        .reduce(|a, b| if b.score < a.score { b } else { a })
        .expect("population is non-empty");
    Ok(SearchState {
        version: STATE_VERSION,
        seed: cfg.seed,
        initial: population.clone(),
        population,
        trials: 0,
        best,
        history: Vec::new(),
    })
}

/// First index holding the largest score.
fn worst_index(pool: &[ScoredPolicy]) -> usize {
    let mut worst = 0;
    for (i, m) in pool.iter().enumerate() {
        if m.score > pool[worst].score {
            worst = i;
        }
    }
    worst
}

impl SearchState {
    pub fn best_score_series(&self) -> impl Iterator<Item = f64> + '_ {
        self.history.iter().map(|h| h.best_score)
    }

    /// One tournament. On error the state is left untouched.
    pub fn step(&mut self, evaluator: &mut impl Evaluator) -> Result<StepReport> {
        let k = self.population.len();
        if k < 2 {
            return Err(Error::InvalidParameter("population must hold at least two members".into()));
        }
        let trial = self.trials + 1;
        let mut rng = seed::sub_rng(seed::derive(self.seed, STEP_STREAM), trial as u64);
        let first = rng.random_range(0..k);
        let mut second = rng.random_range(0..k - 1);
        if second >= first {
            second += 1;
        }
        let parent = if self.population[second].score < self.population[first].score {
            second
        } else {
            first
        };
        let parent_policy = self.population[parent].policy;
        let policy = parent_policy.mutate(&mut rng);
        let score = checked_score(evaluator, &policy)?;
        let child = ScoredPolicy {
            policy,
            score,
            trial,
        };

        self.population.push(child);
        let removed = self.population.remove(worst_index(&self.population));
        self.trials = trial;
        if score < self.best.score {
            self.best = child;
        }
        self.history.push(HistoryRecord {
            trial,
            parent: parent_policy,
            child: policy,
            child_score: score,
            best_score: self.best.score,
        });
        Ok(StepReport {
            contestants: (first, second),
            parent,
            child,
            removed,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).expect("state serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let state: SearchState =
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        if state.version != STATE_VERSION {
            return Err(Error::format(path, format!("unsupported state version {}", state.version)));
        }
        if state.population.len() < 2 || state.history.len() != state.trials {
            return Err(Error::format(path, "inconsistent search state"));
        }
        Ok(state)
    }
}

/// Steps until `cfg.trials` trials are done, calling `on_step` after each.
/// On error `state` keeps every completed trial.
pub fn resume_search(
    state: &mut SearchState,
    cfg: &SearchConfig,
    evaluator: &mut impl Evaluator,
    mut on_step: impl FnMut(&SearchState, &StepReport) -> Result<()>,
) -> Result<()> {
    cfg.validate()?;
    if state.seed != cfg.seed || state.population.len() != cfg.population {
        return Err(Error::InvalidParameter(
            "search state does not match the configuration (seed or population)".into(),
        ));
    }
    while state.trials < cfg.trials {
        let report = state.step(evaluator)?;
        on_step(state, &report)?;
    }
    Ok(())
}

/// Initial population followed by `cfg.trials` tournaments. The returned
/// state's `best` is the best policy ever scored.
pub fn run_search(cfg: &SearchConfig, evaluator: &mut impl Evaluator) -> Result<SearchState> {
    let mut state = init_population(cfg, evaluator)?;
    resume_search(&mut state, cfg, evaluator, |_, _| Ok(()))?;
    Ok(state)
}

/// `n` policies drawn independently of any feedback, with their scores.
pub fn random_baseline(n: usize, seed: u64, evaluator: &mut impl Evaluator) -> Result<Vec<ScoredPolicy>> {
    let mut rng = seed::sub_rng(seed, u64::MAX);
    (0..n)
        .map(|_| {
            let policy = Policy::random(&mut rng);
            Ok(ScoredPolicy {
                policy,
                score: checked_score(evaluator, &policy)?,
                trial: 0,
            })
        })
        .collect()
}

pub const HISTORY_HEADER: &str = "trial,parent_hash,child_labels,child_score,best_score";

/// Writes the history CSV. Scores use the shortest exact exponent form.
pub fn write_history(history: &[HistoryRecord], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "{HISTORY_HEADER}")?;
        for h in history {
            writeln!(
                out,
                "{},{:016x},{},{:e},{:e}",
                h.trial,
                h.parent.stable_hash(),
                h.child,
                h.child_score,
                h.best_score
            )?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

/// A history row as stored on disk; the parent is known only by its hash.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub trial: usize,
    pub parent_hash: u64,
    pub child: Policy,
    pub child_score: f64,
    pub best_score: f64,
}

pub fn read_history(path: &Path) -> Result<Vec<HistoryRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let row_no = i + 1;
        if i == 0 {
            if line != HISTORY_HEADER {
                return Err(Error::format(path, format!("row 1: expected header `{HISTORY_HEADER}`")));
            }
            continue;
        }
        let bad = |what: &str| Error::format(path, format!("row {row_no}: {what}"));
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(bad("expected 5 fields"));
        }
        let labels: Vec<u8> = fields[2]
            .chars()
            .map(|c| c.to_digit(10).map(|d| d as u8))
            .collect::<Option<_>>()
            .ok_or_else(|| bad("child labels must be digits"))?;
        rows.push(HistoryRow {
            trial: fields[0].parse().map_err(|_| bad("bad trial"))?,
            parent_hash: u64::from_str_radix(fields[1], 16).map_err(|_| bad("bad parent hash"))?,
            child: Policy::from_slice(&labels).map_err(|e| bad(&e.to_string()))?,
            child_score: fields[3].parse().map_err(|_| bad("bad child score"))?,
            best_score: fields[4].parse().map_err(|_| bad("bad best score"))?,
        });
    }
    Ok(rows)
}

/// Writes the scored initial population as `policy,score` rows.
pub fn write_population(members: &[ScoredPolicy], path: &Path) -> Result<()> {
    let mut text = String::from("policy,score\n");
    for m in members {
        text.push_str(&format!("{},{:e}\n", m.policy, m.score));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_population(path: &Path) -> Result<Vec<(Policy, f64)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some("policy,score") {
        return Err(Error::format(path, "row 1: expected header `policy,score`"));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = || Error::format(path, format!("row {}: malformed `{line}`", i + 2));
            let (labels, score) = line.split_once(',').ok_or_else(bad)?;
            let labels: Vec<u8> = labels
                .chars()
                .map(|c| c.to_digit(10).map(|d| d as u8))
                .collect::<Option<_>>()
                .ok_or_else(bad)?;
            Ok((
                Policy::from_slice(&labels).map_err(|_| bad())?,
                score.parse().map_err(|_| bad())?,
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests;
