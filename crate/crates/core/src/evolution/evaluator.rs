use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::Evaluator;
use crate::datasetgen::{generate_clouds, Dataset, DEFAULT_OBJECTS, DEFAULT_POINTS};
use crate::error::{Error, Result};
use crate::policy::Policy;
use crate::sampling::PointCloud;
use crate::seed;
use crate::surrogate::{evaluate_fitness, train_surrogate, TrainConfig};

/// Score given to policies whose objects cannot be generated.
pub const FAILED_POLICY_SCORE: f64 = f64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluatorConfig {
    /// Objects in each synthetic training set.
    pub objects: usize,
    /// Points per cloud, shared by synthetic and target clouds.
    pub points: usize,
    pub train: TrainConfig,
}

impl Default for EvaluatorConfig {
    fn default() -> Self {
        EvaluatorConfig {
            objects: DEFAULT_OBJECTS,
            points: DEFAULT_POINTS,
            train: TrainConfig::default(),
        }
    }
}

impl EvaluatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.objects == 0 {
            return Err(Error::InvalidParameter("objects must be >= 1".into()));
        }
        if self.points < 8 {
            return Err(Error::InvalidParameter(format!(
                "points must be >= 8, got {}",
                self.points
            )));
        }
        self.train.validate()
    }
}

/// Fitness of `policy`: train a surrogate on the policy's synthetic set and
/// measure its reconstruction error on `target`. The synthetic set and the
/// training run are seeded from the policy value and `run_seed` alone, so a
/// policy always gets the same score within a run.
pub fn score_policy(
    policy: &Policy,
    cfg: &EvaluatorConfig,
    target: &[PointCloud],
    run_seed: u64,
) -> Result<f64> {
    let policy_seed = seed::derive(run_seed, policy.stable_hash());
    let clouds = match generate_clouds(policy, cfg.objects, cfg.points, seed::derive(policy_seed, 0)) {
        Ok(clouds) => clouds,
        Err(Error::RetryExhausted { .. }) => return Ok(FAILED_POLICY_SCORE),
        Err(e) => return Err(e),
    };
    let train = TrainConfig {
        seed: seed::derive(policy_seed, 1),
        ..cfg.train.clone()
    };
    let outcome = train_surrogate(&clouds, &train)?;
    evaluate_fitness(&outcome.params, target)
}

/// The search's evaluator, memoizing scores by policy value.
#[derive(Debug, Clone)]
pub struct AutoSynthEvaluator {
    cfg: EvaluatorConfig,
    target: Vec<PointCloud>,
    run_seed: u64,
    cache: HashMap<Policy, f64>,
    misses: usize,
}

impl AutoSynthEvaluator {
    pub fn new(cfg: EvaluatorConfig, target: &Dataset, run_seed: u64) -> Result<Self> {
        cfg.validate()?;
        target.validate()?;
        if target.points_per_cloud != cfg.points {
            return Err(Error::ShapeMismatch(format!(
                "target clouds have {} points, evaluator uses {}",
                target.points_per_cloud, cfg.points
            )));
        }
        Ok(AutoSynthEvaluator {
            cfg,
            target: target.clouds(),
            run_seed,
            cache: HashMap::new(),
            misses: 0,
        })
    }

    pub fn config(&self) -> &EvaluatorConfig {
        &self.cfg
    }

    /// Number of policies actually trained (cache misses).
    pub fn evaluations(&self) -> usize {
        self.misses
    }

    pub fn cached(&self, policy: &Policy) -> Option<f64> {
        self.cache.get(policy).copied()
    }
}

impl Evaluator for AutoSynthEvaluator {
    fn evaluate(&mut self, policy: &Policy) -> Result<f64> {
        if let Some(score) = self.cached(policy) {
            return Ok(score);
        }
        let score = score_policy(policy, &self.cfg, &self.target, self.run_seed)?;
        self.misses += 1;
        self.cache.insert(*policy, score);
        Ok(score)
    }
}
