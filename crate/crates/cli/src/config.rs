use std::path::{Path, PathBuf};

use autosynth::datasetgen::{DEFAULT_OBJECTS, DEFAULT_POINTS, DEFAULT_TARGET_AUGMENTATIONS};
use autosynth::evolution::{EvaluatorConfig, SearchConfig};
use autosynth::surrogate::TrainConfig;
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Everything a run needs, as read from the JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub population: usize,
    pub trials: usize,
    /// Synthetic objects per evaluated policy.
    pub objects: usize,
    pub points: usize,
    /// Rotated copies of the target mesh.
    pub augmentations: usize,
    /// Random policies scored by `baseline --mode random`.
    pub baseline_count: usize,
    pub train: TrainConfig,
    /// OBJ or PLY target mesh; the bundled demo mesh when absent.
    pub target: Option<PathBuf>,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let search = SearchConfig::default();
        RunConfig {
            seed: search.seed,
            population: search.population,
            trials: search.trials,
            objects: DEFAULT_OBJECTS,
            points: DEFAULT_POINTS,
            augmentations: DEFAULT_TARGET_AUGMENTATIONS,
            baseline_count: 20,
            train: TrainConfig::default(),
            target: None,
            output: PathBuf::from("autosynth-out"),
        }
    }
}

/// Flags that override the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON run configuration; missing fields take their defaults
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Root seed of every random stream [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Population size k [default: 32]
    #[arg(long)]
    pub population: Option<usize>,
    /// Number of tournament trials [default: 1000]
    #[arg(long)]
    pub trials: Option<usize>,
    /// Synthetic objects generated per evaluated policy [default: 400]
    #[arg(long)]
    pub objects: Option<usize>,
    /// Points per cloud [default: 256]
    #[arg(long)]
    pub points: Option<usize>,
    /// Rotated copies of the target mesh [default: 100]
    #[arg(long)]
    pub augmentations: Option<usize>,
    /// Surrogate training iterations per evaluation [default: 2000]
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Surrogate batch size [default: 8]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Surrogate Adam learning rate [default: 0.001]
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Target mesh (OBJ or PLY) [default: bundled demo mesh]
    #[arg(long, value_name = "PATH")]
    pub target: Option<PathBuf>,
    /// Output directory [default: autosynth-out]
    #[arg(long, value_name = "DIR")]
    pub output: Option<PathBuf>,
}

/// 1-based line of the first occurrence of `"key"` in `text`.
fn key_line(text: &str, key: &str) -> Option<usize> {
    let quoted = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&quoted)).map(|i| i + 1)
}

impl RunConfig {
    /// Reads the config file (if any), applies the flags and validates.
    /// Relative paths in the file resolve against the file's directory.
    pub fn load(overrides: &Overrides) -> Result<Self, CliError> {
        let (mut cfg, text, origin) = match &overrides.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| {
                    CliError::Config(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column()))
                })?;
                let dir = path.parent().unwrap_or(Path::new(""));
                if let Some(t) = &cfg.target {
                    cfg.target = Some(dir.join(t));
                }
                cfg.output = dir.join(&cfg.output);
                (cfg, text, Some(path.clone()))
            }
            None => (RunConfig::default(), String::new(), None),
        };
        let o = overrides;
        macro_rules! set {
            ($($field:ident).+ <- $flag:ident) => {
                if let Some(v) = o.$flag.clone() {
                    cfg.$($field).+ = v;
                }
            };
        }
        set!(seed <- seed);
        set!(population <- population);
        set!(trials <- trials);
        set!(objects <- objects);
        set!(points <- points);
        set!(augmentations <- augmentations);
        set!(train.iterations <- iterations);
        set!(train.batch_size <- batch_size);
        set!(train.learning_rate <- learning_rate);
        set!(output <- output);
        if let Some(t) = &o.target {
            cfg.target = Some(t.clone());
        }

        let locate = |key: &str, message: String| -> CliError {
            match (&origin, key_line(&text, key)) {
                (Some(path), Some(line)) => CliError::Config(format!("{}:{line}: {message}", path.display())),
                (Some(path), None) => CliError::Config(format!("{}: {message}", path.display())),
                (None, _) => CliError::Config(message),
            }
        };
        if let Err(e) = cfg.search().validate() {
            let key = if cfg.population < 2 { "population" } else { "trials" };
            return Err(locate(key, e.to_string()));
        }
        if let Err(e) = cfg.evaluator().validate() {
            let key = if cfg.objects == 0 {
                "objects"
            } else if cfg.points < 8 {
                "points"
            } else {
                "train"
            };
            return Err(locate(key, e.to_string()));
        }
        if cfg.augmentations == 0 {
            return Err(locate("augmentations", "augmentations must be >= 1".into()));
        }
        if cfg.baseline_count == 0 {
            return Err(locate("baseline_count", "baseline_count must be >= 1".into()));
        }
        if let Some(t) = &cfg.target {
            if !t.is_file() {
                return Err(locate("target", format!("target mesh {} does not exist", t.display())));
            }
        }
        Ok(cfg)
    }

    pub fn search(&self) -> SearchConfig {
        SearchConfig {
            population: self.population,
            trials: self.trials,
            seed: self.seed,
        }
    }

    pub fn evaluator(&self) -> EvaluatorConfig {
        EvaluatorConfig {
            objects: self.objects,
            points: self.points,
            train: self.train.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_library() {
        let cfg = RunConfig::load(&Overrides::default()).unwrap();
        assert_eq!(cfg.population, 32);
        assert_eq!(cfg.trials, 1000);
        assert_eq!(cfg.evaluator(), EvaluatorConfig::default());
    }

    #[test]
    fn flags_win_over_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, "{\n  \"trials\": 7,\n  \"population\": 5,\n  \"train\": {\"iterations\": 3}\n}\n").unwrap();
        let o = Overrides {
            config: Some(path),
            trials: Some(9),
            ..Overrides::default()
        };
        let cfg = RunConfig::load(&o).unwrap();
        assert_eq!((cfg.trials, cfg.population, cfg.train.iterations), (9, 5, 3));
        assert_eq!(cfg.train.batch_size, 8);
        assert_eq!(cfg.output, dir.path().join("autosynth-out"));
    }

    #[test]
    fn errors_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, "{\n  \"seed\": 1,\n  \"population\": 1\n}\n").unwrap();
        let o = Overrides {
            config: Some(path.clone()),
            ..Overrides::default()
        };
        let msg = RunConfig::load(&o).unwrap_err().to_string();
        assert!(msg.contains("run.json:3:"), "{msg}");

        std::fs::write(&path, "{\n  \"seed\": 1,\n  \"bogus\": 2\n}\n").unwrap();
        let msg = RunConfig::load(&o).unwrap_err().to_string();
        assert!(msg.contains("run.json:3:"), "{msg}");
    }
}
