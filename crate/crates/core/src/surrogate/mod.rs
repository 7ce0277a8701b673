//! The reconstruction surrogate: Chamfer loss, a point-cloud autoencoder,
//! its Adam trainer and the fitness measured on a target set.

mod chamfer;
mod network;

pub use chamfer::{chamfer, chamfer_brute};
pub use network::{Architecture, AutoencoderParams, LEAKY_SLOPE};

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::PointCloud;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub iterations: usize,
    pub seed: u64,
    pub architecture: Architecture,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 8,
            learning_rate: 1e-3,
            iterations: 2_000,
            seed: 0,
            architecture: Architecture::default(),
        }
    }
}

impl TrainConfig {
    /// Full-length schedule of 20,000 iterations.
    pub fn paper() -> Self {
        TrainConfig {
            iterations: 20_000,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("iterations must be >= 1".into()));
        }
        self.architecture.validate()
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(len: usize, learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    pub fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let n = params.len();
        assert!(grad.len() == n && self.m.len() == n && self.v.len() == n);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        let step = self.learning_rate / c1;
        let inv_c2 = 1.0 / c2;
        let (m, v) = (&mut self.m[..n], &mut self.v[..n]);
        for i in 0..n {
            let g = grad[i];
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            params[i] -= step * m[i] / ((v[i] * inv_c2).sqrt() + eps);
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: AutoencoderParams,
    /// Batch loss before each update.
    pub losses: Vec<f64>,
}

fn cloud_size(clouds: &[PointCloud]) -> Result<usize> {
    let v = clouds
        .first()
        .ok_or_else(|| Error::InvalidParameter("no clouds given".into()))?
        .len();
    if let Some(bad) = clouds.iter().find(|c| c.len() != v) {
        return Err(Error::ShapeMismatch(format!(
            "clouds have different sizes ({v} and {})",
            bad.len()
        )));
    }
    Ok(v)
}

/// Trains a freshly initialized autoencoder on `clouds` with batches drawn
/// uniformly with replacement. Fully determined by `cfg`.
pub fn train_surrogate(clouds: &[PointCloud], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let v = cloud_size(clouds)?;
    let mut params =
        AutoencoderParams::init(cfg.architecture.clone(), v, &mut seed::sub_rng(cfg.seed, 0))?;
    let mut batches = seed::sub_rng(cfg.seed, 1);
    let mut adam = Adam::new(params.len(), cfg.learning_rate);
    let mut losses = Vec::with_capacity(cfg.iterations);
    for it in 0..cfg.iterations {
        let batch: Vec<&PointCloud> = (0..cfg.batch_size)
            .map(|_| &clouds[batches.random_range(0..clouds.len())])
            .collect();
        let (loss, grad) = params.loss_and_grad(&batch)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!(
                "training loss at iteration {it} (learning rate {})",
                cfg.learning_rate
            )));
        }
        losses.push(loss);
        adam.update(params.values_mut(), &grad);
    }
    if params.values().iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("trained parameters".into()));
    }
    Ok(TrainOutcome { params, losses })
}

/// Mean Chamfer distance between each target cloud and its reconstruction.
pub fn evaluate_fitness(params: &AutoencoderParams, targets: &[PointCloud]) -> Result<f64> {
    cloud_size(targets)?;
    let losses = targets
        .par_iter()
        .map(|x| chamfer(&params.forward(x)?, x))
        .collect::<Result<Vec<f64>>>()?;
    let mean = losses.iter().sum::<f64>() / losses.len() as f64;
    if !mean.is_finite() {
        return Err(Error::NonFinite("fitness".into()));
    }
    Ok(mean)
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"ASAEPRM\0";
const CHECKPOINT_VERSION: u32 = 1;

impl AutoencoderParams {
    /// Binary checkpoint: magic, version, shape header, then little-endian
    /// `f64` values.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let arch = self.architecture();
        let mut header: Vec<u64> = vec![self.points() as u64, arch.encoder.len() as u64];
        header.extend(arch.encoder.iter().map(|&w| w as u64));
        header.push(arch.latent as u64);
        header.push(arch.decoder.len() as u64);
        header.extend(arch.decoder.iter().map(|&w| w as u64));
        header.push(self.len() as u64);
        let mut write = || -> std::io::Result<()> {
            out.write_all(CHECKPOINT_MAGIC)?;
            out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
            for h in &header {
                out.write_all(&h.to_le_bytes())?;
            }
            for v in self.values() {
                out.write_all(&v.to_le_bytes())?;
            }
            out.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut input = BufReader::new(file);
        let io = |e: std::io::Error| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::format(path, "truncated checkpoint")
            } else {
                Error::io(path, e)
            }
        };
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic).map_err(io)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::format(path, "not an autoencoder checkpoint"));
        }
        let mut word = [0u8; 4];
        input.read_exact(&mut word).map_err(io)?;
        let version = u32::from_le_bytes(word);
        if version != CHECKPOINT_VERSION {
            return Err(Error::format(path, format!("unsupported checkpoint version {version}")));
        }
        let mut read_u64 = || -> Result<u64> {
            let mut b = [0u8; 8];
            input.read_exact(&mut b).map_err(io)?;
            Ok(u64::from_le_bytes(b))
        };
        const LIMIT: u64 = 1 << 32;
        let mut small = || -> Result<usize> {
            let x = read_u64()?;
            if x >= LIMIT {
                return Err(Error::format(path, "implausible checkpoint header"));
            }
            Ok(x as usize)
        };
        let points = small()?;
        let n_enc = small()?;
        let encoder = (0..n_enc).map(|_| small()).collect::<Result<Vec<_>>>()?;
        let latent = small()?;
        let n_dec = small()?;
        let decoder = (0..n_dec).map(|_| small()).collect::<Result<Vec<_>>>()?;
        let count = small()?;
        let arch = Architecture {
            encoder,
            latent,
            decoder,
        };
        let expected = AutoencoderParams::zeros(arch.clone(), points)
            .map_err(|e| Error::format(path, e.to_string()))?
            .len();
        if count != expected {
            return Err(Error::format(
                path,
                format!("header declares {count} parameters, architecture needs {expected}"),
            ));
        }
        let mut bytes = vec![0u8; count * 8];
        input.read_exact(&mut bytes).map_err(io)?;
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        AutoencoderParams::from_values(arch, points, values).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// Writes `iteration,loss` rows.
pub fn write_loss_history(losses: &[f64], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "iteration,loss")?;
        for (i, l) in losses.iter().enumerate() {
            writeln!(out, "{i},{l}")?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

pub fn read_loss_history(path: &Path) -> Result<Vec<f64>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut losses = Vec::new();
    for (row, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if row == 0 {
            if line != "iteration,loss" {
                return Err(Error::format(path, "row 1: expected header `iteration,loss`"));
            }
            continue;
        }
        let loss = line
            .split_once(',')
            .filter(|(i, _)| i.parse::<usize>().ok() == Some(row - 1))
            .and_then(|(_, l)| l.parse::<f64>().ok())
            .ok_or_else(|| Error::format(path, format!("row {}: malformed `{line}`", row + 1)))?;
        losses.push(loss);
    }
    Ok(losses)
}

#[cfg(test)]
mod tests;
