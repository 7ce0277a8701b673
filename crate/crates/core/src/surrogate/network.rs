//! Point-cloud autoencoder: shared per-point layers, a max-pool over
//! points, a latent layer and a fully connected decoder emitting `3v`
//! coordinates. Forward and backward passes are written out by hand.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::chamfer::chamfer_with_grad;
use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::sampling::PointCloud;

pub const LEAKY_SLOPE: f64 = 0.01;

/// Layer widths. The input width (3) and output width (`3v`) are implied.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    /// Widths of the shared per-point layers; the last one is pooled.
    pub encoder: Vec<usize>,
    pub latent: usize,
    /// Hidden widths of the decoder.
    pub decoder: Vec<usize>,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            encoder: vec![64, 128],
            latent: 64,
            decoder: vec![256, 512],
        }
    }
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        if self.encoder.is_empty() {
            return Err(Error::InvalidParameter("encoder needs at least one layer".into()));
        }
        if self.latent == 0 || self.encoder.contains(&0) || self.decoder.contains(&0) {
            return Err(Error::InvalidParameter("layer widths must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layer {
    inputs: usize,
    outputs: usize,
    /// Start of the `inputs x outputs` row-major weights; the bias follows.
    offset: usize,
}

impl Layer {
    fn weights<'a>(&self, values: &'a [f64]) -> ArrayView2<'a, f64> {
        let end = self.offset + self.inputs * self.outputs;
        ArrayView2::from_shape((self.inputs, self.outputs), &values[self.offset..end])
            .expect("layer layout")
    }

    fn bias<'a>(&self, values: &'a [f64]) -> ArrayView1<'a, f64> {
        let start = self.offset + self.inputs * self.outputs;
        ArrayView1::from(&values[start..start + self.outputs])
    }

    fn weights_mut<'a>(&self, values: &'a mut [f64]) -> ArrayViewMut2<'a, f64> {
        let end = self.offset + self.inputs * self.outputs;
        ArrayViewMut2::from_shape((self.inputs, self.outputs), &mut values[self.offset..end])
            .expect("layer layout")
    }

    fn bias_mut<'a>(&self, values: &'a mut [f64]) -> ArrayViewMut1<'a, f64> {
        let start = self.offset + self.inputs * self.outputs;
        ArrayViewMut1::from(&mut values[start..start + self.outputs])
    }

    fn len(&self) -> usize {
        (self.inputs + 1) * self.outputs
    }

    fn apply(&self, values: &[f64], input: &ArrayView2<f64>, leaky: bool) -> Array2<f64> {
        let mut out = input.dot(&self.weights(values));
        out += &self.bias(values);
        if leaky {
            out.mapv_inplace(leaky_relu);
        }
        out
    }
}

fn leaky_relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

/// Derivative expressed through the activation value (same sign as the
/// pre-activation).
fn leaky_slope_at(activation: f64) -> f64 {
    if activation > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

/// Parameters of the autoencoder for clouds of `points` points, stored as
/// one flat vector in layer order (weights, then bias, per layer).
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderParams {
    arch: Architecture,
    points: usize,
    layers: Vec<Layer>,
    values: Vec<f64>,
}

fn layout(arch: &Architecture, points: usize) -> Vec<Layer> {
    let mut widths = vec![3];
    widths.extend(&arch.encoder);
    widths.push(arch.latent);
    widths.extend(&arch.decoder);
    widths.push(3 * points);
    let mut offset = 0;
    widths
        .windows(2)
        .map(|w| {
            let layer = Layer {
                inputs: w[0],
                outputs: w[1],
                offset,
            };
            offset += layer.len();
            layer
        })
        .collect()
}

/// Intermediate values of one cloud's pass through the per-point layers.
struct PointPass {
    /// Input followed by each per-point layer's activations.
    acts: Vec<Array2<f64>>,
    /// For each pooled feature, the first point attaining the maximum.
    argmax: Vec<usize>,
    pooled: Array1<f64>,
}

impl AutoencoderParams {
    pub fn zeros(arch: Architecture, points: usize) -> Result<Self> {
        arch.validate()?;
        if points == 0 {
            return Err(Error::InvalidParameter("autoencoder needs at least one point".into()));
        }
        let layers = layout(&arch, points);
        let len = layers.iter().map(Layer::len).sum();
        Ok(AutoencoderParams {
            arch,
            points,
            layers,
            values: vec![0.0; len],
        })
    }

    /// Weights and biases uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn init(arch: Architecture, points: usize, rng: &mut impl Rng) -> Result<Self> {
        let mut params = Self::zeros(arch, points)?;
        for layer in params.layers.clone() {
            let bound = 1.0 / (layer.inputs as f64).sqrt();
            for v in &mut params.values[layer.offset..layer.offset + layer.len()] {
                *v = rng.random_range(-bound..=bound);
            }
        }
        Ok(params)
    }

    pub fn from_values(arch: Architecture, points: usize, values: Vec<f64>) -> Result<Self> {
        let mut params = Self::zeros(arch, points)?;
        if values.len() != params.values.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} parameters, got {}",
                params.values.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("autoencoder parameter".into()));
        }
        params.values = values;
        Ok(params)
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn point_layers(&self) -> &[Layer] {
        &self.layers[..self.arch.encoder.len()]
    }

    fn head_layers(&self) -> &[Layer] {
        &self.layers[self.arch.encoder.len()..]
    }

    fn encoder_len(&self) -> usize {
        self.point_layers().iter().map(Layer::len).sum()
    }

    fn check_cloud(&self, cloud: &PointCloud) -> Result<()> {
        if cloud.len() != self.points {
            return Err(Error::ShapeMismatch(format!(
                "model expects {} points, cloud has {}",
                self.points,
                cloud.len()
            )));
        }
        Ok(())
    }

    fn encode_points(&self, cloud: &PointCloud) -> PointPass {
        let input = Array2::from_shape_vec((cloud.len(), 3), cloud.flat()).expect("n x 3");
        let mut acts = vec![input];
        for layer in self.point_layers() {
            let next = layer.apply(&self.values, &acts.last().expect("input").view(), true);
            acts.push(next);
        }
        let top = acts.last().expect("encoder output");
        let width = top.ncols();
        let mut pooled = Array1::from_elem(width, f64::NEG_INFINITY);
        let mut argmax = vec![0; width];
        for (i, row) in top.outer_iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                if x > pooled[j] {
                    pooled[j] = x;
                    argmax[j] = i;
                }
            }
        }
        PointPass {
            acts,
            argmax,
            pooled,
        }
    }

    /// Pooled features (one row per cloud) through the latent and decoder
    /// layers; returns the input followed by every layer's output.
    fn head_forward(&self, pooled: Array2<f64>) -> Vec<Array2<f64>> {
        let head = self.head_layers();
        let mut acts = vec![pooled];
        for (k, layer) in head.iter().enumerate() {
            let leaky = k + 1 < head.len();
            let next = layer.apply(&self.values, &acts.last().expect("input").view(), leaky);
            acts.push(next);
        }
        acts
    }

    /// Reconstruction of one cloud.
    pub fn forward(&self, cloud: &PointCloud) -> Result<PointCloud> {
        self.check_cloud(cloud)?;
        let pass = self.encode_points(cloud);
        let pooled = pass.pooled.insert_axis(Axis(0));
        let out = self.head_forward(pooled).pop().expect("output layer");
        let points = out
            .row(0)
            .as_slice()
            .expect("contiguous row")
            .chunks_exact(3)
            .map(|c| Point3::new(c[0], c[1], c[2]))
            .collect();
        Ok(PointCloud { points })
    }

    /// Mean Chamfer distance between each cloud and its reconstruction, and
    /// the gradient of that mean with respect to every parameter.
    pub fn loss_and_grad(&self, batch: &[&PointCloud]) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::ShapeMismatch("empty batch".into()));
        }
        for cloud in batch {
            self.check_cloud(cloud)?;
        }
        let b = batch.len();
        let passes: Vec<PointPass> = batch.par_iter().map(|c| self.encode_points(c)).collect();
        let width = passes[0].pooled.len();
        let mut pooled = Array2::zeros((b, width));
        for (mut row, pass) in pooled.outer_iter_mut().zip(&passes) {
            row.assign(&pass.pooled);
        }
        let head_acts = self.head_forward(pooled);
        let out = head_acts.last().expect("output layer");

        let per_sample: Vec<(f64, Vec<f64>)> = (0..b)
            .into_par_iter()
            .map(|s| {
                let row = out.row(s);
                chamfer_with_grad(row.as_slice().expect("contiguous row"), &batch[s].points)
            })
            .collect();
        let mut loss = 0.0;
        let mut d_out = Array2::zeros(out.raw_dim());
        for (s, (l, g)) in per_sample.into_iter().enumerate() {
            loss += l;
            d_out.row_mut(s).assign(&Array1::from(g));
        }
        let inv_b = 1.0 / b as f64;
        loss *= inv_b;
        d_out *= inv_b;

        let mut grad = vec![0.0; self.values.len()];
        let d_pooled = self.head_backward(&head_acts, d_out, &mut grad);

        let encoder_grads: Vec<Vec<f64>> = passes
            .par_iter()
            .enumerate()
            .map(|(s, pass)| self.point_backward(pass, d_pooled.row(s)))
            .collect();
        let enc = &mut grad[..self.encoder_len()];
        for g in &encoder_grads {
            for (acc, x) in enc.iter_mut().zip(g) {
                *acc += x;
            }
        }
        Ok((loss, grad))
    }

    /// Backpropagates through the latent and decoder layers; writes their
    /// gradients into `grad` and returns the gradient of the pooled features.
    fn head_backward(&self, acts: &[Array2<f64>], mut d_pre: Array2<f64>, grad: &mut [f64]) -> Array2<f64> {
        for (k, layer) in self.head_layers().iter().enumerate().rev() {
            let input = &acts[k];
            layer.weights_mut(grad).assign(&input.t().dot(&d_pre));
            layer.bias_mut(grad).assign(&d_pre.sum_axis(Axis(0)));
            let mut d_input = d_pre.dot(&layer.weights(&self.values).t());
            if k > 0 {
                d_input.zip_mut_with(input, |d, &a| *d *= leaky_slope_at(a));
            }
            d_pre = d_input;
        }
        d_pre
    }

    /// Gradient of the per-point layers for one cloud. Only points that won
    /// a pooled feature receive gradient, so the pass works on those rows.
    fn point_backward(&self, pass: &PointPass, d_pooled: ArrayView1<f64>) -> Vec<f64> {
        let mut rows = pass.argmax.clone();
        rows.sort_unstable();
        rows.dedup();
        let layers = self.point_layers();
        let top_index = layers.len() - 1;
        let top_layer = layers[top_index];
        let top = &pass.acts[top_index + 1];
        let below = &pass.acts[top_index];
        let weights = top_layer.weights(&self.values);
        let mut grad = vec![0.0; self.encoder_len()];

        // Each pooled feature has exactly one winning point, so the top
        // layer's gradient is a sum of rank-one column updates.
        let mut d_input = Array2::zeros((rows.len(), top_layer.inputs));
        {
            let mut d_w = top_layer.weights_mut(&mut grad);
            for (j, &winner) in pass.argmax.iter().enumerate() {
                let d = d_pooled[j] * leaky_slope_at(top[[winner, j]]);
                let r = rows.binary_search(&winner).expect("winner row");
                d_w.column_mut(j).scaled_add(d, &below.row(winner));
                d_input.row_mut(r).scaled_add(d, &weights.column(j));
            }
        }
        {
            let mut d_b = top_layer.bias_mut(&mut grad);
            for (j, &winner) in pass.argmax.iter().enumerate() {
                d_b[j] = d_pooled[j] * leaky_slope_at(top[[winner, j]]);
            }
        }

        let mut d_pre = d_input;
        for (k, layer) in layers[..top_index].iter().enumerate().rev() {
            let output = pass.acts[k + 1].select(Axis(0), &rows);
            d_pre.zip_mut_with(&output, |d, &a| *d *= leaky_slope_at(a));
            let input = pass.acts[k].select(Axis(0), &rows);
            layer.weights_mut(&mut grad).assign(&input.t().dot(&d_pre));
            layer.bias_mut(&mut grad).assign(&d_pre.sum_axis(Axis(0)));
            if k > 0 {
                d_pre = d_pre.dot(&layer.weights(&self.values).t());
            }
        }
        grad
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn small() -> Architecture {
        Architecture {
            encoder: vec![8, 12],
            latent: 4,
            decoder: vec![16],
        }
    }

    fn random_cloud(rng: &mut impl Rng, n: usize) -> PointCloud {
        PointCloud::new(
            (0..n)
                .map(|_| Point3::from_fn(|_, _| rng.random_range(-1.0..1.0)))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn parameter_count() {
        let p = AutoencoderParams::zeros(Architecture::default(), 256).unwrap();
        let expected = 4 * 64 + 65 * 128 + 129 * 64 + 65 * 256 + 257 * 512 + 513 * 768;
        assert_eq!(p.len(), expected);
    }

    #[test]
    fn zero_weights_output_the_bias_pattern() {
        let mut p = AutoencoderParams::zeros(small(), 10).unwrap();
        let out_layer = *p.layers.last().unwrap();
        let pattern: Vec<f64> = (0..30).map(|i| i as f64 * 0.1 - 1.0).collect();
        p.values_mut()[out_layer.offset + out_layer.inputs * out_layer.outputs..]
            .copy_from_slice(&pattern);
        let mut rng = seed::rng(1);
        for _ in 0..3 {
            let out = p.forward(&random_cloud(&mut rng, 10)).unwrap();
            assert_eq!(out.flat(), pattern);
        }
    }

    #[test]
    fn forward_is_permutation_invariant() {
        let mut rng = seed::rng(2);
        let p = AutoencoderParams::init(Architecture::default(), 64, &mut rng).unwrap();
        let cloud = random_cloud(&mut rng, 64);
        let mut shuffled = cloud.clone();
        shuffled.points.reverse();
        shuffled.points.swap(3, 40);
        assert_eq!(p.forward(&cloud).unwrap(), p.forward(&shuffled).unwrap());
    }

    #[test]
    fn forward_rejects_wrong_sizes() {
        let p = AutoencoderParams::zeros(small(), 10).unwrap();
        let cloud = random_cloud(&mut seed::rng(0), 11);
        assert!(matches!(p.forward(&cloud), Err(Error::ShapeMismatch(_))));
        assert!(matches!(p.loss_and_grad(&[&cloud]), Err(Error::ShapeMismatch(_))));
        assert!(matches!(p.loss_and_grad(&[]), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn large_inputs_stay_finite() {
        let mut rng = seed::rng(3);
        let p = AutoencoderParams::init(Architecture::default(), 32, &mut rng).unwrap();
        let mut cloud = random_cloud(&mut rng, 32);
        for q in &mut cloud.points {
            *q *= 1e6;
        }
        assert!(p.forward(&cloud).unwrap().points.iter().all(|q| q.iter().all(|c| c.is_finite())));
    }

    #[test]
    fn duplicated_batch_keeps_the_loss() {
        let mut rng = seed::rng(4);
        let p = AutoencoderParams::init(small(), 16, &mut rng).unwrap();
        let a = random_cloud(&mut rng, 16);
        let b = random_cloud(&mut rng, 16);
        let (single, g1) = p.loss_and_grad(&[&a, &b]).unwrap();
        let (double, g2) = p.loss_and_grad(&[&a, &b, &a, &b]).unwrap();
        assert!(single >= 0.0);
        assert!((single - double).abs() <= 1e-12 * single.max(1.0));
        for (x, y) in g1.iter().zip(&g2) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-3));
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = seed::rng(5);
        let arch = Architecture {
            latent: 4,
            ..Architecture::default()
        };
        let mut p = AutoencoderParams::init(arch, 16, &mut rng).unwrap();
        let batch: Vec<PointCloud> = (0..2).map(|_| random_cloud(&mut rng, 16)).collect();
        let refs: Vec<&PointCloud> = batch.iter().collect();
        let (_, grad) = p.loss_and_grad(&refs).unwrap();
        let h = 1e-6;
        let coords: Vec<usize> = p
            .layers
            .iter()
            .flat_map(|l| [l.offset, l.offset + l.inputs * l.outputs - 1, l.offset + l.len() - 1])
            .collect();
        let (mut num, mut diff) = (0.0f64, 0.0f64);
        for &k in &coords {
            let orig = p.values[k];
            p.values[k] = orig + h;
            let up = p.loss_and_grad(&refs).unwrap().0;
            p.values[k] = orig - h;
            let down = p.loss_and_grad(&refs).unwrap().0;
            p.values[k] = orig;
            let fd = (up - down) / (2.0 * h);
            num = num.max(fd.abs()).max(grad[k].abs());
            diff = diff.max((fd - grad[k]).abs());
        }
        assert!(diff <= 1e-4 * num, "{diff} vs {num}");
    }
}
