use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{param_count, Activation, MlpSpec};
use crate::error::{invalid, Error, Result};
use crate::rng::{derive_stream, SeedSpec};

const BN_EPS: f64 = 1e-5;
const BN_MOMENTUM: f64 = 0.1;
const PRELU_INIT: f64 = 0.25;
/// Scaled inputs are clamped to this magnitude; infinite statistics land here.
const FEATURE_CLAMP: f64 = 1e3;

/// A monotone map applied to a raw feature before shifting and scaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureTransform {
    #[default]
    Identity,
    /// `sign(x)·√|x|`, which tames heavy-tailed statistics.
    Sqrt,
}

impl FeatureTransform {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Self::Identity => x,
            Self::Sqrt => x.signum() * x.abs().sqrt(),
        }
    }
}

/// Input preprocessing `(t(x) − shift) / scale`, applied per feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
    /// Per-feature transforms; empty means identity throughout.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub transform: Vec<FeatureTransform>,
}

impl FeatureMap {
    pub fn identity(dim: usize) -> Self {
        Self {
            shift: vec![0.0; dim],
            scale: vec![1.0; dim],
            transform: Vec::new(),
        }
    }

    pub fn new(shift: Vec<f64>, scale: Vec<f64>) -> Result<Self> {
        if shift.len() != scale.len() {
            return Err(invalid("feature shift and scale lengths differ"));
        }
        if scale.iter().any(|s| !(s.is_finite() && *s != 0.0))
            || shift.iter().any(|s| !s.is_finite())
        {
            return Err(invalid("feature scales must be finite and nonzero"));
        }
        Ok(Self {
            shift,
            scale,
            transform: Vec::new(),
        })
    }

    pub fn with_transforms(mut self, transform: Vec<FeatureTransform>) -> Result<Self> {
        if !transform.is_empty() && transform.len() != self.dim() {
            return Err(invalid("need one transform per feature"));
        }
        self.transform = transform;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    /// Maps one feature vector in natural units into `out`.
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let t = self.transform.get(j).map_or(x[j], |t| t.apply(x[j]));
            let v = (t - self.shift[j]) / self.scale[j];
            *o = if v.is_nan() {
                0.0
            } else {
                v.clamp(-FEATURE_CLAMP, FEATURE_CLAMP)
            };
        }
    }

    pub fn apply_batch(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; x.len()];
        for (src, dst) in x.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
            self.apply_into(src, dst);
        }
        out
    }
}

/// Offsets of one layer's parameters inside the flat parameter vector.
#[derive(Debug, Clone, Copy)]
struct Slots {
    fan_in: usize,
    fan_out: usize,
    weights: usize,
    bias: usize,
    gamma: Option<usize>,
    beta: Option<usize>,
    slope: Option<usize>,
}

fn layout(spec: &MlpSpec) -> Vec<Slots> {
    let sizes = &spec.layer_sizes;
    let last = sizes.len() - 2;
    let mut at = 0;
    let mut out = Vec::with_capacity(sizes.len() - 1);
    for (l, w) in sizes.windows(2).enumerate() {
        let (fan_in, fan_out) = (w[0], w[1]);
        let hidden = l < last;
        let weights = at;
        at += fan_in * fan_out;
        let bias = at;
        at += fan_out;
        let (gamma, beta) = if hidden && spec.batch_norm {
            let g = at;
            at += 2 * fan_out;
            (Some(g), Some(g + fan_out))
        } else {
            (None, None)
        };
        let slope = if hidden && spec.activation == Activation::Prelu {
            at += 1;
            Some(at - 1)
        } else {
            None
        };
        out.push(Slots {
            fan_in,
            fan_out,
            weights,
            bias,
            gamma,
            beta,
            slope,
        });
    }
    out
}

/// Gradients with respect to the flat parameter vector.
pub type Gradients = Vec<f64>;

/// A trained (or freshly initialized) network together with its input map
/// and batch-norm running statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    spec: MlpSpec,
    features: FeatureMap,
    params: Vec<f64>,
    running_mean: Vec<Vec<f64>>,
    running_var: Vec<Vec<f64>>,
}

/// Per-layer intermediates kept for the backward pass.
#[derive(Default)]
struct LayerCache {
    input: Vec<f64>,
    /// Dense output, before normalization.
    dense: Vec<f64>,
    normalized: Vec<f64>,
    inv_std: Vec<f64>,
    /// Input to the activation.
    pre_act: Vec<f64>,
}

pub(crate) struct BatchStats {
    pub mean: Vec<Vec<f64>>,
    pub var: Vec<Vec<f64>>,
}

impl MlpModel {
    /// Fan-in scaled uniform initialization, PReLU slopes at 0.25, unit
    /// normalization scales.
    pub fn init(spec: MlpSpec, features: FeatureMap, seed: SeedSpec) -> Result<Self> {
        spec.validate()?;
        if features.dim() != spec.inputs() {
            return Err(Error::Dimension {
                expected: spec.inputs(),
                got: features.dim(),
            });
        }
        let mut rng = derive_stream(seed, 0);
        let mut params = vec![0.0; param_count(&spec)];
        let slots = layout(&spec);
        for s in &slots {
            let bound = 1.0 / (s.fan_in as f64).sqrt();
            for p in &mut params[s.weights..s.bias + s.fan_out] {
                *p = rng.random_range(-bound..bound);
            }
            if let Some(g) = s.gamma {
                params[g..g + s.fan_out].fill(1.0);
            }
            if let Some(k) = s.slope {
                params[k] = PRELU_INIT;
            }
        }
        Ok(Self::from_params(spec, features, params))
    }

    /// A model with every parameter zero (normalization scales included).
    pub fn zeros(spec: MlpSpec, features: FeatureMap) -> Result<Self> {
        spec.validate()?;
        let params = vec![0.0; param_count(&spec)];
        Ok(Self::from_params(spec, features, params))
    }

    fn from_params(spec: MlpSpec, features: FeatureMap, params: Vec<f64>) -> Self {
        let hidden: Vec<usize> = spec.layer_sizes[1..spec.layer_sizes.len() - 1].to_vec();
        let (running_mean, running_var) = if spec.batch_norm {
            (
                hidden.iter().map(|&h| vec![0.0; h]).collect(),
                hidden.iter().map(|&h| vec![1.0; h]).collect(),
            )
        } else {
            (Vec::new(), Vec::new())
        };
        Self {
            spec,
            features,
            params,
            running_mean,
            running_var,
        }
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn feature_map(&self) -> &FeatureMap {
        &self.features
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn inputs(&self) -> usize {
        self.spec.inputs()
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
            && self
                .running_var
                .iter()
                .flatten()
                .all(|v| v.is_finite() && *v >= 0.0)
    }

    fn check_batch(&self, features: &[f64]) -> Result<usize> {
        let d = self.inputs();
        if !features.len().is_multiple_of(d) {
            return Err(Error::Dimension {
                expected: d,
                got: features.len() % d,
            });
        }
        Ok(features.len() / d)
    }

    /// Inference-mode predictions for a row-major batch of natural-unit
    /// feature vectors. Outputs lie strictly inside (0, 1).
    pub fn forward(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.check_batch(features)?;
        let mapped = self.features.apply_batch(features);
        Ok(self.forward_mapped(&mapped))
    }

    /// Prediction for a single feature vector.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.inputs() {
            return Err(Error::Dimension {
                expected: self.inputs(),
                got: x.len(),
            });
        }
        Ok(self.forward(x)?[0])
    }

    /// Inference on already-mapped inputs.
    pub(crate) fn forward_mapped(&self, mapped: &[f64]) -> Vec<f64> {
        let batch = mapped.len() / self.inputs();
        let slots = layout(&self.spec);
        let mut act = mapped.to_vec();
        for (l, s) in slots.iter().enumerate() {
            let mut z = dense(&self.params, s, &act, batch);
            if l + 1 == slots.len() {
                return z.iter().map(|&o| sigmoid(o)).collect();
            }
            if let (Some(g), Some(b)) = (s.gamma, s.beta) {
                let (mean, var) = (&self.running_mean[l], &self.running_var[l]);
                for row in z.chunks_exact_mut(s.fan_out) {
                    for (j, v) in row.iter_mut().enumerate() {
                        let xhat = (*v - mean[j]) / (var[j] + BN_EPS).sqrt();
                        *v = self.params[g + j] * xhat + self.params[b + j];
                    }
                }
            }
            let slope = s.slope.map_or(0.0, |k| self.params[k]);
            for v in &mut z {
                if *v <= 0.0 {
                    *v *= slope;
                }
            }
            act = z;
        }
        unreachable!("network has an output layer")
    }

    /// Mean squared error and its exact gradient on one batch, in training
    /// mode (batch statistics when normalization is on).
    pub fn loss_and_grad(&self, features: &[f64], targets: &[f64]) -> Result<(f64, Gradients)> {
        let batch = self.check_batch(features)?;
        if batch != targets.len() {
            return Err(Error::Dimension {
                expected: batch,
                got: targets.len(),
            });
        }
        let mapped = self.features.apply_batch(features);
        let (loss, grads, _) = self.loss_and_grad_mapped(&mapped, targets)?;
        Ok((loss, grads))
    }

    pub(crate) fn loss_and_grad_mapped(
        &self,
        x: &[f64],
        targets: &[f64],
    ) -> Result<(f64, Gradients, BatchStats)> {
        let batch = targets.len();
        if batch == 0 {
            return Err(invalid("empty batch"));
        }
        if self.spec.batch_norm && batch < 2 {
            return Err(invalid(
                "batch normalization needs batches of at least two rows",
            ));
        }
        let slots = layout(&self.spec);
        let n_layers = slots.len();
        let mut caches: Vec<LayerCache> = Vec::with_capacity(n_layers - 1);
        let mut stats = BatchStats {
            mean: Vec::new(),
            var: Vec::new(),
        };
        let bf = batch as f64;

        let mut act = x.to_vec();
        for s in &slots[..n_layers - 1] {
            let z = dense(&self.params, s, &act, batch);
            let mut cache = LayerCache {
                input: act,
                ..Default::default()
            };
            let mut pre = z.clone();
            if let (Some(g), Some(b)) = (s.gamma, s.beta) {
                let width = s.fan_out;
                let mut mean = vec![0.0; width];
                for row in z.chunks_exact(width) {
                    for j in 0..width {
                        mean[j] += row[j];
                    }
                }
                mean.iter_mut().for_each(|m| *m /= bf);
                let mut var = vec![0.0; width];
                for row in z.chunks_exact(width) {
                    for j in 0..width {
                        var[j] += (row[j] - mean[j]).powi(2);
                    }
                }
                var.iter_mut().for_each(|v| *v /= bf);
                let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
                let mut normalized = vec![0.0; z.len()];
                for (i, (zr, nr)) in z
                    .chunks_exact(width)
                    .zip(normalized.chunks_exact_mut(width))
                    .enumerate()
                {
                    for j in 0..width {
                        nr[j] = (zr[j] - mean[j]) * inv_std[j];
                        pre[i * width + j] = self.params[g + j] * nr[j] + self.params[b + j];
                    }
                }
                cache.normalized = normalized;
                cache.inv_std = inv_std;
                stats.mean.push(mean);
                stats.var.push(var);
            }
            let slope = s.slope.map_or(0.0, |k| self.params[k]);
            let next: Vec<f64> = pre
                .iter()
                .map(|&v| if v > 0.0 { v } else { slope * v })
                .collect();
            cache.dense = z;
            cache.pre_act = pre;
            caches.push(cache);
            act = next;
        }
        let out_slots = &slots[n_layers - 1];
        let logits = dense(&self.params, out_slots, &act, batch);

        let mut loss = 0.0;
        let mut delta = vec![0.0; batch];
        for i in 0..batch {
            let f = sigmoid(logits[i]);
            let r = f - targets[i];
            loss += r * r;
            delta[i] = 2.0 * r / bf * f * (1.0 - f);
        }
        loss /= bf;

        let mut grads = vec![0.0; self.params.len()];
        let mut upstream = dense_backward(&self.params, out_slots, &act, &delta, batch, &mut grads);
        for l in (0..n_layers - 1).rev() {
            let s = &slots[l];
            let cache = &caches[l];
            let width = s.fan_out;
            // activation
            let slope = s.slope.map_or(0.0, |k| self.params[k]);
            let mut d_pre = vec![0.0; upstream.len()];
            let mut d_slope = 0.0;
            for (k, (&u, &p)) in upstream.iter().zip(&cache.pre_act).enumerate() {
                if p > 0.0 {
                    d_pre[k] = u;
                } else {
                    d_pre[k] = slope * u;
                    d_slope += u * p;
                }
            }
            if let Some(k) = s.slope {
                grads[k] += d_slope;
            }
            // normalization
            let d_dense = if let (Some(g), Some(b)) = (s.gamma, s.beta) {
                let mut sum_dy = vec![0.0; width];
                let mut sum_dy_xhat = vec![0.0; width];
                for (dr, nr) in d_pre
                    .chunks_exact(width)
                    .zip(cache.normalized.chunks_exact(width))
                {
                    for j in 0..width {
                        sum_dy[j] += dr[j];
                        sum_dy_xhat[j] += dr[j] * nr[j];
                    }
                }
                for j in 0..width {
                    grads[g + j] += sum_dy_xhat[j];
                    grads[b + j] += sum_dy[j];
                }
                let mut dz = vec![0.0; d_pre.len()];
                for (i, (dr, nr)) in d_pre
                    .chunks_exact(width)
                    .zip(cache.normalized.chunks_exact(width))
                    .enumerate()
                {
                    for j in 0..width {
                        let scale = self.params[g + j] * cache.inv_std[j] / bf;
                        dz[i * width + j] =
                            scale * (bf * dr[j] - sum_dy[j] - nr[j] * sum_dy_xhat[j]);
                    }
                }
                dz
            } else {
                d_pre
            };
            upstream = dense_backward(&self.params, s, &cache.input, &d_dense, batch, &mut grads);
        }
        Ok((loss, grads, stats))
    }

    /// Exponential moving update of the normalization running statistics
    /// (unbiased batch variance, as in common frameworks).
    pub(crate) fn update_running_stats(&mut self, stats: &BatchStats, batch: usize) {
        let correction = batch as f64 / (batch as f64 - 1.0).max(1.0);
        for (l, (mean, var)) in stats.mean.iter().zip(&stats.var).enumerate() {
            for j in 0..mean.len() {
                self.running_mean[l][j] =
                    (1.0 - BN_MOMENTUM) * self.running_mean[l][j] + BN_MOMENTUM * mean[j];
                self.running_var[l][j] = (1.0 - BN_MOMENTUM) * self.running_var[l][j]
                    + BN_MOMENTUM * var[j] * correction;
            }
        }
    }

    /// Mean squared error in inference mode.
    pub(crate) fn eval_loss_mapped(&self, x: &[f64], targets: &[f64]) -> f64 {
        let chunk = 4096 * self.inputs();
        let mut total = 0.0;
        for (xs, ts) in x.chunks(chunk).zip(targets.chunks(4096)) {
            let f = self.forward_mapped(xs);
            total += f.iter().zip(ts).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        }
        total / targets.len() as f64
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        model.spec.validate()?;
        if model.params.len() != param_count(&model.spec)
            || model.features.dim() != model.spec.inputs()
        {
            return Err(invalid(
                "model artifact shapes do not match its architecture",
            ));
        }
        Ok(model)
    }
}

fn sigmoid(x: f64) -> f64 {
    let s = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    // keep probabilities strictly inside the unit interval
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

fn dense(params: &[f64], s: &Slots, input: &[f64], batch: usize) -> Vec<f64> {
    let w = &params[s.weights..s.weights + s.fan_in * s.fan_out];
    let b = &params[s.bias..s.bias + s.fan_out];
    let mut out = vec![0.0; batch * s.fan_out];
    for (x, o) in input
        .chunks_exact(s.fan_in)
        .zip(out.chunks_exact_mut(s.fan_out))
    {
        for (j, oj) in o.iter_mut().enumerate() {
            let row = &w[j * s.fan_in..(j + 1) * s.fan_in];
            *oj = b[j] + row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>();
        }
    }
    out
}

/// Accumulates weight/bias gradients and returns the gradient w.r.t. `input`.
fn dense_backward(
    params: &[f64],
    s: &Slots,
    input: &[f64],
    d_out: &[f64],
    batch: usize,
    grads: &mut [f64],
) -> Vec<f64> {
    let (fi, fo) = (s.fan_in, s.fan_out);
    let mut d_in = vec![0.0; batch * fi];
    for i in 0..batch {
        let x = &input[i * fi..(i + 1) * fi];
        let dx = &mut d_in[i * fi..(i + 1) * fi];
        for j in 0..fo {
            let d = d_out[i * fo + j];
            if d == 0.0 {
                continue;
            }
            grads[s.bias + j] += d;
            let w_row = &params[s.weights + j * fi..s.weights + (j + 1) * fi];
            let g_row = &mut grads[s.weights + j * fi..s.weights + (j + 1) * fi];
            for k in 0..fi {
                g_row[k] += d * x[k];
                dx[k] += d * w_row[k];
            }
        }
    }
    d_in
}
