//! Normalized-softmax discrimination against fixed cluster centers, and the
//! linear encoder that is trained with it.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{CokeError, Result};
use crate::vector::{dot, norm, normalize, UnitVector, DEGENERATE_NORM};

/// A probability distribution over clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftLabel(Vec<f64>);

impl SoftLabel {
    pub fn one_hot(k: usize, label: usize) -> Self {
        let mut v = vec![0.0; k];
        v[label] = 1.0;
        SoftLabel(v)
    }

    /// Validates nonnegativity and unit mass (±1e-9).
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !(v >= &0.0) || !v.is_finite()) {
            return Err(CokeError::Numeric("soft label entries must be finite and nonnegative".into()));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CokeError::Numeric(format!("soft label sums to {sum}")));
        }
        Ok(SoftLabel(values))
    }

    /// Builds a dense label from `(index, value)` pairs.
    pub fn from_sparse(k: usize, entries: &[(usize, f64)]) -> Result<Self> {
        let mut v = vec![0.0; k];
        for &(i, w) in entries {
            if i >= k {
                return Err(CokeError::Shape { expected: k, got: i + 1 });
            }
            v[i] += w;
        }
        Self::new(v)
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Nonzero entries as `(index, value)` pairs.
    pub fn sparse(&self) -> Vec<(usize, f64)> {
        self.0.iter().copied().enumerate().filter(|(_, v)| *v > 0.0).collect()
    }

    /// Index of the largest entry, lowest index on ties.
    pub fn argmax(&self) -> usize {
        self.0.iter().enumerate().fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) }).0
    }

    pub fn entropy(&self) -> f64 {
        -self.0.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>()
    }
}

fn logits(x: &[f64], centers: &[UnitVector], temperature: f64) -> Vec<f64> {
    centers.iter().map(|c| dot(x, c) / temperature).collect()
}

/// Max-shifted log-softmax.
fn log_softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    z.iter().map(|v| v - lse).collect()
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `softmax(xᵀc_k / λ)`.
pub fn predict_probs(x: &[f64], centers: &[UnitVector], temperature: f64) -> SoftLabel {
    SoftLabel(softmax(&logits(x, centers, temperature)))
}

/// Cross entropy of the stored hard label.
pub fn loss_hard(x: &[f64], label: usize, centers: &[UnitVector], temperature: f64) -> f64 {
    -log_softmax(&logits(x, centers, temperature))[label]
}

/// `−Σ_k y_k log p_k`.
pub fn loss_soft(x: &[f64], y: &SoftLabel, centers: &[UnitVector], temperature: f64) -> f64 {
    let lp = log_softmax(&logits(x, centers, temperature));
    -y.0.iter().zip(&lp).filter(|(w, _)| **w > 0.0).map(|(w, l)| w * l).sum::<f64>()
}

/// `α · onehot(hard) + (1 − α) · reference`.
pub fn mix_reference(hard: usize, reference: &SoftLabel, alpha: f64) -> SoftLabel {
    let mut v: Vec<f64> = reference.0.iter().map(|p| (1.0 - alpha) * p).collect();
    v[hard] += alpha;
    SoftLabel(v)
}

/// `x = normalize(W r)` with plain SGD and weight decay.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearEncoder {
    d_in: usize,
    d_out: usize,
    /// Row-major `d_out × d_in`.
    weights: Vec<f64>,
    pub learning_rate: f64,
    pub weight_decay: f64,
}

impl LinearEncoder {
    pub fn from_weights(d_out: usize, d_in: usize, weights: Vec<f64>, learning_rate: f64, weight_decay: f64) -> Result<Self> {
        if d_out < 2 {
            return Err(CokeError::Config("encoder output dimension must be at least 2".into()));
        }
        if weights.len() != d_out * d_in {
            return Err(CokeError::Shape { expected: d_out * d_in, got: weights.len() });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(CokeError::Numeric("encoder weights must be finite".into()));
        }
        Ok(Self { d_in, d_out, weights, learning_rate, weight_decay })
    }

    /// Gaussian initialization with variance `1 / d_in`.
    pub fn random<R: Rng + ?Sized>(d_out: usize, d_in: usize, learning_rate: f64, weight_decay: f64, rng: &mut R) -> Result<Self> {
        let normal = Normal::new(0.0, 1.0 / (d_in as f64).sqrt()).map_err(|e| CokeError::Numeric(e.to_string()))?;
        let weights = (0..d_out * d_in).map(|_| normal.sample(rng)).collect();
        Self::from_weights(d_out, d_in, weights, learning_rate, weight_decay)
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    fn project(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.d_in {
            return Err(CokeError::Shape { expected: self.d_in, got: raw.len() });
        }
        Ok(self.weights.chunks(self.d_in).map(|row| dot(row, raw)).collect())
    }
}

pub fn encoder_forward(enc: &LinearEncoder, raw: &[f64]) -> Result<UnitVector> {
    normalize(&enc.project(raw)?)
}

/// One input to an encoder step: a raw view and, per clustering head, the
/// centers and soft target it is scored against. The item loss is the mean
/// over its targets.
#[derive(Debug, Clone)]
pub struct TrainItem<'a> {
    pub raw: &'a [f64],
    pub targets: Vec<(&'a [UnitVector], &'a SoftLabel)>,
}

/// Mean soft-label loss over `items` and its gradient with respect to the
/// encoder weights (row-major, same layout as the weights). Centers are constants.
pub fn loss_and_grad(enc: &LinearEncoder, items: &[TrainItem<'_>], temperature: f64) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; enc.weights.len()];
    if items.is_empty() {
        return Ok((0.0, grad));
    }
    let mut total = 0.0;
    let mut g_z = vec![0.0; enc.d_out];
    for item in items {
        let z = enc.project(item.raw)?;
        let zn = norm(&z);
        if !(zn >= DEGENERATE_NORM) {
            return Err(CokeError::DegenerateVector { norm: zn });
        }
        let x: Vec<f64> = z.iter().map(|v| v / zn).collect();
        let heads = item.targets.len().max(1) as f64;

        // dL/dx = Σ_k (p_k − y_k) c_k / λ, averaged over heads.
        let mut g_x = vec![0.0; enc.d_out];
        for &(centers, y) in &item.targets {
            if y.k() != centers.len() {
                return Err(CokeError::Shape { expected: centers.len(), got: y.k() });
            }
            let lp = log_softmax(&logits(&x, centers, temperature));
            total += -y.0.iter().zip(&lp).filter(|(w, _)| **w > 0.0).map(|(w, l)| w * l).sum::<f64>() / heads;
            for ((c, l), w) in centers.iter().zip(&lp).zip(&y.0) {
                let coef = (l.exp() - w) / (temperature * heads);
                for (g, cv) in g_x.iter_mut().zip(c.iter()) {
                    *g += coef * cv;
                }
            }
        }
        // Through the normalization: dL/dz = (I − x xᵀ) dL/dx / ‖z‖.
        let proj = dot(&x, &g_x);
        for ((gz, gx), xv) in g_z.iter_mut().zip(&g_x).zip(&x) {
            *gz = (gx - proj * xv) / zn;
        }
        for (row, gz) in grad.chunks_mut(enc.d_in).zip(&g_z) {
            for (g, r) in row.iter_mut().zip(item.raw) {
                *g += gz * r;
            }
        }
    }
    let b = items.len() as f64;
    grad.iter_mut().for_each(|g| *g /= b);
    Ok((total / b, grad))
}

/// One SGD step on the mean loss of `items`. Returns the loss before the step.
pub fn encoder_step(enc: &mut LinearEncoder, items: &[TrainItem<'_>], temperature: f64) -> Result<f64> {
    let (loss, grad) = loss_and_grad(enc, items, temperature)?;
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(CokeError::Numeric("non-finite encoder gradient".into()));
    }
    let (lr, wd) = (enc.learning_rate, enc.weight_decay);
    for (w, g) in enc.weights.iter_mut().zip(&grad) {
        *w -= lr * (g + wd * *w);
    }
    Ok(loss)
}

/// Adds isotropic Gaussian noise, then zeroes each coordinate with probability `mask_rate`.
pub fn augment<R: Rng + ?Sized>(raw: &[f64], noise_sigma: f64, mask_rate: f64, rng: &mut R) -> Vec<f64> {
    let normal = Normal::new(0.0, noise_sigma.max(0.0)).expect("finite sigma");
    raw.iter()
        .map(|&v| {
            let v = if noise_sigma > 0.0 { v + normal.sample(rng) } else { v };
            if mask_rate > 0.0 && rng.random::<f64>() < mask_rate {
                0.0
            } else {
                v
            }
        })
        .collect()
}
