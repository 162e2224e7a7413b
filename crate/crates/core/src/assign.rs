//! Online primal-dual assignment.
//!
//! Each arriving instance takes the cluster maximizing `s_k + ρ_k`; after every
//! mini-batch the duals move against the averaged constraint gradient
//! `μ - γ/N` and are mapped back into their domain.

use crate::config::DualMode;
use crate::error::{CokeError, Result};
use crate::vector::SimilarityMatrix;

/// Per-cluster dual prices.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    rho: Vec<f64>,
    tau: Option<f64>,
    eta: f64,
}

impl DualState {
    pub fn new(k: usize, eta: f64, tau: Option<f64>) -> Self {
        Self { rho: vec![0.0; k], tau, eta }
    }

    pub fn with_rho(rho: Vec<f64>, eta: f64, tau: Option<f64>) -> Self {
        Self { rho, tau, eta }
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn k(&self) -> usize {
        self.rho.len()
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn tau(&self) -> Option<f64> {
        self.tau
    }

    /// One dual step from a mini-batch of hard labels.
    ///
    /// `gamma_fraction[k]` is `γ_k / N`.
    pub fn update(&mut self, batch_labels: &[usize], gamma_fraction: &[f64], mode: DualMode) -> Result<()> {
        let k = self.k();
        if gamma_fraction.len() != k {
            return Err(CokeError::Shape { expected: k, got: gamma_fraction.len() });
        }
        if batch_labels.is_empty() {
            return Ok(());
        }
        let mut counts = vec![0usize; k];
        for &l in batch_labels {
            if l >= k {
                return Err(CokeError::Shape { expected: k, got: l + 1 });
            }
            counts[l] += 1;
        }
        let b = batch_labels.len() as f64;
        for ((r, &c), &g) in self.rho.iter_mut().zip(&counts).zip(gamma_fraction) {
            *r -= self.eta * (c as f64 / b - g);
        }
        match (mode, self.tau) {
            (DualMode::Projected, Some(tau)) => self.rho = project_delta_tau(&self.rho, tau),
            _ => self.rho.iter_mut().for_each(|r| *r = r.max(0.0)),
        }
        Ok(())
    }
}

/// Functional form of [`DualState::update`].
pub fn dual_update(duals: &DualState, batch_labels: &[usize], gamma_fraction: &[f64], mode: DualMode) -> Result<DualState> {
    let mut next = duals.clone();
    next.update(batch_labels, gamma_fraction, mode)?;
    Ok(next)
}

/// `argmax_k (s_k + ρ_k)`, lowest index on ties.
pub fn assign_hard(s: &[f64], duals: &DualState) -> Result<usize> {
    if s.len() != duals.k() {
        return Err(CokeError::Shape { expected: duals.k(), got: s.len() });
    }
    Ok(argmax_shifted(s.iter().copied(), &duals.rho))
}

/// Shared label for two views: the hard assignment of their mean similarity row.
pub fn assign_two_view(s1: &[f64], s2: &[f64], duals: &DualState) -> Result<usize> {
    if s1.len() != s2.len() {
        return Err(CokeError::Shape { expected: s1.len(), got: s2.len() });
    }
    if s1.len() != duals.k() {
        return Err(CokeError::Shape { expected: duals.k(), got: s1.len() });
    }
    Ok(argmax_shifted(s1.iter().zip(s2).map(|(a, b)| 0.5 * (a + b)), &duals.rho))
}

fn argmax_shifted(s: impl Iterator<Item = f64>, rho: &[f64]) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (k, (v, r)) in s.zip(rho).enumerate() {
        let v = v + r;
        if v > best_val {
            best_val = v;
            best = k;
        }
    }
    best
}

/// Euclidean projection onto `{ρ ≥ 0, ‖ρ‖₁ ≤ τ}`.
pub fn project_delta_tau(rho: &[f64], tau: f64) -> Vec<f64> {
    let clamped: Vec<f64> = rho.iter().map(|r| r.max(0.0)).collect();
    let sum: f64 = clamped.iter().sum();
    if sum <= tau {
        return clamped;
    }
    // Sorted soft threshold onto the scaled simplex.
    let mut sorted = clamped.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &v) in sorted.iter().enumerate() {
        cumulative += v;
        let t = (cumulative - tau) / (j + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    clamped.iter().map(|v| (v - theta).max(0.0)).collect()
}

/// Streams the rows of `sims` in `order`, assigning each mini-batch against a
/// frozen dual snapshot and updating the duals after it. Returns labels indexed
/// by row.
pub fn online_pass(
    sims: &SimilarityMatrix,
    order: &[usize],
    duals: &mut DualState,
    gamma_fraction: &[f64],
    mode: DualMode,
    batch_size: usize,
) -> Result<Vec<usize>> {
    if batch_size == 0 {
        return Err(CokeError::Config("batch size must be positive".into()));
    }
    let mut labels = vec![0usize; sims.n()];
    let mut batch = Vec::with_capacity(batch_size);
    for chunk in order.chunks(batch_size) {
        batch.clear();
        for &i in chunk {
            let l = assign_hard(sims.row(i), duals)?;
            labels[i] = l;
            batch.push(l);
        }
        duals.update(&batch, gamma_fraction, mode)?;
    }
    Ok(labels)
}
