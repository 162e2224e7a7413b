//! Run configuration shared by the clustering and training loops.

use crate::error::{CokeError, Result};

/// When the cluster centers are recomputed from the streaming accumulators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CenterMode {
    /// After every mini-batch.
    PerMinibatch,
    /// Once, at the end of each epoch.
    PerEpoch,
    /// Per mini-batch up to `avg_start`, per epoch afterwards.
    TwoStage,
}

/// How the dual variables are kept in their domain after a gradient step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualMode {
    /// Element-wise `max(0, ·)`.
    Simplified,
    /// Euclidean projection onto `{ρ ≥ 0, Σρ ≤ τ}`.
    Projected,
}

/// Which epoch the discrimination loss takes its labels or centers from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Epoch {
    Previous,
    Current,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LossInputs {
    pub labels: Epoch,
    pub centers: Epoch,
}

impl Default for LossInputs {
    fn default() -> Self {
        Self { labels: Epoch::Previous, centers: Epoch::Previous }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CokeConfig {
    /// One clustering head per entry.
    pub k_heads: Vec<usize>,
    /// Lower bound on every cluster size as a fraction of the balanced size `N/K`.
    pub gamma_prime: f64,
    /// Dual step size.
    pub eta: f64,
    /// L1 budget for projected duals. `None` means unbounded.
    pub tau: Option<f64>,
    pub temperature: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Epoch after which the moving average starts.
    pub avg_start: usize,
    /// Weight of the stored one-hot label in the two-view targets.
    pub alpha: f64,
    pub views: usize,
    pub noise_sigma: f64,
    pub mask_rate: f64,
    pub seed: u64,
    pub center_mode: CenterMode,
    pub dual_mode: DualMode,
    pub monotone_guard: bool,
    pub embed_dim: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub loss_inputs: LossInputs,
    /// Record which epoch's centers and labels each loss evaluation consumed.
    pub trace: bool,
}

impl Default for CokeConfig {
    fn default() -> Self {
        let epochs = 50;
        Self {
            k_heads: vec![10],
            gamma_prime: 0.4,
            eta: 20.0,
            tau: None,
            temperature: 0.1,
            batch_size: 256,
            epochs,
            avg_start: default_avg_start(epochs),
            alpha: 0.2,
            views: 2,
            noise_sigma: 0.05,
            mask_rate: 0.0,
            seed: 0,
            center_mode: CenterMode::PerMinibatch,
            dual_mode: DualMode::Simplified,
            monotone_guard: false,
            embed_dim: 8,
            learning_rate: 0.5,
            weight_decay: 1e-4,
            loss_inputs: LossInputs::default(),
            trace: false,
        }
    }
}

/// `T' = 0.8 T`, rounded down.
pub fn default_avg_start(epochs: usize) -> usize {
    epochs * 4 / 5
}

/// Dual step that gives the `O(√N)` regret and violation guarantee.
pub fn regret_optimal_eta(tau: f64, n: usize) -> f64 {
    tau / (2.0 * n as f64).sqrt()
}

impl CokeConfig {
    /// Real-valued lower bound `γ = γ' N / K`.
    pub fn gamma(&self, n: usize, k: usize) -> f64 {
        self.gamma_prime * n as f64 / k as f64
    }

    /// Per-instance target share `γ_k / N = γ' / K`, identical for all clusters.
    pub fn gamma_fraction(&self, k: usize) -> Vec<f64> {
        vec![self.gamma_prime / k as f64; k]
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |m: String| Err(CokeError::Config(m));
        if self.k_heads.is_empty() {
            return bad("at least one head is required".into());
        }
        for &k in &self.k_heads {
            if k == 0 {
                return bad("cluster count must be positive".into());
            }
            if k > n {
                return Err(CokeError::Infeasible(format!("K = {k} exceeds N = {n}")));
            }
            if k as f64 * self.gamma(n, k) > n as f64 + 1e-9 {
                return Err(CokeError::Infeasible(format!("K·γ exceeds N for K = {k}, γ' = {}", self.gamma_prime)));
            }
        }
        if !(0.0..=1.0).contains(&self.gamma_prime) {
            return bad(format!("gamma_prime {} outside [0, 1]", self.gamma_prime));
        }
        if !(self.eta > 0.0) {
            return bad("eta must be positive".into());
        }
        if let Some(t) = self.tau {
            if !(t > 0.0) {
                return bad("tau must be positive".into());
            }
        }
        if !(self.temperature > 0.0) {
            return bad("temperature must be positive".into());
        }
        if self.batch_size == 0 || self.batch_size > n {
            return bad(format!("batch size {} must lie in [1, {n}]", self.batch_size));
        }
        if self.epochs == 0 {
            return bad("epochs must be positive".into());
        }
        if self.avg_start > self.epochs {
            return bad("avg_start must not exceed epochs".into());
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha outside [0, 1]".into());
        }
        if self.views != 1 && self.views != 2 {
            return bad("views must be 1 or 2".into());
        }
        if !(self.noise_sigma >= 0.0) {
            return bad("noise sigma must be nonnegative".into());
        }
        if !(0.0..1.0).contains(&self.mask_rate) {
            return bad("mask rate outside [0, 1)".into());
        }
        if self.embed_dim < 2 {
            return bad("embedding dimension must be at least 2".into());
        }
        if !(self.learning_rate >= 0.0) || !(self.weight_decay >= 0.0) {
            return bad("learning rate and weight decay must be nonnegative".into());
        }
        Ok(())
    }
}
