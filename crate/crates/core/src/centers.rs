//! Cluster centers maintained from streaming per-epoch accumulators.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CokeError, Result};
use crate::vector::{norm, UnitVector, DEGENERATE_NORM};

#[derive(Debug, Clone, PartialEq)]
pub struct CenterSet {
    dim: usize,
    centers: Vec<UnitVector>,
    prev_centers: Vec<UnitVector>,
    acc_sum: Vec<Vec<f64>>,
    acc_count: Vec<usize>,
    /// Number of completed epochs; `prev_centers` is the snapshot taken at the end of epoch `epoch`.
    epoch: usize,
    /// True once the current centers differ from the snapshot in this epoch.
    touched: bool,
}

impl CenterSet {
    pub fn from_centers(centers: Vec<UnitVector>) -> Result<Self> {
        let dim = centers.first().map(UnitVector::dim).ok_or_else(|| CokeError::Config("at least one center is required".into()))?;
        if let Some(c) = centers.iter().find(|c| c.dim() != dim) {
            return Err(CokeError::Shape { expected: dim, got: c.dim() });
        }
        let k = centers.len();
        Ok(Self {
            dim,
            prev_centers: centers.clone(),
            centers,
            acc_sum: vec![vec![0.0; dim]; k],
            acc_count: vec![0; k],
            epoch: 0,
            touched: false,
        })
    }

    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Centers as of the latest update.
    pub fn centers(&self) -> &[UnitVector] {
        &self.centers
    }

    /// Snapshot from the end of the previous epoch.
    pub fn prev_centers(&self) -> &[UnitVector] {
        &self.prev_centers
    }

    pub fn acc_count(&self) -> &[usize] {
        &self.acc_count
    }

    pub fn acc_sum(&self) -> &[Vec<f64>] {
        &self.acc_sum
    }

    pub fn completed_epochs(&self) -> usize {
        self.epoch
    }

    /// Epoch whose data last moved `centers()`: the running epoch once any
    /// mini-batch update happened in it, otherwise the last completed one.
    pub fn current_tag(&self) -> usize {
        if self.touched {
            self.epoch + 1
        } else {
            self.epoch
        }
    }

    /// Adds a batch to the accumulators without moving the centers.
    pub fn accumulate(&mut self, batch: &[(&[f64], usize)]) -> Result<()> {
        for &(x, label) in batch {
            if label >= self.k() {
                return Err(CokeError::Shape { expected: self.k(), got: label + 1 });
            }
            if x.len() != self.dim {
                return Err(CokeError::Shape { expected: self.dim, got: x.len() });
            }
        }
        for &(x, label) in batch {
            for (a, v) in self.acc_sum[label].iter_mut().zip(x) {
                *a += v;
            }
            self.acc_count[label] += 1;
        }
        Ok(())
    }

    /// Accumulates the batch, then moves every touched center to the
    /// normalized running mean of its epoch-so-far members.
    pub fn update_minibatch(&mut self, batch: &[(&[f64], usize)]) -> Result<()> {
        self.accumulate(batch)?;
        let mut seen = vec![false; self.k()];
        for &(_, label) in batch {
            seen[label] = true;
        }
        for (k, _) in seen.iter().enumerate().filter(|(_, &s)| s) {
            self.centers[k] = self.mean_center(k)?;
        }
        if !batch.is_empty() {
            self.touched = true;
        }
        Ok(())
    }

    fn mean_center(&self, k: usize) -> Result<UnitVector> {
        let sum = &self.acc_sum[k];
        let n = norm(sum);
        if !(n >= DEGENERATE_NORM) {
            return Err(CokeError::DegenerateMean { cluster: k, norm: n });
        }
        // Dividing by the count first does not change the direction.
        UnitVector::from_unit(sum.iter().map(|v| v / n).collect::<Vec<_>>())
    }

    /// Recomputes every nonempty center from the full-epoch accumulators,
    /// snapshots the result as the previous centers and resets the accumulators.
    pub fn finalize_epoch(&mut self) -> Result<()> {
        for k in 0..self.k() {
            self.centers[k] = if self.acc_count[k] > 0 { self.mean_center(k)? } else { self.prev_centers[k].clone() };
        }
        self.prev_centers = self.centers.clone();
        self.reset_accumulators();
        self.epoch += 1;
        self.touched = false;
        Ok(())
    }

    /// Zeroes the accumulators.
    pub fn reset_accumulators(&mut self) {
        for s in &mut self.acc_sum {
            s.iter_mut().for_each(|v| *v = 0.0);
        }
        self.acc_count.iter_mut().for_each(|c| *c = 0);
    }

    /// Discards in-epoch progress: accumulators cleared, centers back at the snapshot.
    pub fn rewind_epoch(&mut self) {
        self.reset_accumulators();
        self.centers = self.prev_centers.clone();
        self.touched = false;
    }
}

/// `K` distinct points sampled uniformly without replacement, used as initial centers.
pub fn init_centers(points: &[UnitVector], k: usize, seed: u64) -> Result<CenterSet> {
    if k == 0 {
        return Err(CokeError::Config("K must be positive".into()));
    }
    if k > points.len() {
        return Err(CokeError::Infeasible(format!("K = {k} exceeds n = {}", points.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = sample(&mut rng, points.len(), k);
    CenterSet::from_centers(picks.iter().map(|i| points[i].clone()).collect())
}
