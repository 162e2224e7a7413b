//! Running means of centers and label vectors over the epochs after `T'`.

use crate::discriminate::SoftLabel;
use crate::error::{CokeError, Result};
use crate::vector::{normalize, UnitVector};

/// Number of nonzero entries kept per averaged label.
pub const DEFAULT_TOP_M: usize = 5;
/// Temperature of the softmax applied over the kept support.
pub const DEFAULT_SMOOTH_TEMP: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleState {
    k: usize,
    avg_start: usize,
    top_m: usize,
    epochs_accumulated: usize,
    avg_centers: Vec<Vec<f64>>,
    /// Sparse `(cluster, weight)` pairs, at most `top_m` per instance.
    avg_labels: Vec<Vec<(usize, f64)>>,
}

impl EnsembleState {
    pub fn new(k: usize, avg_start: usize) -> Self {
        Self::with_top_m(k, avg_start, DEFAULT_TOP_M)
    }

    pub fn with_top_m(k: usize, avg_start: usize, top_m: usize) -> Self {
        Self { k, avg_start, top_m: top_m.max(1), epochs_accumulated: 0, avg_centers: Vec::new(), avg_labels: Vec::new() }
    }

    pub fn avg_start(&self) -> usize {
        self.avg_start
    }

    pub fn epochs_accumulated(&self) -> usize {
        self.epochs_accumulated
    }

    pub fn is_active(&self) -> bool {
        self.epochs_accumulated > 0
    }

    /// Folds epoch `t` (1-based) into the running means with weight `1 / (t − T')`.
    pub fn ma_update(&mut self, centers: &[UnitVector], labels: &[usize], t: usize) -> Result<()> {
        if t <= self.avg_start {
            return Err(CokeError::Ordering(format!("epoch {t} is not after avg_start {}", self.avg_start)));
        }
        if t != self.avg_start + self.epochs_accumulated + 1 {
            return Err(CokeError::Ordering(format!("expected epoch {}, got {t}", self.avg_start + self.epochs_accumulated + 1)));
        }
        if centers.len() != self.k {
            return Err(CokeError::Shape { expected: self.k, got: centers.len() });
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= self.k) {
            return Err(CokeError::Shape { expected: self.k, got: l + 1 });
        }
        if self.is_active() && labels.len() != self.avg_labels.len() {
            return Err(CokeError::Shape { expected: self.avg_labels.len(), got: labels.len() });
        }
        let w = 1.0 / (t - self.avg_start) as f64;
        if !self.is_active() {
            self.avg_centers = centers.iter().map(|c| c.to_vec()).collect();
            self.avg_labels = labels.iter().map(|&l| vec![(l, 1.0)]).collect();
        } else {
            for (avg, c) in self.avg_centers.iter_mut().zip(centers) {
                for (a, v) in avg.iter_mut().zip(c.iter()) {
                    *a = (1.0 - w) * *a + w * v;
                }
            }
            for (entries, &l) in self.avg_labels.iter_mut().zip(labels) {
                let mut hit = false;
                for (idx, v) in entries.iter_mut() {
                    *v *= 1.0 - w;
                    if *idx == l {
                        *v += w;
                        hit = true;
                    }
                }
                if !hit {
                    entries.push((l, w));
                }
                truncate_top(entries, self.top_m);
            }
        }
        self.epochs_accumulated += 1;
        Ok(())
    }

    /// Averaged label of instance `i` as a dense distribution.
    pub fn avg_label(&self, i: usize) -> Result<SoftLabel> {
        let entries = self.avg_labels.get(i).ok_or_else(|| CokeError::Ordering("ensemble is not active".into()))?;
        SoftLabel::from_sparse(self.k, entries)
    }

    pub fn avg_label_entries(&self, i: usize) -> &[(usize, f64)] {
        &self.avg_labels[i]
    }

    /// Training target: the averaged label sparsified and smoothed.
    pub fn soft_target(&self, i: usize) -> Result<SoftLabel> {
        Ok(sparsify_smooth(&self.avg_label(i)?, self.top_m, DEFAULT_SMOOTH_TEMP))
    }

    /// Running-mean centers rescaled to unit length.
    pub fn normalized_centers(&self) -> Result<Vec<UnitVector>> {
        if !self.is_active() {
            return Err(CokeError::Ordering("ensemble is not active".into()));
        }
        self.avg_centers.iter().map(|c| normalize(c)).collect()
    }

    pub fn avg_centers_raw(&self) -> &[Vec<f64>] {
        &self.avg_centers
    }

    /// Argmax of every averaged label. On ties the entry from `previous` is
    /// kept when it is among the maxima, otherwise the lowest index wins.
    pub fn argmax_labels(&self, previous: Option<&[usize]>) -> Vec<usize> {
        self.avg_labels
            .iter()
            .enumerate()
            .map(|(i, entries)| {
                let max = entries.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
                let prev = previous.map(|p| p[i]);
                if let Some(p) = prev {
                    if entries.iter().any(|&(idx, v)| idx == p && v == max) {
                        return p;
                    }
                }
                entries.iter().filter(|e| e.1 == max).map(|e| e.0).min().unwrap_or(0)
            })
            .collect()
    }
}

/// Keeps the `top_m` heaviest entries and rescales them to unit mass.
fn truncate_top(entries: &mut Vec<(usize, f64)>, top_m: usize) {
    if entries.len() <= top_m {
        return;
    }
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    entries.truncate(top_m);
    let s: f64 = entries.iter().map(|e| e.1).sum();
    entries.iter_mut().for_each(|e| e.1 /= s);
    entries.sort_by_key(|e| e.0);
}

/// Keeps the `top_m` largest positive entries and replaces them with a softmax
/// of `value / smooth_temp` over that support. Everything else is zero.
pub fn sparsify_smooth(y: &SoftLabel, top_m: usize, smooth_temp: f64) -> SoftLabel {
    let mut support: Vec<(usize, f64)> = y.sparse();
    support.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    support.truncate(top_m.max(1));
    let m = support.iter().map(|e| e.1 / smooth_temp).fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = support.iter().map(|e| (e.1 / smooth_temp - m).exp()).collect();
    let z: f64 = weights.iter().sum();
    let mut out = vec![0.0; y.k()];
    for ((idx, _), w) in support.iter().zip(weights) {
        out[*idx] = w / z;
    }
    SoftLabel::new(out).expect("softmax over a nonempty support is a distribution")
}

/// Fraction of instances whose label differs between two epochs.
pub fn label_churn(previous: &[usize], current: &[usize]) -> f64 {
    if current.is_empty() {
        return 0.0;
    }
    let changed = previous.iter().zip(current).filter(|(a, b)| a != b).count();
    changed as f64 / current.len() as f64
}
