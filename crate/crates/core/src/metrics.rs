//! Clustering scores against reference labels.

use crate::error::{CokeError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    /// `counts[p][t]`: instances with predicted label `p` and true label `t`.
    pub counts: Vec<Vec<usize>>,
    pub n: usize,
}

impl ContingencyTable {
    pub fn new(pred: &[usize], truth: &[usize]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(CokeError::Shape { expected: truth.len(), got: pred.len() });
        }
        let kp = pred.iter().max().map_or(0, |m| m + 1);
        let kt = truth.iter().max().map_or(0, |m| m + 1);
        let mut counts = vec![vec![0usize; kt]; kp];
        for (&p, &t) in pred.iter().zip(truth) {
            counts[p][t] += 1;
        }
        Ok(Self { counts, n: pred.len() })
    }

    fn row_sums(&self) -> Vec<usize> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    fn col_sums(&self) -> Vec<usize> {
        let kt = self.counts.first().map_or(0, Vec::len);
        (0..kt).map(|t| self.counts.iter().map(|r| r[t]).sum()).collect()
    }
}

/// Minimum-cost perfect matching on a square cost matrix (Kuhn–Munkres with
/// potentials). Returns `assignment[row] = column`.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // 1-based arrays; column 0 is a sentinel.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if row_of[j] > 0 {
            assignment[row_of[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Best one-to-one matching of predicted to true clusters, as a fraction of instances.
pub fn clustering_accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.is_empty() {
        return Err(CokeError::Shape { expected: 1, got: 0 });
    }
    let table = ContingencyTable::new(pred, truth)?;
    let size = table.counts.len().max(table.counts.first().map_or(0, Vec::len));
    let cost: Vec<Vec<f64>> = (0..size)
        .map(|p| (0..size).map(|t| -(table.counts.get(p).and_then(|r| r.get(t)).copied().unwrap_or(0) as f64)).collect())
        .collect();
    let matched: f64 = hungarian(&cost).iter().enumerate().map(|(p, &t)| -cost[p][t]).sum();
    Ok(matched / table.n as f64)
}

fn entropy(sums: &[usize], n: f64) -> f64 {
    -sums
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

/// Mutual information normalized by the arithmetic mean of the two entropies.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = ContingencyTable::new(pred, truth)?;
    if table.n == 0 {
        return Err(CokeError::Shape { expected: 1, got: 0 });
    }
    let n = table.n as f64;
    let rows = table.row_sums();
    let cols = table.col_sums();
    let (hp, ht) = (entropy(&rows, n), entropy(&cols, n));
    if hp == 0.0 && ht == 0.0 {
        return Ok(1.0);
    }
    if hp == 0.0 || ht == 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for (p, row) in table.counts.iter().enumerate() {
        for (t, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                mi += c / n * (c * n / (rows[p] as f64 * cols[t] as f64)).ln();
            }
        }
    }
    Ok((mi / (0.5 * (hp + ht))).clamp(0.0, 1.0))
}

fn pairs(c: usize) -> i128 {
    let c = c as i128;
    c * (c - 1) / 2
}

/// Adjusted Rand index under the permutation model.
///
/// Pair counts stay integral and the ratio is formed with one final
/// division, so small hand-checkable cases come out exact.
pub fn ari(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = ContingencyTable::new(pred, truth)?;
    if table.n < 2 {
        return Err(CokeError::Shape { expected: 2, got: table.n });
    }
    let index: i128 = table.counts.iter().flatten().map(|&c| pairs(c)).sum();
    let a: i128 = table.row_sums().into_iter().map(pairs).sum();
    let b: i128 = table.col_sums().into_iter().map(pairs).sum();
    let total = pairs(table.n);
    // (index − ab/total) / ((a+b)/2 − ab/total), scaled by 2·total.
    let num = 2 * (total * index - a * b);
    let den = total * (a + b) - 2 * a * b;
    if den == 0 {
        return Ok(1.0);
    }
    Ok(num as f64 / den as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizeStats {
    pub min_count: usize,
    pub max_count: usize,
    pub violation_pos: f64,
    pub counts: Vec<usize>,
}

/// Cluster sizes against a uniform lower bound `gamma`.
pub fn cluster_size_stats(labels: &[usize], k: usize, gamma: f64) -> Result<SizeStats> {
    let mut counts = vec![0usize; k];
    for &l in labels {
        if l >= k {
            return Err(CokeError::Shape { expected: k, got: l + 1 });
        }
        counts[l] += 1;
    }
    let min_count = counts.iter().copied().min().unwrap_or(0);
    let max_count = counts.iter().copied().max().unwrap_or(0);
    let violation_pos = counts.iter().map(|&c| gamma - c as f64).fold(0.0, f64::max);
    Ok(SizeStats { min_count, max_count, violation_pos, counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn accuracy_examples() {
        let t = [0, 0, 1, 1, 2, 2];
        assert_eq!(clustering_accuracy(&t, &t).unwrap(), 1.0);
        assert_eq!(clustering_accuracy(&[2, 2, 0, 0, 1, 1], &t).unwrap(), 1.0);
        assert_eq!(clustering_accuracy(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap(), 0.5);
        assert!(clustering_accuracy(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn accuracy_pads_unequal_cluster_counts() {
        // Three predicted clusters against two true ones.
        let acc = clustering_accuracy(&[0, 0, 1, 1, 2, 2], &[0, 0, 1, 1, 1, 1]).unwrap();
        assert!((acc - 4.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn nmi_examples() {
        assert!((nmi(&[0, 0, 1, 1, 2], &[1, 1, 0, 0, 2]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(nmi(&[0, 0, 0, 0], &[0, 1, 0, 1]).unwrap(), 0.0);
        assert!(nmi(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap().abs() < 1e-12);
        assert_eq!(nmi(&[3, 3], &[0, 0]).unwrap(), 1.0);
    }

    #[test]
    fn ari_examples() {
        assert_eq!(ari(&[0, 0, 1, 1, 2], &[0, 0, 1, 1, 2]).unwrap(), 1.0);
        assert_eq!(ari(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap(), -0.5);
        assert!(ari(&[0], &[0]).is_err());
    }

    /// Rand-index pieces counted pair by pair.
    fn ari_by_pairs(pred: &[usize], truth: &[usize]) -> f64 {
        let n = pred.len();
        let (mut both, mut same_p, mut same_t) = (0.0, 0.0, 0.0);
        for i in 0..n {
            for j in i + 1..n {
                let p = pred[i] == pred[j];
                let t = truth[i] == truth[j];
                both += (p && t) as u8 as f64;
                same_p += p as u8 as f64;
                same_t += t as u8 as f64;
            }
        }
        let total = (n * (n - 1) / 2) as f64;
        let expected = same_p * same_t / total;
        let max = 0.5 * (same_p + same_t);
        if max == expected {
            1.0
        } else {
            (both - expected) / (max - expected)
        }
    }

    #[test]
    fn ari_matches_pair_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let n = rng.random_range(2..30);
            let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..4)).collect();
            let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..4)).collect();
            assert!((ari(&pred, &truth).unwrap() - ari_by_pairs(&pred, &truth)).abs() < 1e-12);
        }
    }

    #[test]
    fn ari_is_zero_in_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let truth: Vec<usize> = (0..100).map(|i| i % 4).collect();
        let draws = 1000;
        let mean: f64 = (0..draws)
            .map(|_| {
                let pred: Vec<usize> = (0..100).map(|_| rng.random_range(0..4)).collect();
                ari(&pred, &truth).unwrap()
            })
            .sum::<f64>()
            / draws as f64;
        assert!(mean.abs() < 0.05, "{mean}");
    }

    #[test]
    fn size_stats_examples() {
        let s = cluster_size_stats(&[0, 1, 0, 1], 2, 2.0).unwrap();
        assert_eq!((s.min_count, s.max_count, s.violation_pos), (2, 2, 0.0));
        let s = cluster_size_stats(&[1, 1, 1], 3, 0.0).unwrap();
        assert_eq!((s.min_count, s.max_count), (0, 3));
        let s = cluster_size_stats(&[0, 0, 0, 1], 2, 2.0).unwrap();
        assert_eq!((s.min_count, s.max_count, s.violation_pos), (1, 3, 1.0));
        assert!(cluster_size_stats(&[2], 2, 0.0).is_err());
    }

    #[test]
    fn hungarian_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let k = rng.random_range(1..=5);
            let cost: Vec<Vec<f64>> = (0..k).map(|_| (0..k).map(|_| rng.random_range(0..20) as f64).collect()).collect();
            let got: f64 = hungarian(&cost).iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
            let best =
                permutations(k).iter().map(|p| p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum::<f64>()).fold(f64::INFINITY, f64::min);
            assert_eq!(got, best);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn scores_invariant_under_relabeling(
                pairs in prop::collection::vec((0usize..4, 0usize..4), 2..40),
                rot in 1usize..4,
            ) {
                let pred: Vec<usize> = pairs.iter().map(|p| p.0).collect();
                let truth: Vec<usize> = pairs.iter().map(|p| p.1).collect();
                let relabeled: Vec<usize> = pred.iter().map(|p| (p + rot) % 4).collect();
                let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
                prop_assert!(close(clustering_accuracy(&pred, &truth).unwrap(), clustering_accuracy(&relabeled, &truth).unwrap()));
                prop_assert!(close(nmi(&pred, &truth).unwrap(), nmi(&relabeled, &truth).unwrap()));
                prop_assert!(close(ari(&pred, &truth).unwrap(), ari(&relabeled, &truth).unwrap()));
                prop_assert!(close(nmi(&pred, &truth).unwrap(), nmi(&truth, &pred).unwrap()));
            }

            #[test]
            fn accuracy_at_least_largest_class_share(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..40)) {
                let pred: Vec<usize> = pairs.iter().map(|p| p.0).collect();
                let truth: Vec<usize> = pairs.iter().map(|p| p.1).collect();
                // Any cell of the table is reachable by some matching.
                let table = ContingencyTable::new(&pred, &truth).unwrap();
                let best_cell = table.counts.iter().flatten().copied().max().unwrap();
                let acc = clustering_accuracy(&pred, &truth).unwrap();
                prop_assert!(acc + 1e-12 >= best_cell as f64 / pred.len() as f64);
                prop_assert!((0.0..=1.0).contains(&acc));
            }
        }
    }
}
