//! Offline solvers for the size-constrained assignment problem, and the regret
//! and violation diagnostics that compare an online labeling against them.
//!
//! The exact solver works on the transportation network
//! `source → instance → cluster → sink` where every cluster owes at least
//! `γ_k` units to the sink. It starts from the unconstrained optimum (each
//! instance at its best cluster) and then runs successive shortest paths on
//! the residual graph with the instance nodes contracted away: an edge `a → b`
//! means "move the cheapest instance of `a` into `b`", and each augmentation
//! pulls one unit from a cluster with slack into a cluster below its bound.
//! Dijkstra runs on reduced costs with node potentials. Costs are integers
//! (similarities scaled and rounded), so comparisons inside the solver are
//! exact; the reported objective is recomputed from the real similarities.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::centers::CenterSet;
use crate::error::{CokeError, Result};
use crate::vector::{SimilarityMatrix, UnitVector};

/// Largest magnitude an integer cost may take.
const COST_SCALE: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentSolution {
    pub labels: Vec<usize>,
    /// `Σ_i S[i, labels[i]]`.
    pub objective: f64,
    /// Every cluster count meets its lower bound.
    pub feasible: bool,
}

impl AssignmentSolution {
    fn from_labels(s: &SimilarityMatrix, labels: Vec<usize>, gamma: &[usize]) -> Self {
        let objective = s.total(&labels);
        let counts = counts(&labels, s.k());
        let feasible = counts.iter().zip(gamma).all(|(c, g)| c >= g);
        Self { labels, objective, feasible }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    /// Optimum minus online objective; absent when no optimum was supplied.
    pub regret: Option<f64>,
    /// `max_k (γ_k − count_k)`, negative when every bound holds with room to spare.
    pub violation: f64,
    pub violation_pos: f64,
    pub per_cluster_counts: Vec<usize>,
    pub per_cluster_deficit: Vec<f64>,
}

pub(crate) fn counts(labels: &[usize], k: usize) -> Vec<usize> {
    let mut c = vec![0usize; k];
    for &l in labels {
        c[l] += 1;
    }
    c
}

fn check_gamma(s: &SimilarityMatrix, gamma: &[usize]) -> Result<()> {
    if gamma.len() != s.k() {
        return Err(CokeError::Shape { expected: s.k(), got: gamma.len() });
    }
    let total: usize = gamma.iter().sum();
    if total > s.n() {
        return Err(CokeError::Infeasible(format!("Σγ = {total} exceeds n = {}", s.n())));
    }
    if s.k() == 0 {
        return Err(CokeError::Config("at least one cluster is required".into()));
    }
    Ok(())
}

/// Integer lower bounds `⌈γ' n / K⌉`, falling back to the floor when the
/// ceiling would make the bounds jointly infeasible.
pub fn integer_gamma(gamma_prime: f64, n: usize, k: usize) -> Vec<usize> {
    let g = gamma_prime * n as f64 / k as f64;
    let up = (g - 1e-9).ceil().max(0.0) as usize;
    let v = if up * k <= n { up } else { g.floor() as usize };
    vec![v; k]
}

/// Globally optimal integral assignment maximizing total similarity subject to
/// `count_k ≥ γ_k`.
pub fn solve_constrained_assignment(s: &SimilarityMatrix, gamma: &[usize]) -> Result<AssignmentSolution> {
    check_gamma(s, gamma)?;
    let (n, k) = (s.n(), s.k());
    let max_abs = (0..n).flat_map(|i| s.row(i).iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    if !max_abs.is_finite() {
        return Err(CokeError::Numeric("non-finite similarity".into()));
    }
    let scale = COST_SCALE / max_abs.max(1.0);
    let cost: Vec<i64> = (0..n).flat_map(|i| s.row(i).iter().map(move |v| -(v * scale).round() as i64)).collect();
    let c = |i: usize, j: usize| cost[i * k + j];

    let mut labels: Vec<usize> = (0..n).map(|i| (0..k).fold(0, |best, j| if c(i, j) < c(i, best) { j } else { best })).collect();
    let mut count = counts(&labels, k);

    // heaps[a * k + b] holds (cost of moving i from a to b, i) for members i of a.
    let mut heaps: Vec<BinaryHeap<Reverse<(i64, usize)>>> = vec![BinaryHeap::new(); k * k];
    let push_member = |heaps: &mut Vec<BinaryHeap<Reverse<(i64, usize)>>>, i: usize, a: usize| {
        for b in (0..k).filter(|&b| b != a) {
            heaps[a * k + b].push(Reverse((c(i, b) - c(i, a), i)));
        }
    };
    for (i, &a) in labels.iter().enumerate() {
        push_member(&mut heaps, i, a);
    }

    let mut potential = vec![0i64; k];
    let mut dist = vec![i64::MAX; k];
    let mut done = vec![false; k];
    let mut pred: Vec<Option<(usize, usize)>> = vec![None; k];

    while (0..k).any(|j| count[j] < gamma[j]) {
        // Drop entries for instances that have since moved.
        for a in 0..k {
            for b in 0..k {
                let h = &mut heaps[a * k + b];
                while let Some(&Reverse((_, i))) = h.peek() {
                    if labels[i] == a {
                        break;
                    }
                    h.pop();
                }
            }
        }

        dist.iter_mut().for_each(|d| *d = i64::MAX);
        done.iter_mut().for_each(|d| *d = false);
        pred.iter_mut().for_each(|p| *p = None);
        for a in 0..k {
            if count[a] > gamma[a] {
                dist[a] = -potential[a];
            }
        }
        loop {
            let next = (0..k).filter(|&v| !done[v] && dist[v] < i64::MAX).min_by_key(|&v| (dist[v], v));
            let Some(u) = next else { break };
            done[u] = true;
            for v in (0..k).filter(|&v| v != u && !done[v]) {
                if let Some(&Reverse((w, i))) = heaps[u * k + v].peek() {
                    let reduced = w + potential[u] - potential[v];
                    debug_assert!(reduced >= 0, "negative reduced cost {reduced}");
                    let cand = dist[u] + reduced;
                    if cand < dist[v] {
                        dist[v] = cand;
                        pred[v] = Some((u, i));
                    }
                }
            }
        }

        let target = (0..k)
            .filter(|&j| count[j] < gamma[j] && done[j])
            .min_by_key(|&j| (dist[j] + potential[j], j))
            .ok_or_else(|| CokeError::Infeasible("no augmenting path".into()))?;

        for v in 0..k {
            if done[v] {
                potential[v] += dist[v];
            }
        }

        let mut v = target;
        while let Some((u, i)) = pred[v] {
            labels[i] = v;
            push_member(&mut heaps, i, v);
            v = u;
        }
        count[v] -= 1;
        count[target] += 1;
    }

    Ok(AssignmentSolution::from_labels(s, labels, gamma))
}

/// Exhaustive search over all `K^n` labelings. Independent reference for tests.
pub fn brute_force_assignment(s: &SimilarityMatrix, gamma: &[usize]) -> Result<AssignmentSolution> {
    if s.n() > 12 || s.k() > 4 {
        return Err(CokeError::SizeLimit(format!("n = {} (max 12), K = {} (max 4)", s.n(), s.k())));
    }
    check_gamma(s, gamma)?;
    let (n, k) = (s.n(), s.k());
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut labels = vec![0usize; n];
    let mut count = vec![0usize; k];

    fn search(
        i: usize,
        total: f64,
        s: &SimilarityMatrix,
        gamma: &[usize],
        labels: &mut Vec<usize>,
        count: &mut Vec<usize>,
        best: &mut Option<(f64, Vec<usize>)>,
    ) {
        let n = s.n();
        let missing: usize = count.iter().zip(gamma).map(|(c, g)| g.saturating_sub(*c)).sum();
        if missing > n - i {
            return;
        }
        if i == n {
            if best.as_ref().is_none_or(|(b, _)| total > *b) {
                *best = Some((total, labels.clone()));
            }
            return;
        }
        for j in 0..s.k() {
            labels[i] = j;
            count[j] += 1;
            search(i + 1, total + s.get(i, j), s, gamma, labels, count, best);
            count[j] -= 1;
        }
    }

    search(0, 0.0, s, gamma, &mut labels, &mut count, &mut best);
    let (_, labels) = best.ok_or_else(|| CokeError::Infeasible("no feasible labeling".into()))?;
    Ok(AssignmentSolution::from_labels(s, labels, gamma))
}

/// Optimum objective minus the online objective on the same similarity matrix.
pub fn regret(s: &SimilarityMatrix, labels_online: &[usize], optimum: &AssignmentSolution) -> Result<f64> {
    if labels_online.len() != s.n() {
        return Err(CokeError::Shape { expected: s.n(), got: labels_online.len() });
    }
    if let Some(&l) = labels_online.iter().find(|&&l| l >= s.k()) {
        return Err(CokeError::Shape { expected: s.k(), got: l + 1 });
    }
    Ok(optimum.objective - s.total(labels_online))
}

/// Cluster counts against (possibly fractional) lower bounds.
pub fn violation(labels: &[usize], gamma: &[f64]) -> Result<DiagnosticsReport> {
    let k = gamma.len();
    if let Some(&l) = labels.iter().find(|&&l| l >= k) {
        return Err(CokeError::Shape { expected: k, got: l + 1 });
    }
    let per_cluster_counts = counts(labels, k);
    let per_cluster_deficit: Vec<f64> = gamma.iter().zip(&per_cluster_counts).map(|(g, &c)| g - c as f64).collect();
    let violation = per_cluster_deficit.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(DiagnosticsReport { regret: None, violation, violation_pos: violation.max(0.0), per_cluster_counts, per_cluster_deficit })
}

/// Regret and violation of an online labeling in one report.
pub fn diagnose(s: &SimilarityMatrix, labels_online: &[usize], gamma: &[f64], optimum: &AssignmentSolution) -> Result<DiagnosticsReport> {
    let mut report = violation(labels_online, gamma)?;
    report.regret = Some(regret(s, labels_online, optimum)?);
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct BatchKMeans {
    pub centers: CenterSet,
    pub solution: AssignmentSolution,
    pub iterations: usize,
    /// Similarity objective after each center update.
    pub objective_history: Vec<f64>,
}

/// Lloyd-style constrained k-means: exact constrained assignment, then
/// normalized-mean centers, until the objective gain drops below `tol` or the
/// centers stop moving.
pub fn batch_constrained_kmeans(
    points: &[UnitVector],
    initial: Vec<UnitVector>,
    gamma: &[usize],
    max_iter: usize,
    tol: f64,
) -> Result<BatchKMeans> {
    let mut centers = CenterSet::from_centers(initial)?;
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut solution = None;
    while iterations < max_iter.max(1) {
        iterations += 1;
        let s = SimilarityMatrix::compute(points, centers.centers())?;
        let sol = solve_constrained_assignment(&s, gamma)?;
        let before = centers.centers().to_vec();
        let batch: Vec<(&[f64], usize)> = points.iter().map(|p| p.as_slice()).zip(sol.labels.iter().copied()).collect();
        centers.accumulate(&batch)?;
        centers.finalize_epoch()?;
        let after = SimilarityMatrix::compute(points, centers.centers())?.total(&sol.labels);
        let moved = before.iter().zip(centers.centers()).any(|(a, b)| a.iter().zip(b.iter()).any(|(x, y)| (x - y).abs() > 1e-12));
        let gain = history.last().map(|&prev| after - prev);
        history.push(after);
        solution = Some(AssignmentSolution { objective: after, ..sol });
        if !moved || gain.is_some_and(|g| g < tol) {
            break;
        }
    }
    Ok(BatchKMeans { centers, solution: solution.expect("at least one iteration runs"), iterations, objective_history: history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::normalize;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mat(rows: &[&[f64]]) -> SimilarityMatrix {
        SimilarityMatrix::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn two_by_two_example() {
        let s = mat(&[&[0.9, 0.8], &[0.9, 0.1]]);
        let sol = solve_constrained_assignment(&s, &[1, 1]).unwrap();
        assert_eq!(sol.labels, vec![1, 0]);
        assert!((sol.objective - 1.7).abs() < 1e-12);
        assert!(sol.feasible);
        let bf = brute_force_assignment(&s, &[1, 1]).unwrap();
        assert_eq!(bf.labels, vec![1, 0]);
    }

    #[test]
    fn zero_gamma_is_rowwise_argmax() {
        let s = mat(&[&[0.1, 0.5, 0.3], &[0.9, -0.2, 0.0], &[0.2, 0.2, 0.7]]);
        let sol = solve_constrained_assignment(&s, &[0, 0, 0]).unwrap();
        assert_eq!(sol.labels, vec![1, 0, 2]);
        assert!((sol.objective - 2.1).abs() < 1e-12);
    }

    #[test]
    fn forced_by_constraint() {
        let s = mat(&[&[0.9, 0.1]]);
        assert_eq!(brute_force_assignment(&s, &[0, 1]).unwrap().labels, vec![1]);
        assert_eq!(solve_constrained_assignment(&s, &[0, 1]).unwrap().labels, vec![1]);
    }

    #[test]
    fn infeasible_and_size_errors() {
        let s = mat(&[&[0.9, 0.1]]);
        assert!(matches!(solve_constrained_assignment(&s, &[1, 1]), Err(CokeError::Infeasible(_))));
        assert!(matches!(brute_force_assignment(&s, &[1, 1]), Err(CokeError::Infeasible(_))));
        let big = SimilarityMatrix::from_rows(vec![vec![0.0; 2]; 13]).unwrap();
        assert!(matches!(brute_force_assignment(&big, &[0, 0]), Err(CokeError::SizeLimit(_))));
        assert!(solve_constrained_assignment(&s, &[0]).is_err());
    }

    #[test]
    fn hand_picked_labelings_never_beat_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let rows: Vec<Vec<f64>> = (0..3).map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let s = SimilarityMatrix::from_rows(rows).unwrap();
            let best = brute_force_assignment(&s, &[1, 1]).unwrap().objective;
            for labels in [[0, 0, 1], [0, 1, 0], [1, 0, 0], [1, 1, 0], [0, 1, 1], [1, 0, 1]] {
                assert!(s.total(&labels) <= best + 1e-12);
            }
        }
    }

    #[test]
    fn matches_brute_force_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..150 {
            let n = rng.random_range(1..=8);
            let k = rng.random_range(1..=3);
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..k).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let s = SimilarityMatrix::from_rows(rows).unwrap();
            let mut gamma = vec![0usize; k];
            let budget = rng.random_range(0..=n);
            for _ in 0..budget {
                gamma[rng.random_range(0..k)] += 1;
            }
            let a = solve_constrained_assignment(&s, &gamma).unwrap();
            let b = brute_force_assignment(&s, &gamma).unwrap();
            assert!((a.objective - b.objective).abs() <= 1e-9, "{gamma:?}: {} vs {}", a.objective, b.objective);
            assert!(a.feasible);
            assert_eq!(a.labels.len(), n);
        }
    }

    #[test]
    fn square_unit_bounds_is_a_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let k = 4;
        let rows: Vec<Vec<f64>> = (0..k).map(|_| (0..k).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let s = SimilarityMatrix::from_rows(rows).unwrap();
        let sol = solve_constrained_assignment(&s, &[1; 4]).unwrap();
        let mut l = sol.labels.clone();
        l.sort();
        assert_eq!(l, vec![0, 1, 2, 3]);
        let bf = brute_force_assignment(&s, &[1; 4]).unwrap();
        assert!((sol.objective - bf.objective).abs() < 1e-9);
    }

    #[test]
    fn regret_and_violation_examples() {
        let s = mat(&[&[0.9, 0.8], &[0.9, 0.1]]);
        let opt = solve_constrained_assignment(&s, &[1, 1]).unwrap();
        assert_eq!(regret(&s, &opt.labels, &opt).unwrap(), 0.0);
        let greedy = [0, 0];
        let r = regret(&s, &greedy, &opt).unwrap();
        assert!((r + 0.1).abs() < 1e-12);
        let d = diagnose(&s, &greedy, &[1.0, 1.0], &opt).unwrap();
        assert_eq!(d.violation, 1.0);
        assert!((d.regret.unwrap() + 0.1).abs() < 1e-12);

        let v = violation(&[0, 1, 0, 1], &[2.0, 2.0]).unwrap();
        assert_eq!(v.violation, 0.0);
        let v = violation(&[0, 0, 0, 0], &[1.0, 1.0]).unwrap();
        assert_eq!((v.violation, v.violation_pos), (1.0, 1.0));
        assert_eq!(v.per_cluster_counts, vec![4, 0]);
        assert_eq!(v.per_cluster_deficit, vec![-3.0, 1.0]);
        let v = violation(&[1, 1, 1], &[0.0, 0.0]).unwrap();
        assert_eq!((v.violation, v.violation_pos), (0.0, 0.0));
        let v = violation(&[1, 1, 0], &[0.5, 0.5]).unwrap();
        assert_eq!((v.violation, v.violation_pos), (-0.5, 0.0));
    }

    #[test]
    fn integer_gamma_rounding() {
        assert_eq!(integer_gamma(1.0, 100, 4), vec![25; 4]);
        assert_eq!(integer_gamma(0.4, 100, 3), vec![14; 3]);
        assert_eq!(integer_gamma(1.0, 10, 3), vec![3; 3]);
        assert_eq!(integer_gamma(0.0, 10, 3), vec![0; 3]);
    }

    fn antipodal_groups() -> Vec<UnitVector> {
        let mut pts = Vec::new();
        for &(x, y) in &[(1.0, 0.1), (1.0, -0.1), (1.0, 0.0)] {
            pts.push(normalize(&[x, y, 0.05]).unwrap());
            pts.push(normalize(&[-x, y, -0.05]).unwrap());
        }
        pts
    }

    /// Brute-force 2-means over all bipartitions (normalized-mean objective).
    fn brute_two_means(points: &[UnitVector]) -> f64 {
        let n = points.len();
        let mut best = f64::NEG_INFINITY;
        for mask in 1..(1u32 << n) - 1 {
            let mut sums = [vec![0.0; 3], vec![0.0; 3]];
            for (i, p) in points.iter().enumerate() {
                let g = ((mask >> i) & 1) as usize;
                for d in 0..3 {
                    sums[g][d] += p[d];
                }
            }
            best = best.max(crate::vector::norm(&sums[0]) + crate::vector::norm(&sums[1]));
        }
        best
    }

    #[test]
    fn batch_recovers_antipodal_groups() {
        let pts = antipodal_groups();
        let init = vec![pts[0].clone(), normalize(&[0.0, 1.0, 0.0]).unwrap()];
        let res = batch_constrained_kmeans(&pts, init, &[1, 1], 20, 1e-12).unwrap();
        let l = &res.solution.labels;
        assert!(l.iter().step_by(2).all(|&x| x == l[0]));
        assert!(l.iter().skip(1).step_by(2).all(|&x| x == l[1]));
        assert_ne!(l[0], l[1]);
        assert!((res.solution.objective - brute_two_means(&pts)).abs() < 1e-9);
        for w in res.objective_history.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
    }

    #[test]
    fn batch_stops_at_fixed_point() {
        let pts = antipodal_groups();
        let init = vec![pts[0].clone(), pts[1].clone()];
        let first = batch_constrained_kmeans(&pts, init, &[1, 1], 20, 0.0).unwrap();
        let again = batch_constrained_kmeans(&pts, first.centers.centers().to_vec(), &[1, 1], 20, 0.0).unwrap();
        assert_eq!(again.iterations, 1);
    }
}
