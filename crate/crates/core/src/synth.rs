//! Synthetic mixtures on the unit sphere.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::dataset::Dataset;
use crate::error::{CokeError, Result};
use crate::vector::{normalize, UnitVector};

fn random_direction(dim: usize, rng: &mut ChaCha8Rng) -> UnitVector {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        if let Ok(u) = normalize(&v) {
            return u;
        }
    }
}

/// Sizes proportional to `rank^(-exponent)`, summing to `n`; remainders go to
/// the largest fractional parts, lowest rank first on ties.
pub fn cluster_sizes(n: usize, k: usize, exponent: f64) -> Result<Vec<usize>> {
    if k == 0 || k > n {
        return Err(CokeError::Infeasible(format!("cannot split {n} points into {k} clusters")));
    }
    let weights: Vec<f64> = (1..=k).map(|r| (r as f64).powf(-exponent)).collect();
    let total: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| n as f64 * w / total).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let missing = n - sizes.iter().sum::<usize>();
    for &j in order.iter().take(missing) {
        sizes[j] += 1;
    }
    if sizes.contains(&0) {
        return Err(CokeError::Infeasible(format!("imbalance exponent {exponent} leaves an empty cluster")));
    }
    Ok(sizes)
}

fn assemble(mut points: Vec<(Vec<f64>, usize)>, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    points.shuffle(rng);
    let (rows, truth): (Vec<_>, Vec<_>) = points.into_iter().unzip();
    Dataset::new(rows)?.with_truth(truth)
}

/// `k_true` random unit means; each point is `normalize(mean + N(0, σ² I))`.
pub fn gen_sphere_gmm(n: usize, dim: usize, k_true: usize, noise_sigma: f64, imbalance_exponent: f64, seed: u64) -> Result<Dataset> {
    if dim == 0 {
        return Err(CokeError::Config("dimension must be positive".into()));
    }
    if !(noise_sigma >= 0.0) {
        return Err(CokeError::Config("noise sigma must be nonnegative".into()));
    }
    let sizes = cluster_sizes(n, k_true, imbalance_exponent)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means: Vec<UnitVector> = (0..k_true).map(|_| random_direction(dim, &mut rng)).collect();
    let noise = Normal::new(0.0, noise_sigma).map_err(|e| CokeError::Config(e.to_string()))?;
    let mut points = Vec::with_capacity(n);
    for (label, (&size, mean)) in sizes.iter().zip(&means).enumerate() {
        for _ in 0..size {
            let p = loop {
                let raw: Vec<f64> = mean.iter().map(|m| m + noise.sample(&mut rng)).collect();
                if let Ok(u) = normalize(&raw) {
                    break u;
                }
            };
            points.push((p.into_inner(), label));
        }
    }
    assemble(points, &mut rng)
}

/// One exactly repeated direction holding `dominant_fraction` of the points
/// (truth label 0), the rest spread evenly over `k_minor` noisy clusters.
pub fn gen_dominant_mode(n: usize, dim: usize, k_minor: usize, dominant_fraction: f64, noise_sigma: f64, seed: u64) -> Result<Dataset> {
    if !(0.0..1.0).contains(&dominant_fraction) {
        return Err(CokeError::Config("dominant fraction must lie in [0, 1)".into()));
    }
    let n_dom = (n as f64 * dominant_fraction).round() as usize;
    let rest = gen_sphere_gmm(n - n_dom, dim, k_minor, noise_sigma, 0.0, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mode = random_direction(dim, &mut rng);
    let mut points: Vec<(Vec<f64>, usize)> = (0..n_dom).map(|_| (mode.to_vec(), 0)).collect();
    let truth = rest.truth().expect("generated with truth").to_vec();
    points.extend(rest.rows().iter().cloned().zip(truth.into_iter().map(|t| t + 1)));
    assemble(points, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::norm;

    #[test]
    fn balanced_sizes_differ_by_at_most_one() {
        let s = cluster_sizes(103, 10, 0.0).unwrap();
        assert_eq!(s.iter().sum::<usize>(), 103);
        assert!(s.iter().max().unwrap() - s.iter().min().unwrap() <= 1);
        let d = gen_sphere_gmm(103, 4, 10, 0.1, 0.0, 1).unwrap();
        let mut c = [0usize; 10];
        d.truth().unwrap().iter().for_each(|&t| c[t] += 1);
        assert!(c.iter().max().unwrap() - c.iter().min().unwrap() <= 1);
    }

    #[test]
    fn imbalanced_sizes_decay() {
        let s = cluster_sizes(1000, 4, 1.0).unwrap();
        assert!(s.windows(2).all(|w| w[0] >= w[1]));
        assert!(cluster_sizes(10, 20, 0.0).is_err());
        assert!(cluster_sizes(10, 5, 8.0).is_err());
    }

    #[test]
    fn zero_noise_collapses_onto_means() {
        let d = gen_sphere_gmm(60, 5, 3, 0.0, 0.0, 2).unwrap();
        let truth = d.truth().unwrap();
        for i in 0..60 {
            for j in 0..60 {
                if truth[i] == truth[j] {
                    assert_eq!(d.row(i), d.row(j));
                }
            }
            assert!((norm(d.row(i)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(gen_sphere_gmm(50, 3, 4, 0.2, 0.5, 9).unwrap(), gen_sphere_gmm(50, 3, 4, 0.2, 0.5, 9).unwrap());
        assert_ne!(gen_sphere_gmm(50, 3, 4, 0.2, 0.5, 9).unwrap(), gen_sphere_gmm(50, 3, 4, 0.2, 0.5, 10).unwrap());
    }

    #[test]
    fn dominant_mode_share() {
        let d = gen_dominant_mode(1000, 8, 5, 0.6, 0.1, 4).unwrap();
        let t = d.truth().unwrap();
        assert_eq!(t.iter().filter(|&&x| x == 0).count(), 600);
        let first = (0..1000).find(|&i| t[i] == 0).unwrap();
        assert!((0..1000).filter(|&i| t[i] == 0).all(|i| d.row(i) == d.row(first)));
    }
}
