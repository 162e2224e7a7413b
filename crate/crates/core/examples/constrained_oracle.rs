//! One online pass with fixed centers, compared against the exact
//! constrained assignment.

use coke::assign::{online_pass, DualState};
use coke::config::{regret_optimal_eta, DualMode};
use coke::oracle::{diagnose, integer_gamma, solve_constrained_assignment};
use coke::synth::gen_sphere_gmm;
use coke::vector::{SimilarityMatrix, UnitVector};

fn main() -> coke::Result<()> {
    let (n, k, gamma_prime) = (5000, 6, 0.8);
    let data = gen_sphere_gmm(n, 10, k, 0.3, 1.2, 3)?;
    let points = data.normalized()?;
    let truth = data.truth().expect("synthetic data carries truth");
    let centers: Vec<UnitVector> = (0..k).map(|c| points[truth.iter().position(|&t| t == c).unwrap()].clone()).collect();
    let s = SimilarityMatrix::compute(&points, &centers)?;

    let gamma = integer_gamma(gamma_prime, n, k);
    let opt = solve_constrained_assignment(&s, &gamma)?;
    let order: Vec<usize> = (0..n).collect();
    let real_gamma = vec![gamma_prime * n as f64 / k as f64; k];

    println!("optimum {:.3}, lower bound {} per cluster", opt.objective, gamma[0]);
    for tau in [1.0, 4.0, 16.0] {
        let mut duals = DualState::new(k, regret_optimal_eta(tau, n), Some(tau));
        let labels = online_pass(&s, &order, &mut duals, &vec![gamma_prime / k as f64; k], DualMode::Projected, 1)?;
        let d = diagnose(&s, &labels, &real_gamma, &opt)?;
        println!("tau {tau:>4}: regret {:>8.3}  violation {:>6.1}  counts {:?}", d.regret.unwrap(), d.violation_pos, d.per_cluster_counts);
    }

    // Unconstrained nearest-center assignment for contrast.
    let greedy: Vec<usize> = (0..n).map(|i| s.row(i).iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0).collect();
    let d = diagnose(&s, &greedy, &real_gamma, &opt)?;
    println!("greedy   : regret {:>8.3}  violation {:>6.1}", d.regret.unwrap(), d.violation_pos);
    Ok(())
}
