//! Online constrained k-means over fixed embeddings.
//!
//! Run with `cargo run --release --example online_clustering`.

use coke::config::CokeConfig;
use coke::pipeline::run_clustering;
use coke::synth::gen_sphere_gmm;

fn main() -> coke::Result<()> {
    // Sizes fall off as rank^-1, so the smallest clusters need the constraint.
    let data = gen_sphere_gmm(4000, 24, 12, 0.15, 1.0, 7)?;
    let points = data.normalized()?;

    let cfg = CokeConfig { k_heads: vec![12], gamma_prime: 0.4, eta: 1.0, epochs: 20, avg_start: 16, ..CokeConfig::default() };
    let out = run_clustering(&points, &cfg, data.truth())?.remove(0);

    println!("epoch  objective   min  max  churn   nmi");
    for r in &out.reports {
        println!(
            "{:>5} {:>10.2} {:>5} {:>4} {:>6.3} {:>5.3}",
            r.epoch,
            r.kmeans_objective,
            r.min_count,
            r.max_count,
            r.label_churn,
            r.nmi_vs_truth.unwrap_or(f64::NAN)
        );
    }
    println!("lower bound per cluster: {:.0}", cfg.gamma(points.len(), 12));
    println!("final duals: {:.3?}", out.duals.rho());
    Ok(())
}
