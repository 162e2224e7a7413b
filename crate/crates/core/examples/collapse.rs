//! Without a size constraint most clusters drain into a dense mode.

use coke::config::CokeConfig;
use coke::pipeline::run_clustering;
use coke::synth::gen_dominant_mode;

fn main() -> coke::Result<()> {
    let data = gen_dominant_mode(2000, 16, 9, 0.6, 0.1, 1)?;
    let points = data.normalized()?;
    for gamma_prime in [0.0, 0.2, 0.4, 0.8] {
        let cfg = CokeConfig { k_heads: vec![10], gamma_prime, eta: 1.0, epochs: 30, avg_start: 24, ..CokeConfig::default() };
        let r = run_clustering(&points, &cfg, None)?.remove(0).reports.pop().unwrap();
        println!("γ'={gamma_prime:.1}: min {:>4}  max {:>4}  bound {:>4.0}", r.min_count, r.max_count, cfg.gamma(2000, 10));
    }
    Ok(())
}
