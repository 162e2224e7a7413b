//! One encoder, several clustering granularities.

use coke::config::CokeConfig;
use coke::metrics::nmi;
use coke::pipeline::run_multihead;
use coke::synth::gen_sphere_gmm;

fn main() -> coke::Result<()> {
    let data = gen_sphere_gmm(1500, 16, 10, 0.2, 0.0, 4)?;
    let cfg = CokeConfig { k_heads: vec![5, 10, 20], eta: 1.0, epochs: 30, avg_start: 24, ..CokeConfig::default() };
    let out = run_multihead(&data, &cfg)?;
    for (h, head) in out.state.heads.iter().enumerate() {
        let last = out.head_reports(h).last().unwrap();
        println!(
            "K={:>2}: NMI {:.3}, sizes {}..{}",
            head.k,
            nmi(head.store.labels(), data.truth().unwrap())?,
            last.min_count,
            last.max_count
        );
    }
    Ok(())
}
