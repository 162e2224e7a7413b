//! Joint encoder training with two noisy views per instance.

use coke::config::CokeConfig;
use coke::metrics::{ari, clustering_accuracy, nmi};
use coke::pipeline::run_training;
use coke::synth::gen_sphere_gmm;

fn main() -> coke::Result<()> {
    let data = gen_sphere_gmm(2000, 16, 10, 0.2, 0.0, 0)?;
    let truth = data.truth().unwrap();

    for views in [1, 2] {
        let cfg = CokeConfig { k_heads: vec![10], eta: 1.0, views, embed_dim: 8, ..CokeConfig::default() };
        let out = run_training(&data, &cfg)?;
        let labels = out.labels();
        let first = &out.reports[0];
        let last = out.reports.last().unwrap();
        println!(
            "views={views}: loss {:.3} -> {:.3}, NMI {:.3}, ACC {:.3}, ARI {:.3}, min/max {}/{}",
            first.mean_loss,
            last.mean_loss,
            nmi(labels, truth)?,
            clustering_accuracy(labels, truth)?,
            ari(labels, truth)?,
            last.min_count,
            last.max_count
        );
    }
    Ok(())
}
