//! Scoring a clustering against reference labels.

use coke::metrics::{ari, cluster_size_stats, clustering_accuracy, hungarian, nmi, ContingencyTable};

fn main() -> coke::Result<()> {
    let truth = [0, 0, 0, 1, 1, 1, 2, 2, 2];
    let pred = [1, 1, 0, 0, 0, 0, 2, 2, 2];

    let table = ContingencyTable::new(&pred, &truth)?;
    println!("contingency {:?}", table.counts);
    println!("ACC {:.4}", clustering_accuracy(&pred, &truth)?);
    println!("NMI {:.4}", nmi(&pred, &truth)?);
    println!("ARI {:.4}", ari(&pred, &truth)?);

    // Matching on raw costs.
    let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
    println!("min-cost matching {:?}", hungarian(&cost));

    let stats = cluster_size_stats(&pred, 3, 3.0)?;
    println!("sizes {:?}, largest deficit {}", stats.counts, stats.violation_pos);
    Ok(())
}
