use coke::centers::init_centers;
use coke::config::CokeConfig;
use coke::discriminate::{loss_hard, loss_soft, mix_reference, predict_probs, SoftLabel};
use coke::metrics::nmi;
use coke::oracle::{batch_constrained_kmeans, integer_gamma};
use coke::pipeline::{run_clustering, run_multihead, run_training};
use coke::synth::gen_sphere_gmm;
use coke::vector::{normalize, UnitVector};

#[test]
fn noiseless_mixture_is_recovered_exactly() {
    for seed in 0..5 {
        let data = gen_sphere_gmm(300, 8, 5, 0.0, 0.0, seed).unwrap();
        let truth = data.truth().unwrap();
        let pts: Vec<UnitVector> = data.rows().iter().map(|r| normalize(r).unwrap()).collect();
        let cfg = CokeConfig {
            k_heads: vec![5],
            gamma_prime: 0.8,
            eta: 0.2,
            batch_size: 32,
            epochs: 60,
            avg_start: 60,
            seed,
            ..CokeConfig::default()
        };
        let out = run_clustering(&pts, &cfg, None).unwrap().remove(0);
        assert_eq!(nmi(&out.labels, truth).unwrap(), 1.0, "seed {seed}");

        let init = init_centers(&pts, 5, seed).unwrap().centers().to_vec();
        let reference = batch_constrained_kmeans(&pts, init, &integer_gamma(1.0, 300, 5), 50, 1e-12).unwrap();
        assert_eq!(nmi(&reference.solution.labels, truth).unwrap(), 1.0, "seed {seed}");
    }
}

#[test]
fn coarse_head_tracks_truth_at_least_as_well_as_fine_head() {
    let (mut coarse, mut fine) = (0.0, 0.0);
    for seed in 0..5 {
        let data = gen_sphere_gmm(1000, 16, 10, 0.2, 0.0, seed).unwrap();
        let cfg = CokeConfig { k_heads: vec![10, 20], eta: 1.0, epochs: 20, avg_start: 16, seed, ..CokeConfig::default() };
        let out = run_multihead(&data, &cfg).unwrap();
        let truth = data.truth().unwrap();
        coarse += nmi(out.state.heads[0].store.labels(), truth).unwrap();
        fine += nmi(out.state.heads[1].store.labels(), truth).unwrap();
        assert_eq!(out.head_reports(1).count(), 20);
    }
    assert!(coarse >= fine, "K=10 mean NMI {} vs K=20 {}", coarse / 5.0, fine / 5.0);
}

#[test]
fn full_weight_on_stored_label_gives_the_hard_loss() {
    let centers: Vec<UnitVector> = [[1.0, 0.2], [0.1, 1.0], [-1.0, 0.3]].iter().map(|c| normalize(c).unwrap()).collect();
    let x = normalize(&[0.4, 0.9]).unwrap();
    let other = predict_probs(&normalize(&[0.9, 0.1]).unwrap(), &centers, 0.1);
    let y = mix_reference(2, &other, 1.0);
    assert_eq!(y, SoftLabel::one_hot(3, 2));
    assert!((loss_soft(&x, &y, &centers, 0.1) - loss_hard(&x, 2, &centers, 0.1)).abs() < 1e-12);
}

#[test]
fn training_reports_cover_every_epoch() {
    let data = gen_sphere_gmm(400, 12, 4, 0.1, 0.0, 1).unwrap();
    let cfg = CokeConfig { k_heads: vec![4], eta: 1.0, epochs: 6, avg_start: 4, views: 1, ..CokeConfig::default() };
    let out = run_training(&data, &cfg).unwrap();
    assert_eq!(out.reports.len(), 6);
    for r in &out.reports {
        assert!(r.min_count <= r.max_count && r.max_count <= 400);
        assert!(r.mean_loss.is_finite() && r.mean_loss > 0.0);
        assert!(r.nmi_vs_truth.is_some());
    }
}
