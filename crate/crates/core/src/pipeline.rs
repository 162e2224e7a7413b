//! Epoch loops: clustering of fixed embeddings, and the alternating training
//! loop where the encoder learns from last epoch's labels and centers while
//! the online clustering runs on its fresh embeddings.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::assign::{assign_hard, DualState};
use crate::centers::{init_centers, CenterSet};
use crate::config::{CenterMode, CokeConfig, Epoch};
use crate::dataset::Dataset;
use crate::discriminate::{augment, encoder_forward, encoder_step, mix_reference, predict_probs, LinearEncoder, SoftLabel, TrainItem};
use crate::ensemble::{label_churn, EnsembleState};
use crate::error::{CokeError, Result};
use crate::io::Record;
use crate::metrics::{cluster_size_stats, nmi};
use crate::vector::{dot, similarity_row, UnitVector};

const STREAM_INIT: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;
const STREAM_ENCODER: u64 = 3;
const STREAM_AUGMENT: u64 = 4;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Hard pseudo labels per instance id, with the epoch each one was written in.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentStore {
    labels: Vec<usize>,
    stamps: Vec<usize>,
}

impl AssignmentStore {
    pub fn new(labels: Vec<usize>, epoch: usize) -> Self {
        let stamps = vec![epoch; labels.len()];
        Self { labels, stamps }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, id: usize) -> usize {
        self.labels[id]
    }

    pub fn stamp(&self, id: usize) -> usize {
        self.stamps[id]
    }

    pub fn set(&mut self, id: usize, label: usize, epoch: usize) {
        self.labels[id] = label;
        self.stamps[id] = epoch;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    pub head: usize,
    pub k: usize,
    pub epoch: usize,
    /// `Σ ‖x_i − c_{label_i}‖²` against the centers used at assignment time.
    pub kmeans_objective: f64,
    pub mean_loss: f64,
    pub min_count: usize,
    pub max_count: usize,
    pub violation_pos: f64,
    pub label_churn: f64,
    pub nmi_vs_truth: Option<f64>,
    /// The monotone guard kept the previous epoch's labels.
    pub guard_rejected: bool,
    pub seed: u64,
}

impl EpochReport {
    pub fn to_record(&self) -> Record {
        let mut r = Record::new("epoch")
            .with("head", self.head)
            .with("k", self.k)
            .with("epoch", self.epoch)
            .with("seed", self.seed)
            .with("kmeans_objective", self.kmeans_objective)
            .with("mean_loss", self.mean_loss)
            .with("min_count", self.min_count)
            .with("max_count", self.max_count)
            .with("violation_pos", self.violation_pos)
            .with("label_churn", self.label_churn)
            .with("guard_rejected", self.guard_rejected);
        if let Some(v) = self.nmi_vs_truth {
            r.push("nmi_vs_truth", v);
        }
        r
    }
}

/// Echo of every configuration field as one report line.
pub fn config_record(cfg: &CokeConfig) -> Record {
    let heads: Vec<String> = cfg.k_heads.iter().map(ToString::to_string).collect();
    Record::new("config")
        .with("k_heads", heads.join(","))
        .with("gamma_prime", cfg.gamma_prime)
        .with("eta", cfg.eta)
        .with("tau", cfg.tau.map_or("none".to_string(), |t| t.to_string()))
        .with("temperature", cfg.temperature)
        .with("batch_size", cfg.batch_size)
        .with("epochs", cfg.epochs)
        .with("avg_start", cfg.avg_start)
        .with("alpha", cfg.alpha)
        .with("views", cfg.views)
        .with("noise_sigma", cfg.noise_sigma)
        .with("mask_rate", cfg.mask_rate)
        .with("seed", cfg.seed)
        .with("center_mode", format!("{:?}", cfg.center_mode))
        .with("dual_mode", format!("{:?}", cfg.dual_mode))
        .with("monotone_guard", cfg.monotone_guard)
        .with("embed_dim", cfg.embed_dim)
        .with("learning_rate", cfg.learning_rate)
        .with("weight_decay", cfg.weight_decay)
}

/// `Σ_i ‖x_i − c_{label_i}‖²` for unit-norm centers.
pub fn kmeans_objective(points: &[UnitVector], labels: &[usize], centers: &[UnitVector]) -> f64 {
    points.iter().zip(labels).map(|(x, &l)| dot(x, x) + 1.0 - 2.0 * dot(x, &centers[l])).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuardDecision {
    pub labels: Vec<usize>,
    pub kept_previous: bool,
    pub previous_objective: f64,
    pub new_objective: f64,
}

/// Keeps `prev_labels` unless `new_labels` strictly lower the k-means
/// objective (by more than 1e-9) on the given embeddings and centers.
pub fn monotone_guard_check(
    prev_labels: &[usize],
    new_labels: &[usize],
    embeddings: &[UnitVector],
    centers: &[UnitVector],
) -> Result<GuardDecision> {
    if prev_labels.len() != embeddings.len() || new_labels.len() != embeddings.len() {
        return Err(CokeError::Shape { expected: embeddings.len(), got: new_labels.len().min(prev_labels.len()) });
    }
    if let Some(&l) = prev_labels.iter().chain(new_labels).find(|&&l| l >= centers.len()) {
        return Err(CokeError::Shape { expected: centers.len(), got: l + 1 });
    }
    let previous_objective = kmeans_objective(embeddings, prev_labels, centers);
    let new_objective = kmeans_objective(embeddings, new_labels, centers);
    let kept_previous = new_objective >= previous_objective - 1e-9;
    Ok(GuardDecision {
        labels: if kept_previous { prev_labels.to_vec() } else { new_labels.to_vec() },
        kept_previous,
        previous_objective,
        new_objective,
    })
}

fn batch_mode(mode: CenterMode, epoch: usize, avg_start: usize) -> bool {
    match mode {
        CenterMode::PerMinibatch => true,
        CenterMode::PerEpoch => false,
        CenterMode::TwoStage => epoch <= avg_start,
    }
}

/// Per-head clustering state.
#[derive(Debug, Clone)]
pub struct HeadState {
    pub k: usize,
    pub centers: CenterSet,
    pub duals: DualState,
    pub store: AssignmentStore,
    pub ensemble: EnsembleState,
    /// Labels the churn statistic is measured on (ensemble argmax once it is active).
    pub effective: Vec<usize>,
}

impl HeadState {
    fn new(k: usize, centers: CenterSet, n: usize, cfg: &CokeConfig) -> Self {
        Self {
            k,
            centers,
            duals: DualState::new(k, cfg.eta, cfg.tau),
            store: AssignmentStore::new(vec![0; n], 0),
            ensemble: EnsembleState::new(k, cfg.avg_start),
            effective: Vec::new(),
        }
    }

    /// Folds a finished epoch into the ensemble and returns the churn of the effective labels.
    fn close_epoch(&mut self, epoch: usize, use_ensemble: bool) -> Result<f64> {
        let previous = std::mem::take(&mut self.effective);
        self.effective = if use_ensemble && epoch > self.ensemble.avg_start() {
            self.ensemble.ma_update(self.centers.centers(), self.store.labels(), epoch)?;
            self.ensemble.argmax_labels((!previous.is_empty()).then_some(&previous[..]))
        } else {
            self.store.labels().to_vec()
        };
        Ok(if previous.is_empty() { 1.0 } else { label_churn(&previous, &self.effective) })
    }

    #[allow(clippy::too_many_arguments)]
    fn report(
        &self,
        head: usize,
        epoch: usize,
        objective: f64,
        loss: f64,
        churn: f64,
        n: usize,
        cfg: &CokeConfig,
        truth: Option<&[usize]>,
        guard_rejected: bool,
    ) -> Result<EpochReport> {
        let stats = cluster_size_stats(self.store.labels(), self.k, cfg.gamma(n, self.k))?;
        Ok(EpochReport {
            head,
            k: self.k,
            epoch,
            kmeans_objective: objective,
            mean_loss: loss,
            min_count: stats.min_count,
            max_count: stats.max_count,
            violation_pos: stats.violation_pos,
            label_churn: churn,
            nmi_vs_truth: truth.map(|t| nmi(self.store.labels(), t)).transpose()?,
            guard_rejected,
            seed: cfg.seed,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ClusteringOutcome {
    pub labels: Vec<usize>,
    pub centers: CenterSet,
    pub duals: DualState,
    pub reports: Vec<EpochReport>,
}

/// Online constrained k-means over fixed unit embeddings, one outcome per head.
pub fn run_clustering(embeddings: &[UnitVector], cfg: &CokeConfig, truth: Option<&[usize]>) -> Result<Vec<ClusteringOutcome>> {
    cfg.validate(embeddings.len())?;
    (0..cfg.k_heads.len()).map(|h| cluster_head(embeddings, cfg, h, truth)).collect()
}

fn cluster_head(points: &[UnitVector], cfg: &CokeConfig, head: usize, truth: Option<&[usize]>) -> Result<ClusteringOutcome> {
    let n = points.len();
    let k = cfg.k_heads[head];
    if let Some(t) = truth {
        if t.len() != n {
            return Err(CokeError::Shape { expected: n, got: t.len() });
        }
    }
    let gamma_fraction = cfg.gamma_fraction(k);
    let mut state = HeadState::new(k, init_centers(points, k, rng(cfg.seed, STREAM_INIT).next_u64_seed())?, n, cfg);
    let mut shuffle = rng(cfg.seed, STREAM_SHUFFLE);
    let mut order: Vec<usize> = (0..n).collect();
    let mut reports = Vec::with_capacity(cfg.epochs);
    let mut fresh = vec![0usize; n];
    let mut batch_labels = Vec::with_capacity(cfg.batch_size);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle);
        let per_batch = batch_mode(cfg.center_mode, epoch, cfg.avg_start);
        let mut objective = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            batch_labels.clear();
            for &i in chunk {
                let s = similarity_row(&points[i], state.centers.centers())?;
                let l = assign_hard(&s, &state.duals)?;
                objective += 2.0 - 2.0 * s[l];
                fresh[i] = l;
                batch_labels.push(l);
            }
            state.duals.update(&batch_labels, &gamma_fraction, cfg.dual_mode)?;
            let batch: Vec<(&[f64], usize)> = chunk.iter().map(|&i| (points[i].as_slice(), fresh[i])).collect();
            if per_batch {
                state.centers.update_minibatch(&batch)?;
            } else {
                state.centers.accumulate(&batch)?;
            }
        }

        let mut rejected = false;
        if cfg.monotone_guard {
            let snapshot = state.centers.prev_centers().to_vec();
            if epoch > 1 {
                let decision = monotone_guard_check(state.store.labels(), &fresh, points, &snapshot)?;
                if decision.kept_previous {
                    rejected = true;
                    state.centers.rewind_epoch();
                    let batch: Vec<(&[f64], usize)> = points.iter().map(|p| p.as_slice()).zip(decision.labels.iter().copied()).collect();
                    state.centers.accumulate(&batch)?;
                }
                objective = if rejected { decision.previous_objective } else { decision.new_objective };
            } else {
                objective = kmeans_objective(points, &fresh, &snapshot);
            }
        }
        if !rejected {
            for (i, &l) in fresh.iter().enumerate() {
                state.store.set(i, l, epoch);
            }
        }
        state.centers.finalize_epoch()?;
        let churn = state.close_epoch(epoch, true)?;
        reports.push(state.report(head, epoch, objective, 0.0, churn, n, cfg, truth, rejected)?);
    }

    Ok(ClusteringOutcome { labels: state.store.labels().to_vec(), centers: state.centers, duals: state.duals, reports })
}

trait SeedExt {
    fn next_u64_seed(&mut self) -> u64;
}

impl SeedExt for ChaCha8Rng {
    fn next_u64_seed(&mut self) -> u64 {
        use rand::RngCore;
        self.next_u64()
    }
}

/// Which snapshot each loss evaluation consumed. Epoch 0 is the scan epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LossTrace {
    pub epoch: usize,
    pub head: usize,
    pub center_epoch: usize,
    pub label_epoch_min: usize,
    pub label_epoch_max: usize,
}

#[derive(Debug, Clone)]
pub struct MultiHeadState {
    pub heads: Vec<HeadState>,
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub encoder: LinearEncoder,
    pub state: MultiHeadState,
    /// One report per head per epoch, heads interleaved within an epoch.
    pub reports: Vec<EpochReport>,
    pub trace: Vec<LossTrace>,
}

impl TrainingOutcome {
    /// Final hard labels of the first head.
    pub fn labels(&self) -> &[usize] {
        self.state.heads[0].store.labels()
    }

    pub fn head_reports(&self, head: usize) -> impl Iterator<Item = &EpochReport> {
        self.reports.iter().filter(move |r| r.head == head)
    }
}

/// Encoder embeddings of the clean rows.
pub fn embed(encoder: &LinearEncoder, dataset: &Dataset) -> Result<Vec<UnitVector>> {
    dataset.rows().iter().map(|r| encoder_forward(encoder, r)).collect()
}

struct BatchViews {
    raw: Vec<Vec<Vec<f64>>>,
    emb: Vec<Vec<UnitVector>>,
}

fn make_views(enc: &LinearEncoder, dataset: &Dataset, chunk: &[usize], cfg: &CokeConfig, aug: &mut ChaCha8Rng) -> Result<BatchViews> {
    let mut raw = Vec::with_capacity(chunk.len());
    let mut emb = Vec::with_capacity(chunk.len());
    for &i in chunk {
        let views: Vec<Vec<f64>> = (0..cfg.views).map(|_| augment(dataset.row(i), cfg.noise_sigma, cfg.mask_rate, aug)).collect();
        emb.push(views.iter().map(|v| encoder_forward(enc, v)).collect::<Result<Vec<_>>>()?);
        raw.push(views);
    }
    Ok(BatchViews { raw, emb })
}

/// Mean of the view embeddings: the vector that is assigned and accumulated.
fn view_mean(views: &[UnitVector]) -> Vec<f64> {
    let w = 1.0 / views.len() as f64;
    let mut m = vec![0.0; views[0].dim()];
    for v in views {
        for (a, b) in m.iter_mut().zip(v.iter()) {
            *a += w * b;
        }
    }
    m
}

/// Assigns a batch for every head, then advances duals and centers.
/// Returns the k-means objective contribution per head.
fn cluster_batch(
    heads: &mut [HeadState],
    chunk: &[usize],
    means: &[Vec<f64>],
    fresh: &mut [Vec<usize>],
    cfg: &CokeConfig,
    epoch: usize,
) -> Result<Vec<f64>> {
    let per_batch = batch_mode(cfg.center_mode, epoch, cfg.avg_start);
    let mut objectives = Vec::with_capacity(heads.len());
    for (h, head) in heads.iter_mut().enumerate() {
        let gamma_fraction = cfg.gamma_fraction(head.k);
        let mut labels = Vec::with_capacity(chunk.len());
        let mut obj = 0.0;
        for (&i, x) in chunk.iter().zip(means) {
            let s = similarity_row(x, head.centers.centers())?;
            let l = assign_hard(&s, &head.duals)?;
            obj += dot(x, x) + 1.0 - 2.0 * s[l];
            fresh[h][i] = l;
            labels.push(l);
        }
        head.duals.update(&labels, &gamma_fraction, cfg.dual_mode)?;
        let batch: Vec<(&[f64], usize)> = means.iter().map(Vec::as_slice).zip(labels.iter().copied()).collect();
        if per_batch {
            head.centers.update_minibatch(&batch)?;
        } else {
            head.centers.accumulate(&batch)?;
        }
        objectives.push(obj);
    }
    Ok(objectives)
}

/// The alternating loop: random centers, one assignment-only scan epoch, then
/// `T` epochs in which every batch trains the encoder against the previous
/// epoch's labels and centers and is then clustered online.
pub fn run_training(dataset: &Dataset, cfg: &CokeConfig) -> Result<TrainingOutcome> {
    let n = dataset.n();
    cfg.validate(n)?;
    let mut encoder =
        LinearEncoder::random(cfg.embed_dim, dataset.dim(), cfg.learning_rate, cfg.weight_decay, &mut rng(cfg.seed, STREAM_ENCODER))?;
    let mut shuffle = rng(cfg.seed, STREAM_SHUFFLE);
    let mut aug = rng(cfg.seed, STREAM_AUGMENT);
    let init_seed = rng(cfg.seed, STREAM_INIT).next_u64_seed();
    let truth = dataset.truth();
    let use_ensemble = cfg.views == 1;

    let clean = embed(&encoder, dataset)?;
    let mut heads: Vec<HeadState> =
        cfg.k_heads.iter().map(|&k| Ok(HeadState::new(k, init_centers(&clean, k, init_seed)?, n, cfg))).collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..n).collect();
    let mut fresh: Vec<Vec<usize>> = vec![vec![0; n]; heads.len()];

    // Scan epoch: labels and centers only.
    order.shuffle(&mut shuffle);
    for chunk in order.chunks(cfg.batch_size) {
        let views = make_views(&encoder, dataset, chunk, cfg, &mut aug)?;
        let means: Vec<Vec<f64>> = views.emb.iter().map(|v| view_mean(v)).collect();
        cluster_batch(&mut heads, chunk, &means, &mut fresh, cfg, 0)?;
    }
    for (head, labels) in heads.iter_mut().zip(&fresh) {
        head.store = AssignmentStore::new(labels.clone(), 0);
        head.centers.finalize_epoch()?;
        head.effective = head.store.labels().to_vec();
    }

    let mut reports = Vec::new();
    let mut trace = Vec::new();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle);
        let mut loss_sum = 0.0;
        let mut objectives = vec![0.0; heads.len()];
        // Loss centers for the whole epoch when they come from the previous one.
        let prev_centers: Vec<Vec<UnitVector>> = heads
            .iter()
            .map(|h| {
                if use_ensemble && h.ensemble.is_active() {
                    h.ensemble.normalized_centers()
                } else {
                    Ok(h.centers.prev_centers().to_vec())
                }
            })
            .collect::<Result<_>>()?;

        for chunk in order.chunks(cfg.batch_size) {
            let views = make_views(&encoder, dataset, chunk, cfg, &mut aug)?;
            let means: Vec<Vec<f64>> = views.emb.iter().map(|v| view_mean(v)).collect();
            let previous_labels: Vec<Vec<usize>> = heads.iter().map(|h| chunk.iter().map(|&i| h.store.label(i)).collect()).collect();
            let previous_stamps: Vec<(usize, usize)> = heads
                .iter()
                .map(|h| chunk.iter().map(|&i| h.store.stamp(i)).fold((usize::MAX, 0), |(lo, hi), s| (lo.min(s), hi.max(s))))
                .collect();

            let objs = cluster_batch(&mut heads, chunk, &means, &mut fresh, cfg, epoch)?;
            for (o, v) in objectives.iter_mut().zip(objs) {
                *o += v;
            }

            // Targets per head.
            let current_centers: Vec<Vec<UnitVector>> = heads.iter().map(|h| h.centers.centers().to_vec()).collect();
            let mut targets: Vec<Vec<Vec<SoftLabel>>> = Vec::with_capacity(chunk.len());
            for (b, &i) in chunk.iter().enumerate() {
                let mut per_view: Vec<Vec<SoftLabel>> = vec![Vec::with_capacity(heads.len()); cfg.views];
                for (h, head) in heads.iter().enumerate() {
                    let loss_centers = match cfg.loss_inputs.centers {
                        Epoch::Previous => &prev_centers[h],
                        Epoch::Current => &current_centers[h],
                    };
                    let base = match cfg.loss_inputs.labels {
                        Epoch::Previous if use_ensemble && head.ensemble.is_active() => head.ensemble.soft_target(i)?,
                        Epoch::Previous => SoftLabel::one_hot(head.k, previous_labels[h][b]),
                        Epoch::Current => SoftLabel::one_hot(head.k, fresh[h][i]),
                    };
                    if cfg.views == 2 {
                        let hard = base.argmax();
                        let p1 = predict_probs(&views.emb[b][0], loss_centers, cfg.temperature);
                        let p2 = predict_probs(&views.emb[b][1], loss_centers, cfg.temperature);
                        per_view[0].push(mix_reference(hard, &p2, cfg.alpha));
                        per_view[1].push(mix_reference(hard, &p1, cfg.alpha));
                    } else {
                        per_view[0].push(base);
                    }
                }
                targets.push(per_view);
            }

            let mut items = Vec::with_capacity(chunk.len() * cfg.views);
            for (b, per_view) in targets.iter().enumerate() {
                for (v, labels) in per_view.iter().enumerate() {
                    let targets = labels
                        .iter()
                        .enumerate()
                        .map(|(h, y)| {
                            let c: &[UnitVector] = match cfg.loss_inputs.centers {
                                Epoch::Previous => &prev_centers[h],
                                Epoch::Current => &current_centers[h],
                            };
                            (c, y)
                        })
                        .collect();
                    items.push(TrainItem { raw: &views.raw[b][v], targets });
                }
            }
            let loss = encoder_step(&mut encoder, &items, cfg.temperature)?;
            loss_sum += loss * chunk.len() as f64;

            if cfg.trace {
                for (h, head) in heads.iter().enumerate() {
                    let center_epoch = match cfg.loss_inputs.centers {
                        Epoch::Previous => head.centers.completed_epochs() - 1,
                        Epoch::Current => head.centers.current_tag() - 1,
                    };
                    let (lo, hi) = match cfg.loss_inputs.labels {
                        Epoch::Previous => previous_stamps[h],
                        Epoch::Current => (epoch, epoch),
                    };
                    trace.push(LossTrace { epoch, head: h, center_epoch, label_epoch_min: lo, label_epoch_max: hi });
                }
            }

            for (h, head) in heads.iter_mut().enumerate() {
                for &i in chunk {
                    head.store.set(i, fresh[h][i], epoch);
                }
            }
        }

        let mean_loss = loss_sum / n as f64;
        for (h, head) in heads.iter_mut().enumerate() {
            head.centers.finalize_epoch()?;
            let churn = head.close_epoch(epoch, use_ensemble)?;
            reports.push(head.report(h, epoch, objectives[h], mean_loss, churn, n, cfg, truth, false)?);
        }
    }

    Ok(TrainingOutcome { encoder, state: MultiHeadState { heads }, reports, trace })
}

/// [`run_training`] with at least two clustering heads sharing one encoder.
pub fn run_multihead(dataset: &Dataset, cfg: &CokeConfig) -> Result<TrainingOutcome> {
    if cfg.k_heads.len() < 2 {
        return Err(CokeError::Config("multi-head training needs at least two heads".into()));
    }
    run_training(dataset, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{DualMode, LossInputs};
    use crate::oracle::{batch_constrained_kmeans, integer_gamma};
    use crate::synth::gen_sphere_gmm;
    use crate::vector::normalize;

    fn small_cfg(k: usize) -> CokeConfig {
        CokeConfig { k_heads: vec![k], batch_size: 16, epochs: 6, avg_start: 6, embed_dim: 4, ..CokeConfig::default() }
    }

    fn antipodal(n_each: usize) -> (Vec<UnitVector>, Vec<usize>) {
        let mut pts = Vec::new();
        let mut truth = Vec::new();
        for i in 0..n_each {
            let e = 0.01 * (i as f64 / n_each as f64 - 0.5);
            pts.push(normalize(&[1.0, e, -e]).unwrap());
            truth.push(0);
            pts.push(normalize(&[-1.0, -e, e]).unwrap());
            truth.push(1);
        }
        (pts, truth)
    }

    #[test]
    fn single_cluster_center_is_global_mean() {
        let data = gen_sphere_gmm(60, 3, 3, 0.3, 0.0, 2).unwrap();
        let pts: Vec<UnitVector> = data.rows().iter().map(|r| normalize(r).unwrap()).collect();
        let cfg = CokeConfig { epochs: 1, avg_start: 1, ..small_cfg(1) };
        let out = run_clustering(&pts, &cfg, None).unwrap().remove(0);
        assert!(out.labels.iter().all(|&l| l == 0));
        let mut mean = vec![0.0; 3];
        for p in &pts {
            for (m, v) in mean.iter_mut().zip(p.iter()) {
                *m += v;
            }
        }
        let want = normalize(&mean).unwrap();
        for (a, b) in out.centers.centers()[0].iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn antipodal_groups_separate_within_five_epochs() {
        let (pts, truth) = antipodal(40);
        let cfg = CokeConfig { gamma_prime: 1.0, eta: 1.0, epochs: 5, avg_start: 5, ..small_cfg(2) };
        let out = run_clustering(&pts, &cfg, Some(&truth)).unwrap().remove(0);
        assert_eq!(nmi(&out.labels, &truth).unwrap(), 1.0);
        assert_eq!(out.reports.last().unwrap().nmi_vs_truth, Some(1.0));

        let gamma = integer_gamma(1.0, pts.len(), 2);
        let reference = batch_constrained_kmeans(&pts, vec![pts[0].clone(), pts[2].clone()], &gamma, 20, 1e-12).unwrap();
        assert_eq!(nmi(&reference.solution.labels, &out.labels).unwrap(), 1.0);
    }

    #[test]
    fn clustering_is_deterministic() {
        let data = gen_sphere_gmm(200, 5, 4, 0.2, 0.5, 9).unwrap();
        let pts: Vec<UnitVector> = data.rows().iter().map(|r| normalize(r).unwrap()).collect();
        let cfg = CokeConfig { dual_mode: DualMode::Projected, tau: Some(5.0), ..small_cfg(4) };
        let a = run_clustering(&pts, &cfg, data.truth()).unwrap().remove(0);
        let b = run_clustering(&pts, &cfg, data.truth()).unwrap().remove(0);
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.reports, b.reports);
        let c = run_clustering(&pts, &CokeConfig { seed: 1, ..cfg }, data.truth()).unwrap().remove(0);
        assert_ne!(a.reports, c.reports);
    }

    #[test]
    fn reports_are_consistent() {
        let data = gen_sphere_gmm(150, 4, 3, 0.3, 0.0, 4).unwrap();
        let pts: Vec<UnitVector> = data.rows().iter().map(|r| normalize(r).unwrap()).collect();
        let out = run_clustering(&pts, &small_cfg(5), None).unwrap().remove(0);
        assert_eq!(out.reports.len(), 6);
        for (t, r) in out.reports.iter().enumerate() {
            assert_eq!(r.epoch, t + 1);
            assert!(r.min_count <= r.max_count);
            assert!((0.0..=1.0).contains(&r.label_churn));
            assert!(r.nmi_vs_truth.is_none());
        }
        let rec = out.reports[0].to_record();
        assert_eq!(rec.get("epoch"), Some("1"));
        assert!(rec.get("nmi_vs_truth").is_none());
    }

    #[test]
    fn guard_examples() {
        let pts = vec![normalize(&[1.0, 0.0]).unwrap(), normalize(&[0.0, 1.0]).unwrap()];
        let centers = pts.clone();
        let same = monotone_guard_check(&[0, 1], &[0, 1], &pts, &centers).unwrap();
        assert!(same.kept_previous);
        assert_eq!(same.labels, vec![0, 1]);
        let better = monotone_guard_check(&[1, 0], &[0, 1], &pts, &centers).unwrap();
        assert!(!better.kept_previous);
        assert_eq!(better.labels, vec![0, 1]);
        assert!((better.previous_objective - 4.0).abs() < 1e-12);
        assert!(better.new_objective.abs() < 1e-12);
        assert!(monotone_guard_check(&[0], &[0, 1], &pts, &centers).is_err());
    }

    #[test]
    fn guard_rejects_shuffled_labels() {
        let data = gen_sphere_gmm(120, 4, 3, 0.1, 0.0, 8).unwrap();
        let pts: Vec<UnitVector> = data.rows().iter().map(|r| normalize(r).unwrap()).collect();
        let out = run_clustering(&pts, &small_cfg(3), None).unwrap().remove(0);
        let mut shuffled = out.labels.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(3));
        let d = monotone_guard_check(&out.labels, &shuffled, &pts, out.centers.centers()).unwrap();
        assert!(d.kept_previous);
        assert_eq!(d.labels, out.labels);
    }

    #[test]
    fn guarded_objective_never_increases() {
        for seed in 0..4 {
            let data = gen_sphere_gmm(300, 6, 5, 0.4, 1.0, seed).unwrap();
            let pts: Vec<UnitVector> = data.rows().iter().map(|r| normalize(r).unwrap()).collect();
            let cfg = CokeConfig { monotone_guard: true, epochs: 12, avg_start: 12, seed, ..small_cfg(5) };
            let out = run_clustering(&pts, &cfg, None).unwrap().remove(0);
            for w in out.reports.windows(2) {
                assert!(
                    w[1].kmeans_objective <= w[0].kmeans_objective + 1e-9,
                    "seed {seed}: {} -> {}",
                    w[0].kmeans_objective,
                    w[1].kmeans_objective
                );
            }
        }
    }

    fn toy_training_cfg() -> CokeConfig {
        CokeConfig { k_heads: vec![3], batch_size: 20, epochs: 4, avg_start: 2, embed_dim: 4, trace: true, ..CokeConfig::default() }
    }

    #[test]
    fn losses_consume_previous_epoch_snapshots() {
        let data = gen_sphere_gmm(90, 6, 3, 0.2, 0.0, 5).unwrap();
        for views in [1, 2] {
            let out = run_training(&data, &CokeConfig { views, ..toy_training_cfg() }).unwrap();
            assert_eq!(out.trace.len(), 4 * 5);
            for t in &out.trace {
                assert_eq!(t.center_epoch + 1, t.epoch);
                assert_eq!((t.label_epoch_min + 1, t.label_epoch_max + 1), (t.epoch, t.epoch));
            }
        }
        let current = LossInputs { labels: Epoch::Current, centers: Epoch::Current };
        let out = run_training(&data, &CokeConfig { loss_inputs: current, ..toy_training_cfg() }).unwrap();
        assert!(out.trace.iter().all(|t| t.center_epoch == t.epoch && t.label_epoch_min == t.epoch));
    }

    #[test]
    fn single_view_without_averaging_stays_hard() {
        let data = gen_sphere_gmm(90, 6, 3, 0.2, 0.0, 5).unwrap();
        let out = run_training(&data, &CokeConfig { views: 1, avg_start: 4, ..toy_training_cfg() }).unwrap();
        assert!(out.state.heads.iter().all(|h| h.ensemble.epochs_accumulated() == 0));
        let out = run_training(&data, &CokeConfig { views: 1, ..toy_training_cfg() }).unwrap();
        assert_eq!(out.state.heads[0].ensemble.epochs_accumulated(), 2);
        let two = run_training(&data, &toy_training_cfg()).unwrap();
        assert_eq!(two.state.heads[0].ensemble.epochs_accumulated(), 0);
    }

    #[test]
    fn identical_heads_agree_and_single_head_matches_training() {
        let data = gen_sphere_gmm(90, 6, 3, 0.2, 0.0, 6).unwrap();
        let cfg = CokeConfig { k_heads: vec![3, 3], ..toy_training_cfg() };
        let out = run_multihead(&data, &cfg).unwrap();
        assert_eq!(out.state.heads[0].store, out.state.heads[1].store);
        assert_eq!(out.head_reports(0).count(), 4);
        assert!(matches!(run_multihead(&data, &toy_training_cfg()), Err(CokeError::Config(_))));

        let a = run_training(&data, &toy_training_cfg()).unwrap();
        let b = run_training(&data, &toy_training_cfg()).unwrap();
        assert_eq!(a.reports, b.reports);
        assert_eq!(a.encoder.weights(), b.encoder.weights());
    }

    #[test]
    fn config_echo_lists_every_field() {
        let rec = config_record(&CokeConfig::default());
        assert_eq!(rec.entries().len(), 20);
        assert_eq!(rec.kind(), Some("config"));
        assert_eq!(rec.get("k_heads"), Some("10"));
        assert_eq!(rec.get("tau"), Some("none"));
    }
}
