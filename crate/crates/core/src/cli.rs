//! Command-line front end.
//!
//! Every subcommand writes its artifacts to the requested paths and prints a
//! single summary record on standard output. Exit codes: 0 on success, 1 for
//! usage, I/O and format problems, 2 for numeric or infeasibility errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{default_avg_start, CenterMode, CokeConfig, DualMode};
use crate::dataset::Dataset;
use crate::error::{CokeError, Result};
use crate::io::{read_labels, read_matrix, write_labels, write_matrix, write_report, Record};
use crate::metrics::{ari, clustering_accuracy, nmi};
use crate::oracle::{diagnose, integer_gamma, solve_constrained_assignment};
use crate::pipeline::{config_record, run_clustering, run_training, EpochReport};
use crate::synth::{gen_dominant_mode, gen_sphere_gmm};
use crate::vector::{normalize, SimilarityMatrix, UnitVector};

#[derive(Debug, Parser)]
#[command(name = "coke", version, about = "Online constrained k-means")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset and its truth labels.
    Gen(GenArgs),
    /// Cluster fixed embeddings.
    Cluster(ClusterArgs),
    /// Train a linear encoder jointly with the clustering.
    Train(TrainArgs),
    /// Solve the constrained assignment exactly for fixed centers.
    Oracle(OracleArgs),
    /// Score predicted labels against truth.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GenKind {
    SphereGmm,
    DominantMode,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum, default_value = "sphere-gmm")]
    pub kind: GenKind,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub dim: usize,
    #[arg(long, default_value_t = 10)]
    pub clusters: usize,
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    /// Size exponent: cluster sizes scale as rank^(-imbalance).
    #[arg(long, default_value_t = 0.0)]
    pub imbalance: f64,
    /// Share of points in the repeated direction (dominant-mode only).
    #[arg(long, default_value_t = 0.6)]
    pub dominant_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub truth_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CenterModeArg {
    PerMinibatch,
    PerEpoch,
    TwoStage,
}

impl From<CenterModeArg> for CenterMode {
    fn from(m: CenterModeArg) -> Self {
        match m {
            CenterModeArg::PerMinibatch => CenterMode::PerMinibatch,
            CenterModeArg::PerEpoch => CenterMode::PerEpoch,
            CenterModeArg::TwoStage => CenterMode::TwoStage,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DualModeArg {
    Simplified,
    Projected,
}

impl From<DualModeArg> for DualMode {
    fn from(m: DualModeArg) -> Self {
        match m {
            DualModeArg::Simplified => DualMode::Simplified,
            DualModeArg::Projected => DualMode::Projected,
        }
    }
}

/// Flags shared by `cluster` and `train`.
#[derive(Debug, Args)]
pub struct ClusterFlags {
    #[arg(long)]
    pub input: PathBuf,
    /// Cluster count per head, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "10")]
    pub k: Vec<usize>,
    #[arg(long, default_value_t = 0.4)]
    pub gamma_prime: f64,
    #[arg(long, default_value_t = 20.0)]
    pub eta: f64,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 256)]
    pub batch: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "per-minibatch")]
    pub center_mode: CenterModeArg,
    #[arg(long, value_enum, default_value = "simplified")]
    pub dual_mode: DualModeArg,
    #[arg(long)]
    pub monotone_guard: bool,
    /// Labels of the first head; further heads go to `<stem>.head<h>.<ext>`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

impl ClusterFlags {
    fn config(&self) -> CokeConfig {
        CokeConfig {
            k_heads: self.k.clone(),
            gamma_prime: self.gamma_prime,
            eta: self.eta,
            tau: self.tau,
            batch_size: self.batch,
            epochs: self.epochs,
            avg_start: default_avg_start(self.epochs),
            seed: self.seed,
            center_mode: self.center_mode.into(),
            dual_mode: self.dual_mode.into(),
            monotone_guard: self.monotone_guard,
            ..CokeConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub flags: ClusterFlags,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub flags: ClusterFlags,
    #[arg(long, default_value_t = 8)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = 0.5)]
    pub lr: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 0.1)]
    pub temp: f64,
    #[arg(long, default_value_t = 2)]
    pub views: usize,
    #[arg(long, default_value_t = 0.2)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.0)]
    pub mask: f64,
    /// Defaults to 80% of the epochs.
    #[arg(long)]
    pub avg_start: Option<usize>,
    /// Encoder weights, one row per output dimension.
    #[arg(long)]
    pub encoder_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub centers: PathBuf,
    #[arg(long, default_value_t = 0.4)]
    pub gamma_prime: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Online labels to measure regret and violation against.
    #[arg(long)]
    pub compare: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

fn unit_rows(rows: &[Vec<f64>]) -> Result<Vec<UnitVector>> {
    rows.iter().map(|r| normalize(r)).collect()
}

/// `labels.csv` for head 0, `labels.head1.csv` for head 1, and so on.
pub fn head_path(base: &Path, head: usize) -> PathBuf {
    if head == 0 {
        return base.to_path_buf();
    }
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match base.extension() {
        Some(ext) => format!("{stem}.head{head}.{}", ext.to_string_lossy()),
        None => format!("{stem}.head{head}"),
    };
    base.with_file_name(name)
}

fn summary(kind: &str, reports: &[EpochReport]) -> Record {
    let mut r = Record::new(kind);
    for rep in reports {
        r.push(&format!("head{}_min_count", rep.head), rep.min_count);
        r.push(&format!("head{}_max_count", rep.head), rep.max_count);
        if let Some(v) = rep.nmi_vs_truth {
            r.push(&format!("head{}_nmi", rep.head), v);
        }
    }
    r
}

fn last_per_head(reports: &[EpochReport], heads: usize) -> Vec<EpochReport> {
    (0..heads).filter_map(|h| reports.iter().rev().find(|r| r.head == h).cloned()).collect()
}

fn gen(a: &GenArgs) -> Result<Record> {
    let data = match a.kind {
        GenKind::SphereGmm => gen_sphere_gmm(a.n, a.dim, a.clusters, a.noise, a.imbalance, a.seed)?,
        GenKind::DominantMode => gen_dominant_mode(a.n, a.dim, a.clusters, a.dominant_fraction, a.noise, a.seed)?,
    };
    write_matrix(&a.out, data.rows())?;
    if let (Some(path), Some(truth)) = (&a.truth_out, data.truth()) {
        write_labels(path, truth)?;
    }
    Ok(Record::new("gen").with("n", data.n()).with("dim", data.dim()).with("seed", a.seed))
}

fn cluster(a: &ClusterArgs) -> Result<Record> {
    let f = &a.flags;
    let cfg = f.config();
    let points = unit_rows(&read_matrix(&f.input)?)?;
    let outcomes = run_clustering(&points, &cfg, None)?;
    let mut records = vec![config_record(&cfg)];
    let mut all = Vec::new();
    for (h, out) in outcomes.iter().enumerate() {
        write_labels(head_path(&f.out, h), &out.labels)?;
        all.extend(out.reports.iter().cloned());
    }
    // Epoch-major order, heads interleaved, matching the training reports.
    all.sort_by_key(|r| (r.epoch, r.head));
    records.extend(all.iter().map(EpochReport::to_record));
    if let Some(path) = &f.report {
        write_report(path, &records)?;
    }
    Ok(summary("cluster", &last_per_head(&all, outcomes.len())).with("n", points.len()))
}

fn train(a: &TrainArgs) -> Result<Record> {
    let f = &a.flags;
    let cfg = CokeConfig {
        embed_dim: a.embed_dim,
        learning_rate: a.lr,
        weight_decay: a.weight_decay,
        temperature: a.temp,
        views: a.views,
        alpha: a.alpha,
        noise_sigma: a.noise,
        mask_rate: a.mask,
        avg_start: a.avg_start.unwrap_or_else(|| default_avg_start(f.epochs)),
        ..f.config()
    };
    let data = Dataset::new(read_matrix(&f.input)?)?;
    let out = run_training(&data, &cfg)?;
    for (h, head) in out.state.heads.iter().enumerate() {
        write_labels(head_path(&f.out, h), head.store.labels())?;
    }
    if let Some(path) = &a.encoder_out {
        let w = out.encoder.weights();
        let rows: Vec<Vec<f64>> = w.chunks(out.encoder.d_in()).map(<[f64]>::to_vec).collect();
        write_matrix(path, &rows)?;
    }
    let mut records = vec![config_record(&cfg)];
    records.extend(out.reports.iter().map(EpochReport::to_record));
    if let Some(path) = &f.report {
        write_report(path, &records)?;
    }
    let last = last_per_head(&out.reports, cfg.k_heads.len());
    let loss = last.first().map_or(f64::NAN, |r| r.mean_loss);
    Ok(summary("train", &last).with("n", data.n()).with("final_loss", loss))
}

fn oracle(a: &OracleArgs) -> Result<Record> {
    let points = unit_rows(&read_matrix(&a.input)?)?;
    let centers = unit_rows(&read_matrix(&a.centers)?)?;
    let (n, k) = (points.len(), centers.len());
    if k == 0 {
        return Err(CokeError::Format("centers file has no rows".into()));
    }
    let s = SimilarityMatrix::compute(&points, &centers)?;
    let gamma = integer_gamma(a.gamma_prime, n, k);
    let opt = solve_constrained_assignment(&s, &gamma)?;
    write_labels(&a.out, &opt.labels)?;
    let mut rec = Record::new("oracle")
        .with("n", n)
        .with("k", k)
        .with("gamma", gamma[0])
        .with("objective", opt.objective)
        .with("feasible", opt.feasible);
    if let Some(path) = &a.compare {
        let online = read_labels(path)?;
        let real_gamma = vec![a.gamma_prime * n as f64 / k as f64; k];
        let d = diagnose(&s, &online, &real_gamma, &opt)?;
        rec.push("online_objective", s.total(&online));
        rec.push("regret", d.regret.unwrap_or(f64::NAN));
        rec.push("violation", d.violation);
        rec.push("violation_pos", d.violation_pos);
    }
    if let Some(path) = &a.report {
        write_report(path, std::slice::from_ref(&rec))?;
    }
    Ok(rec)
}

fn eval(a: &EvalArgs) -> Result<Record> {
    let pred = read_labels(&a.pred)?;
    let truth = read_labels(&a.truth)?;
    let rec = Record::new("eval")
        .with("n", pred.len())
        .with("acc", clustering_accuracy(&pred, &truth)?)
        .with("nmi", nmi(&pred, &truth)?)
        .with("ari", ari(&pred, &truth)?);
    if let Some(path) = &a.report {
        write_report(path, std::slice::from_ref(&rec))?;
    }
    Ok(rec)
}

pub fn run(cli: &Cli) -> Result<Record> {
    match &cli.command {
        Command::Gen(a) => gen(a),
        Command::Cluster(a) => cluster(a),
        Command::Train(a) => train(a),
        Command::Oracle(a) => oracle(a),
        Command::Eval(a) => eval(a),
    }
}

pub fn exit_code(err: &CokeError) -> i32 {
    if err.is_numeric() {
        2
    } else {
        1
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(rec) => {
            println!("{rec}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
