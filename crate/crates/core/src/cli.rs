//! Command-line front end: `gen`, `train`, `analyze`, `fit`, `ingest`.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 numerical failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analytics::{self, AnalysisConfig, Report};
use crate::datamodel::{ActivationTensor, Run, Which};
use crate::datasets::{self, BlobSpec, DatasetDescriptor, LabeledDataset};
use crate::entropy::{BitOrder, EstimatorConfig, Method};
use crate::error::{Error, Result};
use crate::nettrainer::{self, ArchSpec, RunMeta, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "actstat", version, about = "Complexity and effective dimension of network representations")]
pub struct Cli {
    /// Worker threads (default: all cores); results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate or transform a labeled dataset.
    Gen(GenArgs),
    /// Train a small ReLU network and dump activations.
    Train(TrainArgs),
    /// Compute per-layer observables for a run.
    Analyze(AnalyzeArgs),
    /// Fit scaling laws to an observables CSV.
    #[command(subcommand)]
    Fit(FitCommand),
    /// Validate an externally produced manifest and its dumps.
    Ingest(IngestArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    Blobs,
    Tear,
    Colorize,
    Randlabels,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub kind: GenKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Source dataset directory (tear, colorize, randlabels).
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Square patch edge for tearing.
    #[arg(long, default_value_t = 8)]
    pub patch: usize,
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    /// Number of samples (blobs).
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// Per-sample shape, comma separated: `D` or `Ch,H,W` (blobs).
    #[arg(long, default_value = "20")]
    pub shape: String,
    /// Minimum distance between class prototypes (blobs).
    #[arg(long, default_value_t = 4.0)]
    pub spread: f64,
    /// Gaussian noise standard deviation (blobs).
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// `fc:W1,W2,...` or `hw:DEPTHxWIDTH`.
    #[arg(long)]
    pub arch: String,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub epochs: u32,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.0)]
    pub wd: f64,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.0)]
    pub momentum: f64,
    /// Comma-separated epochs to dump; 0 is the initialization. Default: 0 and the last epoch.
    #[arg(long)]
    pub capture: Option<String>,
    /// Comma-separated `EPOCH:FACTOR` learning-rate drops.
    #[arg(long = "lr-drop")]
    pub lr_drop: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    Counts,
    ChainLogistic,
    ChainStumps,
}

impl From<EstimatorArg> for Method {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Counts => Method::Counts,
            EstimatorArg::ChainLogistic => Method::ChainLogistic,
            EstimatorArg::ChainStumps => Method::ChainStumps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BitOrderArg {
    Natural,
    Permuted,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Run directory or manifest file.
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long, value_enum, default_value = "chain-logistic")]
    pub estimator: EstimatorArg,
    #[arg(long, default_value_t = 2)]
    pub folds: usize,
    /// Row cap for entropy and PCA; rows beyond it are subsampled.
    #[arg(long = "max-rows", default_value_t = 200_000)]
    pub max_rows: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "bit-order", value_enum, default_value = "natural")]
    pub bit_order: BitOrderArg,
    /// JSON object mapping layer names to block ids.
    #[arg(long)]
    pub blocks: Option<PathBuf>,
    /// Also compute whole-network complexities (dense runs only).
    #[arg(long)]
    pub network: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum FitCommand {
    /// y ≈ A / n^alpha over epochs.
    Powerlaw(PowerlawArgs),
    /// y ≈ a / N^b + c over layer widths.
    Widthscale(WidthscaleArgs),
}

#[derive(Debug, Args)]
pub struct PowerlawArgs {
    #[arg(long)]
    pub csv: PathBuf,
    #[arg(long)]
    pub column: String,
    /// Layer name or block id; rows sharing an epoch are averaged.
    #[arg(long = "layer-block")]
    pub layer_block: Option<String>,
    /// Inclusive epoch range `FIRST:LAST`. Default: every epoch ≥ 1.
    #[arg(long)]
    pub epochs: Option<String>,
    /// Write the fit JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WidthscaleArgs {
    /// One or more trajectory CSVs; rows sharing a width are averaged.
    #[arg(long, num_args = 1.., required = true)]
    pub csv: Vec<PathBuf>,
    #[arg(long)]
    pub column: String,
    #[arg(long = "width-column", default_value = "neuron_count")]
    pub width_column: String,
    /// Only rows of this layer.
    #[arg(long)]
    pub layer: Option<String>,
    /// Only rows of this epoch. Default: the last epoch of each file.
    #[arg(long)]
    pub epoch: Option<u32>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Read every dump in full and check it, not only the headers.
    #[arg(long)]
    pub validate: bool,
}

/// Parse arguments, run, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numeric() {
        EXIT_NUMERIC
    } else {
        EXIT_DATA
    }
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn execute(cli: Cli) -> CliResult<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Analyze(a) => cmd_analyze(&a),
        Command::Fit(FitCommand::Powerlaw(a)) => cmd_powerlaw(&a),
        Command::Fit(FitCommand::Widthscale(a)) => cmd_widthscale(&a),
        Command::Ingest(a) => cmd_ingest(&a),
    })
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> CliResult<Vec<T>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("bad {what} entry '{s}'")))
        })
        .collect()
}

fn parse_pair<A: std::str::FromStr, B: std::str::FromStr>(text: &str, what: &str) -> CliResult<(A, B)> {
    let bad = || CliError::Usage(format!("bad {what} '{text}', expected A:B"));
    let (a, b) = text.split_once(':').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn require_input(a: &GenArgs) -> CliResult<(LabeledDataset, DatasetDescriptor)> {
    let dir = a
        .input
        .as_ref()
        .ok_or_else(|| CliError::Usage(format!("--in is required for --kind {:?}", a.kind).to_lowercase()))?;
    Ok(datasets::load_dataset(dir)?)
}

fn cmd_gen(a: &GenArgs) -> CliResult<()> {
    let (ds, descriptor) = match a.kind {
        GenKind::Blobs => {
            let blob = BlobSpec {
                classes: a.classes,
                shape: parse_list(&a.shape, "shape")?,
                spread: a.spread,
                noise: a.noise,
                samples: a.samples,
                seed: a.seed,
            };
            let ds = datasets::synth_blobs(&blob)?;
            let desc = DatasetDescriptor {
                generator: "blobs".into(),
                seed: a.seed,
                classes: a.classes,
                dims: ds.inputs.dims().to_vec(),
                params: serde_json::to_value(&blob).unwrap(),
            };
            (ds, desc)
        }
        GenKind::Tear => {
            let (src, parent) = require_input(a)?;
            let src = as_images(src)?;
            let dims = src.inputs.dims();
            let plan = datasets::make_tear_plan(dims[2], dims[3], a.patch, a.seed)?;
            let ds = datasets::tear(&src, &plan)?;
            let desc = DatasetDescriptor {
                generator: "tear".into(),
                seed: a.seed,
                classes: ds.classes,
                dims: ds.inputs.dims().to_vec(),
                params: serde_json::json!({ "patch": a.patch, "plan": plan, "source": parent }),
            };
            (ds, desc)
        }
        GenKind::Colorize => {
            let (src, parent) = require_input(a)?;
            let ds = datasets::colorize_embed(&src, a.seed)?;
            let desc = DatasetDescriptor {
                generator: "colorize".into(),
                seed: a.seed,
                classes: ds.classes,
                dims: ds.inputs.dims().to_vec(),
                params: serde_json::json!({ "source": parent }),
            };
            (ds, desc)
        }
        GenKind::Randlabels => {
            let (src, parent) = require_input(a)?;
            let ds = datasets::randomize_labels(&src, a.classes, a.seed)?;
            let desc = DatasetDescriptor {
                generator: "randlabels".into(),
                seed: a.seed,
                classes: a.classes,
                dims: ds.inputs.dims().to_vec(),
                params: serde_json::json!({ "source": parent }),
            };
            (ds, desc)
        }
    };
    datasets::save_dataset(&ds, &descriptor, &a.out)?;
    eprintln!("wrote {} samples to {}", ds.len(), a.out.display());
    Ok(())
}

/// N×H×W gray images become N×1×H×W.
fn as_images(ds: LabeledDataset) -> Result<LabeledDataset> {
    let dims = ds.inputs.dims().to_vec();
    match dims.len() {
        4 => Ok(ds),
        3 => {
            let values = ds.inputs.as_f32().map(<[f32]>::to_vec).ok_or_else(|| {
                Error::Validation("images must be real-valued".into())
            })?;
            let inputs = ActivationTensor::from_f32(vec![dims[0], 1, dims[1], dims[2]], values)?;
            LabeledDataset::new(inputs, ds.labels, ds.classes)
        }
        _ => Err(Error::Shape(format!("expected N×H×W or N×Ch×H×W images, got {dims:?}"))),
    }
}

fn cmd_train(a: &TrainArgs) -> CliResult<()> {
    let capture = match &a.capture {
        Some(text) => parse_list(text, "capture")?,
        None => vec![0, a.epochs],
    };
    let lr_drops = match &a.lr_drop {
        Some(text) => text
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| parse_pair(s, "lr-drop"))
            .collect::<CliResult<Vec<(u32, f64)>>>()?,
        None => Vec::new(),
    };
    let (ds, descriptor) = datasets::load_dataset(&a.data)?;
    let arch = ArchSpec::parse(&a.arch, ds.feature_dim(), ds.classes)?;
    let cfg = TrainConfig {
        epochs: a.epochs,
        learning_rate: a.lr,
        weight_decay: a.wd,
        batch_size: a.batch,
        seed: a.seed,
        lr_drops,
        capture_epochs: capture,
        momentum: a.momentum,
    };
    cfg.validate()?;
    let mut net = nettrainer::init_network(&arch, a.seed)?;
    let run_id = a
        .out
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    let meta = RunMeta {
        run_id,
        architecture: a.arch.clone(),
        dataset_id: format!("{}:{}", descriptor.generator, descriptor.seed),
    };
    let (history, _) = nettrainer::train_to_dir(&mut net, &ds, &cfg, &a.out, &meta)?;
    if let Some(last) = history.last() {
        eprintln!(
            "epoch {}: loss {} accuracy {}",
            last.epoch,
            analytics::format_real(last.train_loss),
            analytics::format_real(last.train_accuracy)
        );
    }
    Ok(())
}

fn manifest_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("manifest.json")
    } else {
        p.to_path_buf()
    }
}

fn read_blocks(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Validation(format!("{}: expected a JSON object of layer → block: {e}", path.display())))
}

fn cmd_analyze(a: &AnalyzeArgs) -> CliResult<()> {
    let run = Run::load(manifest_path(&a.run))?;
    let estimator = EstimatorConfig {
        method: a.estimator.into(),
        folds: a.folds,
        shuffle_seed: a.seed,
        bit_order: match a.bit_order {
            BitOrderArg::Natural => BitOrder::Natural,
            BitOrderArg::Permuted => BitOrder::SeededPermutation,
        },
        max_rows: Some(a.max_rows),
        subsample_seed: a.seed,
        ..EstimatorConfig::default()
    };
    estimator.validate()?;
    let cfg = AnalysisConfig {
        estimator: estimator.clone(),
        effdim_max_rows: Some(a.max_rows),
        effdim_seed: a.seed,
    };
    let trajectory = analytics::analyze_run(&run, &cfg)?;
    let blocks = match &a.blocks {
        Some(p) => Some(analytics::block_average(trajectory.rows(), &read_blocks(p)?)?),
        None => None,
    };
    let network = if a.network {
        Some(
            trajectory
                .epochs()
                .into_iter()
                .map(|e| analytics::network_observables(&run, e, &estimator))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    let report = Report {
        trajectory,
        blocks,
        network,
        ..Report::default()
    };
    analytics::emit_report(&report, &a.out)?;
    eprintln!(
        "analyzed {} layer snapshots into {}",
        report.trajectory.rows().len(),
        a.out.display()
    );
    Ok(())
}

/// Columns of a CSV by header name.
struct Table {
    path: PathBuf,
    headers: Vec<String>,
    records: Vec<csv::StringRecord>,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let err = |e: csv::Error| Error::Validation(format!("{}: {e}", path.display()));
        let mut r = csv::Reader::from_path(path).map_err(err)?;
        let headers = r.headers().map_err(err)?.iter().map(str::to_string).collect();
        let records = r.records().collect::<std::result::Result<_, _>>().map_err(err)?;
        Ok(Self {
            path: path.to_path_buf(),
            headers,
            records,
        })
    }

    fn index(&self, name: &str) -> Result<usize> {
        self.headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::Validation(format!(
                "{}: no column '{name}'; available: {}",
                self.path.display(),
                self.headers.join(", ")
            ))
        })
    }

    fn number(&self, rec: &csv::StringRecord, col: usize) -> Result<f64> {
        rec[col].parse().map_err(|_| {
            Error::Validation(format!(
                "{}: column '{}' has non-numeric value '{}'",
                self.path.display(),
                self.headers[col],
                &rec[col]
            ))
        })
    }

    /// Index of the column naming the layer or block of each row.
    fn unit_column(&self) -> Option<usize> {
        self.index("block").or_else(|_| self.index("layer")).ok()
    }
}

/// Mean of values sharing a key, keys ascending.
fn group_mean<K: Ord + Copy>(pairs: impl Iterator<Item = (K, f64)>) -> Vec<(K, f64)> {
    let mut acc: BTreeMap<K, (f64, usize)> = BTreeMap::new();
    for (k, v) in pairs {
        let e = acc.entry(k).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

fn emit_json(v: &serde_json::Value, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(v).unwrap();
    match out {
        Some(p) => std::fs::write(p, text + "\n").map_err(|e| Error::io(p, e)),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn cmd_powerlaw(a: &PowerlawArgs) -> CliResult<()> {
    let range: Option<(u32, u32)> = match &a.epochs {
        Some(t) => Some(parse_pair(t, "epochs")?),
        None => None,
    };
    let t = Table::read(&a.csv)?;
    let col = t.index(&a.column)?;
    let epoch = t.index("epoch")?;
    let unit = match &a.layer_block {
        Some(_) => Some(t.unit_column().ok_or_else(|| {
            Error::Validation(format!("{}: no 'layer' or 'block' column", a.csv.display()))
        })?),
        None => None,
    };
    let mut pairs = Vec::new();
    for rec in &t.records {
        if let (Some(u), Some(want)) = (unit, &a.layer_block) {
            if &rec[u] != want {
                continue;
            }
        }
        let e = t.number(rec, epoch)?;
        if e < 0.0 || e.fract() != 0.0 {
            return Err(Error::Validation(format!("bad epoch value {e}")).into());
        }
        pairs.push((e as u32, t.number(rec, col)?));
    }
    if pairs.is_empty() {
        return Err(Error::Validation(format!(
            "no rows match layer/block '{}'",
            a.layer_block.as_deref().unwrap_or("")
        ))
        .into());
    }
    let series = group_mean(pairs.into_iter());
    let range = range.unwrap_or((1, u32::MAX));
    let fit = analytics::fit_power_law(&series, Some(range))?;
    let label = a.layer_block.clone().unwrap_or_else(|| "all".into());
    let series_name = format!("{}:{}", label, a.column);
    emit_json(&analytics::power_law_json(&series_name, &fit), a.out.as_deref())?;
    Ok(())
}

fn cmd_widthscale(a: &WidthscaleArgs) -> CliResult<()> {
    let mut pairs: Vec<(u64, f64)> = Vec::new();
    for path in &a.csv {
        let t = Table::read(path)?;
        let col = t.index(&a.column)?;
        let wcol = t.index(&a.width_column)?;
        let ecol = t.index("epoch").ok();
        let lcol = match &a.layer {
            Some(_) => Some(t.index("layer")?),
            None => None,
        };
        let epoch_of = |rec: &csv::StringRecord| -> Result<Option<f64>> {
            ecol.map(|c| t.number(rec, c)).transpose()
        };
        let target = match (a.epoch, ecol) {
            (Some(e), _) => Some(e as f64),
            (None, Some(_)) => t
                .records
                .iter()
                .map(|r| epoch_of(r).map(|e| e.unwrap()))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .reduce(f64::max),
            (None, None) => None,
        };
        for rec in &t.records {
            if let (Some(c), Some(want)) = (lcol, &a.layer) {
                if &rec[c] != want {
                    continue;
                }
            }
            if target.is_some() && epoch_of(rec)? != target {
                continue;
            }
            let w = t.number(rec, wcol)?;
            if !(w > 0.0) || w.fract() != 0.0 {
                return Err(Error::Validation(format!("bad width {w} in {}", path.display())).into());
            }
            pairs.push((w as u64, t.number(rec, col)?));
        }
    }
    let points: Vec<(f64, f64)> = group_mean(pairs.into_iter())
        .into_iter()
        .map(|(w, y)| (w as f64, y))
        .collect();
    let fit = analytics::fit_width_scaling(&points)?;
    emit_json(&analytics::width_scaling_json(&a.column, &fit), a.out.as_deref())?;
    Ok(())
}

fn cmd_ingest(a: &IngestArgs) -> CliResult<()> {
    let run = Run::load(&a.manifest)?;
    let epochs = if run.manifest().epochs_captured.is_empty() {
        vec![0]
    } else {
        run.manifest().epochs_captured.clone()
    };
    if a.validate {
        for &e in &epochs {
            for layer in run.layers() {
                let post = run.load_tensor(layer, e, Which::Post)?;
                let (bits, _) = analytics::layer_bits(&run, layer, e)?;
                if post.as_binary().is_none() {
                    if let Some(v) = post.values_f64().into_iter().find(|v| !v.is_finite()) {
                        return Err(Error::Numeric(format!(
                            "layer '{}' epoch {e}: non-finite activation {v}",
                            layer.name
                        ))
                        .into());
                    }
                }
                eprintln!(
                    "epoch {e} layer {}: {} rows × {} neurons",
                    layer.name,
                    bits.rows(),
                    bits.cols()
                );
            }
        }
    }
    println!(
        "run '{}': {} layers, {} epoch(s) ok",
        run.manifest().run_id,
        run.layers().len(),
        epochs.len()
    );
    Ok(())
}
