//! Command-line front end: `te`, `train`, `eval`, `forecast` and `ablate`.
//!
//! Every option can also come from a flat `key=value` file passed with
//! `--config`; keys are the long flag names. A flag beats the file, and the
//! file beats the built-in default. Each command that writes files also writes
//! `run_manifest.txt`, whose `key=value` lines are themselves a valid config
//! file for repeating the run.

use std::collections::BTreeMap;
use std::fmt::{self, Display};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use sha2::{Digest, Sha256};

use crate::causality::{build_causality_matrix, CausalityConfig, CausalityMatrix};
use crate::data::{Split, TimeSeriesDataset};
use crate::error::{Error, Result};
use crate::model::{CauGnnModel, Checkpoint, CheckpointMeta, GnnVariant, ModelConfig, NeighborMode, Readout};
use crate::train::{self, history_csv, EvalReport, SelectionMetric, TrainConfig};

/// Overrides the default output directory (`runs`).
pub const OUT_DIR_ENV: &str = "CAUGNN_OUT_DIR";
pub const RUN_MANIFEST_FILE: &str = "run_manifest.txt";

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

/// Process exit code for an error: 1 usage, 2 data, 3 numerical failure.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => EXIT_USAGE,
        Error::NonFinite { .. }
        | Error::Shape { .. }
        | Error::InvalidShape(_)
        | Error::NonScalarLoss(_)
        | Error::MissingGrad(_) => EXIT_NUMERICAL,
        _ => EXIT_DATA,
    }
}

/// Comma-separated list usable as a flag or config value.
#[derive(Clone, Debug, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.split(',')
            .map(|v| {
                v.trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad list item `{}` in `{s}`", v.trim())))
            })
            .collect::<Result<_>>()
            .map(List)
    }
}

impl<T: Display> Display for List<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Parser, Debug)]
#[command(name = "caugnn", version, about = "Transfer-entropy causality graphs and CNN + GNN forecasting")]
pub struct Cli {
    /// Flat key=value file; keys are the long flag names
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Raise log verbosity (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Estimate the net transfer-entropy matrix and its thresholded graph
    Te(TeArgs),
    /// Train a model and write a checkpoint, history and run manifest
    Train(TrainArgs),
    /// Score a checkpoint on one split
    Eval(EvalArgs),
    /// Predict all variables h steps after time index t
    Forecast(ForecastArgs),
    /// Train the ablation variants over several seeds and compare test metrics
    Ablate(AblateArgs),
}

#[derive(Args, Debug, Default)]
pub struct DataArgs {
    /// Delimited text file, one row per time step
    pub dataset: Option<PathBuf>,
    /// Cell delimiter
    #[arg(long)]
    pub delimiter: Option<char>,
    /// Chronological train,valid,test fractions
    #[arg(long, value_name = "F,F,F")]
    pub split_ratios: Option<List<f64>>,
}

#[derive(Args, Debug, Default)]
pub struct TeOptions {
    /// Equal-width bins per variable
    #[arg(long)]
    pub bins: Option<usize>,
    /// Target history length
    #[arg(long)]
    pub k: Option<usize>,
    /// Source history length
    #[arg(long)]
    pub l: Option<usize>,
    /// Edge threshold on net transfer entropy (bits)
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Args, Debug, Default)]
pub struct TeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub te: TeOptions,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct ModelOptions {
    /// Graph layer family: kgnn or gin
    #[arg(long)]
    pub variant: Option<GnnVariant>,
    /// Use the complete graph instead of the causality graph
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub no_causality: Option<bool>,
    /// Feed the scaled raw window to the graph layers instead of CNN features
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub no_cnn: Option<bool>,
    /// Convolution kernel sizes
    #[arg(long)]
    pub kernels: Option<List<usize>>,
    /// Channels per kernel
    #[arg(long)]
    pub channels: Option<usize>,
    /// Graph layer widths
    #[arg(long)]
    pub hidden: Option<List<usize>>,
    /// Input window length
    #[arg(long)]
    pub window: Option<usize>,
    /// Which adjacency entries make a neighbor: causes or symmetric
    #[arg(long)]
    pub neighbor_mode: Option<NeighborMode>,
    /// Output head: linear or gnn
    #[arg(long)]
    pub readout: Option<Readout>,
}

#[derive(Args, Debug, Default)]
pub struct FitOptions {
    /// Steps ahead of the last window value to predict
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Passes over the training windows
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Adam learning rate
    #[arg(long)]
    pub lr: Option<f64>,
    /// Validation metric used to keep the best epoch: mae or rae
    #[arg(long)]
    pub selection: Option<SelectionMetric>,
}

#[derive(Args, Debug, Default)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub te: TeOptions,
    #[command(flatten)]
    pub model: ModelOptions,
    #[command(flatten)]
    pub fit: FitOptions,
    /// Seeds weight initialization and batch shuffling
    #[arg(long)]
    pub seed: Option<u64>,
    /// Precomputed causality CSV from `te`, used instead of re-estimating
    #[arg(long, value_name = "FILE")]
    pub te_matrix: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct EvalArgs {
    /// Checkpoint directory written by `train`
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Delimited text file, one row per time step
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub delimiter: Option<char>,
    /// train, valid or test
    #[arg(long)]
    pub split: Option<Split>,
    /// Also append the CSV row to this file
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct ForecastArgs {
    /// Checkpoint directory written by `train`
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Delimited text file, one row per time step
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub delimiter: Option<char>,
    /// Time index of the last window value; defaults to the last row
    #[arg(long)]
    pub at: Option<usize>,
}

#[derive(Args, Debug, Default)]
pub struct AblateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub te: TeOptions,
    #[command(flatten)]
    pub model: ModelOptions,
    #[command(flatten)]
    pub fit: FitOptions,
    /// Seeds shared by every variant
    #[arg(long)]
    pub seeds: Option<List<u64>>,
    /// Variants to run: caugnn, caugin, ncau, ncnn (alias rf), 1cnn
    #[arg(long)]
    pub variants: Option<List<Ablation>>,
    /// Kernel size used by the 1cnn variant
    #[arg(long)]
    pub single_kernel: Option<usize>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// One arm of the ablation suite.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ablation {
    CauGnn,
    CauGin,
    NoCausality,
    NoCnn,
    SingleKernel,
}

impl Ablation {
    pub const ALL: [Ablation; 5] = [
        Ablation::CauGnn,
        Ablation::CauGin,
        Ablation::NoCausality,
        Ablation::NoCnn,
        Ablation::SingleKernel,
    ];

    /// Applies this arm to the base configuration.
    pub fn configure(self, base: &ModelConfig, single_kernel: usize) -> ModelConfig {
        let mut c = base.clone();
        match self {
            Ablation::CauGnn => c.variant = GnnVariant::KGnn,
            Ablation::CauGin => c.variant = GnnVariant::Gin,
            Ablation::NoCausality => c.use_causality = false,
            Ablation::NoCnn => c.use_cnn = false,
            Ablation::SingleKernel => c.kernel_sizes = vec![single_kernel],
        }
        c
    }
}

impl Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ablation::CauGnn => "caugnn",
            Ablation::CauGin => "caugin",
            Ablation::NoCausality => "ncau",
            Ablation::NoCnn => "ncnn",
            Ablation::SingleKernel => "1cnn",
        })
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "caugnn" => Ok(Ablation::CauGnn),
            "caugin" => Ok(Ablation::CauGin),
            "ncau" => Ok(Ablation::NoCausality),
            "ncnn" | "rf" => Ok(Ablation::NoCnn),
            "1cnn" => Ok(Ablation::SingleKernel),
            other => Err(Error::Config(format!("unknown ablation variant `{other}`"))),
        }
    }
}

/// Every key a config file may contain.
const KNOWN_KEYS: &[&str] = &[
    "dataset", "delimiter", "split-ratios", "bins", "k", "l", "threshold", "out", "variant",
    "no-causality", "no-cnn", "kernels", "channels", "hidden", "window", "neighbor-mode",
    "readout", "horizon", "epochs", "batch-size", "lr", "selection", "seed", "te-matrix",
    "checkpoint", "split", "csv", "at", "seeds", "variants", "single-kernel",
];

/// Parsed `key=value` config file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("config line {}: expected key=value, got `{line}`", i + 1)))?;
            let key = k.trim().replace('_', "-");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!("config line {}: unknown key `{}`", i + 1, k.trim())));
            }
            if values.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("config line {}: duplicate key `{key}`", i + 1)));
            }
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

/// Applies flag > config > default and records every resolved value.
struct Resolver<'a> {
    config: &'a ConfigFile,
    resolved: BTreeMap<String, String>,
}

impl<'a> Resolver<'a> {
    fn new(config: &'a ConfigFile) -> Self {
        Self {
            config,
            resolved: BTreeMap::new(),
        }
    }

    fn config_value<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.config
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::Config(format!("bad value `{v}` for config key `{key}`")))
            })
            .transpose()
    }

    fn opt<T: FromStr + Display + Clone>(&mut self, key: &str, flag: &Option<T>) -> Result<Option<T>> {
        let v = match flag {
            Some(v) => Some(v.clone()),
            None => self.config_value(key)?,
        };
        if let Some(v) = &v {
            self.resolved.insert(key.to_string(), v.to_string());
        }
        Ok(v)
    }

    fn get<T: FromStr + Display + Clone>(&mut self, key: &str, flag: &Option<T>, default: T) -> Result<T> {
        let v = self.opt(key, flag)?.unwrap_or(default);
        self.resolved.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    fn path(&mut self, key: &str, flag: &Option<PathBuf>) -> Result<Option<PathBuf>> {
        let s = flag.as_ref().map(|p| p.display().to_string());
        Ok(self.opt::<String>(key, &s)?.map(PathBuf::from))
    }

    fn required_path(&mut self, key: &str, flag: &Option<PathBuf>) -> Result<PathBuf> {
        self.path(key, flag)?
            .ok_or_else(|| Error::Config(format!("missing `{key}` (flag or config key)")))
    }

    fn out_dir(&mut self, flag: &Option<PathBuf>) -> Result<PathBuf> {
        match self.path("out", flag)? {
            Some(p) => Ok(p),
            None => {
                let p = std::env::var_os(OUT_DIR_ENV)
                    .map(PathBuf::from)
                    .unwrap_or_else(|| PathBuf::from("runs"));
                self.resolved.insert("out".into(), p.display().to_string());
                Ok(p)
            }
        }
    }
}

/// Record of one command invocation: what ran, on which inputs, with which
/// resolved settings, and the hashes of everything it wrote.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<PathBuf>,
    pub dataset_path: Option<PathBuf>,
    pub dataset_sha256: Option<String>,
    pub params: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    /// `(path relative to out_dir, sha256)`.
    pub artifacts: Vec<(String, String)>,
}

impl RunManifest {
    /// Metadata as `#` comments, then the resolved parameters as config lines.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# caugnn run manifest\n");
        s.push_str(&format!("# command={}\n", self.command));
        if let Some(p) = &self.config_path {
            s.push_str(&format!("# config={}\n", p.display()));
        }
        if let Some(p) = &self.dataset_path {
            s.push_str(&format!("# dataset_path={}\n", p.display()));
        }
        if let Some(h) = &self.dataset_sha256 {
            s.push_str(&format!("# dataset_sha256={h}\n"));
        }
        if let Some(seed) = self.seed {
            s.push_str(&format!("# seed={seed}\n"));
        }
        s.push_str(&format!("# out_dir={}\n", self.out_dir.display()));
        for (path, hash) in &self.artifacts {
            s.push_str(&format!("# artifact {path} sha256={hash}\n"));
        }
        for (k, v) in &self.params {
            s.push_str(&format!("{k}={v}\n"));
        }
        s
    }

    /// Hashes `files` (relative to the output directory) and writes the manifest there.
    pub fn finish(mut self, files: &[&str]) -> Result<PathBuf> {
        for f in files {
            let bytes = std::fs::read(self.out_dir.join(f))?;
            self.artifacts.push((f.to_string(), sha256_hex(&bytes)));
        }
        let path = self.out_dir.join(RUN_MANIFEST_FILE);
        std::fs::write(&path, self.to_text())?;
        Ok(path)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct LoadedData {
    dataset: TimeSeriesDataset,
    sha256: String,
}

fn load_dataset(path: &Path, delimiter: char) -> Result<LoadedData> {
    let bytes = std::fs::read(path).map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    let text = String::from_utf8(bytes)
        .map_err(|_| Error::Data(format!("{} is not UTF-8 text", path.display())))?;
    let dataset = TimeSeriesDataset::parse_delimited(&text, delimiter)?;
    if dataset.rejected_rows() > 0 {
        warn!("dropped {} rows with non-finite values", dataset.rejected_rows());
    }
    Ok(LoadedData {
        sha256: sha256_hex(text.as_bytes()),
        dataset,
    })
}

struct DataSettings {
    path: PathBuf,
    delimiter: char,
    ratios: [f64; 3],
}

fn resolve_data(r: &mut Resolver, a: &DataArgs) -> Result<DataSettings> {
    let path = r.required_path("dataset", &a.dataset)?;
    let delimiter = r.get("delimiter", &a.delimiter, ',')?;
    let ratios = r.get("split-ratios", &a.split_ratios, List(vec![0.6, 0.2, 0.2]))?;
    let ratios: [f64; 3] = ratios
        .0
        .try_into()
        .map_err(|v: Vec<f64>| Error::Config(format!("split-ratios needs 3 values, got {}", v.len())))?;
    Ok(DataSettings {
        path,
        delimiter,
        ratios,
    })
}

fn resolve_te(r: &mut Resolver, a: &TeOptions) -> Result<CausalityConfig> {
    let d = CausalityConfig::default();
    let cfg = CausalityConfig {
        bins: r.get("bins", &a.bins, d.bins)?,
        k: r.get("k", &a.k, d.k)?,
        l: r.get("l", &a.l, d.l)?,
        threshold: r.get("threshold", &a.threshold, d.threshold)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn resolve_model(r: &mut Resolver, a: &ModelOptions) -> Result<ModelConfig> {
    let d = ModelConfig::default();
    let no_cnn = r.get("no-cnn", &a.no_cnn, false)?;
    let kernels = if no_cnn {
        if r.opt("kernels", &a.kernels)?.is_some() {
            warn!("--kernels has no effect with --no-cnn");
        }
        d.kernel_sizes.clone()
    } else {
        r.get("kernels", &a.kernels, List(d.kernel_sizes.clone()))?.0
    };
    let cfg = ModelConfig {
        kernel_sizes: kernels,
        channels_per_kernel: r.get("channels", &a.channels, d.channels_per_kernel)?,
        gnn_hidden: r.get("hidden", &a.hidden, List(d.gnn_hidden.clone()))?.0,
        window: r.get("window", &a.window, d.window)?,
        variant: r.get("variant", &a.variant, d.variant)?,
        use_causality: !r.get("no-causality", &a.no_causality, false)?,
        use_cnn: !no_cnn,
        neighbor_mode: r.get("neighbor-mode", &a.neighbor_mode, d.neighbor_mode)?,
        readout: r.get("readout", &a.readout, d.readout)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn resolve_fit(r: &mut Resolver, a: &FitOptions, seed: u64) -> Result<TrainConfig> {
    let d = TrainConfig::default();
    let cfg = TrainConfig {
        epochs: r.get("epochs", &a.epochs, d.epochs)?,
        batch_size: r.get("batch-size", &a.batch_size, d.batch_size)?,
        learning_rate: r.get("lr", &a.lr, d.learning_rate)?,
        horizon: r.get("horizon", &a.horizon, d.horizon)?,
        seed,
        selection: r.get("selection", &a.selection, d.selection)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Fails when `window` and `horizon` leave any split without samples.
pub fn check_splits(ds: &TimeSeriesDataset, window: usize, horizon: usize) -> Result<()> {
    for split in [Split::Train, Split::Valid, Split::Test] {
        let len = ds.split_range(split)?.len();
        if TimeSeriesDataset::window_count(len, window, horizon) == 0 {
            return Err(Error::Config(format!(
                "window {window} + horizon {horizon} leaves the {split} split ({len} rows) without samples; \
                 it needs at least {} rows",
                window + horizon
            )));
        }
    }
    Ok(())
}

/// Prefix written before the causality CSV by `te`.
const TE_META_PREFIX: &str = "# te.";

fn te_csv(m: &CausalityMatrix, cfg: &CausalityConfig, dataset_sha256: &str, fit_rows: usize) -> String {
    format!(
        "{p}dataset_sha256={dataset_sha256}\n{p}fit_rows={fit_rows}\n{p}bins={}\n{p}k={}\n{p}l={}\n{}",
        cfg.bins,
        cfg.k,
        cfg.l,
        m.to_csv(),
        p = TE_META_PREFIX
    )
}

fn te_meta(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .filter_map(|l| l.trim().strip_prefix(TE_META_PREFIX))
        .filter_map(|kv| kv.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

/// Loads a precomputed causality matrix, refusing one estimated on other data.
fn load_te_matrix(
    path: &Path,
    ds: &TimeSeriesDataset,
    dataset_sha256: &str,
    requested: &CausalityConfig,
) -> Result<(CausalityMatrix, CausalityConfig)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("cannot read TE matrix {}: {e}", path.display())))?;
    let meta = te_meta(&text);
    match meta.get("dataset_sha256") {
        Some(h) if h != dataset_sha256 => {
            return Err(Error::Data(format!(
                "TE matrix {} was computed on a different dataset (sha256 {h}, current {dataset_sha256})",
                path.display()
            )))
        }
        Some(_) => {}
        None => warn!("TE matrix {} records no dataset hash; cannot check for drift", path.display()),
    }
    let fit_rows = ds.split().map(|b| b.valid_end);
    if let (Some(rec), Some(cur)) = (meta.get("fit_rows"), fit_rows) {
        if rec.parse::<usize>().ok() != Some(cur) {
            return Err(Error::Data(format!(
                "TE matrix was estimated on {rec} rows but the current split uses {cur}"
            )));
        }
    }
    let matrix = CausalityMatrix::from_csv(&text)?;
    if matrix.names() != ds.names() {
        return Err(Error::SchemaMismatch {
            expected: ds.names().to_vec(),
            found: matrix.names().to_vec(),
        });
    }
    let read = |key: &str, fallback: usize| meta.get(key).and_then(|v| v.parse().ok()).unwrap_or(fallback);
    let cfg = CausalityConfig {
        bins: read("bins", requested.bins),
        k: read("k", requested.k),
        l: read("l", requested.l),
        threshold: requested.threshold,
    };
    let matrix = if matrix.threshold() == requested.threshold {
        matrix
    } else {
        matrix.with_threshold(requested.threshold)?
    };
    Ok((matrix, cfg))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::Data(format!("cannot create output directory {}: {e}", dir.display())))
}

/// Parses process arguments and runs the command, printing to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let config = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let ctx = Context {
        config: &config,
        config_path: cli.config.clone(),
    };
    match &cli.command {
        Command::Te(a) => cmd_te(&ctx, a, out),
        Command::Train(a) => cmd_train(&ctx, a, out).map(|_| ()),
        Command::Eval(a) => cmd_eval(&ctx, a, out).map(|_| ()),
        Command::Forecast(a) => cmd_forecast(&ctx, a, out).map(|_| ()),
        Command::Ablate(a) => cmd_ablate(&ctx, a, out).map(|_| ()),
    }
}

struct Context<'a> {
    config: &'a ConfigFile,
    config_path: Option<PathBuf>,
}

fn io(e: std::io::Error) -> Error {
    Error::Io(e)
}

fn cmd_te(ctx: &Context, a: &TeArgs, out: &mut dyn Write) -> Result<()> {
    let mut r = Resolver::new(ctx.config);
    let data = resolve_data(&mut r, &a.data)?;
    let te_cfg = resolve_te(&mut r, &a.te)?;
    let out_dir = r.out_dir(&a.out)?;
    let loaded = load_dataset(&data.path, data.delimiter)?;
    let ds = loaded.dataset.fit_scaling_and_split(data.ratios)?;
    let fit_rows = ds.split().map_or(0, |b| b.valid_end);
    info!("estimating transfer entropy on {fit_rows} rows of {} variables", ds.n_vars());
    let matrix = build_causality_matrix(&ds, &te_cfg)?;

    create_dir(&out_dir)?;
    std::fs::write(out_dir.join("causality.csv"), te_csv(&matrix, &te_cfg, &loaded.sha256, fit_rows))?;
    let manifest = RunManifest {
        command: "te".into(),
        config_path: ctx.config_path.clone(),
        dataset_path: Some(data.path),
        dataset_sha256: Some(loaded.sha256),
        params: r.resolved,
        seed: None,
        out_dir: out_dir.clone(),
        artifacts: Vec::new(),
    };
    manifest.finish(&["causality.csv"])?;

    writeln!(out, "edges: {}", matrix.edge_count()).map_err(io)?;
    writeln!(out, "density: {:.6}", matrix.density()).map_err(io)?;
    for (i, j) in matrix.edges() {
        writeln!(
            out,
            "  {} -> {}  net TE {:.6}",
            matrix.names()[i],
            matrix.names()[j],
            matrix.net_te(i, j)
        )
        .map_err(io)?;
    }
    writeln!(out, "wrote {}", out_dir.join("causality.csv").display()).map_err(io)?;
    Ok(())
}

/// What `train` produced.
#[derive(Debug)]
pub struct TrainRun {
    pub out_dir: PathBuf,
    pub checkpoint_dir: PathBuf,
    pub best_epoch: usize,
    pub best_valid: train::Metrics,
}

fn cmd_train(ctx: &Context, a: &TrainArgs, out: &mut dyn Write) -> Result<TrainRun> {
    let mut r = Resolver::new(ctx.config);
    let data = resolve_data(&mut r, &a.data)?;
    let te_requested = resolve_te(&mut r, &a.te)?;
    let model_cfg = resolve_model(&mut r, &a.model)?;
    let seed = r.get("seed", &a.seed, 0u64)?;
    let fit = resolve_fit(&mut r, &a.fit, seed)?;
    let te_matrix = r.path("te-matrix", &a.te_matrix)?;
    let out_dir = r.out_dir(&a.out)?;

    let loaded = load_dataset(&data.path, data.delimiter)?;
    let ds = loaded.dataset.fit_scaling_and_split(data.ratios)?;
    check_splits(&ds, model_cfg.window, fit.horizon)?;

    let (causality, te_cfg) = match &te_matrix {
        Some(p) => load_te_matrix(p, &ds, &loaded.sha256, &te_requested)?,
        None => (build_causality_matrix(&ds, &te_requested)?, te_requested),
    };
    info!(
        "causality graph: {} edges over {} variables",
        causality.edge_count(),
        causality.n()
    );

    let model = CauGnnModel::new(model_cfg, seed)?;
    let outcome = train::train(model, &ds, &causality, &fit)?;
    let best = outcome.history[outcome.best_epoch - 1];

    create_dir(&out_dir)?;
    let checkpoint = Checkpoint {
        meta: CheckpointMeta {
            variable_names: ds.names().to_vec(),
            scale: ds.scale().to_vec(),
            split: ds.split().expect("dataset was split"),
            horizon: fit.horizon,
            seed,
            causality: te_cfg,
            dataset_sha256: Some(loaded.sha256.clone()),
        },
        model: outcome.model,
        causality,
    };
    let checkpoint_dir = out_dir.join("checkpoint");
    checkpoint.save(&checkpoint_dir)?;
    std::fs::write(out_dir.join("history.csv"), history_csv(&outcome.history))?;
    let manifest = RunManifest {
        command: "train".into(),
        config_path: ctx.config_path.clone(),
        dataset_path: Some(data.path),
        dataset_sha256: Some(loaded.sha256),
        params: r.resolved,
        seed: Some(seed),
        out_dir: out_dir.clone(),
        artifacts: Vec::new(),
    };
    manifest.finish(&[
        "checkpoint/manifest.txt",
        "checkpoint/params.bin",
        "checkpoint/causality.csv",
        "history.csv",
    ])?;

    writeln!(
        out,
        "{}: best epoch {} of {}; valid MAE {:.6} RAE {:.6} CORR {}",
        checkpoint.model.config().label(),
        outcome.best_epoch,
        fit.epochs,
        best.valid.mae,
        best.valid.rae,
        best.valid.corr.map_or("NA".into(), |c| format!("{c:.6}"))
    )
    .map_err(io)?;
    writeln!(out, "wrote {}", checkpoint_dir.display()).map_err(io)?;
    Ok(TrainRun {
        out_dir,
        checkpoint_dir,
        best_epoch: outcome.best_epoch,
        best_valid: best.valid,
    })
}

/// Loads a checkpoint and a dataset, refusing a schema mismatch, and applies
/// the checkpoint's scaling and split to the data.
fn checkpoint_and_data(
    r: &mut Resolver,
    checkpoint: &Option<PathBuf>,
    dataset: &Option<PathBuf>,
    delimiter: &Option<char>,
) -> Result<(Checkpoint, TimeSeriesDataset, String)> {
    let ck_path = r.required_path("checkpoint", checkpoint)?;
    let data_path = r.required_path("dataset", dataset)?;
    let delimiter = r.get("delimiter", delimiter, ',')?;
    let ck = Checkpoint::load(&ck_path)?;
    let loaded = load_dataset(&data_path, delimiter)?;
    if loaded.dataset.names() != ck.meta.variable_names.as_slice() {
        return Err(Error::SchemaMismatch {
            expected: ck.meta.variable_names.clone(),
            found: loaded.dataset.names().to_vec(),
        });
    }
    if ck.meta.dataset_sha256.as_deref().is_some_and(|h| h != loaded.sha256) {
        warn!("dataset differs from the one the checkpoint was trained on");
    }
    let ds = loaded
        .dataset
        .with_metadata(ck.meta.scale.clone(), ck.meta.split)?;
    let id = data_path
        .file_stem()
        .map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned());
    Ok((ck, ds, id))
}

fn cmd_eval(ctx: &Context, a: &EvalArgs, out: &mut dyn Write) -> Result<EvalReport> {
    let mut r = Resolver::new(ctx.config);
    let split = r.get("split", &a.split, Split::Test)?;
    let csv = r.path("csv", &a.csv)?;
    let (ck, ds, id) = checkpoint_and_data(&mut r, &a.checkpoint, &a.dataset, &a.delimiter)?;
    let report = train::evaluate(&ck.model, &ds, &ck.causality, split, ck.meta.horizon, &id)?;
    writeln!(out, "{report}").map_err(io)?;
    writeln!(out, "{}", EvalReport::CSV_HEADER).map_err(io)?;
    writeln!(out, "{}", report.csv_row()).map_err(io)?;
    if let Some(path) = csv {
        let fresh = !path.exists();
        let mut f = std::fs::OpenOptions::new().create(true).append(true).open(&path)?;
        if fresh {
            writeln!(f, "{}", EvalReport::CSV_HEADER)?;
        }
        writeln!(f, "{}", report.csv_row())?;
    }
    Ok(report)
}

fn cmd_forecast(ctx: &Context, a: &ForecastArgs, out: &mut dyn Write) -> Result<Vec<(String, f64)>> {
    let mut r = Resolver::new(ctx.config);
    let at = r.opt("at", &a.at)?;
    let (ck, ds, _) = checkpoint_and_data(&mut r, &a.checkpoint, &a.dataset, &a.delimiter)?;
    let t = at.unwrap_or(ds.steps() - 1);
    let window = ck.model.config().window;
    let x = ds.window_at(t, window).map_err(|e| match e {
        Error::Data(msg) => Error::Data(format!(
            "cannot forecast at t={t}: the minimum index is {} ({msg})",
            window - 1
        )),
        other => other,
    })?;
    let scaled = ck.model.predict(&x, ck.causality.adjacency_table())?;
    let preds: Vec<(String, f64)> = ds
        .names()
        .iter()
        .zip(scaled)
        .enumerate()
        .map(|(i, (name, v))| (name.clone(), ds.unscale_value(i, v)))
        .collect();
    writeln!(out, "forecast for t+{} = {}", ck.meta.horizon, t + ck.meta.horizon).map_err(io)?;
    for (name, v) in &preds {
        writeln!(out, "{name}\t{v}").map_err(io)?;
    }
    Ok(preds)
}

/// Median of a non-empty sample (mean of the middle pair for even sizes).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// Per-arm summary produced by `ablate`.
#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub arm: Ablation,
    pub label: String,
    pub mae: Vec<f64>,
    pub rae: Vec<f64>,
    pub corr: Vec<Option<f64>>,
}

impl AblationRow {
    pub fn median_mae(&self) -> f64 {
        median(&self.mae)
    }

    pub fn median_rae(&self) -> f64 {
        median(&self.rae)
    }

    pub fn median_corr(&self) -> Option<f64> {
        let c: Vec<f64> = self.corr.iter().flatten().copied().collect();
        (!c.is_empty()).then(|| median(&c))
    }
}

/// Trains every arm under every seed on the same data and causality graph.
#[allow(clippy::too_many_arguments)]
pub fn run_ablation(
    ds: &TimeSeriesDataset,
    causality: &CausalityMatrix,
    base: &ModelConfig,
    fit: &TrainConfig,
    arms: &[Ablation],
    seeds: &[u64],
    single_kernel: usize,
    dataset_id: &str,
) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::with_capacity(arms.len());
    for &arm in arms {
        let cfg = arm.configure(base, single_kernel);
        cfg.validate()?;
        let mut row = AblationRow {
            arm,
            label: cfg.label(),
            mae: Vec::new(),
            rae: Vec::new(),
            corr: Vec::new(),
        };
        for &seed in seeds {
            let model = CauGnnModel::new(cfg.clone(), seed)?;
            let fit = TrainConfig { seed, ..fit.clone() };
            let outcome = train::train(model, ds, causality, &fit)?;
            let report = train::evaluate(&outcome.model, ds, causality, Split::Test, fit.horizon, dataset_id)?;
            info!("{} seed {seed}: test MAE {:.6}", row.label, report.metrics.mae);
            row.mae.push(report.metrics.mae);
            row.rae.push(report.metrics.rae);
            row.corr.push(report.metrics.corr);
        }
        rows.push(row);
    }
    Ok(rows)
}

fn cmd_ablate(ctx: &Context, a: &AblateArgs, out: &mut dyn Write) -> Result<Vec<AblationRow>> {
    let mut r = Resolver::new(ctx.config);
    let data = resolve_data(&mut r, &a.data)?;
    let te_cfg = resolve_te(&mut r, &a.te)?;
    let base = resolve_model(&mut r, &a.model)?;
    let fit = resolve_fit(&mut r, &a.fit, 0)?;
    let seeds = r.get("seeds", &a.seeds, List(vec![1, 2, 3]))?.0;
    let arms = r.get("variants", &a.variants, List(Ablation::ALL.to_vec()))?.0;
    let mid = base.kernel_sizes[base.kernel_sizes.len() / 2];
    let single_kernel = r.get("single-kernel", &a.single_kernel, mid)?;
    let out_dir = r.out_dir(&a.out)?;
    if seeds.is_empty() || arms.is_empty() {
        return Err(Error::Config("ablate needs at least one seed and one variant".into()));
    }

    let loaded = load_dataset(&data.path, data.delimiter)?;
    let ds = loaded.dataset.fit_scaling_and_split(data.ratios)?;
    check_splits(&ds, base.window, fit.horizon)?;
    for &arm in &arms {
        arm.configure(&base, single_kernel).validate()?;
    }
    let causality = build_causality_matrix(&ds, &te_cfg)?;
    let id = data
        .path
        .file_stem()
        .map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned());
    let rows = run_ablation(&ds, &causality, &base, &fit, &arms, &seeds, single_kernel, &id)?;

    create_dir(&out_dir)?;
    let mut runs = String::from("variant,seed,MAE,RAE,CORR\n");
    let mut summary = String::from("variant,median_MAE,median_RAE,median_CORR\n");
    for row in &rows {
        for (i, seed) in seeds.iter().enumerate() {
            runs.push_str(&format!(
                "{},{seed},{},{},{}\n",
                row.label,
                row.mae[i],
                row.rae[i],
                row.corr[i].map_or("NA".into(), |c| c.to_string())
            ));
        }
        summary.push_str(&format!(
            "{},{},{},{}\n",
            row.label,
            row.median_mae(),
            row.median_rae(),
            row.median_corr().map_or("NA".into(), |c| c.to_string())
        ));
    }
    std::fs::write(out_dir.join("ablation_runs.csv"), runs)?;
    std::fs::write(out_dir.join("ablation.csv"), &summary)?;
    let manifest = RunManifest {
        command: "ablate".into(),
        config_path: ctx.config_path.clone(),
        dataset_path: Some(data.path),
        dataset_sha256: Some(loaded.sha256),
        params: r.resolved,
        seed: None,
        out_dir: out_dir.clone(),
        artifacts: Vec::new(),
    };
    manifest.finish(&["ablation_runs.csv", "ablation.csv"])?;

    writeln!(
        out,
        "{:<18} {:>12} {:>12} {:>12}   (median over {} seeds, {} h={})",
        "variant",
        "MAE",
        "RAE",
        "CORR",
        seeds.len(),
        id,
        fit.horizon
    )
    .map_err(io)?;
    for row in &rows {
        writeln!(
            out,
            "{:<18} {:>12.6} {:>12.6} {:>12}",
            row.label,
            row.median_mae(),
            row.median_rae(),
            row.median_corr().map_or("NA".into(), |c| format!("{c:.6}"))
        )
        .map_err(io)?;
    }
    Ok(rows)
}
