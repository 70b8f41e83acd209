//! L1 training with Adam, best-on-validation model selection, and
//! MAE / RAE / CORR evaluation in raw units.

use std::fmt;
use std::str::FromStr;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{AdamConfig, AdamState, Tape, Tensor, Var};
use crate::causality::CausalityMatrix;
use crate::data::{Split, TimeSeriesDataset};
use crate::error::{Error, Result};
use crate::model::CauGnnModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectionMetric {
    Mae,
    Rae,
}

impl fmt::Display for SelectionMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionMetric::Mae => "mae",
            SelectionMetric::Rae => "rae",
        })
    }
}

impl FromStr for SelectionMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mae" => Ok(Self::Mae),
            "rae" => Ok(Self::Rae),
            other => Err(Error::Config(format!("unknown selection metric `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub horizon: usize,
    pub seed: u64,
    pub selection: SelectionMetric,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            batch_size: 128,
            learning_rate: 1e-3,
            horizon: 5,
            seed: 0,
            selection: SelectionMetric::Mae,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.horizon == 0 {
            return Err(Error::Config(format!(
                "epochs ({}), batch size ({}) and horizon ({}) must all be >= 1",
                self.epochs, self.batch_size, self.horizon
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Mean absolute difference: `mean_i |pred_i - target_i|`.
pub fn l1_loss(tape: &mut Tape, pred: Var, target: Var) -> Result<Var> {
    if tape.shape(pred) != tape.shape(target) {
        return Err(Error::LengthMismatch {
            what: "l1_loss",
            left: tape.value(pred).len(),
            right: tape.value(target).len(),
        });
    }
    let diff = tape.sub(pred, target)?;
    let abs = tape.abs(diff);
    tape.mean(abs)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub mae: f64,
    pub rae: f64,
    /// Absent when every variable has zero variance.
    pub corr: Option<f64>,
}

impl Metrics {
    /// `pred` and `actual` are row-major `[samples, n_vars]`.
    ///
    /// * MAE: mean `|p - a|` over all cells.
    /// * RAE: `sum |p - a| / sum |mean(a) - a|`, the mean taken over all cells.
    /// * CORR: per-variable Pearson correlation over samples, averaged over
    ///   variables whose predictions and actuals both vary.
    pub fn compute(pred: &[f64], actual: &[f64], n_vars: usize) -> Result<Self> {
        if pred.len() != actual.len() {
            return Err(Error::LengthMismatch {
                what: "metrics",
                left: pred.len(),
                right: actual.len(),
            });
        }
        if pred.is_empty() || n_vars == 0 || !pred.len().is_multiple_of(n_vars) {
            return Err(Error::Data(format!(
                "cannot compute metrics over {} cells with {} variables",
                pred.len(),
                n_vars
            )));
        }
        let cells = pred.len() as f64;
        let abs_err: f64 = pred.iter().zip(actual).map(|(p, a)| (p - a).abs()).sum();
        let mean_a = actual.iter().sum::<f64>() / cells;
        let baseline: f64 = actual.iter().map(|a| (mean_a - a).abs()).sum();
        let rae = if baseline > 0.0 {
            abs_err / baseline
        } else if abs_err == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };

        let samples = pred.len() / n_vars;
        let mut corr_sum = 0.0;
        let mut used = 0usize;
        for i in 0..n_vars {
            let p = (0..samples).map(|s| pred[s * n_vars + i]);
            let a = (0..samples).map(|s| actual[s * n_vars + i]);
            let mp = p.clone().sum::<f64>() / samples as f64;
            let ma = a.clone().sum::<f64>() / samples as f64;
            let (mut spa, mut spp, mut saa) = (0.0, 0.0, 0.0);
            for (pv, av) in p.zip(a) {
                let (dp, da) = (pv - mp, av - ma);
                spa += dp * da;
                spp += dp * dp;
                saa += da * da;
            }
            if spp > 0.0 && saa > 0.0 {
                corr_sum += (spa / (spp * saa).sqrt()).clamp(-1.0, 1.0);
                used += 1;
            }
        }
        Ok(Self {
            mae: abs_err / cells,
            rae,
            corr: (used > 0).then(|| corr_sum / used as f64),
        })
    }

    pub fn get(&self, metric: SelectionMetric) -> f64 {
        match metric {
            SelectionMetric::Mae => self.mae,
            SelectionMetric::Rae => self.rae,
        }
    }
}

fn fmt_corr(c: Option<f64>) -> String {
    c.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub dataset: String,
    pub variant: String,
    pub split: Split,
    pub horizon: usize,
    pub samples: usize,
    pub metrics: Metrics,
    /// Metrics are computed on inverse-scaled (raw unit) values.
    pub raw_scale: bool,
}

impl EvalReport {
    pub const CSV_HEADER: &'static str = "dataset,variant,split,horizon,samples,MAE,RAE,CORR";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.dataset,
            self.variant,
            self.split,
            self.horizon,
            self.samples,
            self.metrics.mae,
            self.metrics.rae,
            fmt_corr(self.metrics.corr)
        )
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} | {} | split={} horizon={} samples={}",
            self.dataset, self.variant, self.split, self.horizon, self.samples
        )?;
        writeln!(f, "  MAE   {:.6}", self.metrics.mae)?;
        writeln!(f, "  RAE   {:.6}", self.metrics.rae)?;
        match self.metrics.corr {
            Some(c) => write!(f, "  CORR  {c:.6}"),
            None => write!(f, "  CORR  NA"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid: Metrics,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation metric.
    pub model: CauGnnModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

pub const HISTORY_CSV_HEADER: &str = "epoch,train_loss,valid_MAE,valid_RAE,valid_CORR";

pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut s = String::from(HISTORY_CSV_HEADER);
    s.push('\n');
    for r in history {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.epoch,
            r.train_loss,
            r.valid.mae,
            r.valid.rae,
            fmt_corr(r.valid.corr)
        ));
    }
    s
}

/// Windows and raw targets of one split, flattened for batching.
struct SampleSet {
    windows: Vec<f64>,
    targets: Vec<f64>,
    count: usize,
    window_len: usize,
}

impl SampleSet {
    fn collect(ds: &TimeSeriesDataset, split: Split, window: usize, horizon: usize) -> Result<Self> {
        let mut windows = Vec::new();
        let mut targets = Vec::new();
        let mut count = 0;
        for s in ds.windows(split, window, horizon)? {
            windows.extend_from_slice(&s.window);
            targets.extend_from_slice(&s.target);
            count += 1;
        }
        Ok(Self {
            windows,
            targets,
            count,
            window_len: ds.n_vars() * window,
        })
    }
}

fn check_schema(model: &CauGnnModel, ds: &TimeSeriesDataset, causality: &CausalityMatrix) -> Result<()> {
    if causality.names() != ds.names() {
        return Err(Error::SchemaMismatch {
            expected: ds.names().to_vec(),
            found: causality.names().to_vec(),
        });
    }
    model.config().validate()
}

fn predict_split(
    model: &CauGnnModel,
    ds: &TimeSeriesDataset,
    set: &SampleSet,
    neighbors: &Tensor,
) -> Result<Vec<f64>> {
    const CHUNK: usize = 256;
    let n = ds.n_vars();
    let mut out = Vec::with_capacity(set.count * n);
    let mut start = 0;
    while start < set.count {
        let end = (start + CHUNK).min(set.count);
        let scaled = model.predict_batch(
            &set.windows[start * set.window_len..end * set.window_len],
            end - start,
            neighbors,
        )?;
        out.extend(
            scaled
                .iter()
                .enumerate()
                .map(|(c, v)| ds.unscale_value(c % n, *v)),
        );
        start = end;
    }
    Ok(out)
}

fn split_metrics(
    model: &CauGnnModel,
    ds: &TimeSeriesDataset,
    set: &SampleSet,
    neighbors: &Tensor,
) -> Result<Metrics> {
    let pred = predict_split(model, ds, set, neighbors)?;
    Metrics::compute(&pred, &set.targets, ds.n_vars())
}

/// Raw-unit predictions for every sample of `split`, row-major `[samples, n]`,
/// together with the matching actual values.
pub fn predictions(
    model: &CauGnnModel,
    ds: &TimeSeriesDataset,
    causality: &CausalityMatrix,
    split: Split,
    horizon: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_schema(model, ds, causality)?;
    let set = SampleSet::collect(ds, split, model.config().window, horizon)?;
    let neighbors = model.neighbors(causality.adjacency_table(), ds.n_vars())?;
    Ok((predict_split(model, ds, &set, &neighbors)?, set.targets))
}

/// Trains `model` and returns the parameters with the best validation score.
pub fn train(
    mut model: CauGnnModel,
    ds: &TimeSeriesDataset,
    causality: &CausalityMatrix,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    check_schema(&model, ds, causality)?;
    let window = model.config().window;
    let n = ds.n_vars();
    let train_set = SampleSet::collect(ds, Split::Train, window, config.horizon)?;
    let valid_set = SampleSet::collect(ds, Split::Valid, window, config.horizon)?;
    for (set, split) in [(&train_set, Split::Train), (&valid_set, Split::Valid)] {
        if set.count == 0 {
            return Err(Error::Data(format!(
                "{split} split yields no samples for window {window} and horizon {}",
                config.horizon
            )));
        }
    }
    let scaled_targets: Vec<f64> = train_set
        .targets
        .iter()
        .enumerate()
        .map(|(c, v)| ds.scale_value(c % n, *v))
        .collect();
    let neighbors = model.neighbors(causality.adjacency_table(), n)?;

    let mut adam = AdamState::new(
        model.params(),
        AdamConfig {
            learning_rate: config.learning_rate,
            ..AdamConfig::default()
        },
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..train_set.count).collect();
    let mut best = model.params().clone();
    let mut best_score = f64::INFINITY;
    let mut best_epoch = 0;
    let mut history = Vec::with_capacity(config.epochs);
    let wl = train_set.window_len;

    let mut batch_windows = Vec::with_capacity(config.batch_size * wl);
    let mut batch_targets = Vec::with_capacity(config.batch_size * n);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            batch_windows.clear();
            batch_targets.clear();
            for &s in chunk {
                batch_windows.extend_from_slice(&train_set.windows[s * wl..(s + 1) * wl]);
                batch_targets.extend_from_slice(&scaled_targets[s * n..(s + 1) * n]);
            }
            model.params_mut().zero_grad();
            let mut tape = Tape::new();
            let pred = model.forward(&mut tape, &batch_windows, chunk.len(), &neighbors)?;
            let target = tape.constant(Tensor::matrix(chunk.len(), n, batch_targets.clone())?);
            let loss = l1_loss(&mut tape, pred, target)?;
            let value = tape.value(loss)[0];
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    epoch,
                    batch: b,
                    value,
                });
            }
            tape.backward_into(loss, model.params_mut())?;
            adam.step(model.params_mut())?;
            if !model.params().all_finite() {
                return Err(Error::NonFinite {
                    epoch,
                    batch: b,
                    value: f64::NAN,
                });
            }
            loss_sum += value * chunk.len() as f64;
        }
        let valid = split_metrics(&model, ds, &valid_set, &neighbors)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / train_set.count as f64,
            valid,
        };
        let score = valid.get(config.selection);
        if score < best_score {
            best_score = score;
            best_epoch = epoch;
            best.copy_values_from(model.params());
        }
        debug!(
            "epoch {epoch}: loss {:.6} valid MAE {:.6} RAE {:.6}",
            record.train_loss, valid.mae, valid.rae
        );
        history.push(record);
    }
    info!("best validation {} {best_score:.6} at epoch {best_epoch}", config.selection);
    model.params_mut().copy_values_from(&best);
    model.params_mut().zero_grad();
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
    })
}

/// Scores `model` on `split`, in raw units.
pub fn evaluate(
    model: &CauGnnModel,
    ds: &TimeSeriesDataset,
    causality: &CausalityMatrix,
    split: Split,
    horizon: usize,
    dataset_id: &str,
) -> Result<EvalReport> {
    check_schema(model, ds, causality)?;
    let set = SampleSet::collect(ds, split, model.config().window, horizon)?;
    if set.count == 0 {
        return Err(Error::Data(format!("{split} split yields no samples")));
    }
    let neighbors = model.neighbors(causality.adjacency_table(), ds.n_vars())?;
    let metrics = split_metrics(model, ds, &set, &neighbors)?;
    Ok(EvalReport {
        dataset: dataset_id.to_string(),
        variant: model.config().label(),
        split,
        horizon,
        samples: set.count,
        metrics,
        raw_scale: true,
    })
}
