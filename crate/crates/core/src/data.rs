//! Multivariate series ingestion, chronological splitting, scaling and
//! horizon-`h` window emission.

use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use log::warn;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "valid" | "validation" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split `{other}`"))),
        }
    }
}

/// `train = [0, train_end)`, `valid = [train_end, valid_end)`, `test = [valid_end, T)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitBounds {
    pub train_end: usize,
    pub valid_end: usize,
}

/// `T x n` matrix of observations, one column per variable.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeriesDataset {
    values: Vec<f64>,
    steps: usize,
    names: Vec<String>,
    scale: Vec<f64>,
    split: Option<SplitBounds>,
    rejected_rows: usize,
}

/// One forecasting example: the scaled `n x W` input window ending at `t`
/// (row `i` is variable `i`, oldest value first) and the raw-unit values at
/// `target_index = t + h`.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowSample {
    pub t: usize,
    pub target_index: usize,
    pub window: Vec<f64>,
    pub target: Vec<f64>,
}

impl TimeSeriesDataset {
    /// Builds a dataset from time-ordered rows. Rows holding NaN or infinite
    /// values are dropped and counted.
    pub fn from_rows(names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = names.len();
        if n < 2 {
            return Err(Error::Data(format!("need at least 2 variables, got {n}")));
        }
        let mut values = Vec::with_capacity(rows.len() * n);
        let mut rejected = 0;
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Parse {
                    row: r + 1,
                    msg: format!("expected {} values, found {}", n, row.len()),
                });
            }
            if row.iter().all(|v| v.is_finite()) {
                values.extend_from_slice(row);
            } else {
                rejected += 1;
            }
        }
        if rejected > 0 {
            warn!("rejected {rejected} rows containing NaN or infinite values");
        }
        let steps = values.len() / n;
        if steps == 0 {
            return Err(Error::Data("no usable rows".into()));
        }
        Ok(Self {
            values,
            steps,
            names,
            scale: vec![1.0; n],
            split: None,
            rejected_rows: rejected,
        })
    }

    pub fn from_columns(names: Vec<String>, columns: &[Vec<f64>]) -> Result<Self> {
        if columns.len() != names.len() {
            return Err(Error::LengthMismatch {
                what: "names vs columns",
                left: names.len(),
                right: columns.len(),
            });
        }
        let steps = columns.first().map_or(0, Vec::len);
        if let Some(bad) = columns.iter().find(|c| c.len() != steps) {
            return Err(Error::LengthMismatch {
                what: "column lengths",
                left: steps,
                right: bad.len(),
            });
        }
        let rows = (0..steps).map(|t| columns.iter().map(|c| c[t]).collect()).collect();
        Self::from_rows(names, rows)
    }

    pub fn load_csv(path: impl AsRef<Path>, delimiter: char) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::parse_delimited(&text, delimiter)
    }

    /// Parses delimited text, one row per time step. The first line is taken
    /// as a header when any of its cells is non-numeric; otherwise variables
    /// are named `v0..v{n-1}`.
    pub fn parse_delimited(text: &str, delimiter: char) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let Some((first_no, first)) = lines.next() else {
            return Err(Error::Data("empty input".into()));
        };
        let cells: Vec<&str> = first.split(delimiter).map(str::trim).collect();
        let numeric: Option<Vec<f64>> = cells.iter().map(|c| c.parse::<f64>().ok()).collect();
        let mut rows = Vec::new();
        let names = match numeric {
            Some(row) => {
                let names = (0..row.len()).map(|i| format!("v{i}")).collect();
                rows.push(row);
                names
            }
            None => cells.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
        };
        let width = names.len();
        if width < 2 {
            return Err(Error::Data(format!(
                "line {first_no}: need at least 2 columns, found {width}"
            )));
        }
        for (line_no, line) in lines {
            let mut row = Vec::with_capacity(width);
            for cell in line.split(delimiter).map(str::trim) {
                let v = cell.parse::<f64>().map_err(|_| Error::Parse {
                    row: line_no,
                    msg: format!("non-numeric cell `{cell}`"),
                })?;
                row.push(v);
            }
            if row.len() != width {
                return Err(Error::Parse {
                    row: line_no,
                    msg: format!("expected {} columns, found {}", width, row.len()),
                });
            }
            rows.push(row);
        }
        Self::from_rows(names, rows)
    }

    /// Writes the values as comma-separated text with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = self.names.join(",");
        out.push('\n');
        for t in 0..self.steps {
            let row: Vec<String> = self.row(t).iter().map(|v| v.to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn n_vars(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn rejected_rows(&self) -> usize {
        self.rejected_rows
    }

    pub fn value(&self, t: usize, var: usize) -> f64 {
        self.values[t * self.n_vars() + var]
    }

    pub fn set_value(&mut self, t: usize, var: usize, v: f64) {
        let n = self.n_vars();
        self.values[t * n + var] = v;
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let n = self.n_vars();
        &self.values[t * n..(t + 1) * n]
    }

    pub fn column(&self, var: usize) -> Vec<f64> {
        (0..self.steps).map(|t| self.value(t, var)).collect()
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn split(&self) -> Option<SplitBounds> {
        self.split
    }

    pub fn split_range(&self, split: Split) -> Result<Range<usize>> {
        let b = self
            .split
            .ok_or_else(|| Error::Data("dataset has not been split".into()))?;
        Ok(match split {
            Split::Train => 0..b.train_end,
            Split::Valid => b.train_end..b.valid_end,
            Split::Test => b.valid_end..self.steps,
        })
    }

    /// Chronological split by `ratios` (train, valid, test) and per-variable
    /// max-abs scaling fit on the train rows.
    pub fn fit_scaling_and_split(self, ratios: [f64; 3]) -> Result<Self> {
        let sum: f64 = ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || ratios.iter().any(|r| r.is_nan() || *r <= 0.0) {
            return Err(Error::Config(format!(
                "split ratios must be positive and sum to 1, got {ratios:?}"
            )));
        }
        if self.steps < 10 {
            return Err(Error::Data(format!(
                "need at least 10 time steps to split, got {}",
                self.steps
            )));
        }
        let t = self.steps as f64;
        let train_end = (t * ratios[0] + 1e-9).floor() as usize;
        let valid_end = (t * (ratios[0] + ratios[1]) + 1e-9).floor() as usize;
        let bounds = SplitBounds {
            train_end,
            valid_end,
        };
        let scale = (0..self.n_vars())
            .map(|i| {
                let m = (0..train_end).map(|r| self.value(r, i).abs()).fold(0.0, f64::max);
                if m > 0.0 {
                    m
                } else {
                    warn!("variable `{}` is all zero on the train split; using scale 1", self.names[i]);
                    1.0
                }
            })
            .collect();
        self.with_metadata(scale, bounds)
    }

    /// Restores previously fitted scaling and split metadata.
    pub fn with_metadata(mut self, scale: Vec<f64>, bounds: SplitBounds) -> Result<Self> {
        if scale.len() != self.n_vars() {
            return Err(Error::LengthMismatch {
                what: "scale vector",
                left: self.n_vars(),
                right: scale.len(),
            });
        }
        if scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Data(format!("scales must be positive and finite: {scale:?}")));
        }
        if !(0 < bounds.train_end && bounds.train_end < bounds.valid_end && bounds.valid_end < self.steps) {
            return Err(Error::Data(format!(
                "invalid split bounds {:?} for {} steps",
                bounds, self.steps
            )));
        }
        self.scale = scale;
        self.split = Some(bounds);
        Ok(self)
    }

    pub fn scale_value(&self, var: usize, raw: f64) -> f64 {
        raw / self.scale[var]
    }

    pub fn unscale_value(&self, var: usize, scaled: f64) -> f64 {
        scaled * self.scale[var]
    }

    /// Scaled `n x W` window whose last column is time `t`.
    pub fn window_at(&self, t: usize, window: usize) -> Result<Vec<f64>> {
        if window == 0 || t + 1 < window || t >= self.steps {
            return Err(Error::Data(format!(
                "a window of {} steps ending at t={} needs {} <= t <= {}",
                window,
                t,
                window.saturating_sub(1),
                self.steps.saturating_sub(1)
            )));
        }
        let n = self.n_vars();
        let start = t + 1 - window;
        let mut out = Vec::with_capacity(n * window);
        for i in 0..n {
            out.extend((start..=t).map(|r| self.value(r, i) / self.scale[i]));
        }
        Ok(out)
    }

    pub fn window_count(split_len: usize, window: usize, horizon: usize) -> usize {
        (split_len + 1).saturating_sub(window + horizon)
    }

    /// All samples whose window and target both lie inside `split`.
    pub fn windows(
        &self,
        split: Split,
        window: usize,
        horizon: usize,
    ) -> Result<impl Iterator<Item = WindowSample> + '_> {
        if window == 0 || horizon == 0 {
            return Err(Error::Config(format!(
                "window ({window}) and horizon ({horizon}) must be at least 1"
            )));
        }
        let range = self.split_range(split)?;
        let count = Self::window_count(range.len(), window, horizon);
        let first_t = range.start + window - 1;
        Ok((0..count).map(move |i| {
            let t = first_t + i;
            WindowSample {
                t,
                target_index: t + horizon,
                window: self.window_at(t, window).expect("inside split"),
                target: self.row(t + horizon).to_vec(),
            }
        }))
    }
}
