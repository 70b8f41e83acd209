use std::fmt::Write as _;
use std::path::Path;

use log::warn;
use rayon::prelude::*;

use super::{net_transfer_entropy, Binning, DiscretizedSeries};
use crate::data::TimeSeriesDataset;
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.005;
pub const DEFAULT_BINS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CausalityConfig {
    pub bins: usize,
    pub k: usize,
    pub l: usize,
    pub threshold: f64,
}

impl Default for CausalityConfig {
    fn default() -> Self {
        Self {
            bins: DEFAULT_BINS,
            k: 1,
            l: 1,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

impl CausalityConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bins < 2 {
            return Err(Error::Config(format!("need at least 2 bins, got {}", self.bins)));
        }
        if self.k == 0 || self.l == 0 {
            return Err(Error::Config("history lengths k and l must be >= 1".into()));
        }
        if self.threshold.is_nan() || self.threshold < 0.0 {
            return Err(Error::Config(format!(
                "threshold must be non-negative, got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// Antisymmetric net transfer entropy between all variable pairs, in bits,
/// plus the directed adjacency obtained by thresholding it.
///
/// `adjacency(i, j) > 0` means variable `i` drives variable `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct CausalityMatrix {
    names: Vec<String>,
    net_te: Vec<f64>,
    threshold: f64,
    adjacency: Vec<f64>,
}

impl CausalityMatrix {
    /// Builds from a full `n x n` net-TE table. The table must be antisymmetric
    /// within `1e-12` with a zero diagonal.
    pub fn from_net_te(names: Vec<String>, net_te: Vec<f64>, threshold: f64) -> Result<Self> {
        let n = names.len();
        if net_te.len() != n * n {
            return Err(Error::LengthMismatch {
                what: "net TE table",
                left: n * n,
                right: net_te.len(),
            });
        }
        if threshold.is_nan() || threshold < 0.0 {
            return Err(Error::Config(format!("threshold must be non-negative, got {threshold}")));
        }
        for i in 0..n {
            if net_te[i * n + i] != 0.0 {
                return Err(Error::Data(format!("net TE diagonal entry {i} is not zero")));
            }
            for j in 0..n {
                let (a, b) = (net_te[i * n + j], net_te[j * n + i]);
                if !a.is_finite() || (a + b).abs() > 1e-12 {
                    return Err(Error::Data(format!(
                        "net TE is not antisymmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
            }
        }
        let adjacency = net_te
            .iter()
            .map(|&v| if v > threshold { v } else { 0.0 })
            .collect();
        Ok(Self {
            names,
            net_te,
            threshold,
            adjacency,
        })
    }

    pub fn n(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn net_te(&self, i: usize, j: usize) -> f64 {
        self.net_te[i * self.n() + j]
    }

    pub fn net_te_table(&self) -> &[f64] {
        &self.net_te
    }

    pub fn adjacency(&self, i: usize, j: usize) -> f64 {
        self.adjacency[i * self.n() + j]
    }

    /// Row-major `n x n` adjacency.
    pub fn adjacency_table(&self) -> &[f64] {
        &self.adjacency
    }

    pub fn with_threshold(&self, threshold: f64) -> Result<Self> {
        Self::from_net_te(self.names.clone(), self.net_te.clone(), threshold)
    }

    /// Directed edges `(cause, effect)` in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.n();
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.adjacency(i, j) > 0.0)
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().filter(|&&v| v > 0.0).count()
    }

    /// Fraction of the `n(n-1)` possible directed edges that are present.
    pub fn density(&self) -> f64 {
        let n = self.n();
        if n < 2 {
            return 0.0;
        }
        self.edge_count() as f64 / (n * (n - 1)) as f64
    }

    /// Relabels variables: new variable `p` is old variable `perm[p]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::Config(format!("{perm:?} is not a permutation of 0..{n}")));
        }
        let names = perm.iter().map(|&p| self.names[p].clone()).collect();
        let mut net = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                net[a * n + b] = self.net_te(perm[a], perm[b]);
            }
        }
        Self::from_net_te(names, net, self.threshold)
    }

    /// CSV export: a `# threshold=` line, a header row of names, then `n` rows of net TE.
    pub fn to_csv(&self) -> String {
        let n = self.n();
        let mut out = String::new();
        writeln!(out, "# threshold={}", self.threshold).unwrap();
        writeln!(out, "{}", self.names.join(",")).unwrap();
        for i in 0..n {
            let row: Vec<String> = (0..n).map(|j| self.net_te(i, j).to_string()).collect();
            writeln!(out, "{}", row.join(",")).unwrap();
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut threshold = None;
        let mut names: Option<Vec<String>> = None;
        let mut values = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                if let Some(v) = meta.trim().strip_prefix("threshold=") {
                    threshold = Some(v.trim().parse::<f64>().map_err(|_| Error::Parse {
                        row: line_no,
                        msg: format!("bad threshold `{v}`"),
                    })?);
                }
                continue;
            }
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            match &names {
                None => names = Some(cells.iter().map(|c| c.to_string()).collect()),
                Some(ns) => {
                    if cells.len() != ns.len() {
                        return Err(Error::Parse {
                            row: line_no,
                            msg: format!("expected {} values, found {}", ns.len(), cells.len()),
                        });
                    }
                    for c in cells {
                        values.push(c.parse::<f64>().map_err(|_| Error::Parse {
                            row: line_no,
                            msg: format!("non-numeric cell `{c}`"),
                        })?);
                    }
                }
            }
        }
        let threshold =
            threshold.ok_or_else(|| Error::Data("causality CSV lacks a `# threshold=` line".into()))?;
        let names = names.ok_or_else(|| Error::Data("causality CSV has no header row".into()))?;
        Self::from_net_te(names, values, threshold)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

/// Net-TE matrix over raw columns. Bins for each variable are fit on the
/// first `fit_len` observations, which are also the ones used for estimation.
pub fn causality_from_columns(
    names: Vec<String>,
    columns: &[Vec<f64>],
    fit_len: usize,
    config: &CausalityConfig,
) -> Result<CausalityMatrix> {
    config.validate()?;
    let n = columns.len();
    if n < 2 || names.len() != n {
        return Err(Error::Data(format!(
            "need at least 2 named variables, got {} columns and {} names",
            n,
            names.len()
        )));
    }
    if fit_len == 0 || columns.iter().any(|c| c.len() < fit_len) {
        return Err(Error::Data(format!("fit range of {fit_len} rows is empty or too long")));
    }
    let series: Vec<Option<DiscretizedSeries>> = columns
        .iter()
        .zip(&names)
        .map(|(col, name)| {
            let fit = &col[..fit_len];
            match Binning::fit(fit, config.bins) {
                Ok(b) => Ok(Some(b.apply(fit))),
                Err(Error::ZeroWidthRange(v)) => {
                    warn!("variable `{name}` is constant ({v}) over the fit range; its edges are set to 0");
                    Ok(None)
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;

    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| match (&series[i], &series[j]) {
            (Some(a), Some(b)) => net_transfer_entropy(a, b, config.k, config.l),
            _ => Ok(0.0),
        })
        .collect::<Result<_>>()?;

    let mut net = vec![0.0; n * n];
    for (&(i, j), v) in pairs.iter().zip(values) {
        net[i * n + j] = v;
        net[j * n + i] = -v;
    }
    CausalityMatrix::from_net_te(names, net, config.threshold)
}

/// Net-TE matrix of a split dataset, estimated on its train + validation rows.
pub fn build_causality_matrix(ds: &TimeSeriesDataset, config: &CausalityConfig) -> Result<CausalityMatrix> {
    let bounds = ds
        .split()
        .ok_or_else(|| Error::Data("dataset must be split before estimating causality".into()))?;
    let columns: Vec<Vec<f64>> = (0..ds.n_vars()).map(|i| ds.column(i)).collect();
    causality_from_columns(ds.names().to_vec(), &columns, bounds.valid_end, config)
}
