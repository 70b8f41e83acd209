//! Plug-in (empirical frequency) Shannon entropies in bits.

use super::DiscretizedSeries;
use crate::error::{Error, Result};

/// Entropy of the joint symbol `(c_0[t], c_1[t], ..)` over `t`, each column
/// drawn from an alphabet of size `radix`.
fn joint_entropy(columns: &[Vec<usize>], radix: usize) -> Result<f64> {
    let len = columns.first().map_or(0, Vec::len);
    if len == 0 {
        return Err(Error::EmptySeries);
    }
    let mut space: u64 = 1;
    for _ in columns {
        space = space
            .checked_mul(radix as u64)
            .ok_or_else(|| Error::Config("joint state space overflows 64 bits".into()))?;
    }
    let codes = (0..len).map(|t| {
        columns
            .iter()
            .fold(0u64, |acc, col| acc * radix as u64 + col[t] as u64)
    });

    let mut counts: Vec<u64> = Vec::new();
    if space <= (4 * len as u64).max(4096) {
        let mut dense = vec![0u64; space as usize];
        codes.for_each(|c| dense[c as usize] += 1);
        counts.extend(dense.into_iter().filter(|&c| c > 0));
    } else {
        let mut sorted: Vec<u64> = codes.collect();
        sorted.sort_unstable();
        let mut run = 1;
        for w in sorted.windows(2) {
            if w[0] == w[1] {
                run += 1;
            } else {
                counts.push(run);
                run = 1;
            }
        }
        counts.push(run);
    }

    // H = log2 N - (1/N) sum c log2 c
    let n = len as f64;
    let s: f64 = counts.iter().map(|&c| (c as f64) * (c as f64).log2()).sum();
    Ok((n.log2() - s / n).max(0.0))
}

fn check_same_len(what: &'static str, a: &DiscretizedSeries, b: &DiscretizedSeries) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            what,
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

pub fn entropy(series: &DiscretizedSeries) -> Result<f64> {
    joint_entropy(&[series.symbols().to_vec()], series.bin_count())
}

/// `H(X | Y) = H(X, Y) - H(Y)`.
pub fn conditional_entropy(x: &DiscretizedSeries, y: &DiscretizedSeries) -> Result<f64> {
    check_same_len("conditional_entropy", x, y)?;
    let radix = x.bin_count().max(y.bin_count());
    let xs = x.symbols().to_vec();
    let ys = y.symbols().to_vec();
    let hxy = joint_entropy(&[xs, ys.clone()], radix)?;
    let hy = joint_entropy(&[ys], radix)?;
    Ok((hxy - hy).max(0.0))
}

/// Transfer entropy `T_{source -> target}` with target history length `k`
/// and source history length `l`:
/// `H(X_{t+1} | X_t^(k)) - H(X_{t+1} | X_t^(k), Y_t^(l))`, clamped at 0.
pub fn transfer_entropy(
    source: &DiscretizedSeries,
    target: &DiscretizedSeries,
    k: usize,
    l: usize,
) -> Result<f64> {
    if k == 0 || l == 0 {
        return Err(Error::Config(format!("history lengths must be >= 1, got k={k}, l={l}")));
    }
    check_same_len("transfer_entropy", source, target)?;
    let lag = k.max(l);
    let min = lag + 2;
    if target.len() < min {
        return Err(Error::SeriesTooShort {
            len: target.len(),
            min,
        });
    }
    let radix = source.bin_count().max(target.bin_count());
    let (x, y) = (target.symbols(), source.symbols());
    // samples t = lag-1 ..= T-2
    let ts = (lag - 1)..(x.len() - 1);
    let next: Vec<usize> = ts.clone().map(|t| x[t + 1]).collect();
    let x_hist: Vec<Vec<usize>> = (0..k).map(|d| ts.clone().map(|t| x[t - d]).collect()).collect();
    let y_hist: Vec<Vec<usize>> = (0..l).map(|d| ts.clone().map(|t| y[t - d]).collect()).collect();

    let mut cols_xh = x_hist.clone();
    let h_xh = joint_entropy(&cols_xh, radix)?;
    cols_xh.push(next.clone());
    let h_next_xh = joint_entropy(&cols_xh, radix)?;

    let mut cols_xyh = x_hist;
    cols_xyh.extend(y_hist);
    let h_xyh = joint_entropy(&cols_xyh, radix)?;
    cols_xyh.push(next);
    let h_next_xyh = joint_entropy(&cols_xyh, radix)?;

    let te = (h_next_xh - h_xh) - (h_next_xyh - h_xyh);
    Ok(te.max(0.0))
}

/// `T_{x -> y} - T_{y -> x}`; positive when `x` drives `y`.
pub fn net_transfer_entropy(
    x: &DiscretizedSeries,
    y: &DiscretizedSeries,
    k: usize,
    l: usize,
) -> Result<f64> {
    Ok(transfer_entropy(x, y, k, l)? - transfer_entropy(y, x, k, l)?)
}
