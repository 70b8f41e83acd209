//! Seeded synthetic series with known causal structure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::TimeSeriesDataset;
use crate::error::Result;

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Coupled AR(1) chain `x -> y -> z`:
///
/// ```text
/// x_t     ~ N(0, 1) i.i.d.
/// y_{t+1} = a y_t + c x_t + noise * e
/// z_{t+1} = a z_t + c y_t + noise * e
/// ```
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainSpec {
    pub autoregression: f64,
    pub coupling: f64,
    pub noise: f64,
}

impl Default for ChainSpec {
    fn default() -> Self {
        Self {
            autoregression: 0.5,
            coupling: 0.5,
            noise: 0.5,
        }
    }
}

/// Columns `[x, y, z]` of the chain, `len` steps each.
pub fn coupled_chain(len: usize, spec: ChainSpec, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; len];
    let mut y = vec![0.0; len];
    let mut z = vec![0.0; len];
    for t in 0..len {
        x[t] = normal(&mut rng);
        if t + 1 < len {
            y[t + 1] = spec.autoregression * y[t] + spec.coupling * x[t] + spec.noise * normal(&mut rng);
            z[t + 1] = spec.autoregression * z[t] + spec.coupling * y[t] + spec.noise * normal(&mut rng);
        }
    }
    vec![x, y, z]
}

/// `n` mutually independent standard normal columns.
pub fn independent_noise(len: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..len).map(|_| normal(&mut rng)).collect())
        .collect()
}

/// Chain dataset with variables named `x`, `y`, `z`.
pub fn chain_dataset(len: usize, seed: u64) -> Result<TimeSeriesDataset> {
    TimeSeriesDataset::from_columns(
        vec!["x".into(), "y".into(), "z".into()],
        &coupled_chain(len, ChainSpec::default(), seed),
    )
}

/// Panel of `n` correlated geometric random walks resembling daily currency
/// rates: levels between roughly 0.2 and 1.5, daily log-return volatility of
/// `0.3%-0.7%`, a shared market factor, and a few lead-lag couplings where
/// variable `i` follows the previous day's move of variable `i - 1`.
pub fn exchange_like(steps: usize, n: usize, seed: u64) -> Result<TimeSeriesDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut level: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.5)).collect();
    let vol: Vec<f64> = (0..n).map(|_| rng.random_range(0.003..0.007)).collect();
    let lead: Vec<f64> = (0..n)
        .map(|i| if i % 3 == 1 { rng.random_range(0.2..0.5) } else { 0.0 })
        .collect();
    let mut prev_ret = vec![0.0; n];
    let mut rows = Vec::with_capacity(steps);
    for _ in 0..steps {
        rows.push(level.clone());
        let market = normal(&mut rng);
        let mut ret = vec![0.0; n];
        for i in 0..n {
            let own = 0.6 * market + 0.8 * normal(&mut rng);
            let follow = if i > 0 { lead[i] * prev_ret[i - 1] } else { 0.0 };
            ret[i] = vol[i] * own + follow;
            level[i] *= ret[i].exp();
        }
        prev_ret = ret;
    }
    let names = (0..n).map(|i| format!("c{i}")).collect();
    TimeSeriesDataset::from_rows(names, rows)
}

/// Every variable constant at its own value.
pub fn constant_dataset(steps: usize, values: &[f64]) -> Result<TimeSeriesDataset> {
    let names = (0..values.len()).map(|i| format!("k{i}")).collect();
    TimeSeriesDataset::from_rows(names, vec![values.to_vec(); steps])
}
