//! Trains the same model with GNN hidden widths 10, 50 and 100 and prints the
//! test metrics for each.
//!
//! ```text
//! cargo run --release --example hidden_size_sweep -- [data.csv]
//! ```

use caugnn::causality::{build_causality_matrix, CausalityConfig};
use caugnn::data::{Split, TimeSeriesDataset};
use caugnn::model::{CauGnnModel, ModelConfig};
use caugnn::synthetic::exchange_like;
use caugnn::train::{self, TrainConfig};

fn main() -> anyhow::Result<()> {
    let ds = match std::env::args().nth(1) {
        Some(path) => TimeSeriesDataset::load_csv(path, ',')?,
        None => exchange_like(1500, 4, 9)?,
    }
    .fit_scaling_and_split([0.6, 0.2, 0.2])?;
    let causality = build_causality_matrix(&ds, &CausalityConfig::default())?;
    let fit = TrainConfig {
        epochs: 25,
        horizon: 5,
        seed: 1,
        ..TrainConfig::default()
    };
    println!("{:>6}{:>12}{:>10}{:>10}", "hidden", "MAE", "RAE", "CORR");
    for h in [10, 50, 100] {
        let config = ModelConfig {
            channels_per_kernel: 4,
            gnn_hidden: vec![h, h],
            window: 16,
            ..ModelConfig::default()
        };
        let outcome = train::train(CauGnnModel::new(config, fit.seed)?, &ds, &causality, &fit)?;
        let m = train::evaluate(&outcome.model, &ds, &causality, Split::Test, fit.horizon, "sweep")?.metrics;
        println!("{h:>6}{:>12.5}{:>10.4}{:>10.4}", m.mae, m.rae, m.corr.unwrap_or(f64::NAN));
    }
    Ok(())
}
