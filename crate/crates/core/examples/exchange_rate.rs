//! Exchange-Rate forecasting with the full-size model: window 32, kernels
//! 3/5/7 with 12 channels each, GNN widths 30 and 10, threshold 0.005,
//! horizons 5, 10 and 15.
//!
//! ```text
//! CAUGNN_EXCHANGE_RATE=exchange_rate.txt cargo run --release --example exchange_rate -- [epochs]
//! ```
//!
//! The file is the comma-separated 7588 x 8 daily panel without a header.
//! Without it the example runs on a synthetic surrogate of the same shape, so
//! the numbers it prints then say nothing about the real data.

use caugnn::causality::{build_causality_matrix, CausalityConfig};
use caugnn::data::{Split, TimeSeriesDataset};
use caugnn::model::{CauGnnModel, ModelConfig};
use caugnn::synthetic::exchange_like;
use caugnn::train::{self, EvalReport, TrainConfig};

fn main() -> anyhow::Result<()> {
    let epochs: usize = std::env::args().nth(1).map_or(Ok(200), |s| s.parse())?;
    let (ds, id) = match std::env::var_os("CAUGNN_EXCHANGE_RATE") {
        Some(path) => (TimeSeriesDataset::load_csv(path, ',')?, "exchange_rate"),
        None => {
            eprintln!("CAUGNN_EXCHANGE_RATE not set; using the synthetic exchange_like surrogate");
            (exchange_like(7588, 8, 11)?, "exchange_like")
        }
    };
    let ds = ds.fit_scaling_and_split([0.6, 0.2, 0.2])?;
    let causality = build_causality_matrix(&ds, &CausalityConfig::default())?;
    println!("{}: {} steps, {} edges", id, ds.steps(), causality.edge_count());
    for (i, j) in causality.edges() {
        println!("  {} -> {}", causality.names()[i], causality.names()[j]);
    }

    println!("{}", EvalReport::CSV_HEADER);
    for horizon in [5, 10, 15] {
        let fit = TrainConfig {
            epochs,
            horizon,
            seed: 1,
            ..TrainConfig::default()
        };
        let model = CauGnnModel::new(ModelConfig::default(), fit.seed)?;
        let outcome = train::train(model, &ds, &causality, &fit)?;
        let report = train::evaluate(&outcome.model, &ds, &causality, Split::Test, horizon, id)?;
        println!("{}", report.csv_row());
    }
    Ok(())
}
