//! Trains a small CauGNN on a synthetic exchange-rate-like panel, reports
//! test metrics, saves a checkpoint, reloads it and forecasts past the end
//! of the data.
//!
//! ```text
//! cargo run --release --example train_forecast
//! ```

use caugnn::causality::{build_causality_matrix, CausalityConfig};
use caugnn::data::Split;
use caugnn::model::{CauGnnModel, Checkpoint, CheckpointMeta, ModelConfig};
use caugnn::synthetic::exchange_like;
use caugnn::train::{self, TrainConfig};

fn main() -> anyhow::Result<()> {
    let ds = exchange_like(1500, 4, 3)?.fit_scaling_and_split([0.6, 0.2, 0.2])?;
    let te = CausalityConfig::default();
    let causality = build_causality_matrix(&ds, &te)?;
    println!("{} causal edges among {} variables", causality.edge_count(), ds.n_vars());

    let config = ModelConfig {
        kernel_sizes: vec![3, 5],
        channels_per_kernel: 4,
        gnn_hidden: vec![16, 8],
        window: 16,
        ..ModelConfig::default()
    };
    let fit = TrainConfig {
        epochs: 30,
        horizon: 3,
        seed: 1,
        ..TrainConfig::default()
    };
    let outcome = train::train(CauGnnModel::new(config, fit.seed)?, &ds, &causality, &fit)?;
    for r in outcome.history.iter().step_by(5) {
        println!("epoch {:>3}  train L1 {:.5}  valid MAE {:.5}", r.epoch, r.train_loss, r.valid.mae);
    }
    println!("best epoch {}", outcome.best_epoch);
    println!("{}", train::evaluate(&outcome.model, &ds, &causality, Split::Test, fit.horizon, "exchange_like")?);

    let dir = std::env::temp_dir().join("caugnn-train-forecast");
    let checkpoint = Checkpoint {
        model: outcome.model,
        meta: CheckpointMeta {
            variable_names: ds.names().to_vec(),
            scale: ds.scale().to_vec(),
            split: ds.split().expect("dataset was split"),
            horizon: fit.horizon,
            seed: fit.seed,
            causality: te,
            dataset_sha256: None,
        },
        causality,
    };
    checkpoint.save(&dir)?;
    let loaded = Checkpoint::load(&dir)?;
    println!("checkpoint saved to and reloaded from {}", dir.display());

    let last = ds.steps() - 1;
    let window = ds.window_at(last, loaded.model.config().window)?;
    let scaled = loaded.model.predict(&window, loaded.causality.adjacency_table())?;
    println!("forecast for t = {}:", last + fit.horizon);
    for (i, name) in ds.names().iter().enumerate() {
        println!("  {name:>4} {:.5} (last observed {:.5})", ds.unscale_value(i, scaled[i]), ds.value(last, i));
    }
    Ok(())
}
