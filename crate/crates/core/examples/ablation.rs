//! Trains every ablation arm under a few seeds on the same data and graph and
//! prints the median test metrics per arm.
//!
//! ```text
//! cargo run --release --example ablation
//! ```

use caugnn::causality::{build_causality_matrix, CausalityConfig};
use caugnn::cli::{run_ablation, Ablation};
use caugnn::model::ModelConfig;
use caugnn::synthetic::exchange_like;
use caugnn::train::TrainConfig;

fn main() -> anyhow::Result<()> {
    let ds = exchange_like(1200, 4, 5)?.fit_scaling_and_split([0.6, 0.2, 0.2])?;
    let causality = build_causality_matrix(&ds, &CausalityConfig::default())?;
    let base = ModelConfig {
        kernel_sizes: vec![3, 5, 7],
        channels_per_kernel: 4,
        gnn_hidden: vec![16, 8],
        window: 16,
        ..ModelConfig::default()
    };
    let fit = TrainConfig {
        epochs: 60,
        horizon: 3,
        ..TrainConfig::default()
    };
    let arms = [
        Ablation::CauGnn,
        Ablation::CauGin,
        Ablation::NoCausality,
        Ablation::NoCnn,
        Ablation::SingleKernel,
    ];
    // the single-kernel arm keeps the middle kernel
    let rows = run_ablation(&ds, &causality, &base, &fit, &arms, &[1, 2, 3], 5, "exchange_like")?;
    println!("{:<14}{:>10}{:>10}{:>10}", "arm", "MAE", "RAE", "CORR");
    for r in &rows {
        let corr = r.median_corr().map_or("n/a".to_string(), |c| format!("{c:.4}"));
        println!("{:<14}{:>10.5}{:>10.4}{:>10}", r.label, r.median_mae(), r.median_rae(), corr);
    }
    Ok(())
}
