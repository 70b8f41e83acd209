//! Acceptance criteria, one status line each.
//!
//! `cargo test --test acceptance` runs every criterion that fits in a normal
//! test run. The three Exchange-Rate criteria train full-size models for
//! tens of minutes and are `#[ignore]`d; run them with
//!
//! ```text
//! CAUGNN_EXCHANGE_RATE=/path/to/exchange_rate.txt \
//!     cargo test --release --test acceptance -- --ignored --nocapture
//! ```
//!
//! The file is the 7588 x 8 comma-separated daily exchange-rate panel without
//! a header. Without it those tests fail instead of passing vacuously.

mod common;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use caugnn::causality::{build_causality_matrix, causality_from_columns, CausalityConfig, CausalityMatrix};
use caugnn::cli::{run_ablation, Ablation};
use caugnn::data::{Split, TimeSeriesDataset};
use caugnn::model::{CauGnnModel, ModelConfig};
use caugnn::synthetic::{coupled_chain, independent_noise, ChainSpec};
use caugnn::train::{self, Metrics, TrainConfig};

/// Writes straight to the process stderr so the line survives output capture.
fn report(criterion: u32, pass: bool, text: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "acceptance {criterion} [{status}] {text}");
}

fn report_blocked(criterion: u32, text: &str) {
    let _ = writeln!(std::io::stderr(), "acceptance {criterion} [BLOCKED] {text}");
}

fn criterion_1_gradients() -> bool {
    let start = Instant::now();
    let mut worst_op = (0.0f64, "");
    for (name, case) in common::op_cases() {
        for seed in 0..20 {
            let e = case(seed);
            if e > worst_op.0 {
                worst_op = (e, name);
            }
        }
    }
    let worst_model = (0..20).map(common::model_gradient_error).fold(0.0f64, f64::max);
    let secs = start.elapsed().as_secs_f64();
    let pass = worst_op.0 < 1e-4 && worst_model < 1e-3 && secs < 60.0;
    report(
        1,
        pass,
        &format!(
            "gradient suite: worst per-op relative error {:.2e} ({}) < 1e-4, end-to-end {worst_model:.2e} < 1e-3, \
             20 seeds each, {secs:.1} s",
            worst_op.0, worst_op.1
        ),
    );
    pass
}

fn criterion_2_te_oracle() -> bool {
    let start = Instant::now();
    let sweep = common::te_sweep_all();
    let secs = start.elapsed().as_secs_f64();
    let pass = sweep.worst < 1e-10 && secs < 60.0;
    report(
        2,
        pass,
        &format!(
            "TE oracle: {} cases, worst |estimator - joint-table oracle| {:.2e} < 1e-10, {secs:.1} s",
            sweep.cases, sweep.worst
        ),
    );
    pass
}

fn criterion_3_causality_recovery() -> bool {
    let start = Instant::now();
    let cfg = CausalityConfig::default();
    let names = |n: usize| (0..n).map(|i| format!("v{i}")).collect::<Vec<_>>();
    let (mut directed, mut quiet) = (0, 0);
    let mut weakest_edge = f64::INFINITY;
    let mut noise: Vec<f64> = Vec::with_capacity(100);
    for trial in 0..100u64 {
        let chain = coupled_chain(5000, ChainSpec::default(), 10_000 + trial);
        let m = causality_from_columns(names(3), &chain, 5000, &cfg).unwrap();
        let (xy, yz) = (m.net_te(0, 1), m.net_te(1, 2));
        weakest_edge = weakest_edge.min(xy.min(yz));
        if m.adjacency(0, 1) > 0.0 && m.adjacency(1, 2) > 0.0 {
            directed += 1;
        }
        let pair = independent_noise(5000, 2, 20_000 + trial);
        let v = causality_from_columns(names(2), &pair, 5000, &cfg).unwrap().net_te(0, 1).abs();
        noise.push(v);
        if v <= 0.005 {
            quiet += 1;
        }
    }
    noise.sort_by(f64::total_cmp);
    let secs = start.elapsed().as_secs_f64();
    let pass = directed >= 95 && quiet >= 95 && secs < 120.0;
    report(
        3,
        pass,
        &format!(
            "causality recovery: both chain edges found in the true direction in {directed}/100 trials \
             (weakest net TE {weakest_edge:.4}); independent pairs |net TE| <= 0.005 in {quiet}/100 \
             (95th percentile {:.4}); {secs:.1} s",
            noise[94]
        ),
    );
    pass
}

fn criterion_6_metrics() -> bool {
    let actual = [1.0, 10.0, 2.0, 12.0, 3.0, 11.0, 5.0, 9.0];
    let perfect = Metrics::compute(&actual, &actual, 2).unwrap();
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let mean_pred = Metrics::compute(&[mean; 8], &actual, 2).unwrap();
    let pass = perfect.mae == 0.0 && perfect.rae == 0.0 && perfect.corr == Some(1.0) && mean_pred.rae == 1.0;
    report(
        6,
        pass,
        &format!(
            "metrics: perfect prediction (MAE, RAE, CORR) = ({}, {}, {:?}); mean predictor RAE = {}",
            perfect.mae, perfect.rae, perfect.corr, mean_pred.rae
        ),
    );
    pass
}

fn criterion_7_layers() -> bool {
    let (kgnn, gin, graphs) = common::layer_oracle_worst(100);
    let pass = kgnn < 1e-12 && gin < 1e-12 && graphs == 800;
    report(
        7,
        pass,
        &format!(
            "layer oracle: {graphs} random graphs (n = 1..8, 100 seeds), worst deviation kgnn {kgnn:.1e}, \
             gin {gin:.1e} < 1e-12"
        ),
    );
    pass
}

fn criterion_8_determinism() -> bool {
    let bin = env!("CARGO_BIN_EXE_caugnn");
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("panel.csv");
    std::fs::write(&data, caugnn::synthetic::exchange_like(400, 4, 77).unwrap().to_csv()).unwrap();
    let train = |out: &Path, config: Option<&Path>| {
        let mut cmd = Command::new(bin);
        cmd.arg("train").arg("--out").arg(out).env_remove("CAUGNN_OUT_DIR");
        match config {
            Some(c) => cmd.arg("--config").arg(c),
            None => cmd.arg(&data).args([
                "--kernels", "2,3", "--channels", "3", "--hidden", "6,3", "--window", "8", "--epochs", "4",
                "--horizon", "3", "--seed", "21", "--variant", "gin",
            ]),
        };
        assert!(cmd.status().unwrap().success());
    };
    let eval = |out: &Path| {
        let o = Command::new(bin)
            .arg("eval")
            .arg("--checkpoint")
            .arg(out.join("checkpoint"))
            .arg(&data)
            .output()
            .unwrap();
        assert!(o.status.success());
        o.stdout
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    train(&a, None);
    train(&b, Some(&a.join("run_manifest.txt")));
    let files = ["checkpoint/manifest.txt", "checkpoint/params.bin", "checkpoint/causality.csv", "history.csv"];
    let same_files = files
        .iter()
        .all(|f| std::fs::read(a.join(f)).unwrap() == std::fs::read(b.join(f)).unwrap());
    let same_reports = eval(&a) == eval(&b);
    let pass = same_files && same_reports;
    report(
        8,
        pass,
        &format!(
            "determinism: rerun from the first run's manifest gives identical checkpoint and history bytes ({same_files}) \
             and identical EvalReports ({same_reports})"
        ),
    );
    pass
}

/// Every criterion that runs in a normal test pass, then the Exchange-Rate status.
#[test]
fn acceptance_criteria() {
    let _ = writeln!(std::io::stderr());
    let results = [
        criterion_1_gradients(),
        criterion_2_te_oracle(),
        criterion_3_causality_recovery(),
        criterion_6_metrics(),
        criterion_7_layers(),
        criterion_8_determinism(),
    ];
    for (criterion, what) in [(4, "Exchange-Rate h=5 test MAE/CORR"), (5, "ablation ordering"), (9, "hidden-size robustness")] {
        match exchange_rate_path() {
            Some(p) => {
                let _ = writeln!(
                    std::io::stderr(),
                    "acceptance {criterion} [DEFERRED] {what}: dataset found at {}; run with --ignored",
                    p.display()
                );
            }
            None => report_blocked(
                criterion,
                &format!(
                    "{what}: needs the Exchange-Rate file (set CAUGNN_EXCHANGE_RATE or place data/exchange_rate.txt), \
                     then run with --ignored"
                ),
            ),
        }
    }
    assert!(results.iter().all(|&p| p), "acceptance criteria failed: {results:?}");
}

fn exchange_rate_path() -> Option<PathBuf> {
    if let Some(p) = std::env::var_os("CAUGNN_EXCHANGE_RATE") {
        return Some(PathBuf::from(p));
    }
    let local = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/exchange_rate.txt");
    local.exists().then_some(local)
}

struct Exchange {
    ds: TimeSeriesDataset,
    causality: CausalityMatrix,
}

fn exchange_rate(criterion: u32) -> Exchange {
    let Some(path) = exchange_rate_path() else {
        report_blocked(criterion, "Exchange-Rate file not found");
        panic!("Exchange-Rate data missing: set CAUGNN_EXCHANGE_RATE or place data/exchange_rate.txt");
    };
    let ds = TimeSeriesDataset::load_csv(&path, ',')
        .unwrap()
        .fit_scaling_and_split([0.6, 0.2, 0.2])
        .unwrap();
    assert_eq!(ds.n_vars(), 8, "expected the 8-currency panel");
    let causality = build_causality_matrix(&ds, &CausalityConfig::default()).unwrap();
    Exchange { ds, causality }
}

/// Full-size settings. The model side is `ModelConfig::default()`: window 32,
/// kernels {3, 5, 7}, 12 channels, GNN 30/10.
fn full_size_fit(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 200,
        batch_size: 128,
        learning_rate: 1e-3,
        horizon: 5,
        seed,
        ..TrainConfig::default()
    }
}

#[test]
#[ignore = "trains on the Exchange-Rate panel for several minutes"]
fn criterion_4_exchange_rate_horizon_5() {
    let ex = exchange_rate(4);
    let start = Instant::now();
    let model = CauGnnModel::new(ModelConfig::default(), 1).unwrap();
    let out = train::train(model, &ex.ds, &ex.causality, &full_size_fit(1)).unwrap();
    let r = train::evaluate(&out.model, &ex.ds, &ex.causality, Split::Test, 5, "exchange_rate").unwrap();
    let corr = r.metrics.corr.unwrap_or(f64::NAN);
    let pass = r.metrics.mae <= 0.008 && corr >= 0.955;
    report(
        4,
        pass,
        &format!(
            "Exchange-Rate h=5: test MAE {:.5} (<= 0.008), CORR {corr:.4} (>= 0.955), RAE {:.4}; \
             {} edges, best epoch {}, {:.0} s",
            r.metrics.mae,
            r.metrics.rae,
            ex.causality.edge_count(),
            out.best_epoch,
            start.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
#[ignore = "trains 9 full-size models on the Exchange-Rate panel"]
fn criterion_5_ablation_ordering() {
    let ex = exchange_rate(5);
    let start = Instant::now();
    let arms = [Ablation::CauGnn, Ablation::NoCausality, Ablation::NoCnn];
    let rows = run_ablation(
        &ex.ds,
        &ex.causality,
        &ModelConfig::default(),
        &full_size_fit(0),
        &arms,
        &[1, 2, 3],
        5,
        "exchange_rate",
    )
    .unwrap();
    let mae: Vec<f64> = rows.iter().map(|r| r.median_mae()).collect();
    // the raw-feature variant is the no-CNN arm
    let pass = mae[0] <= mae[1] && mae[0] <= mae[2];
    report(
        5,
        pass,
        &format!(
            "ablation median test MAE over seeds 1,2,3: CauGNN {:.5}, nCau {:.5}, nCNN/RF {:.5}; {:.0} s",
            mae[0],
            mae[1],
            mae[2],
            start.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
#[ignore = "trains 3 full-size models on the Exchange-Rate panel"]
fn criterion_9_hidden_size_robustness() {
    let ex = exchange_rate(9);
    let start = Instant::now();
    let mut results = Vec::new();
    for h in [10, 50, 100] {
        let cfg = ModelConfig {
            gnn_hidden: vec![h, h],
            ..ModelConfig::default()
        };
        let out = train::train(CauGnnModel::new(cfg, 1).unwrap(), &ex.ds, &ex.causality, &full_size_fit(1)).unwrap();
        let r = train::evaluate(&out.model, &ex.ds, &ex.causality, Split::Test, 5, "exchange_rate").unwrap();
        results.push((h, r.metrics.mae));
    }
    let pass = results.iter().all(|&(_, mae)| mae <= 0.010);
    let listed: Vec<String> = results.iter().map(|(h, m)| format!("{h}: {m:.5}")).collect();
    report(
        9,
        pass,
        &format!(
            "hidden-size robustness, test MAE (<= 0.010) by width {}; {:.0} s",
            listed.join(", "),
            start.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}
