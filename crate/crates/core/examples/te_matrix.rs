//! Builds a transfer-entropy causality graph from a CSV file, or from a
//! synthetic x -> y -> z chain when no path is given.
//!
//! ```text
//! cargo run --release --example te_matrix -- [data.csv] [threshold]
//! ```

use caugnn::causality::{build_causality_matrix, CausalityConfig};
use caugnn::data::TimeSeriesDataset;
use caugnn::synthetic::chain_dataset;

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let ds = match args.next() {
        Some(path) => TimeSeriesDataset::load_csv(path, ',')?,
        None => chain_dataset(5000, 7)?,
    };
    let mut config = CausalityConfig::default();
    if let Some(c) = args.next() {
        config.threshold = c.parse()?;
    }
    // TE is estimated on the training rows only
    let ds = ds.fit_scaling_and_split([0.6, 0.2, 0.2])?;
    let m = build_causality_matrix(&ds, &config)?;

    println!("net transfer entropy, row drives column (bits):");
    print!("{:>10}", "");
    for name in m.names() {
        print!("{name:>10}");
    }
    println!();
    for (i, name) in m.names().iter().enumerate() {
        print!("{name:>10}");
        for j in 0..m.n() {
            print!("{:>10.4}", m.net_te(i, j));
        }
        println!();
    }
    println!("\nedges above c = {}:", m.threshold());
    for (i, j) in m.edges() {
        println!("  {} -> {}  ({:.4})", m.names()[i], m.names()[j], m.net_te(i, j));
    }
    println!("density {:.3}", m.density());
    Ok(())
}
