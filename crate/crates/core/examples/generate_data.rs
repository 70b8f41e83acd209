//! Writes the synthetic datasets used across the examples as CSV files.
//!
//! ```text
//! cargo run --release --example generate_data -- data/
//! ```

use std::path::PathBuf;

use caugnn::synthetic::{chain_dataset, constant_dataset, exchange_like};

fn main() -> anyhow::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data".into()));
    std::fs::create_dir_all(&dir)?;
    let files = [
        ("chain.csv", chain_dataset(5000, 7)?),
        ("exchange_like.csv", exchange_like(7588, 8, 11)?),
        ("constant.csv", constant_dataset(200, &[2.5, -1.0, 4.0])?),
    ];
    for (name, ds) in files {
        let path = dir.join(name);
        std::fs::write(&path, ds.to_csv())?;
        println!("{}: {} steps x {} variables", path.display(), ds.steps(), ds.n_vars());
    }
    Ok(())
}
