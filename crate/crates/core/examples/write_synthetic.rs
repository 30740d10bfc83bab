//! Writes an ETT-shaped synthetic table (date + 7 channels, hourly) so the
//! CLI can be tried without downloading a benchmark.
//!
//! `cargo run --example write_synthetic -- out.csv [rows]`

use std::path::PathBuf;

use hgts::data::synthetic_ett;

fn main() -> hgts::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = PathBuf::from(args.next().unwrap_or_else(|| "synthetic_ett.csv".into()));
    let rows = args.next().and_then(|r| r.parse().ok()).unwrap_or(17_420);
    synthetic_ett(rows, 7, 11).write_csv(&path)?;
    println!("{rows} rows written to {}", path.display());
    Ok(())
}
