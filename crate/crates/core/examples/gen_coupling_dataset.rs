//! Regenerates the bundled synthetic coupling dataset.
//!
//! `cargo run -p spurline-core --example gen_coupling_dataset -- scenarios/coupling`

use std::path::PathBuf;

use spurline_core::sparams::{write_synthetic_dataset, DataFormat, SyntheticCoupling};
use spurline_core::FrequencyHz;

fn main() -> std::io::Result<()> {
    let dir: PathBuf = std::env::args_os().nth(1).map(PathBuf::from).unwrap_or_else(|| "scenarios/coupling".into());
    let grid: Vec<FrequencyHz> = (0..5).map(|k| FrequencyHz::from_mhz(29_000 + 500 * k)).collect();
    let seps: Vec<f64> = (1..=41).map(f64::from).collect();
    let manifest = write_synthetic_dataset(&dir, &SyntheticCoupling::default(), &grid, &seps, DataFormat::Ma)?;
    println!("{}", manifest.display());
    Ok(())
}
