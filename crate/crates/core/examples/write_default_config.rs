//! Regenerates the shipped benchmark config from the surrogate and loop
//! design defaults.
//!
//!     cargo run --example write_default_config -- configs/default.json

use hammerstein_ilc::experiment::ExperimentConfig;

fn main() -> hammerstein_ilc::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "configs/default.json".into());
    let cfg = ExperimentConfig::default_benchmark()?;
    std::fs::write(&path, cfg.to_json() + "\n").map_err(|e| hammerstein_ilc::Error::Config(format!("{path}: {e}")))?;
    println!("wrote {path}");
    Ok(())
}
