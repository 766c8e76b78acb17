//! The whole benchmark in-process: run, print the error table, and export
//! plot-ready CSVs.
//!
//!     cargo run --release --example full_benchmark -- out/

use hammerstein_ilc::experiment::{cmd_export_figures, cmd_run, ExperimentConfig, RunOptions};

fn main() -> hammerstein_ilc::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "out".into());
    let cfg = ExperimentConfig::default_benchmark()?;
    let opts = RunOptions { output_dir: Some(dir.clone().into()), parallel: true, ..RunOptions::default() };
    let out = cmd_run(&cfg, &opts)?;
    print!("{}", out.report.summary_table());
    if let Some(n) = &out.report.noilc {
        println!("NOILC final error {:.2}x the noise floor", n.final_error_over_noise_floor);
    }
    let manifest = cmd_export_figures(&std::path::Path::new(&dir).join("report.json"), &std::path::Path::new(&dir).join("figures"))?;
    println!("figures: {:?}", manifest.files);
    if let Some(c) = manifest.fnoilc_vs_fitted_correlation {
        println!("corr(f_NOILC, fitted feedforward) = {c:.4}");
    }
    println!("elapsed {:.1} s", out.metadata.elapsed_s);
    Ok(())
}
