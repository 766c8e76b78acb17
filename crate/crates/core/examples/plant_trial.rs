//! One closed-loop trial on the surrogate servo, with and without
//! feedforward, written to CSV.
//!
//!     cargo run --example plant_trial -- /tmp/trial.csv

use hammerstein_ilc::experiment::ExperimentConfig;
use hammerstein_ilc::ident::rigid_body_ff;
use hammerstein_ilc::plant_sim::run_trial;
use hammerstein_ilc::trajectory::quintic;

fn main() -> hammerstein_ilc::Result<()> {
    let cfg = ExperimentConfig::default_benchmark()?;
    let ts = cfg.ts();
    let r = quintic(&cfg.references.segment("r1")?.spec, ts)?;
    let d1 = cfg.references.normalization_distance()?;

    let fb = run_trial(&cfg.plant, &r, &vec![0.0; r.len()], 0)?;
    println!("feedback only:        ||e||/d1 = {:.3e}", fb.error_norm() / d1);

    // nominal rigid-body feedforward m * acceleration, in samples
    let f = rigid_body_ff(cfg.identification.nominal_theta, &r);
    let ff = run_trial(&cfg.plant, &r, &f, 0)?;
    let peak_u = ff.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let peak_x = ff.x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    println!("nominal feedforward:  ||e||/d1 = {:.3e} (peak current {peak_u:.1} A, force {peak_x:.1} A after saturation)", ff.error_norm() / d1);

    if let Some(path) = std::env::args().nth(1) {
        ff.write_csv(path.as_ref(), ts)?;
        println!("wrote {path}");
    }
    Ok(())
}
