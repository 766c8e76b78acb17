//! Linear basis-function ILC across the benchmark schedule: it learns on
//! repeated references and carries its parameters over task changes.

use hammerstein_ilc::experiment::ExperimentConfig;
use hammerstein_ilc::ilc::{bfilc_update, BasisMatrix, Weight};
use hammerstein_ilc::lifted_lti::process_sensitivity;
use hammerstein_ilc::plant_sim::run_trial;

fn main() -> hammerstein_ilc::Result<()> {
    let cfg = ExperimentConfig::default_benchmark()?;
    let sp = process_sensitivity(&cfg.plant.linear_plant, &cfg.plant.controller)?;
    let d1 = cfg.references.normalization_distance()?;
    let mut theta = [0.0, 0.0];
    for k in 0..cfg.references.schedule.len() {
        let (name, r) = cfg.references.trial_reference(k, cfg.ts())?;
        let basis = BasisMatrix::from_reference(&r);
        let trial = run_trial(&cfg.plant, &r, &basis.feedforward(theta), k)?;
        println!(
            "trial {} ({name}): theta = [{:>9.2}, {:.4e}], ||e||/d1 = {:.3e}",
            k + 1,
            theta[0],
            theta[1],
            trial.error_norm() / d1
        );
        theta = bfilc_update(&basis, &sp.lift(r.len()), &trial, theta, &Weight::Identity)?;
    }
    Ok(())
}
