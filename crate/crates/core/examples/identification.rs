//! Both identification paths on the benchmark: the proposed fit to NOILC
//! data and the classical open-loop Hammerstein fit to white-noise data.

use hammerstein_ilc::experiment::ExperimentConfig;
use hammerstein_ilc::ident::{build_open_loop_dataset, build_training_dataset, fit_classical, fit_proposed, FitReport};
use hammerstein_ilc::plant_sim::derive_seed;
use hammerstein_ilc::trajectory::concat_references;

fn show(name: &str, fit: &FitReport) {
    println!(
        "{name:>9}: theta = [{:.2}, {:.5e}], phi = {:.3} A, cost {:.3e}, {} iterations, phi sensitivity {:.2e}",
        fit.theta[0], fit.theta[1], fit.phi, fit.final_cost, fit.iterations, fit.phi_sensitivity
    );
    for w in &fit.warnings {
        println!("           warning: {w}");
    }
}

fn main() -> hammerstein_ilc::Result<()> {
    let cfg = ExperimentConfig::default_benchmark()?;
    let r = concat_references(&cfg.references, cfg.ts())?;
    let search = &cfg.identification.search_box;

    let (data, noilc) = build_training_dataset(&cfg.plant, &r, cfg.noilc_iterations, cfg.noilc)?;
    println!("NOILC final ||e|| = {:.3e}", noilc.error_history.last().unwrap());
    let proposed = fit_proposed(&data, &cfg.pso.swarm(search, derive_seed(cfg.seed, "example-proposed")))?;
    show("proposed", &proposed);

    let std = cfg.identification.white_noise_std_rel * cfg.i_max();
    let data = build_open_loop_dataset(&cfg.plant, r.len(), std);
    let classical = fit_classical(&data, &cfg.pso.swarm(search, derive_seed(cfg.seed, "example-classical")))?;
    show("classical", &classical);
    println!("true saturation level: {} A", cfg.i_max());
    Ok(())
}
