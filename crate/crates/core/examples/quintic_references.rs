//! The benchmark references and the chained training reference.

use hammerstein_ilc::experiment::ExperimentConfig;
use hammerstein_ilc::trajectory::{concat_references, peak_sampled_acceleration, quintic};

fn main() -> hammerstein_ilc::Result<()> {
    let cfg = ExperimentConfig::default_benchmark()?;
    let ts = cfg.ts();
    for seg in &cfg.references.segments {
        let r = quintic(&seg.spec, ts)?;
        println!(
            "{}: {} m in {} s, {} samples, peak acceleration {:.2} m/s^2 (sampled {:.2})",
            seg.name,
            seg.spec.distance,
            seg.spec.duration,
            r.len(),
            seg.spec.peak_acceleration(),
            peak_sampled_acceleration(&r, ts)
        );
    }
    let r_train = concat_references(&cfg.references, ts)?;
    println!(
        "training reference {:?}: {} samples ending at {} m",
        cfg.references.training,
        r_train.len(),
        r_train.last().unwrap()
    );
    println!("trial schedule {:?}, task changes before trials {:?}", cfg.references.schedule, cfg.references.task_changes().iter().map(|k| k + 1).collect::<Vec<_>>());
    Ok(())
}
