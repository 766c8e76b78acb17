//! End-to-end benchmark: NOILC training, both identification paths, and the
//! trial schedule with a task change, plus config validation and CSV export.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ident::{
    build_open_loop_dataset, build_training_dataset, correlation, fit_classical, fit_proposed, normalized_xcorr_peak,
    rigid_body_ff, wiener_ff, FitReport, NoilcSettings,
};
use crate::ilc::{bfilc_update, BasisMatrix, Weight};
use crate::lifted_lti::{process_sensitivity, TransferFunction};
use crate::plant_sim::{
    derive_seed, fmt_f64, norm, run_trial, LeadLagDesign, PlantConfig, SaturationModel, ServoSurrogate, TrialRecord,
};
use crate::pso::SwarmConfig;
use crate::trajectory::{concat_references, peak_sampled_acceleration, quintic, NamedSegment, QuinticSpec, ReferenceSet};

/// Overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "HILC_OUTPUT_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    BfilcLinear,
    ClassicalHammerstein,
    Proposed,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::BfilcLinear, Method::ClassicalHammerstein, Method::Proposed];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::BfilcLinear => "bfilc_linear",
            Method::ClassicalHammerstein => "classical_hammerstein",
            Method::Proposed => "proposed",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}' (expected one of bfilc_linear, classical_hammerstein, proposed)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchBox {
    pub theta1: [f64; 2],
    pub theta2: [f64; 2],
    pub phi: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentSettings {
    /// PSO initialization box, shared by both identification paths.
    pub search_box: SearchBox,
    /// Rigid-body gains a designer would start from; used for checks only.
    pub nominal_theta: [f64; 2],
    /// Standard deviation of the open-loop excitation, relative to `i_max`.
    pub white_noise_std_rel: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsoSettings {
    pub swarm_size: usize,
    pub max_iterations: usize,
    pub inertia: f64,
    pub cognitive_coeff: f64,
    pub social_coeff: f64,
    pub tolerance: f64,
    pub stall_iterations: usize,
}

impl Default for PsoSettings {
    fn default() -> Self {
        let d = SwarmConfig::new(vec![[0.0, 1.0]], 0);
        PsoSettings {
            swarm_size: d.swarm_size,
            max_iterations: d.max_iterations,
            inertia: d.inertia,
            cognitive_coeff: d.cognitive_coeff,
            social_coeff: d.social_coeff,
            tolerance: d.tolerance,
            stall_iterations: d.stall_iterations,
        }
    }
}

impl PsoSettings {
    pub fn swarm(&self, b: &SearchBox, seed: u64) -> SwarmConfig {
        SwarmConfig {
            swarm_size: self.swarm_size,
            max_iterations: self.max_iterations,
            inertia: self.inertia,
            cognitive_coeff: self.cognitive_coeff,
            social_coeff: self.social_coeff,
            search_box: vec![b.theta1, b.theta2, b.phi],
            seed,
            tolerance: self.tolerance,
            stall_iterations: self.stall_iterations,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub plant: PlantConfig,
    pub references: ReferenceSet,
    pub noilc_iterations: usize,
    pub noilc: NoilcSettings,
    pub identification: IdentSettings,
    pub pso: PsoSettings,
    pub methods: Vec<Method>,
    pub output_dir: PathBuf,
    /// Master seed; every noise stream and swarm is derived from it, and it
    /// replaces `plant.seed` during a run.
    pub seed: u64,
}

impl ExperimentConfig {
    /// The shipped benchmark: surrogate servo, 20 Hz loop, three quintic
    /// moves, 7 trials with task changes at trials 4 and 6.
    pub fn default_benchmark() -> Result<Self> {
        let surrogate = ServoSurrogate::default();
        let design = LeadLagDesign::default();
        let d1 = 0.2;
        let seg = |name: &str, distance: f64, duration: f64| NamedSegment {
            name: name.into(),
            spec: QuinticSpec { distance, duration, start_position: 0.0, dwell_after: 0.05 },
        };
        let nominal_acc = surrogate.mass / (surrogate.motor_constant * surrogate.ts * surrogate.ts);
        Ok(ExperimentConfig {
            plant: PlantConfig {
                linear_plant: surrogate.linear_plant()?,
                controller: design.controller()?,
                saturation: Some(SaturationModel::new(70.0)?),
                noise_std_rel: 7.5e-6,
                noise_distance: d1,
                seed: 1,
            },
            references: ReferenceSet {
                segments: vec![seg("r1", d1, 0.2), seg("r2", 0.5 * d1, 0.12), seg("r3", 0.25 * d1, 0.07)],
                training: vec!["r1".into(), "r2".into(), "r3".into()],
                schedule: ["r1", "r1", "r1", "r2", "r2", "r3", "r3"].map(String::from).to_vec(),
            },
            noilc_iterations: 10,
            noilc: NoilcSettings { alpha: 1.0, eps_rel: 1e-3 },
            identification: IdentSettings {
                search_box: SearchBox {
                    theta1: [-1e4, 1e4],
                    theta2: [0.0, 10.0 * nominal_acc],
                    phi: [10.0, 500.0],
                },
                nominal_theta: [0.0, nominal_acc],
                white_noise_std_rel: 0.7,
            },
            pso: PsoSettings::default(),
            methods: Method::ALL.to_vec(),
            output_dir: PathBuf::from("out"),
            seed: 1,
        })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json { path: path.to_path_buf(), source })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn ts(&self) -> f64 {
        self.plant.ts()
    }

    pub fn i_max(&self) -> f64 {
        self.plant.saturation.map_or(70.0, |s| s.i_max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedSeeds {
    pub noilc: u64,
    pub noise_floor: u64,
    pub open_loop: u64,
    pub benchmark: u64,
    pub pso_proposed: u64,
    pub pso_classical: u64,
}

impl DerivedSeeds {
    pub fn new(seed: u64) -> Self {
        DerivedSeeds {
            noilc: derive_seed(seed, "noilc"),
            noise_floor: derive_seed(seed, "noise-floor"),
            open_loop: derive_seed(seed, "open-loop"),
            benchmark: derive_seed(seed, "benchmark"),
            pso_proposed: derive_seed(seed, "pso-proposed"),
            pso_classical: derive_seed(seed, "pso-classical"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoilcSummary {
    pub iterations: usize,
    pub alpha: f64,
    pub eps_rel: f64,
    /// `‖e‖₂` per trial; the last entry uses the learned `f_NOILC`.
    pub error_history: Vec<f64>,
    pub final_error: f64,
    pub final_error_over_noise_floor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    pub failure: Option<String>,
    pub fit: Option<FitReport>,
    /// BFILC only: the parameters applied in each trial, starting from theta0.
    pub theta_history: Vec<[f64; 2]>,
    /// `‖e‖₂ / d1` per trial; `None` where the trial did not run.
    pub trial_norms: Vec<Option<f64>>,
}

impl MethodReport {
    fn failed(method: Method, trials: usize, reason: String) -> Self {
        MethodReport { method, failure: Some(reason), fit: None, theta_history: Vec::new(), trial_norms: vec![None; trials] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedSignal {
    pub name: String,
    pub samples: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportSignals {
    pub references: Vec<NamedSignal>,
    pub training_reference: Vec<f64>,
    pub f_noilc: Option<Vec<f64>>,
    /// 1-based trial whose error traces are kept (the second task change).
    pub highlight_trial: usize,
    pub highlight_errors: Vec<NamedSignal>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub seed: u64,
    pub seeds: DerivedSeeds,
    pub ts: f64,
    pub normalization_distance: f64,
    /// Reference name per trial, in order.
    pub schedule: Vec<String>,
    /// 1-based trials at which the reference changes.
    pub task_changes: Vec<usize>,
    pub bfilc_theta0: [f64; 2],
    /// `‖e‖₂` over the training horizon with `r = 0`, `f = 0`.
    pub noise_floor: f64,
    pub noilc: Option<NoilcSummary>,
    pub methods: Vec<MethodReport>,
    pub signals: ReportSignals,
}

impl BenchmarkReport {
    pub fn method(&self, m: Method) -> Option<&MethodReport> {
        self.methods.iter().find(|r| r.method == m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text table of normalized error norms per trial.
    pub fn summary_table(&self) -> String {
        let mut out = format!("{:<6}{:<10}", "trial", "reference");
        for m in &self.methods {
            out += &format!("{:>24}", m.method.as_str());
        }
        out.push('\n');
        for (k, name) in self.schedule.iter().enumerate() {
            out += &format!("{:<6}{:<10}", k + 1, name);
            for m in &self.methods {
                match m.trial_norms.get(k).copied().flatten() {
                    Some(v) => out += &format!("{v:>24.6e}"),
                    None => out += &format!("{:>24}", "failed"),
                }
            }
            out.push('\n');
        }
        for m in &self.methods {
            if let Some(fit) = &m.fit {
                out += &format!(
                    "{}: theta = [{:.6e}, {:.6e}], phi = {:.4} A, cost = {:.4e}\n",
                    m.method, fit.theta[0], fit.theta[1], fit.phi, fit.final_cost
                );
            }
            if let Some(reason) = &m.failure {
                out += &format!("{}: FAILED: {reason}\n", m.method);
            }
        }
        out
    }
}

/// Wall-clock information, kept out of the report so the report stays
/// reproducible byte for byte.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RunMetadata {
    pub started_unix_s: f64,
    pub elapsed_s: f64,
    pub method_elapsed_s: BTreeMap<String, f64>,
    pub version: String,
    pub threads: usize,
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub methods: Option<Vec<Method>>,
    pub quiet: bool,
    /// Run the methods on separate threads. Results are identical because
    /// every method draws from its own seeded streams.
    pub parallel: bool,
    /// Skip writing files (the report is still returned).
    pub dry_run: bool,
}

impl RunOptions {
    pub fn apply(&self, cfg: &ExperimentConfig) -> ExperimentConfig {
        let mut cfg = cfg.clone();
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(methods) = &self.methods {
            cfg.methods = methods.clone();
        }
        if let Some(dir) = &self.output_dir {
            cfg.output_dir = dir.clone();
        } else if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
            if !dir.is_empty() {
                cfg.output_dir = PathBuf::from(dir);
            }
        }
        cfg.plant.seed = cfg.seed;
        cfg
    }
}

pub struct RunOutcome {
    pub report: BenchmarkReport,
    pub metadata: RunMetadata,
    pub trials: BTreeMap<Method, Vec<TrialRecord>>,
}

impl RunOutcome {
    pub fn any_failed(&self) -> bool {
        self.report.methods.iter().any(|m| m.failure.is_some())
    }
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    seeds: DerivedSeeds,
    trial_refs: Vec<(String, Vec<f64>)>,
    sp: TransferFunction,
    d1: f64,
    r_train: Vec<f64>,
}

struct MethodRun {
    report: MethodReport,
    trials: Vec<TrialRecord>,
    noilc: Option<(NoilcSummary, Vec<f64>)>,
}

impl Context<'_> {
    fn plant(&self, seed: u64) -> PlantConfig {
        self.cfg.plant.with_seed(seed)
    }

    /// Applies a fixed feedforward law to every scheduled trial.
    fn run_fixed(&self, method: Method, fit: FitReport) -> MethodRun {
        let plant = self.plant(self.seeds.benchmark);
        let mut trials = Vec::new();
        let mut report = MethodReport {
            method,
            failure: None,
            fit: Some(fit.clone()),
            theta_history: Vec::new(),
            trial_norms: vec![None; self.trial_refs.len()],
        };
        for (k, (_, r)) in self.trial_refs.iter().enumerate() {
            let res = wiener_ff(&fit.params(), r).and_then(|f| run_trial(&plant, r, &f, k));
            match res {
                Ok(t) => {
                    report.trial_norms[k] = Some(t.error_norm() / self.d1);
                    trials.push(t);
                }
                Err(e) => {
                    report.failure = Some(format!("trial {}: {e}", k + 1));
                    break;
                }
            }
        }
        MethodRun { report, trials, noilc: None }
    }

    fn run_bfilc(&self) -> MethodRun {
        let plant = self.plant(self.seeds.benchmark);
        let mut theta = [0.0, 0.0];
        let mut report = MethodReport {
            method: Method::BfilcLinear,
            failure: None,
            fit: None,
            theta_history: Vec::new(),
            trial_norms: vec![None; self.trial_refs.len()],
        };
        let mut trials = Vec::new();
        for (k, (_, r)) in self.trial_refs.iter().enumerate() {
            report.theta_history.push(theta);
            let basis = BasisMatrix::from_reference(r);
            let step = run_trial(&plant, r, &basis.feedforward(theta), k).and_then(|t| {
                let next = bfilc_update(&basis, &self.sp.lift(r.len()), &t, theta, &Weight::Identity)?;
                Ok((t, next))
            });
            match step {
                Ok((t, next)) => {
                    report.trial_norms[k] = Some(t.error_norm() / self.d1);
                    trials.push(t);
                    theta = next;
                }
                Err(e) => {
                    report.failure = Some(format!("trial {}: {e}", k + 1));
                    break;
                }
            }
        }
        MethodRun { report, trials, noilc: None }
    }

    fn run_proposed(&self, noise_floor: f64) -> MethodRun {
        let cfg = self.cfg;
        let plant = self.plant(self.seeds.noilc);
        let trained = build_training_dataset(&plant, &self.r_train, cfg.noilc_iterations, cfg.noilc);
        let (data, outcome) = match trained {
            Ok(v) => v,
            Err(e) => return self.failed(Method::Proposed, format!("NOILC training: {e}")),
        };
        let final_error = *outcome.error_history.last().unwrap();
        let summary = NoilcSummary {
            iterations: cfg.noilc_iterations,
            alpha: cfg.noilc.alpha,
            eps_rel: cfg.noilc.eps_rel,
            error_history: outcome.error_history.clone(),
            final_error,
            final_error_over_noise_floor: final_error / noise_floor,
        };
        let swarm = cfg.pso.swarm(&cfg.identification.search_box, self.seeds.pso_proposed);
        let mut run = match fit_proposed(&data, &swarm) {
            Ok(fit) => self.run_fixed(Method::Proposed, fit),
            Err(e) => self.failed(Method::Proposed, format!("identification: {e}")),
        };
        run.noilc = Some((summary, outcome.f));
        run
    }

    fn run_classical(&self) -> MethodRun {
        let cfg = self.cfg;
        let plant = self.plant(self.seeds.open_loop);
        let std = cfg.identification.white_noise_std_rel * cfg.i_max();
        let data = build_open_loop_dataset(&plant, self.r_train.len(), std);
        let swarm = cfg.pso.swarm(&cfg.identification.search_box, self.seeds.pso_classical);
        match fit_classical(&data, &swarm) {
            Ok(fit) => self.run_fixed(Method::ClassicalHammerstein, fit),
            Err(e) => self.failed(Method::ClassicalHammerstein, format!("identification: {e}")),
        }
    }

    fn failed(&self, method: Method, reason: String) -> MethodRun {
        MethodRun { report: MethodReport::failed(method, self.trial_refs.len(), reason), trials: Vec::new(), noilc: None }
    }

    fn run(&self, method: Method, noise_floor: f64) -> MethodRun {
        match method {
            Method::BfilcLinear => self.run_bfilc(),
            Method::ClassicalHammerstein => self.run_classical(),
            Method::Proposed => self.run_proposed(noise_floor),
        }
    }
}

/// Runs the benchmark described by `cfg` after applying `opts`. Module
/// failures inside a method are recorded in that method's column; errors
/// returned here mean the configuration itself is unusable.
pub fn cmd_run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let started = SystemTime::now();
    let clock = Instant::now();
    let cfg = opts.apply(cfg);
    let validation = cmd_validate(&cfg);
    if validation.has_failures() {
        return Err(Error::Config(format!("configuration failed validation:\n{validation}")));
    }

    let ts = cfg.ts();
    let seeds = DerivedSeeds::new(cfg.seed);
    let refs = &cfg.references;
    let trial_refs = (0..refs.schedule.len())
        .map(|k| refs.trial_reference(k, ts))
        .collect::<Result<Vec<_>>>()?;
    let ctx = Context {
        cfg: &cfg,
        seeds: seeds.clone(),
        trial_refs,
        sp: process_sensitivity(&cfg.plant.linear_plant, &cfg.plant.controller)?,
        d1: refs.normalization_distance()?,
        r_train: concat_references(refs, ts)?,
    };

    let zeros = vec![0.0; ctx.r_train.len()];
    let noise_floor = run_trial(&ctx.plant(seeds.noise_floor), &zeros, &zeros, 0)?.error_norm();

    let mut methods = cfg.methods.clone();
    methods.sort();
    methods.dedup();
    let mut elapsed = BTreeMap::new();
    let runs: Vec<(Method, MethodRun, f64)> = if opts.parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> = methods
                .iter()
                .map(|&m| {
                    let ctx = &ctx;
                    s.spawn(move || {
                        let t = Instant::now();
                        let run = ctx.run(m, noise_floor);
                        (m, run, t.elapsed().as_secs_f64())
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("method thread panicked")).collect()
        })
    } else {
        methods
            .iter()
            .map(|&m| {
                let t = Instant::now();
                let run = ctx.run(m, noise_floor);
                (m, run, t.elapsed().as_secs_f64())
            })
            .collect()
    };

    let mut reports = Vec::new();
    let mut trials = BTreeMap::new();
    let mut noilc = None;
    let mut f_noilc = None;
    for (m, run, secs) in runs {
        elapsed.insert(m.as_str().to_string(), secs);
        if let Some((summary, f)) = run.noilc {
            noilc = Some(summary);
            f_noilc = Some(f);
        }
        reports.push(run.report);
        trials.insert(m, run.trials);
    }

    let highlight_trial = refs.task_changes().get(1).map_or(refs.schedule.len(), |&k| k + 1);
    let highlight_errors = trials
        .iter()
        .filter_map(|(m, ts)| {
            ts.get(highlight_trial - 1)
                .map(|t| NamedSignal { name: m.as_str().into(), samples: t.e.clone() })
        })
        .collect();
    let references = refs
        .segments
        .iter()
        .map(|s| Ok(NamedSignal { name: s.name.clone(), samples: quintic(&s.spec, ts)? }))
        .collect::<Result<Vec<_>>>()?;

    let report = BenchmarkReport {
        seed: cfg.seed,
        seeds,
        ts,
        normalization_distance: ctx.d1,
        schedule: refs.schedule.clone(),
        task_changes: refs.task_changes().iter().map(|k| k + 1).collect(),
        bfilc_theta0: [0.0, 0.0],
        noise_floor,
        noilc,
        methods: reports,
        signals: ReportSignals {
            references,
            training_reference: ctx.r_train.clone(),
            f_noilc,
            highlight_trial,
            highlight_errors,
        },
    };
    let metadata = RunMetadata {
        started_unix_s: started.duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64()),
        elapsed_s: clock.elapsed().as_secs_f64(),
        method_elapsed_s: elapsed,
        version: env!("CARGO_PKG_VERSION").into(),
        threads: rayon::current_num_threads(),
    };
    let outcome = RunOutcome { report, metadata, trials };
    if !opts.dry_run {
        write_run_outputs(&cfg.output_dir, &outcome, ts)?;
    }
    Ok(outcome)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_run_outputs(dir: &Path, out: &RunOutcome, ts: f64) -> Result<()> {
    let trial_dir = dir.join("trials");
    create_dir(&trial_dir)?;
    write_text(&dir.join("report.json"), &out.report.to_json())?;
    write_text(
        &dir.join("run_metadata.json"),
        &serde_json::to_string_pretty(&out.metadata).expect("metadata serializes"),
    )?;
    write_text(&dir.join("summary.txt"), &out.report.summary_table())?;
    write_norms_csv(&dir.join("summary.csv"), &out.report)?;
    for (m, trials) in &out.trials {
        for t in trials {
            t.write_csv(&trial_dir.join(format!("{}_trial{}.csv", m.as_str(), t.trial_index + 1)), ts)?;
        }
    }
    if let Some(noilc) = &out.report.noilc {
        let mut w = csv::Writer::from_path(dir.join("noilc_history.csv"))?;
        w.write_record(["iteration", "error_norm"])?;
        for (j, e) in noilc.error_history.iter().enumerate() {
            w.write_record([j.to_string(), fmt_f64(*e)])?;
        }
        w.flush().map_err(|e| Error::io(dir, e))?;
    }
    for m in &out.report.methods {
        if let Some(fit) = &m.fit {
            let mut w = csv::Writer::from_path(dir.join(format!("pso_trace_{}.csv", m.method.as_str())))?;
            w.write_record(["iteration", "best_cost"])?;
            for (i, c) in fit.cost_history.iter().enumerate() {
                w.write_record([i.to_string(), fmt_f64(*c)])?;
            }
            w.flush().map_err(|e| Error::io(dir, e))?;
        }
    }
    Ok(())
}

fn write_norms_csv(path: &Path, report: &BenchmarkReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["trial".to_string(), "reference".to_string()];
    header.extend(report.methods.iter().map(|m| m.method.as_str().to_string()));
    w.write_record(&header)?;
    for (k, name) in report.schedule.iter().enumerate() {
        let mut row = vec![(k + 1).to_string(), name.clone()];
        row.extend(
            report
                .methods
                .iter()
                .map(|m| m.trial_norms.get(k).copied().flatten().map(fmt_f64).unwrap_or_default()),
        );
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Warn,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    fn push(&mut self, name: &str, status: CheckStatus, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), status, detail: detail.into() });
    }

    fn result<T>(&mut self, name: &str, r: Result<T>, ok: impl FnOnce(&T) -> String) -> Option<T> {
        match r {
            Ok(v) => {
                let detail = ok(&v);
                self.push(name, CheckStatus::Pass, detail);
                Some(v)
            }
            Err(e) => {
                self.push(name, CheckStatus::Fail, e.to_string());
                None
            }
        }
    }

    pub fn has_failures(&self) -> bool {
        self.checks.iter().any(|c| c.status == CheckStatus::Fail)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.status == CheckStatus::Warn)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let tag = match c.status {
                CheckStatus::Pass => "PASS",
                CheckStatus::Warn => "WARN",
                CheckStatus::Fail => "FAIL",
            };
            writeln!(f, "[{tag}] {}: {}", c.name, c.detail)?;
        }
        Ok(())
    }
}

pub fn cmd_validate(cfg: &ExperimentConfig) -> ValidationReport {
    let mut v = ValidationReport::default();
    let ts = cfg.ts();

    v.result("loop structure", cfg.plant.check_loop(), |_| "causal, no algebraic loop".into());
    if !cfg.plant.linear_plant.is_strictly_proper() {
        v.push("plant properness", CheckStatus::Warn, "plant has direct feedthrough; the loop relies on a strictly proper controller");
    }
    v.result("closed-loop stability", cfg.plant.check_stability(), |_| "all closed-loop poles inside the unit circle".into());

    let refs = &cfg.references;
    let segs_ok = refs
        .segments
        .iter()
        .map(|s| s.spec.sample_counts(ts).map_err(|e| Error::Config(format!("{}: {e}", s.name))))
        .collect::<Result<Vec<_>>>();
    v.result("reference sampling", segs_ok, |_| format!("{} segments on the {ts} s grid", refs.segments.len()));
    let schedule_ok = if refs.schedule.is_empty() {
        Err(Error::Config("schedule is empty".into()))
    } else {
        refs.schedule.iter().try_for_each(|n| refs.segment(n).map(|_| ()))
    };
    v.result("schedule", schedule_ok, |_| format!("{} trials, task changes at {:?}", refs.schedule.len(), refs.task_changes().iter().map(|k| k + 1).collect::<Vec<_>>()));
    let r_train = v.result("training reference continuity", concat_references(refs, ts), |r| format!("{} samples", r.len()));

    if cfg.methods.is_empty() {
        v.push("methods", CheckStatus::Fail, "no method selected");
    } else {
        v.push("methods", CheckStatus::Pass, cfg.methods.iter().map(|m| m.as_str()).collect::<Vec<_>>().join(", "));
    }
    if cfg.noilc_iterations == 0 {
        v.push("noilc iterations", CheckStatus::Fail, "at least one iteration is required");
    }
    let n = &cfg.noilc;
    if !(n.alpha > 0.0 && n.alpha <= 1.0 && n.eps_rel >= 0.0) {
        v.push("noilc settings", CheckStatus::Fail, format!("alpha must lie in (0, 1] and eps_rel >= 0, got {n:?}"));
    }
    let swarm = cfg.pso.swarm(&cfg.identification.search_box, 0);
    v.result("pso settings", swarm.check(), |_| "search box and swarm are well formed".into());

    if let Some(r_train) = r_train {
        // excitation: training accelerations must cover every benchmark move
        let train_acc = peak_sampled_acceleration(&r_train, ts);
        let mut worst = 0.0f64;
        for s in &refs.segments {
            if let Ok(r) = quintic(&s.spec, ts) {
                worst = worst.max(peak_sampled_acceleration(&r, ts));
            }
        }
        let status = if train_acc >= worst * (1.0 - 1e-9) { CheckStatus::Pass } else { CheckStatus::Fail };
        v.push(
            "excitation coverage",
            status,
            format!("training peak acceleration {train_acc:.4} m/s^2 vs benchmark peak {worst:.4} m/s^2"),
        );

        let demand = rigid_body_ff(cfg.identification.nominal_theta, &r_train)
            .iter()
            .fold(0.0f64, |m, x| m.max(x.abs()));
        let i_max = cfg.i_max();
        if demand >= i_max {
            v.push(
                "nominal feedforward domain",
                CheckStatus::Fail,
                format!("peak nominal demand {demand:.2} A is beyond the saturation level {i_max} A"),
            );
        } else {
            v.push(
                "nominal feedforward domain",
                CheckStatus::Pass,
                format!("peak nominal demand {demand:.2} A < {i_max} A"),
            );
        }
        let phi_hi = cfg.identification.search_box.phi[1];
        if phi_hi <= demand {
            v.push(
                "phi search box",
                CheckStatus::Warn,
                format!("upper bound {phi_hi} A is below the peak demand {demand:.2} A; initial particles fall outside the atanh domain"),
            );
        }
        if cfg.plant.saturation.is_some() && demand < 0.1 * i_max {
            v.push(
                "saturation excitation",
                CheckStatus::Warn,
                format!("peak demand {demand:.2} A stays below 10% of i_max; phi will be poorly identifiable"),
            );
        }
    }
    v
}

// ---------------------------------------------------------------------------
// Figure export

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExportManifest {
    pub files: Vec<String>,
    pub skipped: Vec<SkippedBundle>,
    /// Pearson correlation of `f_NOILC` with the fitted proposed feedforward.
    pub fnoilc_vs_fitted_correlation: Option<f64>,
    /// Normalized cross-correlation peak of `f_NOILC` with `Δ²r`.
    pub fnoilc_vs_acceleration_xcorr: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedBundle {
    pub bundle: String,
    pub reason: String,
}

fn cell(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Writes columns of possibly different lengths, padding with empty cells.
fn write_columns(path: &Path, header: &[String], ts: f64, cols: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut h = vec!["t".to_string()];
    h.extend_from_slice(header);
    w.write_record(&h)?;
    let rows = cols.iter().map(Vec::len).max().unwrap_or(0);
    for k in 0..rows {
        let mut row = vec![fmt_f64(k as f64 * ts)];
        row.extend(cols.iter().map(|c| cell(c.get(k).copied())));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn load_report(path: &Path) -> Result<serde_json::Value> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path: path.to_path_buf(), source })
}

fn field<T: serde::de::DeserializeOwned>(v: &serde_json::Value, pointer: &str) -> std::result::Result<T, String> {
    let x = v.pointer(pointer).ok_or_else(|| format!("missing field {pointer}"))?;
    if x.is_null() {
        return Err(format!("field {pointer} is null"));
    }
    serde_json::from_value(x.clone()).map_err(|e| format!("field {pointer}: {e}"))
}

/// Plot-ready CSVs from a saved report. Bundles whose inputs are missing
/// are listed in the manifest instead of failing the export.
pub fn cmd_export_figures(report_path: &Path, out_dir: &Path) -> Result<ExportManifest> {
    let report = load_report(report_path)?;
    create_dir(out_dir)?;
    let mut manifest = ExportManifest::default();
    let skip = |m: &mut ExportManifest, bundle: &str, reason: String| {
        m.skipped.push(SkippedBundle { bundle: bundle.into(), reason });
    };

    let ts: f64 = field(&report, "/ts").unwrap_or(1.0);
    let d1: std::result::Result<f64, String> = field(&report, "/normalization_distance");

    // references, normalized by d1
    match (field::<Vec<NamedSignal>>(&report, "/signals/references"), d1.clone()) {
        (Ok(refs), Ok(d1)) => {
            let header: Vec<String> = refs.iter().map(|s| s.name.clone()).collect();
            let cols: Vec<Vec<f64>> = refs.iter().map(|s| s.samples.iter().map(|v| v / d1).collect()).collect();
            write_columns(&out_dir.join("fig5_references.csv"), &header, ts, &cols)?;
            manifest.files.push("fig5_references.csv".into());
        }
        (Err(e), _) | (_, Err(e)) => skip(&mut manifest, "fig5_references", e),
    }

    // f_NOILC against the fitted Wiener feedforward and the scaled acceleration
    let proposed_fit = report
        .get("methods")
        .and_then(|m| m.as_array())
        .and_then(|ms| ms.iter().find(|m| m.get("method").and_then(|x| x.as_str()) == Some("proposed")))
        .ok_or_else(|| "no proposed method in report".to_string())
        .and_then(|m| field::<FitReport>(m, "/fit"));
    let f_noilc: std::result::Result<Vec<f64>, String> = field(&report, "/signals/f_noilc");
    let r_train: std::result::Result<Vec<f64>, String> = field(&report, "/signals/training_reference");
    match (&f_noilc, &r_train, &proposed_fit) {
        (Ok(f), Ok(r), Ok(fit)) => {
            let fitted = wiener_ff(&fit.params(), r)?;
            let acc = BasisMatrix::from_reference(r).acceleration().to_vec();
            let scale = f.iter().zip(&acc).map(|(a, b)| a * b).sum::<f64>() / acc.iter().map(|b| b * b).sum::<f64>();
            let peak = f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let norm_by = |v: &[f64]| v.iter().map(|x| x / peak).collect::<Vec<_>>();
            let cols = vec![
                r.iter().map(|v| v / d1.clone().unwrap_or(1.0)).collect(),
                norm_by(f),
                norm_by(&fitted),
                norm_by(&acc.iter().map(|a| a * scale).collect::<Vec<_>>()),
            ];
            let header = ["r_train", "f_noilc", "f_fitted", "accel_scaled"].map(String::from);
            write_columns(&out_dir.join("fig6_feedforward.csv"), &header, ts, &cols)?;
            manifest.files.push("fig6_feedforward.csv".into());
            manifest.fnoilc_vs_fitted_correlation = Some(correlation(f, &fitted));
            manifest.fnoilc_vs_acceleration_xcorr = Some(normalized_xcorr_peak(f, &acc, 10));
        }
        _ => {
            let reason = [f_noilc.err(), r_train.err(), proposed_fit.err()].into_iter().flatten().collect::<Vec<_>>().join("; ");
            skip(&mut manifest, "fig6_feedforward", reason);
        }
    }

    // error traces of the highlighted trial
    match (field::<Vec<NamedSignal>>(&report, "/signals/highlight_errors"), d1.clone()) {
        (Ok(errs), Ok(d1)) if !errs.is_empty() => {
            let header: Vec<String> = errs.iter().map(|s| format!("e_{}", s.name)).collect();
            let cols: Vec<Vec<f64>> = errs.iter().map(|s| s.samples.iter().map(|v| v / d1).collect()).collect();
            write_columns(&out_dir.join("fig6_trial_errors.csv"), &header, ts, &cols)?;
            manifest.files.push("fig6_trial_errors.csv".into());
        }
        (Ok(_), Ok(_)) => skip(&mut manifest, "fig6_trial_errors", "no error traces in report".into()),
        (Err(e), _) | (_, Err(e)) => skip(&mut manifest, "fig6_trial_errors", e),
    }

    // per-trial norms
    match (field::<Vec<String>>(&report, "/schedule"), field::<Vec<MethodReport>>(&report, "/methods")) {
        (Ok(schedule), Ok(methods)) => {
            let path = out_dir.join("fig7_error_norms.csv");
            let mut w = csv::Writer::from_path(&path)?;
            let mut h = vec!["trial".to_string(), "reference".to_string()];
            h.extend(methods.iter().map(|m| m.method.as_str().to_string()));
            w.write_record(&h)?;
            for (k, name) in schedule.iter().enumerate() {
                let mut row = vec![(k + 1).to_string(), name.clone()];
                row.extend(methods.iter().map(|m| cell(m.trial_norms.get(k).copied().flatten())));
                w.write_record(&row)?;
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
            manifest.files.push("fig7_error_norms.csv".into());
        }
        (Err(e), _) | (_, Err(e)) => skip(&mut manifest, "fig7_error_norms", e),
    }

    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_text(&out_dir.join("manifest.json"), &text)?;
    Ok(manifest)
}

/// Relative norm helper for reports and tests.
pub fn relative_norm(a: &[f64], reference: &[f64]) -> f64 {
    norm(a) / norm(reference)
}
