use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hammerstein_ilc::experiment::{
    cmd_export_figures, cmd_run, cmd_validate, load_report, ExperimentConfig, Method, RunOptions, OUTPUT_DIR_ENV,
};
use hammerstein_ilc::Error;

const EXIT_VALIDATION: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(version, about = "Hammerstein feedforward benchmark: NOILC, identification and trial runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output directory (overrides the config file)
    #[arg(long, global = true, env = OUTPUT_DIR_ENV)]
    output_dir: Option<PathBuf>,

    /// Master seed (overrides the config file)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Comma-separated subset of bfilc_linear, classical_hammerstein, proposed
    #[arg(long, global = true, value_delimiter = ',')]
    methods: Option<Vec<String>>,

    /// Suppress the summary table
    #[arg(long, short, global = true)]
    quiet: bool,

    /// Run the methods concurrently (results are identical)
    #[arg(long, global = true)]
    parallel: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full benchmark and write the report bundle
    Run { config: PathBuf },
    /// Check a config without running it
    Validate { config: PathBuf },
    /// Turn a saved report.json into plot-ready CSV files
    ExportFigures { report: PathBuf },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Json { .. } | Error::MalformedSystem(_) | Error::Unstable { .. } => EXIT_VALIDATION,
        _ => EXIT_RUNTIME,
    }
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_code(&e))
}

/// Unreadable or unparsable inputs count as validation failures.
fn bad_input(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(EXIT_VALIDATION)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let methods = match cli.methods.as_ref().map(|ms| ms.iter().map(|m| m.parse::<Method>()).collect()) {
        Some(Err(e)) => return fail(e),
        Some(Ok(ms)) => Some(ms),
        None => None,
    };
    let opts = RunOptions {
        output_dir: cli.output_dir.clone(),
        seed: cli.seed,
        methods,
        quiet: cli.quiet,
        parallel: cli.parallel,
        dry_run: false,
    };

    match cli.command {
        Command::Validate { config } => {
            let cfg = match ExperimentConfig::from_path(&config) {
                Ok(c) => opts.apply(&c),
                Err(e) => return bad_input(e),
            };
            let report = cmd_validate(&cfg);
            print!("{report}");
            if report.has_failures() {
                ExitCode::from(EXIT_VALIDATION)
            } else {
                ExitCode::SUCCESS
            }
        }
        Command::Run { config } => {
            let cfg = match ExperimentConfig::from_path(&config) {
                Ok(c) => c,
                Err(e) => return bad_input(e),
            };
            match cmd_run(&cfg, &opts) {
                Ok(out) => {
                    if !cli.quiet {
                        print!("{}", out.report.summary_table());
                        println!("outputs in {}", opts.apply(&cfg).output_dir.display());
                    }
                    if out.any_failed() {
                        ExitCode::from(EXIT_RUNTIME)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => fail(e),
            }
        }
        Command::ExportFigures { report } => {
            if let Err(e) = load_report(&report) {
                return bad_input(e);
            }
            let dir = cli
                .output_dir
                .unwrap_or_else(|| report.parent().map(|p| p.join("figures")).unwrap_or_else(|| PathBuf::from("figures")));
            match cmd_export_figures(&report, &dir) {
                Ok(m) => {
                    if !cli.quiet {
                        for f in &m.files {
                            println!("wrote {}", dir.join(f).display());
                        }
                        for s in &m.skipped {
                            println!("skipped {}: {}", s.bundle, s.reason);
                        }
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
    }
}
