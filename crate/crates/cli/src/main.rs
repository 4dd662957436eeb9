use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use spinrecon::experiment::{self, ExperimentConfig, RecoveryBackend, ReportFormat, Scope, MEASUREMENT_FILE};
use spinrecon::forward::Fault;
use spinrecon::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_NOT_ADMISSIBLE: u8 = 3;
const EXIT_FLAGGED: u8 = 10;

#[derive(Parser)]
#[command(name = "spinrecon", version, about = "Synthetic motion-recovery experiments")]
struct Cli {
    /// Worker threads for the parallel stages.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Analytic,
    Fd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    Kinematics,
    Phantoms,
    Forward,
    Recovery,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    FlipH,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Generate phantom, trajectory and measurements.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Recover the motion from stored measurements.
    Recover {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to the measurement file in the output directory.
        #[arg(long)]
        measurements: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Defaults to the backend in the model config.
        #[arg(long, value_enum)]
        backend: Option<BackendArg>,
    },
    /// Run the invariant suites.
    Verify {
        #[arg(value_enum, default_value = "all")]
        scope: ScopeArg,
        /// Directory for the JSON report; printed to stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<FaultArg>,
    },
    /// Rebuild summary and per-step reports from a result file.
    Report {
        #[arg(long)]
        result: PathBuf,
        /// Defaults to the directory of the result file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "json,csv")]
        format: Vec<FormatArg>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Schema(_) | Error::Corrupt(_) | Error::Mismatch(_) | Error::Io { .. } => EXIT_INPUT,
        Error::NotAdmissible { .. } => EXIT_NOT_ADMISSIBLE,
        _ => EXIT_FAILURE,
    }
}

fn load(config: &Path, seed: Option<u64>) -> spinrecon::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> spinrecon::Result<u8> {
    if let Some(n) = cli.threads {
        experiment::configure_threads(n)?;
    }
    match cli.command {
        Command::Synth { config, out, seed } => {
            let cfg = load(&config, seed)?;
            let out = out.unwrap_or_else(|| cfg.output_dir());
            let manifest = experiment::synth(&cfg, &out)?;
            for a in &manifest.artifacts {
                println!("{} {} {}", a.sha256, a.name, out.join(&a.file).display());
            }
            Ok(0)
        }
        Command::Recover {
            config,
            measurements,
            out,
            seed,
            backend,
        } => {
            let cfg = load(&config, seed)?;
            let out = out.unwrap_or_else(|| cfg.output_dir());
            let measurements = measurements.unwrap_or_else(|| out.join(MEASUREMENT_FILE));
            let backend = match backend {
                Some(BackendArg::Analytic) => RecoveryBackend::Analytic,
                Some(BackendArg::Fd) => RecoveryBackend::Sampled,
                None => cfg.default_backend(),
            };
            let res = experiment::recover(&cfg, &measurements, backend, &out)?;
            let s = &res.report.summary;
            let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.3e}"));
            println!(
                "steps {} flagged {} max_omega_error {} equivalence_distance {} runtime {:.2}s",
                s.steps,
                s.flagged_steps,
                fmt(s.max_omega_error),
                fmt(s.equivalence_distance),
                res.runtime_seconds
            );
            Ok(if res.is_unique() { 0 } else { EXIT_FLAGGED })
        }
        Command::Verify {
            scope,
            out,
            inject_fault,
        } => {
            let scope = match scope {
                ScopeArg::Kinematics => Scope::Kinematics,
                ScopeArg::Phantoms => Scope::Phantoms,
                ScopeArg::Forward => Scope::Forward,
                ScopeArg::Recovery => Scope::Recovery,
                ScopeArg::All => Scope::All,
            };
            let fault = inject_fault.map(|FaultArg::FlipH| Fault::FlipDtHeight);
            let report = experiment::verify(scope, fault);
            for c in &report.checks {
                eprintln!("{}", c.line());
            }
            let json = experiment::to_json_string(&report);
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                    experiment::write_atomic(&dir.join("verify.json"), json.as_bytes())?;
                }
                None => print!("{json}"),
            }
            Ok(if report.passed { 0 } else { EXIT_FAILURE })
        }
        Command::Report { result, out, format } => {
            let out = out.unwrap_or_else(|| result.parent().map(Path::to_path_buf).unwrap_or_default());
            let formats: Vec<ReportFormat> = format
                .iter()
                .map(|f| match f {
                    FormatArg::Json => ReportFormat::Json,
                    FormatArg::Csv => ReportFormat::Csv,
                })
                .collect();
            let rec = experiment::report(&result, &out, &formats)?;
            println!(
                "steps {} flagged {} written to {}",
                rec.summary.steps,
                rec.summary.flagged_steps,
                out.display()
            );
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
