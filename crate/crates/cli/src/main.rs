mod commands;
mod config;
mod manifest;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use incoherence::recon::experiment::ExperimentConfig;
use incoherence::sampling::SchemeConfig;
use incoherence::Error;

use manifest::{sha256_hex, Outputs, RunManifest, MANIFEST_SCHEMA};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_IO: u8 = 1;

#[derive(Parser)]
#[command(name = "incoherence", version, about = "Fourier-wavelet coherence and multilevel sampling tools")]
struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Caps the worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Turns warnings (boundary maxima, samples outside the mask) into errors.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Coherence profile of a basis along an ordering.
    Coherence,
    /// Exact sublevel-set counts of a lattice ordering.
    Counts,
    /// Leading elements of an ordering.
    Ordering,
    /// Multilevel sampling mask.
    Pattern,
    /// Basis pursuit reconstructions of a phantom.
    Reconstruct,
    /// Runs the invariant checks.
    Verify,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Coherence => "coherence",
            Command::Counts => "counts",
            Command::Ordering => "ordering",
            Command::Pattern => "pattern",
            Command::Reconstruct => "reconstruct",
            Command::Verify => "verify",
        }
    }
}

enum Failure {
    Config(String),
    Numerical(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(e) => Failure::Io(e.to_string()),
            e if e.is_config_error() => Failure::Config(e.to_string()),
            e => Failure::Numerical(e.to_string()),
        }
    }
}

struct Loaded<T> {
    value: T,
    digest: String,
}

fn load<T: DeserializeOwned>(path: Option<&Path>) -> Result<Loaded<T>, Failure> {
    let path = path.ok_or_else(|| Failure::Config("--config is required".into()))?;
    let bytes = std::fs::read(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let value = serde_json::from_slice(&bytes).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    Ok(Loaded { value, digest: sha256_hex(&bytes) })
}

struct Run {
    outputs: Outputs,
    config: serde_json::Value,
    config_sha256: Option<String>,
    seed: Option<u64>,
    /// Set when outputs are written but the command still failed.
    failure: Option<String>,
}

fn value<T: Serialize>(v: &T) -> Result<serde_json::Value, Failure> {
    serde_json::to_value(v).map_err(|e| Failure::Numerical(e.to_string()))
}

fn execute(cli: &Cli) -> Result<Run, Failure> {
    let cfg_path = cli.config.as_deref();
    let run = |outputs, config, digest, seed| Run { outputs, config, config_sha256: digest, seed, failure: None };
    Ok(match cli.command {
        Command::Coherence => {
            let c = load::<config::CoherenceConfig>(cfg_path)?;
            run(commands::coherence(&c.value, cli.strict)?, value(&c.value)?, Some(c.digest), None)
        }
        Command::Counts => {
            let c = load::<config::CountsConfig>(cfg_path)?;
            run(commands::counts(&c.value)?, value(&c.value)?, Some(c.digest), None)
        }
        Command::Ordering => {
            let c = load::<config::OrderingConfig>(cfg_path)?;
            run(commands::ordering(&c.value)?, value(&c.value)?, Some(c.digest), None)
        }
        Command::Pattern => {
            let mut c = load::<SchemeConfig>(cfg_path)?;
            if let Some(s) = cli.seed {
                c.value.seed = s;
            }
            let seed = c.value.seed;
            run(commands::pattern(&c.value, cli.strict)?, value(&c.value)?, Some(c.digest), Some(seed))
        }
        Command::Reconstruct => {
            let mut c = load::<ExperimentConfig>(cfg_path)?;
            if let Some(s) = cli.seed {
                c.value.seed = s;
            }
            c.value.validate()?;
            let (outputs, res) = commands::reconstruct(&c.value)?;
            let stalled: Vec<String> = res
                .runs
                .iter()
                .filter(|r| !r.result.converged)
                .map(|r| format!("{} (residual {:.3e})", r.result.label, r.result.final_residual))
                .collect();
            for r in &res.runs {
                let r = &r.result;
                eprintln!(
                    "{}: {} samples, L1 error {:.4}, {} iterations, {:.1}s",
                    r.label, r.samples, r.l1_error, r.iterations, r.seconds
                );
            }
            let mut out = run(outputs, value(&c.value)?, Some(c.digest), Some(c.value.seed));
            if !stalled.is_empty() {
                out.failure = Some(format!("solver did not converge: {}", stalled.join(", ")));
            }
            out
        }
        Command::Verify => {
            let seed = cli.seed.unwrap_or(0);
            let checks = verify::run_all(seed);
            let mut outputs = Outputs::default();
            let text = serde_json::to_string_pretty(&checks).map_err(|e| Failure::Numerical(e.to_string()))?;
            outputs.add("verify.json", format!("{text}\n").into_bytes());
            for c in &checks {
                eprintln!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            let mut out = run(outputs, serde_json::Value::Null, None, Some(seed));
            if !failed.is_empty() {
                out.failure = Some(format!("failed checks: {}", failed.join(", ")));
            }
            out
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(EXIT_CONFIG);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_IO);
        }
    }
    let run = match execute(&cli) {
        Ok(r) => r,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            return ExitCode::from(EXIT_NUMERICAL);
        }
        Err(Failure::Io(m)) => {
            eprintln!("i/o error: {m}");
            return ExitCode::from(EXIT_IO);
        }
    };
    let manifest = RunManifest {
        schema: MANIFEST_SCHEMA,
        command: cli.command.name().into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        seed: run.seed,
        strict: cli.strict,
        config_sha256: run.config_sha256,
        config: run.config,
        outputs: Vec::new(),
    };
    if let Err(e) = run.outputs.commit(&cli.out, manifest) {
        eprintln!("i/o error: {e}");
        return ExitCode::from(EXIT_IO);
    }
    match run.failure {
        Some(m) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(EXIT_NUMERICAL)
        }
        None => ExitCode::SUCCESS,
    }
}
