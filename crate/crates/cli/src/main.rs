//! `dpal`: run the reconstruction experiments, one-off attacks and release
//! audits from the command line.
//!
//! Exit status: 0 when every assertion passes, 1 when one fails, 2 on usage
//! errors, 3 on bad input or a resource guard.

mod audit;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;
use thiserror::Error;

use dpal_core::experiments::{single_lp_decode, ExperimentConfig, SingleLpDecode, EXPERIMENTS};
use dpal_core::io::{parse_release, read_json, DatabaseDocument, FormatError, QueryDocument};

use report::{to_value, Envelope};

/// Largest LP tableau (rows × columns) a one-off attack will build.
const TABLEAU_LIMIT: u128 = 50_000_000;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] dpal_core::Error),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("{0}")]
    Input(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl CliError {
    fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), message: e.to_string() }
    }
}

macro_rules! core_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Core(e.into())
            }
        }
    )*};
}
core_error!(dpal_core::attacks::AttackError, dpal_core::linalg::LinalgError, dpal_core::data::ConstructionError);

#[derive(Parser)]
#[command(name = "dpal", version, about = "Reconstruction attacks and lower-bound experiments for private query release")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Directory for JSON and CSV reports.
    #[arg(long, env = "DPAL_OUTPUT_DIR", default_value = "dpal-out")]
    output_dir: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Adds wall-clock timings; reports are otherwise byte-identical across runs.
    #[arg(long)]
    timings: bool,
}

#[derive(Args, Clone)]
struct ExperimentArgs {
    #[command(flatten)]
    common: Common,
    /// JSON file of config fields; the "experiment" key is optional here.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sets one config field, e.g. `--set wild_mode="adaptive"`; the value is
    /// parsed as JSON, falling back to a string.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    LpDecodeSweep(ExperimentArgs),
    MarginalAttributeAttack(ExperimentArgs),
    BlatantSmallUniverse(ExperimentArgs),
    PackingCertify(ExperimentArgs),
    EpsDeltaWitness(ExperimentArgs),
    MutualInfoSeparation(ExperimentArgs),
    RademacherTail(ExperimentArgs),
    ChiSquareTail(ExperimentArgs),
    HadamardSigma(ExperimentArgs),
    /// Runs a config file naming its experiment.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        config: PathBuf,
    },
    /// Prints the registered experiments with their default configs.
    List,
    #[command(subcommand)]
    Attack(Attack),
    /// Audits a release: decodes it and decides whether it leaks the database.
    ValidateRelease {
        #[command(flatten)]
        common: Common,
        /// Query document (counting, lipschitz or marginal).
        #[arg(long)]
        query: PathBuf,
        #[arg(long)]
        release: PathBuf,
        /// Attribute table for marginal releases; its hidden column is ignored.
        #[arg(long)]
        known: Option<PathBuf>,
        /// Assumed bound on the noise of non-wild answers.
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        /// Assumed fraction of wild answers.
        #[arg(long, default_value_t = 0.0)]
        gamma: f64,
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
        #[arg(long, default_value_t = 2000)]
        section_samples: usize,
    },
}

#[derive(Subcommand)]
enum Attack {
    /// LP decoding of a random ±1 counting query under bounded noise.
    LpDecode {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        gamma: f64,
        /// Size of the random histogram.
        #[arg(long, default_value_t = 64)]
        n: u64,
        #[arg(long, default_value_t = 1e3)]
        wild_magnitude: f64,
        #[arg(long, default_value_t = 2000)]
        section_samples: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(t) = std::env::var("DPAL_THREADS") {
        match t.parse::<usize>() {
            Ok(n) if n > 0 => {
                rayon::ThreadPoolBuilder::new().num_threads(n).build_global().expect("thread pool is configured once");
            }
            _ => {
                eprintln!("error: DPAL_THREADS must be a positive integer, got {t:?}");
                return ExitCode::from(2);
            }
        }
    }
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}

fn dispatch(cmd: Command) -> Result<bool, CliError> {
    let experiment = |name: &str, args: ExperimentArgs| -> Result<bool, CliError> {
        let mut cfg = ExperimentConfig::default_for(name).expect("subcommands match the registry");
        if let Some(path) = &args.config {
            let mut v: Value = read_json(path)?;
            match v.as_object_mut() {
                Some(map) => match map.get("experiment").and_then(Value::as_str) {
                    Some(n) if n != name => return Err(CliError::Input(format!("config names experiment {n:?}, not {name:?}"))),
                    _ => {
                        map.insert("experiment".into(), name.into());
                    }
                },
                None => return Err(CliError::Input("config must be a JSON object".into())),
            }
            cfg = parse_value(v)?;
        }
        cfg = apply_overrides(cfg, &args.overrides)?;
        run_config(cfg, &args.common)
    };
    match cmd {
        Command::LpDecodeSweep(a) => experiment("lp-decode-sweep", a),
        Command::MarginalAttributeAttack(a) => experiment("marginal-attribute-attack", a),
        Command::BlatantSmallUniverse(a) => experiment("blatant-small-universe", a),
        Command::PackingCertify(a) => experiment("packing-certify", a),
        Command::EpsDeltaWitness(a) => experiment("eps-delta-witness", a),
        Command::MutualInfoSeparation(a) => experiment("mutual-info-separation", a),
        Command::RademacherTail(a) => experiment("rademacher-tail", a),
        Command::ChiSquareTail(a) => experiment("chi-square-tail", a),
        Command::HadamardSigma(a) => experiment("hadamard-sigma", a),
        Command::Run { common, config } => {
            let cfg: ExperimentConfig = read_json(&config)?;
            run_config(cfg, &common)
        }
        Command::List => {
            for name in EXPERIMENTS {
                let cfg = ExperimentConfig::default_for(name).expect("registered");
                println!("{}", serde_json::to_string(&cfg).expect("configs serialize"));
            }
            Ok(true)
        }
        Command::Attack(Attack::LpDecode { common, d, k, alpha, gamma, n, wild_magnitude, section_samples }) => {
            let tableau = k as u128 * (d as u128 + 2 * k as u128);
            if tableau > TABLEAU_LIMIT {
                return Err(CliError::Input(format!("LP tableau would hold about {tableau} entries (limit {TABLEAU_LIMIT}); reduce --d or --k")));
            }
            let p = SingleLpDecode { d, k, n, alpha, gamma, wild_magnitude, section_samples, seed: common.seed.unwrap_or(0) };
            let start = Instant::now();
            let out = single_lp_decode(&p)?;
            let pass = out.result.success == Some(true);
            let env = Envelope {
                name: "attack-lp-decode",
                seed: p.seed,
                pass,
                config: to_value(&p),
                report: to_value(&out),
                elapsed_ms: common.timings.then(|| start.elapsed().as_secs_f64() * 1e3),
            };
            let csv = format!(
                "d,k,n,alpha,gamma,seed,l1_error,bound,success\n{},{},{},{},{},{},{},{},{}\n",
                d,
                k,
                n,
                alpha,
                gamma,
                p.seed,
                out.result.l1_error.unwrap_or(f64::NAN),
                out.result.bound_used,
                pass
            );
            finish(&env, &common.output_dir, Some(&csv))?;
            Ok(pass)
        }
        Command::ValidateRelease { common, query, release, known, alpha, gamma, tolerance, section_samples } => {
            if !(0.0..1.0).contains(&gamma) || alpha < 0.0 {
                return Err(CliError::Input("need alpha >= 0 and 0 <= gamma < 1".into()));
            }
            let q = read_text(&query).and_then(|t| Ok(QueryDocument::parse(&t).map_err(|e| located(&query, e))?.build()?))?;
            let rel = read_text(&release).and_then(|t| parse_release(&t).map_err(|e| located(&release, e)))?;
            let known = match known {
                Some(p) => {
                    let text = read_text(&p)?;
                    Some(DatabaseDocument::parse(&text).map_err(|e| located(&p, e))?.into_database()?)
                }
                None => None,
            };
            let seed = common.seed.unwrap_or(0);
            let profile = audit::Profile { alpha, gamma, tolerance, section_samples, seed };
            let start = Instant::now();
            let a = audit::audit(&q, &rel, known, profile)?;
            println!("{}", a.verdict);
            let config = serde_json::json!({
                "query": query.display().to_string(),
                "release": release.display().to_string(),
                "profile": to_value(&profile),
            });
            let env = Envelope {
                name: "validate-release",
                seed,
                pass: true,
                config,
                report: to_value(&a),
                elapsed_ms: common.timings.then(|| start.elapsed().as_secs_f64() * 1e3),
            };
            finish(&env, &common.output_dir, None)?;
            Ok(true)
        }
    }
}

fn run_config(mut cfg: ExperimentConfig, common: &Common) -> Result<bool, CliError> {
    if let Some(seed) = common.seed {
        cfg.set_seed(seed);
    }
    if let Some(trials) = common.trials {
        if trials == 0 {
            return Err(CliError::Input("--trials must be positive".into()));
        }
        cfg.set_trials(trials);
    }
    let cfg_value = to_value(&cfg);
    let seed = cfg_value.get("seed").and_then(Value::as_u64).unwrap_or(0);
    let start = Instant::now();
    let rep = cfg.run()?;
    let env = Envelope {
        name: cfg.name(),
        seed,
        pass: rep.pass,
        config: cfg_value,
        report: rep.report.clone(),
        elapsed_ms: common.timings.then(|| start.elapsed().as_secs_f64() * 1e3),
    };
    finish(&env, &common.output_dir, Some(&rep.csv))?;
    Ok(rep.pass)
}

fn finish(env: &Envelope<'_>, dir: &Path, csv: Option<&str>) -> Result<(), CliError> {
    let paths = env.write(dir, csv)?;
    let verdict = if env.pass { "PASS" } else { "FAIL" };
    eprintln!("{}: {verdict} -> {}", env.name, paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "));
    Ok(())
}

fn parse_value(v: Value) -> Result<ExperimentConfig, CliError> {
    serde_json::from_value(v).map_err(|e| CliError::Input(format!("malformed config: {e}")))
}

fn apply_overrides(cfg: ExperimentConfig, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    if overrides.is_empty() {
        return Ok(cfg);
    }
    let mut v = to_value(&cfg);
    for o in overrides {
        let (key, raw) = o.split_once('=').ok_or_else(|| CliError::Input(format!("--set expects KEY=VALUE, got {o:?}")))?;
        if key == "experiment" {
            return Err(CliError::Input("--set cannot change the experiment".into()));
        }
        let val = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        v[key] = val;
    }
    parse_value(v)
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn located(path: &Path, e: FormatError) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}
