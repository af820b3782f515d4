//! The `rkl` command line.
//!
//! Exit codes: 0 success, 1 numerical or verification failure, 2 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use crate::bessel::{self, BesselOrder, EvalResult};
use crate::error::{Error, Result};
use crate::kernels::{self, KernelFamily};
use crate::schrodinger;
use crate::verify::{self, LatticeConfig, OperatorConfig, RunOutputs, SuiteSelection};
use crate::weights::WeightFamily;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "rkl", version, about = "Bessel resolvent kernels and Riesz multiplier estimates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate one quantity and print `value +- error`.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Run a verification suite and write reports.
    Verify(VerifyArgs),
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Bessel function J_nu(x).
    BesselJ(OrderArg),
    /// Modified Bessel function I_nu(x).
    BesselI(OrderArg),
    /// Modified Bessel function K_nu(x).
    BesselK(OrderArg),
    /// Kernel S_j^n at fixed t (t in (0, 1/2]) or integrated over t.
    Kernel(KernelArgs),
    /// g(lambda) = lambda^{-1/2} arctan(lambda^{-1/2} / 2).
    SubordG {
        #[arg(long, allow_negative_numbers = true)]
        lambda: f64,
    },
    /// The heat-kernel subordination weight psi_t(zeta).
    Psi {
        #[arg(long, allow_negative_numbers = true)]
        t: f64,
        #[arg(long, allow_negative_numbers = true)]
        zeta: f64,
    },
}

#[derive(Debug, Args)]
pub struct OrderArg {
    #[arg(long, allow_negative_numbers = true)]
    pub nu: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub x: f64,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    /// m0 or m1.
    #[arg(long, default_value = "m1")]
    pub family: KernelFamily,
    /// Homogeneous derivative order.
    #[arg(long, default_value_t = 0)]
    pub n: usize,
    /// Subordination variable; omit for the t-integrated kernel.
    #[arg(long, allow_negative_numbers = true)]
    pub t: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub u: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub v: f64,
    /// Tolerance of the t-integral.
    #[arg(long, default_value_t = kernels::DEFAULT_KERNEL_TOL)]
    pub tol: f64,
}

#[derive(Debug, Args, Default)]
pub struct VerifyArgs {
    /// bessel, kernels, estimates, operators or all.
    #[arg(long)]
    pub suite: Option<SuiteSelection>,
    /// Output directory.
    #[arg(long, env = "RKL_OUT_DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    pub parallel: Option<usize>,
    /// Flat key=value file; flags given here take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `default` or `quick` (coarse lattices, small grids).
    #[arg(long)]
    pub preset: Option<String>,
    /// Lattice or operator parameter override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Weight family for the multiplier sweep, repeatable; replaces the
    /// registered set.
    #[arg(long = "weight", value_name = "ID")]
    pub weights: Vec<String>,
    /// Seed for a random translation of the sample lattices; off by default.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Fully resolved settings of a verification run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub suite: SuiteSelection,
    pub lattice: LatticeConfig,
    pub operators: OperatorConfig,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub parallel: usize,
}

impl RunConfig {
    /// Hash of everything that affects the numbers (not the output
    /// directory or the thread count).
    pub fn hash(&self) -> Result<String> {
        verify::config_hash(self)
    }
}

fn default_parallelism() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Parses a flat `key=value` file; `#` starts a comment line.
pub fn parse_config_file(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got '{line}'", no + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn set_field<T: Serialize + serde::de::DeserializeOwned>(cfg: &mut T, key: &str, value: &str) -> Result<bool> {
    let mut v = serde_json::to_value(&*cfg).map_err(|e| Error::Config(e.to_string()))?;
    let Some(slot) = v.as_object_mut().and_then(|m| m.get_mut(key)) else {
        return Ok(false);
    };
    let bad = || Error::Config(format!("cannot parse '{value}' for {key}"));
    let parse_num = |s: &str, integer: bool| -> Result<Value> {
        if integer {
            s.trim().parse::<u64>().map(Value::from).map_err(|_| bad())
        } else {
            s.trim().parse::<f64>().map(Value::from).map_err(|_| bad())
        }
    };
    *slot = match slot {
        Value::Number(n) => parse_num(value, n.is_u64())?,
        Value::Array(_) => Value::Array(value.split(',').map(|x| parse_num(x, false)).collect::<Result<_>>()?),
        _ => return Err(Error::Config(format!("{key} cannot be set from the command line"))),
    };
    *cfg = serde_json::from_value(v).map_err(|e| Error::Config(format!("{key}: {e}")))?;
    Ok(true)
}

/// Applies one `key=value` setting.
fn apply(cfg: &mut RunConfig, key: &str, value: &str) -> Result<()> {
    match key {
        "suite" => cfg.suite = value.parse()?,
        "out" => cfg.out = PathBuf::from(value),
        "parallel" => {
            cfg.parallel = value
                .parse()
                .ok()
                .filter(|&p| p > 0)
                .ok_or_else(|| Error::Config(format!("parallel must be a positive integer, got '{value}'")))?
        }
        "preset" => match value {
            "default" => {
                cfg.lattice = LatticeConfig::default();
                cfg.operators = OperatorConfig::default();
            }
            "quick" => {
                cfg.lattice = LatticeConfig::coarse();
                cfg.operators = OperatorConfig::quick();
            }
            other => return Err(Error::Config(format!("unknown preset '{other}' (default or quick)"))),
        },
        "seed" => {
            cfg.lattice.seed = match value {
                "" | "off" | "none" => None,
                v => Some(
                    v.parse()
                        .map_err(|_| Error::Config(format!("seed must be an unsigned integer or 'off', got '{v}'")))?,
                ),
            }
        }
        "weights" => {
            cfg.operators.weights = value
                .split(';')
                .filter(|s| !s.trim().is_empty())
                .map(str::parse::<WeightFamily>)
                .collect::<Result<_>>()?
        }
        _ => {
            if !set_field(&mut cfg.lattice, key, value)? && !set_field(&mut cfg.operators, key, value)? {
                return Err(Error::Config(format!("unknown setting '{key}'")));
            }
        }
    }
    Ok(())
}

/// Resolves defaults, then the config file, then flags.
pub fn resolve(args: &VerifyArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig {
        suite: SuiteSelection::All,
        lattice: LatticeConfig::default(),
        operators: OperatorConfig::default(),
        out: PathBuf::from("reports"),
        parallel: default_parallelism(),
    };
    let mut settings: Vec<(String, String)> = Vec::new();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut file = parse_config_file(&text)?;
        // a preset resets the parameters, so it goes first
        file.sort_by_key(|(k, _)| k != "preset");
        settings.extend(file);
    }
    if let Some(p) = &args.preset {
        settings.push(("preset".into(), p.clone()));
    }
    settings.sort_by_key(|(k, _)| k != "preset");
    for s in &args.set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{s}'")))?;
        settings.push((k.trim().to_string(), v.trim().to_string()));
    }
    for (k, v) in &settings {
        apply(&mut cfg, k, v)?;
    }
    if !args.weights.is_empty() {
        apply(&mut cfg, "weights", &args.weights.join(";"))?;
    }
    if let Some(seed) = args.seed {
        cfg.lattice.seed = Some(seed);
    }
    if let Some(s) = args.suite {
        cfg.suite = s;
    }
    if let Some(o) = &args.out {
        cfg.out = o.clone();
    }
    if let Some(p) = args.parallel {
        apply(&mut cfg, "parallel", &p.to_string())?;
    }
    cfg.lattice.validate()?;
    cfg.operators.validate()?;
    Ok(cfg)
}

/// Result of a verification run.
#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub outputs: RunOutputs,
    pub aggregate: verify::Aggregate,
    pub written: Vec<PathBuf>,
}

/// Runs the selected suite and writes its reports.
pub fn run_verify(cfg: &RunConfig) -> Result<VerifyOutcome> {
    let hash = cfg.hash()?;
    let outputs = verify::with_parallelism(cfg.parallel, || -> Result<RunOutputs> {
        let specs: Vec<_> = verify::registry()
            .into_iter()
            .filter(|s| cfg.suite.includes_spec(s.suite))
            .collect();
        let ratios = verify::run_specs(&specs, &cfg.lattice)?;
        let mut checks = Vec::new();
        if cfg.suite.includes_bessel_checks() {
            checks.extend(verify::bessel_accuracy_checks()?);
        }
        if cfg.suite.includes_operator_checks() {
            checks.extend(verify::operator_checks(&cfg.operators)?);
        }
        let profiles = if cfg.suite.includes_spec(verify::Suite::Kernels) {
            verify::decay_profiles(&cfg.lattice)?
        } else {
            Vec::new()
        };
        Ok(RunOutputs {
            ratios,
            checks,
            profiles,
        })
    })??;
    let aggregate = verify::aggregate(
        outputs
            .ratios
            .iter()
            .map(|r| (r.id.as_str(), r.as_expected))
            .chain(outputs.checks.iter().map(|c| (c.id.as_str(), c.as_expected))),
    );
    let written = verify::write_outputs(&cfg.out, &hash, &outputs)?;
    Ok(VerifyOutcome {
        outputs,
        aggregate,
        written,
    })
}

fn format_eval(r: &EvalResult) -> String {
    match r.value.to_f64() {
        Ok(v) => format!("{v:.16e} +- {:.2e}", r.relative_error() * v.abs()),
        Err(_) => format!("{} +- {:.2e} (relative)", r.value, r.relative_error()),
    }
}

fn eval(cmd: &EvalCommand) -> Result<String> {
    Ok(match cmd {
        EvalCommand::BesselJ(a) => format_eval(&bessel::bessel_j(BesselOrder::new(a.nu)?, a.x)?),
        EvalCommand::BesselI(a) => format_eval(&bessel::bessel_i_scaled(BesselOrder::new(a.nu)?, a.x)?),
        EvalCommand::BesselK(a) => format_eval(&bessel::bessel_k_scaled(BesselOrder::new(a.nu)?, a.x)?),
        EvalCommand::Kernel(k) => {
            let (v, e) = match k.t {
                Some(t) => kernels::homog_deriv_kernel_t_with_error(k.family, k.n, t, k.u, k.v)?,
                None => kernels::integrated_kernel_with_error(k.family, k.n, k.u, k.v, k.tol)?,
            };
            format!("{v:.16e} +- {e:.2e}")
        }
        EvalCommand::SubordG { lambda } => {
            if !(*lambda > 0.0 && lambda.is_finite()) {
                return Err(Error::Domain(format!("lambda = {lambda} must be positive")));
            }
            let g = schrodinger::subordination_g(*lambda);
            format!("{g:.16e} +- {:.2e}", 4.0 * f64::EPSILON * g)
        }
        EvalCommand::Psi { t, zeta } => {
            let (v, e) = schrodinger::psi_weight_with_error(*t, *zeta)?;
            format!("{v:.16e} +- {:.2e}", e / (zeta * zeta))
        }
    })
}

fn summary_lines(outcome: &VerifyOutcome) -> Vec<String> {
    let mut lines = Vec::new();
    for r in &outcome.outputs.ratios {
        lines.push(format!(
            "{:<5} {:<32} sup_ratio={:.4e} drift={:.3} samples={} errors={}{}",
            r.verdict.to_string(),
            r.id,
            r.sup_ratio,
            r.drift,
            r.samples,
            r.errors,
            if r.expected == verify::Expectation::Fail { " (negative control)" } else { "" }
        ));
    }
    for c in &outcome.outputs.checks {
        lines.push(format!(
            "{:<5} {:<32} {}={:.3e} threshold={:.1e}{}",
            c.verdict.to_string(),
            c.id,
            c.metric,
            c.value,
            c.threshold,
            if c.expected == verify::Expectation::Fail { " (known failure)" } else { "" }
        ));
    }
    lines
}

/// Runs the command line with explicit arguments and streams; returns the
/// exit code.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match cli.command {
        Command::Eval(cmd) => match eval(&cmd) {
            Ok(line) => {
                let _ = writeln!(out, "{line}");
                EXIT_OK
            }
            Err(e) => report_error(err, &e),
        },
        Command::Verify(args) => {
            let cfg = match resolve(&args) {
                Ok(c) => c,
                Err(e) => return report_error(err, &e),
            };
            match run_verify(&cfg) {
                Ok(outcome) => {
                    for line in summary_lines(&outcome) {
                        let _ = writeln!(out, "{line}");
                    }
                    let _ = writeln!(
                        out,
                        "{} reports, {} files in {}",
                        outcome.aggregate.total,
                        outcome.written.len(),
                        display(&cfg.out)
                    );
                    if outcome.aggregate.passed {
                        EXIT_OK
                    } else {
                        let _ = writeln!(err, "failing: {}", outcome.aggregate.failing.join(", "));
                        EXIT_FAILURE
                    }
                }
                Err(e) => report_error(err, &e),
            }
        }
    }
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn report_error(err: &mut dyn Write, e: &Error) -> i32 {
    let _ = writeln!(err, "error: {e}");
    match e {
        Error::Config(_) | Error::Domain(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

/// Entry point of the binary.
pub fn main_exit_code() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
