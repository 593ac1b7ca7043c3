//! Command-line front end: configuration, dispatch and output files.
//!
//! Configuration files are TOML with one table per experiment, e.g.
//!
//! ```toml
//! [kappa_sweep]
//! temperature = 0.4
//! kappas = [0.6, 0.7, 0.8, 0.9]
//! t_max = 5000
//! ```
//!
//! Keys are the fields of [`Params`]; anything else is rejected. Values
//! resolve as `--param` flags, then the file, then per-experiment defaults.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};
use thiserror::Error;

use crate::analytic::{optimal_ratio, probe_state_closed_form, steady_qfi, steady_two_qubit};
use crate::evolve::{choi_matrix, trajectory};
use crate::experiments::{self, Experiment, ExperimentError, Params, ScanResult};
use crate::gme::build_liouvillian;
use crate::metrology::{d_rho_dt, qfi_bloch, qfi_spectral, BlochVector, MetrologyError, EIG_CUTOFF};
use crate::models::{BathConfig, BathSpec, Model, ProbeAncillaModel, TwoQubitModel};
use crate::parallel;
use crate::qmat::{eig_hermitian, max_abs, Subsystem};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;
pub const EXIT_IO: i32 = 5;
pub const EXIT_NUMERICAL: i32 = 6;
pub const EXIT_METROLOGY: i32 = 7;
pub const EXIT_OPTIMUM: i32 = 8;
pub const EXIT_INVARIANT: i32 = 10;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error("{0} invariant check(s) failed")]
    Invariant(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } => EXIT_PARSE,
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Io { .. } => EXIT_IO,
            CliError::Invariant(_) => EXIT_INVARIANT,
            CliError::Experiment(e) => match e {
                ExperimentError::InvalidParameter { .. } | ExperimentError::Model(_) => EXIT_VALIDATION,
                ExperimentError::BoundaryOptimum { .. } => EXIT_OPTIMUM,
                ExperimentError::Metrology(_) => EXIT_METROLOGY,
                _ => EXIT_NUMERICAL,
            },
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(name = "qtherm", version, about = "Qubit thermometry under global master-equation dynamics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct RunArgs {
    /// TOML file with one table per experiment
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Override a parameter, e.g. --param kappa=0.7 (repeatable)
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    /// Only report errors
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
#[command(rename_all = "snake_case")]
pub enum Command {
    /// QFI of the probe for several ancilla preparations
    ThetaScan(RunArgs),
    /// Directly coupled probe against the ancilla-assisted probe
    DirectVsAncilla(RunArgs),
    /// QFI and optimal QSNR across probe-ancilla couplings
    KappaSweep(RunArgs),
    /// Optimal QSNR against the maximal generated coherence
    CoherenceParametric(RunArgs),
    /// Two-qubit probe in common/local baths, entangled/separable start
    TwoQubitConfigs(RunArgs),
    /// Steady-state QSNR against κ/T
    SteadyQsnr(RunArgs),
    /// Density-matrix trajectory of one model
    Evolve(RunArgs),
    /// Fisher information of one model at one time
    QfiPoint(RunArgs),
    /// Resolve and check a configuration without running it
    Validate {
        experiment: Experiment,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Run the built-in invariant checks
    Selftest {
        #[arg(long)]
        quiet: bool,
    },
}

/// Merges defaults, the experiment's table from `config_text`, and
/// `key=value` overrides, then validates.
pub fn resolve_params(
    experiment: Experiment,
    config_text: Option<(&str, &str)>,
    overrides: &[String],
) -> Result<Params, CliError> {
    let defaults = toml::Table::try_from(Params::defaults(experiment))
        .map_err(|e| CliError::Validation(format!("defaults: {e}")))?;
    let mut table = defaults.clone();
    let check_key = |k: &str, origin: &str| {
        if defaults.contains_key(k) {
            Ok(())
        } else {
            Err(CliError::Validation(format!("unknown key `{k}` in {origin}")))
        }
    };

    if let Some((path, text)) = config_text {
        let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Parse {
            path: path.to_string(),
            message: e.to_string(),
        })?;
        for (section, body) in &doc {
            if section.parse::<Experiment>().is_err() {
                return Err(CliError::Validation(format!("unknown section `[{section}]` in {path}")));
            }
            let toml::Value::Table(body) = body else {
                return Err(CliError::Validation(format!("`{section}` in {path} must be a table")));
            };
            if section != experiment.name() {
                continue;
            }
            for (k, v) in body {
                check_key(k, &format!("[{section}] of {path}"))?;
                table.insert(k.clone(), v.clone());
            }
        }
    }

    for item in overrides {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::Validation(format!("--param `{item}` is not KEY=VALUE")))?;
        let k = k.trim();
        check_key(k, "--param")?;
        let value = match format!("v = {}", v.trim()).parse::<toml::Table>() {
            Ok(mut t) => t.remove("v").expect("parsed key"),
            Err(_) => toml::Value::String(v.trim().to_string()),
        };
        table.insert(k.to_string(), value);
    }

    let params: Params = table
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Validation(e.to_string()))?;
    params.validate(experiment).map_err(|e| match e {
        ExperimentError::InvalidParameter { name, reason } => CliError::Validation(format!("{name}: {reason}")),
        other => CliError::Experiment(other),
    })?;
    Ok(params)
}

fn read_config(args: &RunArgs) -> Result<Option<(String, String)>, CliError> {
    match &args.config {
        None => Ok(None),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(io_err(p))?;
            Ok(Some((p.display().to_string(), text)))
        }
    }
}

pub fn params_for(experiment: Experiment, args: &RunArgs) -> Result<Params, CliError> {
    let cfg = read_config(args)?;
    resolve_params(experiment, cfg.as_ref().map(|(p, t)| (p.as_str(), t.as_str())), &args.params)
}

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv(path: &Path, result: &ScanResult) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    })?;
    let wrap = |e: csv::Error| CliError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    };
    w.write_record(&result.columns).map_err(wrap)?;
    for row in &result.rows {
        w.write_record(row.iter().map(|v| fmt_f64(*v))).map_err(wrap)?;
    }
    w.flush().map_err(io_err(path))
}

pub fn summary_json(result: &ScanResult, wall_time: f64, violations: &[String]) -> Value {
    json!({
        "experiment": result.experiment.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "params": result.params,
        "results": result.summary,
        "optima": result.optima,
        "rows": result.rows.len(),
        "violations": violations,
        "workers": parallel::current_workers(),
        "wall_time_s": wall_time,
    })
}

/// Companion gnuplot script reading the CSV.
pub fn gnuplot_script(result: &ScanResult) -> String {
    let name = result.experiment.name();
    let csv = format!("{name}.csv");
    let col = |c: &str| result.columns.iter().position(|x| *x == c).map(|i| i + 1);
    let mut s = format!(
        "# {name}\nset datafile separator ','\nset key autotitle columnhead\nset terminal pngcairo size 900,600\nset output '{name}.png'\n"
    );
    let series_plot = |lead: &str, y: &str, keys: Vec<f64>| {
        let (k, t, y) = (col(lead).unwrap_or(1), col("t").unwrap_or(2), col(y).unwrap_or(3));
        let parts: Vec<String> = keys
            .iter()
            .map(|key| {
                format!("'{csv}' using (abs(${k}-({key}))<1e-12 ? ${t} : 1/0):{y} with lines title '{lead}={key}'")
            })
            .collect();
        format!("set xlabel 't'\nplot {}\n", parts.join(", \\\n     "))
    };
    let keys: Vec<f64> = result.series.iter().map(|s| s.key).collect();
    match result.experiment {
        Experiment::ThetaScan => s += &series_plot("theta", "qfi", keys),
        Experiment::DirectVsAncilla => s += &series_plot("series", "qfi", keys),
        Experiment::KappaSweep => s += &series_plot("kappa", "qfi", keys),
        Experiment::TwoQubitConfigs => s += &format!("set logscale x\n{}", series_plot("config", "qfi", keys)),
        Experiment::CoherenceParametric => {
            s += &format!("set xlabel 'max |X|'\nset ylabel 'optimal QSNR'\nplot '{csv}' using 2:4 with linespoints notitle\n")
        }
        Experiment::SteadyQsnr => {
            s += &format!("set xlabel 'kappa/T'\nset ylabel 'QSNR'\nplot '{csv}' using 1:2 with lines, '' using 1:3 with points\n")
        }
        Experiment::Evolve => {
            let n = result.columns.len();
            s += &format!("set xlabel 't'\nplot '{csv}' using 1:2 with lines, '' using 1:{n} with lines\n")
        }
        Experiment::QfiPoint => s += &format!("plot '{csv}' using 1:2 with points\n"),
    }
    s
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(text.as_bytes()).map_err(io_err(path))
}

/// Runs one experiment and writes its three output files.
pub fn run_experiment(experiment: Experiment, args: &RunArgs) -> Result<ScanResult, CliError> {
    let params = params_for(experiment, args)?;
    let start = Instant::now();
    let result = experiments::run(experiment, &params)?;
    let wall = start.elapsed().as_secs_f64();
    let violations = result.violations();

    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    let base = args.out.join(experiment.name());
    let csv_path = base.with_extension("csv");
    write_csv(&csv_path, &result)?;
    let json_path = args.out.join(format!("{}.summary.json", experiment.name()));
    let summary = serde_json::to_string_pretty(&summary_json(&result, wall, &violations))
        .map_err(|e| CliError::Validation(e.to_string()))?;
    write_text(&json_path, &(summary + "\n"))?;
    write_text(&base.with_extension("gp"), &gnuplot_script(&result))?;

    if !args.quiet {
        println!(
            "{}: {} rows in {:.2}s -> {}",
            experiment.name(),
            result.rows.len(),
            wall,
            args.out.display()
        );
    }
    for v in &violations {
        eprintln!("invariant violated: {v}");
    }
    if !violations.is_empty() {
        return Err(CliError::Invariant(violations.len()));
    }
    Ok(result)
}

/// Outcome of one built-in check.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn random_model(rng: &mut StdRng) -> Model {
    let bath = |rng: &mut StdRng, t: f64| {
        BathSpec::new(rng.random_range(0.0..0.1), rng.random_range(2.0..20.0), t).expect("valid draw")
    };
    let t = rng.random_range(0.05..2.0);
    if rng.random_bool(0.5) {
        let mut m = ProbeAncillaModel::resonant(rng.random_range(0.05..1.5), bath(rng, t), rng.random_range(0.0..std::f64::consts::PI));
        m.omega_p = rng.random_range(0.5..1.5);
        m.omega_a = rng.random_range(0.5..1.5);
        m.into()
    } else {
        let (b1, b2) = (bath(rng, t), bath(rng, t));
        let cfg = if rng.random_bool(0.5) {
            BathConfig::Local { bath1: b1, bath2: b2 }
        } else {
            let b2 = BathSpec { cutoff: b1.cutoff, ..b2 };
            BathConfig::Common { bath1: b1, bath2: b2 }
        };
        TwoQubitModel::new(rng.random_range(0.5..1.5), rng.random_range(0.05..1.5), cfg, rng.random_range(0.0..std::f64::consts::PI))
            .into()
    }
}

/// Fast invariant suite behind `qtherm selftest`.
pub fn selftest() -> Vec<Check> {
    let mut out = Vec::new();
    let mut rng = StdRng::seed_from_u64(0x5eed);

    let mut worst = (0.0_f64, 0.0_f64, f64::INFINITY);
    for _ in 0..40 {
        let m = random_model(&mut rng);
        match build_liouvillian(&m).map(|l| (l.trace_defect(), l.hermiticity_defect(), l)) {
            Ok((tr, he, l)) => {
                worst.0 = worst.0.max(tr);
                worst.1 = worst.1.max(he);
                if let Ok(c) = choi_matrix(&l, rng.random_range(0.1..20.0)) {
                    if let Ok(e) = eig_hermitian(&c) {
                        worst.2 = worst.2.min(e.values[0]);
                    }
                }
            }
            Err(e) => out.push(check("generator", false, e.to_string())),
        }
    }
    out.push(check(
        "generator preserves trace and Hermiticity",
        worst.0 <= 1e-10 && worst.1 <= 1e-10,
        format!("trace defect {:.2e}, Hermiticity defect {:.2e}", worst.0, worst.1),
    ));
    out.push(check(
        "propagators are completely positive",
        worst.2 >= -1e-8,
        format!("min Choi eigenvalue {:.2e}", worst.2),
    ));

    let mut dev = 0.0_f64;
    for _ in 0..200 {
        let mut r = BlochVector::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = r.norm_sqr().sqrt();
        let len = rng.random_range(0.0..0.99);
        r = BlochVector::new(r.rx * len / n, r.ry * len / n, r.rz * len / n);
        let dr = BlochVector::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let fb = qfi_bloch(&r, &dr).unwrap_or(f64::NAN);
        let fs = qfi_spectral(&r.to_state(), &dr.to_traceless().scale(0.5), EIG_CUTOFF).unwrap_or(f64::NAN);
        dev = dev.max((fb - fs).abs() / fb.max(1.0));
    }
    out.push(check("Bloch and spectral QFI agree", dev <= 1e-9, format!("max deviation {dev:.2e}")));

    let (k, t) = (0.6, 0.4);
    let steady = d_rho_dt(|t| Ok(steady_two_qubit(k, t).into_matrix()), t, None)
        .and_then(|d| qfi_spectral(&steady_two_qubit(k, t), &d, EIG_CUTOFF));
    match steady {
        Ok(f) => {
            let rel = (f / steady_qfi(k, t) - 1.0).abs();
            out.push(check("steady QFI closed form", rel <= 1e-6, format!("relative error {rel:.2e}")));
        }
        Err(e) => out.push(check("steady QFI closed form", false, e.to_string())),
    }

    let (x, r) = optimal_ratio();
    out.push(check(
        "optimal ratio",
        (x - 1.19968).abs() < 1e-4 && (r - 0.4392).abs() < 1e-3,
        format!("x* = {x:.6}, R* = {r:.6}"),
    ));

    let closed = (|| -> Result<f64, MetrologyError> {
        let bath = BathSpec::new(0.01, 10.0, 0.4)?;
        let m = Model::from(ProbeAncillaModel::resonant(0.8, bath, std::f64::consts::FRAC_PI_2));
        let l = build_liouvillian(&m)?;
        let tr = trajectory(&l, &m.initial_state(), 50.0, 101, Some(Subsystem::First))?;
        let reduced = tr.reduced.expect("requested reduction");
        Ok(tr
            .times
            .iter()
            .zip(&reduced)
            .map(|(t, s)| max_abs(&(s.matrix() - probe_state_closed_form(*t, 0.8, &bath).matrix())))
            .fold(0.0, f64::max))
    })();
    match closed {
        Ok(d) => out.push(check("probe state matches closed form", d < 1e-6, format!("max deviation {d:.2e}"))),
        Err(e) => out.push(check("probe state matches closed form", false, e.to_string())),
    }
    out
}

/// Entry point behind `main`; returns the process exit code.
pub fn run_cli(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Validate { experiment, args } => params_for(experiment, &args).map(|p| {
            if !args.quiet {
                println!("{}", serde_json::to_string_pretty(&p).expect("params serialize"));
            }
        }),
        Command::Selftest { quiet } => {
            let checks = selftest();
            let failed = checks.iter().filter(|c| !c.passed).count();
            for c in &checks {
                if !quiet || !c.passed {
                    println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                }
            }
            if failed == 0 {
                Ok(())
            } else {
                Err(CliError::Invariant(failed))
            }
        }
        cmd => {
            let (experiment, args) = match cmd {
                Command::ThetaScan(a) => (Experiment::ThetaScan, a),
                Command::DirectVsAncilla(a) => (Experiment::DirectVsAncilla, a),
                Command::KappaSweep(a) => (Experiment::KappaSweep, a),
                Command::CoherenceParametric(a) => (Experiment::CoherenceParametric, a),
                Command::TwoQubitConfigs(a) => (Experiment::TwoQubitConfigs, a),
                Command::SteadyQsnr(a) => (Experiment::SteadyQsnr, a),
                Command::Evolve(a) => (Experiment::Evolve, a),
                Command::QfiPoint(a) => (Experiment::QfiPoint, a),
                Command::Validate { .. } | Command::Selftest { .. } => unreachable!(),
            };
            run_experiment(experiment, &args).map(|_| ())
        }
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_uses_figure_defaults() {
        let p = resolve_params(Experiment::KappaSweep, Some(("cfg.toml", "")), &[]).unwrap();
        assert_eq!((p.temperature, p.eta, p.cutoff), (0.4, 0.01, 10.0));
    }

    #[test]
    fn negative_temperature_names_the_key() {
        let err = resolve_params(Experiment::KappaSweep, None, &["temperature=-1".into()]).unwrap_err();
        assert!(matches!(&err, CliError::Validation(m) if m.contains("temperature")), "{err}");
        assert_eq!(err.exit_code(), EXIT_VALIDATION);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = resolve_params(Experiment::KappaSweep, Some(("c", "[kappa_sweep]\ngamma = 1\n")), &[]).unwrap_err();
        assert!(matches!(&err, CliError::Validation(m) if m.contains("unknown key")), "{err}");
        let err = resolve_params(Experiment::KappaSweep, None, &["gamma=1".into()]).unwrap_err();
        assert!(matches!(&err, CliError::Validation(m) if m.contains("unknown key")));
        let err = resolve_params(Experiment::KappaSweep, Some(("c", "[nope]\nkappa = 1\n")), &[]).unwrap_err();
        assert!(matches!(&err, CliError::Validation(m) if m.contains("unknown section")));
    }

    #[test]
    fn precedence_is_flags_then_file_then_defaults() {
        let cfg = "[theta_scan]\nkappa = 0.7\nt_max = 20\n[kappa_sweep]\nkappa = 0.1\n";
        let p = resolve_params(Experiment::ThetaScan, Some(("c", cfg)), &["t_max=30".into()]).unwrap();
        assert_eq!((p.kappa, p.t_max, p.temperature), (0.7, 30.0, 0.4));
        let p = resolve_params(Experiment::ThetaScan, None, &["zero_frequency=ohmic_limit".into()]).unwrap();
        assert_eq!(p.zero_frequency, crate::models::ZeroFrequencyRate::OhmicLimit);
        let p = resolve_params(Experiment::ThetaScan, None, &["thetas=[0.5, 1]".into()]).unwrap();
        assert_eq!(p.thetas, vec![0.5, 1.0]);
    }

    #[test]
    fn parse_errors_carry_location() {
        let err = resolve_params(Experiment::ThetaScan, Some(("bad.toml", "[theta_scan\n")), &[]).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_PARSE);
        assert!(err.to_string().contains("bad.toml"));
    }

    #[test]
    fn zero_t_max_is_rejected() {
        let err = resolve_params(Experiment::Evolve, None, &["t_max=0".into()]).unwrap_err();
        assert!(matches!(&err, CliError::Validation(m) if m.contains("t_max")));
    }

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 2.541_187_109_863_807_5, 1e-300, -7.25e12] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn selftest_passes() {
        for c in selftest() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
