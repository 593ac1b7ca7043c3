//! Scan runners behind each figure: θ scan, direct vs ancilla-assisted
//! probe, κ sweep with optimal times, coherence/QSNR parametric curve, the
//! four two-qubit configurations, and the steady QSNR curve.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::analytic::{direct_probe_qfi, optimal_ratio, steady_qfi, steady_qsnr_ratio, steady_two_qubit};
use crate::evolve::{evolve_at, trajectory, EvolveError};
use crate::gme::{build_liouvillian, GmeError};
use crate::metrology::{
    self, cfi_projective, d_rho_dt, d_rho_dt_many, qfi_spectral, qubit_record, EstimateRecord, MetrologyError,
    EIG_CUTOFF,
};
use crate::models::{
    BathConfig, BathSpec, DirectProbeModel, Model, ModelError, ProbeAncillaModel, TwoQubitModel, ZeroFrequencyRate,
};
use crate::parallel;
use crate::qmat::{c, partial_trace_matrix, ComplexMatrix, DensityMatrix, QmatError, Subsystem, C64};

/// Absolute tolerance of golden-section refinements.
pub const OPT_TOL: f64 = 1e-6;
/// Slack allowed in the Fisher-information ordering checks.
pub const FI_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("maximum of {what} lies on the grid boundary at {at}; widen the grid")]
    BoundaryOptimum { what: String, at: f64 },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error(transparent)]
    Metrology(#[from] MetrologyError),
    #[error(transparent)]
    Evolve(#[from] EvolveError),
    #[error(transparent)]
    Gme(#[from] GmeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] QmatError),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

fn invalid(name: &'static str, reason: impl Into<String>) -> ExperimentError {
    ExperimentError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    ThetaScan,
    DirectVsAncilla,
    KappaSweep,
    CoherenceParametric,
    TwoQubitConfigs,
    SteadyQsnr,
    Evolve,
    QfiPoint,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::ThetaScan,
        Experiment::DirectVsAncilla,
        Experiment::KappaSweep,
        Experiment::CoherenceParametric,
        Experiment::TwoQubitConfigs,
        Experiment::SteadyQsnr,
        Experiment::Evolve,
        Experiment::QfiPoint,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::ThetaScan => "theta_scan",
            Experiment::DirectVsAncilla => "direct_vs_ancilla",
            Experiment::KappaSweep => "kappa_sweep",
            Experiment::CoherenceParametric => "coherence_parametric",
            Experiment::TwoQubitConfigs => "two_qubit_configs",
            Experiment::SteadyQsnr => "steady_qsnr",
            Experiment::Evolve => "evolve",
            Experiment::QfiPoint => "qfi_point",
        }
    }
}

impl std::str::FromStr for Experiment {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

impl std::fmt::Display for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Direct,
    ProbeAncilla,
    TwoQubit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BathKind {
    Local,
    Common,
}

/// Every knob of every experiment. Each experiment reads the subset it
/// needs; the full set is echoed in summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub temperature: f64,
    /// Coupling of the probe-side bath (ancilla, direct probe, qubit 1).
    pub eta: f64,
    /// Coupling of qubit 2 to its bath.
    pub eta2: f64,
    pub cutoff: f64,
    pub omega_p: f64,
    pub omega_a: f64,
    pub kappa: f64,
    pub theta: f64,
    pub t_max: f64,
    pub n_points: usize,
    pub thetas: Vec<f64>,
    pub kappas: Vec<f64>,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub n_ratios: usize,
    pub zero_frequency: ZeroFrequencyRate,
    pub direct_zero_frequency: ZeroFrequencyRate,
    pub model: ModelKind,
    pub bath: BathKind,
    /// Evaluation time for `qfi_point`.
    pub t: f64,
}

impl Params {
    pub fn defaults(experiment: Experiment) -> Self {
        let mut p = Params {
            temperature: 0.4,
            eta: 0.01,
            eta2: 0.05,
            cutoff: 10.0,
            omega_p: 1.0,
            omega_a: 1.0,
            kappa: 0.8,
            theta: FRAC_PI_2,
            t_max: 50.0,
            n_points: 500,
            thetas: vec![0.0, FRAC_PI_4, FRAC_PI_2, 3.0 * FRAC_PI_4, PI],
            kappas: vec![0.6, 0.7, 0.8, 0.9],
            ratio_min: 0.01,
            ratio_max: 5.0,
            n_ratios: 500,
            zero_frequency: ZeroFrequencyRate::Excluded,
            direct_zero_frequency: ZeroFrequencyRate::OhmicLimit,
            model: ModelKind::ProbeAncilla,
            bath: BathKind::Local,
            t: 10.0,
        };
        match experiment {
            Experiment::KappaSweep => {
                p.t_max = 5000.0;
                p.n_points = 20001;
            }
            Experiment::CoherenceParametric => {
                p.eta = 0.1;
                p.t_max = 1000.0;
                p.n_points = 8001;
                p.kappas = (0..15).map(|k| 0.3 + 0.05 * k as f64).collect();
            }
            Experiment::TwoQubitConfigs => {
                p.kappa = 0.6;
                p.t_max = 2000.0;
                p.n_points = 600;
            }
            _ => {}
        }
        p
    }

    pub fn validate(&self, experiment: Experiment) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, format!("must be > 0, got {v}")))
            }
        };
        let non_negative = |name: &'static str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, format!("must be >= 0, got {v}")))
            }
        };
        positive("temperature", self.temperature)?;
        non_negative("eta", self.eta)?;
        non_negative("eta2", self.eta2)?;
        positive("cutoff", self.cutoff)?;
        positive("omega_p", self.omega_p)?;
        positive("omega_a", self.omega_a)?;
        non_negative("kappa", self.kappa)?;
        positive("t_max", self.t_max)?;
        non_negative("t", self.t)?;
        if !(0.0..=PI).contains(&self.theta) {
            return Err(invalid("theta", format!("must lie in [0, π], got {}", self.theta)));
        }
        if self.n_points < 3 {
            return Err(invalid("n_points", format!("need at least 3, got {}", self.n_points)));
        }
        match experiment {
            Experiment::ThetaScan => {
                if self.thetas.is_empty() {
                    return Err(invalid("thetas", "empty list"));
                }
                if let Some(t) = self.thetas.iter().find(|t| !(0.0..=PI).contains(*t)) {
                    return Err(invalid("thetas", format!("{t} outside [0, π]")));
                }
            }
            Experiment::KappaSweep | Experiment::CoherenceParametric => {
                if self.kappas.is_empty() {
                    return Err(invalid("kappas", "empty list"));
                }
                if let Some(k) = self.kappas.iter().find(|k| !(**k > 0.0 && k.is_finite())) {
                    return Err(invalid("kappas", format!("{k} is not > 0")));
                }
            }
            Experiment::SteadyQsnr => {
                positive("ratio_min", self.ratio_min)?;
                positive("ratio_max", self.ratio_max)?;
                if self.ratio_max <= self.ratio_min {
                    return Err(invalid("ratio_max", "must exceed ratio_min"));
                }
                if self.n_ratios < 3 {
                    return Err(invalid("n_ratios", format!("need at least 3, got {}", self.n_ratios)));
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn bath_with(&self, eta: f64) -> Result<BathSpec> {
        Ok(BathSpec::new(eta, self.cutoff, self.temperature)?)
    }

    pub fn direct_model(&self) -> Result<Model> {
        let mut m = DirectProbeModel::new(self.omega_p, self.bath_with(self.eta)?);
        m.zero_frequency = self.direct_zero_frequency;
        Ok(m.into())
    }

    pub fn ancilla_model(&self, kappa: f64, theta: f64) -> Result<Model> {
        let m = ProbeAncillaModel {
            omega_p: self.omega_p,
            omega_a: self.omega_a,
            kappa,
            bath: self.bath_with(self.eta)?,
            theta,
            zero_frequency: self.zero_frequency,
        };
        let m = Model::from(m);
        m.validate()?;
        Ok(m)
    }

    pub fn two_qubit_model(&self, bath: BathKind, theta: f64) -> Result<Model> {
        let (bath1, bath2) = (self.bath_with(self.eta)?, self.bath_with(self.eta2)?);
        let cfg = match bath {
            BathKind::Local => BathConfig::Local { bath1, bath2 },
            BathKind::Common => BathConfig::Common { bath1, bath2 },
        };
        let mut m = TwoQubitModel::new(self.omega_p, self.kappa, cfg, theta);
        m.zero_frequency = self.zero_frequency;
        let m = Model::from(m);
        m.validate()?;
        Ok(m)
    }

    /// Model selected by `model` and `bath`, for `evolve` and `qfi_point`.
    pub fn selected_model(&self) -> Result<Model> {
        match self.model {
            ModelKind::Direct => self.direct_model(),
            ModelKind::ProbeAncilla => self.ancilla_model(self.kappa, self.theta),
            ModelKind::TwoQubit => self.two_qubit_model(self.bath, self.theta),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    Uniform { t_max: f64, n_points: usize },
    Points(Vec<f64>),
}

impl Grid {
    /// t = 0 followed by `n_points − 1` logarithmically spaced times from
    /// 10⁻² to `t_max`.
    pub fn log_dense(t_max: f64, n_points: usize) -> Grid {
        let lo = 1e-2_f64.min(t_max / 10.0).ln();
        let hi = t_max.ln();
        let m = n_points - 1;
        let mut ts = vec![0.0];
        ts.extend((0..m).map(|k| {
            if k == m - 1 {
                t_max
            } else {
                (lo + (hi - lo) * k as f64 / (m - 1) as f64).exp()
            }
        }));
        Grid::Points(ts)
    }

    pub fn times(&self) -> Vec<f64> {
        match self {
            Grid::Uniform { t_max, n_points } => {
                let dt = t_max / (*n_points - 1) as f64;
                (0..*n_points)
                    .map(|k| if k == n_points - 1 { *t_max } else { k as f64 * dt })
                    .collect()
            }
            Grid::Points(ts) => ts.clone(),
        }
    }
}

/// The measured part of a model: the reduced probe for the ancilla model,
/// the whole system otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub model: Model,
    pub reduce: Option<Subsystem>,
}

fn doublet_basis() -> Vec<Vec<C64>> {
    let (o, z, s) = (c(1.0, 0.0), c(0.0, 0.0), c(FRAC_1_SQRT_2, 0.0));
    vec![
        vec![o, z, z, z],
        vec![z, s, s, z],
        vec![z, s, -s, z],
        vec![z, z, z, o],
    ]
}

impl Probe {
    pub fn for_model(model: Model) -> Self {
        let reduce = match model {
            Model::ProbeAncilla(_) => Some(Subsystem::First),
            _ => None,
        };
        Self { model, reduce }
    }

    pub fn temperature(&self) -> f64 {
        self.model.temperature()
    }

    /// Measured states on `grid` with every bath at `temperature`.
    pub fn states_at(&self, temperature: f64, grid: &Grid) -> Result<Vec<ComplexMatrix>> {
        let m = self.model.with_temperature(temperature);
        let l = build_liouvillian(&m)?;
        let rho0 = m.initial_state();
        let full: Vec<DensityMatrix> = match grid {
            Grid::Uniform { t_max, n_points } => trajectory(&l, &rho0, *t_max, *n_points, None)?.states,
            Grid::Points(ts) => evolve_at(&l, &rho0, ts)?,
        };
        full.into_iter()
            .map(|s| match self.reduce {
                Some(keep) => Ok(partial_trace_matrix(s.matrix(), keep)?),
                None => Ok(s.into_matrix()),
            })
            .collect()
    }

    fn record(&self, t: f64, rho: ComplexMatrix, drho: &ComplexMatrix) -> Result<EstimateRecord> {
        let temperature = self.temperature();
        let rho = DensityMatrix::new_unchecked(rho);
        if rho.dim() == 2 {
            return Ok(qubit_record(t, temperature, &rho, drho)?);
        }
        let qfi = qfi_spectral(&rho, drho, EIG_CUTOFF)?;
        let cfi = match cfi_projective(&rho, drho, &doublet_basis()) {
            Ok(v) => v,
            Err(MetrologyError::SingularOutcome { .. }) => f64::NAN,
            Err(e) => return Err(e.into()),
        };
        Ok(EstimateRecord::new(t, temperature, qfi, cfi, rho[(1, 2)].norm()))
    }

    /// Figures of merit at every grid time.
    pub fn records(&self, grid: &Grid) -> Result<Vec<EstimateRecord>> {
        let temperature = self.temperature();
        let base = self.states_at(temperature, grid)?;
        let drho = d_rho_dt_many(|t| self.states_at(t, grid).map_err(into_metrology), temperature, None)?;
        let times = grid.times();
        let idx: Vec<usize> = (0..times.len()).collect();
        parallel::try_map(&idx, |&i| self.record(times[i], base[i].clone(), &drho[i]))
    }

    pub fn record_at(&self, t: f64) -> Result<EstimateRecord> {
        Ok(self.records(&Grid::Points(vec![t]))?.remove(0))
    }

    /// |ρ₀₁| of the measured state at time `t`.
    pub fn coherence_at(&self, t: f64) -> Result<f64> {
        let s = self.states_at(self.temperature(), &Grid::Points(vec![t]))?;
        Ok(s[0][(0, 1)].norm())
    }
}

fn into_metrology(e: ExperimentError) -> MetrologyError {
    match e {
        ExperimentError::Metrology(m) => m,
        ExperimentError::Evolve(m) => m.into(),
        ExperimentError::Gme(m) => m.into(),
        ExperimentError::Model(m) => m.into(),
        ExperimentError::Linalg(m) => m.into(),
        other => MetrologyError::Family(other.to_string()),
    }
}

/// Interior maximum of a sampled curve, refined by golden-section search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptSearchResult {
    /// Sweep value the search belongs to (κ for κ sweeps).
    pub key: f64,
    pub argmax: f64,
    pub value: f64,
    pub bracket: (f64, f64),
    /// Half-width of the final golden-section interval.
    pub tolerance: f64,
}

/// Maximizes a unimodal `f` on [a, b].
pub fn golden_section_max<F>(f: F, a: f64, b: f64, tol: f64) -> Result<(f64, f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (a, b);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    while b - a > 2.0 * tol {
        if f1 > f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2)?;
        }
    }
    let (x, v) = if f1 > f2 { (x1, f1) } else { (x2, f2) };
    Ok((x, v, 0.5 * (b - a)))
}

/// Coarse argmax over samples `(xs, ys)` followed by golden-section
/// refinement between the neighbouring samples.
pub fn refine_max<F>(what: &str, key: f64, xs: &[f64], ys: &[f64], f: F, tol: f64) -> Result<OptSearchResult>
where
    F: Fn(f64) -> Result<f64>,
{
    let i = ys
        .iter()
        .enumerate()
        .filter(|(_, y)| !y.is_nan())
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .ok_or_else(|| invalid("grid", "no finite samples"))?;
    if i == 0 || i + 1 == xs.len() {
        return Err(ExperimentError::BoundaryOptimum {
            what: what.to_string(),
            at: xs[i],
        });
    }
    let bracket = (xs[i - 1], xs[i + 1]);
    let (x, v, width) = golden_section_max(&f, bracket.0, bracket.1, tol)?;
    let (argmax, value) = if v >= ys[i] { (x, v) } else { (xs[i], ys[i]) };
    Ok(OptSearchResult {
        key,
        argmax,
        value,
        bracket,
        tolerance: width,
    })
}

/// One curve of a scan.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub key: f64,
    pub records: Vec<EstimateRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub experiment: Experiment,
    pub params: Params,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
    pub series: Vec<Series>,
    pub optima: Vec<OptSearchResult>,
    pub summary: Map<String, Value>,
}

const RECORD_COLUMNS: [&str; 6] = ["t", "qfi", "cfi", "qsnr", "qfi_per_t", "coherence_abs"];

fn record_row(lead: &[f64], r: &EstimateRecord) -> Vec<f64> {
    let mut row = lead.to_vec();
    row.extend([r.t, r.qfi, r.cfi, r.qsnr, r.qfi_per_t, r.coherence_abs]);
    row
}

fn record_columns(lead: &[&'static str]) -> Vec<&'static str> {
    lead.iter().copied().chain(RECORD_COLUMNS).collect()
}

fn long_rows(series: &[Series]) -> Vec<Vec<f64>> {
    series
        .iter()
        .flat_map(|s| s.records.iter().map(move |r| record_row(&[s.key], r)))
        .collect()
}

impl ScanResult {
    fn new(experiment: Experiment, params: &Params) -> Self {
        Self {
            experiment,
            params: params.clone(),
            columns: Vec::new(),
            rows: Vec::new(),
            series: Vec::new(),
            optima: Vec::new(),
            summary: Map::new(),
        }
    }

    /// Invariant violations over every record and optimum.
    pub fn violations(&self) -> Vec<String> {
        let t = self.params.temperature;
        let mut out: Vec<String> = self
            .series
            .iter()
            .flat_map(|s| {
                s.records
                    .iter()
                    .filter_map(move |r| r.check(t, FI_SLACK).err().map(|e| format!("{}: {e}", s.label)))
            })
            .collect();
        if self.rows.is_empty() {
            out.push("no rows".into());
        }
        out
    }

    pub fn series(&self, label: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.label == label)
    }
}

fn peak(records: &[EstimateRecord]) -> (f64, f64) {
    records
        .iter()
        .map(|r| (r.t, r.qfi))
        .fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a })
}

/// QFI of the reduced probe over time for each ancilla preparation angle.
pub fn run_theta_scan(thetas: &[f64], p: &Params) -> Result<ScanResult> {
    let grid = Grid::Uniform {
        t_max: p.t_max,
        n_points: p.n_points,
    };
    let series = parallel::try_map(thetas, |&theta| -> Result<Series> {
        let probe = Probe::for_model(p.ancilla_model(p.kappa, theta)?);
        Ok(Series {
            label: format!("theta={theta}"),
            key: theta,
            records: probe.records(&grid)?,
        })
    })?;
    let mut out = ScanResult::new(Experiment::ThetaScan, p);
    out.columns = record_columns(&["theta"]);
    out.rows = long_rows(&series);
    let peaks: Vec<Value> = series
        .iter()
        .map(|s| {
            let (t, f) = peak(&s.records);
            json!({"theta": s.key, "peak_qfi": f, "t_peak": t})
        })
        .collect();
    let best = series
        .iter()
        .max_by(|a, b| peak(&a.records).1.total_cmp(&peak(&b.records).1))
        .map(|s| s.key);
    out.summary.insert("peaks".into(), Value::Array(peaks));
    out.summary.insert("best_theta".into(), json!(best));
    out.series = series;
    Ok(out)
}

/// Smallest sampled time after which `a` stays above `b`.
pub fn crossover_time(a: &[EstimateRecord], b: &[EstimateRecord]) -> Option<f64> {
    let last_below = a.iter().zip(b).rposition(|(x, y)| x.t > 0.0 && x.qfi <= y.qfi);
    match last_below {
        None => a.iter().find(|r| r.t > 0.0).map(|r| r.t),
        Some(i) if i + 1 < a.len() => Some(a[i].t),
        Some(_) => None,
    }
}

/// Direct σ_z-dephased probe against the ancilla-assisted probe.
pub fn run_direct_vs_ancilla(p: &Params) -> Result<ScanResult> {
    let grid = Grid::Uniform {
        t_max: p.t_max,
        n_points: p.n_points,
    };
    let probes = [
        ("direct", Probe::for_model(p.direct_model()?)),
        ("ancilla", Probe::for_model(p.ancilla_model(p.kappa, p.theta)?)),
    ];
    let series = parallel::try_map(&[0usize, 1], |&i| -> Result<Series> {
        Ok(Series {
            label: probes[i].0.to_string(),
            key: i as f64,
            records: probes[i].1.records(&grid)?,
        })
    })?;
    let mut out = ScanResult::new(Experiment::DirectVsAncilla, p);
    out.columns = record_columns(&["series"]);
    out.rows = long_rows(&series);
    let (td, fd) = peak(&series[0].records);
    let (ta, fa) = peak(&series[1].records);
    let cross = crossover_time(&series[1].records, &series[0].records);
    out.summary.insert("series".into(), json!({"0": "direct", "1": "ancilla"}));
    out.summary.insert("direct_peak".into(), json!({"t": td, "qfi": fd}));
    out.summary.insert("ancilla_peak".into(), json!({"t": ta, "qfi": fa}));
    out.summary.insert("crossover_time".into(), json!(cross));
    if p.direct_zero_frequency == ZeroFrequencyRate::OhmicLimit {
        let bath = p.bath_with(p.eta)?;
        let dev = series[0]
            .records
            .iter()
            .map(|r| (r.qfi - direct_probe_qfi(r.t, &bath)).abs())
            .fold(0.0, f64::max);
        out.summary.insert("direct_closed_form_max_dev".into(), json!(dev));
    }
    out.series = series;
    Ok(out)
}

fn qsnr_optimum(probe: &Probe, key: f64, records: &[EstimateRecord]) -> Result<OptSearchResult> {
    let ts: Vec<f64> = records.iter().map(|r| r.t).collect();
    let ys: Vec<f64> = records.iter().map(|r| r.qsnr).collect();
    refine_max(&format!("qsnr(t) at kappa={key}"), key, &ts, &ys, |t| Ok(probe.record_at(t)?.qsnr), OPT_TOL)
}

/// QFI(t) per coupling with the QSNR-optimal time for each.
pub fn run_kappa_sweep(kappas: &[f64], p: &Params) -> Result<(ScanResult, Vec<OptSearchResult>)> {
    let grid = Grid::Uniform {
        t_max: p.t_max,
        n_points: p.n_points,
    };
    let runs = parallel::try_map(kappas, |&kappa| -> Result<(Series, OptSearchResult)> {
        let probe = Probe::for_model(p.ancilla_model(kappa, p.theta)?);
        let records = probe.records(&grid)?;
        let opt = qsnr_optimum(&probe, kappa, &records)?;
        let s = Series {
            label: format!("kappa={kappa}"),
            key: kappa,
            records,
        };
        Ok((s, opt))
    })?;
    let (series, optima): (Vec<Series>, Vec<OptSearchResult>) = runs.into_iter().unzip();
    let mut out = ScanResult::new(Experiment::KappaSweep, p);
    out.columns = record_columns(&["kappa"]);
    out.rows = long_rows(&series);
    let opt_json: Vec<Value> = optima
        .iter()
        .map(|o| json!({"kappa": o.key, "t_opt": o.argmax, "qsnr_opt": o.value, "bracket": [o.bracket.0, o.bracket.1], "tolerance": o.tolerance}))
        .collect();
    let tail: Vec<Value> = series
        .iter()
        .map(|s| {
            let r = s.records.last().expect("non-empty grid");
            json!({"kappa": s.key, "t": r.t, "qfi_per_t": r.qfi_per_t})
        })
        .collect();
    out.summary.insert("optima".into(), Value::Array(opt_json));
    out.summary.insert("qfi_per_t_at_t_max".into(), Value::Array(tail));
    out.series = series;
    out.optima = optima.clone();
    Ok((out, optima))
}

/// One point of the coherence/QSNR parametric curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoherencePoint {
    pub kappa: f64,
    pub max_coherence: f64,
    pub t_coherence: f64,
    pub qsnr_opt: f64,
    pub t_opt: f64,
}

/// Maximal probe coherence against the optimal QSNR, one point per κ.
pub fn run_coherence_parametric(kappas: &[f64], p: &Params) -> Result<ScanResult> {
    let grid = Grid::Uniform {
        t_max: p.t_max,
        n_points: p.n_points,
    };
    let runs = parallel::try_map(kappas, |&kappa| -> Result<(Series, CoherencePoint)> {
        let probe = Probe::for_model(p.ancilla_model(kappa, p.theta)?);
        let records = probe.records(&grid)?;
        let ts: Vec<f64> = records.iter().map(|r| r.t).collect();
        let coh: Vec<f64> = records.iter().map(|r| r.coherence_abs).collect();
        let cmax = refine_max(
            &format!("coherence at kappa={kappa}"),
            kappa,
            &ts,
            &coh,
            |t| probe.coherence_at(t),
            OPT_TOL,
        )?;
        let opt = qsnr_optimum(&probe, kappa, &records)?;
        let point = CoherencePoint {
            kappa,
            max_coherence: cmax.value,
            t_coherence: cmax.argmax,
            qsnr_opt: opt.value,
            t_opt: opt.argmax,
        };
        Ok((
            Series {
                label: format!("kappa={kappa}"),
                key: kappa,
                records,
            },
            point,
        ))
    })?;
    let mut out = ScanResult::new(Experiment::CoherenceParametric, p);
    out.columns = vec!["kappa", "max_coherence", "t_coherence", "qsnr_opt", "t_opt"];
    out.rows = runs
        .iter()
        .map(|(_, c)| vec![c.kappa, c.max_coherence, c.t_coherence, c.qsnr_opt, c.t_opt])
        .collect();
    let points: Vec<Value> = runs.iter().map(|(_, c)| json!(c)).collect();
    out.summary.insert("curve".into(), Value::Array(points));
    out.optima = runs
        .iter()
        .map(|(_, c)| OptSearchResult {
            key: c.kappa,
            argmax: c.t_opt,
            value: c.qsnr_opt,
            bracket: (0.0, p.t_max),
            tolerance: OPT_TOL,
        })
        .collect();
    out.series = runs.into_iter().map(|(s, _)| s).collect();
    Ok(out)
}

/// Parametric points of a coherence run, in κ order.
pub fn coherence_points(result: &ScanResult) -> Vec<CoherencePoint> {
    result
        .rows
        .iter()
        .map(|r| CoherencePoint {
            kappa: r[0],
            max_coherence: r[1],
            t_coherence: r[2],
            qsnr_opt: r[3],
            t_opt: r[4],
        })
        .collect()
}

/// First time the QFI reaches `frac` of `target`, linearly interpolated.
pub fn time_to_fraction(records: &[EstimateRecord], target: f64, frac: f64) -> Option<f64> {
    let level = frac * target;
    let i = records.iter().position(|r| r.qfi >= level)?;
    if i == 0 {
        return Some(records[0].t);
    }
    let (a, b) = (&records[i - 1], &records[i]);
    Some(a.t + (level - a.qfi) * (b.t - a.t) / (b.qfi - a.qfi))
}

pub const TWO_QUBIT_CONFIGS: [(&str, BathKind, f64); 4] = [
    ("common_entangled", BathKind::Common, FRAC_PI_2),
    ("common_separable", BathKind::Common, 0.0),
    ("local_entangled", BathKind::Local, FRAC_PI_2),
    ("local_separable", BathKind::Local, 0.0),
];

/// Full two-qubit QFI for {common, local} baths × {entangled, separable}
/// preparations, out to the steady state.
pub fn run_two_qubit_configs(p: &Params) -> Result<ScanResult> {
    let grid = Grid::log_dense(p.t_max, p.n_points);
    let idx: Vec<usize> = (0..TWO_QUBIT_CONFIGS.len()).collect();
    let series = parallel::try_map(&idx, |&i| -> Result<Series> {
        let (label, bath, theta) = TWO_QUBIT_CONFIGS[i];
        let probe = Probe::for_model(p.two_qubit_model(bath, theta)?);
        Ok(Series {
            label: label.to_string(),
            key: i as f64,
            records: probe.records(&grid)?,
        })
    })?;
    let mut out = ScanResult::new(Experiment::TwoQubitConfigs, p);
    out.columns = record_columns(&["config"]);
    out.rows = long_rows(&series);
    let exact = steady_qfi(p.kappa, p.temperature);
    let finals: Vec<f64> = series.iter().map(|s| s.records.last().expect("non-empty grid").qfi).collect();
    let mut spread = 0.0_f64;
    for a in &finals {
        for b in &finals {
            spread = spread.max((a - b).abs());
        }
    }
    let configs: Vec<Value> = series
        .iter()
        .zip(&finals)
        .map(|(s, f)| {
            let slack = s.records.iter().map(|r| r.qfi - f).fold(f64::NEG_INFINITY, f64::max);
            json!({
                "config": s.label,
                "steady_qfi": f,
                "relative_error": (f - exact).abs() / exact,
                "t99": time_to_fraction(&s.records, *f, 0.99),
                "peak_excess_over_final": slack,
            })
        })
        .collect();
    out.summary.insert("configs".into(), Value::Array(configs));
    out.summary.insert("steady_qfi_closed_form".into(), json!(exact));
    out.summary.insert("pairwise_max_diff".into(), json!(spread));
    out.series = series;
    Ok(out)
}

/// Steady QSNR against κ/T, with the optimum located on the grid and by
/// root finding, plus the optimal (κ, T) line.
pub fn run_steady_qsnr_curve(p: &Params) -> Result<ScanResult> {
    let n = p.n_ratios;
    let xs: Vec<f64> = (0..n)
        .map(|k| p.ratio_min + (p.ratio_max - p.ratio_min) * k as f64 / (n - 1) as f64)
        .collect();
    let temperature = p.temperature;
    let numeric = parallel::try_map(&xs, |&x| -> Result<f64> {
        let kappa = x * temperature;
        let fam = |t: f64| Ok(steady_two_qubit(kappa, t).into_matrix());
        let d = d_rho_dt(fam, temperature, None)?;
        let f = qfi_spectral(&steady_two_qubit(kappa, temperature), &d, EIG_CUTOFF)?;
        Ok(metrology::qsnr(temperature, f))
    })?;
    let closed: Vec<f64> = xs.iter().map(|&x| steady_qsnr_ratio(x)).collect();
    let located = refine_max("steady qsnr", 0.0, &xs, &closed, |x| Ok(steady_qsnr_ratio(x)), 1e-9)?;
    let (x_star, qsnr_star) = optimal_ratio();
    let line: Vec<Value> = (1..=20)
        .map(|k| {
            let t = 0.1 * k as f64;
            json!({"kappa": x_star * t, "temperature": t, "qsnr": t * t * steady_qfi(x_star * t, t)})
        })
        .collect();
    let mut out = ScanResult::new(Experiment::SteadyQsnr, p);
    out.columns = vec!["ratio", "qsnr", "qsnr_numeric"];
    out.rows = xs
        .iter()
        .zip(closed.iter().zip(&numeric))
        .map(|(x, (a, b))| vec![*x, *a, *b])
        .collect();
    out.summary.insert("x_star".into(), json!(x_star));
    out.summary.insert("qsnr_star".into(), json!(qsnr_star));
    out.summary.insert("x_star_located".into(), json!(located.argmax));
    out.summary.insert("qsnr_star_located".into(), json!(located.value));
    out.summary.insert("optimal_line".into(), Value::Array(line));
    out.optima = vec![located];
    Ok(out)
}

/// Density-matrix trajectory of the selected model.
pub fn run_evolve(p: &Params) -> Result<ScanResult> {
    let model = p.selected_model()?;
    let l = build_liouvillian(&model)?;
    let traj = trajectory(&l, &model.initial_state(), p.t_max, p.n_points, None)?;
    let d = model.dim();
    const NAMES: [&str; 16] = [
        "00", "01", "02", "03", "10", "11", "12", "13", "20", "21", "22", "23", "30", "31", "32", "33",
    ];
    let mut out = ScanResult::new(Experiment::Evolve, p);
    out.columns = vec!["t"];
    let names: Vec<&'static str> = (0..d)
        .flat_map(|i| (0..d).map(move |j| NAMES[4 * i + j]))
        .collect();
    for n in &names {
        out.columns.push(Box::leak(format!("re_{n}").into_boxed_str()));
        out.columns.push(Box::leak(format!("im_{n}").into_boxed_str()));
    }
    out.columns.push("purity");
    out.rows = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(t, s)| {
            let mut row = vec![*t];
            for i in 0..d {
                for j in 0..d {
                    row.push(s[(i, j)].re);
                    row.push(s[(i, j)].im);
                }
            }
            row.push(s.purity());
            row
        })
        .collect();
    let last = traj.states.last().expect("non-empty trajectory");
    out.summary.insert("dim".into(), json!(d));
    out.summary.insert("final_purity".into(), json!(last.purity()));
    out.summary.insert("liouvillian_trace_defect".into(), json!(l.trace_defect()));
    Ok(out)
}

/// Figures of merit of the selected model at time `t`.
pub fn run_qfi_point(p: &Params) -> Result<ScanResult> {
    let probe = Probe::for_model(p.selected_model()?);
    let r = probe.record_at(p.t)?;
    let mut out = ScanResult::new(Experiment::QfiPoint, p);
    out.columns = RECORD_COLUMNS.to_vec();
    out.rows = vec![record_row(&[], &r)];
    out.summary.insert("record".into(), json!({
        "t": r.t, "qfi": r.qfi, "cfi": r.cfi, "qsnr": r.qsnr, "qfi_per_t": r.qfi_per_t, "coherence_abs": r.coherence_abs,
    }));
    out.series = vec![Series {
        label: "point".into(),
        key: p.t,
        records: vec![r],
    }];
    Ok(out)
}

/// Runs `experiment` with its sweep lists taken from `p`.
pub fn run(experiment: Experiment, p: &Params) -> Result<ScanResult> {
    p.validate(experiment)?;
    match experiment {
        Experiment::ThetaScan => run_theta_scan(&p.thetas, p),
        Experiment::DirectVsAncilla => run_direct_vs_ancilla(p),
        Experiment::KappaSweep => run_kappa_sweep(&p.kappas, p).map(|r| r.0),
        Experiment::CoherenceParametric => run_coherence_parametric(&p.kappas, p),
        Experiment::TwoQubitConfigs => run_two_qubit_configs(p),
        Experiment::SteadyQsnr => run_steady_qsnr_curve(p),
        Experiment::Evolve => run_evolve(p),
        Experiment::QfiPoint => run_qfi_point(p),
    }
}
