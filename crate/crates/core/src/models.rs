//! The physical scenarios: a directly dephased probe, a probe read out through
//! an ancilla, and two coupled qubits in local or common baths.
//!
//! Units: ħ = k_B = 1 and all frequencies in units of the bare qubit
//! frequency. Basis ordering for two qubits is |00>, |01>, |10>, |11> with the
//! first factor being the probe (or qubit 1).

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qmat::{c, identity, kron, pauli, Axis, ComplexMatrix, DensityMatrix, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

pub type Result<T> = std::result::Result<T, ModelError>;

fn invalid(name: &'static str, reason: impl Into<String>) -> ModelError {
    ModelError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// Ohmic bath with exponential cutoff, J(ω) = η ω e^{-ω/Ω}, at temperature T.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathSpec {
    pub eta: f64,
    pub cutoff: f64,
    pub temperature: f64,
}

impl BathSpec {
    pub fn new(eta: f64, cutoff: f64, temperature: f64) -> Result<Self> {
        let bath = Self {
            eta,
            cutoff,
            temperature,
        };
        bath.validate()?;
        Ok(bath)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(invalid("eta", format!("must be >= 0, got {}", self.eta)));
        }
        if !(self.cutoff > 0.0) || !self.cutoff.is_finite() {
            return Err(invalid("cutoff", format!("must be > 0, got {}", self.cutoff)));
        }
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(invalid(
                "temperature",
                format!("must be > 0, got {}", self.temperature),
            ));
        }
        Ok(())
    }

    pub fn with_temperature(self, temperature: f64) -> Self {
        Self {
            temperature,
            ..self
        }
    }
}

/// How the ω = 0 (pure dephasing) channel of the global master equation is
/// weighted.
///
/// For an Ohmic bath J(ω)n(ω) → ηT as ω → 0, so the channel carries the rate
/// 2πηT under [`ZeroFrequencyRate::OhmicLimit`]. The closed-form probe state
/// of the ancilla model is recovered exactly only when that channel is left
/// out, which is [`ZeroFrequencyRate::Excluded`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroFrequencyRate {
    OhmicLimit,
    Excluded,
}

impl ZeroFrequencyRate {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::OhmicLimit => "ohmic_limit",
            Self::Excluded => "excluded",
        }
    }
}

impl std::str::FromStr for ZeroFrequencyRate {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ohmic_limit" => Ok(Self::OhmicLimit),
            "excluded" => Ok(Self::Excluded),
            other => Err(format!(
                "expected `ohmic_limit` or `excluded`, got `{other}`"
            )),
        }
    }
}

/// Probe qubit coupled to the bath directly through σ_z, prepared in |+>.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectProbeModel {
    pub omega_p: f64,
    pub bath: BathSpec,
    pub zero_frequency: ZeroFrequencyRate,
}

impl DirectProbeModel {
    pub fn new(omega_p: f64, bath: BathSpec) -> Self {
        Self {
            omega_p,
            bath,
            // the ω = 0 channel is the only one this model has
            zero_frequency: ZeroFrequencyRate::OhmicLimit,
        }
    }
}

/// Probe qubit exchange-coupled to an ancilla; only the ancilla sees the bath.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeAncillaModel {
    pub omega_p: f64,
    pub omega_a: f64,
    pub kappa: f64,
    pub bath: BathSpec,
    /// Ancilla preparation angle: cos(θ/2)|0> + sin(θ/2)|1>.
    pub theta: f64,
    pub zero_frequency: ZeroFrequencyRate,
}

impl ProbeAncillaModel {
    /// Resonant probe and ancilla at unit frequency.
    pub fn resonant(kappa: f64, bath: BathSpec, theta: f64) -> Self {
        Self {
            omega_p: 1.0,
            omega_a: 1.0,
            kappa,
            bath,
            theta,
            zero_frequency: ZeroFrequencyRate::Excluded,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BathConfig {
    /// Each qubit has its own reservoir.
    Local { bath1: BathSpec, bath2: BathSpec },
    /// One shared reservoir. `bath1` and `bath2` carry the per-qubit coupling
    /// strengths η₁, η₂; temperature and cutoff must agree.
    Common { bath1: BathSpec, bath2: BathSpec },
}

impl BathConfig {
    pub fn baths(&self) -> [BathSpec; 2] {
        match *self {
            BathConfig::Local { bath1, bath2 } | BathConfig::Common { bath1, bath2 } => {
                [bath1, bath2]
            }
        }
    }

    pub fn is_common(&self) -> bool {
        matches!(self, BathConfig::Common { .. })
    }
}

/// Two resonant qubits with XX+YY exchange coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoQubitModel {
    pub omega0: f64,
    pub kappa: f64,
    pub bath_config: BathConfig,
    /// Initial state cos(θ/2)|01> + sin(θ/2)|10>.
    pub theta: f64,
    pub zero_frequency: ZeroFrequencyRate,
}

impl TwoQubitModel {
    pub fn new(omega0: f64, kappa: f64, bath_config: BathConfig, theta: f64) -> Self {
        Self {
            omega0,
            kappa,
            bath_config,
            theta,
            zero_frequency: ZeroFrequencyRate::Excluded,
        }
    }
}

/// One system operator coupled to a reservoir. Couplings sharing a
/// `reservoir` index belong to the same bath and produce cross terms.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    pub op: ComplexMatrix,
    pub bath: BathSpec,
    pub reservoir: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    Direct(DirectProbeModel),
    ProbeAncilla(ProbeAncillaModel),
    TwoQubit(TwoQubitModel),
}

impl From<DirectProbeModel> for Model {
    fn from(m: DirectProbeModel) -> Self {
        Model::Direct(m)
    }
}

impl From<ProbeAncillaModel> for Model {
    fn from(m: ProbeAncillaModel) -> Self {
        Model::ProbeAncilla(m)
    }
}

impl From<TwoQubitModel> for Model {
    fn from(m: TwoQubitModel) -> Self {
        Model::TwoQubit(m)
    }
}

fn check_finite(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite, got {v}")))
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if (0.0..=std::f64::consts::PI).contains(&theta) {
        Ok(())
    } else {
        Err(invalid("theta", format!("must lie in [0, π], got {theta}")))
    }
}

/// (ω₁/2)σ_z⊗𝕀 + (ω₂/2)𝕀⊗σ_z + (κ/2)(σ_x⊗σ_x + σ_y⊗σ_y)
fn exchange_hamiltonian(omega1: f64, omega2: f64, kappa: f64) -> ComplexMatrix {
    let i2 = identity(2);
    let (x, y, z) = (pauli(Axis::X), pauli(Axis::Y), pauli(Axis::Z));
    kron(&z, &i2).scale(omega1 / 2.0)
        + kron(&i2, &z).scale(omega2 / 2.0)
        + (kron(&x, &x) + kron(&y, &y)).scale(kappa / 2.0)
}

impl Model {
    pub fn validate(&self) -> Result<()> {
        match self {
            Model::Direct(m) => {
                check_finite("omega_p", m.omega_p)?;
                m.bath.validate()
            }
            Model::ProbeAncilla(m) => {
                check_finite("omega_p", m.omega_p)?;
                check_finite("omega_a", m.omega_a)?;
                if !(m.kappa >= 0.0) || !m.kappa.is_finite() {
                    return Err(invalid("kappa", format!("must be >= 0, got {}", m.kappa)));
                }
                check_theta(m.theta)?;
                m.bath.validate()
            }
            Model::TwoQubit(m) => {
                check_finite("omega0", m.omega0)?;
                if !(m.kappa >= 0.0) || !m.kappa.is_finite() {
                    return Err(invalid("kappa", format!("must be >= 0, got {}", m.kappa)));
                }
                check_theta(m.theta)?;
                let [b1, b2] = m.bath_config.baths();
                b1.validate()?;
                b2.validate()?;
                match m.bath_config {
                    BathConfig::Common { .. } => {
                        if b1.temperature != b2.temperature {
                            return Err(invalid(
                                "temperature",
                                "a common bath has a single temperature",
                            ));
                        }
                        if b1.cutoff != b2.cutoff {
                            return Err(invalid("cutoff", "a common bath has a single cutoff"));
                        }
                    }
                    BathConfig::Local { .. } => {
                        if b1.temperature != b2.temperature {
                            log::warn!(
                                "local baths at different temperatures ({} vs {}); \
                                 thermometry assumes a single T",
                                b1.temperature,
                                b2.temperature
                            );
                        }
                    }
                }
                Ok(())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Model::Direct(_) => 2,
            _ => 4,
        }
    }

    pub fn zero_frequency(&self) -> ZeroFrequencyRate {
        match self {
            Model::Direct(m) => m.zero_frequency,
            Model::ProbeAncilla(m) => m.zero_frequency,
            Model::TwoQubit(m) => m.zero_frequency,
        }
    }

    pub fn with_zero_frequency(mut self, rule: ZeroFrequencyRate) -> Self {
        match &mut self {
            Model::Direct(m) => m.zero_frequency = rule,
            Model::ProbeAncilla(m) => m.zero_frequency = rule,
            Model::TwoQubit(m) => m.zero_frequency = rule,
        }
        self
    }

    /// Temperature of the (first) bath.
    pub fn temperature(&self) -> f64 {
        match self {
            Model::Direct(m) => m.bath.temperature,
            Model::ProbeAncilla(m) => m.bath.temperature,
            Model::TwoQubit(m) => m.bath_config.baths()[0].temperature,
        }
    }

    /// Copy of the model with every bath set to temperature `t`; this is the
    /// family ρ_T differentiated by the metrology code.
    pub fn with_temperature(&self, t: f64) -> Self {
        let mut out = *self;
        match &mut out {
            Model::Direct(m) => m.bath = m.bath.with_temperature(t),
            Model::ProbeAncilla(m) => m.bath = m.bath.with_temperature(t),
            Model::TwoQubit(m) => {
                m.bath_config = match m.bath_config {
                    BathConfig::Local { bath1, bath2 } => BathConfig::Local {
                        bath1: bath1.with_temperature(t),
                        bath2: bath2.with_temperature(t),
                    },
                    BathConfig::Common { bath1, bath2 } => BathConfig::Common {
                        bath1: bath1.with_temperature(t),
                        bath2: bath2.with_temperature(t),
                    },
                }
            }
        }
        out
    }

    pub fn hamiltonian(&self) -> ComplexMatrix {
        match self {
            Model::Direct(m) => pauli(Axis::Z).scale(m.omega_p / 2.0),
            Model::ProbeAncilla(m) => exchange_hamiltonian(m.omega_p, m.omega_a, m.kappa),
            Model::TwoQubit(m) => exchange_hamiltonian(m.omega0, m.omega0, m.kappa),
        }
    }

    pub fn coupling_operators(&self) -> Vec<Coupling> {
        let i2 = identity(2);
        let z = pauli(Axis::Z);
        match self {
            Model::Direct(m) => vec![Coupling {
                op: z,
                bath: m.bath,
                reservoir: 0,
            }],
            Model::ProbeAncilla(m) => vec![Coupling {
                op: kron(&i2, &z),
                bath: m.bath,
                reservoir: 0,
            }],
            Model::TwoQubit(m) => {
                let [b1, b2] = m.bath_config.baths();
                let second = if m.bath_config.is_common() { 0 } else { 1 };
                vec![
                    Coupling {
                        op: kron(&z, &i2),
                        bath: b1,
                        reservoir: 0,
                    },
                    Coupling {
                        op: kron(&i2, &z),
                        bath: b2,
                        reservoir: second,
                    },
                ]
            }
        }
    }

    pub fn initial_state(&self) -> DensityMatrix {
        let zero = c(0.0, 0.0);
        let psi: Vec<C64> = match self {
            Model::Direct(_) => vec![c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)],
            Model::ProbeAncilla(m) => {
                // |1>_P ⊗ (cos(θ/2)|0> + sin(θ/2)|1>)_A
                let (s, co) = (m.theta / 2.0).sin_cos();
                vec![zero, zero, c(co, 0.0), c(s, 0.0)]
            }
            Model::TwoQubit(m) => {
                let (s, co) = (m.theta / 2.0).sin_cos();
                vec![zero, c(co, 0.0), c(s, 0.0), zero]
            }
        };
        DensityMatrix::pure(&psi).expect("normalized model state")
    }
}
