//! Global Markovian master equation.
//!
//! Jump operators are built in the eigenbasis of the full system Hamiltonian,
//! A(ω) = Σ_{E_m − E_n = ω} Π(n) A Π(m), and every Bohr frequency gets the
//! rate of an Ohmic bath:
//!
//! * ω > 0: 2πJ(ω)(n(ω) + 1)  (emission)
//! * ω < 0: 2πJ(|ω|)n(|ω|)    (absorption, A(−ω) = A(ω)†)
//! * ω = 0: 2πηT, the Ohmic limit of 2πJ(ω)n(ω)
//!
//! The generator is stored as a column-stacked superoperator
//! L = −i(𝕀⊗H − Hᵀ⊗𝕀) + Σ γ_ij (Ā_j⊗A_i − ½𝕀⊗A_j†A_i − ½(A_j†A_i)ᵀ⊗𝕀),
//! where i = j gives the ordinary dissipators and i ≠ j the cross terms of a
//! reservoir shared by two coupling operators.

use std::f64::consts::PI;

use thiserror::Error;

use crate::models::{BathSpec, Model, ModelError, ZeroFrequencyRate};
use crate::qmat::{
    self, c, eig_hermitian, identity, kron, max_abs, unvectorize, vectorize, ComplexMatrix,
    QmatError,
};

/// Energies closer than this are one level; Bohr frequencies likewise.
pub const FREQ_TOL: f64 = 1e-9;
/// Jump operators with a smaller max-entry norm are dropped.
pub const PRUNE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GmeError {
    #[error("spectral density needs ω >= 0, got {0}")]
    NegativeFrequency(f64),
    #[error("thermal occupation needs ω > 0 and T > 0, got ω = {omega}, T = {temperature}")]
    NonPositiveInput { omega: f64, temperature: f64 },
    #[error("frequency tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error(transparent)]
    Linalg(#[from] QmatError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub type Result<T> = std::result::Result<T, GmeError>;

/// J(ω) = ηωe^{−ω/Ω}
pub fn spectral_density(omega: f64, bath: &BathSpec) -> Result<f64> {
    if omega < 0.0 {
        return Err(GmeError::NegativeFrequency(omega));
    }
    Ok(ohmic(omega, bath.eta, bath.cutoff))
}

fn ohmic(omega: f64, eta: f64, cutoff: f64) -> f64 {
    eta * omega * (-omega / cutoff).exp()
}

/// Bose–Einstein occupation (e^{ω/T} − 1)^{-1}.
pub fn thermal_occupation(omega: f64, temperature: f64) -> Result<f64> {
    if !(omega > 0.0) || !(temperature > 0.0) {
        return Err(GmeError::NonPositiveInput { omega, temperature });
    }
    Ok(bose(omega, temperature))
}

fn bose(omega: f64, temperature: f64) -> f64 {
    1.0 / (omega / temperature).exp_m1()
}

/// Decay rate attached to the jump operator at signed Bohr frequency `omega`.
pub fn rate(omega: f64, bath: &BathSpec) -> f64 {
    rate_for(omega, bath.eta, bath.cutoff, bath.temperature)
}

/// Same as [`rate`] with an explicit coupling strength; cross terms of a
/// common bath use η = √(η₁η₂), i.e. Γ₁₂(ω) = √(J₁(ω)J₂(ω)).
pub fn rate_for(omega: f64, eta: f64, cutoff: f64, temperature: f64) -> f64 {
    if omega == 0.0 {
        2.0 * PI * eta * temperature
    } else if omega > 0.0 {
        2.0 * PI * ohmic(omega, eta, cutoff) * (bose(omega, temperature) + 1.0)
    } else {
        let w = -omega;
        2.0 * PI * ohmic(w, eta, cutoff) * bose(w, temperature)
    }
}

/// One Bohr frequency ω with its jump operator A(ω).
#[derive(Debug, Clone, PartialEq)]
pub struct JumpChannel {
    pub omega: f64,
    pub op: ComplexMatrix,
    /// Index of the coupling operator (and hence bath) generating this channel.
    pub bath_index: usize,
}

struct Level {
    energy: f64,
    projector: ComplexMatrix,
}

fn energy_levels(h: &ComplexMatrix, freq_tol: f64) -> Result<Vec<Level>> {
    let eig = eig_hermitian(h)?;
    let n = eig.values.len();
    let mut levels: Vec<Level> = Vec::new();
    let mut members: Vec<usize> = Vec::new();
    let flush = |members: &mut Vec<usize>, levels: &mut Vec<Level>| {
        if members.is_empty() {
            return;
        }
        let energy = members.iter().map(|&k| eig.values[k]).sum::<f64>() / members.len() as f64;
        let mut projector = ComplexMatrix::zeros(n, n);
        for &k in members.iter() {
            let v = eig.vectors.column(k);
            projector += v * v.adjoint();
        }
        levels.push(Level { energy, projector });
        members.clear();
    };
    for k in 0..n {
        if let Some(&last) = members.last() {
            if eig.values[k] - eig.values[last] > freq_tol {
                flush(&mut members, &mut levels);
            }
        }
        members.push(k);
    }
    flush(&mut members, &mut levels);
    Ok(levels)
}

/// Decomposes the coupling operator `a` into jump operators of `h`.
///
/// Channels come back sorted by ascending ω, all with `bath_index` 0.
pub fn jump_operators(h: &ComplexMatrix, a: &ComplexMatrix, freq_tol: f64) -> Result<Vec<JumpChannel>> {
    if !(freq_tol > 0.0) {
        return Err(GmeError::BadTolerance(freq_tol));
    }
    let levels = energy_levels(h, freq_tol)?;
    let mut pieces: Vec<(f64, ComplexMatrix)> = Vec::with_capacity(levels.len() * levels.len());
    for upper in &levels {
        for lower in &levels {
            let omega = upper.energy - lower.energy;
            pieces.push((omega, &lower.projector * a * &upper.projector));
        }
    }
    pieces.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut channels: Vec<JumpChannel> = Vec::new();
    let mut group: Vec<(f64, ComplexMatrix)> = Vec::new();
    let emit = |group: &mut Vec<(f64, ComplexMatrix)>, channels: &mut Vec<JumpChannel>| {
        if group.is_empty() {
            return;
        }
        let mut omega = group.iter().map(|g| g.0).sum::<f64>() / group.len() as f64;
        if omega.abs() <= freq_tol {
            omega = 0.0;
        }
        let op = group
            .drain(..)
            .fold(ComplexMatrix::zeros(a.nrows(), a.ncols()), |acc, g| acc + g.1);
        if max_abs(&op) >= PRUNE_TOL {
            channels.push(JumpChannel {
                omega,
                op,
                bath_index: 0,
            });
        }
    };
    for piece in pieces {
        if let Some(first) = group.first() {
            if piece.0 - first.0 > freq_tol {
                emit(&mut group, &mut channels);
            }
        }
        group.push(piece);
    }
    emit(&mut group, &mut channels);
    Ok(channels)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatedChannel {
    pub channel: JumpChannel,
    pub rate: f64,
}

/// Cross dissipator between two coupling operators of a shared reservoir at
/// one Bohr frequency; it enters the generator in both orders.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossChannel {
    pub omega: f64,
    pub first: usize,
    pub second: usize,
    pub rate: f64,
}

#[derive(Debug, Clone)]
pub struct Liouvillian {
    dim: usize,
    hamiltonian: ComplexMatrix,
    superop: ComplexMatrix,
    pub channels: Vec<RatedChannel>,
    pub cross: Vec<CrossChannel>,
}

/// Superoperator of ρ ↦ A_i ρ A_j† − ½{A_j†A_i, ρ}.
fn pair_superop(ai: &ComplexMatrix, aj: &ComplexMatrix) -> ComplexMatrix {
    let d = ai.nrows();
    let id = identity(d);
    let prod = aj.adjoint() * ai;
    kron(&aj.conjugate(), ai) - kron(&id, &prod).scale(0.5) - kron(&prod.transpose(), &id).scale(0.5)
}

fn commutator_superop(h: &ComplexMatrix) -> ComplexMatrix {
    let id = identity(h.nrows());
    (kron(&id, h) - kron(&h.transpose(), &id)) * c(0.0, -1.0)
}

impl Liouvillian {
    /// Generator from a Hamiltonian and an explicit list of (operator, rate)
    /// dissipators.
    pub fn from_parts(h: &ComplexMatrix, dissipators: &[(ComplexMatrix, f64)]) -> Result<Self> {
        if !qmat::is_hermitian(h, qmat::HERMITIAN_TOL * (1.0 + max_abs(h))) {
            return Err(QmatError::NonHermitianInput(qmat::hermiticity_defect(h)).into());
        }
        let mut superop = commutator_superop(h);
        let mut channels = Vec::with_capacity(dissipators.len());
        for (k, (op, rate)) in dissipators.iter().enumerate() {
            superop += pair_superop(op, op).scale(*rate);
            channels.push(RatedChannel {
                channel: JumpChannel {
                    omega: f64::NAN,
                    op: op.clone(),
                    bath_index: k,
                },
                rate: *rate,
            });
        }
        Ok(Self {
            dim: h.nrows(),
            hamiltonian: h.clone(),
            superop,
            channels,
            cross: Vec::new(),
        })
    }

    /// Hilbert-space dimension d (the superoperator is d²×d²).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn superop(&self) -> &ComplexMatrix {
        &self.superop
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hamiltonian
    }

    /// L[ρ] for an arbitrary (not necessarily physical) matrix.
    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        unvectorize(&(&self.superop * vectorize(rho)), self.dim)
    }

    /// Largest |Tr L[E_ij]| over the matrix units E_ij.
    pub fn trace_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let mut e = ComplexMatrix::zeros(d, d);
                e[(i, j)] = c(1.0, 0.0);
                worst = worst.max(qmat::trace(&self.apply(&e)).norm());
            }
        }
        worst
    }

    /// Largest deviation from L[ρ†] = L[ρ]† over the matrix units.
    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let mut e = ComplexMatrix::zeros(d, d);
                e[(i, j)] = c(1.0, 0.0);
                let lhs = self.apply(&e.adjoint());
                let rhs = self.apply(&e).adjoint();
                worst = worst.max(max_abs(&(lhs - rhs)));
            }
        }
        worst
    }
}

fn zero_frequency_allowed(omega: f64, rule: ZeroFrequencyRate) -> bool {
    omega != 0.0 || rule == ZeroFrequencyRate::OhmicLimit
}

/// Assembles the full generator for a model.
pub fn build_liouvillian(model: &Model) -> Result<Liouvillian> {
    model.validate()?;
    let h = model.hamiltonian();
    let couplings = model.coupling_operators();
    let rule = model.zero_frequency();

    let mut superop = commutator_superop(&h);
    let mut per_coupling: Vec<Vec<JumpChannel>> = Vec::with_capacity(couplings.len());
    let mut channels = Vec::new();
    for (k, coupling) in couplings.iter().enumerate() {
        let mut list = jump_operators(&h, &coupling.op, FREQ_TOL)?;
        for ch in &mut list {
            ch.bath_index = k;
            let r = if zero_frequency_allowed(ch.omega, rule) {
                rate(ch.omega, &coupling.bath)
            } else {
                0.0
            };
            if r != 0.0 {
                superop += pair_superop(&ch.op, &ch.op).scale(r);
            }
            channels.push(RatedChannel {
                channel: ch.clone(),
                rate: r,
            });
        }
        per_coupling.push(list);
    }

    let mut cross = Vec::new();
    for i in 0..couplings.len() {
        for j in (i + 1)..couplings.len() {
            if couplings[i].reservoir != couplings[j].reservoir {
                continue;
            }
            let (bi, bj) = (&couplings[i].bath, &couplings[j].bath);
            let eta = (bi.eta * bj.eta).sqrt();
            for ci in &per_coupling[i] {
                let Some(cj) = per_coupling[j]
                    .iter()
                    .find(|cj| (cj.omega - ci.omega).abs() <= FREQ_TOL)
                else {
                    continue;
                };
                if !zero_frequency_allowed(ci.omega, rule) {
                    continue;
                }
                let r = rate_for(ci.omega, eta, bi.cutoff, bi.temperature);
                if r == 0.0 {
                    continue;
                }
                superop += (pair_superop(&ci.op, &cj.op) + pair_superop(&cj.op, &ci.op)).scale(r);
                cross.push(CrossChannel {
                    omega: ci.omega,
                    first: i,
                    second: j,
                    rate: r,
                });
            }
        }
    }

    Ok(Liouvillian {
        dim: h.nrows(),
        hamiltonian: h,
        superop,
        channels,
        cross,
    })
}
