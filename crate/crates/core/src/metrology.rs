//! Fisher information about temperature: numerical ∂_T, spectral and
//! Bloch-form QFI, the qubit SLD, classical and single-observable Fisher
//! information, and the QSNR.

use log::warn;
use thiserror::Error;

use crate::evolve::EvolveError;
use crate::gme::GmeError;
use crate::models::ModelError;
use crate::parallel;
use crate::qmat::{self, c, eig_hermitian, max_abs, pauli, Axis, ComplexMatrix, DensityMatrix, QmatError, C64};

/// Pairs with λ_k + λ_l below this are left out of the spectral sum.
pub const EIG_CUTOFF: f64 = 1e-12;
/// Dropped numerators above this trigger a warning.
const DROPPED_NUMERATOR: f64 = 1e-24;
/// Relative disagreement between steps h and h/2 tolerated by ∂_T.
pub const RICHARDSON_TOL: f64 = 1e-5;
/// Absolute accuracy assumed for evolved states. Divided by the step it
/// sets the noise floor of the Richardson check, so derivatives that vanish
/// at long times are not mistaken for truncation error.
pub const STATE_ROUNDOFF: f64 = 1e-12;
/// Bloch vectors this close to the surface go through the spectral formula.
pub const PURE_MARGIN: f64 = 1e-9;
const TINY_PROB: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetrologyError {
    #[error("finite-difference step too large: h and h/2 disagree by {rel:.3e} (relative)")]
    StepTooLarge { rel: f64 },
    #[error("step {h} is not valid at temperature {temperature}")]
    InvalidStep { h: f64, temperature: f64 },
    #[error("state is pure to within {0:.3e}; Bloch formula is singular")]
    PureStateSingularity(f64),
    #[error("outcome {index} has probability {p:.3e} but derivative {dp:.3e}")]
    SingularOutcome { index: usize, p: f64, dp: f64 },
    #[error("observable has zero variance")]
    ZeroVariance,
    #[error("invalid distribution: {0}")]
    BadDistribution(String),
    #[error("state family returned inconsistent output: {0}")]
    Family(String),
    #[error(transparent)]
    Evolve(#[from] EvolveError),
    #[error(transparent)]
    Gme(#[from] GmeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] QmatError),
}

pub type Result<T> = std::result::Result<T, MetrologyError>;

pub fn default_step(temperature: f64) -> f64 {
    (1e-4 * temperature).max(1e-5)
}

/// Central differences of a family of matrices, checked against the half
/// step. Returns the estimate at step `h`.
pub fn d_rho_dt_many<F>(state_fn: F, temperature: f64, h: Option<f64>) -> Result<Vec<ComplexMatrix>>
where
    F: Fn(f64) -> Result<Vec<ComplexMatrix>> + Sync + Send,
{
    let h = h.unwrap_or_else(|| default_step(temperature));
    if !(h > 0.0) || !(temperature - h > 0.0) || !h.is_finite() {
        return Err(MetrologyError::InvalidStep { h, temperature });
    }
    let temps = [temperature + h, temperature - h, temperature + h / 2.0, temperature - h / 2.0];
    let evals = parallel::try_map(&temps, |&t| state_fn(t))?;
    let n = evals[0].len();
    if evals.iter().any(|e| e.len() != n) {
        return Err(MetrologyError::Family("length depends on temperature".into()));
    }
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let coarse = (&evals[0][k] - &evals[1][k]) / c(2.0 * h, 0.0);
        let fine = (&evals[2][k] - &evals[3][k]) / c(h, 0.0);
        let diff = max_abs(&(&coarse - &fine));
        let scale = max_abs(&fine);
        if diff > RICHARDSON_TOL * scale + STATE_ROUNDOFF / h {
            return Err(MetrologyError::StepTooLarge {
                rel: diff / scale.max(f64::MIN_POSITIVE),
            });
        }
        out.push(coarse);
    }
    Ok(out)
}

/// ∂ρ/∂T of a single state family.
pub fn d_rho_dt<F>(state_fn: F, temperature: f64, h: Option<f64>) -> Result<ComplexMatrix>
where
    F: Fn(f64) -> Result<ComplexMatrix> + Sync + Send,
{
    let mut v = d_rho_dt_many(|t| Ok(vec![state_fn(t)?]), temperature, h)?;
    Ok(v.remove(0))
}

/// ℱ = 2 Σ |⟨k|∂ρ|l⟩|² / (λ_k + λ_l) over pairs above `eig_cutoff`.
pub fn qfi_spectral(rho: &DensityMatrix, drho: &ComplexMatrix, eig_cutoff: f64) -> Result<f64> {
    let e = eig_hermitian(rho.matrix())?;
    let v = &e.vectors;
    let d = v.adjoint() * drho * v;
    let mut f = 0.0;
    let mut worst_dropped = 0.0_f64;
    for k in 0..rho.dim() {
        for l in 0..rho.dim() {
            let den = e.values[k] + e.values[l];
            let num = d[(k, l)].norm_sqr();
            if den > eig_cutoff {
                f += num / den;
            } else {
                worst_dropped = worst_dropped.max(num);
            }
        }
    }
    if worst_dropped >= DROPPED_NUMERATOR {
        warn!("qfi_spectral dropped a pair with numerator {worst_dropped:.3e} below the eigenvalue cutoff");
    }
    Ok(2.0 * f)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BlochVector {
    pub rx: f64,
    pub ry: f64,
    pub rz: f64,
}

impl BlochVector {
    pub fn new(rx: f64, ry: f64, rz: f64) -> Self {
        Self { rx, ry, rz }
    }

    /// Components of a qubit matrix ρ = (a₀𝕀 + r·σ)/2. Linear, so it also
    /// maps ∂ρ to ∂r.
    pub fn from_matrix(m: &ComplexMatrix) -> Result<Self> {
        if m.shape() != (2, 2) {
            return Err(QmatError::BadDimension {
                expected: 2,
                got: m.nrows(),
            }
            .into());
        }
        Ok(Self {
            rx: 2.0 * m[(0, 1)].re,
            ry: -2.0 * m[(0, 1)].im,
            rz: (m[(0, 0)] - m[(1, 1)]).re,
        })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.dot(self)
    }

    pub fn dot(&self, o: &Self) -> f64 {
        self.rx * o.rx + self.ry * o.ry + self.rz * o.rz
    }

    pub fn purity(&self) -> f64 {
        0.5 * (1.0 + self.norm_sqr())
    }

    pub fn to_state(&self) -> DensityMatrix {
        DensityMatrix::new_unchecked(self.to_traceless().map(|z| z * 0.5) + qmat::identity(2).scale(0.5))
    }

    /// r·σ
    pub fn to_traceless(&self) -> ComplexMatrix {
        pauli(Axis::X).scale(self.rx) + pauli(Axis::Y).scale(self.ry) + pauli(Axis::Z).scale(self.rz)
    }
}

fn check_mixed(r: &BlochVector) -> Result<()> {
    let r2 = r.norm_sqr();
    if r2 > 1.0 - PURE_MARGIN {
        return Err(MetrologyError::PureStateSingularity(1.0 - r2));
    }
    Ok(())
}

/// Bloch-form QFI of a mixed qubit.
pub fn qfi_bloch(r: &BlochVector, dr: &BlochVector) -> Result<f64> {
    check_mixed(r)?;
    let p = r.purity();
    let dp = r.dot(dr);
    Ok(dp * dp * (1.0 - r.norm_sqr()) / (4.0 * (p - 1.0) * (p - 1.0)) + dr.norm_sqr())
}

/// Qubit QFI; uses the Bloch form and falls back to the spectral sum near
/// pure states.
pub fn qfi_qubit(rho: &DensityMatrix, drho: &ComplexMatrix) -> Result<f64> {
    let r = BlochVector::from_matrix(rho.matrix())?;
    let dr = BlochVector::from_matrix(drho)?;
    match qfi_bloch(&r, &dr) {
        Err(MetrologyError::PureStateSingularity(_)) => qfi_spectral(rho, drho, EIG_CUTOFF),
        other => other,
    }
}

/// Λ = c₀𝕀 + c_xσ_x + c_yσ_y + c_zσ_z
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SldOperator {
    pub c0: f64,
    pub cx: f64,
    pub cy: f64,
    pub cz: f64,
}

impl SldOperator {
    pub fn matrix(&self) -> ComplexMatrix {
        qmat::identity(2).scale(self.c0) + BlochVector::new(self.cx, self.cy, self.cz).to_traceless()
    }
}

pub fn sld(r: &BlochVector, dr: &BlochVector) -> Result<SldOperator> {
    check_mixed(r)?;
    let p = r.purity();
    let dp = r.dot(dr);
    let g = dp / (2.0 - 2.0 * p);
    Ok(SldOperator {
        c0: dp / (2.0 * (p - 1.0)),
        cx: r.rx * g + dr.rx,
        cy: r.ry * g + dr.ry,
        cz: r.rz * g + dr.rz,
    })
}

/// F^C = Σ (∂p)²/p
pub fn cfi_povm(probs: &[f64], dprobs: &[f64]) -> Result<f64> {
    if probs.len() != dprobs.len() || probs.is_empty() {
        return Err(MetrologyError::BadDistribution("length mismatch".into()));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(MetrologyError::BadDistribution(format!("probabilities sum to {total}")));
    }
    let dtotal: f64 = dprobs.iter().sum();
    if dtotal.abs() > 1e-8 {
        return Err(MetrologyError::BadDistribution(format!("derivatives sum to {dtotal}")));
    }
    let mut f = 0.0;
    for (index, (&p, &dp)) in probs.iter().zip(dprobs).enumerate() {
        if p < -1e-12 || !p.is_finite() || !dp.is_finite() {
            return Err(MetrologyError::BadDistribution(format!("outcome {index}: p = {p}")));
        }
        if p < TINY_PROB {
            if dp.abs() < TINY_PROB {
                continue;
            }
            return Err(MetrologyError::SingularOutcome { index, p, dp });
        }
        f += dp * dp / p;
    }
    Ok(f)
}

/// Outcome probabilities and their derivatives for a projective
/// measurement in an orthonormal basis.
pub fn projective_distribution(
    rho: &DensityMatrix,
    drho: &ComplexMatrix,
    basis: &[Vec<C64>],
) -> (Vec<f64>, Vec<f64>) {
    let quad = |m: &ComplexMatrix, v: &[C64]| -> f64 {
        let mut s = c(0.0, 0.0);
        for i in 0..v.len() {
            for j in 0..v.len() {
                s += v[i].conj() * m[(i, j)] * v[j];
            }
        }
        s.re
    };
    basis
        .iter()
        .map(|v| (quad(rho.matrix(), v), quad(drho, v)))
        .unzip()
}

/// CFI of a projective measurement in `basis`.
pub fn cfi_projective(rho: &DensityMatrix, drho: &ComplexMatrix, basis: &[Vec<C64>]) -> Result<f64> {
    let (p, dp) = projective_distribution(rho, drho, basis);
    cfi_povm(&p, &dp)
}

/// ℐ = (∂⟨X⟩)² / ⟨ΔX²⟩ given the state and its derivative.
pub fn measurement_fi_from(observable: &ComplexMatrix, rho: &DensityMatrix, drho: &ComplexMatrix) -> Result<f64> {
    if !qmat::is_hermitian(observable, qmat::HERMITIAN_TOL * (1.0 + max_abs(observable))) {
        return Err(QmatError::NonHermitianInput(qmat::hermiticity_defect(observable)).into());
    }
    let mean = rho.expectation(observable).re;
    let second = rho.expectation(&(observable * observable)).re;
    let var = second - mean * mean;
    if var <= TINY_PROB {
        return Err(MetrologyError::ZeroVariance);
    }
    let dmean = qmat::trace(&(drho * observable)).re;
    Ok(dmean * dmean / var)
}

/// ℐ for a temperature family, with ∂_T taken numerically.
pub fn measurement_fi<F>(observable: &ComplexMatrix, rho_fn: F, temperature: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<DensityMatrix> + Sync + Send,
{
    let rho = rho_fn(temperature)?;
    let drho = d_rho_dt(|t| Ok(rho_fn(t)?.into_matrix()), temperature, None)?;
    measurement_fi_from(observable, &rho, &drho)
}

pub fn qsnr(temperature: f64, qfi: f64) -> f64 {
    temperature * temperature * qfi
}

/// Figures of merit at one time point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateRecord {
    pub t: f64,
    pub qfi: f64,
    pub cfi: f64,
    pub qsnr: f64,
    pub qfi_per_t: f64,
    pub coherence_abs: f64,
}

impl EstimateRecord {
    pub fn new(t: f64, temperature: f64, qfi: f64, cfi: f64, coherence_abs: f64) -> Self {
        Self {
            t,
            qfi,
            cfi,
            qsnr: qsnr(temperature, qfi),
            qfi_per_t: if t > 0.0 { qfi / t } else { 0.0 },
            coherence_abs,
        }
    }

    /// Fails when the measurement FI exceeds the QFI beyond `slack`.
    pub fn check(&self, temperature: f64, slack: f64) -> std::result::Result<(), String> {
        if self.cfi > self.qfi + slack {
            return Err(format!("t = {}: cfi {} exceeds qfi {}", self.t, self.cfi, self.qfi));
        }
        if (self.qsnr - qsnr(temperature, self.qfi)).abs() > 1e-12 * self.qsnr.abs().max(1.0) {
            return Err(format!("t = {}: qsnr inconsistent", self.t));
        }
        if self.qfi < 0.0 || self.cfi < 0.0 {
            return Err(format!("t = {}: negative Fisher information", self.t));
        }
        Ok(())
    }
}

/// Record for a qubit state measured in σ_x. The measurement FI is set to
/// zero where σ_x has no variance.
pub fn qubit_record(t: f64, temperature: f64, rho: &DensityMatrix, drho: &ComplexMatrix) -> Result<EstimateRecord> {
    let qfi = qfi_qubit(rho, drho)?;
    let cfi = match measurement_fi_from(&pauli(Axis::X), rho, drho) {
        Ok(v) => v,
        Err(MetrologyError::ZeroVariance) => 0.0,
        Err(e) => return Err(e),
    };
    Ok(EstimateRecord::new(t, temperature, qfi, cfi, rho[(0, 1)].norm()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{steady_qfi, steady_two_qubit};
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn binary(m: f64) -> DensityMatrix {
        BlochVector::new(0.0, 0.0, m).to_state()
    }

    #[test]
    fn constant_family_has_zero_derivative() {
        let d = d_rho_dt(|_| Ok(qmat::identity(2).scale(0.5)), 0.4, None).unwrap();
        assert!(max_abs(&d) == 0.0);
    }

    #[test]
    fn steady_state_derivative_matches_closed_form() {
        let (k, t) = (0.6, 0.4);
        let d = d_rho_dt(|t| Ok(steady_two_qubit(k, t).into_matrix()), t, None).unwrap();
        // 40-digit value of ∂_T(−tanh(κ/T)/2)
        let want = 0.338_824_947_981_840_99;
        assert!((d[(1, 2)].re - want).abs() < 1e-7);
        assert!((d[(2, 1)].re - want).abs() < 1e-7);
        assert!(qmat::trace(&d).norm() < 1e-8);
        assert!(qmat::hermiticity_defect(&d) < 1e-12);
    }

    #[test]
    fn halving_the_step_quarters_the_error() {
        let (k, t) = (0.6_f64, 0.4_f64);
        let exact = k / (2.0 * t * t) / (k / t).cosh().powi(2);
        let err = |h: f64| {
            let d = (steady_two_qubit(k, t + h).matrix() - steady_two_qubit(k, t - h).matrix()) / c(2.0 * h, 0.0);
            (d[(1, 2)].re - exact).abs()
        };
        let ratio = err(1e-2) / err(5e-3);
        assert!((ratio - 4.0).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn rough_family_is_rejected() {
        let f = |t: f64| Ok(qmat::identity(1).scale((1e6 * t).sin()));
        assert!(matches!(d_rho_dt(f, 0.4, Some(1e-3)), Err(MetrologyError::StepTooLarge { .. })));
        assert!(matches!(
            d_rho_dt(|_| Ok(qmat::identity(1)), 0.4, Some(0.5)),
            Err(MetrologyError::InvalidStep { .. })
        ));
    }

    #[test]
    fn binary_family_reduces_to_classical_fi() {
        let (m, dm) = (0.3, 0.7);
        let drho = pauli(Axis::Z).scale(dm / 2.0);
        let want = dm * dm / (1.0 - m * m);
        assert!((qfi_spectral(&binary(m), &drho, EIG_CUTOFF).unwrap() - want).abs() < 1e-14);
        assert_eq!(qfi_spectral(&binary(m), &ComplexMatrix::zeros(2, 2), EIG_CUTOFF).unwrap(), 0.0);
    }

    #[test]
    fn steady_state_qfi_matches_closed_form() {
        let (k, t) = (0.6, 0.4);
        let rho = steady_two_qubit(k, t);
        let d = d_rho_dt(|t| Ok(steady_two_qubit(k, t).into_matrix()), t, None).unwrap();
        let f = qfi_spectral(&rho, &d, EIG_CUTOFF).unwrap();
        assert!((f / steady_qfi(k, t) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn doublet_measurement_saturates_steady_qfi() {
        let (k, t) = (0.6, 0.4);
        let rho = steady_two_qubit(k, t);
        let d = d_rho_dt(|t| Ok(steady_two_qubit(k, t).into_matrix()), t, None).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let z = c(0.0, 0.0);
        let basis = vec![
            vec![c(1.0, 0.0), z, z, z],
            vec![z, c(s, 0.0), c(s, 0.0), z],
            vec![z, c(s, 0.0), c(-s, 0.0), z],
            vec![z, z, z, c(1.0, 0.0)],
        ];
        let f = cfi_projective(&rho, &d, &basis).unwrap();
        assert!((f / steady_qfi(k, t) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn cfi_examples() {
        assert_eq!(cfi_povm(&[0.25; 4], &[0.0; 4]).unwrap(), 0.0);
        assert!(matches!(
            cfi_povm(&[1.0, 0.0], &[-1e-3, 1e-3]),
            Err(MetrologyError::SingularOutcome { index: 1, .. })
        ));
        assert!(cfi_povm(&[0.5, 0.6], &[0.0, 0.0]).is_err());
        assert!(cfi_povm(&[0.5, 0.5], &[0.1, 0.0]).is_err());
        assert_eq!(cfi_povm(&[1.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn measurement_fi_examples() {
        let fam = |t: f64| Ok(BlochVector::new((-t).exp(), 0.0, 0.1).to_state());
        assert!(matches!(
            measurement_fi(&qmat::identity(2), fam, 0.4),
            Err(MetrologyError::ZeroVariance)
        ));
        let rx = (-0.4_f64).exp();
        let want = rx * rx / (1.0 - rx * rx);
        let got = measurement_fi(&pauli(Axis::X), fam, 0.4).unwrap();
        assert!((got - want).abs() < 1e-8);
        assert!(measurement_fi_from(&ComplexMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)]), &binary(0.0), &ComplexMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn pure_states_use_the_spectral_route() {
        let r = BlochVector::new(0.0, 0.0, 1.0);
        let dr = BlochVector::new(0.3, 0.0, 0.0);
        assert!(matches!(qfi_bloch(&r, &dr), Err(MetrologyError::PureStateSingularity(_))));
        assert!(sld(&r, &dr).is_err());
        let f = qfi_qubit(&r.to_state(), &dr.to_traceless().scale(0.5)).unwrap();
        // a pure qubit rotated at rate 0.3 carries QFI 0.09
        assert!((f - 0.09).abs() < 1e-12);
    }

    #[test]
    fn zero_derivative_gives_zero_sld() {
        let s = sld(&BlochVector::new(0.1, 0.2, 0.3), &BlochVector::default()).unwrap();
        assert_eq!((s.c0, s.cx, s.cy, s.cz), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(qfi_bloch(&BlochVector::new(0.1, 0.2, 0.3), &BlochVector::default()).unwrap(), 0.0);
    }

    #[test]
    fn record_invariants() {
        let r = EstimateRecord::new(2.0, 0.4, 3.0, 2.5, 0.1);
        assert_eq!(r.qsnr, 0.4 * 0.4 * 3.0);
        assert_eq!(r.qfi_per_t, 1.5);
        assert!(r.check(0.4, 1e-9).is_ok());
        assert!(EstimateRecord::new(2.0, 0.4, 3.0, 3.1, 0.1).check(0.4, 1e-9).is_err());
        assert_eq!(EstimateRecord::new(0.0, 0.4, 0.0, 0.0, 0.0).qfi_per_t, 0.0);
    }

    fn ball_vector() -> impl Strategy<Value = BlochVector> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, 0.0..0.995f64).prop_map(|(x, y, z, len)| {
            let n = (x * x + y * y + z * z).sqrt().max(1e-3);
            BlochVector::new(len * x / n, len * y / n, len * z / n)
        })
    }

    fn any_vector() -> impl Strategy<Value = BlochVector> {
        (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64).prop_map(|(x, y, z)| BlochVector::new(x, y, z))
    }

    /// Haar-ish random unitary from the QR factor of a complex Gaussian-like
    /// matrix.
    fn random_basis(entries: &[f64]) -> Vec<Vec<C64>> {
        let m = DMatrix::from_fn(4, 4, |i, j| c(entries[2 * (4 * i + j)], entries[2 * (4 * i + j) + 1]));
        let q = m.qr().q();
        (0..4).map(|k| q.column(k).iter().copied().collect()).collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn bloch_and_spectral_qfi_agree(r in ball_vector(), dr in any_vector()) {
            let rho = r.to_state();
            let drho = dr.to_traceless().scale(0.5);
            let fb = qfi_bloch(&r, &dr).unwrap();
            let fs = qfi_spectral(&rho, &drho, EIG_CUTOFF).unwrap();
            prop_assert!((fb - fs).abs() <= 1e-9 * fb.max(1.0), "{} vs {}", fb, fs);
        }

        #[test]
        fn sld_defining_relations(r in ball_vector(), dr in any_vector()) {
            let rho = r.to_state();
            let drho = dr.to_traceless().scale(0.5);
            let l = sld(&r, &dr).unwrap().matrix();
            let sym = (rho.matrix() * &l + &l * rho.matrix()).scale(0.5);
            let f = qfi_bloch(&r, &dr).unwrap();
            let scale = f.max(1.0);
            prop_assert!(max_abs(&(sym - &drho)) <= 1e-8 * scale);
            prop_assert!(rho.expectation(&l).norm() <= 1e-8 * scale);
            prop_assert!((rho.expectation(&(&l * &l)).re - f).abs() <= 1e-8 * scale);
        }

        #[test]
        fn sld_eigenbasis_is_optimal(r in ball_vector(), dr in any_vector()) {
            let rho = r.to_state();
            let drho = dr.to_traceless().scale(0.5);
            let l = sld(&r, &dr).unwrap().matrix();
            let e = eig_hermitian(&l).unwrap();
            let basis = vec![e.vector(0), e.vector(1)];
            let f = qfi_bloch(&r, &dr).unwrap();
            if let Ok(fc) = cfi_projective(&rho, &drho, &basis) {
                prop_assert!((fc - f).abs() <= 1e-7 * f.max(1.0), "{} vs {}", fc, f);
            }
        }

        #[test]
        fn projective_cfi_never_exceeds_steady_qfi(
            entries in proptest::collection::vec(-1.0..1.0f64, 32),
            k in 0.1..2.0f64,
            t in 0.1..2.0f64,
        ) {
            let rho = steady_two_qubit(k, t);
            let d = d_rho_dt(|t| Ok(steady_two_qubit(k, t).into_matrix()), t, None).unwrap();
            let f = qfi_spectral(&rho, &d, EIG_CUTOFF).unwrap();
            let (p, dp) = projective_distribution(&rho, &d, &random_basis(&entries));
            if let Ok(fc) = cfi_povm(&p, &dp) {
                prop_assert!(fc <= f + 1e-9 * f.max(1.0), "{} > {}", fc, f);
            }
        }

        #[test]
        fn spectral_qfi_ignores_degenerate_rotations(
            r in ball_vector(), a in -1.0..1.0f64, b in -1.0..1.0f64
        ) {
            // 4-level state with a doubly degenerate zero block
            let q = r.to_state();
            let mut rho = ComplexMatrix::zeros(4, 4);
            rho.view_mut((0, 0), (2, 2)).copy_from(q.matrix());
            let mut drho = ComplexMatrix::zeros(4, 4);
            drho[(0, 2)] = c(a, b);
            drho[(2, 0)] = c(a, -b);
            drho[(1, 3)] = c(b, 0.0);
            drho[(3, 1)] = c(b, 0.0);
            let f = qfi_spectral(&DensityMatrix::new_unchecked(rho.clone()), &drho, EIG_CUTOFF).unwrap();
            let u = {
                let mut u = ComplexMatrix::identity(4, 4);
                let (cs, sn) = (a.cos(), a.sin());
                u[(2, 2)] = c(cs, 0.0);
                u[(2, 3)] = c(-sn, 0.0);
                u[(3, 2)] = c(sn, 0.0);
                u[(3, 3)] = c(cs, 0.0);
                u
            };
            let rot = |m: &ComplexMatrix| &u * m * u.adjoint();
            let g = qfi_spectral(&DensityMatrix::new_unchecked(rot(&rho)), &rot(&drho), EIG_CUTOFF).unwrap();
            prop_assert!((f - g).abs() <= 1e-9 * f.max(1.0));
            prop_assert!(f >= 0.0);
        }
    }
}
