//! Closed forms: reduced probe state for the resonant probe-ancilla pair,
//! the two-qubit thermal steady state and its QFI, and the optimal
//! coupling-to-temperature ratio.

use std::f64::consts::PI;

use crate::models::BathSpec;
use crate::qmat::{c, ComplexMatrix, DensityMatrix, C64};

/// Population, coherence and auxiliary rates of the reduced probe state.
/// Valid only for ω_P = ω_A = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeClosedForm {
    pub w: f64,
    pub x: C64,
    pub b: C64,
    pub z1: C64,
    pub z2: C64,
}

impl ProbeClosedForm {
    pub fn new(t: f64, kappa: f64, bath: &BathSpec) -> Self {
        let BathSpec {
            eta,
            cutoff,
            temperature: temp,
        } = *bath;
        let damp = (-2.0 * kappa / cutoff).exp();
        let coth = 1.0 / (kappa / temp).tanh();
        let b = c(2.0 * kappa * PI * eta * damp * coth, 2.0 * kappa);
        let z1 = c(kappa - 1.0, PI * eta * kappa * damp * (coth - 1.0));
        let z2 = c(
            PI * eta * kappa * (kappa * (1.0 / temp - 2.0 / cutoff)).exp() / (kappa / temp).sinh(),
            kappa + 1.0,
        );
        let i = c(0.0, 1.0);
        // sinh(Bt) - cosh(Bt) = -exp(-Bt)
        let w = 0.25 * (-2.0 - (c(1.0, 0.0) + (i * 4.0 * kappa * t).exp()) * (-b * t).exp());
        let x = 0.25 * ((-z2 * t).exp() - (i * z1 * t).exp());
        Self {
            w: w.re,
            x,
            b,
            z1,
            z2,
        }
    }

    pub fn state(&self) -> DensityMatrix {
        let m = ComplexMatrix::from_row_slice(
            2,
            2,
            &[
                c((1.0 + self.w) / 2.0, 0.0),
                self.x,
                self.x.conj(),
                c((1.0 - self.w) / 2.0, 0.0),
            ],
        );
        DensityMatrix::new_unchecked(m)
    }
}

/// Reduced probe state at time `t` from the closed form.
pub fn probe_state_closed_form(t: f64, kappa: f64, bath: &BathSpec) -> DensityMatrix {
    ProbeClosedForm::new(t, kappa, bath).state()
}

/// QFI of a qubit prepared in |+> under pure dephasing at rate
/// Γ = 4πηT, i.e. with the ω = 0 channel at its Ohmic limit.
pub fn direct_probe_qfi(t: f64, bath: &BathSpec) -> f64 {
    let g = 4.0 * PI * bath.eta * bath.temperature;
    let dg = 4.0 * PI * bath.eta * t;
    if t == 0.0 || g == 0.0 {
        return 0.0;
    }
    let e = (-2.0 * g * t).exp();
    dg * dg * e / -(-2.0 * g * t).exp_m1()
}

/// Thermal state of the resonant XX+YY pair restricted to the single
/// excitation sector.
pub fn steady_two_qubit(kappa: f64, temperature: f64) -> DensityMatrix {
    let off = c(-0.5 * (kappa / temperature).tanh(), 0.0);
    let mut m = ComplexMatrix::zeros(4, 4);
    m[(1, 1)] = c(0.5, 0.0);
    m[(2, 2)] = c(0.5, 0.0);
    m[(1, 2)] = off;
    m[(2, 1)] = off;
    DensityMatrix::new_unchecked(m)
}

/// QFI of [`steady_two_qubit`] with respect to temperature.
pub fn steady_qfi(kappa: f64, temperature: f64) -> f64 {
    let x = kappa / temperature;
    if x.abs() > 350.0 {
        return 0.0;
    }
    2.0 * kappa * kappa / (temperature.powi(4) * ((2.0 * x).cosh() + 1.0))
}

/// Steady QSNR as a function of x = κ/T.
pub fn steady_qsnr_ratio(x: f64) -> f64 {
    if x.abs() > 350.0 {
        return 0.0;
    }
    let s = 1.0 / x.cosh();
    x * x * s * s
}

/// Root of tanh x = 1/x and the steady QSNR there.
pub fn optimal_ratio() -> (f64, f64) {
    let f = |x: f64| x.tanh() - 1.0 / x;
    let (mut lo, mut hi) = (1.0_f64, 2.0_f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    (x, steady_qsnr_ratio(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmat::{eig_hermitian, max_abs};

    fn reference_bath() -> BathSpec {
        BathSpec::new(0.01, 10.0, 0.4).unwrap()
    }

    #[test]
    fn closed_form_limits() {
        let b = reference_bath();
        let s0 = ProbeClosedForm::new(0.0, 0.8, &b);
        assert!((s0.w + 1.0).abs() < 1e-15);
        assert!(s0.x.norm() < 1e-15);
        let late = ProbeClosedForm::new(1e5, 0.8, &b);
        assert!(late.x.norm() < 1e-12);
        assert!((late.w + 0.5).abs() < 1e-12);
        assert!(s0.b.re > 0.0 && s0.z2.re > 0.0 && s0.z1.im > 0.0);
    }

    #[test]
    fn closed_form_reference_point() {
        // 40-digit evaluation at t=1, κ=0.8, T=0.4, η=0.01, Ω=10
        let s = ProbeClosedForm::new(1.0, 0.8, &reference_bath());
        assert!((s.b - c(0.044_431_735_731_176_959, 1.6)).norm() < 1e-15);
        assert!((s.z1 - c(-0.2, 0.000_799_158_527_841_114_46)).norm() < 1e-15);
        assert!((s.z2 - c(0.043_632_577_203_335_845, 1.8)).norm() < 1e-15);
        assert!((s.w + 0.486_034_731_395_902_13).abs() < 1e-14);
        assert!((s.x - c(-0.299_196_376_568_821_63, -0.183_439_798_169_900_91)).norm() < 1e-14);
    }

    #[test]
    fn closed_form_states_are_valid() {
        let b = reference_bath();
        for k in 0..=1000 {
            let t = 0.1 * k as f64;
            let s = ProbeClosedForm::new(t, 0.8, &b);
            assert!(s.w.abs() <= 1.0 && s.x.norm() <= 0.5);
            assert!(DensityMatrix::new(s.state().into_matrix()).is_ok(), "t = {t}");
        }
    }

    #[test]
    fn direct_probe_qfi_matches_bloch_form() {
        // r_x = exp(-Γt) along x only: F = (∂r_x)²/(1 - r_x²)
        let b = reference_bath();
        for t in [0.5, 5.0, 40.0] {
            let g = 4.0 * PI * 0.01 * 0.4;
            let rx = (-g * t).exp();
            let drx = -4.0 * PI * 0.01 * t * rx;
            let want = drx * drx / (1.0 - rx * rx);
            assert!((direct_probe_qfi(t, &b) / want - 1.0).abs() < 1e-12);
        }
        assert_eq!(direct_probe_qfi(0.0, &b), 0.0);
    }

    #[test]
    fn steady_state_spectrum() {
        for (k, t) in [(0.6, 0.4), (0.1, 2.0), (2.0, 0.1), (1.0, 1.0)] {
            let e = eig_hermitian(steady_two_qubit(k, t).matrix()).unwrap();
            let th = (k / t).tanh();
            let want = [0.0, 0.0, (1.0 - th) / 2.0, (1.0 + th) / 2.0];
            for (a, b) in e.values.iter().zip(want) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn steady_state_limits() {
        let hot = steady_two_qubit(0.6, 1e9);
        assert!(hot[(1, 2)].norm() < 1e-9);
        let cold = steady_two_qubit(0.6, 1e-3);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let singlet = [c(0., 0.), c(s, 0.), c(-s, 0.), c(0., 0.)];
        let target = DensityMatrix::pure(&singlet).unwrap();
        assert!(max_abs(&(cold.matrix() - target.matrix())) < 1e-12);
    }

    #[test]
    fn steady_qfi_values() {
        assert_eq!(steady_qfi(0.0, 0.4), 0.0);
        assert!((steady_qfi(0.6, 0.4) - 2.541_187_109_863_807_5).abs() < 1e-13);
        assert!((steady_qfi(0.48, 0.4) - 2.745_179_965_866_680_8).abs() < 1e-13);
        assert!((0.16 * steady_qfi(0.48, 0.4) - 0.439).abs() < 1e-3);
    }

    #[test]
    fn steady_qsnr_depends_on_ratio_only() {
        for (k, t) in [(0.6, 0.5), (0.2, 0.3), (1.7, 0.9)] {
            for a in [0.1, 2.0, 7.5] {
                let r1 = t * t * steady_qfi(k, t);
                let r2 = (a * t) * (a * t) * steady_qfi(a * k, a * t);
                assert!((r1 - r2).abs() < 1e-12);
            }
        }
        let r = |k: f64, t: f64| t * t * steady_qfi(k, t);
        assert!((r(0.6, 0.5) - r(1.2, 1.0)).abs() < 1e-15);
    }

    #[test]
    fn optimal_ratio_matches_newton_oracle() {
        // 40-digit root of x tanh x = 1
        let (x, r) = optimal_ratio();
        assert!((x - 1.199_678_640_257_733_8).abs() < 1e-11);
        assert!((r - 0.439_228_839_890_645_15).abs() < 1e-12);
        assert!(steady_qsnr_ratio(x - 0.1) < r && steady_qsnr_ratio(x + 0.1) < r);
        // independent check: stationarity of x²sech²x
        let h = 1e-6;
        let slope = (steady_qsnr_ratio(x + h) - steady_qsnr_ratio(x - h)) / (2.0 * h);
        assert!(slope.abs() < 1e-8);
    }

    #[test]
    fn steady_qsnr_endpoints() {
        assert!(steady_qsnr_ratio(1e-6) < 1e-11);
        assert_eq!(steady_qsnr_ratio(1e3), 0.0);
        assert!(steady_qsnr_ratio(40.0) < 1e-30);
    }
}
