//! Exact propagation under a time-independent generator, trajectories and
//! steady states.

use thiserror::Error;

use crate::gme::Liouvillian;
use crate::parallel;
use crate::qmat::{
    self, expm, max_abs, partial_trace, unvectorize, vectorize, ComplexMatrix, DensityMatrix,
    QmatError, Subsystem, C64,
};

/// Evolved states whose smallest eigenvalue falls below −this signal a
/// generator bug.
pub const POSITIVITY_FLOOR: f64 = 1e-8;
/// Residual ‖L[ρ]‖ accepted as stationary.
pub const STEADY_RESIDUAL: f64 = 1e-10;
/// Residual above which the dynamical search gives up.
pub const STEADY_RESIDUAL_MAX: f64 = 1e-8;

const STEADY_TIMES: [f64; 4] = [1e2, 1e3, 1e4, 1e5];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvolveError {
    #[error("evolved state has eigenvalue {0:.3e} below the positivity floor")]
    PositivityViolation(f64),
    #[error("evolved state lost normalization: trace {0}")]
    TraceDrift(C64),
    #[error("time must be >= 0, got {0}")]
    NegativeTime(f64),
    #[error("invalid grid: {0}")]
    BadGrid(String),
    #[error("dimension mismatch: generator acts on {generator}, state has {state}")]
    DimensionMismatch { generator: usize, state: usize },
    #[error("no steady state reached: residual {0:.3e} after t = 1e5")]
    NoConvergence(f64),
    #[error(transparent)]
    Linalg(#[from] QmatError),
}

pub type Result<T> = std::result::Result<T, EvolveError>;

fn check_dims(l: &Liouvillian, rho: &DensityMatrix) -> Result<()> {
    if l.dim() != rho.dim() {
        return Err(EvolveError::DimensionMismatch {
            generator: l.dim(),
            state: rho.dim(),
        });
    }
    Ok(())
}

/// Re-Hermitizes and checks an unvectorized state. Negative eigenvalues are
/// reported, never clipped.
fn finish_state(m: ComplexMatrix) -> Result<DensityMatrix> {
    let m = (&m + m.adjoint()).scale(0.5);
    let tr = qmat::trace(&m);
    if (tr - C64::new(1.0, 0.0)).norm() > qmat::TRACE_TOL {
        return Err(EvolveError::TraceDrift(tr));
    }
    let min = qmat::eig_hermitian(&m)?.values[0];
    if min < -POSITIVITY_FLOOR {
        return Err(EvolveError::PositivityViolation(min));
    }
    Ok(DensityMatrix::new_unchecked(m))
}

/// exp(L t) applied to ρ₀.
pub fn propagate(l: &Liouvillian, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    check_dims(l, rho0)?;
    if !(t >= 0.0) {
        return Err(EvolveError::NegativeTime(t));
    }
    if t == 0.0 {
        return Ok(rho0.clone());
    }
    let p = expm(&l.superop().scale_c(t))?;
    let v = p * vectorize(rho0.matrix());
    finish_state(unvectorize(&v, l.dim()))
}

trait ScaleC {
    fn scale_c(&self, t: f64) -> ComplexMatrix;
}

impl ScaleC for ComplexMatrix {
    fn scale_c(&self, t: f64) -> ComplexMatrix {
        self.map(|z| z * t)
    }
}

/// States at arbitrary times, one exponential per time point. Time points
/// are independent and run on the worker pool.
pub fn evolve_at(l: &Liouvillian, rho0: &DensityMatrix, times: &[f64]) -> Result<Vec<DensityMatrix>> {
    check_dims(l, rho0)?;
    parallel::try_map(times, |&t| propagate(l, rho0, t))
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub reduced: Option<Vec<DensityMatrix>>,
}

/// Uniform grid over [0, t_max] with `n_points` samples, propagated with
/// powers of a single step propagator.
pub fn trajectory(
    l: &Liouvillian,
    rho0: &DensityMatrix,
    t_max: f64,
    n_points: usize,
    reduce: Option<Subsystem>,
) -> Result<Trajectory> {
    check_dims(l, rho0)?;
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(EvolveError::BadGrid(format!("t_max must be > 0, got {t_max}")));
    }
    if n_points < 2 {
        return Err(EvolveError::BadGrid(format!("need at least 2 points, got {n_points}")));
    }
    let dt = t_max / (n_points - 1) as f64;
    let step = expm(&l.superop().scale_c(dt))?;
    let mut times = Vec::with_capacity(n_points);
    let mut states = Vec::with_capacity(n_points);
    let mut v = vectorize(rho0.matrix());
    times.push(0.0);
    states.push(rho0.clone());
    for k in 1..n_points {
        v = &step * v;
        times.push(if k == n_points - 1 { t_max } else { k as f64 * dt });
        let state = finish_state(unvectorize(&v, l.dim()))?;
        // keep the carried vector Hermitian so round-off does not accumulate
        v = vectorize(state.matrix());
        states.push(state);
    }
    let reduced = match reduce {
        Some(keep) => Some(
            states
                .iter()
                .map(|s| partial_trace(s, keep))
                .collect::<std::result::Result<Vec<_>, _>>()?,
        ),
        None => None,
    };
    Ok(Trajectory {
        times,
        states,
        reduced,
    })
}

/// Choi matrix Σ_ij |i⟩⟨j| ⊗ Φ_t(|i⟩⟨j|) of the channel Φ_t = exp(L t).
/// Complete positivity of Φ_t is positivity of this matrix.
pub fn choi_matrix(l: &Liouvillian, t: f64) -> Result<ComplexMatrix> {
    if !(t >= 0.0) {
        return Err(EvolveError::NegativeTime(t));
    }
    let d = l.dim();
    let p = expm(&l.superop().scale_c(t))?;
    let mut choi = ComplexMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            // vec(|i⟩⟨j|) is the unit vector at i + d·j
            let col = p.column(i + d * j).clone_owned();
            let block = unvectorize(&col, d);
            choi.view_mut((i * d, j * d), (d, d)).copy_from(&block);
        }
    }
    Ok(choi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteadyKind {
    /// Unique kernel vector of the generator.
    NullSpace,
    /// Degenerate kernel; found by evolving the supplied initial state.
    Dynamical,
}

#[derive(Debug, Clone)]
pub struct SteadyState {
    pub state: DensityMatrix,
    pub kind: SteadyKind,
    pub residual: f64,
    /// Time reached by the dynamical search (0 for the null-space route).
    pub time: f64,
}

/// Stationary state of `l`. Falls back to evolving `initial` when the
/// kernel of the generator is degenerate, because conserved sectors make the
/// stationary state depend on where the evolution starts.
pub fn steady_state(l: &Liouvillian, initial: &DensityMatrix) -> Result<SteadyState> {
    check_dims(l, initial)?;
    let d = l.dim();
    let svd = l.superop().clone().svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let smax = svd.singular_values.max();
    let null_tol = STEADY_RESIDUAL * smax.max(1.0);
    let kernel: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s < null_tol)
        .map(|(k, _)| k)
        .collect();

    if kernel.len() == 1 {
        let row = v_t.row(kernel[0]);
        let v = nalgebra::DVector::from_iterator(d * d, row.iter().map(|z| z.conj()));
        let m = unvectorize(&v, d);
        let tr = qmat::trace(&m);
        let m = m.map(|z| z / tr);
        let state = finish_state(m)?;
        let residual = max_abs(&l.apply(state.matrix()));
        if residual < STEADY_RESIDUAL {
            return Ok(SteadyState {
                state,
                kind: SteadyKind::NullSpace,
                residual,
                time: 0.0,
            });
        }
    }

    let mut last = f64::INFINITY;
    let mut state = initial.clone();
    let mut reached = 0.0;
    for &t in &STEADY_TIMES {
        state = propagate(l, initial, t)?;
        reached = t;
        last = max_abs(&l.apply(state.matrix()));
        if last < STEADY_RESIDUAL {
            break;
        }
    }
    if last > STEADY_RESIDUAL_MAX {
        return Err(EvolveError::NoConvergence(last));
    }
    Ok(SteadyState {
        state,
        kind: SteadyKind::Dynamical,
        residual: last,
        time: reached,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gme::build_liouvillian;
    use crate::models::{BathConfig, BathSpec, DirectProbeModel, Model, ProbeAncillaModel, TwoQubitModel};
    use crate::qmat::{c, identity, pauli, Axis};
    use std::f64::consts::FRAC_PI_2;

    fn bath() -> BathSpec {
        BathSpec::new(0.01, 10.0, 0.4).unwrap()
    }

    fn probe_ancilla() -> Model {
        ProbeAncillaModel::resonant(0.8, bath(), FRAC_PI_2).into()
    }

    #[test]
    fn zero_time_returns_initial_state() {
        let m = probe_ancilla();
        let l = build_liouvillian(&m).unwrap();
        let rho = m.initial_state();
        assert_eq!(propagate(&l, &rho, 0.0).unwrap(), rho);
        assert!(matches!(propagate(&l, &rho, -1.0), Err(EvolveError::NegativeTime(_))));
    }

    #[test]
    fn eigenstates_are_stationary_without_bath() {
        let b = BathSpec::new(0.0, 10.0, 0.4).unwrap();
        let m = Model::from(ProbeAncillaModel::resonant(0.8, b, FRAC_PI_2));
        let l = build_liouvillian(&m).unwrap();
        let e = qmat::eig_hermitian(&m.hamiltonian()).unwrap();
        let rho = DensityMatrix::pure(&e.vector(1)).unwrap();
        for t in [0.5, 7.0, 120.0] {
            let out = propagate(&l, &rho, t).unwrap();
            assert!(max_abs(&(out.matrix() - rho.matrix())) < 1e-10);
        }
    }

    #[test]
    fn semigroup_property() {
        let m = probe_ancilla();
        let l = build_liouvillian(&m).unwrap();
        let rho = m.initial_state();
        let (s, t) = (3.7, 11.2);
        let direct = propagate(&l, &rho, s + t).unwrap();
        let stepped = propagate(&l, &propagate(&l, &rho, s).unwrap(), t).unwrap();
        assert!(max_abs(&(direct.matrix() - stepped.matrix())) < 1e-9);
    }

    #[test]
    fn trajectory_matches_per_time_exponentials() {
        let m = probe_ancilla();
        let l = build_liouvillian(&m).unwrap();
        let rho = m.initial_state();
        let traj = trajectory(&l, &rho, 50.0, 101, Some(Subsystem::First)).unwrap();
        assert_eq!(traj.times.len(), 101);
        assert_eq!(traj.times[0], 0.0);
        assert_eq!(*traj.times.last().unwrap(), 50.0);
        let direct = evolve_at(&l, &rho, &traj.times).unwrap();
        for (a, b) in traj.states.iter().zip(&direct) {
            assert!(max_abs(&(a.matrix() - b.matrix())) < 1e-10);
            assert!((qmat::trace(a.matrix()) - c(1.0, 0.0)).norm() < 1e-10);
        }
        assert_eq!(traj.reduced.as_ref().unwrap().len(), 101);
    }

    #[test]
    fn two_point_trajectory() {
        let m = probe_ancilla();
        let l = build_liouvillian(&m).unwrap();
        let traj = trajectory(&l, &m.initial_state(), 3.0, 2, None).unwrap();
        assert_eq!(traj.times, vec![0.0, 3.0]);
        assert!(traj.reduced.is_none());
        assert!(trajectory(&l, &m.initial_state(), 3.0, 1, None).is_err());
        assert!(trajectory(&l, &m.initial_state(), 0.0, 5, None).is_err());
    }

    #[test]
    fn two_qubit_sector_is_conserved_and_converges() {
        let b1 = BathSpec::new(0.01, 10.0, 0.4).unwrap();
        let b2 = BathSpec::new(0.05, 10.0, 0.4).unwrap();
        let m = Model::from(TwoQubitModel::new(1.0, 0.6, BathConfig::Local { bath1: b1, bath2: b2 }, FRAC_PI_2));
        let l = build_liouvillian(&m).unwrap();
        let traj = trajectory(&l, &m.initial_state(), 1e3, 201, None).unwrap();
        for s in &traj.states {
            assert!(s[(0, 0)].norm() < 1e-10 && s[(3, 3)].norm() < 1e-10);
        }
        let n = traj.states.len();
        let gap = max_abs(&(traj.states[n - 1].matrix() - traj.states[n - 2].matrix()));
        assert!(gap < 1e-8, "{gap}");
    }

    #[test]
    fn direct_probe_dephases_to_diagonal() {
        let m = Model::from(DirectProbeModel::new(1.0, bath()));
        let l = build_liouvillian(&m).unwrap();
        let ss = steady_state(&l, &m.initial_state()).unwrap();
        assert_eq!(ss.kind, SteadyKind::Dynamical);
        assert!(max_abs(&(ss.state.matrix() - identity(2).scale(0.5))) < 1e-10);
    }

    #[test]
    fn unique_kernel_uses_null_space() {
        // amplitude damping plus a weak pump has a unique fixed point
        let h = pauli(Axis::Z).scale(0.5);
        let lower = ComplexMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., 0.), c(1., 0.), c(0., 0.)]);
        let l = Liouvillian::from_parts(&h, &[(lower.clone(), 0.3), (lower.adjoint(), 0.1)]).unwrap();
        let ss = steady_state(&l, &DensityMatrix::maximally_mixed(2)).unwrap();
        assert_eq!(ss.kind, SteadyKind::NullSpace);
        // populations in detailed balance: p0/p1 = 0.1/0.3
        assert!((ss.state[(0, 0)].re - 0.25).abs() < 1e-12);
        assert!((ss.state[(1, 1)].re - 0.75).abs() < 1e-12);
    }

    #[test]
    fn unitary_dynamics_never_converge() {
        let b = BathSpec::new(0.0, 10.0, 0.4).unwrap();
        let m = Model::from(ProbeAncillaModel::resonant(0.8, b, FRAC_PI_2));
        let l = build_liouvillian(&m).unwrap();
        assert!(matches!(
            steady_state(&l, &m.initial_state()),
            Err(EvolveError::NoConvergence(_))
        ));
    }

    #[test]
    fn choi_of_identity_channel_is_maximally_entangled() {
        let l = build_liouvillian(&probe_ancilla()).unwrap();
        let c0 = choi_matrix(&l, 0.0).unwrap();
        // d · |Φ+⟩⟨Φ+| has trace d and a single eigenvalue d
        let e = qmat::eig_hermitian(&c0).unwrap();
        assert!((e.values[15] - 4.0).abs() < 1e-12);
        assert!(e.values[..15].iter().all(|v| v.abs() < 1e-12));
        let c1 = choi_matrix(&l, 30.0).unwrap();
        assert!(qmat::eig_hermitian(&c1).unwrap().values[0] > -1e-10);
        assert!((qmat::trace(&c1) - c(4.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let l = build_liouvillian(&probe_ancilla()).unwrap();
        assert!(matches!(
            propagate(&l, &DensityMatrix::maximally_mixed(2), 1.0),
            Err(EvolveError::DimensionMismatch { .. })
        ));
    }
}
