//! Small dense complex linear algebra: Pauli operators, tensor products,
//! Hermitian eigendecomposition, matrix exponentials, partial traces and the
//! [`DensityMatrix`] newtype.
//!
//! Dimensions are tiny (2, 4 and 16 for superoperators), so everything is
//! dense and backed by `nalgebra`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;

/// Hermiticity tolerance for inputs to [`eig_hermitian`] and density matrices.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Unit-trace tolerance for density matrices.
pub const TRACE_TOL: f64 = 1e-10;
/// Smallest admissible eigenvalue of a density matrix.
pub const POSITIVITY_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QmatError {
    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NonHermitianInput(f64),
    #[error("matrix exponential produced non-finite entries")]
    NonFinite,
    #[error("bad dimension: expected {expected}, got {got}")]
    BadDimension { expected: usize, got: usize },
    #[error("matrix is not square ({0}x{1})")]
    NotSquare(usize, usize),
    #[error("not a density matrix: {0}")]
    InvalidState(String),
}

pub type Result<T> = std::result::Result<T, QmatError>;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Standard 2x2 Pauli matrix in the basis {|0>, |1>} with σ_z|0> = +|0>.
pub fn pauli(axis: Axis) -> ComplexMatrix {
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    match axis {
        Axis::X => ComplexMatrix::from_row_slice(2, 2, &[z, one, one, z]),
        Axis::Y => ComplexMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        Axis::Z => ComplexMatrix::from_row_slice(2, 2, &[one, z, z, -one]),
    }
}

pub fn identity(dim: usize) -> ComplexMatrix {
    ComplexMatrix::identity(dim, dim)
}

/// Kronecker product `a ⊗ b`; the first factor indexes the most significant
/// digit of the composite basis (|00>, |01>, |10>, |11>).
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

pub fn anticommutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b + b * a
}

/// Largest absolute entry, the norm used for every tolerance in this crate.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn hermiticity_defect(m: &ComplexMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn is_hermitian(m: &ComplexMatrix, tol: f64) -> bool {
    hermiticity_defect(m) <= tol
}

pub fn trace(m: &ComplexMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Outer product |a><b|.
pub fn outer(a: &[C64], b: &[C64]) -> ComplexMatrix {
    ComplexMatrix::from_fn(a.len(), b.len(), |i, j| a[i] * b[j].conj())
}

/// Eigenvalues ascending with the matching orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl EigenSystem {
    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.vectors.column(k).iter().copied().collect()
    }

    /// V Λ V†
    pub fn reconstruct(&self) -> ComplexMatrix {
        let lambda = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.values.len(),
            self.values.iter().map(|&v| c(v, 0.0)),
        ));
        &self.vectors * lambda * self.vectors.adjoint()
    }
}

/// Hermitian eigendecomposition with deterministic ordering.
///
/// Eigenvalues come out ascending; each eigenvector is rephased so that its
/// first non-negligible component is real and positive. Inside a degenerate
/// block the basis is whatever the solver produced.
pub fn eig_hermitian(h: &ComplexMatrix) -> Result<EigenSystem> {
    if !h.is_square() {
        return Err(QmatError::NotSquare(h.nrows(), h.ncols()));
    }
    let defect = hermiticity_defect(h);
    if defect > HERMITIAN_TOL * (1.0 + max_abs(h)) {
        return Err(QmatError::NonHermitianInput(defect));
    }
    // symmetrize so the solver sees an exactly Hermitian matrix
    let sym = (h + h.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let n = h.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut vectors = ComplexMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (col, &k) in order.iter().enumerate() {
        values.push(eig.eigenvalues[k]);
        let v = eig.eigenvectors.column(k);
        let norm = v.norm();
        let lead = v
            .iter()
            .find(|z| z.norm() > 1e-12 * norm.max(1.0))
            .copied()
            .unwrap_or(c(1.0, 0.0));
        let phase = lead.conj() / lead.norm();
        for r in 0..n {
            vectors[(r, col)] = v[r] * phase / norm;
        }
    }
    Ok(EigenSystem { values, vectors })
}

/// Matrix exponential by scaling and squaring with a Padé approximant.
pub fn expm(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !m.is_square() {
        return Err(QmatError::NotSquare(m.nrows(), m.ncols()));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(QmatError::NonFinite);
    }
    let out = m.exp();
    if out.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(QmatError::NonFinite);
    }
    Ok(out)
}

/// Column-stacking vectorization: vec(ρ)[i + d·j] = ρ[i, j].
pub fn vectorize(m: &ComplexMatrix) -> nalgebra::DVector<C64> {
    nalgebra::DVector::from_column_slice(m.as_slice())
}

pub fn unvectorize(v: &nalgebra::DVector<C64>, dim: usize) -> ComplexMatrix {
    ComplexMatrix::from_column_slice(dim, dim, v.as_slice())
}

/// Which factor of a two-qubit system to keep in [`partial_trace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    First,
    Second,
}

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    /// Validates against the crate-wide tolerances.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        Self::with_positivity_tol(m, POSITIVITY_TOL)
    }

    /// Same checks as [`DensityMatrix::new`] but with a caller-chosen floor
    /// on the smallest eigenvalue.
    pub fn with_positivity_tol(m: ComplexMatrix, pos_tol: f64) -> Result<Self> {
        if !m.is_square() {
            return Err(QmatError::NotSquare(m.nrows(), m.ncols()));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(QmatError::InvalidState("non-finite entry".into()));
        }
        let herm = hermiticity_defect(&m);
        if herm > HERMITIAN_TOL {
            return Err(QmatError::InvalidState(format!(
                "Hermiticity defect {herm:.3e}"
            )));
        }
        let tr = trace(&m);
        if (tr - c(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(QmatError::InvalidState(format!("trace {tr}")));
        }
        let min = eig_hermitian(&m)?.values[0];
        if min < -pos_tol {
            return Err(QmatError::InvalidState(format!(
                "negative eigenvalue {min:.3e}"
            )));
        }
        Ok(Self(m))
    }

    /// Skips validation; callers vouch for the invariants.
    pub(crate) fn new_unchecked(m: ComplexMatrix) -> Self {
        Self(m)
    }

    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(QmatError::InvalidState("zero state vector".into()));
        }
        let v: Vec<C64> = psi.iter().map(|z| z / norm).collect();
        Self::new(outer(&v, &v))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(identity(dim).scale(1.0 / dim as f64))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn purity(&self) -> f64 {
        (&self.0 * &self.0).trace().re
    }

    pub fn eigen(&self) -> EigenSystem {
        // construction guarantees Hermiticity
        eig_hermitian(&self.0).expect("density matrix is Hermitian")
    }

    pub fn expectation(&self, op: &ComplexMatrix) -> C64 {
        (&self.0 * op).trace()
    }
}

impl std::ops::Index<(usize, usize)> for DensityMatrix {
    type Output = C64;
    fn index(&self, idx: (usize, usize)) -> &C64 {
        &self.0[idx]
    }
}

/// Reduces a two-qubit matrix onto one factor. Works on any 4x4 matrix
/// (linear map), so it is also used on temperature derivatives.
pub fn partial_trace_matrix(m: &ComplexMatrix, keep: Subsystem) -> Result<ComplexMatrix> {
    if m.nrows() != 4 || m.ncols() != 4 {
        return Err(QmatError::BadDimension {
            expected: 4,
            got: m.nrows(),
        });
    }
    let mut out = ComplexMatrix::zeros(2, 2);
    for i in 0..2 {
        for j in 0..2 {
            let mut acc = c(0.0, 0.0);
            for k in 0..2 {
                acc += match keep {
                    Subsystem::First => m[(2 * i + k, 2 * j + k)],
                    Subsystem::Second => m[(2 * k + i, 2 * k + j)],
                };
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

pub fn partial_trace(rho: &DensityMatrix, keep: Subsystem) -> Result<DensityMatrix> {
    let m = partial_trace_matrix(rho.matrix(), keep)?;
    // a partial trace of a valid state is a valid state; only round-off remains
    Ok(DensityMatrix::new_unchecked(m))
}
