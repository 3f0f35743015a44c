//! Dense complex linear algebra for small Hilbert spaces.
//!
//! Everything here is sized for desk-scale models (dimension at most a few
//! dozen), so the representation is a plain row-major `Vec<Complex64>` and
//! the kernels are straightforward loops. Typed wrappers (`DensityMatrix`,
//! `Projector`, `UnitaryOp`) validate their defining invariants at
//! construction; once a value exists it is trusted everywhere downstream.
//!
//! Index convention: in a tensor product, subsystem 0 is the slowest-varying
//! index. `tensor_product` and `partial_trace` both follow it, which is what
//! makes reduced states reproducible entry for entry.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Tolerance for Hermiticity, idempotency, orthogonality and unitarity checks.
pub const HERMITICITY_TOL: f64 = 1e-9;
/// Smallest admissible eigenvalue of a density matrix.
pub const PSD_TOL: f64 = 1e-9;
/// Tolerance for trace normalization and other trace identities.
pub const TRACE_TOL: f64 = 1e-12;
/// Probabilities at or below this threshold count as impossible outcomes.
pub const ZERO_PROBABILITY_EPSILON: f64 = 1e-12;
/// Largest imaginary part tolerated when a trace must be a real probability.
pub const IMAGINARY_TOL: f64 = 1e-12;

/// Square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    entries: Vec<Complex64>,
}

impl ComplexMatrix {
    /// Builds a `dim` by `dim` matrix from row-major entries.
    pub fn new(dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DegenerateInput("matrix dimension must be positive".into()));
        }
        if entries.len() != dim * dim {
            return Err(Error::LayoutMismatch(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                entries.len()
            )));
        }
        if !entries.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::DegenerateInput("matrix entries must be finite".into()));
        }
        Ok(Self { dim, entries })
    }

    pub fn zeros(dim: usize) -> Self {
        Self { dim, entries: vec![Complex64::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.entries[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                entries.push(f(i, j));
            }
        }
        Self { dim, entries }
    }

    /// Diagonal matrix from real values.
    pub fn from_real_diagonal(values: &[f64]) -> Self {
        let dim = values.len();
        Self::from_fn(dim, |i, j| {
            if i == j { Complex64::new(values[i], 0.0) } else { Complex64::new(0.0, 0.0) }
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// Sum of the diagonal.
    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.entries[i * self.dim + i]).sum()
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self.entry(j, i).conj())
    }

    /// Matrix product. Panics if dimensions differ; typed operations check
    /// layouts before reaching this kernel.
    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "matrix product requires equal dimensions");
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.entries[i * n + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.entries[i * n + j] += a * rhs.entries[k * n + j];
                }
            }
        }
        out
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "matrix sum requires equal dimensions");
        let entries = self.entries.iter().zip(&rhs.entries).map(|(a, b)| a + b).collect();
        Self { dim: self.dim, entries }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "matrix difference requires equal dimensions");
        let entries = self.entries.iter().zip(&rhs.entries).map(|(a, b)| a - b).collect();
        Self { dim: self.dim, entries }
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        let entries = self.entries.iter().map(|a| a * factor).collect();
        Self { dim: self.dim, entries }
    }

    /// Kronecker product with `self` as the slower-varying factor.
    pub fn kron(&self, rhs: &Self) -> Self {
        let (da, db) = (self.dim, rhs.dim);
        let dim = da * db;
        let mut out = Self::zeros(dim);
        for ia in 0..da {
            for ja in 0..da {
                let a = self.entries[ia * da + ja];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for ib in 0..db {
                    for jb in 0..db {
                        out.entries[(ia * db + ib) * dim + (ja * db + jb)] =
                            a * rhs.entries[ib * db + jb];
                    }
                }
            }
        }
        out
    }

    /// Largest entrywise absolute difference.
    pub fn max_abs_diff(&self, rhs: &Self) -> f64 {
        assert_eq!(self.dim, rhs.dim, "comparison requires equal dimensions");
        self.entries
            .iter()
            .zip(&rhs.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest deviation from Hermiticity, max |m[i][j] - conj(m[j][i])|.
    pub fn hermiticity_deviation(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for i in 0..self.dim {
            for j in i..self.dim {
                dev = dev.max((self.entry(i, j) - self.entry(j, i).conj()).norm());
            }
        }
        dev
    }

    fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.entries)
    }

    /// Eigenvalues of a Hermitian matrix, ascending. The caller is
    /// responsible for Hermiticity; values are real by construction.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let mut vals: Vec<f64> = self.to_nalgebra().symmetric_eigenvalues().iter().copied().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).expect("eigenvalues are finite"));
        vals
    }
}

/// Evolution direction for unitary conjugation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// rho -> U rho U^dagger
    Forward,
    /// rho -> U^dagger rho U
    Backward,
}

/// Unit-trace positive semidefinite Hermitian matrix. The three invariants
/// are checked on every construction path, including results of internal
/// algebra, so a `DensityMatrix` value is always a physical state.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let herm = matrix.hermiticity_deviation();
        if herm >= HERMITICITY_TOL {
            return Err(Error::InvariantViolation(format!(
                "density matrix must be Hermitian, deviation {herm:.3e} exceeds {HERMITICITY_TOL:.0e}"
            )));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() >= TRACE_TOL || tr.im.abs() >= TRACE_TOL {
            return Err(Error::InvariantViolation(format!(
                "density matrix must have unit trace, got {} + {}i",
                tr.re, tr.im
            )));
        }
        let min_eig = matrix
            .hermitian_eigenvalues()
            .first()
            .copied()
            .unwrap_or(0.0);
        if min_eig <= -PSD_TOL {
            return Err(Error::InvariantViolation(format!(
                "density matrix must be positive semidefinite, minimum eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(Self { matrix })
    }

    /// Normalizes the amplitude vector and forms the pure-state projector
    /// rho[i][j] = a[i] * conj(a[j]).
    pub fn pure(amplitudes: &[Complex64]) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::DegenerateInput("pure state needs at least one amplitude".into()));
        }
        if !amplitudes.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::DegenerateInput("pure-state amplitudes must be finite".into()));
        }
        let norm_sqr: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if norm_sqr <= 0.0 {
            return Err(Error::DegenerateInput(
                "pure state needs a nonzero amplitude vector".into(),
            ));
        }
        let norm = norm_sqr.sqrt();
        let normalized: Vec<Complex64> = amplitudes.iter().map(|z| z / norm).collect();
        let dim = normalized.len();
        let matrix =
            ComplexMatrix::from_fn(dim, |i, j| normalized[i] * normalized[j].conj());
        Self::new(matrix)
    }

    /// Classical mixture: diagonal state from a probability vector.
    pub fn from_probabilities(probabilities: &[f64]) -> Result<Self> {
        if probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::DegenerateInput(
                "probabilities must be finite and nonnegative".into(),
            ));
        }
        Self::new(ComplexMatrix::from_real_diagonal(probabilities))
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DegenerateInput("dimension must be positive".into()));
        }
        Self::from_probabilities(&vec![1.0 / dim as f64; dim])
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.matrix.entry(row, col)
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// Kronecker product of two states; `self` is the slower-varying factor.
    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        let matrix = self.matrix.kron(&other.matrix);
        Self::new(matrix).expect("tensor product of valid states is a valid state")
    }

    /// Traces out every subsystem not named in `keep`. Kept factors retain
    /// their relative order from `layout`.
    pub fn partial_trace(&self, layout: &SubsystemLayout, keep: &[&str]) -> Result<DensityMatrix> {
        if layout.total_dim() != self.dim() {
            return Err(Error::LayoutMismatch(format!(
                "layout covers dimension {}, state has dimension {}",
                layout.total_dim(),
                self.dim()
            )));
        }
        if keep.is_empty() {
            return Err(Error::DegenerateInput("partial trace must keep at least one subsystem".into()));
        }
        for label in keep {
            if !layout.factors().iter().any(|(l, _)| l == label) {
                return Err(Error::LayoutMismatch(format!("unknown subsystem label {label:?}")));
            }
        }

        let factors = layout.factors();
        let kept: Vec<usize> = (0..factors.len())
            .filter(|k| keep.contains(&factors[*k].0.as_str()))
            .collect();
        let traced: Vec<usize> = (0..factors.len()).filter(|k| !kept.contains(k)).collect();

        // Stride of factor k in the flat index, subsystem 0 slowest.
        let mut strides = vec![1usize; factors.len()];
        for k in (0..factors.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * factors[k + 1].1;
        }

        let kept_dims: Vec<usize> = kept.iter().map(|&k| factors[k].1).collect();
        let traced_dims: Vec<usize> = traced.iter().map(|&k| factors[k].1).collect();
        let out_dim: usize = kept_dims.iter().product();
        let traced_count: usize = traced_dims.iter().product::<usize>().max(1);

        let flat = |multi: &[usize], which: &[usize]| -> usize {
            multi.iter().zip(which).map(|(i, &k)| i * strides[k]).sum()
        };
        let unrank = |mut r: usize, dims: &[usize]| -> Vec<usize> {
            let mut idx = vec![0usize; dims.len()];
            for k in (0..dims.len()).rev() {
                idx[k] = r % dims[k];
                r /= dims[k];
            }
            idx
        };

        let mut out = ComplexMatrix::zeros(out_dim);
        for r in 0..out_dim {
            let row_multi = unrank(r, &kept_dims);
            let row_base = flat(&row_multi, &kept);
            for c in 0..out_dim {
                let col_multi = unrank(c, &kept_dims);
                let col_base = flat(&col_multi, &kept);
                let mut acc = Complex64::new(0.0, 0.0);
                for t in 0..traced_count {
                    let t_multi = unrank(t, &traced_dims);
                    let offset = flat(&t_multi, &traced);
                    acc += self.matrix.entry(row_base + offset, col_base + offset);
                }
                out.entries[r * out_dim + c] = acc;
            }
        }
        DensityMatrix::new(out)
    }

    /// Unitary conjugation, forward U rho U^dagger or backward U^dagger rho U.
    pub fn apply_unitary(&self, u: &UnitaryOp, direction: Direction) -> Result<DensityMatrix> {
        if u.dim() != self.dim() {
            return Err(Error::LayoutMismatch(format!(
                "unitary dimension {} does not match state dimension {}",
                u.dim(),
                self.dim()
            )));
        }
        let m = u.matrix();
        let out = match direction {
            Direction::Forward => m.mul(&self.matrix).mul(&m.adjoint()),
            Direction::Backward => m.adjoint().mul(&self.matrix).mul(m),
        };
        DensityMatrix::new(out)
    }
}

/// Hermitian idempotent matrix marking a yes outcome. Rank zero (the zero
/// matrix) and full rank (identity) are both admissible.
#[derive(Clone, Debug, PartialEq)]
pub struct Projector {
    matrix: ComplexMatrix,
}

impl Projector {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let herm = matrix.hermiticity_deviation();
        if herm >= HERMITICITY_TOL {
            return Err(Error::InvariantViolation(format!(
                "projector must be Hermitian, deviation {herm:.3e}"
            )));
        }
        let idem = matrix.mul(&matrix).max_abs_diff(&matrix);
        if idem >= HERMITICITY_TOL {
            return Err(Error::InvariantViolation(format!(
                "projector must be idempotent, |PP - P| = {idem:.3e}"
            )));
        }
        Ok(Self { matrix })
    }

    /// Rank-one projector onto a computational basis state.
    pub fn basis_state(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::LayoutMismatch(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut m = ComplexMatrix::zeros(dim);
        m.entries[index * dim + index] = Complex64::new(1.0, 0.0);
        Ok(Self { matrix: m })
    }

    /// Projector onto the span of several basis states.
    pub fn basis_span(dim: usize, indices: &[usize]) -> Result<Self> {
        let mut m = ComplexMatrix::zeros(dim);
        for &index in indices {
            if index >= dim {
                return Err(Error::LayoutMismatch(format!(
                    "basis index {index} out of range for dimension {dim}"
                )));
            }
            m.entries[index * dim + index] = Complex64::new(1.0, 0.0);
        }
        Self::new(m)
    }

    pub fn identity(dim: usize) -> Self {
        Self { matrix: ComplexMatrix::identity(dim) }
    }

    pub fn zero(dim: usize) -> Self {
        Self { matrix: ComplexMatrix::zeros(dim) }
    }

    /// Projector onto the line spanned by a (not necessarily normalized) vector.
    pub fn onto_vector(amplitudes: &[Complex64]) -> Result<Self> {
        let state = DensityMatrix::pure(amplitudes)?;
        Self::new(state.matrix().clone())
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// I - P. The sum of a projector and its complement reproduces the
    /// identity exactly, entry for entry, not merely within tolerance.
    pub fn complement(&self) -> Projector {
        let dim = self.dim();
        let m = ComplexMatrix::from_fn(dim, |i, j| {
            let delta = if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
            delta - self.matrix.entry(i, j)
        });
        Self::new(m).expect("complement of a projector is a projector")
    }

    /// Kronecker product of projectors; `self` is the slower-varying factor.
    pub fn tensor(&self, other: &Projector) -> Projector {
        Self { matrix: self.matrix.kron(&other.matrix) }
    }

    pub fn commutes_with(&self, other: &Projector) -> bool {
        let pq = self.matrix.mul(&other.matrix);
        let qp = other.matrix.mul(&self.matrix);
        pq.max_abs_diff(&qp) < HERMITICITY_TOL
    }
}

/// Matrix with U^dagger U = I within tolerance.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryOp {
    matrix: ComplexMatrix,
}

impl UnitaryOp {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let gram = matrix.adjoint().mul(&matrix);
        let dev = gram.max_abs_diff(&ComplexMatrix::identity(matrix.dim()));
        if dev >= HERMITICITY_TOL {
            return Err(Error::InvariantViolation(format!(
                "unitary must satisfy U^dagger U = I, deviation {dev:.3e}"
            )));
        }
        Ok(Self { matrix })
    }

    pub fn identity(dim: usize) -> Self {
        Self { matrix: ComplexMatrix::identity(dim) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }
}

/// Ordered factorization of a Hilbert space into labeled subsystems.
/// Factor 0 is the slowest-varying tensor index.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsystemLayout {
    factors: Vec<(String, usize)>,
}

impl SubsystemLayout {
    pub fn new(factors: Vec<(String, usize)>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::DegenerateInput("layout needs at least one factor".into()));
        }
        for (label, dim) in &factors {
            if *dim == 0 {
                return Err(Error::DegenerateInput(format!(
                    "subsystem {label:?} must have dimension at least 1"
                )));
            }
        }
        for (i, (label, _)) in factors.iter().enumerate() {
            if factors[i + 1..].iter().any(|(other, _)| other == label) {
                return Err(Error::DegenerateInput(format!(
                    "duplicate subsystem label {label:?}"
                )));
            }
        }
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[(String, usize)] {
        &self.factors
    }

    pub fn total_dim(&self) -> usize {
        self.factors.iter().map(|(_, d)| d).product()
    }
}

/// Trace of an arbitrary square complex matrix.
pub fn matrix_trace(matrix: &ComplexMatrix) -> Complex64 {
    matrix.trace()
}

/// Kronecker product of two states, factor `a` slowest-varying.
pub fn tensor_product(a: &DensityMatrix, b: &DensityMatrix) -> DensityMatrix {
    a.tensor(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn diag(values: &[f64]) -> DensityMatrix {
        DensityMatrix::from_probabilities(values).unwrap()
    }

    fn hadamard() -> UnitaryOp {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        UnitaryOp::new(ComplexMatrix::new(
            2,
            vec![c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)],
        )
        .unwrap())
        .unwrap()
    }

    #[test]
    fn pure_state_normalizes_and_projects() {
        // Amplitudes (3, 4i) have norm 5, so the state is (3/5, 4i/5).
        let rho = DensityMatrix::pure(&[c(3.0, 0.0), c(0.0, 4.0)]).unwrap();
        assert!((rho.entry(0, 0) - c(9.0 / 25.0, 0.0)).norm() < 1e-15);
        assert!((rho.entry(1, 1) - c(16.0 / 25.0, 0.0)).norm() < 1e-15);
        assert!((rho.entry(0, 1) - c(0.0, -12.0 / 25.0)).norm() < 1e-15);
        assert!((rho.entry(1, 0) - c(0.0, 12.0 / 25.0)).norm() < 1e-15);
    }

    #[test]
    fn pure_state_uniform_superposition() {
        let rho = DensityMatrix::pure(&[c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((rho.entry(i, j) - c(0.5, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn pure_state_rejects_zero_vector() {
        let err = DensityMatrix::pure(&[c(0.0, 0.0), c(0.0, 0.0)]).unwrap_err();
        assert!(matches!(err, Error::DegenerateInput(_)), "got {err:?}");
    }

    #[test]
    fn pure_state_rejects_non_finite() {
        let err = DensityMatrix::pure(&[c(f64::NAN, 0.0)]).unwrap_err();
        assert!(matches!(err, Error::DegenerateInput(_)));
    }

    #[test]
    fn trace_of_identity_and_pure_states() {
        assert_eq!(matrix_trace(&ComplexMatrix::identity(4)), c(4.0, 0.0));
        let rho = DensityMatrix::pure(&[c(1.0, 0.0), c(1.0, 1.0)]).unwrap();
        assert!((rho.trace() - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn trace_after_projector_product() {
        let rho = diag(&[0.7, 0.3]);
        let p1 = Projector::basis_state(2, 1).unwrap();
        let product = p1.matrix().mul(rho.matrix());
        assert!((matrix_trace(&product) - c(0.3, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn density_matrix_rejects_negative_eigenvalue() {
        let m = ComplexMatrix::from_real_diagonal(&[1.5, -0.5]);
        let err = DensityMatrix::new(m).unwrap_err();
        assert!(matches!(err, Error::InvariantViolation(_)));
    }

    #[test]
    fn density_matrix_rejects_bad_trace() {
        let m = ComplexMatrix::from_real_diagonal(&[0.7, 0.7]);
        assert!(DensityMatrix::new(m).is_err());
    }

    #[test]
    fn tensor_product_of_diagonal_states() {
        let a = diag(&[0.7, 0.3]);
        let b = diag(&[0.5, 0.5]);
        let joint = tensor_product(&a, &b);
        let expected = [0.35, 0.35, 0.15, 0.15];
        for (i, want) in expected.iter().enumerate() {
            assert!((joint.entry(i, i) - c(*want, 0.0)).norm() < 1e-15);
        }
        assert!((joint.trace() - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn tensor_then_partial_trace_recovers_factors() {
        let a = DensityMatrix::pure(&[c(3.0, 0.0), c(0.0, 4.0)]).unwrap();
        let b = diag(&[0.2, 0.3, 0.5]);
        let joint = a.tensor(&b);
        let layout = SubsystemLayout::new(vec![("a".into(), 2), ("b".into(), 3)]).unwrap();
        let back_a = joint.partial_trace(&layout, &["a"]).unwrap();
        let back_b = joint.partial_trace(&layout, &["b"]).unwrap();
        assert!(back_a.matrix().max_abs_diff(a.matrix()) < 1e-12);
        assert!(back_b.matrix().max_abs_diff(b.matrix()) < 1e-12);
    }

    #[test]
    fn bell_state_reduces_to_maximally_mixed() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = DensityMatrix::pure(&[c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)]).unwrap();
        let layout = SubsystemLayout::new(vec![("left".into(), 2), ("right".into(), 2)]).unwrap();
        let reduced = bell.partial_trace(&layout, &["left"]).unwrap();
        let half = DensityMatrix::maximally_mixed(2).unwrap();
        assert!(reduced.matrix().max_abs_diff(half.matrix()) < 1e-12);
    }

    #[test]
    fn partial_trace_keeps_layout_order_and_checks_labels() {
        let a = diag(&[0.9, 0.1]);
        let b = diag(&[0.6, 0.4]);
        let joint = a.tensor(&b);
        let layout = SubsystemLayout::new(vec![("a".into(), 2), ("b".into(), 2)]).unwrap();

        // Keeping both factors is the identity regardless of keep order.
        let kept = joint.partial_trace(&layout, &["b", "a"]).unwrap();
        assert!(kept.matrix().max_abs_diff(joint.matrix()) < 1e-15);

        let err = joint.partial_trace(&layout, &["rng"]).unwrap_err();
        assert!(matches!(err, Error::LayoutMismatch(_)));
        let err = joint.partial_trace(&layout, &[]).unwrap_err();
        assert!(matches!(err, Error::DegenerateInput(_)));
        let bad_layout = SubsystemLayout::new(vec![("a".into(), 3), ("b".into(), 2)]).unwrap();
        let err = joint.partial_trace(&bad_layout, &["a"]).unwrap_err();
        assert!(matches!(err, Error::LayoutMismatch(_)));
    }

    #[test]
    fn three_factor_partial_trace_is_consistent() {
        let a = diag(&[0.7, 0.3]);
        let b = DensityMatrix::pure(&[c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        let d = diag(&[0.25, 0.25, 0.5]);
        let joint = a.tensor(&b).tensor(&d);
        let layout = SubsystemLayout::new(vec![
            ("a".into(), 2),
            ("b".into(), 2),
            ("d".into(), 3),
        ])
        .unwrap();
        let middle = joint.partial_trace(&layout, &["b"]).unwrap();
        assert!(middle.matrix().max_abs_diff(b.matrix()) < 1e-12);
        let pair = joint.partial_trace(&layout, &["a", "d"]).unwrap();
        assert!(pair.matrix().max_abs_diff(a.tensor(&d).matrix()) < 1e-12);
    }

    #[test]
    fn complement_is_exact() {
        let p = Projector::basis_state(2, 0).unwrap();
        let q = p.complement();
        assert_eq!(q.matrix().entry(0, 0), c(0.0, 0.0));
        assert_eq!(q.matrix().entry(1, 1), c(1.0, 0.0));

        // P + P' reproduces the identity exactly, entry for entry.
        let sum = p.matrix().add(q.matrix());
        let id = ComplexMatrix::identity(2);
        for (got, want) in sum.entries().iter().zip(id.entries()) {
            assert_eq!(got.re, want.re);
            assert_eq!(got.im, want.im);
        }

        let full = Projector::identity(3);
        assert!(full.complement().matrix().max_abs_entry() == 0.0);
    }

    #[test]
    fn complement_of_superposition_projector_is_exact() {
        let p = Projector::onto_vector(&[c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        let q = p.complement();
        let sum = p.matrix().add(q.matrix());
        let id = ComplexMatrix::identity(2);
        for (got, want) in sum.entries().iter().zip(id.entries()) {
            assert_eq!(got.re, want.re);
            assert_eq!(got.im, want.im);
        }
    }

    #[test]
    fn hadamard_on_ground_state() {
        let rho = diag(&[1.0, 0.0]);
        let evolved = rho.apply_unitary(&hadamard(), Direction::Forward).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((evolved.entry(i, j) - c(0.5, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn forward_then_backward_is_identity() {
        let rho = DensityMatrix::pure(&[c(3.0, 0.0), c(0.0, 4.0)]).unwrap();
        let u = hadamard();
        let forward = rho.apply_unitary(&u, Direction::Forward).unwrap();
        let back = forward.apply_unitary(&u, Direction::Backward).unwrap();
        assert!(back.matrix().max_abs_diff(rho.matrix()) < 1e-12);
    }

    #[test]
    fn apply_unitary_checks_dimensions() {
        let rho = diag(&[0.5, 0.25, 0.25]);
        let err = rho.apply_unitary(&hadamard(), Direction::Forward).unwrap_err();
        assert!(matches!(err, Error::LayoutMismatch(_)));
    }

    #[test]
    fn apply_unitary_preserves_trace_and_spectrum() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for dim in [2usize, 3, 5, 8] {
            let rho = crate::random::random_density_matrix(dim, &mut rng);
            let u = crate::random::random_unitary(dim, &mut rng);
            let evolved = rho.apply_unitary(&u, Direction::Forward).unwrap();
            assert!((evolved.trace() - c(1.0, 0.0)).norm() < 1e-12);
            let before = rho.matrix().hermitian_eigenvalues();
            let after = evolved.matrix().hermitian_eigenvalues();
            for (x, y) in before.iter().zip(&after) {
                assert!((x - y).abs() < 1e-9, "spectrum drifted: {x} vs {y}");
            }
        }
    }

    #[test]
    fn projector_construction_rejects_non_idempotent() {
        let m = ComplexMatrix::from_real_diagonal(&[0.5, 0.5]);
        assert!(matches!(Projector::new(m), Err(Error::InvariantViolation(_))));
    }

    #[test]
    fn unitary_construction_rejects_non_unitary() {
        let m = ComplexMatrix::from_real_diagonal(&[1.0, 2.0]);
        assert!(matches!(UnitaryOp::new(m), Err(Error::InvariantViolation(_))));
    }

    #[test]
    fn layout_rejects_duplicates_and_zero_dims() {
        assert!(SubsystemLayout::new(vec![]).is_err());
        assert!(SubsystemLayout::new(vec![("a".into(), 2), ("a".into(), 2)]).is_err());
        assert!(SubsystemLayout::new(vec![("a".into(), 0)]).is_err());
        let layout = SubsystemLayout::new(vec![("a".into(), 2), ("b".into(), 1)]).unwrap();
        assert_eq!(layout.total_dim(), 2);
    }

    #[test]
    fn matrix_new_validates_shape_and_entries() {
        assert!(matches!(
            ComplexMatrix::new(2, vec![c(1.0, 0.0); 3]),
            Err(Error::LayoutMismatch(_))
        ));
        assert!(matches!(
            ComplexMatrix::new(1, vec![c(f64::INFINITY, 0.0)]),
            Err(Error::DegenerateInput(_))
        ));
        assert!(matches!(ComplexMatrix::new(0, vec![]), Err(Error::DegenerateInput(_))));
    }
}
