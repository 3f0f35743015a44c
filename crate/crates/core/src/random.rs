//! Seeded generators for random states, projectors and unitaries.
//!
//! Used by the verification suites and the test batteries. Distributions are
//! the usual Ginibre constructions: they only need to cover the state space,
//! not match any particular Haar normalization.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::linalg::{ComplexMatrix, DensityMatrix, Projector, UnitaryOp};

fn ginibre(dim: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    DMatrix::from_fn(dim, dim, |_, _| {
        // Box-Muller pairs; any rotation-invariant entry law works here.
        let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
        let u2: f64 = rng.gen();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        Complex64::new(r * theta.cos(), r * theta.sin())
    })
}

fn from_nalgebra(m: &DMatrix<Complex64>) -> ComplexMatrix {
    let dim = m.nrows();
    ComplexMatrix::from_fn(dim, |i, j| m[(i, j)])
}

/// Full-rank random state G G^dagger / tr(G G^dagger).
pub fn random_density_matrix(dim: usize, rng: &mut impl Rng) -> DensityMatrix {
    let g = ginibre(dim, rng);
    let product = &g * g.adjoint();
    let trace: Complex64 = product.diagonal().iter().sum();
    let normalized = product / Complex64::new(trace.re, 0.0);
    DensityMatrix::new(from_nalgebra(&normalized)).expect("normalized Gram matrix is a state")
}

/// Haar-ish random unitary from the QR factorization of a Ginibre matrix.
pub fn random_unitary(dim: usize, rng: &mut impl Rng) -> UnitaryOp {
    let q = ginibre(dim, rng).qr().q();
    UnitaryOp::new(from_nalgebra(&q)).expect("QR factor is unitary")
}

/// Random rank-`rank` projector from the leading columns of a random unitary.
pub fn random_projector(dim: usize, rank: usize, rng: &mut impl Rng) -> Projector {
    assert!(rank <= dim, "projector rank cannot exceed dimension");
    let q = ginibre(dim, rng).qr().q();
    let v = q.columns(0, rank);
    let p = v * v.adjoint();
    Projector::new(from_nalgebra(&p)).expect("V V^dagger with orthonormal V is a projector")
}

/// Random pure state as a density matrix.
pub fn random_pure_state(dim: usize, rng: &mut impl Rng) -> DensityMatrix {
    let amplitudes: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect();
    DensityMatrix::pure(&amplitudes)
        .unwrap_or_else(|_| DensityMatrix::maximally_mixed(dim).unwrap())
}
