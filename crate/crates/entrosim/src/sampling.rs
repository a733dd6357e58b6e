//! Seeded random states and operators for the algebraic property suite.
//!
//! Density matrices are drawn with a spectrum bounded away from zero
//! (uniform weights ≥ `min_weight` before normalization) so that ρ⁻¹ and
//! ln ρ stay well conditioned and identity residuals measure rounding, not
//! conditioning.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::statecore::{cr, CMat, DensityMatrix};

fn standard_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im)
}

/// Ginibre matrix: i.i.d. complex-normal entries.
pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMat {
    CMat::from_fn(d, d, |_, _| standard_complex(rng))
}

/// (B + B†)/2 for Ginibre B.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMat {
    let b = random_matrix(rng, d);
    (&b + b.adjoint()).scale(0.5)
}

/// Haar-distributed unitary via QR of a Ginibre matrix with the standard
/// phase fix on the R diagonal.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMat {
    let qr = random_matrix(rng, d).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 {
            rjj / rjj.norm()
        } else {
            cr(1.0)
        };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Random weights in [min_weight, 1], normalized.
fn random_weights<R: Rng + ?Sized>(rng: &mut R, d: usize, min_weight: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..d).map(|_| rng.random_range(min_weight..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Full-rank random density matrix: random spectrum in a random Haar basis.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, d: usize, min_weight: f64) -> DensityMatrix {
    let weights = random_weights(rng, d, min_weight);
    let u = random_unitary(rng, d);
    let diag = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        d,
        weights.iter().map(|&w| cr(w)),
    ));
    let mat = &u * diag * u.adjoint();
    DensityMatrix::new(mat, 1e-9).expect("constructed state is valid")
}

/// Random diagonal full-rank density matrix (computational basis).
pub fn random_diagonal_density<R: Rng + ?Sized>(
    rng: &mut R,
    d: usize,
    min_weight: f64,
) -> DensityMatrix {
    let weights = random_weights(rng, d, min_weight);
    let diag = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        d,
        weights.iter().map(|&w| cr(w)),
    ));
    DensityMatrix::new(diag, 1e-9).expect("constructed state is valid")
}

/// Random real diagonal matrix with entries in [-1, 1]; Hermitian and
/// commuting with any diagonal state.
pub fn random_diagonal_hermitian<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMat {
    CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        d,
        (0..d).map(|_| cr(rng.random_range(-1.0..1.0))),
    ))
}
