//! Density-matrix semantics on dense complex matrices: validation, von
//! Neumann entropy, expectation values, the two variances entering the
//! entropy bound, and eigenvalue-floored spectral functions (`ρ⁻¹`, `ln ρ`).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix; the working representation for operators and states.
pub type CMat = DMatrix<Complex64>;

/// Hermiticity tolerance enforced by [`DensityMatrix`].
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Unit-trace tolerance enforced by [`DensityMatrix`].
pub const TRACE_TOL: f64 = 1e-10;
/// Positivity tolerance enforced by [`DensityMatrix`] (min eigenvalue ≥ -this).
pub const POSITIVITY_TOL: f64 = 1e-9;

pub(crate) fn cr(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// max |m[i,j] - conj(m[j,i])| over all entries.
pub fn hermiticity_error(m: &CMat) -> f64 {
    let d = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in i..d {
            let delta = (m[(i, j)] - m[(j, i)].conj()).norm();
            worst = worst.max(delta);
        }
    }
    worst
}

pub fn all_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// (m + m†)/2
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Tr[a·b] without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> Complex64 {
    let d = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

fn check_square(m: &CMat) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

/// Eigenvalue floor used when evaluating `ρ⁻¹` and `ln ρ`. The dynamics can
/// reach exactly pure states, where both functions are singular; eigenvalues
/// below `epsilon` are replaced by `epsilon` and the substitution is flagged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralFloor {
    epsilon: f64,
}

impl SpectralFloor {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1e-3) {
            return Err(Error::BadFloor(epsilon));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl Default for SpectralFloor {
    fn default() -> Self {
        Self { epsilon: 1e-12 }
    }
}

/// A validated density matrix: Hermitian, unit trace, positive semidefinite
/// (within [`HERMITICITY_TOL`], [`TRACE_TOL`], [`POSITIVITY_TOL`]).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: CMat,
}

impl DensityMatrix {
    /// Validating constructor. Accepts asymmetry, trace error, and negativity
    /// up to `tol`, then snaps the survivor onto the constraint manifold:
    /// Hermitize, clip any residual negative eigenvalues, renormalize trace.
    pub fn new(m: CMat, tol: f64) -> Result<Self> {
        let d = check_square(&m)?;
        if d < 2 {
            return Err(Error::DimTooSmall(d));
        }
        if !all_finite(&m) {
            return Err(Error::NonFinite);
        }
        let asymmetry = hermiticity_error(&m);
        if asymmetry > tol {
            return Err(Error::NonHermitian { asymmetry, tol });
        }
        let h = hermitian_part(&m);
        let tr = h.trace().re;
        let deviation = (tr - 1.0).abs();
        if deviation > tol {
            return Err(Error::NonUnitTrace { deviation, tol });
        }
        let eig = h.clone().symmetric_eigen();
        if eig.eigenvalues.iter().any(|x| !x.is_finite()) {
            return Err(Error::EigenFailure);
        }
        let min_eig = eig.eigenvalues.min();
        if min_eig < -tol {
            return Err(Error::NegativeEigenvalue {
                value: min_eig,
                tol,
            });
        }
        let mat = if min_eig < 0.0 {
            let clipped = eig.eigenvalues.map(|x| x.max(0.0));
            let total: f64 = clipped.iter().sum();
            if total <= 0.0 {
                return Err(Error::TraceCollapse(total));
            }
            let diag = CMat::from_diagonal(&clipped.map(|x| cr(x / total)));
            &eig.eigenvectors * diag * eig.eigenvectors.adjoint()
        } else {
            h.scale(1.0 / tr)
        };
        Ok(Self { mat })
    }

    /// Wraps sanitized integrator output without revalidating. With the
    /// default sanitize policy the invariants hold by construction; policies
    /// that disable clipping or renormalization own the consequences.
    pub(crate) fn from_sanitized(mat: CMat) -> Self {
        debug_assert!(all_finite(&mat));
        Self { mat }
    }

    /// ρ = |ψ⟩⟨ψ| for a (normalized) state vector.
    pub fn from_pure(psi: &[Complex64]) -> Result<Self> {
        let d = psi.len();
        if d < 2 {
            return Err(Error::DimTooSmall(d));
        }
        let norm_sq: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if !(norm_sq.is_finite() && norm_sq > 0.0) {
            return Err(Error::NonFinite);
        }
        let mat = CMat::from_fn(d, d, |i, j| psi[i] * psi[j].conj() / norm_sq);
        Ok(Self { mat })
    }

    /// I/d, the maximally mixed state.
    pub fn maximally_mixed(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::DimTooSmall(d));
        }
        Ok(Self {
            mat: CMat::identity(d, d).scale(1.0 / d as f64),
        })
    }

    pub fn mat(&self) -> &CMat {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    /// Re-checks the type invariants at the fixed tolerances.
    pub fn validate(&self) -> Result<()> {
        if !all_finite(&self.mat) {
            return Err(Error::NonFinite);
        }
        let asymmetry = hermiticity_error(&self.mat);
        if asymmetry > HERMITICITY_TOL {
            return Err(Error::NonHermitian {
                asymmetry,
                tol: HERMITICITY_TOL,
            });
        }
        let deviation = (self.mat.trace().re - 1.0).abs();
        if deviation > TRACE_TOL {
            return Err(Error::NonUnitTrace {
                deviation,
                tol: TRACE_TOL,
            });
        }
        let min_eig = self.eigenvalues()?.min();
        if min_eig < -POSITIVITY_TOL {
            return Err(Error::NegativeEigenvalue {
                value: min_eig,
                tol: POSITIVITY_TOL,
            });
        }
        Ok(())
    }

    pub fn eigenvalues(&self) -> Result<DVector<f64>> {
        let vals = self.mat.clone().symmetric_eigen().eigenvalues;
        if vals.iter().any(|x| !x.is_finite()) {
            return Err(Error::EigenFailure);
        }
        Ok(vals)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.min())
    }
}

/// Full Hermitian eigendecomposition of a state together with the floored
/// spectral functions needed by the bound terms. One decomposition serves
/// `ρ⁻¹`, `ln ρ`, and the floored flag.
pub struct Spectrum {
    eigenvalues: DVector<f64>,
    vectors: CMat,
    epsilon: f64,
    floored: bool,
}

impl Spectrum {
    pub fn of(rho: &DensityMatrix, floor: &SpectralFloor) -> Result<Self> {
        let eig = rho.mat().clone().symmetric_eigen();
        if eig.eigenvalues.iter().any(|x| !x.is_finite()) {
            return Err(Error::EigenFailure);
        }
        let epsilon = floor.epsilon();
        let floored = eig.eigenvalues.iter().any(|&x| x < epsilon);
        Ok(Self {
            eigenvalues: eig.eigenvalues,
            vectors: eig.eigenvectors,
            epsilon,
            floored,
        })
    }

    /// Whether any eigenvalue sat below the floor.
    pub fn floored(&self) -> bool {
        self.floored
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// V diag(f(λ)) V† with eigenvalues floored at epsilon before `f`.
    pub fn apply_floored(&self, f: impl Fn(f64) -> f64) -> CMat {
        let eps = self.epsilon;
        let diag = CMat::from_diagonal(&self.eigenvalues.map(|x| cr(f(x.max(eps)))));
        &self.vectors * diag * self.vectors.adjoint()
    }

    /// Floored pseudo-inverse V diag(1/max(λ,ε)) V†.
    pub fn inverse(&self) -> CMat {
        self.apply_floored(|x| 1.0 / x)
    }

    /// Floored logarithm V diag(ln max(λ,ε)) V†.
    pub fn ln(&self) -> CMat {
        self.apply_floored(f64::ln)
    }
}

/// S(ρ) = -Σ λ ln λ with the 0·ln 0 = 0 convention: eigenvalues at or below
/// the floor contribute nothing.
pub fn entropy_from_eigenvalues(vals: &[f64], floor: &SpectralFloor) -> f64 {
    let eps = floor.epsilon();
    let s: f64 = vals
        .iter()
        .filter(|&&x| x > eps)
        .map(|&x| -x * x.ln())
        .sum();
    // -x ln x can go fractionally negative for λ = 1 + rounding
    s.max(0.0)
}

/// Von Neumann entropy S(ρ) = -Tr[ρ ln ρ], in [0, ln d].
pub fn von_neumann_entropy(rho: &DensityMatrix, floor: &SpectralFloor) -> Result<f64> {
    let vals = rho.eigenvalues()?;
    Ok(entropy_from_eigenvalues(vals.as_slice(), floor))
}

/// ⟨A⟩ = Tr[A ρ].
pub fn expectation(a: &CMat, rho: &DensityMatrix) -> Result<Complex64> {
    check_dims_against(a, rho)?;
    Ok(trace_product(a, rho.mat()))
}

fn check_dims_against(a: &CMat, rho: &DensityMatrix) -> Result<usize> {
    let d = check_square(a)?;
    if d != rho.dim() {
        return Err(Error::DimMismatch {
            left: d,
            right: rho.dim(),
        });
    }
    Ok(d)
}

pub(crate) fn require_hermitian(m: &CMat) -> Result<()> {
    let asymmetry = hermiticity_error(m);
    if asymmetry > HERMITICITY_TOL {
        return Err(Error::NonHermitian {
            asymmetry,
            tol: HERMITICITY_TOL,
        });
    }
    Ok(())
}

/// Var[M] = Tr[M²ρ] - Tr[Mρ]². Requires Hermitian M.
pub fn variance(m: &CMat, rho: &DensityMatrix) -> Result<f64> {
    check_dims_against(m, rho)?;
    require_hermitian(m)?;
    let mean = trace_product(m, rho.mat()).re;
    let second = trace_product(&(m * m), rho.mat()).re;
    Ok(second - mean * mean)
}

/// Var^gen[M] = Tr[ρ⁻¹ M ρ² M] - Tr[Mρ]², with the floored pseudo-inverse.
/// Coincides with [`variance`] whenever [M, ρ] = 0.
pub fn generalized_variance(m: &CMat, rho: &DensityMatrix, floor: &SpectralFloor) -> Result<f64> {
    check_dims_against(m, rho)?;
    require_hermitian(m)?;
    let spectrum = Spectrum::of(rho, floor)?;
    Ok(generalized_variance_with(m, rho, &spectrum))
}

/// Same as [`generalized_variance`] but reusing an existing eigendecomposition.
pub fn generalized_variance_with(m: &CMat, rho: &DensityMatrix, spectrum: &Spectrum) -> f64 {
    let inv = spectrum.inverse();
    let rho_sq = rho.mat() * rho.mat();
    let sandwich = trace_product(&(&inv * m), &(&rho_sq * m)).re;
    let mean = trace_product(m, rho.mat()).re;
    sandwich - mean * mean
}

/// ⟨[L†, L]⟩ = Tr[(L†L - LL†)ρ]; zero for Hermitian L.
pub fn dissipative_commutator(l: &CMat, rho: &DensityMatrix) -> Result<f64> {
    check_dims_against(l, rho)?;
    let ladj = l.adjoint();
    let value = trace_product(&(&ladj * l), rho.mat()) - trace_product(&(l * &ladj), rho.mat());
    debug_assert!(
        value.im.abs() <= 1e-9,
        "commutator trace imag = {}",
        value.im
    );
    Ok(value.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ops;
    use approx::assert_abs_diff_eq;

    fn diag2(a: f64, b: f64) -> CMat {
        CMat::from_diagonal(&DVector::from_vec(vec![cr(a), cr(b)]))
    }

    #[test]
    fn make_density_accepts_maximally_mixed() {
        let rho = DensityMatrix::new(diag2(0.5, 0.5), 1e-12).unwrap();
        rho.validate().unwrap();
        assert_eq!(rho.dim(), 2);
    }

    #[test]
    fn make_density_accepts_classical_mixture() {
        let rho = DensityMatrix::new(diag2(0.9, 0.1), 1e-12).unwrap();
        rho.validate().unwrap();
    }

    #[test]
    fn make_density_rejects_negative_eigenvalue() {
        let err = DensityMatrix::new(diag2(1.1, -0.1), 1e-6).unwrap_err();
        assert!(matches!(err, Error::NegativeEigenvalue { .. }), "{err}");
    }

    #[test]
    fn make_density_rejects_bad_trace_and_nan() {
        let err = DensityMatrix::new(diag2(0.7, 0.7), 1e-6).unwrap_err();
        assert!(matches!(err, Error::NonUnitTrace { .. }), "{err}");

        let mut m = diag2(0.5, 0.5);
        m[(0, 1)] = Complex64::new(f64::NAN, 0.0);
        let err = DensityMatrix::new(m, 1e-6).unwrap_err();
        assert!(matches!(err, Error::NonFinite), "{err}");

        let mut m = diag2(0.5, 0.5);
        m[(0, 1)] = cr(0.3); // not mirrored below the diagonal
        let err = DensityMatrix::new(m, 1e-10).unwrap_err();
        assert!(matches!(err, Error::NonHermitian { .. }), "{err}");
    }

    #[test]
    fn make_density_hermitizes_within_tol() {
        let mut m = diag2(0.6, 0.4);
        m[(0, 1)] = Complex64::new(0.1, 5e-7);
        m[(1, 0)] = Complex64::new(0.1, 5e-7); // conj asymmetry ~1e-6
        let rho = DensityMatrix::new(m, 1e-5).unwrap();
        rho.validate().unwrap();
    }

    #[test]
    fn entropy_matches_scalar_formula() {
        let floor = SpectralFloor::default();
        let pure = DensityMatrix::from_pure(&[cr(1.0), cr(0.0)]).unwrap();
        assert_abs_diff_eq!(
            von_neumann_entropy(&pure, &floor).unwrap(),
            0.0,
            epsilon = 1e-12
        );

        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        assert_abs_diff_eq!(
            von_neumann_entropy(&mixed, &floor).unwrap(),
            2f64.ln(),
            epsilon = 1e-12
        );

        // oracle: -0.9 ln 0.9 - 0.1 ln 0.1
        let expected = -0.9_f64 * 0.9_f64.ln() - 0.1_f64 * 0.1_f64.ln();
        assert_abs_diff_eq!(expected, 0.325083, epsilon = 1e-6);
        let rho = DensityMatrix::new(diag2(0.9, 0.1), 1e-12).unwrap();
        assert_abs_diff_eq!(
            von_neumann_entropy(&rho, &floor).unwrap(),
            expected,
            epsilon = 1e-12
        );
    }

    #[test]
    fn expectation_examples() {
        let ground = DensityMatrix::from_pure(&[cr(1.0), cr(0.0)]).unwrap();
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        let skew = DensityMatrix::new(diag2(0.9, 0.1), 1e-12).unwrap();

        assert_abs_diff_eq!(
            expectation(&ops::sigma_z(), &ground).unwrap().re,
            1.0,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            expectation(&ops::sigma_z(), &mixed).unwrap().re,
            0.0,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            expectation(&ops::sigma_x(), &skew).unwrap().re,
            0.0,
            epsilon = 1e-14
        );
        assert!(expectation(&ops::sigma_z(), &ground).unwrap().im.abs() <= 1e-12);

        let err = expectation(&ops::identity(3), &mixed).unwrap_err();
        assert!(matches!(err, Error::DimMismatch { .. }));
    }

    #[test]
    fn variance_examples() {
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        let ground = DensityMatrix::from_pure(&[cr(1.0), cr(0.0)]).unwrap();
        let skew = DensityMatrix::new(diag2(0.9, 0.1), 1e-12).unwrap();

        assert_abs_diff_eq!(
            variance(&ops::sigma_z(), &mixed).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            variance(&ops::sigma_z(), &ground).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            variance(&ops::sigma_x(), &skew).unwrap(),
            1.0,
            epsilon = 1e-12
        );

        let err = variance(&ops::sigma_minus(), &mixed).unwrap_err();
        assert!(matches!(err, Error::NonHermitian { .. }));
    }

    #[test]
    fn generalized_variance_examples() {
        let floor = SpectralFloor::default();
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        assert_abs_diff_eq!(
            generalized_variance(&ops::sigma_z(), &mixed, &floor).unwrap(),
            1.0,
            epsilon = 1e-12
        );

        // commuting pair: Var^gen == Var == 1 - (2p-1)^2
        for &p in &[0.5, 0.7, 0.95] {
            let rho = DensityMatrix::new(diag2(p, 1.0 - p), 1e-12).unwrap();
            let g = generalized_variance(&ops::sigma_z(), &rho, &floor).unwrap();
            let v = variance(&ops::sigma_z(), &rho).unwrap();
            let expected = 1.0 - (2.0 * p - 1.0) * (2.0 * p - 1.0);
            assert_abs_diff_eq!(g, expected, epsilon = 1e-10);
            assert_abs_diff_eq!(g, v, epsilon = 1e-10);
        }

        // oracle: Tr[ρ⁻¹ σx ρ² σx] = 0.01/0.9 + 0.81/0.1
        let skew = DensityMatrix::new(diag2(0.9, 0.1), 1e-12).unwrap();
        let expected = 0.01 / 0.9 + 0.81 / 0.1;
        assert_abs_diff_eq!(expected, 8.11111, epsilon = 1e-4);
        assert_abs_diff_eq!(
            generalized_variance(&ops::sigma_x(), &skew, &floor).unwrap(),
            expected,
            epsilon = 1e-10
        );
    }

    #[test]
    fn dissipative_commutator_examples() {
        let excited = DensityMatrix::from_pure(&[cr(1.0), cr(0.0)]).unwrap();
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();

        // Hermitian L: exactly zero
        assert_eq!(
            dissipative_commutator(&ops::sigma_z(), &mixed).unwrap(),
            0.0
        );
        // [σ+, σ-] = diag(+1, -1) in the (e, g) basis
        assert_abs_diff_eq!(
            dissipative_commutator(&ops::sigma_minus(), &excited).unwrap(),
            1.0,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            dissipative_commutator(&ops::sigma_minus(), &mixed).unwrap(),
            0.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn spectral_floor_bounds() {
        assert!(SpectralFloor::new(1e-12).is_ok());
        assert!(SpectralFloor::new(0.0).is_err());
        assert!(SpectralFloor::new(1e-3).is_err());
        assert!(SpectralFloor::new(-1.0).is_err());
    }

    #[test]
    fn floored_inverse_of_pure_state_is_finite() {
        let floor = SpectralFloor::default();
        let pure = DensityMatrix::from_pure(&[cr(0.0), cr(1.0)]).unwrap();
        let spectrum = Spectrum::of(&pure, &floor).unwrap();
        assert!(spectrum.floored());
        let inv = spectrum.inverse();
        assert!(all_finite(&inv));
        // on the support, ρ⁻¹ acts as the true inverse
        let x = &inv * pure.mat();
        assert_abs_diff_eq!(x[(1, 1)].re, 1.0, epsilon = 1e-9);
    }
}
