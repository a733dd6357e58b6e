//! Built-in model catalog covering each regime of the entropy bound:
//! non-Hermitian dissipation, Hermitian dissipation (vanishing commutator
//! term), proportional feedback, and a truncated-oscillator instance.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::integrators::{ControlPolicy, ModelSpec};
use crate::statecore::{CMat, DensityMatrix};

/// Elementary operators.
///
/// Qubit basis order is (e, g): index 0 is the excited state, so
/// `sigma_minus()|e⟩ = |g⟩` and `sigma_z()` = diag(+1, -1). The sign of
/// ⟨[L†, L]⟩ depends on this convention, so it is fixed here once.
pub mod ops {
    use super::CMat;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    pub fn identity(d: usize) -> CMat {
        CMat::identity(d, d)
    }

    pub fn sigma_x() -> CMat {
        CMat::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
    }

    pub fn sigma_y() -> CMat {
        CMat::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
    }

    pub fn sigma_z() -> CMat {
        CMat::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
    }

    /// Lowering operator |g⟩⟨e|.
    pub fn sigma_minus() -> CMat {
        CMat::from_row_slice(2, 2, &[c(0., 0.), c(0., 0.), c(1., 0.), c(0., 0.)])
    }

    /// Raising operator |e⟩⟨g|.
    pub fn sigma_plus() -> CMat {
        sigma_minus().adjoint()
    }

    /// Truncated annihilation operator on the Fock basis |0⟩..|d-1⟩:
    /// a|n⟩ = √n |n-1⟩. Satisfies [a, a†] = I except for the (d-1, d-1)
    /// entry, which the truncation forces to -(d-1).
    pub fn annihilation(d: usize) -> CMat {
        CMat::from_fn(d, d, |i, j| {
            if j == i + 1 {
                c((j as f64).sqrt(), 0.0)
            } else {
                c(0.0, 0.0)
            }
        })
    }

    /// a†a, the number operator.
    pub fn number(d: usize) -> CMat {
        let a = annihilation(d);
        a.adjoint() * a
    }

    /// x = (a + a†)/√2, the position quadrature.
    pub fn quadrature_x(d: usize) -> CMat {
        let a = annihilation(d);
        (&a + a.adjoint()).scale(1.0 / 2f64.sqrt())
    }
}

/// A named, fully constructed model plus its default initial state.
#[derive(Debug, Clone)]
pub struct ModelCatalogEntry {
    pub name: String,
    pub spec: ModelSpec,
    pub default_initial_state: DensityMatrix,
    pub notes: String,
}

/// Names accepted by [`build_model`].
pub const CATALOG: &[&str] = &[
    "qubit_decay_homodyne",
    "qubit_hermitian_L",
    "qubit_feedback",
    "oscillator_truncated",
];

struct Params<'a> {
    supplied: &'a BTreeMap<String, f64>,
    allowed: Vec<&'static str>,
}

impl<'a> Params<'a> {
    fn new(supplied: &'a BTreeMap<String, f64>) -> Self {
        Self {
            supplied,
            allowed: Vec::new(),
        }
    }

    fn get(&mut self, key: &'static str, default: f64) -> f64 {
        self.allowed.push(key);
        self.supplied.get(key).copied().unwrap_or(default)
    }

    fn finish(self) -> Result<()> {
        for key in self.supplied.keys() {
            if !self.allowed.contains(&key.as_str()) {
                return Err(Error::BadParam(format!(
                    "unknown parameter '{key}' (allowed: {})",
                    self.allowed.join(", ")
                )));
            }
        }
        Ok(())
    }
}

fn require_nonnegative(name: &str, value: f64) -> Result<f64> {
    if !value.is_finite() || value < 0.0 {
        return Err(Error::BadParam(format!(
            "{name} must be finite and >= 0, got {value}"
        )));
    }
    Ok(value)
}

fn require_finite(name: &str, value: f64) -> Result<f64> {
    if !value.is_finite() {
        return Err(Error::BadParam(format!(
            "{name} must be finite, got {value}"
        )));
    }
    Ok(value)
}

/// Truncated thermal state p_n ∝ (n̄/(1+n̄))^n, renormalized on d levels.
fn thermal_state(d: usize, nbar: f64) -> Result<DensityMatrix> {
    let ratio = nbar / (1.0 + nbar);
    let weights: Vec<f64> = (0..d).map(|n| ratio.powi(n as i32)).collect();
    let total: f64 = weights.iter().sum();
    let diag = nalgebra::DVector::from_iterator(
        d,
        weights
            .iter()
            .map(|&w| num_complex::Complex64::new(w / total, 0.0)),
    );
    DensityMatrix::new(CMat::from_diagonal(&diag), 1e-9)
}

/// Construct a catalog model from named parameters. Unknown names or
/// parameters outside their documented range are rejected.
pub fn build_model(name: &str, params: &BTreeMap<String, f64>) -> Result<ModelCatalogEntry> {
    match name {
        "qubit_decay_homodyne" => {
            let mut p = Params::new(params);
            let omega = require_finite("omega", p.get("omega", 1.0))?;
            let kappa = require_nonnegative("kappa", p.get("kappa", 1.0))?;
            let gamma = require_nonnegative("gamma", p.get("gamma", 1.0))?;
            let u = require_finite("u", p.get("u", 0.0))?;
            p.finish()?;
            let spec = ModelSpec::new(
                ops::sigma_z().scale(omega / 2.0),
                ops::sigma_z().scale(kappa.sqrt()),
                ops::sigma_minus().scale(gamma.sqrt()),
                ControlPolicy::Constant(u),
            )?;
            Ok(ModelCatalogEntry {
                name: name.into(),
                spec,
                default_initial_state: DensityMatrix::maximally_mixed(2)?,
                notes: "Homodyne-monitored qubit (M = sqrt(kappa) sigma_z) with amplitude \
                        damping (L = sqrt(gamma) sigma_minus); basis order (e, g)."
                    .into(),
            })
        }
        "qubit_hermitian_L" => {
            let mut p = Params::new(params);
            let omega = require_finite("omega", p.get("omega", 1.0))?;
            let kappa = require_nonnegative("kappa", p.get("kappa", 1.0))?;
            let gamma = require_nonnegative("gamma", p.get("gamma", 1.0))?;
            let u = require_finite("u", p.get("u", 0.0))?;
            p.finish()?;
            let spec = ModelSpec::new(
                ops::sigma_z().scale(omega / 2.0),
                ops::sigma_z().scale(kappa.sqrt()),
                ops::sigma_z().scale(gamma.sqrt()),
                ControlPolicy::Constant(u),
            )?;
            Ok(ModelCatalogEntry {
                name: name.into(),
                spec,
                default_initial_state: DensityMatrix::maximally_mixed(2)?,
                notes: "Hermitian dissipation channel L = sqrt(gamma) sigma_z: the \
                        commutator term of the bound vanishes identically."
                    .into(),
            })
        }
        "qubit_feedback" => {
            let mut p = Params::new(params);
            let omega = require_finite("omega", p.get("omega", 1.0))?;
            let kappa = require_nonnegative("kappa", p.get("kappa", 1.0))?;
            let gamma = require_nonnegative("gamma", p.get("gamma", 1.0))?;
            let g = require_finite("g", p.get("g", 0.5))?;
            p.finish()?;
            let spec = ModelSpec::new(
                ops::sigma_z().scale(omega / 2.0),
                ops::sigma_z().scale(kappa.sqrt()),
                ops::sigma_minus().scale(gamma.sqrt()),
                ControlPolicy::Proportional {
                    observable: ops::sigma_y(),
                    gain: g,
                },
            )?;
            Ok(ModelCatalogEntry {
                name: name.into(),
                spec,
                default_initial_state: DensityMatrix::maximally_mixed(2)?,
                notes: "Illustrative proportional feedback u_t = g <sigma_y>; no control \
                        law is canonical for this system."
                    .into(),
            })
        }
        "oscillator_truncated" => {
            let mut p = Params::new(params);
            let n_fock = p.get("n_fock", 10.0);
            let omega = require_finite("omega", p.get("omega", 1.0))?;
            let kappa = require_nonnegative("kappa", p.get("kappa", 0.5))?;
            let gamma = require_nonnegative("gamma", p.get("gamma", 1.0))?;
            let u = require_finite("u", p.get("u", 0.0))?;
            let nbar = require_nonnegative("nbar", p.get("nbar", 0.5))?;
            p.finish()?;
            if n_fock.fract() != 0.0 || !(2.0..=64.0).contains(&n_fock) {
                return Err(Error::BadParam(format!(
                    "n_fock must be an integer in [2, 64], got {n_fock}"
                )));
            }
            let d = n_fock as usize;
            let spec = ModelSpec::new(
                ops::number(d).scale(omega),
                ops::quadrature_x(d).scale(kappa.sqrt()),
                ops::annihilation(d).scale(gamma.sqrt()),
                ControlPolicy::Constant(u),
            )?;
            Ok(ModelCatalogEntry {
                name: name.into(),
                spec,
                default_initial_state: thermal_state(d, nbar)?,
                notes: format!(
                    "Damped oscillator truncated at Fock level {}; x-quadrature \
                     monitoring keeps M Hermitian. Initial state is thermal with \
                     nbar = {nbar} so the top level stays essentially unpopulated.",
                    d - 1
                ),
            })
        }
        other => Err(Error::UnknownModel(other.into())),
    }
}
