//! The two superoperators of the stochastic master equation.
//!
//! Both return raw matrices rather than [`DensityMatrix`](crate::DensityMatrix):
//! increments are traceless and indefinite, so state validation only makes
//! sense after a full integration step.

use crate::error::{Error, Result};
use crate::statecore::{trace_product, CMat};

/// The two superoperator forms used by the dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuperopTag {
    /// 𝒟[A]ρ, the Lindblad dissipator.
    Dissipator,
    /// ℋ[A]ρ, the measurement innovation term.
    Innovation,
}

impl SuperopTag {
    /// Apply the tagged superoperator to a state.
    pub fn apply(&self, a: &CMat, rho: &CMat) -> Result<CMat> {
        match self {
            SuperopTag::Dissipator => dissipator(a, rho),
            SuperopTag::Innovation => innovation(a, rho),
        }
    }
}

fn check_dims(a: &CMat, rho: &CMat) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if a.nrows() != rho.nrows() || rho.nrows() != rho.ncols() {
        return Err(Error::DimMismatch {
            left: a.nrows(),
            right: rho.nrows(),
        });
    }
    Ok(())
}

/// 𝒟[A]ρ = AρA† - ½A†Aρ - ½ρA†A. Traceless; Hermitian for Hermitian ρ.
pub fn dissipator(a: &CMat, rho: &CMat) -> Result<CMat> {
    check_dims(a, rho)?;
    Ok(dissipator_unchecked(a, rho))
}

pub(crate) fn dissipator_unchecked(a: &CMat, rho: &CMat) -> CMat {
    let adj = a.adjoint();
    let ada = &adj * a;
    a * rho * adj - (&ada * rho + rho * ada).scale(0.5)
}

/// ℋ[A]ρ = Aρ + ρA† - Tr[(A+A†)ρ]ρ. Traceless; the coefficient of dW in the
/// state update under continuous monitoring of A.
pub fn innovation(a: &CMat, rho: &CMat) -> Result<CMat> {
    check_dims(a, rho)?;
    Ok(innovation_unchecked(a, rho))
}

pub(crate) fn innovation_unchecked(a: &CMat, rho: &CMat) -> CMat {
    let adj = a.adjoint();
    let mean = (trace_product(a, rho) + trace_product(&adj, rho)).re;
    a * rho + rho * adj - rho.scale(mean)
}
