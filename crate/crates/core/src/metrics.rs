//! Reconstruction quality measures, all evaluated by tensor contraction.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::tensor_net::{sandwich_expectation, Mpo, Mps};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub hs_distance: f64,
    pub fidelity: f64,
    pub log_likelihood: f64,
}

/// `||rho - rec||^2 / ||rho||^2`.
pub fn hs_distance(rho: &Mpo, rec: &Mpo) -> Result<f64> {
    let a = rho.norm_sq();
    if !(a > 0.0) {
        return Err(TomoError::Degenerate("reference operator has zero norm".into()));
    }
    let cross = rho.inner(rec)?.re;
    let b = rec.norm_sq();
    Ok(((a - 2.0 * cross + b) / a).max(0.0))
}

/// `|<psi| rec |psi>|`.
pub fn fidelity_pure_mixed(psi: &Mps, rec: &Mpo) -> Result<f64> {
    Ok(sandwich_expectation(psi, rec)?.norm())
}

/// `|<psi|phi>|^2`.
pub fn fidelity_pure_pure(psi: &Mps, phi: &Mps) -> Result<f64> {
    Ok(psi.inner(phi)?.norm_sqr())
}
