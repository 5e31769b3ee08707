//! Expectations and the Bures metric.

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, nuclear_norm, psd_sqrt, trace, CMatrix};
use crate::spin::PureTarget;
use crate::state::DensityMatrix;

/// `Tr(Aρ)` (real part).
pub fn expectation(a: &CMatrix, rho: &DensityMatrix) -> Result<f64> {
    if a.nrows() != rho.dim() || a.ncols() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: a.nrows(),
        });
    }
    Ok(trace(&(a * rho.matrix())).re)
}

/// `√(2 − 2F)` with `F` the root fidelity, clamped to `[0, √2]`.
fn from_root_fidelity(f: f64) -> f64 {
    (2.0 - 2.0 * f.clamp(0.0, 1.0)).max(0.0).sqrt()
}

/// Bures distance from `rho` to the eigenstate `e_n e_n*`, using
/// `2 − 2√x = 2(1 − x)/(1 + √x)` with `1 − x` summed from the other
/// populations, which keeps full relative precision near the target.
pub fn bures_to_eigenstate_populations(populations: &[f64], n: usize) -> f64 {
    let x = populations[n].clamp(0.0, 1.0);
    let rest: f64 = populations
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != n)
        .map(|(_, p)| p.max(0.0))
        .sum();
    (2.0 * rest.min(1.0) / (1.0 + x.sqrt())).sqrt()
}

pub fn bures_to_eigenstate(rho: &DensityMatrix, target: PureTarget) -> f64 {
    bures_to_eigenstate_populations(&rho.populations(), target.index())
}

/// `d_B(ρ, Ē)` where `Ē` is the set of all `J_z` eigenstates.
pub fn bures_to_eigenstates_populations(populations: &[f64]) -> f64 {
    let best = populations
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .unwrap_or(0);
    bures_to_eigenstate_populations(populations, best)
}

/// General Bures distance via the root fidelity `Tr√(√ρ_b ρ_a √ρ_b)`,
/// evaluated as the nuclear norm `‖√ρ_a √ρ_b‖₁` (same quantity, better
/// conditioned for rank-deficient inputs).
pub fn bures_distance_general(rho_a: &DensityMatrix, rho_b: &DensityMatrix) -> Result<f64> {
    if rho_a.dim() != rho_b.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho_a.dim(),
            found: rho_b.dim(),
        });
    }
    let sa = psd_sqrt(rho_a.matrix());
    let sb = psd_sqrt(rho_b.matrix());
    Ok(from_root_fidelity(nuclear_norm(&(sa * sb))))
}

/// Bures distance. Uses the pure-state closed form `√(2 − 2√⟨ψ|ρ_a|ψ⟩)`
/// when `rho_b` has rank one.
pub fn bures_distance(rho_a: &DensityMatrix, rho_b: &DensityMatrix) -> Result<f64> {
    if rho_a.dim() != rho_b.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho_a.dim(),
            found: rho_b.dim(),
        });
    }
    let (values, vectors) = hermitian_eigen(rho_b.matrix());
    let top = *values.last().unwrap();
    if 1.0 - top < 1e-12 {
        let psi = vectors.column(values.len() - 1);
        let overlap = (psi.adjoint() * rho_a.matrix() * psi)[(0, 0)].re;
        return Ok(from_root_fidelity(overlap.max(0.0).sqrt()));
    }
    bures_distance_general(rho_a, rho_b)
}

/// `min_{σ ∈ E} d_B(ρ, σ)`
pub fn bures_to_set(rho: &DensityMatrix, set: &[DensityMatrix]) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut best = f64::INFINITY;
    for s in set {
        best = best.min(bures_distance(rho, s)?);
    }
    Ok(best)
}
