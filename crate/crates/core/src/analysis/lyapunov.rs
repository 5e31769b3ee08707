//! Lyapunov functions, their closed-form generators and rate constants.

use crate::dynamics::{control_overlap, jz_mean, FeedbackLaw};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::spin::{Model, ModelParams, PureTarget, SpinOperators};
use crate::state::DensityMatrix;

/// `V(ρ) = ½ Σ_{n≠m} √(ρ_nn ρ_mm)`
pub fn lyapunov_qsr(rho: &DensityMatrix) -> f64 {
    lyapunov_qsr_populations(&rho.populations())
}

pub fn lyapunov_qsr_populations(p: &[f64]) -> f64 {
    let roots: Vec<f64> = p.iter().map(|x| x.max(0.0).sqrt()).collect();
    let mut v = 0.0;
    for n in 0..roots.len() {
        for m in (n + 1)..roots.len() {
            v += roots[n] * roots[m];
        }
    }
    v
}

/// `V_n̄(ρ) = √(1 − ρ_n̄n̄)`
pub fn lyapunov_edge(target: PureTarget, rho: &DensityMatrix) -> f64 {
    lyapunov_edge_populations(&rho.populations(), target.index())
}

pub fn lyapunov_edge_populations(p: &[f64], n: usize) -> f64 {
    away_from(p, n).sqrt()
}

/// `V_n̄(ρ) = Σ_{k≠n̄} √ρ_kk`
pub fn lyapunov_general(target: PureTarget, rho: &DensityMatrix) -> f64 {
    lyapunov_general_populations(&rho.populations(), target.index())
}

pub fn lyapunov_general_populations(p: &[f64], n: usize) -> f64 {
    p.iter()
        .enumerate()
        .filter(|&(k, _)| k != n)
        .map(|(_, x)| x.max(0.0).sqrt())
        .sum()
}

/// `1 − ρ_nn`, summed from the other populations.
fn away_from(p: &[f64], n: usize) -> f64 {
    p.iter()
        .enumerate()
        .filter(|&(k, _)| k != n)
        .map(|(_, x)| x.max(0.0))
        .sum::<f64>()
        .min(1.0)
}

/// `𝓛V` for `V = lyapunov_qsr` with zero control:
/// `−(ηM/4) Σ_{n≠m} (n − m)² √(ρ_nn ρ_mm)`.
pub fn generator_qsr(rho: &DensityMatrix, params: &ModelParams) -> f64 {
    let p = rho.populations();
    let mut acc = 0.0;
    for n in 0..p.len() {
        for m in (n + 1)..p.len() {
            let d = (m - n) as f64;
            acc += d * d * (p[n].max(0.0) * p[m].max(0.0)).sqrt();
        }
    }
    -0.5 * params.eta_m() * acc
}

/// `𝓛V_n̄ = u T/(2V) − ηM P² ρ_n̄n̄² / (2V³)` with `V = √(1 − ρ_n̄n̄)`,
/// `T = Tr(i[J_y,ρ] e_n̄e_n̄*)`, `P = J − n̄ − Tr(J_zρ)`.
pub fn generator_edge(
    target: PureTarget,
    rho: &DensityMatrix,
    law: &FeedbackLaw,
    model: &Model,
) -> Result<f64> {
    if !matches!(law, FeedbackLaw::EdgeTarget { .. }) || law.target() != Some(target) {
        return Err(Error::InvalidLaw(
            "generator_edge needs the edge law for this target".into(),
        ));
    }
    let m = rho.matrix();
    let n = target.index();
    let p = rho.populations();
    let v = lyapunov_edge_populations(&p, n);
    if v <= 0.0 {
        return Err(Error::GeneratorDomain("V vanishes at the target".into()));
    }
    let ops = &model.ops;
    let u = law.value(m, ops);
    let t = control_overlap(m, n, ops);
    let pb = ops.jz_diag[n] - jz_mean(m, ops);
    let x = p[n];
    Ok(u * t / (2.0 * v) - model.params.eta_m() * pb * pb * x * x / (2.0 * v * v * v))
}

/// `𝓛V_n̄ = −(u/2) Σ_{k≠n̄} T_k/√ρ_kk − (ηM/2) Σ_{k≠n̄} P_k² √ρ_kk`.
pub fn generator_general(
    target: PureTarget,
    rho: &DensityMatrix,
    law: &FeedbackLaw,
    model: &Model,
) -> Result<f64> {
    if !matches!(law, FeedbackLaw::GeneralTarget { .. }) || law.target() != Some(target) {
        return Err(Error::InvalidLaw(
            "generator_general needs the general law for this target".into(),
        ));
    }
    generator_sum(
        target,
        rho.matrix(),
        law.value(rho.matrix(), &model.ops),
        model,
    )
}

fn generator_sum(target: PureTarget, m: &CMatrix, u: f64, model: &Model) -> Result<f64> {
    let ops = &model.ops;
    let mean = jz_mean(m, ops);
    let mut control = 0.0;
    let mut noise = 0.0;
    for k in (0..m.nrows()).filter(|&k| k != target.index()) {
        let x = m[(k, k)].re;
        if !(x > 0.0) {
            return Err(Error::GeneratorDomain(format!("population {k} is {x:e}")));
        }
        let s = x.sqrt();
        if u != 0.0 {
            control += control_overlap(m, k, ops) / s;
        }
        let pk = ops.jz_diag[k] - mean;
        noise += pk * pk * s;
    }
    Ok(-0.5 * u * control - 0.5 * model.params.eta_m() * noise)
}

/// `(C1, C2)` with `C1·d_B(ρ, Ē) ≤ V(ρ) ≤ C2·d_B(ρ, Ē)`.
pub fn qsr_bound_constants(params: &ModelParams) -> (f64, f64) {
    let j = params.spin();
    (0.5, j * (2.0 * j + 1.0))
}

/// `Υ = max(n̄, 2J − n̄)`
pub fn upsilon(target: PureTarget) -> f64 {
    let n = target.index();
    n.max(target.levels() - 1 - n) as f64
}

/// `Γ = Σ_{k≠n̄} (c_k + c_{k+1})`
pub fn gamma_sum(target: PureTarget, ops: &SpinOperators) -> f64 {
    (0..ops.dim())
        .filter(|&k| k != target.index())
        .map(|k| ops.coefficient(k) + ops.coefficient(k + 1))
        .sum()
}

/// Rate `C` with `𝓛V_n̄ ≤ −C V_n̄` on `D_λ(ρ_n̄)`.
///
/// Edge law: `ηMλ²/2 − α c (1−λ)^{(β−1)/2}` with `c` the ladder
/// coefficient adjacent to the target. General law:
/// `ηM(1 − Υ(1−λ))²/2 − αΓΥ^β(1−λ)^{β−½}`, meaningful for `λ > 1 − 1/Υ`.
pub fn rate_constant(law: &FeedbackLaw, model: &Model, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "lambda must lie in (0, 1), got {lambda}"
        )));
    }
    let eta_m = model.params.eta_m();
    match *law {
        FeedbackLaw::Zero => Ok(0.5 * eta_m),
        FeedbackLaw::EdgeTarget {
            target,
            alpha,
            beta,
            ..
        } => {
            let n = target.index();
            let c = if n == 0 {
                model.ops.coefficient(1)
            } else {
                model.ops.coefficient(n)
            };
            Ok(eta_m * lambda * lambda / 2.0 - alpha * c * (1.0 - lambda).powf((beta - 1.0) / 2.0))
        }
        FeedbackLaw::GeneralTarget {
            target,
            alpha,
            beta,
        } => {
            let ups = upsilon(target);
            let gap = 1.0 - ups * (1.0 - lambda);
            if gap <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "lambda must exceed 1 - 1/{ups} for this target"
                )));
            }
            Ok(eta_m * gap * gap / 2.0
                - alpha
                    * gamma_sum(target, &model.ops)
                    * ups.powf(beta)
                    * (1.0 - lambda).powf(beta - 0.5))
        }
    }
}
