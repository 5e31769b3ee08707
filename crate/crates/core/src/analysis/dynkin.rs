//! One-step Monte Carlo estimates of the infinitesimal generator,
//! `𝓛V(ρ) ≈ (E[V(ρ_δ)] − V(ρ)) / δ`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::analysis::lyapunov::lyapunov_qsr;
use crate::dynamics::FeedbackLaw;
use crate::error::{Error, Result};
use crate::integrator::trajectory_rng;
use crate::linalg::c;
use crate::spin::Model;
use crate::state::{project_to_state_space, DensityMatrix, ProjectionPolicy, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DynkinConfig {
    pub delta: f64,
    /// Number of one-step samples (taken as antithetic pairs).
    pub samples: usize,
    pub seed: u64,
}

impl Default for DynkinConfig {
    fn default() -> Self {
        Self {
            delta: 1e-4,
            samples: 100_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DynkinEstimate {
    pub mean: f64,
    pub std_error: f64,
}

impl DynkinEstimate {
    /// Agreement within `max(rel·|reference|, 3·SE)`.
    pub fn agrees_with(&self, reference: f64, rel: f64) -> bool {
        (self.mean - reference).abs() <= self.tolerance(reference, rel)
    }

    pub fn tolerance(&self, reference: f64, rel: f64) -> f64 {
        (rel * reference.abs()).max(3.0 * self.std_error)
    }
}

/// Estimates `𝓛V(ρ)` from Euler–Maruyama steps of length `δ`, using
/// antithetic pairs `±dW` so the first-order noise term cancels exactly.
/// `stream` selects an independent random stream.
pub fn dynkin_estimate(
    rho: &DensityMatrix,
    law: &FeedbackLaw,
    model: &Model,
    v: impl Fn(&DensityMatrix) -> f64,
    cfg: &DynkinConfig,
    stream: u64,
) -> Result<DynkinEstimate> {
    if !(cfg.delta > 0.0) || cfg.samples < 4 {
        return Err(Error::InvalidConfig(
            "Dynkin oracle needs delta > 0 and >= 4 samples".into(),
        ));
    }
    let policy = ProjectionPolicy::default();
    let tol = Tolerances::default();
    let mut rng = trajectory_rng(cfg.seed, stream);
    let u = law.value(rho.matrix(), &model.ops);
    let fields = model.fields(rho.matrix(), u);
    let base = rho.matrix() + fields.drift * c(cfg.delta);
    let noise = fields.diffusion * c(model.params.eta().sqrt() * cfg.delta.sqrt());
    let v0 = v(rho);
    let pairs = cfg.samples / 2;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 0..pairs {
        let z: f64 = rng.sample(StandardNormal);
        let plus = project_to_state_space(&(&base + &noise * c(z)), &policy, &tol)?;
        let minus = project_to_state_space(&(&base - &noise * c(z)), &policy, &tol)?;
        let y = (0.5 * (v(&plus) + v(&minus)) - v0) / cfg.delta;
        let d = y - mean;
        mean += d / (i + 1) as f64;
        m2 += d * (y - mean);
    }
    let var = m2 / (pairs - 1) as f64;
    Ok(DynkinEstimate {
        mean,
        std_error: (var / pairs as f64).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QsrBoundCheck {
    pub lhs: DynkinEstimate,
    pub rhs: f64,
}

impl QsrBoundCheck {
    /// `lhs ≤ rhs + 3σ`
    pub fn holds(&self) -> bool {
        self.lhs.mean <= self.rhs + 3.0 * self.lhs.std_error
    }
}

/// Compares the Monte Carlo generator of `V_qsr` under zero control with
/// `−(ηM/2) V_qsr(ρ)`.
pub fn qsr_generator_bound_check(
    rho: &DensityMatrix,
    model: &Model,
    cfg: &DynkinConfig,
    stream: u64,
) -> Result<QsrBoundCheck> {
    let lhs = dynkin_estimate(rho, &FeedbackLaw::Zero, model, lyapunov_qsr, cfg, stream)?;
    Ok(QsrBoundCheck {
        lhs,
        rhs: -0.5 * model.params.eta_m() * lyapunov_qsr(rho),
    })
}
