//! Sampled checks of the conditions behind the feedback stabilization results.

use std::fmt;

use serde::Serialize;

use crate::analysis::lyapunov::{
    generator_edge, generator_general, lyapunov_edge, lyapunov_general, rate_constant, upsilon,
};
use crate::bures::bures_to_eigenstate;
use crate::dynamics::{control_overlap, variance_jz, FeedbackLaw};
use crate::error::{Error, Result};
use crate::integrator::trajectory_rng;
use crate::linalg::c;
use crate::sampling::{random_state, sample_d_lambda, sample_level_set};
use crate::spin::{Model, PureTarget};
use crate::state::DensityMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConditionId {
    #[serde(rename = "C1_passage")]
    C1Passage,
    #[serde(rename = "C2_nondeg")]
    C2Nondeg,
    #[serde(rename = "C3_bound")]
    C3Bound,
    #[serde(rename = "thm_i_bounds")]
    ThmIBounds,
    #[serde(rename = "thm_ii_ratio")]
    ThmIiRatio,
}

impl fmt::Display for ConditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConditionId::C1Passage => "C1_passage",
            ConditionId::C2Nondeg => "C2_nondeg",
            ConditionId::C3Bound => "C3_bound",
            ConditionId::ThmIBounds => "thm_i_bounds",
            ConditionId::ThmIiRatio => "thm_ii_ratio",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionRecord {
    pub id: ConditionId,
    pub samples: usize,
    pub violations: usize,
    /// Smallest slack seen; negative means violated.
    pub worst_margin: Option<f64>,
    /// The condition holds trivially (nothing to sample).
    pub vacuous: bool,
}

impl ConditionRecord {
    fn new(id: ConditionId) -> Self {
        Self {
            id,
            samples: 0,
            violations: 0,
            worst_margin: None,
            vacuous: false,
        }
    }

    fn vacuous(id: ConditionId) -> Self {
        Self {
            vacuous: true,
            ..Self::new(id)
        }
    }

    fn observe(&mut self, margin: f64, violated: bool) {
        self.samples += 1;
        if violated {
            self.violations += 1;
        }
        self.worst_margin = Some(self.worst_margin.map_or(margin, |w| w.min(margin)));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub law: FeedbackLaw,
    pub records: Vec<ConditionRecord>,
}

impl ConditionReport {
    pub fn violations(&self) -> usize {
        self.records.iter().map(|r| r.violations).sum()
    }

    pub fn passed(&self) -> bool {
        self.violations() == 0
    }

    pub fn get(&self, id: ConditionId) -> Option<&ConditionRecord> {
        self.records.iter().find(|r| r.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditConfig {
    pub samples: usize,
    pub seed: u64,
    pub lambda: f64,
    /// Bures radius excluded around the target.
    pub exclusion: f64,
    pub nondegeneracy_margin: f64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            samples: 10_000,
            seed: 0,
            lambda: 0.9,
            exclusion: 0.01,
            nondegeneracy_margin: 1e-8,
        }
    }
}

const REL_SLACK: f64 = 1e-12;

pub fn audit_conditions(
    law: &FeedbackLaw,
    model: &Model,
    cfg: &AuditConfig,
) -> Result<ConditionReport> {
    let target = law
        .target()
        .ok_or_else(|| Error::InvalidLaw("audit needs a law with a target".into()))?;
    if target.levels() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: target.levels(),
        });
    }
    let records = vec![
        audit_passage(law, target, model, cfg, 1)?,
        audit_nondegeneracy(law, target, model, cfg, 2)?,
        audit_linear_bound(law, target, model, cfg, 3)?,
        audit_sandwich(law, target, model, cfg, 4),
        audit_rate(law, target, model, cfg, 5)?,
    ];
    Ok(ConditionReport { law: *law, records })
}

/// `2ηM𝒱(ρ)ρ_n̄n̄ − u(ρ)Tr(i[J_y,ρ]ρ_n̄) > 0` on the level set away from
/// the target.
fn audit_passage(
    law: &FeedbackLaw,
    target: PureTarget,
    model: &Model,
    cfg: &AuditConfig,
    stream: u64,
) -> Result<ConditionRecord> {
    if target.is_edge() {
        return Ok(ConditionRecord::vacuous(ConditionId::C1Passage));
    }
    let mut rng = trajectory_rng(cfg.seed, stream);
    let mut rec = ConditionRecord::new(ConditionId::C1Passage);
    let ops = &model.ops;
    let n = target.index();
    for _ in 0..cfg.samples {
        let rho = sample_level_set(target, ops, cfg.exclusion, &mut rng)?;
        let m = rho.matrix();
        let margin = 2.0 * model.params.eta_m() * variance_jz(&rho, ops) * rho.population(n)
            - law.value(m, ops) * control_overlap(m, n, ops);
        rec.observe(margin, !(margin > 0.0));
    }
    Ok(rec)
}

/// `|2√M 𝒱(ρ)| > margin` at zeros of `u` away from the target.
fn audit_nondegeneracy(
    law: &FeedbackLaw,
    target: PureTarget,
    model: &Model,
    cfg: &AuditConfig,
    stream: u64,
) -> Result<ConditionRecord> {
    let mut rng = trajectory_rng(cfg.seed, stream);
    let mut rec = ConditionRecord::new(ConditionId::C2Nondeg);
    let ops = &model.ops;
    let scale = 2.0 * model.params.strength().sqrt();
    let check = |rho: &DensityMatrix, rec: &mut ConditionRecord| {
        let value = (scale * variance_jz(rho, ops)).abs();
        rec.observe(
            value - cfg.nondegeneracy_margin,
            !(value > cfg.nondegeneracy_margin),
        );
    };
    match *law {
        FeedbackLaw::GeneralTarget { .. } => {
            // u vanishes exactly on the level set.
            if target.is_edge() {
                return Ok(ConditionRecord::vacuous(ConditionId::C2Nondeg));
            }
            for _ in 0..cfg.samples {
                let rho = sample_level_set(target, ops, cfg.exclusion, &mut rng)?;
                check(&rho, &mut rec);
            }
        }
        FeedbackLaw::EdgeTarget {
            alpha, beta, gamma, ..
        } => {
            if gamma == 0.0 {
                return Ok(ConditionRecord::vacuous(ConditionId::C2Nondeg));
            }
            let n = target.index();
            let mut attempts = 0usize;
            while rec.samples < cfg.samples {
                attempts += 1;
                if attempts > 1000 * cfg.samples.max(1) {
                    return Err(Error::InfeasibleSampling(
                        "could not find zeros of the edge law".into(),
                    ));
                }
                let rho = random_state(target.levels(), &mut rng);
                let m = rho.matrix();
                let overlap = control_overlap(m, n, ops);
                let away = 1.0 - rho.population(n);
                if !(overlap > 0.0) {
                    continue;
                }
                // Scaling the coherences by s scales the overlap by s and
                // keeps the diagonal, so u = 0 at s = α(1−x)^β/(γT).
                let s = alpha * away.powf(beta) / (gamma * overlap);
                if !(s <= 1.0) {
                    continue;
                }
                let mut scaled = m * c(s);
                for k in 0..rho.dim() {
                    scaled[(k, k)] = m[(k, k)];
                }
                let zero = match DensityMatrix::new(scaled) {
                    Ok(z) => z,
                    Err(_) => continue,
                };
                if bures_to_eigenstate(&zero, target) < cfg.exclusion {
                    continue;
                }
                check(&zero, &mut rec);
            }
        }
        FeedbackLaw::Zero => unreachable!("checked by the caller"),
    }
    Ok(rec)
}

/// `u(ρ) ≤ C̄ V_n̄(ρ)` on `D_λ`.
fn audit_linear_bound(
    law: &FeedbackLaw,
    target: PureTarget,
    model: &Model,
    cfg: &AuditConfig,
    stream: u64,
) -> Result<ConditionRecord> {
    let mut rng = trajectory_rng(cfg.seed, stream);
    let mut rec = ConditionRecord::new(ConditionId::C3Bound);
    let ops = &model.ops;
    let n = target.index();
    let lambda = cfg.lambda;
    for _ in 0..cfg.samples {
        let rho = sample_d_lambda(target, lambda, &mut rng);
        let u = law.value(rho.matrix(), ops);
        let bound = match *law {
            FeedbackLaw::GeneralTarget { alpha, beta, .. } => {
                alpha
                    * upsilon(target).powf(beta)
                    * (1.0 - lambda).powf(beta - 0.5)
                    * lyapunov_general(target, &rho)
            }
            FeedbackLaw::EdgeTarget { alpha, gamma, .. } => {
                let c = ops.coefficient(n) + ops.coefficient(n + 1);
                (alpha + 2.0 * gamma * c) * lyapunov_edge(target, &rho)
            }
            FeedbackLaw::Zero => unreachable!("checked by the caller"),
        };
        let margin = bound - u;
        rec.observe(margin, margin < -REL_SLACK * bound.abs());
    }
    Ok(rec)
}

/// `(√2/2) d_B ≤ V ≤ k d_B` with `k = 1` (edge) or `√(2J)` (general).
fn audit_sandwich(
    law: &FeedbackLaw,
    target: PureTarget,
    model: &Model,
    cfg: &AuditConfig,
    stream: u64,
) -> ConditionRecord {
    let mut rng = trajectory_rng(cfg.seed, stream);
    let mut rec = ConditionRecord::new(ConditionId::ThmIBounds);
    let lower = std::f64::consts::FRAC_1_SQRT_2;
    for _ in 0..cfg.samples {
        let rho = random_state(target.levels(), &mut rng);
        let d = bures_to_eigenstate(&rho, target);
        let (v, upper) = match law {
            FeedbackLaw::EdgeTarget { .. } => (lyapunov_edge(target, &rho), 1.0),
            _ => (
                lyapunov_general(target, &rho),
                (2.0 * model.ops.spin()).sqrt(),
            ),
        };
        let margin = (v - lower * d).min(upper * d - v);
        rec.observe(margin, margin < -REL_SLACK);
    }
    rec
}

/// `𝓛V_n̄ ≤ −C V_n̄` on `D_λ`.
fn audit_rate(
    law: &FeedbackLaw,
    target: PureTarget,
    model: &Model,
    cfg: &AuditConfig,
    stream: u64,
) -> Result<ConditionRecord> {
    let mut rng = trajectory_rng(cfg.seed, stream);
    let mut rec = ConditionRecord::new(ConditionId::ThmIiRatio);
    let rate = rate_constant(law, model, cfg.lambda)?;
    let mut attempts = 0usize;
    while rec.samples < cfg.samples {
        attempts += 1;
        if attempts > 100 * cfg.samples.max(1) {
            return Err(Error::InfeasibleSampling(
                "no interior states in D_lambda".into(),
            ));
        }
        let rho = sample_d_lambda(target, cfg.lambda, &mut rng);
        let (lv, v) = match law {
            FeedbackLaw::EdgeTarget { .. } => (
                generator_edge(target, &rho, law, model),
                lyapunov_edge(target, &rho),
            ),
            _ => (
                generator_general(target, &rho, law, model),
                lyapunov_general(target, &rho),
            ),
        };
        let lv = match lv {
            Ok(x) => x,
            Err(Error::GeneratorDomain(_)) => continue,
            Err(e) => return Err(e),
        };
        let margin = -rate * v - lv;
        rec.observe(margin, margin < -REL_SLACK * lv.abs().max(rate * v));
    }
    Ok(rec)
}
