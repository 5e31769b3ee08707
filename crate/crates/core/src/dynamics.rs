//! Vector fields of the stochastic master equation
//!
//! ```text
//! dρ = F(ρ) dt + √η G(ρ) dW
//! F(ρ) = −iω[J_z, ρ] + M(J_z ρ J_z − ½J_z²ρ − ½ρJ_z²) − iu[J_y, ρ]
//! G(ρ) = √M (J_z ρ + ρ J_z − 2 Tr(J_z ρ) ρ)
//! ```
//!
//! together with the Stratonovich drift, the linear (Zakai) fields, the
//! feedback laws and the scalar helpers used by the convergence analysis.
//!
//! Field functions take raw matrices: the algebra is defined on all
//! Hermitian matrices, and integrator stages and finite-difference probes
//! need to evaluate it off the state space.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{c, commutator, hermitian_eigen, hermitian_error, trace, CMatrix, I};
use crate::spin::{Model, PureTarget, SpinOperators};
use crate::state::{DensityMatrix, Tolerances};

/// State feedback `u(ρ)` acting through `−iu[J_y, ρ]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeedbackLaw {
    Zero,
    /// `u = α(1 − ρ_n̄n̄)^β − γ Tr(i[J_y, ρ] e_n̄e_n̄*)` for `n̄ ∈ {0, 2J}`.
    EdgeTarget {
        target: PureTarget,
        alpha: f64,
        beta: f64,
        gamma: f64,
    },
    /// `u = α (J − n̄ − Tr(J_z ρ))^β`.
    GeneralTarget {
        target: PureTarget,
        alpha: f64,
        beta: f64,
    },
}

impl FeedbackLaw {
    pub fn edge(target: PureTarget, alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        if !target.is_edge() {
            return Err(Error::InvalidLaw(format!(
                "edge law needs target 0 or {}, got {}",
                target.levels() - 1,
                target.index()
            )));
        }
        check_gain(alpha, beta)?;
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidLaw(format!(
                "gamma must be >= 0, got {gamma}"
            )));
        }
        Ok(FeedbackLaw::EdgeTarget {
            target,
            alpha,
            beta,
            gamma,
        })
    }

    pub fn general(target: PureTarget, alpha: f64, beta: f64) -> Result<Self> {
        check_gain(alpha, beta)?;
        Ok(FeedbackLaw::GeneralTarget {
            target,
            alpha,
            beta,
        })
    }

    pub fn target(&self) -> Option<PureTarget> {
        match self {
            FeedbackLaw::Zero => None,
            FeedbackLaw::EdgeTarget { target, .. } | FeedbackLaw::GeneralTarget { target, .. } => {
                Some(*target)
            }
        }
    }

    /// `u(ρ)`.
    pub fn value(&self, rho: &CMatrix, ops: &SpinOperators) -> f64 {
        match *self {
            FeedbackLaw::Zero => 0.0,
            FeedbackLaw::EdgeTarget {
                target,
                alpha,
                beta,
                gamma,
            } => {
                let n = target.index();
                let away: f64 = (0..rho.nrows())
                    .filter(|&k| k != n)
                    .map(|k| rho[(k, k)].re)
                    .sum::<f64>()
                    .max(0.0);
                alpha * away.powf(beta) - gamma * control_overlap(rho, n, ops)
            }
            FeedbackLaw::GeneralTarget {
                target,
                alpha,
                beta,
            } => alpha * real_power(level_offset_raw(rho, target.index(), ops), beta),
        }
    }
}

fn check_gain(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidLaw(format!("alpha must be > 0, got {alpha}")));
    }
    if !(beta > 0.5 && beta.is_finite()) {
        return Err(Error::InvalidLaw(format!("beta must be > 1/2, got {beta}")));
    }
    Ok(())
}

/// `x^β` for integer β (so `β = 10` is the plain even power), and the
/// signed power `sign(x)|x|^β` otherwise.
pub fn real_power(x: f64, beta: f64) -> f64 {
    if beta.fract() == 0.0 && beta.abs() <= i32::MAX as f64 {
        x.powi(beta as i32)
    } else {
        x.signum() * x.abs().powf(beta)
    }
}

/// `Tr(i[J_y, ρ] e_n e_n*)`, the rate at which the control moves `ρ_nn`
/// (per unit `−u`).
pub fn control_overlap(rho: &CMatrix, n: usize, ops: &SpinOperators) -> f64 {
    let dim = rho.nrows();
    let mut acc = c(0.0);
    for k in 0..dim {
        acc += ops.jy[(n, k)] * rho[(k, n)] - rho[(n, k)] * ops.jy[(k, n)];
    }
    (I * acc).re
}

/// `Tr(J_z ρ)`
pub fn jz_mean(rho: &CMatrix, ops: &SpinOperators) -> f64 {
    ops.jz_diag
        .iter()
        .enumerate()
        .map(|(k, z)| z * rho[(k, k)].re)
        .sum()
}

fn level_offset_raw(rho: &CMatrix, n: usize, ops: &SpinOperators) -> f64 {
    ops.jz_diag[n] - jz_mean(rho, ops)
}

/// `P_n̄(ρ) = J − n̄ − Tr(J_z ρ)`.
pub fn p_bar(target: PureTarget, rho: &DensityMatrix, ops: &SpinOperators) -> f64 {
    level_offset_raw(rho.matrix(), target.index(), ops)
}

/// `P_k(ρ)` for any level index `k`.
pub fn level_offset(rho: &CMatrix, k: usize, ops: &SpinOperators) -> f64 {
    level_offset_raw(rho, k, ops)
}

/// `𝒱(ρ) = Tr(J_z²ρ) − Tr²(J_zρ)`.
pub fn variance_jz(rho: &DensityMatrix, ops: &SpinOperators) -> f64 {
    variance_jz_raw(rho.matrix(), ops)
}

pub(crate) fn variance_jz_raw(rho: &CMatrix, ops: &SpinOperators) -> f64 {
    let mean = jz_mean(rho, ops);
    let second: f64 = ops
        .jz_diag
        .iter()
        .enumerate()
        .map(|(k, z)| z * z * rho[(k, k)].re)
        .sum();
    second - mean * mean
}

/// Drift and diffusion evaluated together, sharing the `J_z ρ` products.
#[derive(Debug, Clone)]
pub struct Fields {
    pub drift: CMatrix,
    pub diffusion: CMatrix,
}

impl Model {
    /// Itô drift `F(ρ)` at control value `u`.
    pub fn drift_ito(&self, rho: &CMatrix, u: f64) -> CMatrix {
        self.fields(rho, u).drift
    }

    /// Diffusion `G(ρ)` (the noise enters as `√η G dW`).
    pub fn diffusion(&self, rho: &CMatrix) -> CMatrix {
        let ops = &self.ops;
        let jr = &ops.jz * rho;
        let rj = rho * &ops.jz;
        let mean = trace(&jr);
        (jr + rj - rho * (mean * 2.0)) * c(self.params.strength().sqrt())
    }

    pub fn fields(&self, rho: &CMatrix, u: f64) -> Fields {
        let ops = &self.ops;
        let m = self.params.strength();
        let jr = &ops.jz * rho;
        let rj = rho * &ops.jz;
        let jrj = &jr * &ops.jz;
        let j2r = &ops.jz * &jr;
        let rj2 = &rj * &ops.jz;
        let mut drift = (jrj - (j2r + rj2) * c(0.5)) * c(m);
        let omega = self.params.omega();
        if omega != 0.0 {
            drift -= (&jr - &rj) * (I * omega);
        }
        if u != 0.0 {
            drift -= commutator(&ops.jy, rho) * (I * u);
        }
        let mean = trace(&jr);
        let diffusion = (jr + rj - rho * (mean * 2.0)) * c(m.sqrt());
        Fields { drift, diffusion }
    }

    /// Stratonovich drift
    ///
    /// ```text
    /// F̂(ρ) = −iω[J_z,ρ] + M((1−η)J_zρJ_z − (1+η)/2 (J_z²ρ + ρJ_z²) + 2η Tr(J_z²ρ) ρ)
    ///        + 2ηM Tr(J_zρ)(J_zρ + ρJ_z − 2Tr(J_zρ)ρ) − iu[J_y,ρ]
    /// ```
    pub fn drift_stratonovich(&self, rho: &CMatrix, u: f64) -> CMatrix {
        let ops = &self.ops;
        let m = self.params.strength();
        let eta = self.params.eta();
        let jr = &ops.jz * rho;
        let rj = rho * &ops.jz;
        let mean = trace(&jr);
        let second = trace(&(&ops.jz2 * rho));
        let mut out = (&jr * &ops.jz) * c(1.0 - eta)
            - (&ops.jz * &jr + &rj * &ops.jz) * c(0.5 * (1.0 + eta))
            + rho * (second * 2.0 * eta);
        out *= c(m);
        out += (&jr + &rj - rho * (mean * 2.0)) * (mean * 2.0 * eta * m);
        let omega = self.params.omega();
        if omega != 0.0 {
            out -= (&jr - &rj) * (I * omega);
        }
        if u != 0.0 {
            out -= commutator(&ops.jy, rho) * (I * u);
        }
        out
    }

    /// Fields of the linear filter `dρ̃ = F(ρ̃) dt + √η G̃(ρ̃) dy` with
    /// `G̃(ρ̃) = √M (J_z ρ̃ + ρ̃ J_z)`.
    pub fn zakai_fields(&self, rho_tilde: &CMatrix, u: f64) -> Fields {
        let ops = &self.ops;
        let drift = self.drift_ito(rho_tilde, u);
        let diffusion =
            (&ops.jz * rho_tilde + rho_tilde * &ops.jz) * c(self.params.strength().sqrt());
        Fields { drift, diffusion }
    }

    /// `Δ_n̄(ρ) = 2ηM[Tr(J_z²ρ) − (J−n̄)²]ρ_n̄n̄ − u Tr(i[J_y,ρ]e_n̄e_n̄*)
    /// + 4ηM P_n̄(ρ) Tr(J_zρ) ρ_n̄n̄`.
    pub fn delta_bar(&self, target: PureTarget, rho: &CMatrix, u: f64) -> f64 {
        let ops = &self.ops;
        let n = target.index();
        let eta_m = self.params.eta_m();
        let x = rho[(n, n)].re;
        let mean = jz_mean(rho, ops);
        let second: f64 = ops
            .jz_diag
            .iter()
            .enumerate()
            .map(|(k, z)| z * z * rho[(k, k)].re)
            .sum();
        let level = ops.jz_diag[n];
        let p = level - mean;
        2.0 * eta_m * (second - level * level) * x - u * control_overlap(rho, n, ops)
            + 4.0 * eta_m * p * mean * x
    }
}

/// Feedback value on a density matrix.
pub fn feedback_value(law: &FeedbackLaw, rho: &DensityMatrix, ops: &SpinOperators) -> f64 {
    law.value(rho.matrix(), ops)
}

/// Hermitian positive semidefinite matrix with positive trace; the state
/// of the linear filter before normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct UnnormalizedState {
    m: CMatrix,
}

impl UnnormalizedState {
    pub fn new(m: CMatrix) -> Result<Self> {
        let tol = Tolerances::default();
        let tr = trace(&m).re;
        if !(tr > 0.0) {
            return Err(Error::NonPositiveTrace(tr));
        }
        if hermitian_error(&m) > tol.hermitian * tr {
            return Err(Error::InvalidState(
                "unnormalized state is not Hermitian".into(),
            ));
        }
        let min = hermitian_eigen(&m).0[0];
        if min < -tol.psd * tr {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self { m })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }
}

impl From<DensityMatrix> for UnnormalizedState {
    fn from(rho: DensityMatrix) -> Self {
        Self {
            m: rho.into_matrix(),
        }
    }
}

/// `ρ = ρ̃ / Tr(ρ̃)`.
pub fn normalize(rho_tilde: &UnnormalizedState) -> Result<DensityMatrix> {
    let tr = trace(&rho_tilde.m).re;
    if !(tr > 0.0) {
        return Err(Error::NonPositiveTrace(tr));
    }
    let mut m = rho_tilde.m.clone();
    if tr != 1.0 {
        m.unscale_mut(tr);
    }
    DensityMatrix::new(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use crate::spin::ModelParams;

    fn model(eta: f64, omega: f64) -> Model {
        Model::new(ModelParams::new(3, omega, eta, 1.0).unwrap())
    }

    fn target(n: usize) -> PureTarget {
        PureTarget::new(n, 3).unwrap()
    }

    fn mixed() -> DensityMatrix {
        DensityMatrix::diagonal(&[0.3, 0.4, 0.3]).unwrap()
    }

    #[test]
    fn edge_law_at_far_eigenstate() {
        let m = model(0.3, 0.0);
        let law = FeedbackLaw::edge(target(0), 10.0, 5.0, 10.0).unwrap();
        let u = feedback_value(&law, &DensityMatrix::eigenstate(3, 2), &m.ops);
        assert!((u - 10.0).abs() < 1e-14);
    }

    #[test]
    fn general_law_on_mixture() {
        let m = model(0.3, 0.0);
        let law = FeedbackLaw::general(target(0), 0.3, 10.0).unwrap();
        assert!((feedback_value(&law, &mixed(), &m.ops) - 0.3).abs() < 1e-14);
    }

    #[test]
    fn laws_vanish_at_their_target() {
        let m = model(0.3, 0.0);
        let laws = [
            FeedbackLaw::edge(target(0), 10.0, 5.0, 10.0).unwrap(),
            FeedbackLaw::edge(target(2), 1.0, 2.5, 3.0).unwrap(),
            FeedbackLaw::general(target(1), 0.3, 10.0).unwrap(),
            FeedbackLaw::general(target(2), 0.7, 1.5).unwrap(),
        ];
        for law in laws {
            let n = law.target().unwrap().index();
            let u = feedback_value(&law, &DensityMatrix::eigenstate(3, n), &m.ops);
            assert_eq!(u, 0.0, "{law:?}");
        }
    }

    #[test]
    fn law_constructors_enforce_invariants() {
        assert!(FeedbackLaw::edge(target(1), 1.0, 1.0, 1.0).is_err());
        assert!(FeedbackLaw::edge(target(0), 1.0, 0.5, 1.0).is_err());
        assert!(FeedbackLaw::edge(target(0), 1.0, 1.0, -1.0).is_err());
        assert!(FeedbackLaw::edge(target(0), 0.0, 1.0, 1.0).is_err());
        assert!(FeedbackLaw::general(target(1), 1.0, 0.4).is_err());
        assert!(FeedbackLaw::general(target(1), 1.0, 0.6).is_ok());
    }

    #[test]
    fn signed_power_for_fractional_exponents() {
        assert_eq!(real_power(-0.5, 10.0), 0.5f64.powi(10));
        assert_eq!(real_power(-0.5, 3.0), -0.125);
        assert!((real_power(-0.25, 1.5) + 0.125).abs() < 1e-15);
        assert!((real_power(0.25, 1.5) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn p_bar_values() {
        let m = model(0.3, 0.0);
        assert!((p_bar(target(0), &mixed(), &m.ops) - 1.0).abs() < 1e-15);
        assert_eq!(
            p_bar(target(1), &DensityMatrix::eigenstate(3, 1), &m.ops),
            0.0
        );
        assert!((p_bar(target(2), &DensityMatrix::eigenstate(3, 0), &m.ops) + 2.0).abs() < 1e-15);
    }

    #[test]
    fn variance_values() {
        let m = model(0.3, 0.0);
        assert_eq!(variance_jz(&DensityMatrix::eigenstate(3, 1), &m.ops), 0.0);
        assert!((variance_jz(&mixed(), &m.ops) - 0.6).abs() < 1e-15);
        let ends = DensityMatrix::diagonal(&[0.5, 0.0, 0.5]).unwrap();
        assert!((variance_jz(&ends, &m.ops) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn diagonal_states_have_no_drift() {
        let m = model(0.3, 2.0);
        let f = m.drift_ito(mixed().matrix(), 0.0);
        assert!(max_abs(&f) < 1e-15);
        for n in 0..3 {
            let e = DensityMatrix::eigenstate(3, n);
            assert_eq!(max_abs(&m.drift_ito(e.matrix(), 0.0)), 0.0);
            assert_eq!(max_abs(&m.diffusion(e.matrix())), 0.0);
            assert!(max_abs(&m.drift_stratonovich(e.matrix(), 0.0)) < 1e-15);
        }
    }

    #[test]
    fn diffusion_on_mixture() {
        let m = model(0.3, 0.0);
        let g = m.diffusion(mixed().matrix());
        let want = DensityMatrix::diagonal(&[0.6, 0.0, -0.6]);
        assert!(want.is_err());
        let want = CMatrix::from_fn(3, 3, |i, j| match (i, j) {
            (0, 0) => c(0.6),
            (2, 2) => c(-0.6),
            _ => c(0.0),
        });
        assert!(max_abs(&(g - want)) < 1e-15);
    }

    #[test]
    fn zakai_fields_are_linear() {
        let m = model(0.3, 1.0);
        let base = mixed().into_matrix();
        let f1 = m.zakai_fields(&base, 0.7);
        let f2 = m.zakai_fields(&(&base * c(2.0)), 0.7);
        assert!(max_abs(&(f2.drift - f1.drift * c(2.0))) < 1e-15);
        assert!(max_abs(&(&f2.diffusion - &f1.diffusion * c(2.0))) < 1e-15);
        let want = CMatrix::from_fn(3, 3, |i, j| match (i, j) {
            (0, 0) => c(0.6),
            (2, 2) => c(-0.6),
            _ => c(0.0),
        });
        assert!(max_abs(&(f1.diffusion - want)) < 1e-15);
    }

    #[test]
    fn normalize_examples() {
        let raw = |d: [f64; 3]| {
            UnnormalizedState::new(CMatrix::from_fn(3, 3, |i, j| {
                if i == j {
                    c(d[i])
                } else {
                    c(0.0)
                }
            }))
            .unwrap()
        };
        assert_eq!(
            normalize(&raw([2.0, 0.0, 0.0])).unwrap(),
            DensityMatrix::eigenstate(3, 0)
        );
        let n = normalize(&raw([0.6, 0.8, 0.6])).unwrap();
        assert!(max_abs(&(n.matrix() - mixed().matrix())) < 1e-15);
        assert_eq!(normalize(&raw([0.3, 0.4, 0.3])).unwrap(), mixed());
        assert!(UnnormalizedState::new(CMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn delta_bar_vanishes_at_target() {
        let m = model(0.3, 0.0);
        for n in 0..3 {
            let e = DensityMatrix::eigenstate(3, n);
            assert_eq!(m.delta_bar(target(n), e.matrix(), 0.0), 0.0);
        }
    }

    #[test]
    fn delta_bar_on_level_set() {
        // diag(0.25, 0.5, 0.25) has Tr(J_z ρ) = 0 = J − 1, so it lies on P_1.
        let m = model(0.3, 0.0);
        let rho = DensityMatrix::diagonal(&[0.25, 0.5, 0.25]).unwrap();
        let v = variance_jz(&rho, &m.ops);
        let want = 2.0 * 0.3 * v * 0.5;
        assert!((m.delta_bar(target(1), rho.matrix(), 0.0) - want).abs() < 1e-15);
    }
}
