//! Independent cross-checks of the integrators and closed forms: the Zakai
//! filter under shared noise, the Itô–Stratonovich correction by finite
//! differences, and Monte Carlo generator estimates.

use serde::Serialize;

use crate::analysis::dynkin::{dynkin_estimate, qsr_generator_bound_check, DynkinConfig};
use crate::analysis::lyapunov::{
    generator_edge, generator_general, lyapunov_edge, lyapunov_general,
};
use crate::dynamics::FeedbackLaw;
use crate::error::{Error, Result};
use crate::integrator::{
    simulate_zakai_pair_with_noise, trajectory_rng, NoiseRecord, RecordSpec, SdeConfig,
};
use crate::linalg::{c, max_abs};
use crate::sampling::random_state;
use crate::spin::Model;
use crate::state::DensityMatrix;
use rand::Rng;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZakaiOracleConfig {
    /// Finest step; the check also runs at 2·dt and 4·dt on the same paths.
    pub dt: f64,
    pub t_final: f64,
    pub paths: usize,
    pub seed: u64,
    pub law: FeedbackLaw,
    pub initial: DensityMatrix,
    pub tolerance: f64,
}

impl ZakaiOracleConfig {
    pub fn new(initial: DensityMatrix) -> Self {
        Self {
            dt: 1e-4,
            t_final: 1.0,
            paths: 4,
            seed: 0,
            law: FeedbackLaw::Zero,
            initial,
            tolerance: 5e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZakaiOracleReport {
    /// `(dt, max gap over paths)`, coarsest first.
    pub gaps: Vec<(f64, f64)>,
    pub tolerance: f64,
}

impl ZakaiOracleReport {
    pub fn finest_gap(&self) -> f64 {
        self.gaps.last().map(|g| g.1).unwrap_or(f64::NAN)
    }

    pub fn decreasing(&self) -> bool {
        self.gaps.windows(2).all(|w| w[1].1 < w[0].1)
    }

    pub fn passed(&self) -> bool {
        self.finest_gap() <= self.tolerance && self.decreasing()
    }
}

pub fn zakai_oracle(model: &Model, cfg: &ZakaiOracleConfig) -> Result<ZakaiOracleReport> {
    let fine = SdeConfig::new(cfg.dt, cfg.t_final)?;
    let spec = RecordSpec::for_law(&cfg.law);
    let factors = [4usize, 2, 1];
    let mut worst = [0.0f64; 3];
    for path in 0..cfg.paths as u64 {
        let noise = NoiseRecord::generate(cfg.seed, path, fine.steps(), cfg.dt);
        for (slot, &f) in factors.iter().enumerate() {
            let coarse_noise = noise.coarsen(f);
            let sde = SdeConfig {
                dt: cfg.dt * f as f64,
                t_final: cfg.dt * f as f64 * coarse_noise.increments.len() as f64,
                record_stride: coarse_noise.increments.len(),
                ..fine
            };
            let pair = simulate_zakai_pair_with_noise(
                &cfg.initial,
                &cfg.law,
                &sde,
                model,
                &spec,
                &coarse_noise,
            )?;
            worst[slot] = worst[slot].max(pair.max_gap);
        }
    }
    Ok(ZakaiOracleReport {
        gaps: factors
            .iter()
            .zip(worst)
            .map(|(&f, g)| (cfg.dt * f as f64, g))
            .collect(),
        tolerance: cfg.tolerance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StratOracleReport {
    pub states: usize,
    pub max_error: f64,
    pub tolerance: f64,
}

impl StratOracleReport {
    pub fn passed(&self) -> bool {
        self.max_error <= self.tolerance
    }
}

/// Checks `F̂(ρ) = F(ρ) − ½√η·DG(ρ)[√η G(ρ)]` with a central difference of
/// step `h` for the directional derivative, at random states and controls.
pub fn stratonovich_oracle(model: &Model, states: usize, h: f64, seed: u64) -> StratOracleReport {
    let mut rng = trajectory_rng(seed, 0);
    let eta = model.params.eta();
    let mut max_error = 0.0f64;
    for _ in 0..states {
        let rho = random_state(model.dim(), &mut rng);
        let u: f64 = rng.random_range(-1.0..1.0);
        let m = rho.matrix();
        let g = model.diffusion(m) * c(eta.sqrt());
        let dg =
            (model.diffusion(&(m + &g * c(h))) - model.diffusion(&(m - &g * c(h)))) * c(0.5 / h);
        let want = model.drift_ito(m, u) - dg * c(0.5 * eta.sqrt());
        max_error = max_error.max(max_abs(&(model.drift_stratonovich(m, u) - want)));
    }
    StratOracleReport {
        states,
        max_error,
        tolerance: 1e-6,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneratorCase {
    pub closed_form: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub tolerance: f64,
    pub agrees: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QsrCase {
    pub lhs: f64,
    pub std_error: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorOracleReport {
    pub edge: Vec<GeneratorCase>,
    pub general: Vec<GeneratorCase>,
    pub qsr: Vec<QsrCase>,
}

impl GeneratorOracleReport {
    pub fn passed(&self) -> bool {
        self.edge.iter().all(|c| c.agrees)
            && self.general.iter().all(|c| c.agrees)
            && self.qsr.iter().all(|c| c.holds)
    }
}

pub const GENERATOR_REL_TOL: f64 = 0.1;

/// Compares the closed-form generators of the edge and general Lyapunov
/// functions with Monte Carlo estimates at `states` random interior
/// states each, and checks the reduction bound at the general-law states.
pub fn generator_oracle(
    model: &Model,
    edge: &FeedbackLaw,
    general: &FeedbackLaw,
    states: usize,
    dynkin: &DynkinConfig,
) -> Result<GeneratorOracleReport> {
    let (Some(edge_target), Some(general_target)) = (edge.target(), general.target()) else {
        return Err(Error::InvalidLaw(
            "generator oracle needs targeted laws".into(),
        ));
    };
    let mut rng = trajectory_rng(dynkin.seed, u64::MAX);
    let mut stream = 0u64;
    let mut next_stream = || {
        stream += 1;
        stream
    };
    let case = |closed: f64, est: crate::analysis::DynkinEstimate| GeneratorCase {
        closed_form: closed,
        estimate: est.mean,
        std_error: est.std_error,
        tolerance: est.tolerance(closed, GENERATOR_REL_TOL),
        agrees: est.agrees_with(closed, GENERATOR_REL_TOL),
    };
    let mut report = GeneratorOracleReport {
        edge: Vec::with_capacity(states),
        general: Vec::with_capacity(states),
        qsr: Vec::with_capacity(states),
    };
    for _ in 0..states {
        let rho = random_state(model.dim(), &mut rng);
        let closed = generator_edge(edge_target, &rho, edge, model)?;
        let est = dynkin_estimate(
            &rho,
            edge,
            model,
            |r| lyapunov_edge(edge_target, r),
            dynkin,
            next_stream(),
        )?;
        report.edge.push(case(closed, est));
    }
    for _ in 0..states {
        let rho = random_state(model.dim(), &mut rng);
        let closed = generator_general(general_target, &rho, general, model)?;
        let est = dynkin_estimate(
            &rho,
            general,
            model,
            |r| lyapunov_general(general_target, r),
            dynkin,
            next_stream(),
        )?;
        report.general.push(case(closed, est));
        let q = qsr_generator_bound_check(&rho, model, dynkin, next_stream())?;
        report.qsr.push(QsrCase {
            lhs: q.lhs.mean,
            std_error: q.lhs.std_error,
            rhs: q.rhs,
            holds: q.holds(),
        });
    }
    Ok(report)
}
