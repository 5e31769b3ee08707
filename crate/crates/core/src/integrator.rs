//! Time stepping: Euler–Maruyama for the stochastic master equation, the
//! paired Zakai filter, and RK4 for the deterministic control system.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::analysis::lyapunov::{
    lyapunov_edge_populations, lyapunov_general_populations, lyapunov_qsr_populations,
};
use crate::bures::{bures_to_eigenstate_populations, bures_to_eigenstates_populations};
use crate::dynamics::{jz_mean, FeedbackLaw};
use crate::error::{Error, Result};
use crate::linalg::{c, frobenius, trace, CMatrix};
use crate::spin::{Model, PureTarget};
use crate::state::{project_to_state_space, DensityMatrix, ProjectionPolicy, Tolerances, Validity};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SdeConfig {
    pub dt: f64,
    pub t_final: f64,
    /// Keep every k-th step.
    pub record_stride: usize,
    pub seed: u64,
    pub projection: ProjectionPolicy,
    pub tolerances: Tolerances,
}

impl SdeConfig {
    pub fn new(dt: f64, t_final: f64) -> Result<Self> {
        let cfg = Self {
            dt,
            t_final,
            record_stride: 1,
            seed: 0,
            projection: ProjectionPolicy::default(),
            tolerances: Tolerances::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_projection(mut self, projection: ProjectionPolicy) -> Self {
        self.projection = projection;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "dt must be > 0, got {}",
                self.dt
            )));
        }
        if !(self.t_final >= self.dt && self.t_final.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "t_final must be at least dt, got {} < {}",
                self.t_final, self.dt
            )));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidConfig("record stride must be >= 1".into()));
        }
        if !(self.projection.drift_bound > 0.0) {
            return Err(Error::InvalidConfig("drift bound must be > 0".into()));
        }
        Ok(())
    }

    /// Number of steps, rounded up so the grid covers `[0, t_final]`.
    pub fn steps(&self) -> usize {
        let raw = self.t_final / self.dt;
        let nearest = raw.round();
        if (raw - nearest).abs() <= 1e-9 * raw.max(1.0) {
            nearest as usize
        } else {
            raw.ceil() as usize
        }
    }

    pub fn effective_horizon(&self) -> f64 {
        self.steps() as f64 * self.dt
    }

    /// Step indices that are recorded.
    fn is_recorded(&self, step: usize) -> bool {
        step.is_multiple_of(self.record_stride)
    }

    fn recorded_len(&self) -> usize {
        self.steps() / self.record_stride + 1
    }
}

/// Generator for trajectory `index` under `seed`.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Brownian increments `dW_i ~ N(0, dt)`, one per step.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRecord {
    pub dt: f64,
    pub increments: Vec<f64>,
}

impl NoiseRecord {
    pub fn generate(seed: u64, index: u64, steps: usize, dt: f64) -> Self {
        let mut rng = trajectory_rng(seed, index);
        let scale = dt.sqrt();
        let increments = (0..steps)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self { dt, increments }
    }

    /// Sums consecutive groups of `factor` increments: the same Brownian
    /// path on a coarser grid.
    pub fn coarsen(&self, factor: usize) -> Self {
        let increments = self
            .increments
            .chunks(factor)
            .map(|chunk| chunk.iter().sum())
            .collect();
        Self {
            dt: self.dt * factor as f64,
            increments,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "target", rename_all = "snake_case")]
pub enum LyapunovKind {
    Qsr,
    Edge(PureTarget),
    General(PureTarget),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "target", rename_all = "snake_case")]
pub enum DistanceKind {
    /// `d_B(ρ, Ē)` to the set of all eigenstates.
    Set,
    Target(PureTarget),
}

/// Which observables a trajectory keeps at each recorded sample. Diagonal
/// entries and the control are always kept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecordSpec {
    pub lyapunov: LyapunovKind,
    pub distance: DistanceKind,
    pub min_eigenvalue: bool,
    pub keep_states: bool,
}

impl RecordSpec {
    /// Lyapunov function and distance matching the law.
    pub fn for_law(law: &FeedbackLaw) -> Self {
        let (lyapunov, distance) = match *law {
            FeedbackLaw::Zero => (LyapunovKind::Qsr, DistanceKind::Set),
            FeedbackLaw::EdgeTarget { target, .. } => {
                (LyapunovKind::Edge(target), DistanceKind::Target(target))
            }
            FeedbackLaw::GeneralTarget { target, .. } => {
                (LyapunovKind::General(target), DistanceKind::Target(target))
            }
        };
        Self {
            lyapunov,
            distance,
            min_eigenvalue: false,
            keep_states: false,
        }
    }

    pub fn with_min_eigenvalue(mut self) -> Self {
        self.min_eigenvalue = true;
        self
    }

    pub fn with_states(mut self) -> Self {
        self.keep_states = true;
        self
    }

    /// Warns when the observables do not fit the law; never fails.
    pub fn check_against(&self, law: &FeedbackLaw) {
        let ok = match (self.lyapunov, law) {
            (LyapunovKind::Qsr, _) => true,
            (LyapunovKind::Edge(t), FeedbackLaw::EdgeTarget { target, .. }) => t == *target,
            (LyapunovKind::General(t), FeedbackLaw::GeneralTarget { target, .. }) => t == *target,
            _ => false,
        };
        if !ok {
            log::warn!(
                "Lyapunov observable {:?} does not match law {:?}",
                self.lyapunov,
                law
            );
        }
    }

    fn lyapunov(&self, p: &[f64]) -> f64 {
        match self.lyapunov {
            LyapunovKind::Qsr => lyapunov_qsr_populations(p),
            LyapunovKind::Edge(t) => lyapunov_edge_populations(p, t.index()),
            LyapunovKind::General(t) => lyapunov_general_populations(p, t.index()),
        }
    }

    fn distance(&self, p: &[f64]) -> f64 {
        match self.distance {
            DistanceKind::Set => bures_to_eigenstates_populations(p),
            DistanceKind::Target(t) => bures_to_eigenstate_populations(p, t.index()),
        }
    }
}

/// Samples of one trajectory on the grid `k·dt·record_stride`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    /// `diagonals[i][k] = ρ_kk` at `times[i]`.
    pub diagonals: Vec<Vec<f64>>,
    /// Control applied over the step starting at `times[i]`.
    pub control: Vec<f64>,
    pub lyapunov: Vec<f64>,
    pub distance: Vec<f64>,
    pub min_eigenvalue: Option<Vec<f64>>,
    #[serde(skip)]
    pub states: Option<Vec<DensityMatrix>>,
    /// Worst invariant deviation over the recorded samples.
    pub validity: Validity,
}

impl TrajectoryRecord {
    fn with_capacity(spec: &RecordSpec, len: usize) -> Self {
        Self {
            times: Vec::with_capacity(len),
            diagonals: Vec::with_capacity(len),
            control: Vec::with_capacity(len),
            lyapunov: Vec::with_capacity(len),
            distance: Vec::with_capacity(len),
            min_eigenvalue: spec.min_eigenvalue.then(|| Vec::with_capacity(len)),
            states: spec.keep_states.then(|| Vec::with_capacity(len)),
            validity: Validity::perfect(),
        }
    }

    fn push(
        &mut self,
        t: f64,
        rho: &DensityMatrix,
        u: f64,
        spec: &RecordSpec,
        tol: &Tolerances,
    ) -> Result<()> {
        let v = rho.validity();
        if !v.within(tol) {
            return Err(
                Error::InvalidState(format!("recorded state violates tolerances: {v:?}"))
                    .at_time(t),
            );
        }
        self.validity = self.validity.merge(&v);
        let p = rho.populations();
        self.lyapunov.push(spec.lyapunov(&p));
        self.distance.push(spec.distance(&p));
        if let Some(m) = self.min_eigenvalue.as_mut() {
            m.push(v.min_eigenvalue);
        }
        if let Some(s) = self.states.as_mut() {
            s.push(rho.clone());
        }
        self.diagonals.push(p);
        self.control.push(u);
        self.times.push(t);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_populations(&self) -> &[f64] {
        self.diagonals.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// One Euler–Maruyama step `ρ + F(ρ,u)dt + √η G(ρ)dW`, projected back onto
/// the state space.
pub fn sme_step(
    rho: &DensityMatrix,
    u: f64,
    dw: f64,
    dt: f64,
    model: &Model,
    policy: &ProjectionPolicy,
    tol: &Tolerances,
) -> Result<DensityMatrix> {
    let fields = model.fields(rho.matrix(), u);
    let next =
        rho.matrix() + fields.drift * c(dt) + fields.diffusion * c(model.params.eta().sqrt() * dw);
    project_to_state_space(&next, policy, tol)
}

fn check_dim(rho: &DensityMatrix, model: &Model) -> Result<()> {
    if rho.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: rho.dim(),
        });
    }
    Ok(())
}

/// Simulates trajectory `index` with noise drawn from
/// `trajectory_rng(cfg.seed, index)`.
pub fn simulate_sme(
    rho0: &DensityMatrix,
    law: &FeedbackLaw,
    cfg: &SdeConfig,
    model: &Model,
    spec: &RecordSpec,
    index: u64,
) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    let mut rng = trajectory_rng(cfg.seed, index);
    let scale = cfg.dt.sqrt();
    run_sme(rho0, law, cfg, model, spec, || {
        scale * rng.sample::<f64, _>(StandardNormal)
    })
}

/// Same as [`simulate_sme`] but driven by a given noise record.
pub fn simulate_sme_with_noise(
    rho0: &DensityMatrix,
    law: &FeedbackLaw,
    cfg: &SdeConfig,
    model: &Model,
    spec: &RecordSpec,
    noise: &NoiseRecord,
) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    check_noise(cfg, noise)?;
    let mut it = noise.increments.iter().copied();
    run_sme(rho0, law, cfg, model, spec, || it.next().unwrap_or(0.0))
}

fn check_noise(cfg: &SdeConfig, noise: &NoiseRecord) -> Result<()> {
    if noise.increments.len() < cfg.steps() {
        return Err(Error::InvalidConfig(format!(
            "noise record has {} increments, need {}",
            noise.increments.len(),
            cfg.steps()
        )));
    }
    Ok(())
}

fn run_sme(
    rho0: &DensityMatrix,
    law: &FeedbackLaw,
    cfg: &SdeConfig,
    model: &Model,
    spec: &RecordSpec,
    mut next_dw: impl FnMut() -> f64,
) -> Result<TrajectoryRecord> {
    check_dim(rho0, model)?;
    let steps = cfg.steps();
    let mut record = TrajectoryRecord::with_capacity(spec, cfg.recorded_len());
    let mut rho = rho0.clone();
    for step in 0..=steps {
        let t = step as f64 * cfg.dt;
        let u = law.value(rho.matrix(), &model.ops);
        if cfg.is_recorded(step) {
            record.push(t, &rho, u, spec, &cfg.tolerances)?;
        }
        if step == steps {
            break;
        }
        let dw = next_dw();
        rho = sme_step(&rho, u, dw, cfg.dt, model, &cfg.projection, &cfg.tolerances)
            .map_err(|e| e.at_time(t))?;
    }
    Ok(record)
}

#[derive(Debug, Clone)]
pub struct ZakaiPair {
    pub sme: TrajectoryRecord,
    pub zakai: TrajectoryRecord,
    /// `max_t ‖ρ̃_t/Tr(ρ̃_t) − ρ_t‖_F` over every step.
    pub max_gap: f64,
}

/// Runs the SME and the Zakai filter on the same noise. The filter sees
/// `dy = dW + 2√(ηM) Tr(J_z ρ_t) dt` and the control computed from the SME
/// state; it is renormalized to unit trace after every step.
pub fn simulate_zakai_pair(
    rho0: &DensityMatrix,
    law: &FeedbackLaw,
    cfg: &SdeConfig,
    model: &Model,
    spec: &RecordSpec,
    index: u64,
) -> Result<ZakaiPair> {
    cfg.validate()?;
    let noise = NoiseRecord::generate(cfg.seed, index, cfg.steps(), cfg.dt);
    simulate_zakai_pair_with_noise(rho0, law, cfg, model, spec, &noise)
}

pub fn simulate_zakai_pair_with_noise(
    rho0: &DensityMatrix,
    law: &FeedbackLaw,
    cfg: &SdeConfig,
    model: &Model,
    spec: &RecordSpec,
    noise: &NoiseRecord,
) -> Result<ZakaiPair> {
    cfg.validate()?;
    check_dim(rho0, model)?;
    check_noise(cfg, noise)?;
    let steps = cfg.steps();
    let sqrt_eta = model.params.eta().sqrt();
    let gain = 2.0 * model.params.eta_m().sqrt();
    let mut sme = TrajectoryRecord::with_capacity(spec, cfg.recorded_len());
    let mut zakai = TrajectoryRecord::with_capacity(spec, cfg.recorded_len());
    let mut rho = rho0.clone();
    let mut filt = rho0.clone();
    let mut max_gap = 0.0f64;
    for step in 0..=steps {
        let t = step as f64 * cfg.dt;
        let u = law.value(rho.matrix(), &model.ops);
        max_gap = max_gap.max(frobenius(&(filt.matrix() - rho.matrix())));
        if cfg.is_recorded(step) {
            sme.push(t, &rho, u, spec, &cfg.tolerances)?;
            zakai.push(t, &filt, u, spec, &cfg.tolerances)?;
        }
        if step == steps {
            break;
        }
        let dw = noise.increments[step];
        let dy = dw + gain * jz_mean(rho.matrix(), &model.ops) * cfg.dt;
        let zf = model.zakai_fields(filt.matrix(), u);
        let raw: CMatrix = filt.matrix() + zf.drift * c(cfg.dt) + zf.diffusion * c(sqrt_eta * dy);
        let tr = trace(&raw).re;
        if !(tr > 0.0) {
            return Err(Error::NonPositiveTrace(tr).at_time(t));
        }
        filt = project_to_state_space(&raw, &cfg.projection, &cfg.tolerances)
            .map_err(|e| e.at_time(t))?;
        rho = sme_step(&rho, u, dw, cfg.dt, model, &cfg.projection, &cfg.tolerances)
            .map_err(|e| e.at_time(t))?;
    }
    Ok(ZakaiPair {
        sme,
        zakai,
        max_gap,
    })
}

/// Piecewise-constant open-loop control: `values[i]` on
/// `[breakpoints[i-1], breakpoints[i])`, with `values.len() = breakpoints.len() + 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiecewiseConstant {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseConstant {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidConfig(format!(
                "{} breakpoints need {} values, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                values.len()
            )));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidConfig(
                "breakpoints must be increasing".into(),
            ));
        }
        if values.iter().chain(&breakpoints).any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("non-finite control".into()));
        }
        Ok(Self {
            breakpoints,
            values,
        })
    }

    pub fn constant(v: f64) -> Self {
        Self {
            breakpoints: Vec::new(),
            values: vec![v],
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        let i = self.breakpoints.partition_point(|&b| b <= t);
        self.values[i]
    }
}

/// RK4 for `ρ̇ = F̂(ρ, u(ρ)) + √η G(ρ) v(t)`, projected after each step.
pub fn simulate_ode(
    rho0: &DensityMatrix,
    law: &FeedbackLaw,
    v: &PiecewiseConstant,
    cfg: &SdeConfig,
    model: &Model,
    spec: &RecordSpec,
) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    check_dim(rho0, model)?;
    let steps = cfg.steps();
    let dt = cfg.dt;
    let sqrt_eta = model.params.eta().sqrt();
    let rhs = |m: &CMatrix, t: f64| -> CMatrix {
        let u = law.value(m, &model.ops);
        model.drift_stratonovich(m, u) + model.diffusion(m) * c(sqrt_eta * v.value(t))
    };
    let mut record = TrajectoryRecord::with_capacity(spec, cfg.recorded_len());
    let mut rho = rho0.clone();
    for step in 0..=steps {
        let t = step as f64 * dt;
        if cfg.is_recorded(step) {
            let u = law.value(rho.matrix(), &model.ops);
            record.push(t, &rho, u, spec, &cfg.tolerances)?;
        }
        if step == steps {
            break;
        }
        let y = rho.matrix();
        let k1 = rhs(y, t);
        let k2 = rhs(&(y + &k1 * c(dt / 2.0)), t + dt / 2.0);
        let k3 = rhs(&(y + &k2 * c(dt / 2.0)), t + dt / 2.0);
        let k4 = rhs(&(y + &k3 * c(dt)), t + dt);
        let next = y + (k1 + (k2 + k3) * c(2.0) + k4) * c(dt / 6.0);
        rho = project_to_state_space(&next, &cfg.projection, &cfg.tolerances)
            .map_err(|e| e.at_time(t))?;
    }
    Ok(record)
}
