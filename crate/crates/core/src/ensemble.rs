//! Parallel Monte Carlo ensembles and the figure presets.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::exponent::{classify_populations, estimate_exponent, ExponentEstimate};
use crate::dynamics::FeedbackLaw;
use crate::error::{Error, Result};
use crate::integrator::{simulate_sme, RecordSpec, SdeConfig, TrajectoryRecord};
use crate::spin::{Model, ModelParams, PureTarget};
use crate::state::{DensityMatrix, Validity};

/// Minimum eigenvalue that counts as having left the boundary.
pub const BOUNDARY_EXIT: f64 = 1e-6;

/// Trajectories simulated per parallel batch before folding into the
/// statistics.
const BATCH: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleConfig {
    pub n_traj: usize,
    /// Trajectory `i` uses the random stream `(base_seed, i)`.
    pub base_seed: u64,
    /// Worker threads; 0 picks the number of cores.
    pub workers: usize,
    pub sde: SdeConfig,
    pub model: ModelParams,
    pub law: FeedbackLaw,
    pub initial: DensityMatrix,
    pub observables: RecordSpec,
    /// Convergence classification threshold on the final populations.
    pub threshold: f64,
    /// Start of the exponent fit window as a fraction of the horizon.
    pub window_fraction: f64,
}

impl EnsembleConfig {
    pub fn new(
        model: ModelParams,
        law: FeedbackLaw,
        initial: DensityMatrix,
        sde: SdeConfig,
    ) -> Self {
        Self {
            n_traj: 1,
            base_seed: 0,
            workers: 0,
            sde,
            model,
            law,
            initial,
            observables: RecordSpec::for_law(&law),
            threshold: 0.99,
            window_fraction: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_traj == 0 {
            return Err(Error::InvalidConfig("n_traj must be >= 1".into()));
        }
        self.sde.validate()?;
        if self.initial.dim() != self.model.levels() {
            return Err(Error::DimensionMismatch {
                expected: self.model.levels(),
                found: self.initial.dim(),
            });
        }
        if let Some(t) = self.law.target() {
            if t.levels() != self.model.levels() {
                return Err(Error::DimensionMismatch {
                    expected: self.model.levels(),
                    found: t.levels(),
                });
            }
        }
        if !(self.threshold > 0.5 && self.threshold < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "threshold must lie in (0.5, 1), got {}",
                self.threshold
            )));
        }
        if !(self.window_fraction > 0.0 && self.window_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "window fraction must lie in (0, 1), got {}",
                self.window_fraction
            )));
        }
        self.observables.check_against(&self.law);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Fig1Qsr,
    Fig2Edge,
    Fig3GeneralInterior,
    Fig4GeneralBoundary,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::Fig1Qsr,
        Preset::Fig2Edge,
        Preset::Fig3GeneralInterior,
        Preset::Fig4GeneralBoundary,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1Qsr => "fig1_qsr",
            Preset::Fig2Edge => "fig2_edge",
            Preset::Fig3GeneralInterior => "fig3_general_interior",
            Preset::Fig4GeneralBoundary => "fig4_general_boundary",
        }
    }

    /// Spin-1 system with `ω = 0`, `η = 0.3`, `M = 1`, ten trajectories,
    /// `dt = 1e-3`, `T = 10`, every tenth step recorded.
    pub fn config(self) -> EnsembleConfig {
        let model = ModelParams::new(3, 0.0, 0.3, 1.0).expect("preset parameters are valid");
        let target = |n| PureTarget::new(n, 3).expect("preset target is valid");
        let mixed = DensityMatrix::diagonal(&[0.3, 0.4, 0.3]).expect("preset state is valid");
        let (law, initial) = match self {
            Preset::Fig1Qsr => (FeedbackLaw::Zero, mixed),
            Preset::Fig2Edge => (
                FeedbackLaw::edge(target(0), 10.0, 5.0, 10.0).expect("preset law is valid"),
                DensityMatrix::eigenstate(3, 2),
            ),
            Preset::Fig3GeneralInterior => (
                FeedbackLaw::general(target(1), 0.3, 10.0).expect("preset law is valid"),
                mixed,
            ),
            Preset::Fig4GeneralBoundary => (
                FeedbackLaw::general(target(1), 0.3, 10.0).expect("preset law is valid"),
                DensityMatrix::eigenstate(3, 2),
            ),
        };
        let sde = SdeConfig::new(1e-3, 10.0)
            .expect("preset step is valid")
            .with_stride(10);
        let mut cfg = EnsembleConfig::new(model, law, initial, sde);
        cfg.n_traj = 10;
        if matches!(
            self,
            Preset::Fig3GeneralInterior | Preset::Fig4GeneralBoundary
        ) {
            cfg.observables = cfg.observables.with_min_eigenvalue();
        }
        cfg
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

pub fn preset(name: &str) -> Result<EnsembleConfig> {
    Ok(name.parse::<Preset>()?.config())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectorySummary {
    pub index: u64,
    /// Eigenstate reached at the horizon, if any.
    pub class: Option<usize>,
    pub exponent: Option<ExponentEstimate>,
    /// Set when the distance hit the floor before the fit window.
    pub collapse_time: Option<f64>,
    pub final_populations: Vec<f64>,
    /// First recorded time with minimum eigenvalue above [`BOUNDARY_EXIT`].
    pub boundary_exit_time: Option<f64>,
    pub validity: Validity,
}

/// Mean and standard error, one entry per recorded time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleStats {
    pub n_traj: usize,
    pub effective_horizon: f64,
    pub times: Vec<f64>,
    pub lyapunov: Series,
    pub distance: Series,
    /// `populations[k]` is the series of `ρ_kk`.
    pub populations: Vec<Series>,
    pub control: Series,
    /// Fraction of trajectories ending near each eigenstate.
    pub frequencies: Vec<f64>,
    pub undecided: f64,
    pub trajectories: Vec<TrajectorySummary>,
    pub worst_validity: Validity,
}

impl EnsembleStats {
    /// Fitted slopes, skipping trajectories that collapsed early.
    pub fn slopes(&self) -> Vec<f64> {
        self.trajectories
            .iter()
            .filter_map(|t| t.exponent.map(|e| e.slope))
            .collect()
    }

    pub fn median_slope(&self) -> Option<f64> {
        let mut s = self.slopes();
        if s.is_empty() {
            return None;
        }
        s.sort_by(f64::total_cmp);
        let mid = s.len() / 2;
        Some(if s.len() % 2 == 1 {
            s[mid]
        } else {
            0.5 * (s[mid - 1] + s[mid])
        })
    }
}

/// Welford accumulator over trajectories, vectorized over time.
struct Moments {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn new(len: usize) -> Self {
        Self {
            n: 0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
        }
    }

    fn push(&mut self, xs: impl Iterator<Item = f64>) {
        self.n += 1;
        let n = self.n as f64;
        for ((x, mean), m2) in xs.zip(&mut self.mean).zip(&mut self.m2) {
            let d = x - *mean;
            *mean += d / n;
            *m2 += d * (x - *mean);
        }
    }

    fn finish(self) -> Series {
        let n = self.n as f64;
        let se = self
            .m2
            .iter()
            .map(|m2| {
                if self.n > 1 {
                    (m2 / (n - 1.0) / n).sqrt()
                } else {
                    0.0
                }
            })
            .collect();
        Series {
            mean: self.mean,
            se,
        }
    }
}

struct Accumulator {
    times: Vec<f64>,
    lyapunov: Moments,
    distance: Moments,
    populations: Vec<Moments>,
    control: Moments,
    counts: Vec<usize>,
    undecided: usize,
    trajectories: Vec<TrajectorySummary>,
    worst: Validity,
}

impl Accumulator {
    fn new(dim: usize) -> Self {
        Self {
            times: Vec::new(),
            lyapunov: Moments::new(0),
            distance: Moments::new(0),
            populations: (0..dim).map(|_| Moments::new(0)).collect(),
            control: Moments::new(0),
            counts: vec![0; dim],
            undecided: 0,
            trajectories: Vec::new(),
            worst: Validity::perfect(),
        }
    }

    fn add(&mut self, index: u64, rec: &TrajectoryRecord, cfg: &EnsembleConfig) {
        if self.times.is_empty() {
            let len = rec.len();
            self.times = rec.times.clone();
            self.lyapunov = Moments::new(len);
            self.distance = Moments::new(len);
            self.control = Moments::new(len);
            for p in &mut self.populations {
                *p = Moments::new(len);
            }
        }
        self.lyapunov.push(rec.lyapunov.iter().copied());
        self.distance.push(rec.distance.iter().copied());
        self.control.push(rec.control.iter().copied());
        for (k, p) in self.populations.iter_mut().enumerate() {
            p.push(rec.diagonals.iter().map(|d| d[k]));
        }
        let class = classify_populations(rec.final_populations(), cfg.threshold);
        match class {
            Some(k) => self.counts[k] += 1,
            None => self.undecided += 1,
        }
        let (exponent, collapse_time) = match estimate_exponent(rec, cfg.window_fraction) {
            Ok(e) => (Some(e), None),
            Err(Error::WindowEmpty { collapse_time }) => (None, Some(collapse_time)),
            Err(_) => (None, None),
        };
        let boundary_exit_time = rec.min_eigenvalue.as_ref().and_then(|m| {
            m.iter()
                .position(|&x| x > BOUNDARY_EXIT)
                .map(|i| rec.times[i])
        });
        self.worst = self.worst.merge(&rec.validity);
        self.trajectories.push(TrajectorySummary {
            index,
            class,
            exponent,
            collapse_time,
            final_populations: rec.final_populations().to_vec(),
            boundary_exit_time,
            validity: rec.validity,
        });
    }

    fn finish(self, cfg: &EnsembleConfig) -> EnsembleStats {
        let n = cfg.n_traj as f64;
        EnsembleStats {
            n_traj: cfg.n_traj,
            effective_horizon: cfg.sde.effective_horizon(),
            times: self.times,
            lyapunov: self.lyapunov.finish(),
            distance: self.distance.finish(),
            populations: self.populations.into_iter().map(Moments::finish).collect(),
            control: self.control.finish(),
            frequencies: self.counts.iter().map(|&c| c as f64 / n).collect(),
            undecided: self.undecided as f64 / n,
            trajectories: self.trajectories,
            worst_validity: self.worst,
        }
    }
}

pub fn run_ensemble(cfg: &EnsembleConfig) -> Result<EnsembleStats> {
    Ok(run(cfg, false)?.0)
}

/// As [`run_ensemble`], also returning every trajectory record in index
/// order.
pub fn run_ensemble_with_records(
    cfg: &EnsembleConfig,
) -> Result<(EnsembleStats, Vec<TrajectoryRecord>)> {
    run(cfg, true)
}

fn run(cfg: &EnsembleConfig, keep: bool) -> Result<(EnsembleStats, Vec<TrajectoryRecord>)> {
    cfg.validate()?;
    let model = Model::new(cfg.model);
    let sde = cfg.sde.with_seed(cfg.base_seed);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let mut acc = Accumulator::new(cfg.model.levels());
    let mut kept = Vec::new();
    let total = cfg.n_traj as u64;
    let mut start = 0u64;
    while start < total {
        let end = (start + BATCH as u64).min(total);
        let batch: Vec<Result<TrajectoryRecord>> = pool.install(|| {
            (start..end)
                .into_par_iter()
                .map(|i| simulate_sme(&cfg.initial, &cfg.law, &sde, &model, &cfg.observables, i))
                .collect()
        });
        for (offset, rec) in batch.into_iter().enumerate() {
            let index = start + offset as u64;
            let rec = rec.map_err(|e| Error::Trajectory {
                index,
                source: Box::new(e),
            })?;
            acc.add(index, &rec, cfg);
            if keep {
                kept.push(rec);
            }
        }
        log::debug!("ensemble: {end}/{total} trajectories");
        start = end;
    }
    Ok((acc.finish(cfg), kept))
}
