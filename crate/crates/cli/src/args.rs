use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use spinstab_core::integrator::RecordSpec;
use spinstab_core::{
    preset, DensityMatrix, EnsembleConfig, Error, FeedbackLaw, ModelParams, PureTarget, Result,
    SdeConfig,
};

/// Quantum trajectories of a continuously measured spin under feedback.
///
/// Units: time t, dt and the horizon in model time; ω and M in 1/time.
#[derive(Debug, Parser)]
#[command(name = "spinstab", version, allow_negative_numbers = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate an ensemble and write CSV + metadata.
    #[command(allow_negative_numbers = true)]
    Run(RunArgs),
    /// Check the stabilization hypotheses on sampled states.
    #[command(allow_negative_numbers = true)]
    Audit(AuditArgs),
    /// Run an oracle suite against independent reference computations.
    #[command(allow_negative_numbers = true)]
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LawKind {
    Zero,
    Edge,
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleSuite {
    Zakai,
    Generator,
    Strat,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Start from a named parameter set (fig1_qsr, fig2_edge,
    /// fig3_general_interior, fig4_general_boundary); other flags override it
    #[arg(long)]
    pub preset: Option<String>,
    /// Number of levels N = 2J+1 [default: 3]
    #[arg(long)]
    pub levels: Option<usize>,
    /// Free Hamiltonian frequency ω, 1/time [default: 0]
    #[arg(long)]
    pub omega: Option<f64>,
    /// Detector efficiency η in (0, 1] [default: 0.3]
    #[arg(long)]
    pub eta: Option<f64>,
    /// Measurement strength M, 1/time [default: 1]
    #[arg(long)]
    pub bigm: Option<f64>,
    /// Target eigenstate index n̄ in 0..N
    #[arg(long)]
    pub target: Option<usize>,
    /// Feedback law [default: zero]
    #[arg(long, value_enum)]
    pub law: Option<LawKind>,
    /// Feedback gain α > 0, 1/time [default: 10 edge, 0.3 general]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Feedback exponent β > 1/2, dimensionless [default: 5 edge, 10 general]
    #[arg(long)]
    pub beta: Option<f64>,
    /// Edge-law coherence gain γ >= 0, 1/time [default: 10]
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Initial state: diag:a,b,... | pure:n | file:<path> (JSON rows of
    /// [re, im] pairs) [default: uniform mixture]
    #[arg(long)]
    pub init: Option<String>,
}

impl ModelArgs {
    fn preset_config(&self) -> Result<Option<EnsembleConfig>> {
        self.preset.as_deref().map(preset).transpose()
    }

    fn has_model_flags(&self) -> bool {
        self.levels.is_some() || self.omega.is_some() || self.eta.is_some() || self.bigm.is_some()
    }

    fn has_law_flags(&self) -> bool {
        self.law.is_some()
            || self.target.is_some()
            || self.alpha.is_some()
            || self.beta.is_some()
            || self.gamma.is_some()
    }

    pub fn params(&self) -> Result<ModelParams> {
        let base = match self.preset_config()? {
            Some(cfg) => cfg.model,
            None => ModelParams::new(3, 0.0, 0.3, 1.0)?,
        };
        ModelParams::new(
            self.levels.unwrap_or(base.levels()),
            self.omega.unwrap_or(base.omega()),
            self.eta.unwrap_or(base.eta()),
            self.bigm.unwrap_or(base.strength()),
        )
    }

    pub fn law(&self, params: &ModelParams) -> Result<FeedbackLaw> {
        let base = self.preset_config()?.map(|c| c.law);
        let (kind, target, alpha, beta, gamma) = match base {
            Some(FeedbackLaw::EdgeTarget {
                target,
                alpha,
                beta,
                gamma,
            }) => (LawKind::Edge, Some(target.index()), alpha, beta, gamma),
            Some(FeedbackLaw::GeneralTarget {
                target,
                alpha,
                beta,
            }) => (LawKind::General, Some(target.index()), alpha, beta, 10.0),
            _ => (LawKind::Zero, None, f64::NAN, f64::NAN, 10.0),
        };
        // Switching law family drops the inherited gains.
        let (kind, alpha, beta, gamma) = match self.law {
            Some(k) if k != kind => (k, f64::NAN, f64::NAN, 10.0),
            _ => (kind, alpha, beta, gamma),
        };
        let target = self.target.or(target);
        let levels = params.levels();
        let pick = |flag: Option<f64>, inherited: f64, default: f64| {
            flag.unwrap_or(if inherited.is_nan() {
                default
            } else {
                inherited
            })
        };
        match kind {
            LawKind::Zero => Ok(FeedbackLaw::Zero),
            LawKind::Edge => FeedbackLaw::edge(
                PureTarget::new(target.unwrap_or(0), levels)?,
                pick(self.alpha, alpha, 10.0),
                pick(self.beta, beta, 5.0),
                pick(self.gamma, gamma, 10.0),
            ),
            LawKind::General => {
                let target =
                    target.ok_or_else(|| Error::InvalidLaw("general law needs --target".into()))?;
                FeedbackLaw::general(
                    PureTarget::new(target, levels)?,
                    pick(self.alpha, alpha, 0.3),
                    pick(self.beta, beta, 10.0),
                )
            }
        }
    }

    pub fn resolve(&self) -> Result<(ModelParams, FeedbackLaw)> {
        let params = self.params()?;
        let law = self.law(&params)?;
        Ok((params, law))
    }

    pub fn initial_state(&self, params: &ModelParams) -> Result<DensityMatrix> {
        match (&self.init, self.preset_config()?) {
            (Some(spec), _) => parse_init(spec, params.levels()),
            (None, Some(cfg)) => Ok(cfg.initial),
            (None, None) => {
                let n = params.levels();
                DensityMatrix::diagonal(&vec![1.0 / n as f64; n])
            }
        }
    }

    /// Initial state for the zakai suite: `--init`, else the preset, else
    /// `diag(0.3, 0.4, 0.3)` for three levels and the uniform mixture
    /// otherwise.
    pub fn zakai_initial(&self, params: &ModelParams) -> Result<DensityMatrix> {
        if self.init.is_none() && self.preset.is_none() && params.levels() == 3 {
            return DensityMatrix::diagonal(&[0.3, 0.4, 0.3]);
        }
        self.initial_state(params)
    }

    /// Laws for the generator oracle: the edge law at `e_0` and the general
    /// law at `--target` (default 1), with the figure gains.
    pub fn oracle_laws(&self, params: &ModelParams) -> Result<(FeedbackLaw, FeedbackLaw)> {
        let levels = params.levels();
        let edge = FeedbackLaw::edge(PureTarget::new(0, levels)?, 10.0, 5.0, 10.0)?;
        let general = FeedbackLaw::general(
            PureTarget::new(self.target.unwrap_or(1.min(levels - 1)), levels)?,
            0.3,
            10.0,
        )?;
        Ok((edge, general))
    }
}

/// `diag:a,b,...`, `pure:n` or `file:<path>`.
pub fn parse_init(spec: &str, levels: usize) -> Result<DensityMatrix> {
    let bad = |msg: String| Error::InvalidState(format!("--init {spec}: {msg}"));
    let state = if let Some(list) = spec.strip_prefix("diag:") {
        let values = list
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| bad(e.to_string())))
            .collect::<Result<Vec<f64>>>()?;
        if values.iter().any(|&x| x < 0.0) {
            return Err(bad("negative population".into()));
        }
        DensityMatrix::diagonal(&values).map_err(|e| with_context(spec, e))?
    } else if let Some(n) = spec.strip_prefix("pure:") {
        let n: usize = n
            .trim()
            .parse()
            .map_err(|e: std::num::ParseIntError| bad(e.to_string()))?;
        if n >= levels {
            return Err(bad(format!("index out of range for {levels} levels")));
        }
        DensityMatrix::eigenstate(levels, n)
    } else if let Some(path) = spec.strip_prefix("file:") {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: PathBuf::from(path),
            source,
        })?;
        DensityMatrix::from_json_rows(&text).map_err(|e| with_context(spec, e))?
    } else {
        return Err(bad("expected diag:, pure: or file:".into()));
    };
    if state.dim() != levels {
        return Err(Error::DimensionMismatch {
            expected: levels,
            found: state.dim(),
        });
    }
    Ok(state)
}

fn with_context(spec: &str, e: Error) -> Error {
    match e {
        Error::InvalidState(msg) => Error::InvalidState(format!("--init {spec}: {msg}")),
        other => other,
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Time step, time units [default: 1e-3]
    #[arg(long)]
    pub dt: Option<f64>,
    /// Horizon T, time units [default: 10]
    #[arg(long)]
    pub tfinal: Option<f64>,
    /// Number of trajectories [default: 10]
    #[arg(long)]
    pub ntraj: Option<usize>,
    /// Base seed; trajectory i uses stream (seed, i) [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads, 0 = all cores
    #[arg(long, env = "SPINSTAB_WORKERS", default_value_t = 0)]
    pub workers: usize,
    /// Keep every k-th step [default: 10]
    #[arg(long)]
    pub record_stride: Option<usize>,
    /// Final population above which a trajectory counts as converged
    /// [default: 0.99]
    #[arg(long)]
    pub threshold: Option<f64>,
    /// CSV output path; metadata goes next to it as <stem>.meta.json
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    pub fn ensemble_config(&self) -> Result<EnsembleConfig> {
        let m = &self.model;
        let mut cfg = match m.preset_config()? {
            Some(cfg) => cfg,
            None => {
                let (params, law) = m.resolve()?;
                let sde = SdeConfig::new(1e-3, 10.0)?.with_stride(10);
                let mut cfg = EnsembleConfig::new(params, law, m.initial_state(&params)?, sde);
                cfg.n_traj = 10;
                cfg
            }
        };
        if m.has_model_flags() || m.has_law_flags() {
            let (params, law) = m.resolve()?;
            cfg.model = params;
            if law != cfg.law {
                cfg.law = law;
                cfg.observables = RecordSpec::for_law(&law);
                if matches!(law, FeedbackLaw::GeneralTarget { .. }) {
                    cfg.observables = cfg.observables.with_min_eigenvalue();
                }
            }
        }
        if m.init.is_some() || m.has_model_flags() {
            cfg.initial = m.initial_state(&cfg.model)?;
        }
        if let Some(dt) = self.dt {
            cfg.sde.dt = dt;
        }
        if let Some(t) = self.tfinal {
            cfg.sde.t_final = t;
        }
        if let Some(k) = self.record_stride {
            cfg.sde.record_stride = k;
        }
        if let Some(n) = self.ntraj {
            cfg.n_traj = n;
        }
        if let Some(s) = self.seed {
            cfg.base_seed = s;
        }
        if let Some(th) = self.threshold {
            cfg.threshold = th;
        }
        cfg.workers = self.workers;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Sampled states per condition
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Neighbourhood D_λ = {λ < ρ_n̄n̄ < 1} used for the bound checks
    #[arg(long, default_value_t = 0.9)]
    pub lambda: f64,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[arg(value_enum)]
    pub suite: OracleSuite,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Finest time step for the zakai suite, time units
    #[arg(long, default_value_t = 1e-4)]
    pub dt: f64,
    /// Horizon for the zakai suite, time units
    #[arg(long, default_value_t = 1.0)]
    pub tfinal: f64,
    /// Noise paths for the zakai suite
    #[arg(long, default_value_t = 4)]
    pub paths: usize,
    /// Random states per check [default: 20 per law for generator, 100 for
    /// strat]
    #[arg(long)]
    pub states: Option<usize>,
    /// One-step samples per state for the generator suite
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    /// One-step length for the generator suite, time units
    #[arg(long, default_value_t = 1e-4)]
    pub delta: f64,
    /// Finite-difference step for the strat suite
    #[arg(long, default_value_t = 1e-6)]
    pub step: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
