//! `spinstab`: ensemble runs, condition audits and oracle checks.

mod args;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use spinstab_core::analysis::{audit_conditions, AuditConfig, DynkinConfig};
use spinstab_core::oracles::{
    generator_oracle, stratonovich_oracle, zakai_oracle, ZakaiOracleConfig,
};
use spinstab_core::output::write_outputs;
use spinstab_core::{run_ensemble, Error, Model};

use args::{AuditArgs, Cli, Command, OracleArgs, OracleSuite, RunArgs};

/// Failure with the process exit status it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    /// Bad flags, parameters or states: nothing was run.
    fn usage(e: Error) -> Self {
        Self {
            code: 2,
            message: e.to_string(),
        }
    }

    fn runtime(e: Error) -> Self {
        Self {
            code: 1,
            message: e.to_string(),
        }
    }

    fn check(message: String) -> Self {
        Self { code: 1, message }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Audit(a) => cmd_audit(a),
        Command::Oracle(a) => cmd_oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("spinstab: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn cmd_run(a: RunArgs) -> Result<(), Failure> {
    let cfg = a.ensemble_config().map_err(Failure::usage)?;
    let out: Option<PathBuf> = a.out.clone();
    let stats = run_ensemble(&cfg).map_err(Failure::runtime)?;
    if let Some(path) = &out {
        write_outputs(&cfg, &stats, path).map_err(Failure::runtime)?;
    }
    let final_db = stats.distance.mean.last().copied().unwrap_or(f64::NAN);
    let freqs: Vec<String> = stats
        .frequencies
        .iter()
        .map(|f| format!("{f:.3}"))
        .collect();
    let median = stats
        .median_slope()
        .map_or_else(|| "n/a".to_string(), |s| format!("{s:.4}"));
    println!(
        "n_traj={} T={} final_mean_dB={:.6e} frequencies=[{}] undecided={:.3} median_slope={}",
        stats.n_traj,
        stats.effective_horizon,
        final_db,
        freqs.join(","),
        stats.undecided,
        median
    );
    Ok(())
}

fn cmd_audit(a: AuditArgs) -> Result<(), Failure> {
    let (model, law) = a.model.resolve().map_err(Failure::usage)?;
    let cfg = AuditConfig {
        samples: a.samples,
        seed: a.seed,
        lambda: a.lambda,
        ..AuditConfig::default()
    };
    let report = audit_conditions(&law, &Model::new(model), &cfg).map_err(|e| match e {
        Error::InvalidLaw(_) | Error::InvalidConfig(_) => Failure::usage(e),
        other => Failure::runtime(other),
    })?;
    for r in &report.records {
        let margin = r
            .worst_margin
            .map_or_else(|| "-".to_string(), |m| format!("{m:.6e}"));
        let tag = if r.vacuous { " (vacuous)" } else { "" };
        println!(
            "{:<13} samples={:<6} violations={:<6} worst_margin={}{}",
            r.id, r.samples, r.violations, margin, tag
        );
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::check(format!(
            "{} violations",
            report.violations()
        )))
    }
}

fn cmd_oracle(a: OracleArgs) -> Result<(), Failure> {
    let model = Model::new(a.model.params().map_err(Failure::usage)?);
    match a.suite {
        OracleSuite::Zakai => {
            let init = a
                .model
                .zakai_initial(&model.params)
                .map_err(Failure::usage)?;
            let mut cfg = ZakaiOracleConfig::new(init);
            cfg.dt = a.dt;
            cfg.t_final = a.tfinal;
            cfg.seed = a.seed;
            cfg.paths = a.paths;
            let r = zakai_oracle(&model, &cfg).map_err(Failure::runtime)?;
            for (dt, gap) in &r.gaps {
                println!("dt={dt:e} max_gap={gap:.6e}");
            }
            println!(
                "zakai: max_gap={:.6e} tolerance={:e} decreasing={}",
                r.finest_gap(),
                r.tolerance,
                r.decreasing()
            );
            if !r.passed() {
                return Err(Failure::check("zakai oracle outside tolerance".into()));
            }
        }
        OracleSuite::Strat => {
            let r = stratonovich_oracle(&model, a.states.unwrap_or(100), a.step, a.seed);
            println!(
                "strat: states={} max_error={:.3e} tolerance={:e}",
                r.states, r.max_error, r.tolerance
            );
            if !r.passed() {
                return Err(Failure::check(
                    "Stratonovich identity outside tolerance".into(),
                ));
            }
        }
        OracleSuite::Generator => {
            let (edge, general) = a.model.oracle_laws(&model.params).map_err(Failure::usage)?;
            let dynkin = DynkinConfig {
                delta: a.delta,
                samples: a.samples,
                seed: a.seed,
            };
            let r = generator_oracle(&model, &edge, &general, a.states.unwrap_or(20), &dynkin)
                .map_err(Failure::runtime)?;
            let worst = |cases: &[spinstab_core::oracles::GeneratorCase]| {
                cases
                    .iter()
                    .map(|c| (c.estimate - c.closed_form).abs() / c.tolerance)
                    .fold(0.0, f64::max)
            };
            println!(
                "generator edge: {}/{} agree (worst error/tolerance {:.3})",
                r.edge.iter().filter(|c| c.agrees).count(),
                r.edge.len(),
                worst(&r.edge)
            );
            println!(
                "generator general: {}/{} agree (worst error/tolerance {:.3})",
                r.general.iter().filter(|c| c.agrees).count(),
                r.general.len(),
                worst(&r.general)
            );
            println!(
                "qsr bound: {}/{} hold",
                r.qsr.iter().filter(|c| c.holds).count(),
                r.qsr.len()
            );
            if !r.passed() {
                return Err(Failure::check("generator oracle outside tolerance".into()));
            }
        }
    }
    Ok(())
}
