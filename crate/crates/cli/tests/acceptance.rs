//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use spinstab_core::analysis::lyapunov::{
    lyapunov_edge, lyapunov_general, lyapunov_qsr, qsr_bound_constants,
};
use spinstab_core::analysis::DynkinConfig;
use spinstab_core::bures::bures_to_eigenstates_populations;
use spinstab_core::ensemble::run_ensemble_with_records;
use spinstab_core::integrator::trajectory_rng;
use spinstab_core::linalg::max_abs;
use spinstab_core::oracles::{generator_oracle, stratonovich_oracle};
use spinstab_core::sampling::random_mixed_kind;
use spinstab_core::{
    bures_distance, preset, run_ensemble, DensityMatrix, EnsembleStats, FeedbackLaw, Model,
    ModelParams, PureTarget, Tolerances, Validity,
};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, detail }
    }
}

fn report(id: usize, name: &str, elapsed: Duration, outcome: &Outcome) {
    println!(
        "{} {id:>2} {name}: {} [{:.1}s]",
        if outcome.pass { "PASS" } else { "FAIL" },
        outcome.detail,
        elapsed.as_secs_f64()
    );
}

fn within_budget(elapsed: Duration, secs: u64) -> (bool, String) {
    (
        elapsed <= Duration::from_secs(secs),
        format!("runtime {:.1}s (limit {secs}s)", elapsed.as_secs_f64()),
    )
}

fn spinstab(args: &[&str]) -> (bool, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_spinstab"))
        .args(args)
        .output()
        .expect("spinstab runs");
    let text = format!(
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    (out.status.success(), text.trim().replace('\n', " | "))
}

/// Fraction of trajectories whose trailing-window slope is at most
/// `bound`; a trajectory that collapsed onto the target before the fit
/// window counts as meeting it.
fn slope_fraction(stats: &EnsembleStats, target: usize, bound: f64) -> f64 {
    let ok = stats
        .trajectories
        .iter()
        .filter(|t| match t.exponent {
            Some(e) => e.slope <= bound,
            None => t.collapse_time.is_some() && t.class == Some(target),
        })
        .count();
    ok as f64 / stats.n_traj as f64
}

fn slope_quantile(stats: &EnsembleStats, q: f64) -> f64 {
    let mut s = stats.slopes();
    if s.is_empty() {
        return f64::NAN;
    }
    s.sort_by(f64::total_cmp);
    s[((q * s.len() as f64).ceil() as usize).clamp(1, s.len()) - 1]
}

fn reach_fraction(stats: &EnsembleStats, target: usize) -> f64 {
    let ok = stats
        .trajectories
        .iter()
        .filter(|t| t.final_populations[target] > 0.99)
        .count();
    ok as f64 / stats.n_traj as f64
}

fn qsr_decay(stats: &EnsembleStats, v0: f64, d0: f64, rate: f64) -> Outcome {
    let (c1, c2) = qsr_bound_constants(&ModelParams::new(3, 0.0, 0.3, 1.0).unwrap());
    let mut worst_v = f64::NEG_INFINITY;
    let mut worst_d = f64::NEG_INFINITY;
    for (i, &t) in stats.times.iter().enumerate() {
        let env = (-rate * t).exp();
        worst_v = worst_v.max(stats.lyapunov.mean[i] - v0 * env - 3.0 * stats.lyapunov.se[i]);
        worst_d =
            worst_d.max(stats.distance.mean[i] - c2 / c1 * d0 * env - 3.0 * stats.distance.se[i]);
    }
    Outcome::new(
        worst_v <= 0.0 && worst_d <= 0.0,
        format!("max excess over envelope: V {worst_v:.3e}, d_B {worst_d:.3e}"),
    )
}

fn frequencies(stats: &EnsembleStats) -> Outcome {
    let want = [0.3, 0.4, 0.3];
    let worst = stats
        .frequencies
        .iter()
        .zip(want)
        .map(|(f, w)| (f - w).abs())
        .fold(0.0, f64::max);
    Outcome::new(
        worst <= 0.05 && stats.undecided <= 0.02,
        format!(
            "frequencies {:?}, undecided {:.3}, max deviation {worst:.3}",
            stats.frequencies, stats.undecided
        ),
    )
}

fn martingale(stats: &EnsembleStats, p0: &[f64]) -> Outcome {
    let mut breaches = 0;
    let mut worst = 0.0f64;
    for (n, series) in stats.populations.iter().enumerate() {
        for (m, se) in series.mean.iter().zip(&series.se) {
            let dev = (m - p0[n]).abs();
            if dev > 3.0 * se && dev > 0.0 {
                breaches += 1;
            }
            if *se > 0.0 {
                worst = worst.max(dev / se);
            }
        }
    }
    Outcome::new(
        breaches == 0,
        format!("{breaches} samples outside 3 SE, worst {worst:.2} SE"),
    )
}

fn exponent_check(stats: &EnsembleStats, target: usize, rate: f64) -> (f64, f64, f64) {
    (
        slope_fraction(stats, target, -rate + 0.05),
        slope_quantile(stats, 0.9),
        reach_fraction(stats, target),
    )
}

fn structural(validity: Validity) -> Outcome {
    let mut failures = Vec::new();

    let model = Model::new(ModelParams::new(3, 1.0, 0.3, 1.0).unwrap());
    let mut eq = 0.0f64;
    for n in 0..3 {
        let rho = DensityMatrix::eigenstate(3, n);
        let f = model.fields(rho.matrix(), 0.0);
        eq = eq.max(max_abs(&f.drift)).max(max_abs(&f.diffusion));
    }
    if eq > 1e-15 {
        failures.push(format!("equilibrium residual {eq:e}"));
    }

    if !validity.within(&Tolerances::default()) {
        failures.push(format!("invalid sample {validity:?}"));
    }

    let mut cfg = preset("fig1_qsr").unwrap();
    cfg.n_traj = 8;
    cfg.sde.t_final = 2.0;
    cfg.initial = DensityMatrix::diagonal(&[0.5, 0.5, 0.0]).unwrap();
    cfg.observables = cfg.observables.with_states();
    let (_, records) = run_ensemble_with_records(&cfg).unwrap();
    let leaked = records
        .iter()
        .flat_map(|r| r.states.as_deref().unwrap_or_default())
        .filter(|s| {
            let m = s.matrix();
            (0..3).any(|k| m[(2, k)].norm() != 0.0 || m[(k, 2)].norm() != 0.0)
        })
        .count();
    if leaked > 0 {
        failures.push(format!("{leaked} states leave the zero-diagonal face"));
    }

    let params = ModelParams::new(3, 0.0, 0.3, 1.0).unwrap();
    let (c1, c2) = qsr_bound_constants(&params);
    let two_j = 2.0 * params.spin();
    let eigen: Vec<DensityMatrix> = (0..3).map(|n| DensityMatrix::eigenstate(3, n)).collect();
    let mut rng = trajectory_rng(2024, 0);
    let mut violations = 0;
    let slack = 1e-12;
    for _ in 0..1000 {
        let rho = random_mixed_kind(3, &mut rng);
        let d: Vec<f64> = eigen
            .iter()
            .map(|e| bures_distance(&rho, e).unwrap())
            .collect();
        let d_set = d.iter().copied().fold(f64::INFINITY, f64::min);
        let v = lyapunov_qsr(&rho);
        if c1 * d_set > v + slack || v > c2 * d_set + slack {
            violations += 1;
        }
        for n in [0, 2] {
            let v = lyapunov_edge(PureTarget::new(n, 3).unwrap(), &rho);
            if 0.5f64.sqrt() * d[n] > v + slack || v > d[n] + slack {
                violations += 1;
            }
        }
        for (n, &dn) in d.iter().enumerate() {
            let v = lyapunov_general(PureTarget::new(n, 3).unwrap(), &rho);
            if 0.5f64.sqrt() * dn > v + slack || v > two_j.sqrt() * dn + slack {
                violations += 1;
            }
        }
    }
    if violations > 0 {
        failures.push(format!("{violations} sandwich violations"));
    }

    let mut cfg = preset("fig2_edge").unwrap();
    cfg.n_traj = 16;
    cfg.sde.t_final = 1.0;
    cfg.workers = 1;
    let one = run_ensemble(&cfg).unwrap();
    cfg.workers = 8;
    let eight = run_ensemble(&cfg).unwrap();
    if format!("{one:?}") != format!("{eight:?}") {
        failures.push("workers=1 and workers=8 differ".into());
    }

    let pass = failures.is_empty();
    let detail = if pass {
        format!(
            "equilibrium residual {eq:e}, {} states on the face, 0/6000 sandwich violations, workers 1 = 8",
            records.iter().map(|r| r.len()).sum::<usize>()
        )
    } else {
        failures.join("; ")
    };
    Outcome::new(pass, detail)
}

fn main() -> ExitCode {
    let mut all = true;
    let mut record = |id: usize, name: &str, elapsed: Duration, o: Outcome| {
        report(id, name, elapsed, &o);
        all &= o.pass;
    };
    let mut validity = Validity::perfect();

    let mut cfg = preset("fig1_qsr").unwrap();
    cfg.n_traj = 1000;
    let start = Instant::now();
    let fig1 = run_ensemble(&cfg).unwrap();
    let elapsed = start.elapsed();
    validity = validity.merge(&fig1.worst_validity);
    let v0 = lyapunov_qsr(&cfg.initial);
    let d0 = bures_to_eigenstates_populations(&cfg.initial.populations());
    let mut o = qsr_decay(&fig1, v0, d0, 0.15);
    let (ok, time) = within_budget(elapsed, 120);
    o.pass &= ok;
    o.detail = format!("{}, {time}", o.detail);
    record(1, "QSR mean decay", elapsed, o);
    record(2, "convergence probabilities", elapsed, frequencies(&fig1));
    record(
        3,
        "martingale populations",
        elapsed,
        martingale(&fig1, &cfg.initial.populations()),
    );

    let mut cfg = preset("fig2_edge").unwrap();
    cfg.n_traj = 100;
    let start = Instant::now();
    let fig2 = run_ensemble(&cfg).unwrap();
    let elapsed = start.elapsed();
    validity = validity.merge(&fig2.worst_validity);
    let (frac, q90, reach) = exponent_check(&fig2, 0, 0.30);
    let (ok, time) = within_budget(elapsed, 60);
    record(
        4,
        "edge-target exponent",
        elapsed,
        Outcome::new(
            frac >= 0.9 && reach == 1.0 && ok,
            format!(
                "{:.0}% slopes <= -0.25 (90th pct {q90:.3}), {:.0}% reach rho00 > 0.99, {time}",
                100.0 * frac,
                100.0 * reach
            ),
        ),
    );

    let start = Instant::now();
    let mut details = Vec::new();
    let mut pass = true;
    for name in ["fig3_general_interior", "fig4_general_boundary"] {
        let mut cfg = preset(name).unwrap();
        cfg.n_traj = 100;
        let stats = run_ensemble(&cfg).unwrap();
        validity = validity.merge(&stats.worst_validity);
        let (frac, q90, reach) = exponent_check(&stats, 1, 0.15);
        pass &= frac >= 0.9 && reach == 1.0;
        details.push(format!(
            "{name}: {:.0}% slopes <= -0.10 (90th pct {q90:.3}), {:.0}% reach rho11 > 0.99",
            100.0 * frac,
            100.0 * reach
        ));
        if name == "fig4_general_boundary" {
            let exited = stats
                .trajectories
                .iter()
                .filter(|t| t.boundary_exit_time.is_some_and(|x| x <= 0.5))
                .count();
            pass &= exited == stats.n_traj;
            details.push(format!(
                "{exited}/{} leave the boundary by t = 0.5",
                stats.n_traj
            ));
        }
    }
    record(
        5,
        "general-target exponent",
        start.elapsed(),
        Outcome::new(pass, details.join("; ")),
    );

    let start = Instant::now();
    let (ok, out) = spinstab(&["oracle", "zakai", "--dt", "1e-4", "--tfinal", "1"]);
    let elapsed = start.elapsed();
    let (fast, time) = within_budget(elapsed, 30);
    record(
        6,
        "Zakai oracle",
        elapsed,
        Outcome::new(ok && fast, format!("{out}; {time}")),
    );

    let start = Instant::now();
    let model = Model::new(ModelParams::new(3, 0.0, 0.3, 1.0).unwrap());
    let edge = FeedbackLaw::edge(PureTarget::new(0, 3).unwrap(), 10.0, 5.0, 10.0).unwrap();
    let general = FeedbackLaw::general(PureTarget::new(1, 3).unwrap(), 0.3, 10.0).unwrap();
    let r = generator_oracle(&model, &edge, &general, 20, &DynkinConfig::default()).unwrap();
    let elapsed = start.elapsed();
    let (fast, time) = within_budget(elapsed, 120);
    let agree =
        |cases: &[spinstab_core::oracles::GeneratorCase]| cases.iter().filter(|c| c.agrees).count();
    record(
        7,
        "generator oracles",
        elapsed,
        Outcome::new(
            r.passed() && fast,
            format!(
                "edge {}/20, general {}/20 agree, qsr bound {}/20, {time}",
                agree(&r.edge),
                agree(&r.general),
                r.qsr.iter().filter(|c| c.holds).count()
            ),
        ),
    );

    let start = Instant::now();
    let model = Model::new(ModelParams::new(3, 1.0, 0.3, 1.0).unwrap());
    let r = stratonovich_oracle(&model, 100, 1e-6, 0);
    record(
        8,
        "Stratonovich correction",
        start.elapsed(),
        Outcome::new(
            r.passed(),
            format!("max error {:.3e} at {} states", r.max_error, r.states),
        ),
    );

    let start = Instant::now();
    let o = structural(validity);
    record(9, "structural suite", start.elapsed(), o);

    let start = Instant::now();
    let (edge_ok, edge_out) = spinstab(&["audit", "--preset", "fig2_edge"]);
    let (gen_ok, gen_out) = spinstab(&["audit", "--preset", "fig3_general_interior"]);
    record(
        10,
        "condition audit",
        start.elapsed(),
        Outcome::new(
            edge_ok && gen_ok,
            format!("fig2: {edge_out} || fig3: {gen_out}"),
        ),
    );

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
