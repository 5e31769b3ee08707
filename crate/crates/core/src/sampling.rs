//! Random density matrices for property checks and audits.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::dynamics::jz_mean;
use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix};
use crate::spin::{PureTarget, SpinOperators};
use crate::state::DensityMatrix;

/// Uniform point of the probability simplex (flat Dirichlet).
pub fn random_simplex<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    let mut w: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    w
}

/// Haar-random unitary: QR of a complex Ginibre matrix with the phases of
/// `R`'s diagonal moved into `Q`.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let g = CMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(
            scale * rng.sample::<f64, _>(StandardNormal),
            scale * rng.sample::<f64, _>(StandardNormal),
        )
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0) };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

fn conjugated(u: &CMatrix, eigenvalues: &[f64]) -> CMatrix {
    let d = CMatrix::from_diagonal(&DVector::from_iterator(
        eigenvalues.len(),
        eigenvalues.iter().map(|&x| c(x)),
    ));
    let m = u * d * u.adjoint();
    (&m + m.adjoint()) * c(0.5)
}

fn unit_trace(mut m: CMatrix) -> DensityMatrix {
    let tr = crate::linalg::trace(&m).re;
    m.unscale_mut(tr);
    DensityMatrix::new(m).expect("sampled state is valid")
}

/// Full-rank random state: simplex eigenvalues in a Haar basis.
pub fn random_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
    let values = random_simplex(dim, rng);
    unit_trace(conjugated(&random_unitary(dim, rng), &values))
}

/// Haar-random pure state.
pub fn random_pure<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
    let mut values = vec![0.0; dim];
    values[0] = 1.0;
    unit_trace(conjugated(&random_unitary(dim, rng), &values))
}

/// Random diagonal state.
pub fn random_diagonal<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
    DensityMatrix::diagonal(&random_simplex(dim, rng)).expect("simplex point is a state")
}

/// Diagonal or coherent state, half the time each.
pub fn random_mixed_kind<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
    if rng.random_bool(0.5) {
        random_diagonal(dim, rng)
    } else {
        random_state(dim, rng)
    }
}

/// `(1 − s) a + s b`
fn mix(a: &DensityMatrix, b: &DensityMatrix, s: f64) -> DensityMatrix {
    let m = a.matrix() * c(1.0 - s) + b.matrix() * c(s);
    unit_trace(m)
}

/// Random state in `D_λ(ρ_n̄) = {λ < ρ_n̄n̄ < 1}`: a random state pushed
/// toward the target until its target population hits a uniform draw from
/// `(λ, 1)`.
pub fn sample_d_lambda<R: Rng + ?Sized>(
    target: PureTarget,
    lambda: f64,
    rng: &mut R,
) -> DensityMatrix {
    let n = target.index();
    let dim = target.levels();
    loop {
        let sigma = random_mixed_kind(dim, rng);
        let x: f64 = rng.random_range(lambda..1.0);
        let have = sigma.population(n);
        let rho = if have >= x {
            sigma
        } else {
            mix(&sigma, &target.state(), (x - have) / (1.0 - have))
        };
        let p = rho.population(n);
        if p > lambda && p < 1.0 {
            return rho;
        }
    }
}

/// Random state on `𝐏_n̄ = {Tr(J_z ρ) = J − n̄}`: a random state mixed with
/// the extreme eigenstate on the far side of the level set. Rejects
/// samples whose target population vanishes or that lie within Bures
/// distance `exclusion` of the target.
pub fn sample_level_set<R: Rng + ?Sized>(
    target: PureTarget,
    ops: &SpinOperators,
    exclusion: f64,
    rng: &mut R,
) -> Result<DensityMatrix> {
    let dim = target.levels();
    let n = target.index();
    let level = ops.jz_diag[n];
    let j = ops.spin();
    if target.is_edge() {
        return Err(Error::InfeasibleSampling(format!(
            "level set of edge target {n} is the target itself"
        )));
    }
    for _ in 0..10_000 {
        let sigma = random_mixed_kind(dim, rng);
        let mean = jz_mean(sigma.matrix(), ops);
        let (pole, pole_mean) = if mean < level { (0, j) } else { (dim - 1, -j) };
        let s = (level - mean) / (pole_mean - mean);
        if !(0.0..1.0).contains(&s) {
            continue;
        }
        let rho = mix(&sigma, &DensityMatrix::eigenstate(dim, pole), s);
        if rho.population(n) <= 0.0 {
            continue;
        }
        if crate::bures::bures_to_eigenstate(&rho, target) < exclusion {
            continue;
        }
        return Ok(rho);
    }
    Err(Error::InfeasibleSampling(format!(
        "no admissible state on the level set of target {n}"
    )))
}
