use approx::assert_abs_diff_eq;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;
use spinstab_core::bures::{bures_distance_general, bures_to_eigenstate};
use spinstab_core::dynamics::control_overlap;
use spinstab_core::integrator::trajectory_rng;
use spinstab_core::linalg::{max_abs, trace, CMatrix};
use spinstab_core::sampling::{random_mixed_kind, random_pure, random_state};
use spinstab_core::{
    bures_distance, project_to_state_space, DensityMatrix, Model, ModelParams, ProjectionPolicy,
    PureTarget, Tolerances,
};

fn state(seed: u64, dim: usize) -> DensityMatrix {
    random_mixed_kind(dim, &mut trajectory_rng(seed, dim as u64))
}

fn model(levels: usize, omega: f64, eta: f64) -> Model {
    Model::new(ModelParams::new(levels, omega, eta, 1.0).unwrap())
}

fn hermitian_error(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn bures_is_a_bounded_symmetric_distance(a in any::<u64>(), b in any::<u64>(), levels in 2usize..6) {
        let x = state(a, levels);
        let y = state(b.wrapping_add(1), levels);
        let d = bures_distance(&x, &y).unwrap();
        prop_assert!((0.0..=2f64.sqrt() + 1e-12).contains(&d));
        prop_assert!((d - bures_distance(&y, &x).unwrap()).abs() <= 1e-10);
        prop_assert!(bures_distance(&x, &x).unwrap() <= 1e-6);
    }

    #[test]
    fn closed_form_matches_general_bures(seed in any::<u64>(), levels in 2usize..6, n in 0usize..6) {
        let n = n % levels;
        let rho = random_state(levels, &mut trajectory_rng(seed, 0));
        let target = PureTarget::new(n, levels).unwrap();
        let general = bures_distance_general(&rho, &target.state()).unwrap();
        prop_assert!((general - bures_to_eigenstate(&rho, target)).abs() <= 1e-10);
    }

    #[test]
    fn fields_are_traceless_and_hermitian(seed in any::<u64>(), levels in 2usize..6, u in -5.0f64..5.0, omega in 0.0f64..2.0) {
        let m = model(levels, omega, 0.3);
        let rho = state(seed, levels);
        let f = m.fields(rho.matrix(), u);
        let strat = m.drift_stratonovich(rho.matrix(), u);
        for x in [&f.drift, &f.diffusion, &strat] {
            prop_assert!(trace(x).norm() <= 1e-12);
            prop_assert!(hermitian_error(x) <= 1e-12);
        }
    }

    #[test]
    fn diffusion_diagonal(seed in any::<u64>(), levels in 2usize..6) {
        let m = model(levels, 0.0, 0.3);
        let rho = state(seed, levels);
        let g = m.diffusion(rho.matrix());
        let p = rho.populations();
        let mean: f64 = m.ops.jz_diag.iter().zip(&p).map(|(z, x)| z * x).sum();
        for k in 0..levels {
            let want = 2.0 * p[k] * (m.ops.jz_diag[k] - mean);
            prop_assert!((g[(k, k)].re - want).abs() <= 1e-12);
            prop_assert!(g[(k, k)].im.abs() <= 1e-12);
        }
    }

    #[test]
    fn projection_is_idempotent(seed in any::<u64>(), levels in 2usize..6, scale in 0.5f64..2.0) {
        let rho = state(seed, levels);
        let policy = ProjectionPolicy::default();
        let tol = Tolerances::default();
        let once = project_to_state_space(&(rho.matrix() * Complex64::new(scale, 0.0)), &policy, &tol).unwrap();
        let twice = project_to_state_space(once.matrix(), &policy, &tol).unwrap();
        prop_assert!(max_abs(&(once.matrix() - twice.matrix())) <= 1e-15);
        prop_assert!(max_abs(&(once.matrix() - rho.matrix())) <= 1e-12);
    }

    #[test]
    fn control_commutator_identity(seed in any::<u64>(), levels in 2usize..6) {
        let m = model(levels, 0.0, 0.3);
        let rho = random_pure(levels, &mut trajectory_rng(seed, 1));
        let r = rho.matrix();
        let comm = (&m.ops.jy * r - r * &m.ops.jy) * Complex64::i();
        for n in 0..levels {
            let up = if n + 1 < levels { r[(n, n + 1)].re } else { 0.0 };
            let down = if n > 0 { r[(n, n - 1)].re } else { 0.0 };
            let want = 2.0 * m.ops.coefficient(n + 1) * up - 2.0 * m.ops.coefficient(n) * down;
            prop_assert!((comm[(n, n)].re - want).abs() <= 1e-12);
            prop_assert!((control_overlap(r, n, &m.ops) - want).abs() <= 1e-12);
        }
    }
}

#[test]
fn operators_are_hermitian_with_traceless_jz() {
    for levels in 2..8 {
        let m = model(levels, 0.0, 0.3);
        assert_eq!(hermitian_error(&m.ops.jz), 0.0);
        assert!(hermitian_error(&m.ops.jy) <= 1e-15);
        assert_abs_diff_eq!(m.ops.jz_diag.iter().sum::<f64>(), 0.0, epsilon = 1e-15);
    }
}

#[test]
fn eigenstates_are_equilibria() {
    for levels in 2..6 {
        let m = model(levels, 1.3, 0.7);
        for n in 0..levels {
            let rho = DensityMatrix::eigenstate(levels, n);
            let f = m.fields(rho.matrix(), 0.0);
            assert!(max_abs(&f.drift) <= 1e-15);
            assert!(max_abs(&f.diffusion) <= 1e-15);
        }
    }
}

#[test]
fn random_states_span_the_state_space() {
    let mut rng = trajectory_rng(3, 3);
    let tol = Tolerances::default();
    for _ in 0..100 {
        let dim = rng.random_range(2..6);
        let rho = random_mixed_kind(dim, &mut rng);
        assert!(rho.validity().within(&tol));
    }
}
