mod common;

use common::{random_scene, random_velocity, rng, variational_loss_oracle, SceneOptions};
use proptest::prelude::*;
use viscid_core::grid::GridDims;
use viscid_core::loss::{l2_error, variational_loss, viscosity_objective, LossReport};
use viscid_core::viscosity::{viscosity_step, FluidParams, SolveOptions, ViscosityWeights};

#[test]
fn variational_loss_matches_oracle() {
    let mut r = rng(1);
    for (nx, ny) in [(2, 2), (5, 3), (12, 9)] {
        let s = random_scene(&mut r, nx, ny, SceneOptions::default());
        let vel = random_velocity(&mut r, &s.dims);
        let got = variational_loss(&vel, &s.vel_old, &s.params, &s.dims).unwrap();
        let (inertia, dissipation) = variational_loss_oracle(&vel, &s.vel_old, &s.params, &s.dims);
        assert!((got.inertia_term - inertia).abs() <= 1e-12 * inertia.abs().max(1.0));
        assert!((got.dissipation_term - dissipation).abs() <= 1e-12 * dissipation.abs().max(1.0));
        assert!((got.l_v - (inertia + dissipation)).abs() <= 1e-12 * (inertia + dissipation).max(1.0));
    }
}

#[test]
fn l2_is_mean_square_over_all_samples() {
    let dims = GridDims::new(3, 2, 0.1).unwrap();
    let a = random_velocity(&mut rng(2), &dims);
    let b = random_velocity(&mut rng(3), &dims);
    let mut sum = 0.0;
    let (pa, pb) = (a.to_vec(), b.to_vec());
    for k in 0..pa.len() {
        sum += (pa[k] - pb[k]).powi(2);
    }
    assert_eq!(pa.len(), 4 * 2 + 3 * 3);
    assert!((l2_error(&a, &b).unwrap() - sum / pa.len() as f64).abs() < 1e-15);
}

#[test]
fn exact_solution_scores_zero_l2() {
    let mut r = rng(4);
    let s = random_scene(&mut r, 8, 8, SceneOptions::default());
    let step = viscosity_step(&s.vel_old, &s.vols, &s.solid, &s.params, &s.dims, &SolveOptions::default()).unwrap();
    let rep = LossReport::evaluate(&step.delta, &step.delta, &s.vel_old, &s.params, &s.dims).unwrap();
    assert_eq!(rep.l2, 0.0);
    assert!(rep.l_v >= 0.0);
}

#[test]
fn solver_output_beats_perturbations_on_its_objective() {
    let mut r = rng(5);
    for _ in 0..5 {
        let s = random_scene(&mut r, 10, 10, SceneOptions::default());
        let w = ViscosityWeights::new(&s.vols, &s.solid, &s.params, &s.dims).unwrap();
        let opts = SolveOptions { tol: 1e-12, max_iter: None };
        let step = viscosity_step(&s.vel_old, &s.vols, &s.solid, &s.params, &s.dims, &opts).unwrap();
        let best = viscosity_objective(&step.velocity, &s.vel_old, &w, &s.params).unwrap();
        let noise = random_velocity(&mut r, &s.dims);
        let roles = w.roles();
        let mut n = noise.to_vec();
        for (k, role) in roles.iter().enumerate() {
            if *role != viscid_core::viscosity::FaceRole::Free {
                n[k] = 0.0;
            }
        }
        let noise = viscid_core::grid::MacVelocity2::from_slice(&s.dims, &n).unwrap();
        for eps in [1e-1, 1e-2, 1e-3] {
            let j = viscosity_objective(&step.velocity.add_scaled(&noise, eps), &s.vel_old, &w, &s.params).unwrap();
            assert!(j >= best);
        }
    }
}

proptest! {
    #[test]
    fn loss_is_non_negative_and_linear_in_mu(seed in 0u64..100_000, factor in 0.0f64..10.0) {
        let mut r = rng(seed);
        let s = random_scene(&mut r, 6, 5, SceneOptions::default());
        let vel = random_velocity(&mut r, &s.dims);
        let base = variational_loss(&vel, &s.vel_old, &s.params, &s.dims).unwrap();
        prop_assert!(base.inertia_term >= 0.0 && base.dissipation_term >= 0.0);
        let scaled = variational_loss(&vel, &s.vel_old, &s.params.with_mu_scaled(factor), &s.dims).unwrap();
        prop_assert_eq!(scaled.inertia_term, base.inertia_term);
        prop_assert!((scaled.dissipation_term - factor * base.dissipation_term).abs() <= 1e-12 * base.dissipation_term.max(1e-300) * factor.max(1.0));
    }

    #[test]
    fn zero_mu_loss_is_pure_inertia(seed in 0u64..100_000) {
        let mut r = rng(seed);
        let dims = GridDims::new(4, 6, 0.1).unwrap();
        let a = random_velocity(&mut r, &dims);
        let b = random_velocity(&mut r, &dims);
        let l = variational_loss(&a, &b, &FluidParams::new(800.0, 0.0, 0.01), &dims).unwrap();
        prop_assert_eq!(l.dissipation_term, 0.0);
        prop_assert!(l.inertia_term > 0.0);
    }
}
