use viscid_core::nn::{Unet, UnetConfig, WeightManifest};
use viscid_core::scene::{pointer_to_solid, FluidRegion, Scene, Shape, SolidBody};
use viscid_core::sim::{Simulation, Solver};

fn obstacle_scene() -> Scene {
    let mut s = Scene::new([1.0, 1.0], [24, 24], 1000.0, 2.0);
    s.seed = 5;
    s.fluids.push(FluidRegion {
        shape: Shape::Box { min: [0.2, 0.5], max: [0.8, 0.9] },
        velocity: [0.3, 0.0],
        color: 0,
    });
    s.solids.push(SolidBody { shape: Shape::Disc { center: [0.5, 0.3], radius: 0.12 }, velocity: [0.0, 0.0] });
    s
}

#[test]
fn replay_is_bitwise_identical() {
    let scene = obstacle_scene();
    let run = || {
        let mut sim = Simulation::new(&scene).unwrap();
        for _ in 0..30 {
            sim.step(&Solver::Classic, &mut ()).unwrap();
        }
        sim.particles
    };
    assert_eq!(run(), run());
}

#[test]
fn particles_stay_out_of_solids_and_inside_the_domain() {
    let scene = obstacle_scene();
    let mut sim = Simulation::new(&scene).unwrap();
    for _ in 0..60 {
        sim.step(&Solver::Classic, &mut ()).unwrap();
        let solid = sim.solid().unwrap();
        for p in &sim.particles.positions {
            assert!(p[0] > 0.0 && p[0] < 1.0 && p[1] > 0.0 && p[1] < 1.0);
            assert!(solid.sample(&sim.dims, *p) >= 0.0, "particle {p:?} inside solid at frame {}", sim.frame);
        }
        assert!(sim.particles.velocities.iter().flatten().all(|v| v.is_finite()));
    }
}

#[test]
fn pointer_pushes_fluid() {
    let mut s = Scene::new([1.0, 1.0], [20, 20], 1000.0, 0.5);
    s.gravity = [0.0, 0.0];
    s.fluids.push(FluidRegion {
        shape: Shape::Box { min: [0.0, 0.0], max: [1.0, 0.5] },
        velocity: [0.0, 0.0],
        color: 0,
    });
    let mut sim = Simulation::new(&s).unwrap();
    sim.pointer = Some(pointer_to_solid(&sim.dims, [0.3, 0.25], 0.08, [2.0, 0.0]));
    for _ in 0..5 {
        sim.step(&Solver::Classic, &mut ()).unwrap();
    }
    let px: f64 = sim.particles.momentum()[0];
    assert!(px > 0.0, "{px}");
    let solid = sim.solid().unwrap();
    assert!(sim.particles.positions.iter().all(|p| solid.sample(&sim.dims, *p) >= 0.0));
}

#[test]
fn neural_solver_runs_with_six_and_seven_channels() {
    let scene = obstacle_scene();
    for channels in [6, 7] {
        let m = WeightManifest::seeded(UnetConfig::new(channels, 2, 4), 1).unwrap();
        let solver = Solver::Neural(Box::new(Unet::new(&m).unwrap()));
        let mut sim = Simulation::new(&scene).unwrap();
        for _ in 0..3 {
            sim.step(&solver, &mut ()).unwrap();
        }
        assert_eq!(sim.frame, 3);
        assert!(sim.particles.velocities.iter().flatten().all(|v| v.is_finite()));
    }
}

#[test]
fn mirrored_seeding_is_symmetric() {
    let mut s = obstacle_scene();
    s.mirror_x = true;
    let sim = Simulation::new(&s).unwrap();
    let ps = &sim.particles;
    assert!(ps.len().is_multiple_of(2) && !ps.is_empty());
    for k in (0..ps.len()).step_by(2) {
        let (a, b) = (ps.positions[k], ps.positions[k + 1]);
        assert_eq!(b, [1.0 - a[0], a[1]]);
        assert_eq!(ps.velocities[k + 1], [-ps.velocities[k][0], ps.velocities[k][1]]);
    }
}
