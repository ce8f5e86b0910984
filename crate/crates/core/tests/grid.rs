mod common;

use common::{gradients_oracle, random_velocity, rng};
use proptest::prelude::*;
use viscid_core::grid::{edge_occupancy, fluid_volumes, velocity_gradients, Array2, GridDims, LevelSet2, MacVelocity2};

#[test]
fn gradients_match_oracle() {
    let mut r = rng(1);
    for (nx, ny) in [(2, 2), (3, 7), (9, 4), (16, 16)] {
        let dims = GridDims::new(nx, ny, 0.07).unwrap();
        let vel = random_velocity(&mut r, &dims);
        let g = velocity_gradients(&vel, &dims).unwrap();
        let o = gradients_oracle(&vel, &dims);
        for (lib, ora) in [&g.du_dx, &g.dv_dy, &g.du_dy, &g.dv_dx].into_iter().zip(o.iter()) {
            for (i, row) in ora.iter().enumerate() {
                for (j, &want) in row.iter().enumerate() {
                    assert!((lib.get(i, j) - want).abs() <= 1e-12 * want.abs().max(1.0));
                }
            }
        }
    }
}

#[test]
fn linear_field_has_exact_gradients() {
    let dims = GridDims::new(6, 5, 0.1).unwrap();
    let vel = MacVelocity2::from_fn(&dims, |x, y| [2.0 * x - 3.0 * y, 0.5 * x + 4.0 * y]);
    let g = velocity_gradients(&vel, &dims).unwrap();
    let close = |a: f64, b: f64| (a - b).abs() < 1e-10;
    assert!(g.du_dx.as_slice().iter().all(|&v| close(v, 2.0)));
    assert!(g.dv_dy.as_slice().iter().all(|&v| close(v, 4.0)));
    assert!(g.du_dy.as_slice().iter().all(|&v| close(v, -3.0)));
    assert!(g.dv_dx.as_slice().iter().all(|&v| close(v, 0.5)));
}

#[test]
fn interior_and_exterior_volumes() {
    let dims = GridDims::new(8, 8, 0.1).unwrap();
    let inside = fluid_volumes(&LevelSet2::from_fn(&dims, |_, _| -1.0), &dims).unwrap();
    let outside = fluid_volumes(&LevelSet2::from_fn(&dims, |_, _| 1.0), &dims).unwrap();
    for f in [&inside.cell, &inside.u_face, &inside.v_face, &inside.node] {
        assert!(f.as_slice().iter().all(|&v| v == 1.0));
    }
    for f in [&outside.cell, &outside.u_face, &outside.v_face, &outside.node] {
        assert!(f.as_slice().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn axis_aligned_cut_cell_fractions() {
    // Surface at y = 0.34 crosses row 3 (0.3..0.4) at fraction 0.4.
    let dims = GridDims::new(5, 6, 0.1).unwrap();
    let vols = fluid_volumes(&LevelSet2::from_fn(&dims, |_, y| y - 0.34), &dims).unwrap();
    for i in 0..5 {
        assert_eq!(vols.cell.get(i, 0), 1.0);
        // Bottom edge inside, top edge outside, sides 0.4 each.
        assert!((vols.cell.get(i, 3) - (1.0 + 0.0 + 0.8) / 4.0).abs() < 1e-12);
        assert_eq!(vols.cell.get(i, 5), 0.0);
    }
}

#[test]
fn particle_level_set_matches_disc_distance() {
    let dims = GridDims::new(10, 10, 0.1).unwrap();
    let p = [0.43, 0.58];
    let r = 0.12;
    let phi = LevelSet2::from_particles(&dims, &[p], r);
    for i in 0..=10 {
        for j in 0..=10 {
            let q = dims.node_pos(i, j);
            let exact = (q[0] - p[0]).hypot(q[1] - p[1]) - r;
            let got = phi.phi.get(i, j);
            if exact < 2.0 * dims.dx {
                assert!((got - exact).abs() < 1e-12, "({i},{j})");
            } else {
                assert!(got > 0.0);
            }
        }
    }
}

#[test]
fn volumes_transpose_with_the_grid() {
    let dims = GridDims::new(7, 5, 0.1).unwrap();
    let f = |x: f64, y: f64| (x - 0.31).hypot(y - 0.22) - 0.17;
    let a = fluid_volumes(&LevelSet2::from_fn(&dims, f), &dims).unwrap();
    let t = dims.transposed();
    let b = fluid_volumes(&LevelSet2::from_fn(&t, |x, y| f(y, x)), &t).unwrap();
    // Edge sums run in a different order after transposing.
    let same = |x: &Array2, y: &Array2| {
        assert_eq!(x.shape(), y.shape());
        assert!(x.as_slice().iter().zip(y.as_slice()).all(|(p, q)| (p - q).abs() < 1e-14));
    };
    same(&a.cell.transposed(), &b.cell);
    same(&a.node.transposed(), &b.node);
    same(&a.u_face.transposed(), &b.v_face);
    same(&a.v_face.transposed(), &b.u_face);
}

proptest! {
    #[test]
    fn edge_occupancy_in_unit_range_and_symmetric(a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let f = edge_occupancy(a, b);
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert_eq!(f, edge_occupancy(b, a));
        if a != 0.0 && b != 0.0 {
            prop_assert!((f + edge_occupancy(-a, -b) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn edge_occupancy_monotone(a in -5.0f64..5.0, b in -5.0f64..5.0, s in 0.0f64..3.0) {
        prop_assert!(edge_occupancy(a - s, b) >= edge_occupancy(a, b));
        prop_assert!(edge_occupancy(a, b - s) >= edge_occupancy(a, b));
    }

    #[test]
    fn gradients_are_linear(seed in 0u64..100_000, alpha in -3.0f64..3.0) {
        let mut r = rng(seed);
        let dims = GridDims::new(5, 4, 0.1).unwrap();
        let a = random_velocity(&mut r, &dims);
        let b = random_velocity(&mut r, &dims);
        let ga = velocity_gradients(&a, &dims).unwrap();
        let gb = velocity_gradients(&b, &dims).unwrap();
        let gc = velocity_gradients(&a.add_scaled(&b, alpha), &dims).unwrap();
        for (x, (y, z)) in [&ga.du_dx, &ga.dv_dy, &ga.du_dy, &ga.dv_dx]
            .into_iter()
            .zip([&gb.du_dx, &gb.dv_dy, &gb.du_dy, &gb.dv_dx].into_iter().zip([&gc.du_dx, &gc.dv_dy, &gc.du_dy, &gc.dv_dx]))
        {
            for k in 0..x.as_slice().len() {
                let want = x.as_slice()[k] + alpha * y.as_slice()[k];
                prop_assert!((z.as_slice()[k] - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn volume_fractions_bounded(cx in 0.0f64..1.0, cy in 0.0f64..1.0, rad in 0.01f64..0.6) {
        let dims = GridDims::new(9, 9, 1.0 / 9.0).unwrap();
        let vols = fluid_volumes(&LevelSet2::from_fn(&dims, |x, y| (x - cx).hypot(y - cy) - rad), &dims).unwrap();
        for f in [&vols.cell, &vols.u_face, &vols.v_face, &vols.node] {
            prop_assert!(f.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
