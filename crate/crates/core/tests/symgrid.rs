mod common;

use common::{random_scene, random_velocity, rng, SceneOptions};
use proptest::prelude::*;
use rand::Rng;
use std::collections::HashSet;
use viscid_core::grid::{GridDims, SolidSdf2, VolumeFractions2};
use viscid_core::symgrid::{
    decode, encode, naive_mac_stack, pad, place_delta, unpad, ChannelStack, PaddingSpec, SymIndexMap, SymSite,
    CH_COEFF, CH_DU_DX, CH_DU_DY, CH_DV_DX, CH_DV_DY, CH_SOLID, CH_VOLUME,
};

fn mirror_vols(v: &VolumeFractions2) -> VolumeFractions2 {
    VolumeFractions2 {
        cell: v.cell.flipped_x(),
        u_face: v.u_face.flipped_x(),
        v_face: v.v_face.flipped_x(),
        node: v.node.flipped_x(),
    }
}

fn transpose_vols(v: &VolumeFractions2) -> VolumeFractions2 {
    VolumeFractions2 {
        cell: v.cell.transposed(),
        u_face: v.v_face.transposed(),
        v_face: v.u_face.transposed(),
        node: v.node.transposed(),
    }
}

#[test]
fn padding_201_to_208() {
    let spec = PaddingSpec::centered(201, 201, 3);
    assert_eq!(spec.padded, (208, 208));
    assert_eq!(spec.before, (3, 3));
    let trailing = PaddingSpec::trailing(201, 57, 2);
    assert_eq!(trailing.padded, (204, 60));
    assert_eq!(trailing.before, (0, 0));
}

#[test]
fn index_map_is_a_bijection() {
    let dims = GridDims::new(5, 3, 0.1).unwrap();
    let (sx, sy) = dims.sym_shape();
    assert_eq!((sx, sy), (11, 7));
    let mut seen = HashSet::new();
    for i in 0..dims.nx {
        for j in 0..dims.ny {
            assert!(seen.insert(SymIndexMap::cell(i, j)));
        }
    }
    for i in 0..=dims.nx {
        for j in 0..=dims.ny {
            assert!(seen.insert(SymIndexMap::node(i, j)));
        }
    }
    for i in 0..=dims.nx {
        for j in 0..dims.ny {
            assert!(seen.insert(SymIndexMap::u_face(i, j)));
        }
    }
    for i in 0..dims.nx {
        for j in 0..=dims.ny {
            assert!(seen.insert(SymIndexMap::v_face(i, j)));
        }
    }
    assert_eq!(seen.len(), sx * sy);
    for &(a, b) in &seen {
        let back = match SymIndexMap::site(a, b) {
            SymSite::Cell(i, j) => SymIndexMap::cell(i, j),
            SymSite::Node(i, j) => SymIndexMap::node(i, j),
            SymSite::UFace(i, j) => SymIndexMap::u_face(i, j),
            SymSite::VFace(i, j) => SymIndexMap::v_face(i, j),
        };
        assert_eq!(back, (a, b));
    }
}

#[test]
fn derivative_channels_are_zero_off_their_sites() {
    let mut r = rng(1);
    let s = random_scene(&mut r, 7, 6, SceneOptions::default());
    let mu = s.params.mu_cells(&s.dims);
    let enc = encode(&s.vel_old, &s.vols, &s.solid, Some(&mu), &s.dims).unwrap();
    for a in 0..enc.sx {
        for b in 0..enc.sy {
            let site = SymIndexMap::site(a, b);
            let cell = matches!(site, SymSite::Cell(..));
            let node = matches!(site, SymSite::Node(..));
            if !cell {
                assert_eq!(enc.get(CH_DU_DX, a, b), 0.0);
                assert_eq!(enc.get(CH_DV_DY, a, b), 0.0);
                assert_eq!(enc.get(CH_COEFF, a, b), 0.0);
            }
            if !node {
                assert_eq!(enc.get(CH_DU_DY, a, b), 0.0);
                assert_eq!(enc.get(CH_DV_DX, a, b), 0.0);
            }
            let s = enc.get(CH_SOLID, a, b);
            assert!(s == 0.0 || s == 1.0);
            assert!((0.0..=1.0).contains(&enc.get(CH_VOLUME, a, b)));
        }
    }
}

#[test]
fn decode_ignores_non_face_positions() {
    let mut r = rng(2);
    let dims = GridDims::new(6, 9, 0.1).unwrap();
    let delta = random_velocity(&mut r, &dims);
    let mut stack = place_delta(&delta, &dims).unwrap();
    let base = decode(&stack, &dims).unwrap();
    for a in 0..stack.sx {
        for b in 0..stack.sy {
            match SymIndexMap::site(a, b) {
                SymSite::UFace(..) => stack.set(1, a, b, r.gen_range(-5.0..5.0)),
                SymSite::VFace(..) => stack.set(0, a, b, r.gen_range(-5.0..5.0)),
                _ => {
                    stack.set(0, a, b, r.gen_range(-5.0..5.0));
                    stack.set(1, a, b, r.gen_range(-5.0..5.0));
                }
            }
        }
    }
    assert_eq!(decode(&stack, &dims).unwrap(), base);
}

#[test]
fn place_and_decode_round_trip() {
    let mut r = rng(3);
    let dims = GridDims::new(128, 96, 0.01).unwrap();
    let mut delta = random_velocity(&mut r, &dims);
    // f32-representable so the round trip is exact.
    delta.u.as_mut_slice().iter_mut().for_each(|x| *x = *x as f32 as f64);
    delta.v.as_mut_slice().iter_mut().for_each(|x| *x = *x as f32 as f64);
    let stack = place_delta(&delta, &dims).unwrap();
    assert_eq!(decode(&stack, &dims).unwrap(), delta);
}

#[test]
fn encoding_commutes_with_mirror_and_transpose() {
    let mut r = rng(4);
    for _ in 0..5 {
        let s = random_scene(&mut r, 8, 6, SceneOptions { moving_solid: false, ..Default::default() });
        let mu = s.params.mu_cells(&s.dims);
        let enc = encode(&s.vel_old, &s.vols, &s.solid, Some(&mu), &s.dims).unwrap();

        let solid_m = SolidSdf2 { d: s.solid.d.flipped_x(), velocity: s.solid.velocity.flipped_x() };
        let enc_m =
            encode(&s.vel_old.mirrored_x(), &mirror_vols(&s.vols), &solid_m, Some(&mu.flipped_x()), &s.dims).unwrap();
        assert_eq!(enc_m, enc.mirrored_x());

        let t = s.dims.transposed();
        let solid_t = SolidSdf2 { d: s.solid.d.transposed(), velocity: s.solid.velocity.transposed() };
        let enc_t =
            encode(&s.vel_old.transposed(), &transpose_vols(&s.vols), &solid_t, Some(&mu.transposed()), &t).unwrap();
        assert_eq!(enc_t, enc.transposed());
    }
}

#[test]
fn naive_layout_breaks_mirror_symmetry() {
    let mut r = rng(5);
    let dims = GridDims::new(6, 6, 0.1).unwrap();
    let vel = random_velocity(&mut r, &dims);
    let naive = naive_mac_stack(&vel, &dims).unwrap();
    let naive_m = naive_mac_stack(&vel.mirrored_x(), &dims).unwrap();
    let flipped = {
        let mut f = ChannelStack::zeros(2, naive.sx, naive.sy);
        for c in 0..2 {
            let sign = if c == 0 { -1.0 } else { 1.0 };
            for a in 0..naive.sx {
                for b in 0..naive.sy {
                    f.set(c, a, b, sign * naive.get(c, naive.sx - 1 - a, b));
                }
            }
        }
        f
    };
    assert_ne!(naive_m, flipped);

    let sym = place_delta(&vel, &dims).unwrap();
    let sym_m = place_delta(&vel.mirrored_x(), &dims).unwrap();
    let mut expect = ChannelStack::zeros(2, sym.sx, sym.sy);
    for c in 0..2 {
        let sign = if c == 0 { -1.0 } else { 1.0 };
        for a in 0..sym.sx {
            for b in 0..sym.sy {
                expect.set(c, a, b, sign * sym.get(c, sym.sx - 1 - a, b));
            }
        }
    }
    assert_eq!(sym_m, expect);
}

#[test]
fn padding_fills_solid_with_ones() {
    let stack = ChannelStack::zeros(7, 5, 3);
    let spec = PaddingSpec::centered(5, 3, 2);
    let padded = pad(&stack, &spec).unwrap();
    assert_eq!((padded.sx, padded.sy), (8, 4));
    for a in 0..8 {
        for b in 0..4 {
            let inside = a >= spec.before.0 && a < spec.before.0 + 5 && b >= spec.before.1 && b < spec.before.1 + 3;
            assert_eq!(padded.get(CH_SOLID, a, b), if inside { 0.0 } else { 1.0 });
            assert_eq!(padded.get(CH_VOLUME, a, b), 0.0);
        }
    }
}

proptest! {
    #[test]
    fn pad_unpad_round_trip(sx in 1usize..40, sy in 1usize..40, depth in 0u32..5, seed in 0u64..1000, random in any::<bool>()) {
        let mut r = rng(seed);
        let stack = ChannelStack::from_vec(3, sx, sy, (0..3 * sx * sy).map(|_| r.gen_range(-1.0f32..1.0)).collect()).unwrap();
        let spec = if random { PaddingSpec::random(sx, sy, depth, &mut r) } else { PaddingSpec::centered(sx, sy, depth) };
        prop_assert_eq!(spec.padded.0 % (1 << depth), 0);
        prop_assert_eq!(spec.padded.1 % (1 << depth), 0);
        prop_assert!(spec.padded.0 - sx < (1 << depth));
        let padded = pad(&stack, &spec).unwrap();
        prop_assert_eq!(unpad(&padded, &spec, sx, sy).unwrap(), stack);
    }
}
