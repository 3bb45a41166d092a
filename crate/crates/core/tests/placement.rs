mod common;

use proptest::prelude::*;

use spatial_place::geometry::{aabb_distance, Workspace};
use spatial_place::placement::{
    apply_collision_mask, compose_fields, field_for_pair, placement_field, FieldSampler, PlacementField,
    PlacementParams,
};
use spatial_place::relation::{direction_vector, CanonicalRelation, ObjectDir, TableRegion};
use spatial_place::scene::{GroundedPair, Scene};

fn two_object_scene(ax: f64, ay: f64, bx: f64, by: f64) -> Scene {
    common::scene(vec![
        common::object(0, "mug", [ax, ay, ax + 0.06, ay + 0.06]),
        common::object(1, "plate", [bx, by, bx + 0.08, by + 0.08]),
    ])
}

fn arb_pair() -> impl Strategy<Value = GroundedPair> {
    prop_oneof![
        (0..9usize).prop_map(|i| GroundedPair {
            object_index: 2,
            relation: CanonicalRelation::Region(TableRegion::ALL[i]),
        }),
        (0..2usize, 0..8usize).prop_map(|(o, d)| GroundedPair {
            object_index: o,
            relation: CanonicalRelation::Direction(ObjectDir::ALL[d]),
        }),
    ]
}

fn arb_scene() -> impl Strategy<Value = Scene> {
    (-0.45..-0.1f64, -0.25..0.15f64, 0.05..0.38f64, -0.25..0.15f64)
        .prop_map(|(ax, ay, bx, by)| two_object_scene(ax, ay, bx, by))
}

fn close(a: &PlacementField, b: &PlacementField) -> bool {
    a.mask == b.mask && a.probs.iter().zip(&b.probs).all(|(x, y)| (x - y).abs() <= 1e-12 * x.abs().max(1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn composition_ignores_order(scene in arb_scene(), a in arb_pair(), b in arb_pair(), c in arb_pair()) {
        let p = PlacementParams::default();
        let [fa, fb, fc] = [a, b, c].map(|g| field_for_pair(&g, &scene, &p).unwrap());
        let abc = compose_fields(&[fa.clone(), fb.clone(), fc.clone()]).unwrap();
        for perm in [[&fb, &fa, &fc], [&fc, &fb, &fa], [&fa, &fc, &fb], [&fb, &fc, &fa]] {
            let other = compose_fields(&perm.map(Clone::clone)).unwrap();
            prop_assert!(close(&abc, &other));
        }
        let ab = compose_fields(&[fa.clone(), fb.clone()]).unwrap();
        let ba = compose_fields(&[fb, fa]).unwrap();
        prop_assert!(close(&ab, &ba));
    }

    #[test]
    fn positive_cells_satisfy_every_predicate(scene in arb_scene(), a in arb_pair(), b in arb_pair()) {
        let p = PlacementParams::default();
        let f = placement_field(&[a, b], &scene, &p).unwrap();
        for idx in 0..f.len() {
            if f.probs[idx] > 0.0 {
                prop_assert!(f.mask[idx]);
                let c = f.cell_center(idx);
                prop_assert!(f.constraints.iter().all(|k| k.admits(c)));
                prop_assert!(scene.objects.iter().all(|o| aabb_distance(c, &o.aabb) >= p.placed_radius));
            }
        }
    }

    #[test]
    fn normalization_is_idempotent(scene in arb_scene(), a in arb_pair()) {
        let f = placement_field(&[a], &scene, &PlacementParams::default()).unwrap();
        if let Ok(once) = f.normalize() {
            prop_assert!((once.total_mass() - 1.0).abs() < 1e-12);
            let twice = once.normalize().unwrap();
            prop_assert!(close(&once, &twice));
        }
    }
}

#[test]
fn sampled_points_clear_every_object() {
    let p = PlacementParams::default();
    let scene = two_object_scene(-0.2, -0.05, 0.05, 0.0);
    let f = apply_collision_mask(&PlacementField::uniform(Workspace::default(), p.resolution), &scene, p.placed_radius);
    let mut s = FieldSampler::new(&f, 1).unwrap();
    let bounds = scene.workspace.bounds();
    for _ in 0..10_000 {
        let x = s.sample();
        assert!(bounds.contains(x));
        for o in &scene.objects {
            assert!(aabb_distance(x, &o.aabb) >= p.placed_radius, "{x:?} too close to {}", o.name);
        }
    }
}

#[test]
fn sampler_matches_cell_masses() {
    // coarse 5x3 grid so 100k draws resolve each cell well
    let mut f = PlacementField::empty(Workspace::default(), 0.2);
    for (i, p) in f.probs.iter_mut().enumerate() {
        *p = 1.0 + (i % 4) as f64 + if i == 7 { 5.0 } else { 0.0 };
    }
    f.probs[3] = 0.0;
    let f = f.normalize().unwrap();
    let mut s = FieldSampler::new(&f, 99).unwrap();
    let n = 100_000;
    let mut counts = vec![0usize; f.len()];
    for _ in 0..n {
        counts[s.sample_cell()] += 1;
    }
    assert_eq!(counts[3], 0);
    let tv: f64 = counts.iter().zip(&f.probs).map(|(&c, &p)| (c as f64 / n as f64 - p).abs()).sum::<f64>() / 2.0;
    assert!(tv <= 0.01, "total variation {tv}");
}

#[test]
fn two_object_composition_keeps_the_overlap() {
    // left of the plate and behind the mug
    let p = PlacementParams::default();
    let scene = two_object_scene(-0.25, -0.2, 0.05, 0.0);
    let pairs = [
        GroundedPair { object_index: 1, relation: CanonicalRelation::Direction(ObjectDir::Left) },
        GroundedPair { object_index: 0, relation: CanonicalRelation::Direction(ObjectDir::Behind) },
    ];
    let single: Vec<_> = pairs.iter().map(|g| field_for_pair(g, &scene, &p).unwrap()).collect();
    let f = placement_field(&pairs, &scene, &p).unwrap();
    assert!(f.feasible_cells() > 0);
    for idx in 0..f.len() {
        let both = single.iter().all(|s| s.mask[idx]);
        if f.mask[idx] {
            assert!(both);
        }
        if f.probs[idx] > 0.0 {
            let c = f.cell_center(idx);
            let plate = scene.objects[1].aabb.center();
            let mug = scene.objects[0].aabb.center();
            assert!(c.x < plate.x && c.y > mug.y);
        }
    }
    let left = direction_vector(ObjectDir::Left);
    assert!(left.x < 0.0 && left.y == 0.0);
}

#[test]
fn region_fields_stay_in_their_cell() {
    let p = PlacementParams::default();
    let scene = two_object_scene(-0.45, -0.25, 0.3, 0.2);
    for region in TableRegion::ALL {
        let g = GroundedPair { object_index: 2, relation: CanonicalRelation::Region(region) };
        let f = field_for_pair(&g, &scene, &p).unwrap();
        let cell = spatial_place::relation::region_bounds(region, &scene.workspace);
        let mut best = (0.0, 0);
        for idx in 0..f.len() {
            if f.probs[idx] > 0.0 {
                assert!(cell.contains(f.cell_center(idx)));
            }
            if f.probs[idx] > best.0 {
                best = (f.probs[idx], idx);
            }
        }
        let peak = f.cell_center(best.1);
        let center = cell.center();
        assert!((peak.x - center.x).abs() <= 0.01 && (peak.y - center.y).abs() <= 0.01, "{region:?}");
    }
}
