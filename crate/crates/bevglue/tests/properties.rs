//! Randomized cross-module properties.

use bevglue::geometry::{wrap_angle, Point2, Se2Pose};
use bevglue::graph::{ObjectGraph, TrackedBox};
use bevglue::matching::{match_graphs, MatchConfig};
use bevglue::pose::{solve_procrustes, Correspondences};
use bevglue::wire::{decode, encode, AlignmentMessage};
use proptest::prelude::*;

fn finite_angle() -> impl Strategy<Value = f64> {
    -50.0..50.0f64
}

fn small_coord() -> impl Strategy<Value = f64> {
    -100.0..100.0f64
}

fn arb_pose() -> impl Strategy<Value = Se2Pose> {
    (finite_angle(), small_coord(), small_coord())
        .prop_map(|(th, x, y)| Se2Pose::new(th, x, y).unwrap())
}

fn arb_box() -> impl Strategy<Value = (f64, f64, f64, f64, f64)> {
    (
        small_coord(),
        small_coord(),
        0.5..12.0f64,
        0.5..4.0f64,
        -3.1..3.1f64,
    )
}

/// Distinct-position boxes with sequential ids.
fn arb_scene(max: usize) -> impl Strategy<Value = Vec<TrackedBox>> {
    prop::collection::vec(arb_box(), 1..=max).prop_map(|raw| {
        let mut boxes: Vec<TrackedBox> = Vec::new();
        for (i, (x, y, l, w, yaw)) in raw.into_iter().enumerate() {
            // Nudge coincident centers apart so edges stay well-defined.
            let x = x + i as f64 * 1e-3;
            boxes.push(TrackedBox::new(x, y, l, w, yaw, i as u32).unwrap());
        }
        boxes
    })
}

fn transform_scene(boxes: &[TrackedBox], pose: &Se2Pose) -> Vec<TrackedBox> {
    boxes
        .iter()
        .map(|b| {
            let c = pose.apply(b.center());
            TrackedBox::new(
                c.x(),
                c.y(),
                b.length(),
                b.width(),
                b.yaw() + pose.theta(),
                b.track_id(),
            )
            .unwrap()
        })
        .collect()
}

proptest! {
    #[test]
    fn wrap_angle_is_idempotent_and_in_range(a in finite_angle()) {
        let w = wrap_angle(a).unwrap();
        prop_assert!(w > -std::f64::consts::PI && w <= std::f64::consts::PI);
        prop_assert_eq!(wrap_angle(w).unwrap(), w);
    }

    #[test]
    fn compose_then_inverse_is_identity(p in arb_pose(), q in arb_pose(), pt in (small_coord(), small_coord())) {
        let point = Point2::new(pt.0, pt.1).unwrap();
        let comp = p.compose(&q);
        let via_comp = comp.apply(point);
        let via_seq = p.apply(q.apply(point));
        prop_assert!((via_comp.x() - via_seq.x()).abs() < 1e-9);
        prop_assert!((via_comp.y() - via_seq.y()).abs() < 1e-9);

        let back = p.inverse().apply(p.apply(point));
        prop_assert!((back.x() - point.x()).abs() < 1e-9);
        prop_assert!((back.y() - point.y()).abs() < 1e-9);
    }

    #[test]
    fn edge_features_survive_rigid_motion(scene in arb_scene(6), pose in arb_pose()) {
        let moved = transform_scene(&scene, &pose);
        let g0 = ObjectGraph::build(&scene).unwrap();
        let g1 = ObjectGraph::build(&moved).unwrap();
        for m in 0..g0.len() {
            for n in 0..g0.len() {
                if m == n {
                    continue;
                }
                let (a, b) = (g0.edge(m, n), g1.edge(m, n));
                prop_assert!((a.rho - b.rho).abs() < 1e-8);
                if !a.degenerate {
                    prop_assert!(wrap_angle(a.theta - b.theta).unwrap().abs() < 1e-8);
                    prop_assert!(wrap_angle(a.psi_rel - b.psi_rel).unwrap().abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn matching_a_moved_copy_recovers_the_pose(scene in arb_scene(5), pose in arb_pose()) {
        // Well-separated boxes only: aliasing is legitimately ambiguous.
        let mut ok = true;
        'sep: for i in 0..scene.len() {
            for j in 0..i {
                if scene[i].center().distance_to(&scene[j].center()) < 2.0 {
                    ok = false;
                    break 'sep;
                }
            }
        }
        prop_assume!(ok && scene.len() >= 2);
        let moved = transform_scene(&scene, &pose);
        let g0 = ObjectGraph::build(&moved).unwrap();
        let g1 = ObjectGraph::build(&scene).unwrap();
        let m = match_graphs(&g0, &g1, None, &MatchConfig::default()).unwrap();
        prop_assert_eq!(m.len(), scene.len());
        let (p, q): (Vec<_>, Vec<_>) = m
            .pairs()
            .iter()
            .map(|&(a, b)| (g1.center(b), g0.center(a)))
            .unzip();
        let est = solve_procrustes(&Correspondences::new(p, q).unwrap());
        prop_assume!(est.is_ok());
        let est = est.unwrap().pose;
        prop_assert!(wrap_angle(est.theta() - pose.theta()).unwrap().abs() < 1e-6);
        prop_assert!((est.tx() - pose.tx()).abs() < 1e-6);
        prop_assert!((est.ty() - pose.ty()).abs() < 1e-6);
    }

    #[test]
    fn wire_round_trip_is_lossless_after_f32(scene in arb_scene(8), sender in any::<u32>(), t in any::<u32>()) {
        let f32_clean: Vec<TrackedBox> = scene
            .iter()
            .map(|b| {
                TrackedBox::new(
                    f64::from(b.x() as f32),
                    f64::from(b.y() as f32),
                    f64::from(b.length() as f32),
                    f64::from(b.width() as f32),
                    f64::from(b.yaw() as f32),
                    b.track_id(),
                )
                .unwrap()
            })
            .collect();
        let msg = AlignmentMessage {
            sender_id: sender,
            timestep: t,
            boxes: f32_clean,
        };
        let decoded = decode(&encode(&msg).unwrap()).unwrap();
        prop_assert_eq!(decoded, msg);
    }

    #[test]
    fn decode_never_panics_on_mutated_bytes(
        scene in arb_scene(4),
        flips in prop::collection::vec((0usize..200, any::<u8>()), 0..8),
    ) {
        let msg = AlignmentMessage { sender_id: 1, timestep: 2, boxes: scene };
        let mut bytes = encode(&msg).unwrap();
        for (pos, val) in flips {
            let idx = pos % bytes.len();
            bytes[idx] = val;
        }
        let _ = decode(&bytes);
    }
}
