mod common;

use lapaware_core::contact::{classify_depth, detect_contacts, DepthClass};
use lapaware_core::instrument::{apply_control, tool_geometry, ToolState};
use lapaware_core::scenarios;
use lapaware_core::scene::Scene;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_scenes_match_brute_force(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let (scene, tools) = common::random_scene(&mut r);
        let mut got: Vec<_> = detect_contacts(&scene, &tools, 0)
            .into_iter()
            .map(|c| (c.tool_id, c.part, c.object_id, c.depth))
            .collect();
        got.sort_by(|a, b| (&a.0, a.1, &a.2).cmp(&(&b.0, b.1, &b.2)));
        let want = common::brute_contacts(&scene, &tools);
        prop_assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            prop_assert_eq!((&g.0, g.1, &g.2), (&w.0, w.1, &w.2));
            prop_assert!((g.3 - w.3).abs() < 1e-9);
        }
    }
}

/// Scissors posed at the end of the correct cutting trace.
fn cutting_pose() -> (Scene, Vec<ToolState>) {
    let scene = scenarios::cholecystectomy();
    let mut tools: Vec<_> = scene.tools.iter().map(ToolState::from_spec).collect();
    for c in scenarios::fig7_correct_script(&scene).iter().flatten() {
        tools[0] = apply_control(&tools[0], &c.delta);
    }
    (scene, tools)
}

#[test]
fn contacts_carry_surface_point_and_outward_normal() {
    let (scene, tools) = cutting_pose();
    let events = detect_contacts(&scene, &tools, 7);
    let artery = events.iter().find(|e| e.object_id == "cystic_artery").expect("scissors reach the artery");
    assert_eq!(artery.tick, 7);
    assert!((artery.normal.norm() - 1.0).abs() < 1e-12);
    let mesh = &scene.object("cystic_artery").unwrap().world_mesh;
    assert!(common::brute_point_mesh(artery.point, mesh) < 1e-12);
    let g = tool_geometry(&tools[0], scene.trocar("right_port").unwrap()).unwrap();
    assert!(g.tip.distance(artery.point) < 0.02);
}

#[test]
fn depth_classification_is_strict() {
    let (scene, tools) = cutting_pose();
    let events = detect_contacts(&scene, &tools, 0);
    assert!(!events.is_empty());
    for mut e in events {
        e.depth = 0.004;
        assert_eq!(classify_depth(&e, 0.004), DepthClass::SafeContact);
        e.depth = 0.004 + 1e-12;
        assert_eq!(classify_depth(&e, 0.004), DepthClass::UnsafeDepth);
    }
}
