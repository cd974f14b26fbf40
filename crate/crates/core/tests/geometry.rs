mod common;

use lapaware_core::geometry::{
    capsule_mesh_contact, closest_point_on_segment, closest_point_on_triangle, closest_points_segments,
    point_mesh_distance, segment_triangle_closest, signed_distance, Camera, Capsule, PixelCoord, Pose, Quat, TriMesh,
    Vec3,
};
use proptest::prelude::*;

fn coord() -> impl Strategy<Value = f64> {
    -0.1f64..0.1
}

fn vec3() -> impl Strategy<Value = Vec3> {
    (coord(), coord(), coord()).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn quat() -> impl Strategy<Value = Quat> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
        .prop_filter("non-degenerate", |(w, x, y, z)| w * w + x * x + y * y + z * z > 0.01)
        .prop_map(|(w, x, y, z)| Quat::new(w, x, y, z).normalized())
}

fn triangle() -> impl Strategy<Value = [Vec3; 3]> {
    (vec3(), vec3(), vec3())
        .prop_filter("non-degenerate", |(a, b, c)| (*b - *a).cross(*c - *a).norm() > 1e-6)
        .prop_map(|(a, b, c)| [a, b, c])
}

fn primitive() -> impl Strategy<Value = TriMesh> {
    prop_oneof![
        (0.01f64..0.05).prop_map(|r| TriMesh::icosphere(r, 2)),
        (0.005f64..0.04, 0.005f64..0.04, 0.005f64..0.04).prop_map(|(x, y, z)| TriMesh::cuboid(Vec3::new(x, y, z))),
        (0.003f64..0.02, 0.005f64..0.04).prop_map(|(r, h)| TriMesh::capsule(r, h)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn triangle_closest_point_matches_oracle(p in vec3(), t in triangle()) {
        let (c, _) = closest_point_on_triangle(p, t[0], t[1], t[2]);
        prop_assert!((p.distance(c) - common::point_triangle(p, t)).abs() < 1e-12);
    }

    #[test]
    fn segment_closest_point_matches_oracle(p in vec3(), a in vec3(), b in vec3()) {
        let (c, s) = closest_point_on_segment(p, a, b);
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert!((p.distance(c) - common::point_segment(p, a, b)).abs() < 1e-12);
    }

    #[test]
    fn segment_pair_matches_oracle(p1 in vec3(), q1 in vec3(), p2 in vec3(), q2 in vec3()) {
        let (_, _, c1, c2) = closest_points_segments(p1, q1, p2, q2);
        prop_assert!((c1.distance(c2) - common::segment_segment(p1, q1, p2, q2)).abs() < 1e-12);
    }

    #[test]
    fn segment_triangle_matches_oracle(p in vec3(), q in vec3(), t in triangle()) {
        let (d, on_seg, on_tri, _) = segment_triangle_closest(p, q, t);
        prop_assert!((d - common::segment_triangle(p, q, t)).abs() < 1e-12);
        prop_assert!((on_seg.distance(on_tri) - d).abs() < 1e-12);
    }

    #[test]
    fn mesh_distance_matches_brute_force(p in vec3(), mesh in primitive(), q in quat(), off in vec3()) {
        let mesh = mesh.transformed(&Pose::new(off, q));
        let d = point_mesh_distance(p, &mesh).unwrap();
        prop_assert!((d.distance - common::brute_point_mesh(p, &mesh)).abs() < 1e-12);
        prop_assert!((d.closest.distance(p) - d.distance).abs() < 1e-12);
    }

    #[test]
    fn signed_distance_sign_matches_winding(p in vec3(), mesh in primitive()) {
        let sd = signed_distance(p, &mesh).unwrap();
        let brute = common::brute_point_mesh(p, &mesh);
        prop_assume!(brute > 1e-9);
        prop_assert_eq!(sd < 0.0, common::is_inside(p, &mesh));
        prop_assert!((sd.abs() - brute).abs() < 1e-12);
    }

    #[test]
    fn capsule_contact_matches_oracle(a in vec3(), b in vec3(), r in 0.0005f64..0.01, mesh in primitive()) {
        let cap = Capsule::new(a, b, r).unwrap();
        let got = capsule_mesh_contact(&cap, &mesh).unwrap().map(|c| c.depth);
        let want = common::brute_capsule_depth(&cap, &mesh);
        match (got, want) {
            (None, None) => {}
            (Some(g), Some(w)) => prop_assert!((g - w).abs() < 1e-9, "{g} vs {w}"),
            other => prop_assert!(false, "contact disagreement {:?}", other),
        }
    }

    #[test]
    fn rotation_preserves_length_and_inverts(v in vec3(), q in quat()) {
        let r = q.rotate(v);
        prop_assert!((r.norm() - v.norm()).abs() < 1e-15);
        prop_assert!(q.inverse().rotate(r).distance(v) < 1e-15);
    }

    #[test]
    fn pose_compose_matches_sequential_transform(p in vec3(), a in vec3(), qa in quat(), b in vec3(), qb in quat()) {
        let (pa, pb) = (Pose::new(a, qa), Pose::new(b, qb));
        let composed = pa.compose(&pb).transform_point(p);
        prop_assert!(composed.distance(pa.transform_point(pb.transform_point(p))) < 1e-15);
        prop_assert!(pa.inverse_transform_point(pa.transform_point(p)).distance(p) < 1e-15);
    }

    #[test]
    fn camera_unproject_inverts_projection(u in 0.0f64..127.0, v in 0.0f64..127.0, depth in 0.01f64..0.5) {
        let cam = Camera::looking_down(Vec3::new(0.01, -0.02, 0.25), 110.0, 128).unwrap();
        let p = cam.unproject(PixelCoord { u, v }, depth);
        let back = cam.project_point(p).unwrap();
        prop_assert!((back.u - u).abs() < 1e-9 && (back.v - v).abs() < 1e-9);
        prop_assert!((cam.to_camera_frame(p).z - depth).abs() < 1e-12);
    }
}

#[test]
fn primitives_are_closed_and_wind_outward() {
    for mesh in
        [TriMesh::icosphere(0.02, 2), TriMesh::cuboid(Vec3::new(0.01, 0.02, 0.03)), TriMesh::capsule(0.004, 0.02)]
    {
        assert!(mesh.is_closed());
        assert!((common::winding_number(Vec3::ZERO, &mesh) - 1.0).abs() < 1e-9);
        assert!(common::winding_number(Vec3::new(0.2, 0.0, 0.0), &mesh).abs() < 1e-9);
    }
}

#[test]
fn point_behind_camera_does_not_project() {
    let cam = Camera::looking_down(Vec3::new(0.0, 0.0, 0.25), 110.0, 128).unwrap();
    assert!(cam.project_point(Vec3::new(0.0, 0.0, 0.3)).is_none());
    let c = cam.project_point(Vec3::ZERO).unwrap();
    assert!((c.u - 64.0).abs() < 1e-12 && (c.v - 64.0).abs() < 1e-12);
}
