//! Shared test support: brute-force geometric oracles, random scenes and
//! random control traces.
#![allow(dead_code)]

use std::f64::consts::PI;

use lapaware_core::contact::needle_chain;
use lapaware_core::geometry::{Capsule, Pose, Quat, TriMesh, Vec3};
use lapaware_core::instrument::{
    tool_geometry, ControlDelta, InstrumentClass, Joints, Needle, Part, ToolState, INSERTION_MAX, INSERTION_MIN,
};
use lapaware_core::scenarios;
use lapaware_core::scene::{Rgb, Role, Scene, TissueClass, TissueObject, Trocar};
use lapaware_core::sim::ToolControl;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn sub(a: Vec3, b: Vec3) -> [f64; 3] {
    [a.x - b.x, a.y - b.y, a.z - b.z]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// Distance from `p` to segment `ab`.
pub fn point_segment(p: Vec3, a: Vec3, b: Vec3) -> f64 {
    let ab = sub(b, a);
    let ap = sub(p, a);
    let len2 = dot(ab, ab);
    let t = if len2 == 0.0 { 0.0 } else { (dot(ap, ab) / len2).clamp(0.0, 1.0) };
    norm([ap[0] - t * ab[0], ap[1] - t * ab[1], ap[2] - t * ab[2]])
}

/// Distance from `p` to a triangle: plane projection when it lands inside
/// (barycentric test), otherwise the nearest edge.
pub fn point_triangle(p: Vec3, t: [Vec3; 3]) -> f64 {
    let [a, b, c] = t;
    let n = cross(sub(b, a), sub(c, a));
    let nn = dot(n, n);
    let h = dot(sub(p, a), n) / nn;
    let q = Vec3::new(p.x - h * n[0], p.y - h * n[1], p.z - h * n[2]);
    let w0 = dot(cross(sub(b, q), sub(c, q)), n);
    let w1 = dot(cross(sub(c, q), sub(a, q)), n);
    let w2 = dot(cross(sub(a, q), sub(b, q)), n);
    if w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0 {
        return h.abs() * nn.sqrt();
    }
    point_segment(p, a, b).min(point_segment(p, b, c)).min(point_segment(p, c, a))
}

/// Distance between segments: endpoint-to-segment candidates plus the
/// interior critical point of the two lines when it lies on both.
pub fn segment_segment(p1: Vec3, q1: Vec3, p2: Vec3, q2: Vec3) -> f64 {
    let mut best = point_segment(p1, p2, q2)
        .min(point_segment(q1, p2, q2))
        .min(point_segment(p2, p1, q1))
        .min(point_segment(q2, p1, q1));
    let d1 = sub(q1, p1);
    let d2 = sub(q2, p2);
    let r = sub(p1, p2);
    let (a, b, c, d, e) = (dot(d1, d1), dot(d1, d2), dot(d2, d2), dot(d1, r), dot(d2, r));
    let den = a * c - b * b;
    if den > 1e-300 * a.max(c) {
        let s = (b * e - c * d) / den;
        let t = (a * e - b * d) / den;
        if (0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&t) {
            let x = [r[0] + s * d1[0] - t * d2[0], r[1] + s * d1[1] - t * d2[1], r[2] + s * d1[2] - t * d2[2]];
            best = best.min(norm(x));
        }
    }
    best
}

/// Whether segment `pq` crosses the triangle (signed volumes).
pub fn segment_crosses(p: Vec3, q: Vec3, t: [Vec3; 3]) -> bool {
    let [a, b, c] = t;
    let vol = |x: Vec3, y: Vec3, z: Vec3, w: Vec3| dot(cross(sub(y, x), sub(z, x)), sub(w, x));
    let sp = vol(a, b, c, p);
    let sq = vol(a, b, c, q);
    if sp * sq > 0.0 || (sp == 0.0 && sq == 0.0) {
        return false;
    }
    let s1 = vol(p, q, a, b);
    let s2 = vol(p, q, b, c);
    let s3 = vol(p, q, c, a);
    (s1 >= 0.0 && s2 >= 0.0 && s3 >= 0.0) || (s1 <= 0.0 && s2 <= 0.0 && s3 <= 0.0)
}

pub fn segment_triangle(p: Vec3, q: Vec3, t: [Vec3; 3]) -> f64 {
    if segment_crosses(p, q, t) {
        return 0.0;
    }
    point_triangle(p, t)
        .min(point_triangle(q, t))
        .min(segment_segment(p, q, t[0], t[1]))
        .min(segment_segment(p, q, t[1], t[2]))
        .min(segment_segment(p, q, t[2], t[0]))
}

pub fn brute_point_mesh(p: Vec3, mesh: &TriMesh) -> f64 {
    (0..mesh.triangles().len()).map(|i| point_triangle(p, mesh.triangle(i))).fold(f64::INFINITY, f64::min)
}

/// Generalized winding number: solid angles of all triangles over 4π.
pub fn winding_number(p: Vec3, mesh: &TriMesh) -> f64 {
    let mut total = 0.0;
    for i in 0..mesh.triangles().len() {
        let [a, b, c] = mesh.triangle(i);
        let (ra, rb, rc) = (sub(a, p), sub(b, p), sub(c, p));
        let (la, lb, lc) = (norm(ra), norm(rb), norm(rc));
        let num = dot(ra, cross(rb, rc));
        let den = la * lb * lc + dot(ra, rb) * lc + dot(rb, rc) * la + dot(rc, ra) * lb;
        total += 2.0 * num.atan2(den);
    }
    total / (4.0 * PI)
}

pub fn is_inside(p: Vec3, mesh: &TriMesh) -> bool {
    winding_number(p, mesh) > 0.5
}

/// Exhaustive capsule-mesh penetration depth.
pub fn brute_capsule_depth(cap: &Capsule, mesh: &TriMesh) -> Option<f64> {
    let d = (0..mesh.triangles().len())
        .map(|i| segment_triangle(cap.a, cap.b, mesh.triangle(i)))
        .fold(f64::INFINITY, f64::min);
    let closed = mesh.is_closed();
    let (ina, inb) = (closed && is_inside(cap.a, mesh), closed && is_inside(cap.b, mesh));
    if closed && (d == 0.0 || ina || inb) {
        let ea = if ina { brute_point_mesh(cap.a, mesh) } else { 0.0 };
        let eb = if inb { brute_point_mesh(cap.b, mesh) } else { 0.0 };
        return Some(cap.radius + ea.max(eb));
    }
    (d < cap.radius).then_some(cap.radius - d)
}

/// Every (tool, part, object) pair in contact with its depth, by exhaustive
/// search. A needle reports its deepest link.
pub fn brute_contacts(scene: &Scene, tools: &[ToolState]) -> Vec<(String, Part, String, f64)> {
    let mut out = Vec::new();
    for tool in tools {
        let trocar = scene.trocar(&tool.trocar_id).unwrap();
        let g = tool_geometry(tool, trocar).unwrap();
        let mut parts: Vec<(Part, Vec<Capsule>)> =
            g.contact_capsules().into_iter().map(|(p, c)| (p, vec![c])).collect();
        let chain = needle_chain(tool, &g);
        if !chain.is_empty() {
            parts.push((Part::Needle, chain));
        }
        for (part, caps) in &parts {
            for obj in &scene.objects {
                let deepest = caps
                    .iter()
                    .filter_map(|c| brute_capsule_depth(c, &obj.world_mesh))
                    .fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.max(d))));
                if let Some(depth) = deepest {
                    out.push((tool.id.clone(), *part, obj.id.clone(), depth));
                }
            }
        }
    }
    out.sort_by(|a, b| (&a.0, a.1, &a.2).cmp(&(&b.0, b.1, &b.2)));
    out
}

pub fn random_unit(r: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn random_quat(r: &mut ChaCha8Rng) -> Quat {
    Quat::from_axis_angle(random_unit(r), r.random_range(0.0..PI))
}

fn object(id: String, mesh: TriMesh, pose: Pose) -> TissueObject {
    let color = Rgb::new(0.5, 0.5, 0.5);
    TissueObject {
        id,
        tissue_class: TissueClass::Generic,
        role: Role::Neutral,
        world_mesh: mesh.transformed(&pose),
        mesh,
        pose,
        base_color: color,
        current_color: color,
    }
}

/// A scene of 1–4 random primitives near the origin (at most 1000 triangles
/// in total) and 1–3 random tools aimed at them.
pub fn random_scene(r: &mut ChaCha8Rng) -> (Scene, Vec<ToolState>) {
    let mut scene = scenarios::minimal();
    scene.objects.clear();
    let mut budget = 1000;
    for k in 0..r.random_range(1..=4) {
        let mesh = match r.random_range(0..3) {
            0 => TriMesh::icosphere(r.random_range(0.008..0.04), r.random_range(0..=2)),
            1 => TriMesh::cuboid(Vec3::new(
                r.random_range(0.005..0.03),
                r.random_range(0.005..0.03),
                r.random_range(0.005..0.03),
            )),
            _ => TriMesh::capsule(r.random_range(0.003..0.015), r.random_range(0.005..0.03)),
        };
        if mesh.triangles().len() > budget {
            continue;
        }
        budget -= mesh.triangles().len();
        let pos = Vec3::new(r.random_range(-0.04..0.04), r.random_range(-0.04..0.04), r.random_range(-0.04..0.04));
        scene.objects.push(object(format!("obj{k}"), mesh, Pose::new(pos, random_quat(r))));
    }
    if scene.objects.is_empty() {
        scene.objects.push(object("obj0".into(), TriMesh::cuboid(Vec3::new(0.01, 0.01, 0.01)), Pose::IDENTITY));
    }

    let classes =
        [InstrumentClass::Grasper, InstrumentClass::Scissors, InstrumentClass::NeedleDriver, InstrumentClass::Hook];
    scene.trocars.clear();
    let mut tools = Vec::new();
    for k in 0..r.random_range(1..=3) {
        let aim = scene.objects[r.random_range(0..scene.objects.len())].pose.position;
        let mut out = random_unit(r);
        out.z = out.z.abs() + 0.3;
        let point = aim + out.normalized() * r.random_range(0.1..0.2);
        let id = format!("port{k}");
        scene.trocars.push(Trocar { id: id.clone(), point, rest_axis: (aim - point).normalized() });
        let class = classes[r.random_range(0..classes.len())];
        let reach = (aim - point).norm() + r.random_range(-0.03..0.03);
        let joints = Joints {
            pitch: r.random_range(-0.15..0.15),
            yaw: r.random_range(-0.15..0.15),
            roll: r.random_range(-PI..PI),
            insertion: reach.clamp(INSERTION_MIN, INSERTION_MAX),
            jaw: r.random_range(0.0..1.0),
        };
        let held_needle = (class == InstrumentClass::NeedleDriver).then(|| Needle {
            radius: r.random_range(0.005..0.015),
            arc_span: PI,
            frame: Pose::IDENTITY,
        });
        tools.push(ToolState { id: format!("tool{k}"), instrument_class: class, trocar_id: id, joints, held_needle });
    }
    (scene, tools)
}

/// Random joint deltas, including out-of-limit and non-finite values.
pub fn random_delta(r: &mut ChaCha8Rng) -> ControlDelta {
    let mut x = |m: f64| match r.random_range(0..50) {
        0 => f64::NAN,
        1 => f64::INFINITY,
        _ => r.random_range(-m..m),
    };
    ControlDelta { d_pitch: x(0.1), d_yaw: x(0.1), d_roll: x(0.1), d_insertion: x(0.01), d_jaw: x(0.2) }
}

/// Smooth wandering controls for every tool in the scene: each tick nudges
/// a tool toward a slowly drifting joint target.
pub fn wander_script(scene: &Scene, ticks: usize, seed: u64) -> Vec<Vec<ToolControl>> {
    let mut r = rng(seed);
    let mut targets: Vec<Joints> = scene.tools.iter().map(|t| t.joints).collect();
    let mut current = targets.clone();
    let mut out = Vec::with_capacity(ticks);
    for t in 0..ticks {
        if t % 60 == 0 {
            for j in &mut targets {
                *j = Joints {
                    pitch: r.random_range(-0.3..0.3),
                    yaw: r.random_range(-0.3..0.3),
                    roll: r.random_range(-PI..PI),
                    insertion: r.random_range(0.05..0.2),
                    jaw: r.random_range(0.0..1.0),
                };
            }
        }
        let mut controls = Vec::new();
        for (i, spec) in scene.tools.iter().enumerate() {
            let (g, c) = (targets[i], &mut current[i]);
            let delta = ControlDelta {
                d_pitch: (g.pitch - c.pitch).clamp(-0.01, 0.01),
                d_yaw: (g.yaw - c.yaw).clamp(-0.01, 0.01),
                d_roll: (g.roll - c.roll).clamp(-0.03, 0.03),
                d_insertion: (g.insertion - c.insertion).clamp(-0.002, 0.002),
                d_jaw: (g.jaw - c.jaw).clamp(-0.05, 0.05),
            };
            c.pitch += delta.d_pitch;
            c.yaw += delta.d_yaw;
            c.roll += delta.d_roll;
            c.insertion += delta.d_insertion;
            c.jaw += delta.d_jaw;
            controls.push(ToolControl { tool_id: spec.id.clone(), delta });
        }
        out.push(controls);
    }
    out
}
