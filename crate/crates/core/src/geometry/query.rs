//! Closest-point, distance and ray queries against triangle meshes.
//!
//! Every mesh query is a flat scan over the triangles in index order. The scan
//! skips a triangle only when its bounding-sphere lower bound already exceeds
//! the best distance found so far, so results (including the lowest-index
//! tie-break) are identical to an unpruned scan.

use serde::{Deserialize, Serialize};

use super::{GeometryError, TriMesh, Vec3};

/// Slack on the pruning bound so rounding never skips a tying triangle.
const PRUNE_SLACK: f64 = 1e-12;

/// Feature of a triangle on which a closest point lies. Indices are local
/// corners `0..3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feature {
    Vertex(u8),
    Edge(u8, u8),
    Face,
}

/// Line segment `a → b`, possibly degenerate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Capsule {
    pub a: Vec3,
    pub b: Vec3,
    pub radius: f64,
}

impl Capsule {
    pub fn new(a: Vec3, b: Vec3, radius: f64) -> Result<Self, GeometryError> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(GeometryError::InvalidCapsule(radius));
        }
        Ok(Capsule { a, b, radius })
    }

    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }

    /// Copy shifted by `offset`.
    pub fn translated(&self, offset: Vec3) -> Capsule {
        Capsule { a: self.a + offset, b: self.b + offset, radius: self.radius }
    }
}

/// Result of [`point_mesh_distance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshDistance {
    pub distance: f64,
    pub closest: Vec3,
    /// Outward face normal of the triangle holding the closest point.
    pub normal: Vec3,
    pub triangle: usize,
    pub feature: Feature,
}

/// Interference between a capsule and a mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshContact {
    /// Penetration depth, always `> 0`.
    pub depth: f64,
    /// Surface point of the deepest interference.
    pub point: Vec3,
    /// Unit normal pointing out of the mesh, toward the capsule axis.
    pub normal: Vec3,
}

/// Closest point on triangle `abc` to `p`, with the feature it lies on.
pub fn closest_point_on_triangle(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> (Vec3, Feature) {
    // Voronoi-region walk (Ericson, Real-Time Collision Detection 5.1.5).
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (a, Feature::Vertex(0));
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (b, Feature::Vertex(1));
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, Feature::Edge(0, 1));
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (c, Feature::Vertex(2));
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, Feature::Edge(0, 2));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, Feature::Edge(1, 2));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, Feature::Face)
}

/// Closest point on segment `a → b` to `p`, with its parameter in `[0, 1]`.
pub fn closest_point_on_segment(p: Vec3, a: Vec3, b: Vec3) -> (Vec3, f64) {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 <= 0.0 {
        return (a, 0.0);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    (a + ab * t, t)
}

/// Closest points between segments `p1 → q1` and `p2 → q2`, returned as
/// `(s, t, c1, c2)`.
pub fn closest_points_segments(p1: Vec3, q1: Vec3, p2: Vec3, q2: Vec3) -> (f64, f64, Vec3, Vec3) {
    const EPS: f64 = 1e-300;
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(r);
    let (s, t);
    if a <= EPS && e <= EPS {
        return (0.0, 0.0, p1, p2);
    }
    if a <= EPS {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(r);
        if e <= EPS {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 0.0 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    (s, t, p1 + d1 * s, p2 + d2 * t)
}

/// Intersection parameter of segment `p → q` with triangle `abc`, if the
/// segment crosses the triangle's (closed) interior. Parallel segments report
/// no crossing; their contact is found by the edge tests instead.
pub fn segment_triangle_intersection(p: Vec3, q: Vec3, a: Vec3, b: Vec3, c: Vec3) -> Option<f64> {
    let dir = q - p;
    let e1 = b - a;
    let e2 = c - a;
    let h = dir.cross(e2);
    let det = e1.dot(h);
    if det.abs() < 1e-300 {
        return None;
    }
    let inv = 1.0 / det;
    let s = p - a;
    let u = inv * s.dot(h);
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let qv = s.cross(e1);
    let v = inv * dir.dot(qv);
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = inv * e2.dot(qv);
    (0.0..=1.0).contains(&t).then_some(t)
}

/// Closest points between segment `p → q` and triangle `abc`.
///
/// Returns `(distance, point on segment, point on triangle, triangle feature)`.
pub fn segment_triangle_closest(p: Vec3, q: Vec3, tri: [Vec3; 3]) -> (f64, Vec3, Vec3, Feature) {
    let [a, b, c] = tri;
    if let Some(t) = segment_triangle_intersection(p, q, a, b, c) {
        let x = p.lerp(q, t);
        return (0.0, x, x, Feature::Face);
    }
    let mut best = {
        let (cp, f) = closest_point_on_triangle(p, a, b, c);
        (p.distance(cp), p, cp, f)
    };
    let mut consider = |d: f64, s: Vec3, t: Vec3, f: Feature| {
        if d < best.0 {
            best = (d, s, t, f);
        }
    };
    let (cq, fq) = closest_point_on_triangle(q, a, b, c);
    consider(q.distance(cq), q, cq, fq);
    for (i, j) in [(0u8, 1u8), (1, 2), (0, 2)] {
        let (u, v) = (tri[i as usize], tri[j as usize]);
        let (_, t, c1, c2) = closest_points_segments(p, q, u, v);
        let feature = if t <= 0.0 {
            Feature::Vertex(i)
        } else if t >= 1.0 {
            Feature::Vertex(j)
        } else {
            Feature::Edge(i, j)
        };
        consider(c1.distance(c2), c1, c2, feature);
    }
    best
}

/// Distance from segment `a → b` to point `p`.
pub fn segment_point_distance(a: Vec3, b: Vec3, p: Vec3) -> f64 {
    closest_point_on_segment(p, a, b).0.distance(p)
}

/// Unsigned distance from `p` to the mesh surface.
pub fn point_mesh_distance(p: Vec3, mesh: &TriMesh) -> Result<MeshDistance, GeometryError> {
    if mesh.is_empty() {
        return Err(GeometryError::EmptyMesh);
    }
    let mut best: Option<MeshDistance> = None;
    for t in 0..mesh.triangles().len() {
        if let Some(b) = &best {
            let s = mesh.triangle_bounds(t);
            if p.distance(s.center) - s.radius > b.distance + PRUNE_SLACK {
                continue;
            }
        }
        let [a, bb, c] = mesh.triangle(t);
        let (cp, feature) = closest_point_on_triangle(p, a, bb, c);
        let d = p.distance(cp);
        if best.as_ref().is_none_or(|b| d < b.distance) {
            best = Some(MeshDistance { distance: d, closest: cp, normal: mesh.face_normal(t), triangle: t, feature });
        }
    }
    Ok(best.expect("mesh has at least one triangle"))
}

/// Outward pseudo-normal of a closest feature: the face normal for interior
/// points, the sum of incident face normals on an edge, and the angle-weighted
/// sum on a vertex. Its sign against `p − closest` classifies inside/outside
/// correctly on closed meshes even at edges and corners.
pub fn pseudo_normal(mesh: &TriMesh, triangle: usize, feature: Feature) -> Vec3 {
    let tri = mesh.triangles()[triangle];
    match feature {
        Feature::Face => mesh.face_normal(triangle),
        Feature::Edge(i, j) => {
            let (a, b) = (tri[i as usize], tri[j as usize]);
            mesh.edge_triangles(a, b).fold(Vec3::ZERO, |acc, t| acc + mesh.face_normal(t)).normalized()
        }
        Feature::Vertex(i) => {
            let v = tri[i as usize];
            let mut acc = Vec3::ZERO;
            for (t, other) in mesh.triangles().iter().enumerate() {
                let Some(k) = other.iter().position(|&x| x == v) else { continue };
                let corner = mesh.vertices()[v as usize];
                let e1 = mesh.vertices()[other[(k + 1) % 3] as usize] - corner;
                let e2 = mesh.vertices()[other[(k + 2) % 3] as usize] - corner;
                acc += mesh.face_normal(t) * e1.angle_to(e2);
            }
            acc.normalized()
        }
    }
}

/// Signed distance to a mesh surface: negative inside. On open meshes the sign
/// means "behind the nearest face".
pub fn signed_distance(p: Vec3, mesh: &TriMesh) -> Result<f64, GeometryError> {
    let md = point_mesh_distance(p, mesh)?;
    if md.distance == 0.0 {
        return Ok(0.0);
    }
    let n = pseudo_normal(mesh, md.triangle, md.feature);
    Ok(if (p - md.closest).dot(n) < 0.0 { -md.distance } else { md.distance })
}

struct SegmentHit {
    distance: f64,
    on_segment: Vec3,
    on_mesh: Vec3,
    triangle: usize,
    feature: Feature,
}

fn segment_mesh_closest(a: Vec3, b: Vec3, mesh: &TriMesh) -> SegmentHit {
    let mut best: Option<SegmentHit> = None;
    for t in 0..mesh.triangles().len() {
        if let Some(h) = &best {
            let s = mesh.triangle_bounds(t);
            if segment_point_distance(a, b, s.center) - s.radius > h.distance + PRUNE_SLACK {
                continue;
            }
        }
        let (d, on_segment, on_mesh, feature) = segment_triangle_closest(a, b, mesh.triangle(t));
        if best.as_ref().is_none_or(|h| d < h.distance) {
            best = Some(SegmentHit { distance: d, on_segment, on_mesh, triangle: t, feature });
        }
    }
    best.expect("mesh has at least one triangle")
}

/// Deepest interference between a capsule and a mesh, or `None` when they are
/// separated or merely tangent.
///
/// When the capsule axis stays outside the surface, `depth = radius − d` with
/// `d` the minimum segment-triangle distance. On closed meshes the axis may
/// reach inside; then `depth = radius + e`, where `e` is the larger inside
/// depth of the two axis endpoints (zero when the axis only passes through).
/// Both branches meet at `depth = radius` when the axis touches the surface,
/// so depth is continuous in the capsule position.
pub fn capsule_mesh_contact(cap: &Capsule, mesh: &TriMesh) -> Result<Option<MeshContact>, GeometryError> {
    if mesh.is_empty() {
        return Err(GeometryError::EmptyMesh);
    }
    let bounds = mesh.bounds();
    // No triangle closer than this, and a closed surface cannot contain the axis.
    if segment_point_distance(cap.a, cap.b, bounds.center) - bounds.radius >= cap.radius {
        return Ok(None);
    }
    let hit = segment_mesh_closest(cap.a, cap.b, mesh);
    let axis_outside = if hit.distance == 0.0 {
        false
    } else if mesh.is_closed() {
        let n = pseudo_normal(mesh, hit.triangle, hit.feature);
        (hit.on_segment - hit.on_mesh).dot(n) >= 0.0
    } else {
        true
    };
    if axis_outside {
        if hit.distance >= cap.radius {
            return Ok(None);
        }
        let normal = (hit.on_segment - hit.on_mesh) / hit.distance;
        return Ok(Some(MeshContact { depth: cap.radius - hit.distance, point: hit.on_mesh, normal }));
    }
    if !mesh.is_closed() {
        // Axis touches an open surface: no inside to measure.
        let normal = mesh.face_normal(hit.triangle);
        return Ok(Some(MeshContact { depth: cap.radius, point: hit.on_mesh, normal }));
    }
    let inside_depth = |p: Vec3| -> MeshDistance {
        let md = point_mesh_distance(p, mesh).expect("nonempty");
        let n = pseudo_normal(mesh, md.triangle, md.feature);
        let inside = md.distance > 0.0 && (p - md.closest).dot(n) < 0.0;
        MeshDistance { distance: if inside { md.distance } else { 0.0 }, ..md }
    };
    let (ea, eb) = (inside_depth(cap.a), inside_depth(cap.b));
    let (deep, from) = if eb.distance > ea.distance { (eb, cap.b) } else { (ea, cap.a) };
    if deep.distance > 0.0 {
        let normal = (deep.closest - from) / deep.distance;
        Ok(Some(MeshContact { depth: cap.radius + deep.distance, point: deep.closest, normal }))
    } else {
        let normal = pseudo_normal(mesh, hit.triangle, hit.feature);
        Ok(Some(MeshContact { depth: cap.radius, point: hit.on_mesh, normal }))
    }
}

/// Ray-triangle intersection distance (Möller–Trumbore), front and back faces.
pub fn ray_triangle(origin: Vec3, dir: Vec3, tri: [Vec3; 3]) -> Option<f64> {
    let [a, b, c] = tri;
    let e1 = b - a;
    let e2 = c - a;
    let h = dir.cross(e2);
    let det = e1.dot(h);
    if det.abs() < 1e-300 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - a;
    let u = inv * s.dot(h);
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = inv * dir.dot(q);
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = inv * e2.dot(q);
    (t > 1e-12).then_some(t)
}

/// Nearest ray hit distance against a mesh.
pub fn ray_mesh(origin: Vec3, dir: Vec3, mesh: &TriMesh) -> Option<f64> {
    let bounds = mesh.bounds();
    let to_center = bounds.center - origin;
    let along = to_center.dot(dir);
    let perp2 = to_center.norm_squared() - along * along;
    if perp2 > bounds.radius * bounds.radius * (1.0 + 1e-9) + 1e-18 {
        return None;
    }
    let mut best: Option<f64> = None;
    for t in 0..mesh.triangles().len() {
        if let Some(hit) = ray_triangle(origin, dir, mesh.triangle(t)) {
            if best.is_none_or(|b| hit < b) {
                best = Some(hit);
            }
        }
    }
    best
}

/// Nearest ray hit distance against a capsule (`dir` must be unit length).
pub fn ray_capsule(origin: Vec3, dir: Vec3, cap: &Capsule) -> Option<f64> {
    let r2 = cap.radius * cap.radius;
    let mut best: Option<f64> = None;
    let mut take = |t: f64| {
        if t > 1e-12 && best.is_none_or(|b| t < b) {
            best = Some(t);
        }
    };
    // End spheres.
    for center in [cap.a, cap.b] {
        let oc = origin - center;
        let b = oc.dot(dir);
        let c = oc.norm_squared() - r2;
        let disc = b * b - c;
        if disc >= 0.0 {
            let s = disc.sqrt();
            take(-b - s);
            if -b - s <= 1e-12 {
                take(-b + s);
            }
        }
    }
    // Cylinder body.
    let axis = cap.b - cap.a;
    let len = axis.norm();
    if len > 0.0 {
        let w = axis / len;
        let oc = origin - cap.a;
        let d_perp = dir - w * dir.dot(w);
        let o_perp = oc - w * oc.dot(w);
        let a = d_perp.norm_squared();
        if a > 1e-300 {
            let b = d_perp.dot(o_perp);
            let c = o_perp.norm_squared() - r2;
            let disc = b * b - a * c;
            if disc >= 0.0 {
                let s = disc.sqrt();
                for t in [(-b - s) / a, (-b + s) / a] {
                    let along = (oc + dir * t).dot(w);
                    if (0.0..=len).contains(&along) {
                        take(t);
                    }
                }
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane_tri() -> TriMesh {
        TriMesh::new(
            vec![Vec3::new(-1.0, -1.0, 1.0), Vec3::new(2.0, -1.0, 1.0), Vec3::new(-1.0, 2.0, 1.0)],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    #[test]
    fn point_below_single_triangle() {
        let md = point_mesh_distance(Vec3::ZERO, &plane_tri()).unwrap();
        assert!((md.distance - 1.0).abs() < 1e-15);
        assert!((md.normal.z.abs() - 1.0).abs() < 1e-15);
        assert_eq!(md.feature, Feature::Face);
    }

    #[test]
    fn vertices_are_at_distance_zero() {
        let m = TriMesh::icosphere(1.0, 2);
        for &v in m.vertices().iter().step_by(7) {
            assert_eq!(point_mesh_distance(v, &m).unwrap().distance, 0.0);
        }
    }

    #[test]
    fn empty_mesh_errors() {
        let m = TriMesh::new(vec![Vec3::ZERO], vec![]).unwrap();
        assert!(matches!(point_mesh_distance(Vec3::X, &m), Err(GeometryError::EmptyMesh)));
        let cap = Capsule::new(Vec3::ZERO, Vec3::X, 0.1).unwrap();
        assert!(matches!(capsule_mesh_contact(&cap, &m), Err(GeometryError::EmptyMesh)));
    }

    #[test]
    fn signed_distance_sign() {
        let m = TriMesh::icosphere(1.0, 2);
        assert!(signed_distance(Vec3::new(0.0, 0.0, 0.5), &m).unwrap() < 0.0);
        assert!(signed_distance(Vec3::new(0.0, 0.0, 1.5), &m).unwrap() > 0.0);
        // Exactly on a vertex direction, outside: closest feature is a vertex.
        let v = m.vertices()[0] * 1.2;
        assert!(signed_distance(v, &m).unwrap() > 0.0);
        let b = TriMesh::cuboid(Vec3::new(0.5, 0.5, 0.5));
        // Outside near a corner and an edge.
        assert!(signed_distance(Vec3::new(0.6, 0.6, 0.6), &b).unwrap() > 0.0);
        assert!(signed_distance(Vec3::new(0.6, 0.6, 0.0), &b).unwrap() > 0.0);
        assert!(signed_distance(Vec3::new(0.45, 0.45, 0.45), &b).unwrap() < 0.0);
    }

    #[test]
    fn tangent_capsule_is_not_contact() {
        let b = TriMesh::cuboid(Vec3::new(0.5, 0.5, 0.5));
        let cap = Capsule::new(Vec3::new(-0.2, 0.0, 0.75), Vec3::new(0.2, 0.0, 0.75), 0.25).unwrap();
        assert!(capsule_mesh_contact(&cap, &b).unwrap().is_none());
        let cap = cap.translated(Vec3::new(0.0, 0.0, -0.01));
        let c = capsule_mesh_contact(&cap, &b).unwrap().unwrap();
        assert!((c.depth - 0.01).abs() < 1e-12);
        assert!((c.normal - Vec3::Z).norm() < 1e-12);
    }

    #[test]
    fn axis_inside_adds_endpoint_depth() {
        let b = TriMesh::cuboid(Vec3::new(0.5, 0.5, 0.5));
        // Vertical probe entering through the top face, tip 0.1 below it.
        let cap = Capsule::new(Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, 0.4), 0.01).unwrap();
        let c = capsule_mesh_contact(&cap, &b).unwrap().unwrap();
        assert!((c.depth - 0.11).abs() < 1e-12);
        assert!((c.normal - Vec3::Z).norm() < 1e-12);
        assert!((c.point - Vec3::new(0.0, 0.0, 0.5)).norm() < 1e-12);
    }

    #[test]
    fn ray_hits() {
        let m = TriMesh::icosphere(1.0, 2);
        let t = ray_mesh(Vec3::new(0.0, 0.0, -3.0), Vec3::Z, &m).unwrap();
        assert!((t - 2.0).abs() < 5e-3);
        assert!(ray_mesh(Vec3::new(0.0, 2.0, -3.0), Vec3::Z, &m).is_none());
        let cap = Capsule::new(Vec3::new(-1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), 0.1).unwrap();
        let t = ray_capsule(Vec3::new(0.0, 0.0, -3.0), Vec3::Z, &cap).unwrap();
        assert!((t - 2.9).abs() < 1e-12);
        let t = ray_capsule(Vec3::new(-3.0, 0.0, 0.0), Vec3::X, &cap).unwrap();
        assert!((t - 1.9).abs() < 1e-12);
    }
}
