use std::collections::{BTreeMap, HashMap};

use super::{GeometryError, Pose, Vec3};

/// Minimum triangle area accepted by [`TriMesh::new`], in m².
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

/// Indexed triangle mesh with counter-clockwise (outward) winding.
///
/// Construction validates indices and rejects degenerate triangles. Per-triangle
/// bounding spheres are cached for exact pruning in distance queries.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    tri_bounds: Vec<Sphere>,
    bounds: Sphere,
    closed: bool,
}

/// Bounding sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sphere {
    pub center: Vec3,
    pub radius: f64,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Result<Self, GeometryError> {
        if let Some(i) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(GeometryError::InvalidMesh(format!("vertex {i} is not finite")));
        }
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&i) = tri.iter().find(|&&i| i as usize >= vertices.len()) {
                return Err(GeometryError::InvalidMesh(format!(
                    "triangle {t} references vertex {i} but mesh has {} vertices",
                    vertices.len()
                )));
            }
            let [a, b, c] = tri.map(|i| vertices[i as usize]);
            let area = 0.5 * (b - a).cross(c - a).norm();
            if !(area > MIN_TRIANGLE_AREA) {
                return Err(GeometryError::InvalidMesh(format!("triangle {t} is degenerate (area {area:e})")));
            }
        }
        let tri_bounds = triangles
            .iter()
            .map(|tri| {
                let [a, b, c] = tri.map(|i| vertices[i as usize]);
                let center = (a + b + c) / 3.0;
                let radius = center.distance(a).max(center.distance(b)).max(center.distance(c));
                Sphere { center, radius }
            })
            .collect();
        let bounds = bounding_sphere(&vertices);
        let closed = is_closed(&triangles);
        Ok(TriMesh { vertices, triangles, tri_bounds, bounds, closed })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, t: usize) -> [Vec3; 3] {
        self.triangles[t].map(|i| self.vertices[i as usize])
    }

    pub fn triangle_bounds(&self, t: usize) -> Sphere {
        self.tri_bounds[t]
    }

    /// Sphere containing every vertex.
    pub fn bounds(&self) -> Sphere {
        self.bounds
    }

    /// Whether every edge is shared by exactly two triangles (a watertight
    /// surface with a meaningful inside).
    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Outward unit normal of triangle `t`.
    pub fn face_normal(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.triangle(t);
        (b - a).cross(c - a).normalized()
    }

    /// Axis-aligned bounds `(min, max)` of the vertices, `None` when empty.
    pub fn aabb(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), &v| (lo.min(v), hi.max(v))))
    }

    pub fn transformed(&self, pose: &Pose) -> TriMesh {
        let vertices = self.vertices.iter().map(|&v| pose.transform_point(v)).collect();
        // Rigid transforms preserve areas and indices, so revalidation cannot fail.
        TriMesh::new(vertices, self.triangles.clone()).expect("rigid transform preserves validity")
    }

    /// UV sphere subdivided from an icosahedron. `subdivisions` = 2 gives 320
    /// triangles, 3 gives 1280.
    pub fn icosphere(radius: f64, subdivisions: u32) -> TriMesh {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut verts: Vec<Vec3> = [
            (-1.0, t, 0.0),
            (1.0, t, 0.0),
            (-1.0, -t, 0.0),
            (1.0, -t, 0.0),
            (0.0, -1.0, t),
            (0.0, 1.0, t),
            (0.0, -1.0, -t),
            (0.0, 1.0, -t),
            (t, 0.0, -1.0),
            (t, 0.0, 1.0),
            (-t, 0.0, -1.0),
            (-t, 0.0, 1.0),
        ]
        .iter()
        .map(|&(x, y, z)| Vec3::new(x, y, z).normalized())
        .collect();
        let mut tris: Vec<[u32; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..subdivisions {
            let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
            let mut mid = |a: u32, b: u32, verts: &mut Vec<Vec3>| -> u32 {
                let key = (a.min(b), a.max(b));
                *midpoints.entry(key).or_insert_with(|| {
                    let m = ((verts[a as usize] + verts[b as usize]) * 0.5).normalized();
                    verts.push(m);
                    (verts.len() - 1) as u32
                })
            };
            let mut next = Vec::with_capacity(tris.len() * 4);
            for &[a, b, c] in &tris {
                let ab = mid(a, b, &mut verts);
                let bc = mid(b, c, &mut verts);
                let ca = mid(c, a, &mut verts);
                next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            tris = next;
        }
        let verts = verts.into_iter().map(|v| v * radius).collect();
        TriMesh::new(verts, tris).expect("icosphere is valid")
    }

    /// Axis-aligned box centered at the origin: 8 vertices, 12 triangles.
    pub fn cuboid(half_extents: Vec3) -> TriMesh {
        let Vec3 { x, y, z } = half_extents;
        let verts = vec![
            Vec3::new(-x, -y, -z),
            Vec3::new(x, -y, -z),
            Vec3::new(x, y, -z),
            Vec3::new(-x, y, -z),
            Vec3::new(-x, -y, z),
            Vec3::new(x, -y, z),
            Vec3::new(x, y, z),
            Vec3::new(-x, y, z),
        ];
        let tris = vec![
            [0, 2, 1],
            [0, 3, 2],
            [4, 5, 6],
            [4, 6, 7],
            [0, 1, 5],
            [0, 5, 4],
            [1, 2, 6],
            [1, 6, 5],
            [2, 3, 7],
            [2, 7, 6],
            [3, 0, 4],
            [3, 4, 7],
        ];
        TriMesh::new(verts, tris).expect("box is valid")
    }

    /// Closed capsule along local Z: a cylinder of half length `half_length`
    /// capped by hemispheres. Fixed resolution of 16 segments and 4
    /// latitude rings per cap.
    pub fn capsule(radius: f64, half_length: f64) -> TriMesh {
        const SEGMENTS: u32 = 16;
        const RINGS: u32 = 4;
        let mut verts = vec![Vec3::new(0.0, 0.0, half_length + radius)];
        // Latitude rings from the top pole down; the two equator rings sit at
        // the cylinder ends.
        let mut ring_specs: Vec<(f64, f64)> = Vec::new();
        for i in 1..=RINGS {
            let phi = std::f64::consts::FRAC_PI_2 * f64::from(i) / f64::from(RINGS);
            ring_specs.push((half_length + radius * phi.cos(), radius * phi.sin()));
        }
        for i in (1..=RINGS).rev() {
            let phi = std::f64::consts::FRAC_PI_2 * f64::from(i) / f64::from(RINGS);
            ring_specs.push((-half_length - radius * phi.cos(), radius * phi.sin()));
        }
        for &(z, r) in &ring_specs {
            for s in 0..SEGMENTS {
                let theta = std::f64::consts::TAU * f64::from(s) / f64::from(SEGMENTS);
                verts.push(Vec3::new(r * theta.cos(), r * theta.sin(), z));
            }
        }
        let bottom = verts.len() as u32;
        verts.push(Vec3::new(0.0, 0.0, -half_length - radius));

        let ring = |k: u32, s: u32| 1 + k * SEGMENTS + (s % SEGMENTS);
        let n_rings = ring_specs.len() as u32;
        let mut tris = Vec::new();
        for s in 0..SEGMENTS {
            tris.push([0, ring(0, s), ring(0, s + 1)]);
        }
        for k in 0..n_rings - 1 {
            for s in 0..SEGMENTS {
                let (a, b) = (ring(k, s), ring(k, s + 1));
                let (c, d) = (ring(k + 1, s), ring(k + 1, s + 1));
                tris.push([a, c, d]);
                tris.push([a, d, b]);
            }
        }
        for s in 0..SEGMENTS {
            tris.push([bottom, ring(n_rings - 1, s + 1), ring(n_rings - 1, s)]);
        }
        TriMesh::new(verts, tris).expect("capsule is valid")
    }

    /// Parses ASCII OBJ: `v` and triangular `f` records; everything else is
    /// ignored. Face indices may use `i/t/n` forms and negative (relative)
    /// indices.
    pub fn from_obj(src: &str) -> Result<TriMesh, GeometryError> {
        let mut verts = Vec::new();
        let mut tris = Vec::new();
        for (lineno, line) in src.lines().enumerate() {
            let lineno = lineno + 1;
            let mut it = line.split_whitespace();
            match it.next() {
                Some("v") => {
                    let coords: Vec<f64> = it
                        .take(3)
                        .map(|s| s.parse::<f64>())
                        .collect::<Result<_, _>>()
                        .map_err(|e| GeometryError::Obj { line: lineno, msg: e.to_string() })?;
                    if coords.len() != 3 {
                        return Err(GeometryError::Obj { line: lineno, msg: "vertex needs 3 coordinates".into() });
                    }
                    verts.push(Vec3::new(coords[0], coords[1], coords[2]));
                }
                Some("f") => {
                    let idx: Vec<u32> = it
                        .map(|tok| parse_face_index(tok, verts.len()))
                        .collect::<Result<_, _>>()
                        .map_err(|msg| GeometryError::Obj { line: lineno, msg })?;
                    if idx.len() != 3 {
                        return Err(GeometryError::Obj {
                            line: lineno,
                            msg: format!("only triangular faces are supported, got {} vertices", idx.len()),
                        });
                    }
                    tris.push([idx[0], idx[1], idx[2]]);
                }
                _ => {}
            }
        }
        TriMesh::new(verts, tris)
    }

    /// FNV-1a over the little-endian bytes of every vertex coordinate and index.
    pub fn content_hash(&self) -> u64 {
        let mut h = crate::session::Fnv1a::new();
        h.write_u64(self.vertices.len() as u64);
        for v in &self.vertices {
            h.write_f64(v.x);
            h.write_f64(v.y);
            h.write_f64(v.z);
        }
        h.write_u64(self.triangles.len() as u64);
        for t in &self.triangles {
            for &i in t {
                h.write_u32(i);
            }
        }
        h.finish()
    }

    /// Triangles incident to each undirected edge, ordered by triangle index.
    pub(crate) fn edge_triangles(&self, a: u32, b: u32) -> impl Iterator<Item = usize> + '_ {
        let key = (a.min(b), a.max(b));
        self.triangles.iter().enumerate().filter_map(move |(t, tri)| {
            let has = |x: u32| tri.contains(&x);
            (has(key.0) && has(key.1)).then_some(t)
        })
    }
}

fn parse_face_index(tok: &str, n_verts: usize) -> Result<u32, String> {
    let head = tok.split('/').next().unwrap_or("");
    let i: i64 = head.parse().map_err(|_| format!("bad face index {tok:?}"))?;
    let resolved = if i > 0 {
        i - 1
    } else if i < 0 {
        n_verts as i64 + i
    } else {
        return Err("face index 0 is invalid".into());
    };
    if resolved < 0 || resolved as usize >= n_verts {
        return Err(format!("face index {i} out of range"));
    }
    Ok(resolved as u32)
}

fn bounding_sphere(vertices: &[Vec3]) -> Sphere {
    let Some(&first) = vertices.first() else {
        return Sphere { center: Vec3::ZERO, radius: 0.0 };
    };
    let (lo, hi) = vertices.iter().fold((first, first), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let center = (lo + hi) * 0.5;
    let radius = vertices.iter().map(|v| v.distance(center)).fold(0.0, f64::max);
    Sphere { center, radius }
}

fn is_closed(triangles: &[[u32; 3]]) -> bool {
    if triangles.is_empty() {
        return false;
    }
    let mut edges: BTreeMap<(u32, u32), u32> = BTreeMap::new();
    for &[a, b, c] in triangles {
        for (u, v) in [(a, b), (b, c), (c, a)] {
            *edges.entry((u.min(v), u.max(v))).or_default() += 1;
        }
    }
    edges.values().all(|&n| n == 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_outward(mesh: &TriMesh) {
        for t in 0..mesh.triangles().len() {
            let [a, b, c] = mesh.triangle(t);
            let centroid = (a + b + c) / 3.0;
            assert!(mesh.face_normal(t).dot(centroid) > 0.0, "triangle {t} winds inward");
        }
    }

    #[test]
    fn icosphere_counts_and_winding() {
        let m = TriMesh::icosphere(1.0, 2);
        assert_eq!(m.triangles().len(), 320);
        assert!(m.is_closed());
        assert_outward(&m);
        assert_eq!(TriMesh::icosphere(1.0, 3).triangles().len(), 1280);
    }

    #[test]
    fn box_and_capsule_are_closed_and_outward() {
        let b = TriMesh::cuboid(Vec3::new(0.5, 0.5, 0.5));
        assert_eq!(b.triangles().len(), 12);
        assert!(b.is_closed());
        assert_outward(&b);
        let c = TriMesh::capsule(0.003, 0.02);
        assert!(c.is_closed());
        assert_outward(&c);
    }

    #[test]
    fn rejects_out_of_range_and_degenerate() {
        let v = vec![Vec3::ZERO, Vec3::X, Vec3::Y];
        assert!(TriMesh::new(v.clone(), vec![[0, 1, 3]]).is_err());
        assert!(TriMesh::new(v.clone(), vec![[0, 1, 1]]).is_err());
        assert!(TriMesh::new(v, vec![[0, 1, 2]]).is_ok());
    }

    #[test]
    fn obj_parsing() {
        let src = "# tri\nv 0 0 1\nv 1 0 1\nv 0 1 1\nvn 0 0 1\nf 1/1/1 2/2/1 -1\n";
        let m = TriMesh::from_obj(src).unwrap();
        assert_eq!(m.triangles(), &[[0, 1, 2]]);
        assert!(!m.is_closed());
        let quad = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
        assert!(matches!(TriMesh::from_obj(quad), Err(GeometryError::Obj { line: 5, .. })));
    }

    #[test]
    fn content_hash_tracks_geometry() {
        let a = TriMesh::icosphere(1.0, 1);
        let b = TriMesh::icosphere(1.0, 1);
        let c = TriMesh::icosphere(1.0 + 1e-12, 1);
        assert_eq!(a.content_hash(), b.content_hash());
        assert_ne!(a.content_hash(), c.content_hash());
    }
}
