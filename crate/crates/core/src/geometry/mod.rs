//! Math kernel: vectors, rotations, poses, pinhole projection and mesh
//! distance queries.
//!
//! Conventions: right-handed, meters, world `+Z` up. Cameras look along their
//! local `+Z` with `+Y` image-down. All reals are `f64`.

mod camera;
mod mesh;
mod pose;
mod query;
mod vec3;

use thiserror::Error;

pub use camera::{Camera, CameraSpec, PixelCoord, MIN_DEPTH};
pub use mesh::{Sphere, TriMesh, MIN_TRIANGLE_AREA};
pub use pose::{Pose, Quat};
pub use query::{
    capsule_mesh_contact, closest_point_on_segment, closest_point_on_triangle, closest_points_segments,
    point_mesh_distance, pseudo_normal, ray_capsule, ray_mesh, ray_triangle, segment_point_distance,
    segment_triangle_closest, segment_triangle_intersection, signed_distance, Capsule, Feature, MeshContact,
    MeshDistance,
};
pub use vec3::Vec3;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("invalid camera: {0}")]
    InvalidCamera(&'static str),
    #[error("capsule radius must be positive, got {0}")]
    InvalidCapsule(f64),
    #[error("OBJ line {line}: {msg}")]
    Obj { line: usize, msg: String },
}
