use serde::{Deserialize, Serialize};

use crate::geometry::{Camera, Quat, Vec3};
use crate::scene::TissueObject;

/// Image-space box in camera pixels. Not clipped to the image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Box2D {
    pub u_min: f64,
    pub v_min: f64,
    pub u_max: f64,
    pub v_max: f64,
    pub class_label: String,
}

/// Oriented box: object-frame extents carried with the object's pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Box3D {
    pub center: Vec3,
    pub half_extents: Vec3,
    pub orientation: Quat,
    pub class_label: String,
}

/// Bounds of the projections of `points` in front of the camera; `None` when
/// none project.
pub fn box_from_points(camera: &Camera, points: impl IntoIterator<Item = Vec3>, label: &str) -> Option<Box2D> {
    let mut acc: Option<(f64, f64, f64, f64)> = None;
    for p in points {
        let Some(px) = camera.project_point(p) else { continue };
        acc = Some(match acc {
            None => (px.u, px.v, px.u, px.v),
            Some((a, b, c, d)) => (a.min(px.u), b.min(px.v), c.max(px.u), d.max(px.v)),
        });
    }
    acc.map(|(u_min, v_min, u_max, v_max)| Box2D { u_min, v_min, u_max, v_max, class_label: label.to_owned() })
}

/// 2D box of an object's world-space vertices; `None` when not visible.
pub fn compute_box2d(camera: &Camera, object: &TissueObject) -> Option<Box2D> {
    box_from_points(camera, object.world_mesh.vertices().iter().copied(), object.tissue_class.name())
}

pub fn compute_box3d(object: &TissueObject) -> Box3D {
    let (lo, hi) = object.mesh.aabb().unwrap_or((Vec3::ZERO, Vec3::ZERO));
    Box3D {
        center: object.pose.transform_point((lo + hi) * 0.5),
        half_extents: (hi - lo) * 0.5,
        orientation: object.pose.orientation,
        class_label: object.tissue_class.name().to_owned(),
    }
}
