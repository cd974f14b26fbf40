//! Static training scene: anatomy objects, trocar ports, endoscope camera,
//! task annotations and tool placements.
//!
//! Scenes are JSON documents. Object meshes are either inline primitives,
//! tessellated at a fixed resolution, or ASCII OBJ files resolved relative to
//! the scene file.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Camera, Pose, TriMesh, Vec3};
use crate::instrument::ToolSpec;
use crate::session::Fnv1a;
use crate::sim::SimConfig;
use crate::tasks::{TaskAnnotation, TaskKind};

/// Icosphere subdivision level for `sphere` primitives (1280 triangles).
pub const SPHERE_SUBDIVISIONS: u32 = 3;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("scene parse error: {0}")]
    Parse(String),
    #[error("invalid scene field `{field}`: {msg}")]
    Validation { field: String, msg: String },
    #[error("unknown object {0:?}")]
    UnknownObject(String),
}

fn invalid(field: impl Into<String>, msg: impl Into<String>) -> SceneError {
    SceneError::Validation { field: field.into(), msg: msg.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TissueClass {
    Gallbladder,
    CysticArtery,
    Stomach,
    Liver,
    Peg,
    Block,
    Generic,
}

impl TissueClass {
    pub const ALL: [TissueClass; 7] = [
        TissueClass::Gallbladder,
        TissueClass::CysticArtery,
        TissueClass::Stomach,
        TissueClass::Liver,
        TissueClass::Peg,
        TissueClass::Block,
        TissueClass::Generic,
    ];

    /// Wire and log spelling.
    pub fn name(self) -> &'static str {
        match self {
            TissueClass::Gallbladder => "gallbladder",
            TissueClass::CysticArtery => "cystic_artery",
            TissueClass::Stomach => "stomach",
            TissueClass::Liver => "liver",
            TissueClass::Peg => "peg",
            TissueClass::Block => "block",
            TissueClass::Generic => "generic",
        }
    }

    /// Human-readable spelling used in on-screen messages.
    pub fn display_name(self) -> &'static str {
        match self {
            TissueClass::CysticArtery => "cystic artery",
            other => other.name(),
        }
    }
}

impl fmt::Display for TissueClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Target,
    Hazard,
    Neutral,
}

/// Linear RGB in `[0, 1]`, serialized as `[r, g, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Rgb {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl Rgb {
    pub const RED: Rgb = Rgb { r: 1.0, g: 0.0, b: 0.0 };
    pub const GREEN: Rgb = Rgb { r: 0.0, g: 1.0, b: 0.0 };

    pub const fn new(r: f64, g: f64, b: f64) -> Self {
        Rgb { r, g, b }
    }

    fn is_valid(self) -> bool {
        [self.r, self.g, self.b].iter().all(|c| (0.0..=1.0).contains(c))
    }
}

impl From<[f64; 3]> for Rgb {
    fn from(a: [f64; 3]) -> Self {
        Rgb::new(a[0], a[1], a[2])
    }
}

impl From<Rgb> for [f64; 3] {
    fn from(c: Rgb) -> Self {
        [c.r, c.g, c.b]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSpec {
    Obj(String),
    Sphere { r: f64 },
    Box { half_extents: Vec3 },
    Capsule { r: f64, half_length: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub id: String,
    pub class: TissueClass,
    pub role: Role,
    pub color: Rgb,
    pub mesh: MeshSpec,
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trocar {
    pub id: String,
    pub point: Vec3,
    pub rest_axis: Vec3,
}

/// The scene file as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDoc {
    pub objects: Vec<ObjectSpec>,
    pub trocars: Vec<Trocar>,
    pub camera: Camera,
    pub annotations: BTreeMap<String, TaskAnnotation>,
    #[serde(default)]
    pub tools: Vec<ToolSpec>,
    #[serde(default)]
    pub config: SimConfig,
}

#[derive(Debug, Clone)]
pub struct TissueObject {
    pub id: String,
    pub tissue_class: TissueClass,
    pub role: Role,
    /// Mesh in the object frame.
    pub mesh: TriMesh,
    /// Mesh transformed by `pose`, cached because the scene is static.
    pub world_mesh: TriMesh,
    pub pose: Pose,
    pub base_color: Rgb,
    pub current_color: Rgb,
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub objects: Vec<TissueObject>,
    pub trocars: Vec<Trocar>,
    pub camera: Camera,
    pub annotations: BTreeMap<String, TaskAnnotation>,
    pub tools: Vec<ToolSpec>,
    pub config: SimConfig,
    hash: u64,
}

/// Reads and validates a scene file. OBJ paths resolve relative to the file.
pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene, SceneError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io { path: path.to_owned(), source })?;
    Scene::from_json(&text, path.parent())
}

impl Scene {
    /// Parses a scene document. `base_dir` anchors relative OBJ paths; without
    /// it they resolve against the working directory.
    pub fn from_json(text: &str, base_dir: Option<&Path>) -> Result<Scene, SceneError> {
        let doc: SceneDoc = serde_json::from_str(text).map_err(|e| SceneError::Parse(e.to_string()))?;
        Scene::from_doc(doc, base_dir)
    }

    pub fn from_doc(doc: SceneDoc, base_dir: Option<&Path>) -> Result<Scene, SceneError> {
        let mut hasher = Fnv1a::new();
        hasher.write(&serde_json::to_vec(&doc).expect("scene documents serialize"));

        if doc.trocars.is_empty() {
            return Err(invalid("trocars", "at least one trocar is required"));
        }
        let mut seen = BTreeSet::new();
        let mut trocars = Vec::with_capacity(doc.trocars.len());
        for (i, t) in doc.trocars.iter().enumerate() {
            if !seen.insert(t.id.as_str()) {
                return Err(invalid(format!("trocars[{i}].id"), format!("duplicate id {:?}", t.id)));
            }
            let n = t.rest_axis.norm();
            if !n.is_finite() || (n - 1.0).abs() > 1e-6 || !t.point.is_finite() {
                return Err(invalid(format!("trocars[{i}].rest_axis"), "must be a finite unit vector"));
            }
            trocars.push(Trocar { id: t.id.clone(), point: t.point, rest_axis: t.rest_axis / n });
        }

        let mut seen = BTreeSet::new();
        let mut objects = Vec::with_capacity(doc.objects.len());
        for (i, o) in doc.objects.iter().enumerate() {
            if !seen.insert(o.id.as_str()) {
                return Err(invalid(format!("objects[{i}].id"), format!("duplicate id {:?}", o.id)));
            }
            if !o.color.is_valid() {
                return Err(invalid(format!("objects[{i}].color"), "components must lie in [0, 1]"));
            }
            let mesh = build_mesh(&o.mesh, base_dir, &format!("objects[{i}].mesh"))?;
            hasher.write_u64(mesh.content_hash());
            let world_mesh = mesh.transformed(&o.pose);
            objects.push(TissueObject {
                id: o.id.clone(),
                tissue_class: o.class,
                role: o.role,
                mesh,
                world_mesh,
                pose: o.pose,
                base_color: o.color,
                current_color: o.color,
            });
        }

        for (key, ann) in &doc.annotations {
            let field = format!("annotations.{key}");
            if TaskKind::parse(key) != Some(ann.task) {
                return Err(invalid(&field, format!("key must equal the task name {:?}", ann.task.name())));
            }
            ann.validate().map_err(|m| invalid(&field, m))?;
            for id in ann.target_ids.iter().chain(&ann.hazard_ids) {
                if !seen.contains(id.as_str()) {
                    return Err(invalid(&field, format!("references unknown object {id:?}")));
                }
            }
        }
        for (i, o) in objects.iter().enumerate() {
            if o.role == Role::Target && !doc.annotations.values().any(|a| a.is_target(&o.id)) {
                return Err(invalid(format!("objects[{i}].role"), "target is not referenced by any task annotation"));
            }
        }

        let tools = if doc.tools.is_empty() {
            trocars.iter().map(|t| ToolSpec::default_for(&t.id)).collect()
        } else {
            doc.tools.clone()
        };
        let mut seen = BTreeSet::new();
        for (i, t) in tools.iter().enumerate() {
            if !seen.insert(t.id.as_str()) {
                return Err(invalid(format!("tools[{i}].id"), format!("duplicate id {:?}", t.id)));
            }
            if !trocars.iter().any(|tr| tr.id == t.trocar) {
                return Err(invalid(format!("tools[{i}].trocar"), format!("unknown trocar {:?}", t.trocar)));
            }
            t.validate().map_err(|m| invalid(format!("tools[{i}].{m}"), "out of range"))?;
        }
        doc.config.validate().map_err(|m| invalid(format!("config.{m}"), "out of range"))?;

        Ok(Scene {
            objects,
            trocars,
            camera: doc.camera,
            annotations: doc.annotations,
            tools,
            config: doc.config,
            hash: hasher.finish(),
        })
    }

    /// Hash of the scene document and all mesh contents. Colors written at run
    /// time do not affect it.
    pub fn hash(&self) -> u64 {
        self.hash
    }

    pub fn object(&self, id: &str) -> Option<&TissueObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn object_index(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }

    pub fn trocar(&self, id: &str) -> Option<&Trocar> {
        self.trocars.iter().find(|t| t.id == id)
    }

    pub fn annotation(&self, task: TaskKind) -> Option<&TaskAnnotation> {
        self.annotations.get(task.name())
    }

    pub fn set_object_color(&mut self, id: &str, color: Rgb) -> Result<(), SceneError> {
        let obj = self.objects.iter_mut().find(|o| o.id == id).ok_or_else(|| SceneError::UnknownObject(id.into()))?;
        obj.current_color = color;
        Ok(())
    }

    pub fn reset_colors(&mut self) {
        for o in &mut self.objects {
            o.current_color = o.base_color;
        }
    }
}

fn build_mesh(spec: &MeshSpec, base_dir: Option<&Path>, field: &str) -> Result<TriMesh, SceneError> {
    let positive = |v: f64, what: &str| {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(invalid(format!("{field}.{what}"), "must be positive"))
        }
    };
    match spec {
        MeshSpec::Sphere { r } => {
            positive(*r, "sphere.r")?;
            Ok(TriMesh::icosphere(*r, SPHERE_SUBDIVISIONS))
        }
        MeshSpec::Box { half_extents: h } => {
            positive(h.x.min(h.y).min(h.z), "box.half_extents")?;
            Ok(TriMesh::cuboid(*h))
        }
        MeshSpec::Capsule { r, half_length } => {
            positive(*r, "capsule.r")?;
            positive(*half_length, "capsule.half_length")?;
            Ok(TriMesh::capsule(*r, *half_length))
        }
        MeshSpec::Obj(rel) => {
            let path = match base_dir {
                Some(dir) => dir.join(rel),
                None => PathBuf::from(rel),
            };
            let text = std::fs::read_to_string(&path)
                .map_err(|e| invalid(format!("{field}.obj"), format!("cannot read {}: {e}", path.display())))?;
            let mesh = TriMesh::from_obj(&text).map_err(|e| invalid(format!("{field}.obj"), e.to_string()))?;
            if mesh.is_empty() {
                return Err(invalid(format!("{field}.obj"), format!("{} has no faces", path.display())));
            }
            Ok(mesh)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "objects": [{"id": "ball", "class": "generic", "role": "target", "color": [0.8, 0.6, 0.5],
                     "mesh": {"sphere": {"r": 0.02}}, "pose": {"pos": [0, 0, 0], "quat": [1, 0, 0, 0]}}],
        "trocars": [{"id": "port", "point": [0, 0, 0.2], "rest_axis": [0, 0, -1]}],
        "camera": {"pos": [0, 0, 0.3], "quat": [0, 1, 0, 0], "fx": 110, "fy": 110, "cx": 64, "cy": 64,
                   "width": 128, "height": 128},
        "annotations": {"navigation": {"task": "navigation", "target_ids": ["ball"],
                        "navigation": {"view_half_angle": 0.3, "distance_band": [0.005, 0.03]}}}
    }"#;

    #[test]
    fn color_round_trip() {
        let mut s = Scene::from_json(MINIMAL, None).unwrap();
        s.set_object_color("ball", Rgb::RED).unwrap();
        assert_eq!(s.objects[0].current_color, Rgb::RED);
        s.reset_colors();
        assert_eq!(s.objects[0].current_color, s.objects[0].base_color);
        assert!(matches!(s.set_object_color("nope", Rgb::RED), Err(SceneError::UnknownObject(_))));
    }

    #[test]
    fn default_tool_per_trocar() {
        let s = Scene::from_json(MINIMAL, None).unwrap();
        assert_eq!(s.tools.len(), 1);
        assert_eq!(s.tools[0].trocar, "port");
    }

    #[test]
    fn rejects_bad_trocar_axis() {
        let bad = MINIMAL.replace("[0, 0, -1]", "[0, 0, -2]");
        let err = Scene::from_json(&bad, None).unwrap_err().to_string();
        assert!(err.contains("trocars[0].rest_axis"), "{err}");
    }

    #[test]
    fn unreferenced_target_is_rejected() {
        let bad = MINIMAL.replace(r#""target_ids": ["ball"]"#, r#""target_ids": []"#);
        assert!(Scene::from_json(&bad, None).is_err());
    }

    #[test]
    fn unknown_field_is_a_parse_error() {
        let bad = MINIMAL.replacen(r#""objects""#, r#""extra": 1, "objects""#, 1);
        assert!(matches!(Scene::from_json(&bad, None), Err(SceneError::Parse(_))));
    }
}
