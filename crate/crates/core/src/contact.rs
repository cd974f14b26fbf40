//! Per-tick instrument-tissue contact detection.

use serde::{Deserialize, Serialize};

use crate::geometry::{capsule_mesh_contact, Capsule, MeshContact, Vec3};
use crate::instrument::{
    needle_point, needle_pose, tool_geometry, Part, ToolGeometry, ToolState, NEEDLE_RADIUS, NEEDLE_SAMPLES,
};
use crate::scene::Scene;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactEvent {
    pub tool_id: String,
    pub part: Part,
    pub object_id: String,
    pub point: Vec3,
    pub normal: Vec3,
    pub depth: f64,
    pub tick: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthClass {
    SafeContact,
    UnsafeDepth,
}

/// `UnsafeDepth` iff `depth > unsafe_depth`.
pub fn classify_depth(event: &ContactEvent, unsafe_depth: f64) -> DepthClass {
    if event.depth > unsafe_depth {
        DepthClass::UnsafeDepth
    } else {
        DepthClass::SafeContact
    }
}

/// Capsules making up a held needle: a chain between consecutive arc samples.
pub fn needle_chain(state: &ToolState, geometry: &ToolGeometry) -> Vec<Capsule> {
    let Some(needle) = &state.held_needle else { return Vec::new() };
    let pose = needle_pose(geometry, needle);
    let step = needle.arc_span / (NEEDLE_SAMPLES - 1) as f64;
    let pts: Vec<Vec3> = (0..NEEDLE_SAMPLES).map(|k| needle_point(&pose, needle, step * k as f64)).collect();
    pts.windows(2).map(|w| Capsule { a: w[0], b: w[1], radius: NEEDLE_RADIUS }).collect()
}

/// Contacts of one tool, in part order then object id order.
pub fn tool_contacts(scene: &Scene, state: &ToolState, geometry: &ToolGeometry, tick: u64) -> Vec<ContactEvent> {
    let mut objects: Vec<usize> = (0..scene.objects.len()).collect();
    objects.sort_by(|&a, &b| scene.objects[a].id.cmp(&scene.objects[b].id));

    let mut parts: Vec<(Part, Vec<Capsule>)> =
        geometry.contact_capsules().into_iter().map(|(p, c)| (p, vec![c])).collect();
    let chain = needle_chain(state, geometry);
    if !chain.is_empty() {
        parts.push((Part::Needle, chain));
    }

    let mut out = Vec::new();
    for (part, capsules) in &parts {
        for &i in &objects {
            let obj = &scene.objects[i];
            // A chain reports one event per object: its deepest link.
            let mut best: Option<MeshContact> = None;
            for cap in capsules {
                let hit = capsule_mesh_contact(cap, &obj.world_mesh).expect("scene meshes are nonempty");
                if let Some(c) = hit {
                    if best.is_none_or(|b| c.depth > b.depth) {
                        best = Some(c);
                    }
                }
            }
            if let Some(c) = best {
                out.push(ContactEvent {
                    tool_id: state.id.clone(),
                    part: *part,
                    object_id: obj.id.clone(),
                    point: c.point,
                    normal: c.normal,
                    depth: c.depth,
                    tick,
                });
            }
        }
    }
    out
}

/// All contacts at this tick, ordered by tool id, part, then object id.
/// Tools whose trocar is missing from the scene are skipped.
pub fn detect_contacts(scene: &Scene, tools: &[ToolState], tick: u64) -> Vec<ContactEvent> {
    let mut order: Vec<&ToolState> = tools.iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));
    let mut out = Vec::new();
    for tool in order {
        let Some(trocar) = scene.trocar(&tool.trocar_id) else { continue };
        let geometry = tool_geometry(tool, trocar).expect("trocar matches");
        out.extend(tool_contacts(scene, tool, &geometry, tick));
    }
    out
}
