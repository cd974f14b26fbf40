//! Visual feedback: color writes and screen messages driven by filtered
//! interactions, tip trails, and the per-task guidance overlays.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contact::DepthClass;
use crate::geometry::Vec3;
use crate::instrument::{ToolGeometry, ToolState};
use crate::interaction::{ActionClass, InteractionTuple};
use crate::scene::{Rgb, Role, Scene, TissueClass};
use crate::tasks::{TaskAnnotation, TaskKind};

pub const CORRECT_MOVE: &str = "Correct move";
pub const CORRECT_OPERATION: &str = "Correct operation";
pub const UNSAFE_DEPTH: &str = "Unsafe depth";
/// Default trail cap: 10 s at 60 Hz.
pub const TRAIL_MAX: usize = 600;
/// Tip moves shorter than this do not extend the trail, m.
pub const TRAIL_MIN_STEP: f64 = 1e-5;

pub fn wrong_for_touching(class: TissueClass) -> String {
    format!("Wrong for touching {}!", class.display_name())
}

/// Whether `text` belongs to the closed message set.
pub fn is_known_message(text: &str) -> bool {
    if [CORRECT_MOVE, CORRECT_OPERATION, UNSAFE_DEPTH].contains(&text) {
        return true;
    }
    TissueClass::ALL.iter().any(|&c| wrong_for_touching(c) == text)
}

#[derive(Debug, Error, PartialEq)]
pub enum FeedbackError {
    #[error("entry and exit are {chord} m apart, more than the needle diameter {diameter} m")]
    InfeasibleArc { chord: f64, diameter: f64 },
    #[error("unknown tool {0:?}")]
    UnknownTool(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Overlay {
    ViewCone {
        apex: Vec3,
        axis: Vec3,
        half_angle: f64,
    },
    Corridor {
        start: Vec3,
        end: Vec3,
        radius: f64,
    },
    CuttingPlane {
        point: Vec3,
        normal: Vec3,
        extent: f64,
    },
    /// Points are `center + radius·(cos φ·u + sin φ·v)` for φ from
    /// `start_angle` to `end_angle`, with `u = normal.any_orthonormal()` and
    /// `v = normal × u`.
    Arc {
        center: Vec3,
        normal: Vec3,
        radius: f64,
        start_angle: f64,
        end_angle: f64,
    },
    Marker {
        position: Vec3,
        label: String,
    },
    Arrow {
        from: Vec3,
        to: Vec3,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackKind {
    ColorWrite,
    ScreenText,
    TrajectoryLine,
    Overlay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackAction {
    pub tick: u64,
    pub kind: FeedbackKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_object: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<Rgb>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overlay: Option<Overlay>,
}

impl FeedbackAction {
    pub fn color_write(tick: u64, object: &str, color: Rgb) -> Self {
        FeedbackAction {
            tick,
            kind: FeedbackKind::ColorWrite,
            target_object: Some(object.to_owned()),
            color: Some(color),
            text: None,
            overlay: None,
        }
    }

    pub fn screen_text(tick: u64, text: impl Into<String>) -> Self {
        FeedbackAction {
            tick,
            kind: FeedbackKind::ScreenText,
            target_object: None,
            color: None,
            text: Some(text.into()),
            overlay: None,
        }
    }
}

/// Actions that count as doing the task's job on its target.
pub fn task_valid_actions(task: TaskKind) -> &'static [ActionClass] {
    use ActionClass::*;
    match task {
        TaskKind::Navigation => &[Touch],
        TaskKind::Manipulation => &[Touch, Grasp, Pull],
        TaskKind::Transfer => &[Touch, Grasp, Pull, Release],
        TaskKind::Cutting => &[Touch, Grasp, Cut],
        TaskKind::Suturing => &[Touch, Pierce],
    }
}

/// Whether touching the object is an error in this task: it is a hazard, or
/// it is some other task's target.
pub fn is_wrong_tissue(ctx: &TaskAnnotation, object_id: &str, role: Role) -> bool {
    role == Role::Hazard || ctx.is_hazard(object_id) || (role == Role::Target && !ctx.is_target(object_id))
}

/// Rule table for one filtered tuple, all matches emitted in this order:
/// hazard or wrong target → red and "Wrong for touching {class}!"; intended
/// target under a task-valid action → green and "Correct move"; unsafe depth
/// → "Unsafe depth". Tuples without tissue produce nothing.
pub fn evaluate_rules(
    tuple: &InteractionTuple,
    role: Role,
    ctx: &TaskAnnotation,
    depth_class: DepthClass,
    tick: u64,
) -> Vec<FeedbackAction> {
    let (Some(id), Some(class)) = (&tuple.tissue_id, tuple.tissue_class) else { return Vec::new() };
    let mut out = Vec::new();
    if is_wrong_tissue(ctx, id, role) {
        out.push(FeedbackAction::color_write(tick, id, Rgb::RED));
        out.push(FeedbackAction::screen_text(tick, wrong_for_touching(class)));
    } else if ctx.is_target(id) && task_valid_actions(ctx.task).contains(&tuple.action) {
        out.push(FeedbackAction::color_write(tick, id, Rgb::GREEN));
        out.push(FeedbackAction::screen_text(tick, CORRECT_MOVE));
    }
    if depth_class == DepthClass::UnsafeDepth {
        out.push(FeedbackAction::screen_text(tick, UNSAFE_DEPTH));
    }
    out
}

/// Edge-triggers [`evaluate_rules`] per tool: actions are emitted only when a
/// tool's verdict changes, and the base color of an object it recolored is
/// restored once when the tool's filtered tuple leaves that object.
#[derive(Debug, Clone, Default)]
pub struct FeedbackEngine {
    last: Vec<(String, Verdict)>,
}

/// Kind, target, color bits and text of each action, in order.
type Signature = Vec<(FeedbackKind, Option<String>, Option<[u64; 3]>, Option<String>)>;

#[derive(Debug, Clone, PartialEq, Default)]
struct Verdict {
    tissue: Option<String>,
    colored: Option<String>,
    signature: Signature,
}

fn signature(actions: &[FeedbackAction]) -> Signature {
    actions
        .iter()
        .map(|a| (a.kind, a.target_object.clone(), a.color.map(|c| [c.r, c.g, c.b].map(f64::to_bits)), a.text.clone()))
        .collect()
}

impl FeedbackEngine {
    pub fn new() -> FeedbackEngine {
        FeedbackEngine::default()
    }

    /// Feedback for one tool's filtered tuple this tick.
    pub fn update(
        &mut self,
        scene: &Scene,
        ctx: &TaskAnnotation,
        tuple: &InteractionTuple,
        depth_class: DepthClass,
        tick: u64,
    ) -> Vec<FeedbackAction> {
        let slot = match self.last.iter().position(|(id, _)| *id == tuple.tool_id) {
            Some(i) => i,
            None => {
                self.last.push((tuple.tool_id.clone(), Verdict::default()));
                self.last.len() - 1
            }
        };
        let prev = self.last[slot].1.clone();
        let role = tuple.tissue_id.as_deref().and_then(|id| scene.object(id)).map_or(Role::Neutral, |o| o.role);
        let actions = evaluate_rules(tuple, role, ctx, depth_class, tick);
        let colored = actions
            .iter()
            .find(|a| a.kind == FeedbackKind::ColorWrite)
            .and_then(|a| a.target_object.clone())
            .or_else(|| prev.colored.clone().filter(|c| tuple.tissue_id.as_ref() == Some(c)));
        let next = Verdict { tissue: tuple.tissue_id.clone(), colored, signature: signature(&actions) };

        let mut out = Vec::new();
        if let Some(old) = &prev.colored {
            if next.colored.as_ref() != Some(old) {
                if let Some(o) = scene.object(old) {
                    out.push(FeedbackAction::color_write(tick, old, o.base_color));
                }
            }
        }
        if next.signature != prev.signature || next.tissue != prev.tissue {
            out.extend(actions);
        }
        self.last[slot].1 = next;
        out
    }
}

/// Appends `tip` unless it moved less than [`TRAIL_MIN_STEP`], dropping the
/// oldest points beyond `max_points`.
pub fn update_trajectory(trail: &mut VecDeque<Vec3>, tip: Vec3, max_points: usize) {
    if trail.back().is_some_and(|&last| last.distance(tip) < TRAIL_MIN_STEP) {
        return;
    }
    trail.push_back(tip);
    while trail.len() > max_points.max(2) {
        trail.pop_front();
    }
}

/// Circle of the needle through entry and exit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeedleArc {
    pub center: Vec3,
    /// Plane normal; the arc runs counter-clockwise about it from entry to exit.
    pub normal: Vec3,
    pub radius: f64,
    pub start_angle: f64,
    pub end_angle: f64,
}

impl NeedleArc {
    pub fn basis(&self) -> (Vec3, Vec3) {
        let u = self.normal.any_orthonormal();
        (u, self.normal.cross(u))
    }

    pub fn point(&self, angle: f64) -> Vec3 {
        let (u, v) = self.basis();
        self.center + (u * angle.cos() + v * angle.sin()) * self.radius
    }

    /// Unit direction of travel at `angle`.
    pub fn tangent(&self, angle: f64) -> Vec3 {
        let (u, v) = self.basis();
        v * angle.cos() - u * angle.sin()
    }

    pub fn span(&self) -> f64 {
        self.end_angle - self.start_angle
    }

    pub fn overlay(&self) -> Overlay {
        Overlay::Arc {
            center: self.center,
            normal: self.normal,
            radius: self.radius,
            start_angle: self.start_angle,
            end_angle: self.end_angle,
        }
    }
}

/// Solves the needle circle through `entry` and `exit`. Of the two circles
/// of that radius, the one centered on the `tissue_normal` side is chosen, so
/// the short arc between the points dips into the tissue.
pub fn solve_needle_arc(entry: Vec3, exit: Vec3, radius: f64, tissue_normal: Vec3) -> Result<NeedleArc, FeedbackError> {
    let chord = exit - entry;
    let len = chord.norm();
    if !(len > 0.0) || len > 2.0 * radius {
        return Err(FeedbackError::InfeasibleArc { chord: len, diameter: 2.0 * radius });
    }
    let c = chord / len;
    let w = (tissue_normal - c * tissue_normal.dot(c)).try_normalized().unwrap_or_else(|| c.any_orthonormal());
    let half = 0.5 * len;
    let h = (radius * radius - half * half).max(0.0).sqrt();
    let center = (entry + exit) * 0.5 + w * h;
    let normal = c.cross(w);
    let mut arc = NeedleArc { center, normal, radius, start_angle: 0.0, end_angle: 0.0 };
    let (u, v) = arc.basis();
    let rel = entry - center;
    arc.start_angle = rel.dot(v).atan2(rel.dot(u));
    arc.end_angle = arc.start_angle + 2.0 * (half / radius).min(1.0).asin();
    Ok(arc)
}

/// Guidance overlays for the active task.
///
/// `tools` pairs each tool with its current geometry; the first tool is the
/// primary one for navigation.
pub fn make_guidance(
    ctx: &TaskAnnotation,
    scene: &Scene,
    tools: &[(&ToolState, &ToolGeometry)],
) -> Result<Vec<Overlay>, FeedbackError> {
    let target_center = ctx.target_ids.first().and_then(|id| scene.object(id)).map(|o| o.world_mesh.bounds().center);
    let mut out = Vec::new();
    match ctx.task {
        TaskKind::Navigation => {
            let nav = ctx.navigation.as_ref().expect("validated annotation");
            if let Some(target) = target_center {
                let apex = scene.camera.position();
                let axis = (target - apex).try_normalized().unwrap_or(scene.camera.forward());
                out.push(Overlay::ViewCone { apex, axis, half_angle: nav.view_half_angle });
                if let Some((_, g)) = tools.first() {
                    out.push(Overlay::Arrow { from: g.tip, to: target });
                }
            }
        }
        TaskKind::Manipulation => {
            let m = ctx.manipulation.as_ref().expect("validated annotation");
            out.push(Overlay::Marker { position: m.grasp_point, label: "grasp point".into() });
            out.push(Overlay::Arrow { from: m.grasp_point, to: m.grasp_point + m.traction_dir * 0.03 });
        }
        TaskKind::Transfer => {
            let t = ctx.transfer.as_ref().expect("validated annotation");
            let giver = tools
                .iter()
                .find(|(s, _)| s.id == t.giver)
                .ok_or_else(|| FeedbackError::UnknownTool(t.giver.clone()))?;
            let goal = t.receiver_pose.position;
            out.push(Overlay::Corridor { start: giver.1.tip, end: goal, radius: t.corridor_radius });
            out.push(Overlay::Marker { position: goal, label: "ghost pose".into() });
            out.push(Overlay::Marker { position: t.handoff_center, label: "handoff".into() });
        }
        TaskKind::Cutting => {
            let c = ctx.cutting.as_ref().expect("validated annotation");
            out.push(Overlay::CuttingPlane { point: c.plane_point, normal: c.plane_normal, extent: c.plane_extent });
            for w in c.path.windows(2) {
                out.push(Overlay::Corridor { start: w[0], end: w[1], radius: c.corridor_radius });
            }
        }
        TaskKind::Suturing => {
            let s = ctx.suturing.as_ref().expect("validated annotation");
            out.push(Overlay::Marker { position: s.entry, label: "entry".into() });
            out.push(Overlay::Marker { position: s.exit, label: "exit".into() });
            out.push(solve_needle_arc(s.entry, s.exit, s.needle_radius, s.tissue_normal)?.overlay());
        }
    }
    Ok(out)
}
