use std::collections::BTreeMap;

use super::{ErrorEvent, ErrorKind, TaskAnnotation, TaskKind, TaskResult};
use crate::contact::{needle_chain, ContactEvent};
use crate::feedback::{is_wrong_tissue, solve_needle_arc, NeedleArc};
use crate::geometry::{point_mesh_distance, segment_point_distance, signed_distance, Vec3};
use crate::instrument::{needle_point, needle_pose, InstrumentClass, ToolGeometry, ToolState};
use crate::interaction::{ActionClass, InteractionTuple};
use crate::scene::{Role, Scene};

/// Minimum jaw closure of a stroke that counts as an attempted cut or grasp.
pub const STROKE_MIN_CLOSURE: f64 = 0.3;
/// Minimum traction displacement before its direction is judged, m.
pub const MIN_TRACTION: f64 = 0.005;

/// One tick of simulation state as seen by the evaluator. Slices are in
/// scene tool order; `tuples` are the filtered tuples.
#[derive(Debug, Clone, Copy)]
pub struct TickInput<'a> {
    pub tick: u64,
    pub scene: &'a Scene,
    pub tools: &'a [ToolState],
    pub geometries: &'a [ToolGeometry],
    pub tuples: &'a [InteractionTuple],
    pub contacts: &'a [ContactEvent],
    pub unsafe_depth: f64,
}

/// A continuous jaw-closing motion.
#[derive(Debug, Clone, Copy, Default)]
struct Stroke {
    closure: f64,
    touched: bool,
    last_tick: u64,
}

#[derive(Debug, Clone, Copy)]
struct Bite {
    entry: Vec3,
    depth: f64,
    angle_error: f64,
}

#[derive(Debug, Clone, Default)]
struct ToolTrack {
    prev_tip: Option<Vec3>,
    prev_jaw: f64,
    stroke: Option<Stroke>,
    prev_action: Option<ActionClass>,
    wrong_latch: Option<String>,
    unsafe_latch: bool,
    clip_latch: Option<(String, ActionClass)>,
    grasp_start: Option<Vec3>,
    /// Sharp point and its signed distance to the nearest target last tick.
    needle_prev: Option<(Vec3, f64)>,
    bite: Option<Bite>,
}

/// Live per-task evaluation: emits error events as they happen and
/// accumulates metrics for the final [`TaskResult`].
#[derive(Debug, Clone)]
pub struct TaskEvaluator {
    ann: TaskAnnotation,
    tick_rate: f64,
    arc: Option<NeedleArc>,
    tracks: Vec<ToolTrack>,
    metrics: BTreeMap<String, f64>,
    events: Vec<ErrorEvent>,
    ticks: u64,
    nav_good: u64,
}

fn polyline_distance(path: &[Vec3], p: Vec3) -> f64 {
    path.windows(2).map(|w| segment_point_distance(w[0], w[1], p)).fold(f64::INFINITY, f64::min)
}

impl TaskEvaluator {
    pub fn new(ann: TaskAnnotation, tools: &[ToolState], tick_rate: f64) -> TaskEvaluator {
        let arc = ann
            .suturing
            .as_ref()
            .and_then(|s| solve_needle_arc(s.entry, s.exit, s.needle_radius, s.tissue_normal).ok());
        let tracks =
            tools.iter().map(|t| ToolTrack { prev_jaw: t.joints.jaw, ..ToolTrack::default() }).collect::<Vec<_>>();
        let mut metrics = BTreeMap::new();
        metrics.insert("path_length_m".to_owned(), 0.0);
        match ann.task {
            TaskKind::Navigation => {
                let n = ann.navigation.as_ref().expect("validated annotation");
                metrics.insert("in_view_fraction".into(), 0.0);
                metrics.insert("min_fraction".into(), n.min_fraction);
            }
            TaskKind::Manipulation => {
                let m = ann.manipulation.as_ref().expect("validated annotation");
                metrics.insert("grasps_on_target".into(), 0.0);
                metrics.insert("grasp_tolerance_m".into(), m.grasp_tolerance);
            }
            TaskKind::Transfer => {
                metrics.insert("handoffs".into(), 0.0);
            }
            TaskKind::Cutting => {
                metrics.insert("cuts_on_target".into(), 0.0);
                metrics.insert("max_path_deviation_m".into(), 0.0);
            }
            TaskKind::Suturing => {
                metrics.insert("bites".into(), 0.0);
                metrics.insert("entry_hit".into(), 0.0);
                metrics.insert("exit_hit".into(), 0.0);
            }
        }
        TaskEvaluator { ann, tick_rate, arc, tracks, metrics, events: Vec::new(), ticks: 0, nav_good: 0 }
    }

    pub fn annotation(&self) -> &TaskAnnotation {
        &self.ann
    }

    pub fn metrics(&self) -> &BTreeMap<String, f64> {
        &self.metrics
    }

    pub fn events(&self) -> &[ErrorEvent] {
        &self.events
    }

    fn set(&mut self, key: &str, v: f64) {
        self.metrics.insert(key.to_owned(), v);
    }

    fn add(&mut self, key: &str, v: f64) {
        *self.metrics.entry(key.to_owned()).or_insert(0.0) += v;
    }

    fn max(&mut self, key: &str, v: f64) {
        let e = self.metrics.entry(key.to_owned()).or_insert(v);
        *e = e.max(v);
    }

    fn emit(&mut self, out: &mut Vec<ErrorEvent>, tick: u64, kind: ErrorKind, tool: &str) {
        let e = ErrorEvent { tick, kind, tool_id: tool.to_owned() };
        self.events.push(e.clone());
        out.push(e);
    }

    /// Evaluates one tick; returns the error events it raised.
    pub fn evaluate_tick(&mut self, input: &TickInput<'_>) -> Vec<ErrorEvent> {
        let mut out = Vec::new();
        self.ticks = input.tick;
        for i in 0..input.tools.len() {
            self.common(input, i, &mut out);
        }
        match self.ann.task {
            TaskKind::Navigation => self.navigation(input),
            TaskKind::Manipulation => {
                for i in 0..input.tools.len() {
                    self.manipulation(input, i, &mut out);
                }
            }
            TaskKind::Transfer => self.transfer(input, &mut out),
            TaskKind::Cutting => {
                for i in 0..input.tools.len() {
                    self.cutting(input, i, &mut out);
                }
            }
            TaskKind::Suturing => {
                for i in 0..input.tools.len() {
                    self.suturing(input, i, &mut out);
                }
            }
        }
        for (i, g) in input.geometries.iter().enumerate() {
            let t = &mut self.tracks[i];
            t.prev_jaw = input.tools[i].joints.jaw;
            t.prev_action = Some(input.tuples[i].action);
            t.prev_tip = Some(g.tip);
        }
        out
    }

    /// Errors shared by all tasks: wrong tissue, unsafe depth, clipping a
    /// hazard, and jaw strokes that close on nothing.
    fn common(&mut self, input: &TickInput<'_>, i: usize, out: &mut Vec<ErrorEvent>) {
        let tool = &input.tools[i];
        let tuple = &input.tuples[i];
        let tip = input.geometries[i].tip;
        if let Some(prev) = self.tracks[i].prev_tip {
            self.add("path_length_m", prev.distance(tip));
        }

        let wrong = tuple.tissue_id.as_ref().filter(|id| {
            let role = input.scene.object(id).map_or(Role::Neutral, |o| o.role);
            is_wrong_tissue(&self.ann, id, role)
        });
        if wrong != self.tracks[i].wrong_latch.as_ref() {
            if wrong.is_some() {
                self.emit(out, input.tick, ErrorKind::WrongTissue, &tool.id);
            }
            self.tracks[i].wrong_latch = wrong.cloned();
        }

        let mine = || input.contacts.iter().filter(|c| c.tool_id == tool.id);
        let deep = mine().any(|c| c.depth > input.unsafe_depth);
        if deep && !self.tracks[i].unsafe_latch {
            self.emit(out, input.tick, ErrorKind::UnsafeDepth, &tool.id);
        }
        self.tracks[i].unsafe_latch = deep;

        let clip = match (&tuple.tissue_id, tuple.action) {
            (Some(id), ActionClass::Cut | ActionClass::Grasp) => {
                let hazard = self.ann.is_hazard(id) || input.scene.object(id).is_some_and(|o| o.role == Role::Hazard);
                hazard.then(|| (id.clone(), tuple.action))
            }
            _ => None,
        };
        if clip.is_some() && clip != self.tracks[i].clip_latch {
            self.emit(out, input.tick, ErrorKind::UnintendedClip, &tool.id);
        }
        self.tracks[i].clip_latch = clip;

        if matches!(tool.instrument_class, InstrumentClass::Scissors | InstrumentClass::Grasper) {
            let jaw = tool.joints.jaw;
            let touching = mine().next().is_some();
            let prev_jaw = self.tracks[i].prev_jaw;
            if jaw < prev_jaw {
                let s = self.tracks[i].stroke.get_or_insert_with(Stroke::default);
                s.closure += prev_jaw - jaw;
                s.touched |= touching;
                s.last_tick = input.tick;
            } else if let Some(s) = self.tracks[i].stroke.take() {
                self.close_stroke(out, tool, s);
            }
        }
    }

    fn close_stroke(&mut self, out: &mut Vec<ErrorEvent>, tool: &ToolState, s: Stroke) {
        if s.closure + 1e-12 < STROKE_MIN_CLOSURE || s.touched {
            return;
        }
        let kind = match tool.instrument_class {
            InstrumentClass::Scissors => ErrorKind::CutAir,
            _ => ErrorKind::GraspEmptySpace,
        };
        self.emit(out, s.last_tick, kind, &tool.id);
    }

    fn entered(&self, i: usize, tuple: &InteractionTuple, action: ActionClass) -> bool {
        tuple.action == action && self.tracks[i].prev_action != Some(action)
    }

    fn navigation(&mut self, input: &TickInput<'_>) {
        let nav = self.ann.navigation.clone().expect("validated annotation");
        let Some(target) = self.ann.target_ids.first().and_then(|id| input.scene.object(id)) else { return };
        let Some(g) = input.geometries.first() else { return };
        let cam = input.scene.camera.position();
        let axis = target.world_mesh.bounds().center - cam;
        let in_cone = (g.tip - cam).angle_to(axis) <= nav.view_half_angle;
        let d = point_mesh_distance(g.tip, &target.world_mesh).expect("nonempty").distance;
        if in_cone && nav.distance_band[0] <= d && d <= nav.distance_band[1] {
            self.nav_good += 1;
        }
        let frac = self.nav_good as f64 / input.tick.max(1) as f64;
        self.set("in_view_fraction", frac);
    }

    fn manipulation(&mut self, input: &TickInput<'_>, i: usize, out: &mut Vec<ErrorEvent>) {
        let spec = self.ann.manipulation.clone().expect("validated annotation");
        let tuple = &input.tuples[i];
        let tip = input.geometries[i].tip;
        let holding = matches!(tuple.action, ActionClass::Grasp | ActionClass::Pull);
        let was_holding = matches!(self.tracks[i].prev_action, Some(ActionClass::Grasp | ActionClass::Pull));
        if holding && !was_holding {
            if let Some(id) = tuple.tissue_id.as_deref().filter(|id| self.ann.is_target(id)) {
                let point = input
                    .contacts
                    .iter()
                    .filter(|c| c.tool_id == tuple.tool_id && c.object_id == id)
                    .map(|c| c.point)
                    .next()
                    .unwrap_or(tip);
                self.add("grasps_on_target", 1.0);
                self.set("grasp_error_m", point.distance(spec.grasp_point));
                self.tracks[i].grasp_start = Some(tip);
            }
        } else if !holding && was_holding {
            if let Some(start) = self.tracks[i].grasp_start.take() {
                let traction = tip - start;
                if traction.norm() >= MIN_TRACTION {
                    let err = traction.angle_to(spec.traction_dir);
                    self.max("traction_angle_err_rad", err);
                    if err > spec.max_angle_err {
                        self.emit(out, input.tick, ErrorKind::BadAngle, &tuple.tool_id);
                    }
                }
            }
        }
    }

    fn transfer(&mut self, input: &TickInput<'_>, out: &mut Vec<ErrorEvent>) {
        let spec = self.ann.transfer.clone().expect("validated annotation");
        let find = |id: &str| input.tools.iter().position(|t| t.id == id);
        let (Some(g), Some(r)) = (find(&spec.giver), find(&spec.receiver)) else { return };
        let released = self.entered(g, &input.tuples[g], ActionClass::Release);
        let receiver_holds = matches!(input.tuples[r].action, ActionClass::Grasp | ActionClass::Pull);
        if released && receiver_holds {
            let mid = (input.geometries[g].tip + input.geometries[r].tip) * 0.5;
            let off = segment_point_distance(spec.handoff_center, spec.receiver_pose.position, mid);
            self.add("handoffs", 1.0);
            self.max("handoff_offset_m", off);
            if off > spec.corridor_radius {
                self.emit(out, input.tick, ErrorKind::OffCorridor, &spec.giver);
            }
        }
    }

    fn cutting(&mut self, input: &TickInput<'_>, i: usize, out: &mut Vec<ErrorEvent>) {
        let spec = self.ann.cutting.clone().expect("validated annotation");
        let tuple = &input.tuples[i];
        if tuple.action != ActionClass::Cut {
            return;
        }
        let tip = input.geometries[i].tip;
        self.max("max_path_deviation_m", polyline_distance(&spec.path, tip));
        if self.entered(i, tuple, ActionClass::Cut)
            && tuple.tissue_id.as_deref().is_some_and(|id| self.ann.is_target(id))
        {
            self.add("cuts_on_target", 1.0);
            let off_plane = (tip - spec.plane_point).dot(spec.plane_normal).abs();
            self.max("max_plane_offset_m", off_plane);
            if off_plane > spec.corridor_radius {
                self.emit(out, input.tick, ErrorKind::MisalignedCut, &tuple.tool_id);
            }
        }
    }

    /// Signed distance of `p` to the nearest task target (negative inside).
    fn target_sd(&self, scene: &Scene, p: Vec3) -> f64 {
        self.ann
            .target_ids
            .iter()
            .filter_map(|id| scene.object(id))
            .map(|o| signed_distance(p, &o.world_mesh).expect("nonempty"))
            .fold(f64::INFINITY, f64::min)
    }

    fn suturing(&mut self, input: &TickInput<'_>, i: usize, out: &mut Vec<ErrorEvent>) {
        let tool = &input.tools[i];
        let Some(needle) = tool.held_needle else { return };
        let g = &input.geometries[i];
        let point = needle_point(&needle_pose(g, &needle), &needle, needle.arc_span);
        let sd = self.target_sd(input.scene, point);
        let prev = self.tracks[i].needle_prev.replace((point, sd));

        if let Some(bite) = self.tracks[i].bite.as_mut() {
            let chain = needle_chain(tool, g);
            let samples = chain.iter().map(|c| c.a).chain(chain.last().map(|c| c.b));
            let mut depth = bite.depth;
            for p in samples.collect::<Vec<_>>() {
                depth = depth.max(-self.target_sd(input.scene, p));
            }
            self.tracks[i].bite.as_mut().unwrap().depth = depth;
        }

        let Some((prev_point, prev_sd)) = prev else { return };
        let crossing = |a: f64, b: f64| prev_point + (point - prev_point) * (a / (a - b));
        if prev_sd >= 0.0 && sd < 0.0 && self.tracks[i].bite.is_none() {
            let entry = crossing(prev_sd, sd);
            let travel = point - prev_point;
            let angle_error = match self.arc {
                Some(arc) => travel.angle_to(arc.tangent(arc.start_angle)),
                None => 0.0,
            };
            self.tracks[i].bite = Some(Bite { entry, depth: -sd, angle_error });
        } else if prev_sd < 0.0 && sd >= 0.0 {
            if let Some(bite) = self.tracks[i].bite.take() {
                let exit = crossing(prev_sd, sd);
                self.finish_bite(out, input.tick, &tool.id, bite, Some(exit));
            }
        }
    }

    fn finish_bite(&mut self, out: &mut Vec<ErrorEvent>, tick: u64, tool: &str, bite: Bite, exit: Option<Vec3>) {
        let spec = self.ann.suturing.clone().expect("validated annotation");
        let entry_err = bite.entry.distance(spec.entry);
        let exit_err = exit.map_or(f64::INFINITY, |x| x.distance(spec.exit));
        self.add("bites", 1.0);
        self.set("bite_depth_m", bite.depth);
        self.set("angle_error_rad", bite.angle_error);
        self.set("entry_error_m", entry_err);
        if exit_err.is_finite() {
            self.set("exit_error_m", exit_err);
        }
        self.set("entry_hit", f64::from(u8::from(entry_err <= spec.marker_tolerance)));
        self.set("exit_hit", f64::from(u8::from(exit_err <= spec.marker_tolerance)));
        if bite.depth < spec.depth_band[0] {
            self.emit(out, tick, ErrorKind::ShallowBite, tool);
        } else if bite.depth > spec.depth_band[1] {
            self.emit(out, tick, ErrorKind::DeepBite, tool);
        }
        if bite.angle_error > spec.max_angle_err {
            self.emit(out, tick, ErrorKind::BadAngle, tool);
        }
    }

    /// Flushes open strokes and bites at session end and returns the result.
    /// Returns the flushed events alongside it.
    pub fn finish(&mut self, tools: &[ToolState], tick: u64) -> (Vec<ErrorEvent>, TaskResult) {
        let mut out = Vec::new();
        for (i, tool) in tools.iter().enumerate() {
            if let Some(s) = self.tracks[i].stroke.take() {
                self.close_stroke(&mut out, tool, s);
            }
            if let Some(bite) = self.tracks[i].bite.take() {
                self.finish_bite(&mut out, tick, &tool.id, bite, None);
            }
        }
        self.set("ticks", tick as f64);
        self.set("task_time_s", tick as f64 / self.tick_rate);
        self.set("errors", self.events.len() as f64);
        let success = super::is_success(self.ann.task, &self.metrics, &self.events);
        let result = TaskResult {
            task: self.ann.task,
            success,
            metrics: self.metrics.clone(),
            error_events: self.events.clone(),
        };
        (out, result)
    }
}
