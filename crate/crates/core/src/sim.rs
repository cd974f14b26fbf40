//! The per-tick simulation loop and its log stream.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::contact::{classify_depth, detect_contacts, ContactEvent, DepthClass};
use crate::feedback::{
    make_guidance, update_trajectory, FeedbackAction, FeedbackEngine, FeedbackKind, Overlay, CORRECT_OPERATION,
};
use crate::geometry::{point_mesh_distance, Vec3};
use crate::instrument::{apply_control, tool_geometry, ControlDelta, ToolGeometry, ToolState};
use crate::interaction::{
    build_tuple, primary_contact, ActionClass, ActionTracker, InteractionThresholds, InteractionTuple, TupleWindow,
};
use crate::perception::{
    compute_box2d, compute_box3d, render_label_image, tailored_sigma, DetectorNoise, Frame, OracleDetector,
    TipDetector, TipEstimate,
};
use crate::scene::{Rgb, Scene};
use crate::session::{
    hex, EndSnapshot, Fnv1a, LogDigest, LogRecord, RecordKind, Snapshot, StartSnapshot, FORMAT_VERSION,
};
use crate::tasks::{TaskAnnotation, TaskEvaluator, TaskKind, TaskResult, TickInput};

/// Ticks an on-screen message stays visible.
pub const TEXT_TTL: u64 = 90;

fn default_unsafe_depth() -> f64 {
    0.004
}
fn default_approach() -> f64 {
    0.02
}
fn default_pull_speed() -> f64 {
    0.002
}
fn default_filter_window() -> usize {
    5
}
fn default_perception_every() -> u64 {
    4
}
fn default_trail_max() -> usize {
    crate::feedback::TRAIL_MAX
}
fn default_tick_rate() -> f64 {
    60.0
}

/// Run parameters. Stored in the scene file and echoed into every log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Penetration depth above which a contact is unsafe, m.
    #[serde(default = "default_unsafe_depth")]
    pub unsafe_depth: f64,
    #[serde(default = "default_approach")]
    pub approach_distance: f64,
    #[serde(default = "default_pull_speed")]
    pub pull_speed: f64,
    /// Temporal filter window, ticks.
    #[serde(default = "default_filter_window")]
    pub filter_window: usize,
    #[serde(default = "default_perception_every")]
    pub perception_every: u64,
    #[serde(default = "default_trail_max")]
    pub trail_max: usize,
    /// Fixed heatmap sigma in pixels; unset derives it from tool depth.
    #[serde(default)]
    pub heatmap_sigma: Option<f64>,
    #[serde(default)]
    pub noise: DetectorNoise,
    #[serde(default = "default_tick_rate")]
    pub tick_rate: f64,
    /// Embed heatmaps and label images in perception records.
    #[serde(default)]
    pub record_images: bool,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl SimConfig {
    /// Checks ranges; the error names the offending field.
    pub fn validate(&self) -> Result<(), &'static str> {
        let pos = |x: f64| x.is_finite() && x > 0.0;
        let nonneg = |x: f64| x.is_finite() && x >= 0.0;
        if !pos(self.unsafe_depth) {
            return Err("unsafe_depth");
        }
        if !nonneg(self.approach_distance) {
            return Err("approach_distance");
        }
        if !nonneg(self.pull_speed) {
            return Err("pull_speed");
        }
        if self.filter_window == 0 {
            return Err("filter_window");
        }
        if self.perception_every == 0 {
            return Err("perception_every");
        }
        if self.trail_max < 2 {
            return Err("trail_max");
        }
        if self.heatmap_sigma.is_some_and(|s| !pos(s)) {
            return Err("heatmap_sigma");
        }
        if !nonneg(self.noise.pixel_sigma) {
            return Err("noise.pixel_sigma");
        }
        if !(0.0..=1.0).contains(&self.noise.dropout) {
            return Err("noise.dropout");
        }
        if !pos(self.tick_rate) {
            return Err("tick_rate");
        }
        Ok(())
    }

    pub fn thresholds(&self) -> InteractionThresholds {
        InteractionThresholds { approach_distance: self.approach_distance, pull_speed: self.pull_speed }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("unknown tool {0:?}")]
    UnknownTool(String),
    #[error("scene has no {0} annotation")]
    NoAnnotation(TaskKind),
    #[error("invalid config field `{0}`")]
    InvalidConfig(&'static str),
    #[error("session already finished")]
    Finished,
}

/// One control message: a joint delta for one tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolControl {
    pub tool_id: String,
    pub delta: ControlDelta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenText {
    pub text: String,
    pub tick: u64,
}

/// A deterministic training session on one scene and task.
#[derive(Debug, Clone)]
pub struct Simulation {
    scene: Scene,
    ann: TaskAnnotation,
    config: SimConfig,
    tools: Vec<ToolState>,
    geometries: Vec<ToolGeometry>,
    trackers: Vec<ActionTracker>,
    windows: Vec<TupleWindow>,
    tuples: Vec<InteractionTuple>,
    logged_keys: Vec<Option<(Option<String>, ActionClass)>>,
    feedback: FeedbackEngine,
    evaluator: TaskEvaluator,
    detector: OracleDetector,
    estimates: Vec<Option<TipEstimate>>,
    trails: Vec<VecDeque<Vec3>>,
    texts: Vec<ScreenText>,
    contacts: Vec<ContactEvent>,
    tick: u64,
    digest: LogDigest,
    start: LogRecord,
    result: Option<TaskResult>,
}

impl Simulation {
    pub fn new(scene: Scene, task: TaskKind, config: SimConfig) -> Result<Simulation, SimError> {
        config.validate().map_err(SimError::InvalidConfig)?;
        let ann = scene.annotation(task).cloned().ok_or(SimError::NoAnnotation(task))?;
        let tools: Vec<ToolState> = scene.tools.iter().map(ToolState::from_spec).collect();
        let geometries: Vec<ToolGeometry> = tools.iter().map(|t| geometry_of(&scene, t)).collect();
        let trackers = tools.iter().zip(&geometries).map(|(t, g)| ActionTracker::new(t.joints.jaw, g.tip)).collect();
        let n = tools.len();
        let evaluator = TaskEvaluator::new(ann.clone(), &tools, config.tick_rate);
        let start = LogRecord::new(
            0,
            RecordKind::Snapshot,
            Snapshot::Start(StartSnapshot {
                format_version: FORMAT_VERSION,
                scene_hash: hex(scene.hash()),
                task,
                seed: config.seed,
                config: config.clone(),
            }),
        );
        let mut digest = LogDigest::new();
        digest.push_line(&start.to_line());
        let trails = geometries.iter().map(|g| VecDeque::from([g.tip])).collect();
        Ok(Simulation {
            windows: (0..n).map(|_| TupleWindow::new(config.filter_window)).collect(),
            tuples: Vec::new(),
            logged_keys: vec![None; n],
            feedback: FeedbackEngine::new(),
            detector: OracleDetector::new(config.noise, config.seed),
            estimates: vec![None; n],
            texts: Vec::new(),
            contacts: Vec::new(),
            tick: 0,
            result: None,
            scene,
            ann,
            config,
            tools,
            geometries,
            trackers,
            evaluator,
            trails,
            digest,
            start,
        })
    }

    /// The opening snapshot, tick 0.
    pub fn start_record(&self) -> LogRecord {
        self.start.clone()
    }

    fn emit(&mut self, out: &mut Vec<LogRecord>, kind: RecordKind, payload: impl Serialize) {
        let r = LogRecord::new(self.tick, kind, payload);
        self.digest.push_line(&r.to_line());
        out.push(r);
    }

    fn tool_index(&self, id: &str) -> Option<usize> {
        self.tools.iter().position(|t| t.id == id)
    }

    /// Advances one tick. Controls apply in order; an unknown tool id rejects
    /// the whole batch before anything changes.
    pub fn step(&mut self, controls: &[ToolControl]) -> Result<Vec<LogRecord>, SimError> {
        if self.result.is_some() {
            return Err(SimError::Finished);
        }
        if let Some(c) = controls.iter().find(|c| self.tool_index(&c.tool_id).is_none()) {
            return Err(SimError::UnknownTool(c.tool_id.clone()));
        }
        self.tick += 1;
        let tick = self.tick;
        let mut out = Vec::new();

        for c in controls {
            let i = self.tool_index(&c.tool_id).expect("checked above");
            self.tools[i] = apply_control(&self.tools[i], &c.delta);
            self.emit(&mut out, RecordKind::Control, c);
        }
        self.geometries = self.tools.iter().map(|t| geometry_of(&self.scene, t)).collect();

        self.contacts = detect_contacts(&self.scene, &self.tools, tick);
        if !self.contacts.is_empty() {
            let events = self.contacts.clone();
            self.emit(&mut out, RecordKind::Contact, json!({ "events": events }));
        }

        let th = self.config.thresholds();
        let mut tuples = Vec::with_capacity(self.tools.len());
        for i in 0..self.tools.len() {
            let tool = &self.tools[i];
            let g = &self.geometries[i];
            let mine: Vec<ContactEvent> = self.contacts.iter().filter(|c| c.tool_id == tool.id).cloned().collect();
            let nearest = self.nearest_target_distance(g.tip);
            let action = self.trackers[i].step(tool, g.tip, &mine, nearest, &th);
            let raw =
                build_tuple(tool, g, &self.scene, &self.scene.camera, action, primary_contact(&mine, action), tick)
                    .expect("contact actions carry a contact on a scene object");
            let filtered = self.windows[i].push(raw);
            let key = Some((filtered.tissue_id.clone(), filtered.action));
            if key != self.logged_keys[i] {
                self.logged_keys[i] = key;
                self.emit(&mut out, RecordKind::Tuple, &filtered);
            }
            tuples.push(filtered);
        }
        self.tuples = tuples;

        for i in 0..self.tools.len() {
            let depth = self.depth_class(i);
            let actions = self.feedback.update(&self.scene, &self.ann, &self.tuples[i], depth, tick);
            for a in actions {
                self.apply_feedback(&a);
                self.emit(&mut out, RecordKind::Feedback, &a);
            }
            let tip = self.geometries[i].tip;
            update_trajectory(&mut self.trails[i], tip, self.config.trail_max);
        }

        let events = self.evaluator.evaluate_tick(&TickInput {
            tick,
            scene: &self.scene,
            tools: &self.tools,
            geometries: &self.geometries,
            tuples: &self.tuples,
            contacts: &self.contacts,
            unsafe_depth: self.config.unsafe_depth,
        });
        for e in events {
            self.emit(&mut out, RecordKind::TaskEvent, e);
        }

        if tick.is_multiple_of(self.config.perception_every) {
            let payload = self.perceive();
            self.emit(&mut out, RecordKind::Perception, payload);
        }
        Ok(out)
    }

    fn nearest_target_distance(&self, tip: Vec3) -> f64 {
        self.ann
            .target_ids
            .iter()
            .filter_map(|id| self.scene.object(id))
            .map(|o| point_mesh_distance(tip, &o.world_mesh).expect("scene meshes are nonempty").distance)
            .fold(f64::INFINITY, f64::min)
    }

    fn depth_class(&self, i: usize) -> DepthClass {
        let id = &self.tools[i].id;
        let unsafe_depth = self.config.unsafe_depth;
        if self.contacts.iter().any(|c| c.tool_id == *id && classify_depth(c, unsafe_depth) == DepthClass::UnsafeDepth)
        {
            DepthClass::UnsafeDepth
        } else {
            DepthClass::SafeContact
        }
    }

    fn apply_feedback(&mut self, a: &FeedbackAction) {
        match a.kind {
            FeedbackKind::ColorWrite => {
                if let (Some(id), Some(color)) = (&a.target_object, a.color) {
                    self.scene.set_object_color(id, color).expect("feedback names scene objects");
                }
            }
            FeedbackKind::ScreenText => {
                if let Some(text) = &a.text {
                    self.texts.push(ScreenText { text: text.clone(), tick: a.tick });
                }
            }
            FeedbackKind::Overlay | FeedbackKind::TrajectoryLine => {}
        }
        let now = self.tick;
        self.texts.retain(|t| t.tick + TEXT_TTL > now);
    }

    fn perceive(&mut self) -> serde_json::Value {
        let camera = self.scene.camera;
        let mut tools = Vec::new();
        let mut heatmaps = BTreeMap::new();
        for i in 0..self.tools.len() {
            let tool = &self.tools[i];
            let g = &self.geometries[i];
            let trocar = self.scene.trocar(&tool.trocar_id).expect("validated scene").point;
            let sigma = self.config.heatmap_sigma.unwrap_or_else(|| tailored_sigma(&camera, trocar, g.tip));
            let det = self.detector.detect(&Frame { camera: &camera, tip: g.tip, sigma });
            self.estimates[i] = det.estimate;
            tools.push(json!({
                "tool_id": tool.id,
                "estimate": det.estimate,
                "box": crate::interaction::instrument_box(&camera, tool, g),
            }));
            if self.config.record_images {
                heatmaps.insert(tool.id.clone(), det.heatmap.to_base64());
            }
        }
        let objects: Vec<_> = self
            .scene
            .objects
            .iter()
            .map(|o| json!({ "id": o.id, "box2d": compute_box2d(&camera, o), "box3d": compute_box3d(o) }))
            .collect();
        let mut payload = json!({ "tools": tools, "objects": objects });
        if self.config.record_images {
            payload["heatmaps"] = json!(heatmaps);
            payload["labels"] = json!(render_label_image(&camera, &self.scene, &self.tools).to_base64());
        }
        payload
    }

    /// Closes the session: flushes pending task events, announces success and
    /// writes the end snapshot. Later calls return the same result and no
    /// records.
    pub fn finish(&mut self) -> (Vec<LogRecord>, TaskResult) {
        if let Some(r) = &self.result {
            return (Vec::new(), r.clone());
        }
        let mut out = Vec::new();
        let (events, result) = self.evaluator.finish(&self.tools, self.tick);
        for e in events {
            self.emit(&mut out, RecordKind::TaskEvent, e);
        }
        if result.success {
            let a = FeedbackAction::screen_text(self.tick, CORRECT_OPERATION);
            self.apply_feedback(&a);
            self.emit(&mut out, RecordKind::Feedback, &a);
        }
        let end = Snapshot::End(EndSnapshot {
            state_hash: hex(self.state_hash()),
            ticks: self.tick,
            metrics: result.metrics.clone(),
            success: result.success,
            digest: hex(self.digest.finish()),
        });
        self.emit(&mut out, RecordKind::Snapshot, end);
        self.result = Some(result.clone());
        (out, result)
    }

    /// Hash of the dynamic state: tick, tool joints, object colors and trail
    /// lengths.
    pub fn state_hash(&self) -> u64 {
        let mut h = Fnv1a::new();
        h.write_u64(self.tick);
        for t in &self.tools {
            h.write_str(&t.id);
            let j = t.joints;
            for v in [j.pitch, j.yaw, j.roll, j.insertion, j.jaw] {
                h.write_f64(v);
            }
        }
        for o in &self.scene.objects {
            h.write_str(&o.id);
            let c = o.current_color;
            for v in [c.r, c.g, c.b] {
                h.write_f64(v);
            }
        }
        for trail in &self.trails {
            h.write_u64(trail.len() as u64);
        }
        h.finish()
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn task(&self) -> TaskKind {
        self.ann.task
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn tools(&self) -> &[ToolState] {
        &self.tools
    }

    pub fn geometries(&self) -> &[ToolGeometry] {
        &self.geometries
    }

    pub fn contacts(&self) -> &[ContactEvent] {
        &self.contacts
    }

    /// Filtered tuples of the last tick, in tool order.
    pub fn tuples(&self) -> &[InteractionTuple] {
        &self.tuples
    }

    pub fn trails(&self) -> &[VecDeque<Vec3>] {
        &self.trails
    }

    pub fn estimates(&self) -> &[Option<TipEstimate>] {
        &self.estimates
    }

    /// Messages still on screen.
    pub fn texts(&self) -> impl Iterator<Item = &ScreenText> {
        let now = self.tick;
        self.texts.iter().filter(move |t| t.tick + TEXT_TTL > now)
    }

    pub fn colors(&self) -> impl Iterator<Item = (&str, Rgb)> {
        self.scene.objects.iter().map(|o| (o.id.as_str(), o.current_color))
    }

    pub fn overlays(&self) -> Vec<Overlay> {
        let pairs: Vec<_> = self.tools.iter().zip(&self.geometries).collect();
        make_guidance(&self.ann, &self.scene, &pairs).unwrap_or_default()
    }

    pub fn metrics(&self) -> &BTreeMap<String, f64> {
        self.evaluator.metrics()
    }

    pub fn result(&self) -> Option<&TaskResult> {
        self.result.as_ref()
    }
}

fn geometry_of(scene: &Scene, tool: &ToolState) -> ToolGeometry {
    let trocar = scene.trocar(&tool.trocar_id).expect("validated scene");
    tool_geometry(tool, trocar).expect("trocar matches")
}

/// Runs a scripted session end to end and returns its log lines.
pub fn run_script(
    scene: Scene,
    task: TaskKind,
    config: SimConfig,
    script: &[Vec<ToolControl>],
) -> Result<(Vec<LogRecord>, TaskResult), SimError> {
    let mut sim = Simulation::new(scene, task, config)?;
    let mut records = vec![sim.start_record()];
    for controls in script {
        records.extend(sim.step(controls)?);
    }
    let (tail, result) = sim.finish();
    records.extend(tail);
    Ok((records, result))
}

/// Joins records into log text, one line each.
pub fn to_log_text(records: &[LogRecord]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&r.to_line());
        s.push('\n');
    }
    s
}
