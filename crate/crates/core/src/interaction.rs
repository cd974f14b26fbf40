//! Interaction quintuples: which instrument is doing what to which tissue.
//!
//! A rule-based state machine classifies each tool's action per tick from its
//! contacts and jaw motion, and a short majority window smooths the result.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contact::ContactEvent;
use crate::geometry::{Camera, Vec3};
use crate::instrument::{InstrumentClass, Part, ToolGeometry, ToolState};
use crate::perception::{box_from_points, compute_box2d, Box2D};
use crate::scene::{Scene, TissueClass};

/// Jaw opening at or below which the jaws count as closed.
pub const JAW_CLOSED: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionClass {
    Idle,
    Approach,
    Touch,
    Grasp,
    Pull,
    Cut,
    Pierce,
    Release,
}

impl ActionClass {
    pub const ALL: [ActionClass; 8] = [
        ActionClass::Idle,
        ActionClass::Approach,
        ActionClass::Touch,
        ActionClass::Grasp,
        ActionClass::Pull,
        ActionClass::Cut,
        ActionClass::Pierce,
        ActionClass::Release,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActionClass::Idle => "idle",
            ActionClass::Approach => "approach",
            ActionClass::Touch => "touch",
            ActionClass::Grasp => "grasp",
            ActionClass::Pull => "pull",
            ActionClass::Cut => "cut",
            ActionClass::Pierce => "pierce",
            ActionClass::Release => "release",
        }
    }

    /// Whether the action involves a tissue.
    pub fn is_contact(self) -> bool {
        !matches!(self, ActionClass::Idle | ActionClass::Approach)
    }
}

impl fmt::Display for ActionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Transition graph: pull and release only follow a held grasp; every other
/// action may follow anything.
pub fn is_legal_transition(prev: ActionClass, next: ActionClass) -> bool {
    match next {
        ActionClass::Pull | ActionClass::Release => matches!(prev, ActionClass::Grasp | ActionClass::Pull),
        _ => true,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionThresholds {
    /// Tip-to-target distance below which a free tool is approaching, m.
    pub approach_distance: f64,
    /// Retreat speed from the grasp point above which a grasp becomes a pull, m/tick.
    pub pull_speed: f64,
}

impl Default for InteractionThresholds {
    fn default() -> Self {
        InteractionThresholds { approach_distance: 0.02, pull_speed: 0.002 }
    }
}

/// Everything [`classify_action`] looks at for one tool and tick.
#[derive(Debug, Clone, Copy)]
pub struct ActionInput<'a> {
    pub class: InstrumentClass,
    pub jaw: f64,
    pub prev_jaw: f64,
    /// Contacts of this tool only.
    pub contacts: &'a [ContactEvent],
    pub prev: ActionClass,
    pub nearest_target_distance: f64,
    /// Growth this tick of the tip's distance from the grasp anchor, m.
    pub retreat: f64,
}

/// Rule table, first match wins:
///
/// | condition | action |
/// |---|---|
/// | no contact, target within approach distance | approach |
/// | no contact | idle |
/// | needle in contact | pierce |
/// | scissors closing | cut |
/// | holding, jaw opening | release |
/// | holding, retreating faster than pull speed | pull |
/// | holding | grasp |
/// | jaw closing through the closed threshold | grasp |
/// | otherwise | touch |
///
/// "Holding" means the previous action was grasp or pull.
pub fn classify_action(input: &ActionInput<'_>, th: &InteractionThresholds) -> ActionClass {
    if input.contacts.is_empty() {
        return if input.nearest_target_distance <= th.approach_distance {
            ActionClass::Approach
        } else {
            ActionClass::Idle
        };
    }
    if input.contacts.iter().any(|c| c.part == Part::Needle) {
        return ActionClass::Pierce;
    }
    if input.class == InstrumentClass::Scissors && input.jaw < input.prev_jaw {
        return ActionClass::Cut;
    }
    if matches!(input.prev, ActionClass::Grasp | ActionClass::Pull) {
        if input.jaw > input.prev_jaw {
            return ActionClass::Release;
        }
        if input.retreat > th.pull_speed {
            return ActionClass::Pull;
        }
        return ActionClass::Grasp;
    }
    if input.class.has_jaws() && input.prev_jaw > JAW_CLOSED && input.jaw <= JAW_CLOSED {
        return ActionClass::Grasp;
    }
    ActionClass::Touch
}

/// The contact a tuple reports: for piercing the deepest needle contact,
/// otherwise the deepest contact. Ties keep the earlier event.
pub fn primary_contact(contacts: &[ContactEvent], action: ActionClass) -> Option<&ContactEvent> {
    let pool = contacts.iter().filter(|c| action != ActionClass::Pierce || c.part == Part::Needle);
    pool.fold(None, |best: Option<&ContactEvent>, c| match best {
        Some(b) if b.depth >= c.depth => Some(b),
        _ => Some(c),
    })
}

/// Per-tool memory for the state machine: previous jaw and action, and the
/// grasp anchor used to measure retreat.
#[derive(Debug, Clone)]
pub struct ActionTracker {
    prev: ActionClass,
    prev_jaw: f64,
    anchor: Option<Vec3>,
    prev_tip: Vec3,
}

impl ActionTracker {
    pub fn new(initial_jaw: f64, tip: Vec3) -> ActionTracker {
        ActionTracker { prev: ActionClass::Idle, prev_jaw: initial_jaw, anchor: None, prev_tip: tip }
    }

    pub fn previous(&self) -> ActionClass {
        self.prev
    }

    /// Classifies this tick and advances the tracker.
    pub fn step(
        &mut self,
        tool: &ToolState,
        tip: Vec3,
        contacts: &[ContactEvent],
        nearest_target_distance: f64,
        th: &InteractionThresholds,
    ) -> ActionClass {
        let retreat = match self.anchor {
            Some(a) => tip.distance(a) - self.prev_tip.distance(a),
            None => 0.0,
        };
        let action = classify_action(
            &ActionInput {
                class: tool.instrument_class,
                jaw: tool.joints.jaw,
                prev_jaw: self.prev_jaw,
                contacts,
                prev: self.prev,
                nearest_target_distance,
                retreat,
            },
            th,
        );
        match action {
            ActionClass::Grasp | ActionClass::Pull => {
                if self.anchor.is_none() {
                    self.anchor = primary_contact(contacts, action).map(|c| c.point);
                }
            }
            _ => self.anchor = None,
        }
        self.prev = action;
        self.prev_jaw = tool.joints.jaw;
        self.prev_tip = tip;
        action
    }
}

/// ⟨instrument class, instrument box, tissue class, tissue box, action⟩ plus
/// the ids it refers to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionTuple {
    pub tick: u64,
    pub tool_id: String,
    pub instrument_class: InstrumentClass,
    pub instrument_box: Option<Box2D>,
    pub tissue_id: Option<String>,
    pub tissue_class: Option<TissueClass>,
    pub tissue_box: Option<Box2D>,
    pub action: ActionClass,
}

impl InteractionTuple {
    /// Key compared by the temporal filter.
    pub fn key(&self) -> (Option<&str>, ActionClass) {
        (self.tissue_id.as_deref(), self.action)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum InteractionError {
    #[error("action {0} requires a contact")]
    MissingContact(ActionClass),
    #[error("unknown object {0:?}")]
    UnknownObject(String),
}

/// 2D box around a tool's capsules as seen by `camera`.
pub fn instrument_box(camera: &Camera, tool: &ToolState, geometry: &ToolGeometry) -> Option<Box2D> {
    let mut pts = vec![geometry.shaft.a, geometry.shaft.b];
    pts.extend(geometry.jaws.iter().map(|c| c.b));
    box_from_points(camera, pts, tool.instrument_class.name())
}

pub fn build_tuple(
    tool: &ToolState,
    geometry: &ToolGeometry,
    scene: &Scene,
    camera: &Camera,
    action: ActionClass,
    contact: Option<&ContactEvent>,
    tick: u64,
) -> Result<InteractionTuple, InteractionError> {
    let instrument_box = instrument_box(camera, tool, geometry);
    let (tissue_id, tissue_class, tissue_box) = if action.is_contact() {
        let c = contact.ok_or(InteractionError::MissingContact(action))?;
        let obj = scene.object(&c.object_id).ok_or_else(|| InteractionError::UnknownObject(c.object_id.clone()))?;
        (Some(obj.id.clone()), Some(obj.tissue_class), compute_box2d(camera, obj))
    } else {
        (None, None, None)
    };
    Ok(InteractionTuple {
        tick,
        tool_id: tool.id.clone(),
        instrument_class: tool.instrument_class,
        instrument_box,
        tissue_id,
        tissue_class,
        tissue_box,
        action,
    })
}

/// Majority vote over the window on (tissue, action). Ties go to the key seen
/// most recently. The instrument box and tick come from the newest tuple; the
/// tissue box from the newest tuple carrying the winning key.
pub fn temporal_filter(window: &[InteractionTuple]) -> InteractionTuple {
    let newest = window.last().expect("window is nonempty");
    // (count, index of last occurrence) per distinct key, in first-seen order.
    let mut tally: Vec<(usize, usize)> = Vec::new();
    let mut keys = Vec::new();
    for (i, t) in window.iter().enumerate() {
        match keys.iter().position(|k| *k == t.key()) {
            Some(j) => tally[j] = (tally[j].0 + 1, i),
            None => {
                keys.push(t.key());
                tally.push((1, i));
            }
        }
    }
    let (_, last) = tally.iter().copied().max().expect("window is nonempty");
    let winner = &window[last];
    InteractionTuple {
        tick: newest.tick,
        tool_id: newest.tool_id.clone(),
        instrument_class: newest.instrument_class,
        instrument_box: newest.instrument_box.clone(),
        ..winner.clone()
    }
}

/// Sliding window of the last `k` raw tuples of one tool.
#[derive(Debug, Clone)]
pub struct TupleWindow {
    k: usize,
    buf: VecDeque<InteractionTuple>,
}

impl TupleWindow {
    pub fn new(k: usize) -> TupleWindow {
        TupleWindow { k: k.max(1), buf: VecDeque::with_capacity(k.max(1)) }
    }

    /// Adds a raw tuple and returns the filtered one.
    pub fn push(&mut self, t: InteractionTuple) -> InteractionTuple {
        if self.buf.len() == self.k {
            self.buf.pop_front();
        }
        self.buf.push_back(t);
        temporal_filter(self.buf.make_contiguous())
    }
}
