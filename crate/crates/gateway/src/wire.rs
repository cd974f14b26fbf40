//! JSON messages exchanged with the trainer UI, one per WebSocket text frame.

use std::collections::BTreeMap;

use lapaware_core::feedback::Overlay;
use lapaware_core::geometry::{Pose, Vec3};
use lapaware_core::instrument::{ControlDelta, Joints};
use lapaware_core::interaction::InteractionTuple;
use lapaware_core::scene::Rgb;
use lapaware_core::sim::{Simulation, ToolControl, TEXT_TTL};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlTag {
    Control,
}

/// Client to server: one joint delta for one tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlMessage {
    #[serde(rename = "type")]
    pub tag: ControlTag,
    pub seq: u64,
    pub tool_id: String,
    #[serde(default)]
    pub d_pitch: f64,
    #[serde(default)]
    pub d_yaw: f64,
    #[serde(default)]
    pub d_roll: f64,
    #[serde(default)]
    pub d_insertion: f64,
    #[serde(default)]
    pub d_jaw: f64,
}

impl ControlMessage {
    pub fn new(seq: u64, tool_id: &str, delta: ControlDelta) -> ControlMessage {
        ControlMessage {
            tag: ControlTag::Control,
            seq,
            tool_id: tool_id.to_owned(),
            d_pitch: delta.d_pitch,
            d_yaw: delta.d_yaw,
            d_roll: delta.d_roll,
            d_insertion: delta.d_insertion,
            d_jaw: delta.d_jaw,
        }
    }

    pub fn to_control(&self) -> ToolControl {
        ToolControl {
            tool_id: self.tool_id.clone(),
            delta: ControlDelta {
                d_pitch: self.d_pitch,
                d_yaw: self.d_yaw,
                d_roll: self.d_roll,
                d_insertion: self.d_insertion,
                d_jaw: self.d_jaw,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Controller,
    Observer,
}

/// Server to client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    /// First message on every connection.
    Hello {
        role: Role,
        task: String,
        tools: Vec<String>,
        tick: u64,
    },
    State(Box<StateMessage>),
    Error {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seq: Option<u64>,
        message: String,
    },
}

impl ServerMessage {
    pub fn error(seq: Option<u64>, message: impl Into<String>) -> ServerMessage {
        ServerMessage::Error { seq, message: message.into() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolView {
    pub id: String,
    pub joints: Joints,
    pub tip: Vec3,
    pub jaw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectView {
    pub id: String,
    pub pose: Pose,
    pub current_color: Rgb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OverlayView {
    Guidance(Overlay),
    Trajectory(Trajectory),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    #[serde(rename = "type")]
    pub tag: TrajectoryTag,
    pub tool_id: String,
    pub points: Vec<Vec3>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryTag {
    Trajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextView {
    pub text: String,
    pub ttl_ticks: u64,
}

/// The simulation as of one completed tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateMessage {
    pub tick: u64,
    pub tools: Vec<ToolView>,
    pub objects: Vec<ObjectView>,
    pub overlays: Vec<OverlayView>,
    pub texts: Vec<TextView>,
    pub tuples: Vec<InteractionTuple>,
    pub score_partial: BTreeMap<String, f64>,
}

impl StateMessage {
    pub fn capture(sim: &Simulation) -> StateMessage {
        let tick = sim.tick();
        let tools = sim
            .tools()
            .iter()
            .zip(sim.geometries())
            .map(|(t, g)| ToolView { id: t.id.clone(), joints: t.joints, tip: g.tip, jaw: t.joints.jaw })
            .collect();
        let objects = sim
            .scene()
            .objects
            .iter()
            .map(|o| ObjectView { id: o.id.clone(), pose: o.pose, current_color: o.current_color })
            .collect();
        let mut overlays: Vec<OverlayView> = sim.overlays().into_iter().map(OverlayView::Guidance).collect();
        for (t, trail) in sim.tools().iter().zip(sim.trails()) {
            overlays.push(OverlayView::Trajectory(Trajectory {
                tag: TrajectoryTag::Trajectory,
                tool_id: t.id.clone(),
                points: trail.iter().copied().collect(),
            }));
        }
        let texts = sim
            .texts()
            .map(|t| TextView { text: t.text.clone(), ttl_ticks: (t.tick + TEXT_TTL).saturating_sub(tick) })
            .collect();
        StateMessage {
            tick,
            tools,
            objects,
            overlays,
            texts,
            tuples: sim.tuples().to_vec(),
            score_partial: sim.metrics().clone(),
        }
    }
}

/// Per-connection checks applied before a control reaches the simulation.
#[derive(Debug, Clone)]
pub struct ControlGate {
    tools: Vec<String>,
    last_seq: Option<u64>,
}

impl ControlGate {
    pub fn new(tools: Vec<String>) -> ControlGate {
        ControlGate { tools, last_seq: None }
    }

    /// Parses one text frame. Rejected frames leave the gate unchanged.
    pub fn admit(&mut self, text: &str) -> Result<ControlMessage, ServerMessage> {
        let msg: ControlMessage = serde_json::from_str(text).map_err(|e| {
            let seq = serde_json::from_str::<serde_json::Value>(text).ok().and_then(|v| v["seq"].as_u64());
            ServerMessage::error(seq, format!("malformed control message: {e}"))
        })?;
        if self.last_seq.is_some_and(|last| msg.seq <= last) {
            return Err(ServerMessage::error(Some(msg.seq), "seq must increase"));
        }
        if !self.tools.contains(&msg.tool_id) {
            return Err(ServerMessage::error(Some(msg.seq), "unknown tool"));
        }
        self.last_seq = Some(msg.seq);
        Ok(msg)
    }
}
