//! Trocar-constrained instrument kinematics.
//!
//! A tool has five joints: pitch and yaw tilt the shaft about the fixed trocar
//! point, roll spins it about its own axis, insertion slides it through the
//! port, and jaw opens the end effector. The shaft always passes through the
//! trocar because the tip is computed from it, never the other way round.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Capsule, Pose, Quat, Vec3};
use crate::scene::Trocar;

pub const INSERTION_MIN: f64 = 0.01;
pub const INSERTION_MAX: f64 = 0.30;
pub const ANGLE_LIMIT: f64 = 1.2;
pub const MAX_ANGLE_STEP: f64 = 0.05;
pub const MAX_INSERTION_STEP: f64 = 0.005;
pub const MAX_JAW_STEP: f64 = 0.1;

pub const SHAFT_RADIUS: f64 = 0.003;
/// Length of the tip segment split off the end of the shaft for contacts.
pub const TIP_LENGTH: f64 = 0.01;
pub const JAW_LENGTH: f64 = 0.012;
pub const JAW_RADIUS: f64 = 0.0015;
/// Jaw half-opening per unit of `jaw`, radians.
pub const JAW_SPREAD: f64 = 0.5;
pub const NEEDLE_RADIUS: f64 = 0.0005;
pub const NEEDLE_SAMPLES: usize = 25;
/// Length of the simulated exterior handle.
pub const HANDLE_LENGTH: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum InstrumentError {
    #[error("unknown trocar {0:?}")]
    UnknownTrocar(String),
    #[error("tool holds no needle")]
    NoNeedle,
    #[error("needle curve needs at least 2 samples")]
    TooFewSamples,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstrumentClass {
    Grasper,
    Scissors,
    NeedleDriver,
    Hook,
}

impl InstrumentClass {
    pub fn name(self) -> &'static str {
        match self {
            InstrumentClass::Grasper => "grasper",
            InstrumentClass::Scissors => "scissors",
            InstrumentClass::NeedleDriver => "needle_driver",
            InstrumentClass::Hook => "hook",
        }
    }

    pub fn has_jaws(self) -> bool {
        self != InstrumentClass::Hook
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Joints {
    #[serde(default)]
    pub pitch: f64,
    #[serde(default)]
    pub yaw: f64,
    #[serde(default)]
    pub roll: f64,
    #[serde(default = "min_insertion")]
    pub insertion: f64,
    #[serde(default)]
    pub jaw: f64,
}

fn min_insertion() -> f64 {
    INSERTION_MIN
}

impl Default for Joints {
    fn default() -> Self {
        Joints { pitch: 0.0, yaw: 0.0, roll: 0.0, insertion: INSERTION_MIN, jaw: 0.0 }
    }
}

impl Joints {
    pub fn in_range(&self) -> bool {
        self.pitch.abs() <= ANGLE_LIMIT
            && self.yaw.abs() <= ANGLE_LIMIT
            && self.roll > -PI
            && self.roll <= PI
            && (INSERTION_MIN..=INSERTION_MAX).contains(&self.insertion)
            && (0.0..=1.0).contains(&self.jaw)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Needle {
    pub radius: f64,
    #[serde(default = "default_span")]
    pub arc_span: f64,
    /// Needle frame relative to the tool tip frame. The arc lies in its XY
    /// plane, centered on its origin, from angle 0 to `arc_span`; the sharp
    /// point is at `arc_span`.
    #[serde(default)]
    pub frame: Pose,
}

fn default_span() -> f64 {
    PI
}

/// Tool placement as written in a scene file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolSpec {
    pub id: String,
    pub class: InstrumentClass,
    pub trocar: String,
    #[serde(default)]
    pub joints: Joints,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub needle: Option<Needle>,
}

impl ToolSpec {
    pub fn default_for(trocar: &str) -> ToolSpec {
        ToolSpec {
            id: trocar.to_owned(),
            class: InstrumentClass::Grasper,
            trocar: trocar.to_owned(),
            joints: Joints::default(),
            needle: None,
        }
    }

    /// Returns the name of the first invalid field.
    pub fn validate(&self) -> Result<(), &'static str> {
        if !self.joints.in_range() {
            return Err("joints");
        }
        if let Some(n) = &self.needle {
            if !(n.radius > 0.0 && n.radius.is_finite()) {
                return Err("needle.radius");
            }
            if !(n.arc_span > 0.0 && n.arc_span < TAU) {
                return Err("needle.arc_span");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolState {
    pub id: String,
    pub instrument_class: InstrumentClass,
    pub trocar_id: String,
    pub joints: Joints,
    pub held_needle: Option<Needle>,
}

impl ToolState {
    pub fn from_spec(spec: &ToolSpec) -> ToolState {
        ToolState {
            id: spec.id.clone(),
            instrument_class: spec.class,
            trocar_id: spec.trocar.clone(),
            joints: spec.joints,
            held_needle: spec.needle,
        }
    }
}

/// Per-tick joint increments requested by the trainee.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlDelta {
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

fn limit(x: f64, max: f64) -> f64 {
    if x.is_finite() {
        x.clamp(-max, max)
    } else {
        0.0
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Applies one tick of control. Increments are rate-limited first, then the
/// joints are clamped to their ranges; non-finite increments count as zero.
pub fn apply_control(state: &ToolState, delta: &ControlDelta) -> ToolState {
    let j = state.joints;
    let joints = Joints {
        pitch: (j.pitch + limit(delta.d_pitch, MAX_ANGLE_STEP)).clamp(-ANGLE_LIMIT, ANGLE_LIMIT),
        yaw: (j.yaw + limit(delta.d_yaw, MAX_ANGLE_STEP)).clamp(-ANGLE_LIMIT, ANGLE_LIMIT),
        roll: wrap_angle(j.roll + limit(delta.d_roll, MAX_ANGLE_STEP)),
        insertion: (j.insertion + limit(delta.d_insertion, MAX_INSERTION_STEP)).clamp(INSERTION_MIN, INSERTION_MAX),
        jaw: (j.jaw + limit(delta.d_jaw, MAX_JAW_STEP)).clamp(0.0, 1.0),
    };
    ToolState { joints, ..state.clone() }
}

/// Rest frame of a trocar: pitch axis, yaw axis and the rest direction.
///
/// The pitch axis is world +Y projected orthogonal to the rest axis (world +X
/// when the rest axis is within ~25° of Y); yaw turns about `rest × pitch`.
#[derive(Debug, Clone, Copy)]
pub struct TrocarFrame {
    pub rest: Vec3,
    pub pitch_axis: Vec3,
    pub yaw_axis: Vec3,
}

impl TrocarFrame {
    pub fn new(rest_axis: Vec3) -> TrocarFrame {
        let rest = rest_axis.normalized();
        let helper = if rest.dot(Vec3::Y).abs() > 0.9 { Vec3::X } else { Vec3::Y };
        let pitch_axis = (helper - rest * helper.dot(rest)).normalized();
        TrocarFrame { rest, pitch_axis, yaw_axis: rest.cross(pitch_axis) }
    }

    /// Orientation whose columns are `(pitch × rest, pitch, rest)`.
    fn rest_orientation(&self) -> Quat {
        Quat::from_basis(self.pitch_axis.cross(self.rest), self.pitch_axis, self.rest)
    }

    /// Shaft orientation (without roll) for the given pitch and yaw.
    pub fn tilt(&self, pitch: f64, yaw: f64) -> Quat {
        Quat::from_axis_angle(self.yaw_axis, yaw) * Quat::from_axis_angle(self.pitch_axis, pitch)
    }

    /// Inverse kinematics: joints placing the tip at `tip`. Returns `None`
    /// when the tip coincides with the trocar.
    pub fn solve(&self, trocar: Vec3, tip: Vec3) -> Option<(f64, f64, f64)> {
        let v = tip - trocar;
        let insertion = v.norm();
        let d = v.try_normalized()?;
        // Shaft direction in the (pitch × rest, pitch, rest) frame is
        // (sin p, cos p sin y, cos p cos y).
        let e1 = self.pitch_axis.cross(self.rest);
        let pitch = d.dot(e1).clamp(-1.0, 1.0).asin();
        let yaw = d.dot(self.pitch_axis).atan2(d.dot(self.rest));
        Some((pitch, yaw, insertion))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Shaft,
    Tip,
    JawLeft,
    JawRight,
    Needle,
}

impl Part {
    pub fn name(self) -> &'static str {
        match self {
            Part::Shaft => "shaft",
            Part::Tip => "tip",
            Part::JawLeft => "jaw_left",
            Part::JawRight => "jaw_right",
            Part::Needle => "needle",
        }
    }
}

/// World-space geometry of a tool at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ToolGeometry {
    /// Unit shaft direction, pointing into the body.
    pub direction: Vec3,
    /// Full shaft from the trocar point to the tip.
    pub shaft: Capsule,
    pub tip: Vec3,
    /// Tip frame: `+Z` along the shaft, `+X` the jaw opening direction.
    pub tip_pose: Pose,
    /// Left then right; empty for tools without jaws.
    pub jaws: Vec<Capsule>,
    /// Exterior end of the shaft, on the far side of the trocar.
    pub handle: Vec3,
}

impl ToolGeometry {
    /// Capsules tested for contact, in part order. The shaft stops where the
    /// tip segment starts so one penetration is not reported twice.
    pub fn contact_capsules(&self) -> Vec<(Part, Capsule)> {
        let neck = self.tip - self.direction * TIP_LENGTH;
        let mut out = vec![
            (Part::Shaft, Capsule { a: self.shaft.a, b: neck, radius: SHAFT_RADIUS }),
            (Part::Tip, Capsule { a: neck, b: self.tip, radius: SHAFT_RADIUS }),
        ];
        if let [left, right] = self.jaws[..] {
            out.push((Part::JawLeft, left));
            out.push((Part::JawRight, right));
        }
        out
    }
}

pub fn tool_geometry(state: &ToolState, trocar: &Trocar) -> Result<ToolGeometry, InstrumentError> {
    if trocar.id != state.trocar_id {
        return Err(InstrumentError::UnknownTrocar(state.trocar_id.clone()));
    }
    let j = state.joints;
    let frame = TrocarFrame::new(trocar.rest_axis);
    let tilt = frame.tilt(j.pitch, j.yaw);
    let direction = tilt.rotate(frame.rest);
    let tip = trocar.point + direction * j.insertion;
    let orientation = tilt * frame.rest_orientation() * Quat::from_axis_angle(Vec3::Z, j.roll);
    let tip_pose = Pose::new(tip, orientation);
    let jaws = if state.instrument_class.has_jaws() {
        let open = tip_pose.transform_vector(Vec3::X);
        let (s, c) = (j.jaw * JAW_SPREAD).sin_cos();
        [1.0, -1.0]
            .iter()
            .map(|side| Capsule {
                a: tip,
                b: tip + (direction * c + open * (s * side)) * JAW_LENGTH,
                radius: JAW_RADIUS,
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(ToolGeometry {
        direction,
        shaft: Capsule { a: trocar.point, b: tip, radius: SHAFT_RADIUS },
        tip,
        tip_pose,
        jaws,
        handle: trocar.point - direction * HANDLE_LENGTH,
    })
}

/// World pose of the held needle's frame.
pub fn needle_pose(geometry: &ToolGeometry, needle: &Needle) -> Pose {
    geometry.tip_pose.compose(&needle.frame)
}

/// Point on the needle arc at arc angle `theta`.
pub fn needle_point(pose: &Pose, needle: &Needle, theta: f64) -> Vec3 {
    let (s, c) = theta.sin_cos();
    pose.transform_point(Vec3::new(needle.radius * c, needle.radius * s, 0.0))
}

/// `n` points sampling the held needle's arc uniformly in angle, from the
/// tail to the sharp point.
pub fn needle_tip_curve(state: &ToolState, trocar: &Trocar, n: usize) -> Result<Vec<Vec3>, InstrumentError> {
    let needle = state.held_needle.as_ref().ok_or(InstrumentError::NoNeedle)?;
    if n < 2 {
        return Err(InstrumentError::TooFewSamples);
    }
    let pose = needle_pose(&tool_geometry(state, trocar)?, needle);
    Ok((0..n).map(|k| needle_point(&pose, needle, needle.arc_span * k as f64 / (n - 1) as f64)).collect())
}
