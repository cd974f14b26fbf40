//! Bundled scenes and scripted control traces for the demo scenarios.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use crate::contact::tool_contacts;
use crate::geometry::Vec3;
use crate::instrument::{
    apply_control, tool_geometry, wrap_angle, ControlDelta, Joints, ToolState, TrocarFrame, MAX_ANGLE_STEP,
    MAX_INSERTION_STEP, MAX_JAW_STEP,
};
use crate::scene::Scene;
use crate::sim::ToolControl;
use crate::tasks::TaskKind;

pub const MINIMAL: &str = include_str!("../fixtures/minimal.json");
pub const CHOLECYSTECTOMY: &str = include_str!("../fixtures/cholecystectomy.json");
pub const SUTURING: &str = include_str!("../fixtures/suturing.json");
pub const PEG_TRANSFER: &str = include_str!("../fixtures/peg_transfer.json");

fn bundled(text: &str) -> Scene {
    Scene::from_json(text, None).expect("bundled scenes are valid")
}

pub fn minimal() -> Scene {
    bundled(MINIMAL)
}

pub fn cholecystectomy() -> Scene {
    bundled(CHOLECYSTECTOMY)
}

pub fn suturing() -> Scene {
    bundled(SUTURING)
}

pub fn peg_transfer() -> Scene {
    bundled(PEG_TRANSFER)
}

/// Controls per tick; an empty entry is a tick without input.
pub type Script = Vec<Vec<ToolControl>>;

/// How far the cut-air trace stays short of the correct one, along the
/// camera ray through the tip, m.
pub const AIR_OFFSET: f64 = 0.05;
/// Ticks over which the cut-air offset ramps in.
pub const AIR_RAMP_TICKS: u64 = 40;
/// Yaw increment while creeping toward the stomach, rad/tick.
pub const CREEP_STEP: f64 = 0.004;

/// Records a script for one tool while tracking its state exactly as the
/// simulation will.
#[derive(Debug, Clone)]
pub struct ScriptBuilder {
    state: ToolState,
    script: Script,
}

impl ScriptBuilder {
    pub fn new(state: ToolState) -> ScriptBuilder {
        ScriptBuilder { state, script: Vec::new() }
    }

    pub fn state(&self) -> &ToolState {
        &self.state
    }

    pub fn push(&mut self, delta: ControlDelta) {
        self.state = apply_control(&self.state, &delta);
        self.script.push(vec![ToolControl { tool_id: self.state.id.clone(), delta }]);
    }

    pub fn idle(&mut self, ticks: usize) {
        self.script.extend((0..ticks).map(|_| Vec::new()));
    }

    /// Steps every joint toward `target` at its rate limit until all arrive.
    /// Roll takes the short way round.
    pub fn drive_to(&mut self, target: Joints) {
        loop {
            let j = self.state.joints;
            let delta = ControlDelta {
                d_pitch: (target.pitch - j.pitch).clamp(-MAX_ANGLE_STEP, MAX_ANGLE_STEP),
                d_yaw: (target.yaw - j.yaw).clamp(-MAX_ANGLE_STEP, MAX_ANGLE_STEP),
                d_roll: wrap_angle(target.roll - j.roll).clamp(-MAX_ANGLE_STEP, MAX_ANGLE_STEP),
                d_insertion: (target.insertion - j.insertion).clamp(-MAX_INSERTION_STEP, MAX_INSERTION_STEP),
                d_jaw: (target.jaw - j.jaw).clamp(-MAX_JAW_STEP, MAX_JAW_STEP),
            };
            let moves = [delta.d_pitch, delta.d_yaw, delta.d_roll, delta.d_insertion, delta.d_jaw];
            if moves.iter().all(|d| d.abs() < 1e-12) {
                return;
            }
            self.push(delta);
        }
    }

    pub fn finish(self) -> Script {
        self.script
    }
}

fn tool_state(scene: &Scene, id: &str) -> ToolState {
    let spec = scene.tools.iter().find(|t| t.id == id).expect("bundled scene has the tool");
    ToolState::from_spec(spec)
}

/// Scissors trace that closes its open jaws on the cystic artery.
pub fn fig7_correct_script(scene: &Scene) -> Script {
    let mut b = ScriptBuilder::new(tool_state(scene, "scissors"));
    b.drive_to(Joints { pitch: 0.0, yaw: 0.0, roll: FRAC_PI_2, insertion: 0.195, jaw: 0.8 });
    b.idle(6);
    let j = b.state().joints;
    b.drive_to(Joints { jaw: 0.0, ..j });
    b.idle(10);
    b.finish()
}

/// The correct trace with every tip pulled toward the camera along its
/// viewing ray, so both look the same in the endoscope image while this one
/// closes its jaws on nothing.
pub fn fig7_air_script(scene: &Scene) -> Script {
    let correct = fig7_correct_script(scene);
    let trocar = scene.trocar("right_port").expect("bundled scene has the port").clone();
    let frame = TrocarFrame::new(trocar.rest_axis);
    let camera = scene.camera.position();
    let mut truth = tool_state(scene, "scissors");
    let mut b = ScriptBuilder::new(truth.clone());
    for (t, controls) in correct.iter().enumerate() {
        for c in controls {
            truth = apply_control(&truth, &c.delta);
        }
        let tip = tool_geometry(&truth, &trocar).expect("matching trocar").tip;
        let offset = AIR_OFFSET * ((t + 1) as f64 / AIR_RAMP_TICKS as f64).min(1.0);
        let short = tip + (camera - tip).normalized() * offset;
        let (pitch, yaw, insertion) = frame.solve(trocar.point, short).expect("tip is off the trocar");
        let target = Joints { pitch, yaw, insertion, ..truth.joints };
        let j = b.state().joints;
        let delta = ControlDelta {
            d_pitch: target.pitch - j.pitch,
            d_yaw: target.yaw - j.yaw,
            d_roll: wrap_angle(target.roll - j.roll),
            d_insertion: target.insertion - j.insertion,
            d_jaw: target.jaw - j.jaw,
        };
        if [delta.d_pitch, delta.d_yaw, delta.d_roll, delta.d_insertion, delta.d_jaw].iter().all(|d| *d == 0.0) {
            b.idle(1);
        } else {
            b.push(delta);
        }
    }
    b.finish()
}

/// Needle driver creeps sideways until its needle first touches the
/// stomach, rests there, then backs away.
pub fn fig6_wrong_stomach_script(scene: &Scene) -> Script {
    let trocar = scene.trocar("port").expect("bundled scene has the port").clone();
    let mut b = ScriptBuilder::new(tool_state(scene, "driver"));
    let j = b.state().joints;
    b.drive_to(Joints { roll: FRAC_PI_2, ..j });
    let touching = |s: &ToolState| {
        let g = tool_geometry(s, &trocar).expect("matching trocar");
        tool_contacts(scene, s, &g, 0).iter().any(|c| c.object_id == "stomach")
    };
    let mut steps = 0;
    while !touching(b.state()) {
        b.push(ControlDelta { d_yaw: -CREEP_STEP, ..ControlDelta::default() });
        steps += 1;
        assert!(steps < 400, "needle never reaches the stomach");
    }
    b.idle(12);
    for _ in 0..steps {
        b.push(ControlDelta { d_yaw: CREEP_STEP, ..ControlDelta::default() });
    }
    b.idle(10);
    b.finish()
}

/// Rolls the needle along the guidance arc from above the entry marker to
/// past the exit marker. `depth_offset` lowers the needle center by that many
/// meters first, deepening the bite.
pub fn suture_arc_script(scene: &Scene, depth_offset: f64) -> Script {
    let mut b = ScriptBuilder::new(tool_state(scene, "driver"));
    let j = b.state().joints;
    let pitch = (depth_offset / j.insertion).asin();
    b.drive_to(Joints { pitch, ..j });
    // Sharp point from arc angle -1.4 to +1.4 about the bottom of the circle.
    for _ in 0..56 {
        b.push(ControlDelta { d_roll: 0.05, ..ControlDelta::default() });
    }
    b.idle(10);
    b.finish()
}

/// Tip of a tool after replaying a script on its own.
pub fn final_tip(scene: &Scene, tool_id: &str, script: &Script) -> Vec3 {
    let mut s = tool_state(scene, tool_id);
    for c in script.iter().flatten().filter(|c| c.tool_id == tool_id) {
        s = apply_control(&s, &c.delta);
    }
    let trocar = scene.trocar(&s.trocar_id).expect("bundled scene has the port");
    tool_geometry(&s, trocar).expect("matching trocar").tip
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Fig7Correct,
    Fig7Air,
    Fig6WrongStomach,
    SutureArc,
}

impl Scenario {
    pub const ALL: [Scenario; 4] =
        [Scenario::Fig7Correct, Scenario::Fig7Air, Scenario::Fig6WrongStomach, Scenario::SutureArc];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Fig7Correct => "fig7-correct",
            Scenario::Fig7Air => "fig7-air",
            Scenario::Fig6WrongStomach => "fig6-wrong-stomach",
            Scenario::SutureArc => "suture-arc",
        }
    }

    pub fn parse(s: &str) -> Option<Scenario> {
        Scenario::ALL.into_iter().find(|x| x.name() == s)
    }

    pub fn task(self) -> TaskKind {
        match self {
            Scenario::Fig7Correct | Scenario::Fig7Air => TaskKind::Cutting,
            Scenario::Fig6WrongStomach | Scenario::SutureArc => TaskKind::Suturing,
        }
    }

    pub fn scene(self) -> Scene {
        match self.task() {
            TaskKind::Cutting => cholecystectomy(),
            _ => suturing(),
        }
    }

    pub fn script(self, scene: &Scene) -> Script {
        match self {
            Scenario::Fig7Correct => fig7_correct_script(scene),
            Scenario::Fig7Air => fig7_air_script(scene),
            Scenario::Fig6WrongStomach => fig6_wrong_stomach_script(scene),
            Scenario::SutureArc => suture_arc_script(scene, 0.0),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
