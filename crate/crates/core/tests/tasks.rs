use lapaware_core::contact::ContactEvent;
use lapaware_core::geometry::Vec3;
use lapaware_core::instrument::{tool_geometry, Part, ToolState, TrocarFrame};
use lapaware_core::interaction::{ActionClass, InteractionTuple};
use lapaware_core::scenarios;
use lapaware_core::scene::Scene;
use lapaware_core::sim::{to_log_text, SimConfig, Simulation};
use lapaware_core::tasks::{is_success, score_session, ErrorKind, TaskEvaluator, TaskKind, TaskResult, TickInput};

/// Drives a `TaskEvaluator` with hand-placed tips and hand-written tuples.
struct Bench {
    scene: Scene,
    tools: Vec<ToolState>,
    eval: TaskEvaluator,
    tick: u64,
}

impl Bench {
    fn new(scene: Scene, task: TaskKind) -> Bench {
        let tools: Vec<ToolState> = scene.tools.iter().map(ToolState::from_spec).collect();
        let eval = TaskEvaluator::new(scene.annotation(task).unwrap().clone(), &tools, 60.0);
        Bench { scene, tools, eval, tick: 0 }
    }

    fn place(&mut self, i: usize, tip: Vec3) {
        let trocar = self.scene.trocar(&self.tools[i].trocar_id).unwrap();
        let (pitch, yaw, insertion) = TrocarFrame::new(trocar.rest_axis).solve(trocar.point, tip).unwrap();
        let j = &mut self.tools[i].joints;
        (j.pitch, j.yaw, j.insertion) = (pitch, yaw, insertion);
    }

    fn step(&mut self, keys: &[(Option<&str>, ActionClass)], touching: &[usize]) -> Vec<ErrorKind> {
        self.tick += 1;
        let geometries: Vec<_> =
            self.tools.iter().map(|t| tool_geometry(t, self.scene.trocar(&t.trocar_id).unwrap()).unwrap()).collect();
        let tuples: Vec<_> = self
            .tools
            .iter()
            .zip(keys)
            .map(|(t, (tissue, action))| InteractionTuple {
                tick: self.tick,
                tool_id: t.id.clone(),
                instrument_class: t.instrument_class,
                instrument_box: None,
                tissue_id: tissue.map(str::to_owned),
                tissue_class: tissue.map(|id| self.scene.object(id).unwrap().tissue_class),
                tissue_box: None,
                action: *action,
            })
            .collect();
        let contacts: Vec<_> = touching
            .iter()
            .map(|&i| ContactEvent {
                tool_id: self.tools[i].id.clone(),
                part: Part::JawLeft,
                object_id: self.scene.objects[0].id.clone(),
                point: geometries[i].tip,
                normal: Vec3::Z,
                depth: 0.001,
                tick: self.tick,
            })
            .collect();
        let input = TickInput {
            tick: self.tick,
            scene: &self.scene,
            tools: &self.tools,
            geometries: &geometries,
            tuples: &tuples,
            contacts: &contacts,
            unsafe_depth: 0.004,
        };
        self.eval.evaluate_tick(&input).into_iter().map(|e| e.kind).collect()
    }

    fn finish(mut self) -> TaskResult {
        self.eval.finish(&self.tools, self.tick).1
    }
}

const IDLE: (Option<&str>, ActionClass) = (None, ActionClass::Idle);

#[test]
fn handoff_inside_corridor_succeeds() {
    let mut b = Bench::new(scenarios::peg_transfer(), TaskKind::Transfer);
    b.place(0, Vec3::new(0.005, 0.0, 0.03));
    b.place(1, Vec3::new(0.015, 0.0, 0.03));
    b.step(&[(Some("block"), ActionClass::Grasp), IDLE], &[]);
    b.step(&[(Some("block"), ActionClass::Grasp), (Some("block"), ActionClass::Grasp)], &[]);
    let events = b.step(&[(None, ActionClass::Release), (Some("block"), ActionClass::Grasp)], &[]);
    assert!(events.is_empty());
    let r = b.finish();
    assert_eq!(r.metrics["handoffs"], 1.0);
    assert!(r.metrics["handoff_offset_m"] < 1e-9);
    assert!(r.success);
}

#[test]
fn handoff_above_corridor_is_off_corridor() {
    let mut b = Bench::new(scenarios::peg_transfer(), TaskKind::Transfer);
    b.place(0, Vec3::new(0.0, 0.0, 0.06));
    b.place(1, Vec3::new(0.02, 0.0, 0.06));
    b.step(&[(Some("block"), ActionClass::Grasp), (Some("block"), ActionClass::Grasp)], &[]);
    let events = b.step(&[(None, ActionClass::Release), (Some("block"), ActionClass::Grasp)], &[]);
    assert_eq!(events, [ErrorKind::OffCorridor]);
    let r = b.finish();
    // Midpoint (0.01, 0, 0.06) sits 0.03 m above the handoff segment.
    assert!((r.metrics["handoff_offset_m"] - 0.03).abs() < 1e-9);
    assert!(!r.success);
}

#[test]
fn release_without_receiver_is_not_a_handoff() {
    let mut b = Bench::new(scenarios::peg_transfer(), TaskKind::Transfer);
    b.step(&[(Some("block"), ActionClass::Grasp), IDLE], &[]);
    b.step(&[(None, ActionClass::Release), IDLE], &[]);
    let r = b.finish();
    assert_eq!(r.metrics["handoffs"], 0.0);
    assert!(!r.success);
}

fn manipulation(pull: Vec3) -> TaskResult {
    let mut b = Bench::new(scenarios::cholecystectomy(), TaskKind::Manipulation);
    let grasp = Vec3::new(0.03, 0.03, 0.055);
    b.place(1, grasp);
    b.step(&[IDLE, (Some("gallbladder"), ActionClass::Grasp)], &[]);
    for k in 1..=10 {
        b.place(1, grasp + pull * (k as f64 / 10.0));
        b.step(&[IDLE, (Some("gallbladder"), ActionClass::Pull)], &[]);
    }
    b.step(&[IDLE, (None, ActionClass::Release)], &[]);
    b.finish()
}

#[test]
fn traction_along_annotated_direction_succeeds() {
    let r = manipulation(Vec3::new(0.0, 0.0, 0.01));
    assert_eq!(r.metrics["grasps_on_target"], 1.0);
    assert!(r.metrics["grasp_error_m"] < 1e-12);
    assert!(r.metrics["traction_angle_err_rad"] < 1e-9);
    assert!(r.success, "{r:?}");
}

#[test]
fn sideways_traction_is_bad_angle() {
    let r = manipulation(Vec3::new(0.01, 0.0, 0.0));
    assert!((r.metrics["traction_angle_err_rad"] - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
    assert_eq!(r.count(ErrorKind::BadAngle), 1);
    assert!(!r.success);
}

#[test]
fn short_traction_is_not_judged() {
    let r = manipulation(Vec3::new(0.001, 0.0, 0.0));
    assert!(!r.metrics.contains_key("traction_angle_err_rad"));
    assert!(r.success);
}

#[test]
fn wrong_tissue_fires_once_per_touch() {
    let mut b = Bench::new(scenarios::cholecystectomy(), TaskKind::Manipulation);
    let stomach = (Some("stomach"), ActionClass::Touch);
    let mut kinds = Vec::new();
    for keys in [stomach, stomach, stomach, IDLE, stomach] {
        kinds.extend(b.step(&[IDLE, keys], &[]));
    }
    assert_eq!(kinds, [ErrorKind::WrongTissue, ErrorKind::WrongTissue]);
    assert!(!b.finish().success);
}

#[test]
fn grasping_a_hazard_is_an_unintended_clip() {
    let mut b = Bench::new(scenarios::cholecystectomy(), TaskKind::Manipulation);
    let kinds = b.step(&[IDLE, (Some("stomach"), ActionClass::Grasp)], &[]);
    assert!(kinds.contains(&ErrorKind::UnintendedClip));
    assert!(b.step(&[IDLE, (Some("stomach"), ActionClass::Grasp)], &[]).is_empty());
}

fn close_jaws(touch: bool) -> TaskResult {
    let mut b = Bench::new(scenarios::cholecystectomy(), TaskKind::Cutting);
    b.tools[0].joints.jaw = 0.8;
    let mut b = Bench { eval: TaskEvaluator::new(b.eval.annotation().clone(), &b.tools, 60.0), ..b };
    let touching: &[usize] = if touch { &[0] } else { &[] };
    for _ in 0..8 {
        b.tools[0].joints.jaw -= 0.1;
        b.step(&[IDLE, IDLE], touching);
    }
    b.step(&[IDLE, IDLE], &[]);
    b.finish()
}

#[test]
fn closing_on_nothing_is_cut_air() {
    let r = close_jaws(false);
    assert_eq!(r.count(ErrorKind::CutAir), 1);
    assert_eq!(r.error_events[0].tick, 8);
}

#[test]
fn closing_in_contact_is_not_cut_air() {
    assert_eq!(close_jaws(true).count(ErrorKind::CutAir), 0);
}

#[test]
fn navigation_fraction_counts_good_ticks() {
    let mut b = Bench::new(scenarios::minimal(), TaskKind::Navigation);
    b.place(0, Vec3::new(0.0, 0.0, 0.03));
    for _ in 0..10 {
        b.step(&[IDLE], &[]);
    }
    b.place(0, Vec3::new(0.0, 0.0, 0.1));
    for _ in 0..10 {
        b.step(&[IDLE], &[]);
    }
    let r = b.finish();
    assert_eq!(r.metrics["in_view_fraction"], 0.5);
    assert!(r.success);
    assert!((r.metrics["path_length_m"] - 0.07).abs() < 1e-12);
}

#[test]
fn navigation_outside_cone_does_not_count() {
    let narrow = scenarios::MINIMAL.replace("\"view_half_angle\": 0.3", "\"view_half_angle\": 0.05");
    let mut b = Bench::new(Scene::from_json(&narrow, None).unwrap(), TaskKind::Navigation);
    // In the distance band, 0.13 rad off the camera axis.
    b.place(0, Vec3::new(0.028, 0.028, 0.0));
    for _ in 0..5 {
        b.step(&[IDLE], &[]);
    }
    let r = b.finish();
    assert_eq!(r.metrics["in_view_fraction"], 0.0);
    assert!(!r.success);
}

#[test]
fn success_requires_no_disqualifying_event() {
    let mut r = manipulation(Vec3::new(0.0, 0.0, 0.01));
    assert!(is_success(r.task, &r.metrics, &r.error_events));
    r.metrics.insert("grasp_error_m".into(), 0.02);
    assert!(!is_success(r.task, &r.metrics, &r.error_events));
}

#[test]
fn scoring_a_log_matches_the_live_result() {
    for scenario in scenarios::Scenario::ALL {
        let scene = scenario.scene();
        let mut sim = Simulation::new(scene.clone(), scenario.task(), SimConfig::default()).unwrap();
        let mut records = vec![sim.start_record()];
        for controls in scenario.script(&scene) {
            records.extend(sim.step(&controls).unwrap());
        }
        let (tail, live) = sim.finish();
        records.extend(tail);
        let scored = score_session(&to_log_text(&records)).unwrap();
        assert_eq!(scored, live, "{scenario}");
    }
}
