use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::{Pose, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Navigation,
    Manipulation,
    Transfer,
    Cutting,
    Suturing,
}

impl TaskKind {
    pub const ALL: [TaskKind; 5] =
        [TaskKind::Navigation, TaskKind::Manipulation, TaskKind::Transfer, TaskKind::Cutting, TaskKind::Suturing];

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Navigation => "navigation",
            TaskKind::Manipulation => "manipulation",
            TaskKind::Transfer => "transfer",
            TaskKind::Cutting => "cutting",
            TaskKind::Suturing => "suturing",
        }
    }

    pub fn parse(s: &str) -> Option<TaskKind> {
        TaskKind::ALL.into_iter().find(|t| t.name() == s)
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn default_max_angle_err() -> f64 {
    0.35
}

fn default_marker_tolerance() -> f64 {
    0.003
}

fn default_min_fraction() -> f64 {
    0.5
}

fn default_grasp_tolerance() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NavigationSpec {
    pub view_half_angle: f64,
    pub distance_band: [f64; 2],
    /// Fraction of ticks that must be in view and in band for success.
    #[serde(default = "default_min_fraction")]
    pub min_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManipulationSpec {
    pub grasp_point: Vec3,
    pub traction_dir: Vec3,
    #[serde(default = "default_max_angle_err")]
    pub max_angle_err: f64,
    #[serde(default = "default_grasp_tolerance")]
    pub grasp_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferSpec {
    pub handoff_center: Vec3,
    pub corridor_radius: f64,
    pub receiver_pose: Pose,
    pub giver: String,
    pub receiver: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CuttingSpec {
    pub plane_point: Vec3,
    pub plane_normal: Vec3,
    pub path: Vec<Vec3>,
    pub corridor_radius: f64,
    /// Half size of the drawn plane overlay.
    #[serde(default = "default_plane_extent")]
    pub plane_extent: f64,
}

fn default_plane_extent() -> f64 {
    0.02
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuturingSpec {
    pub entry: Vec3,
    pub exit: Vec3,
    pub needle_radius: f64,
    pub tissue_normal: Vec3,
    pub depth_band: [f64; 2],
    #[serde(default = "default_max_angle_err")]
    pub max_angle_err: f64,
    #[serde(default = "default_marker_tolerance")]
    pub marker_tolerance: f64,
}

/// Per-task targets, hazards and pass bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskAnnotation {
    pub task: TaskKind,
    pub target_ids: Vec<String>,
    #[serde(default)]
    pub hazard_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub navigation: Option<NavigationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manipulation: Option<ManipulationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transfer: Option<TransferSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutting: Option<CuttingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suturing: Option<SuturingSpec>,
}

fn unit(v: Vec3) -> bool {
    (v.norm() - 1.0).abs() <= 1e-9
}

fn band(b: [f64; 2]) -> bool {
    b[0].is_finite() && b[1].is_finite() && 0.0 <= b[0] && b[0] <= b[1]
}

impl TaskAnnotation {
    /// Checks that exactly the variant matching `task` is present and that its
    /// vectors and bands are well formed. The error names the offending field.
    pub fn validate(&self) -> Result<(), String> {
        let present = [
            (TaskKind::Navigation, self.navigation.is_some()),
            (TaskKind::Manipulation, self.manipulation.is_some()),
            (TaskKind::Transfer, self.transfer.is_some()),
            (TaskKind::Cutting, self.cutting.is_some()),
            (TaskKind::Suturing, self.suturing.is_some()),
        ];
        for (kind, is_present) in present {
            if is_present != (kind == self.task) {
                let what = if is_present { "unexpected" } else { "missing" };
                return Err(format!("{}: {what} for task {}", kind.name(), self.task));
            }
        }
        if self.target_ids.is_empty() {
            return Err("target_ids: must not be empty".into());
        }
        match self.task {
            TaskKind::Navigation => {
                let n = self.navigation.as_ref().unwrap();
                if !(n.view_half_angle > 0.0 && n.view_half_angle < std::f64::consts::FRAC_PI_2) {
                    return Err("navigation.view_half_angle: must be in (0, π/2)".into());
                }
                if !band(n.distance_band) {
                    return Err("navigation.distance_band: must be ordered and non-negative".into());
                }
            }
            TaskKind::Manipulation => {
                let m = self.manipulation.as_ref().unwrap();
                if !unit(m.traction_dir) {
                    return Err("manipulation.traction_dir: must be a unit vector".into());
                }
            }
            TaskKind::Transfer => {
                let t = self.transfer.as_ref().unwrap();
                if !(t.corridor_radius > 0.0) {
                    return Err("transfer.corridor_radius: must be positive".into());
                }
            }
            TaskKind::Cutting => {
                let c = self.cutting.as_ref().unwrap();
                if !unit(c.plane_normal) {
                    return Err("cutting.plane_normal: must be a unit vector".into());
                }
                if c.path.len() < 2 {
                    return Err("cutting.path: needs at least two points".into());
                }
                if !(c.corridor_radius > 0.0) {
                    return Err("cutting.corridor_radius: must be positive".into());
                }
            }
            TaskKind::Suturing => {
                let s = self.suturing.as_ref().unwrap();
                if !unit(s.tissue_normal) {
                    return Err("suturing.tissue_normal: must be a unit vector".into());
                }
                if !(s.needle_radius > 0.0) {
                    return Err("suturing.needle_radius: must be positive".into());
                }
                if !band(s.depth_band) {
                    return Err("suturing.depth_band: must be ordered and non-negative".into());
                }
            }
        }
        Ok(())
    }

    pub fn is_target(&self, id: &str) -> bool {
        self.target_ids.iter().any(|t| t == id)
    }

    pub fn is_hazard(&self, id: &str) -> bool {
        self.hazard_ids.iter().any(|t| t == id)
    }
}
