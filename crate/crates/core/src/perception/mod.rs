//! Simulated endoscope perception: tip heatmaps and localization, 2D/3D
//! boxes and semantic label images.
//!
//! Tip detection sits behind [`TipDetector`] so a trained model can replace
//! the analytic [`OracleDetector`].

mod boxes;
mod detector;
mod heatmap;
mod labels;

pub use boxes::{box_from_points, compute_box2d, compute_box3d, Box2D, Box3D};
pub use detector::{Detection, DetectorNoise, Frame, OracleDetector, TipDetector};
pub use heatmap::{
    localize_tip, project_to_heatmap, render_tip_heatmap, tailored_sigma, to_heatmap_coords, Heatmap, TipEstimate,
    DEFAULT_SIGMA, DETECTION_THRESHOLD, HEATMAP_SIZE,
};
pub use labels::{instrument_label, render_label_image, tissue_label, LabelImage, BACKGROUND};
