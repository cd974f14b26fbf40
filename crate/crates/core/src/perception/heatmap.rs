use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::geometry::{Camera, PixelCoord, Vec3};

/// Heatmaps are always this many pixels on a side, whatever the camera size.
pub const HEATMAP_SIZE: usize = 128;
pub const DEFAULT_SIGMA: f64 = 5.0;
/// Peaks below this are reported as no detection.
pub const DETECTION_THRESHOLD: f64 = 0.05;

/// Row-major `HEATMAP_SIZE²` grid with values in `[0, 1]`. Cell `(u, v)` has
/// its center at pixel coordinate `(u, v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TipEstimate {
    pub u: f64,
    pub v: f64,
    pub confidence: f64,
}

impl Default for Heatmap {
    fn default() -> Self {
        Heatmap::zeros()
    }
}

impl Heatmap {
    pub fn zeros() -> Heatmap {
        Heatmap { values: vec![0.0; HEATMAP_SIZE * HEATMAP_SIZE] }
    }

    /// Gaussian bump of width `sigma` centered at heatmap coordinates `center`.
    pub fn gaussian(center: PixelCoord, sigma: f64) -> Heatmap {
        let inv = 1.0 / (2.0 * sigma * sigma);
        let mut values = Vec::with_capacity(HEATMAP_SIZE * HEATMAP_SIZE);
        for v in 0..HEATMAP_SIZE {
            let dv = v as f64 - center.v;
            for u in 0..HEATMAP_SIZE {
                let du = u as f64 - center.u;
                values.push((-(du * du + dv * dv) * inv).exp());
            }
        }
        Heatmap { values }
    }

    pub fn from_values(values: Vec<f64>) -> Option<Heatmap> {
        let ok = values.len() == HEATMAP_SIZE * HEATMAP_SIZE && values.iter().all(|x| (0.0..=1.0).contains(x));
        ok.then_some(Heatmap { values })
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.values[v * HEATMAP_SIZE + u]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Base-64 of the row-major little-endian `f32` values.
    pub fn to_base64(&self) -> String {
        let bytes: Vec<u8> = self.values.iter().flat_map(|&x| (x as f32).to_le_bytes()).collect();
        base64::engine::general_purpose::STANDARD.encode(bytes)
    }
}

/// Camera pixel coordinates rescaled into the heatmap grid.
pub fn to_heatmap_coords(camera: &Camera, px: PixelCoord) -> PixelCoord {
    PixelCoord {
        u: px.u * HEATMAP_SIZE as f64 / f64::from(camera.width),
        v: px.v * HEATMAP_SIZE as f64 / f64::from(camera.height),
    }
}

/// Heatmap coordinates of `tip`, or `None` when it is behind the camera.
pub fn project_to_heatmap(camera: &Camera, tip: Vec3) -> Option<PixelCoord> {
    camera.project_point(tip).map(|px| to_heatmap_coords(camera, px))
}

/// Ground-truth heatmap of the tool tip; all zeros when the tip is behind the
/// camera.
pub fn render_tip_heatmap(camera: &Camera, tip: Vec3, sigma: f64) -> Heatmap {
    match project_to_heatmap(camera, tip) {
        Some(c) => Heatmap::gaussian(c, sigma),
        None => Heatmap::zeros(),
    }
}

/// Argmax cell with its value as confidence. The row-major scan keeps the
/// first of equal peaks. `None` when the peak is below
/// [`DETECTION_THRESHOLD`].
pub fn localize_tip(h: &Heatmap) -> Option<TipEstimate> {
    let mut best = 0;
    for (i, &x) in h.values.iter().enumerate() {
        if x > h.values[best] {
            best = i;
        }
    }
    let peak = h.values[best];
    (peak >= DETECTION_THRESHOLD).then_some(TipEstimate {
        u: (best % HEATMAP_SIZE) as f64,
        v: (best / HEATMAP_SIZE) as f64,
        confidence: peak,
    })
}

/// Heatmap width sized to the instrument: 4% of the shaft's projected length
/// in heatmap pixels, at least 2. Falls back to [`DEFAULT_SIGMA`] when either
/// shaft end is behind the camera.
pub fn tailored_sigma(camera: &Camera, trocar_point: Vec3, tip: Vec3) -> f64 {
    match (project_to_heatmap(camera, trocar_point), project_to_heatmap(camera, tip)) {
        (Some(a), Some(b)) => (0.04 * (a.u - b.u).hypot(a.v - b.v)).max(2.0),
        _ => DEFAULT_SIGMA,
    }
}
