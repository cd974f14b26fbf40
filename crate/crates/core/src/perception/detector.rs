use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardUniform};
use serde::{Deserialize, Serialize};

use super::heatmap::{localize_tip, project_to_heatmap, Heatmap, TipEstimate};
use crate::geometry::{Camera, PixelCoord, Vec3};

/// What a detector sees. A learned model would consume an image; the oracle
/// reads the true tip directly.
#[derive(Debug, Clone, Copy)]
pub struct Frame<'a> {
    pub camera: &'a Camera,
    pub tip: Vec3,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub heatmap: Heatmap,
    pub estimate: Option<TipEstimate>,
}

pub trait TipDetector {
    fn detect(&mut self, frame: &Frame<'_>) -> Detection;
}

/// Noise model of the oracle detector, in heatmap pixels.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorNoise {
    #[serde(default)]
    pub pixel_sigma: f64,
    #[serde(default)]
    pub dropout: f64,
}

/// Renders the ground-truth heatmap, optionally jittering the peak and
/// dropping frames. Random draws come from a seeded ChaCha stream, so a run
/// is reproducible from its seed.
#[derive(Debug, Clone)]
pub struct OracleDetector {
    noise: DetectorNoise,
    rng: ChaCha8Rng,
}

impl OracleDetector {
    pub fn new(noise: DetectorNoise, seed: u64) -> OracleDetector {
        OracleDetector { noise, rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl TipDetector for OracleDetector {
    fn detect(&mut self, frame: &Frame<'_>) -> Detection {
        let Some(mut c) = project_to_heatmap(frame.camera, frame.tip) else {
            return Detection { heatmap: Heatmap::zeros(), estimate: None };
        };
        if self.noise.dropout > 0.0 {
            let x: f64 = StandardUniform.sample(&mut self.rng);
            if x < self.noise.dropout {
                return Detection { heatmap: Heatmap::zeros(), estimate: None };
            }
        }
        if self.noise.pixel_sigma > 0.0 {
            let n = Normal::new(0.0, self.noise.pixel_sigma).expect("sigma is positive");
            c = PixelCoord { u: c.u + n.sample(&mut self.rng), v: c.v + n.sample(&mut self.rng) };
        }
        let heatmap = Heatmap::gaussian(c, frame.sigma);
        let estimate = localize_tip(&heatmap);
        Detection { heatmap, estimate }
    }
}
