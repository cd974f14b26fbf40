use base64::Engine;

use crate::geometry::{ray_capsule, ray_mesh, Camera, PixelCoord};
use crate::instrument::{tool_geometry, InstrumentClass, ToolState};
use crate::scene::{Scene, TissueClass};

pub const BACKGROUND: u16 = 0;

/// Label id of a tissue class: `1..=7` in declaration order.
pub fn tissue_label(class: TissueClass) -> u16 {
    1 + TissueClass::ALL.iter().position(|&c| c == class).expect("class is listed") as u16
}

/// Label id of an instrument class: `8..=11`.
pub fn instrument_label(class: InstrumentClass) -> u16 {
    match class {
        InstrumentClass::Grasper => 8,
        InstrumentClass::Scissors => 9,
        InstrumentClass::NeedleDriver => 10,
        InstrumentClass::Hook => 11,
    }
}

/// Per-pixel class ids, row-major, at camera resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelImage {
    pub width: u32,
    pub height: u32,
    pub labels: Vec<u16>,
}

impl LabelImage {
    pub fn get(&self, u: u32, v: u32) -> u16 {
        self.labels[(v * self.width + u) as usize]
    }

    /// Base-64 of the row-major little-endian `u16` ids.
    pub fn to_base64(&self) -> String {
        let bytes: Vec<u8> = self.labels.iter().flat_map(|x| x.to_le_bytes()).collect();
        base64::engine::general_purpose::STANDARD.encode(bytes)
    }
}

/// Ray casts one ray per pixel center and labels the nearest hit. Tools are
/// drawn as their shaft and jaw capsules.
pub fn render_label_image(camera: &Camera, scene: &Scene, tools: &[ToolState]) -> LabelImage {
    let mut capsules = Vec::new();
    for t in tools {
        let Some(trocar) = scene.trocar(&t.trocar_id) else { continue };
        let g = tool_geometry(t, trocar).expect("trocar matches");
        let id = instrument_label(t.instrument_class);
        capsules.push((id, g.shaft));
        capsules.extend(g.jaws.iter().map(|&c| (id, c)));
    }
    let mut labels = Vec::with_capacity((camera.width * camera.height) as usize);
    for v in 0..camera.height {
        for u in 0..camera.width {
            let (origin, dir) = camera.pixel_ray(PixelCoord { u: f64::from(u), v: f64::from(v) });
            let mut best = (f64::INFINITY, BACKGROUND);
            for o in &scene.objects {
                if let Some(t) = ray_mesh(origin, dir, &o.world_mesh) {
                    if t < best.0 {
                        best = (t, tissue_label(o.tissue_class));
                    }
                }
            }
            for (id, cap) in &capsules {
                if let Some(t) = ray_capsule(origin, dir, cap) {
                    if t < best.0 {
                        best = (t, *id);
                    }
                }
            }
            labels.push(best.1);
        }
    }
    LabelImage { width: camera.width, height: camera.height, labels }
}
