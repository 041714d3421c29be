//! Forward simulation of the projected image and the reference image stack.

mod filter;
mod hex;
mod index;
mod render;
mod stack;

pub use filter::{gaussian_blur, isotonic_non_decreasing};
pub use hex::{
    cap_radius, hex_grid_layout, hex_grid_layout_with_margin, HexLayout, DEFAULT_LAYOUT_MARGIN,
};
pub use index::{visibility, visibility_brute_force, Ray, TubeIndex};
pub use render::{illuminance, radiometric_term, render, RenderOptions};
pub use stack::{
    build_reference_stack, level_tubes, LevelInfo, ReferenceImageStack, StackOptions,
    STACK_CACHE_VERSION,
};

use serde::{Deserialize, Serialize};

use crate::scene::{Scene, WallCoord};

/// Linear illuminance image on the wall raster, row 0 at the top (+y).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedImage {
    pub width: usize,
    pub height: usize,
    /// mm per pixel on the wall.
    pub pixel_pitch: f64,
    pub values: Vec<f64>,
}

impl SimulatedImage {
    pub fn zeros(width: usize, height: usize, pixel_pitch: f64) -> Self {
        SimulatedImage {
            width,
            height,
            pixel_pitch,
            values: vec![0.0; width * height],
        }
    }

    /// Raster covering the wall extent with `resolution` columns.
    pub fn for_scene(scene: &Scene, resolution: usize) -> Self {
        let (w, h) = raster_size(scene, resolution);
        SimulatedImage::zeros(w, h, scene.wall_extent_mm[0] / resolution as f64)
    }

    #[inline]
    pub fn at(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn raster(&self) -> Raster {
        Raster {
            width: self.width,
            height: self.height,
            pixel_pitch: self.pixel_pitch,
        }
    }

    /// Wall coordinate of the point at fractional pixel position `(u, v)` (pixel units from
    /// the top-left corner).
    #[inline]
    pub fn wall_at(&self, u: f64, v: f64) -> WallCoord {
        self.raster().wall_at(u, v)
    }

    pub fn pixel_center(&self, col: usize, row: usize) -> WallCoord {
        self.raster().pixel_center(col, row)
    }

    pub fn pixel_of(&self, w: WallCoord) -> Option<(usize, usize)> {
        self.raster().pixel_of(w)
    }

    /// Bilinear sample at a wall point (clamped to the raster).
    pub fn sample(&self, w: WallCoord) -> f64 {
        let u = (w.x / self.pixel_pitch + 0.5 * self.width as f64 - 0.5)
            .clamp(0.0, (self.width - 1) as f64);
        let v = (0.5 * self.height as f64 - w.y / self.pixel_pitch - 0.5)
            .clamp(0.0, (self.height - 1) as f64);
        let c0 = u.floor() as usize;
        let r0 = v.floor() as usize;
        let c1 = (c0 + 1).min(self.width - 1);
        let r1 = (r0 + 1).min(self.height - 1);
        let fu = u - c0 as f64;
        let fv = v - r0 as f64;
        let top = self.at(c0, r0) * (1.0 - fu) + self.at(c1, r0) * fu;
        let bottom = self.at(c0, r1) * (1.0 - fu) + self.at(c1, r1) * fu;
        top * (1.0 - fv) + bottom * fv
    }

    pub fn center_value(&self) -> f64 {
        self.sample(WallCoord::new(0.0, 0.0))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// Pixel grid on the wall, centered on the projection axis, row 0 at the top.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub pixel_pitch: f64,
}

impl Raster {
    pub fn for_scene(scene: &Scene, resolution: usize) -> Raster {
        let (w, h) = raster_size(scene, resolution);
        Raster {
            width: w,
            height: h,
            pixel_pitch: scene.wall_extent_mm[0] / resolution as f64,
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn wall_at(&self, u: f64, v: f64) -> WallCoord {
        WallCoord::new(
            (u - 0.5 * self.width as f64) * self.pixel_pitch,
            (0.5 * self.height as f64 - v) * self.pixel_pitch,
        )
    }

    pub fn pixel_center(&self, col: usize, row: usize) -> WallCoord {
        self.wall_at(col as f64 + 0.5, row as f64 + 0.5)
    }

    /// Pixel containing the wall point, if any.
    pub fn pixel_of(&self, w: WallCoord) -> Option<(usize, usize)> {
        let u = w.x / self.pixel_pitch + 0.5 * self.width as f64;
        let v = 0.5 * self.height as f64 - w.y / self.pixel_pitch;
        if u < 0.0 || v < 0.0 || u >= self.width as f64 || v >= self.height as f64 {
            return None;
        }
        Some((u as usize, v as usize))
    }

    /// Pixel containing the wall point, clamped to the raster.
    pub fn pixel_clamped(&self, w: WallCoord) -> (usize, usize) {
        let u = w.x / self.pixel_pitch + 0.5 * self.width as f64;
        let v = 0.5 * self.height as f64 - w.y / self.pixel_pitch;
        (
            (u.max(0.0) as usize).min(self.width - 1),
            (v.max(0.0) as usize).min(self.height - 1),
        )
    }
}

/// Raster dimensions for a scene at `resolution` columns.
pub fn raster_size(scene: &Scene, resolution: usize) -> (usize, usize) {
    let h = (resolution as f64 * scene.wall_extent_mm[1] / scene.wall_extent_mm[0])
        .round()
        .max(1.0) as usize;
    (resolution, h)
}

/// Display mapping: `round(255 (v / max)^(1/gamma))`. Returns the 8-bit image and whether
/// the input was all zero (in which case the output is all zero).
pub fn tone_map(img: &SimulatedImage, gamma: f64) -> (Vec<u8>, bool) {
    let max = img.max();
    if !(max > 0.0) {
        return (vec![0; img.values.len()], true);
    }
    let out = img
        .values
        .iter()
        .map(|&v| {
            (255.0 * (v.max(0.0) / max).powf(1.0 / gamma))
                .round()
                .clamp(0.0, 255.0) as u8
        })
        .collect();
    (out, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tone_map_examples() {
        let img = SimulatedImage {
            width: 3,
            height: 1,
            pixel_pitch: 1.0,
            values: vec![2.0, 1.0, 0.0],
        };
        let (out, zero) = tone_map(&img, 2.2);
        assert!(!zero);
        assert_eq!(out, vec![255, 186, 0]);
        let c = SimulatedImage {
            width: 2,
            height: 2,
            pixel_pitch: 1.0,
            values: vec![3.5; 4],
        };
        assert_eq!(tone_map(&c, 2.2).0, vec![255; 4]);
        let z = SimulatedImage::zeros(4, 4, 1.0);
        let (out, zero) = tone_map(&z, 2.2);
        assert!(zero && out.iter().all(|&v| v == 0));
    }

    #[test]
    fn raster_geometry() {
        let s = Scene::default();
        let img = SimulatedImage::for_scene(&s, 512);
        assert_eq!((img.width, img.height), (512, 512));
        assert!((img.width as f64 * img.pixel_pitch - 1000.0).abs() < 1e-9);
        let c = img.pixel_center(0, 0);
        assert!((c.x + 500.0 - 0.5 * img.pixel_pitch).abs() < 1e-9);
        assert!((c.y - 500.0 + 0.5 * img.pixel_pitch).abs() < 1e-9);
        assert_eq!(img.pixel_of(c), Some((0, 0)));
        assert_eq!(img.pixel_of(img.pixel_center(300, 17)), Some((300, 17)));
    }

    proptest! {
        #[test]
        fn tone_map_monotone(a in 0.0..10.0f64, b in 0.0..10.0f64, m in 10.0..20.0f64) {
            let img = SimulatedImage { width: 3, height: 1, pixel_pitch: 1.0, values: vec![a, b, m] };
            let (out, _) = tone_map(&img, 2.2);
            if a < b { prop_assert!(out[0] <= out[1]); }
            prop_assert_eq!(out[2], 255);
        }
    }
}
