use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::index::{Ray, TubeIndex};
use super::SimulatedImage;
use crate::geom::Vec3;
use crate::scene::{PointEmitter, Scene, WallCoord};

/// lm/mm² to lux.
const LUX_PER_LM_MM2: f64 = 1e6;

/// Unoccluded contribution `Φ_i cos θ_i cos θ_p / (π r_i²)` of one emitter at wall point `w`
/// (lm/mm²), with the wall displacement from the image center scaled anisotropically.
#[inline]
pub fn radiometric_term(scene: &Scene, e: &PointEmitter, w: WallCoord) -> f64 {
    let p = Vec3::new(
        w.x * scene.aniso_scale_h,
        w.y * scene.aniso_scale_v,
        scene.wall_distance_mm,
    );
    let d = p - e.position;
    let r2 = d.norm_squared();
    let cos_i = d.dot(&e.normal) / r2.sqrt();
    let cos_p = d.z / r2.sqrt();
    if cos_i <= 0.0 || cos_p <= 0.0 {
        return 0.0;
    }
    e.flux * cos_i * cos_p / (std::f64::consts::PI * r2)
}

/// Total illuminance (lux) at wall point `w`; visibility uses the physical point.
pub fn illuminance(
    scene: &Scene,
    emitters: &[PointEmitter],
    index: &TubeIndex,
    w: WallCoord,
) -> f64 {
    if index.is_empty() {
        return 0.0;
    }
    let p = scene.wall_point(w);
    let mut sum = 0.0;
    for e in emitters {
        if index.visible(&Ray::new(scene, &e.position, &p)) {
            sum += radiometric_term(scene, e, w);
        }
    }
    sum * LUX_PER_LM_MM2
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    pub resolution: usize,
    pub seed: u64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            resolution: 512,
            seed: 0,
        }
    }
}

/// Renders the wall raster with 2×2 stratified jittered samples per pixel.
pub fn render(
    scene: &Scene,
    emitters: &[PointEmitter],
    index: &TubeIndex,
    opts: &RenderOptions,
) -> SimulatedImage {
    assert!(
        opts.resolution >= 16,
        "render resolution must be at least 16"
    );
    let mut img = SimulatedImage::for_scene(scene, opts.resolution);
    if index.is_empty() {
        return img;
    }
    let width = img.width;
    let frame = img.clone();
    img.values
        .par_chunks_mut(width)
        .enumerate()
        .for_each(|(row, out)| {
            for (col, v) in out.iter_mut().enumerate() {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                rng.set_stream((row * width + col) as u64);
                let mut acc = 0.0;
                for k in 0..4 {
                    let u = col as f64 + 0.5 * ((k % 2) as f64 + rng.gen::<f64>());
                    let t = row as f64 + 0.5 * ((k / 2) as f64 + rng.gen::<f64>());
                    acc += illuminance(scene, emitters, index, frame.wall_at(u, t));
                }
                *v = 0.25 * acc;
            }
        });
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::sample_light;
    use crate::tubes::{TubeKind, TubeSpec};

    fn axial_tube(scene: &Scene) -> TubeSpec {
        TubeSpec {
            id: 0,
            kind: TubeKind::Straight,
            lamp_disk_center: scene.wall_to_lamp(WallCoord::new(0.0, 0.0)),
            disk_radius: 0.85,
            tube_radius: 0.6,
            tilt_angle: 0.0,
            tilt_azimuth: 0.0,
        }
    }

    #[test]
    fn substitution_example() {
        let s = Scene {
            wall_distance_mm: 1000.0,
            total_flux_lm: 1.0,
            ..Scene::default()
        };
        let e = sample_light(&s, 1).unwrap();
        let idx = TubeIndex::new(&s, &[axial_tube(&s)]);
        let lux = illuminance(&s, &e, &idx, WallCoord::new(0.0, 0.0));
        assert!((lux - 1.0 / std::f64::consts::PI).abs() < 1e-15);
        assert!(
            (radiometric_term(&s, &e[0], WallCoord::new(0.0, 0.0)) - 1e-6 / std::f64::consts::PI)
                .abs()
                < 1e-21
        );
    }

    #[test]
    fn opaque_gives_zero() {
        let s = Scene::default();
        let e = sample_light(&s, 76).unwrap();
        let idx = TubeIndex::new(&s, &[]);
        assert_eq!(illuminance(&s, &e, &idx, WallCoord::new(3.0, 4.0)), 0.0);
        let img = render(
            &s,
            &e,
            &idx,
            &RenderOptions {
                resolution: 32,
                seed: 1,
            },
        );
        assert!(img.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn anisotropic_falloff() {
        let s = Scene::default();
        let e = sample_light(&s, 1).unwrap()[0];
        let h = radiometric_term(&s, &e, WallCoord::new(200.0, 0.0));
        let v = radiometric_term(&s, &e, WallCoord::new(0.0, 200.0));
        assert!(v < h);
    }

    #[test]
    fn axial_footprint_centered_and_deterministic() {
        let s = Scene::default();
        let e = sample_light(&s, 76).unwrap();
        let idx = TubeIndex::new(&s, &[axial_tube(&s)]);
        let opts = RenderOptions {
            resolution: 128,
            seed: 3,
        };
        let img = render(&s, &e, &idx, &opts);
        let total: f64 = img.values.iter().sum();
        assert!(total > 0.0);
        let (mut cx, mut cy) = (0.0, 0.0);
        for r in 0..img.height {
            for c in 0..img.width {
                let w = img.pixel_center(c, r);
                cx += w.x * img.at(c, r);
                cy += w.y * img.at(c, r);
            }
        }
        assert!((cx / total).abs() < img.pixel_pitch && (cy / total).abs() < img.pixel_pitch);
        // compact: nothing lit far from the center
        let far = img.pixel_of(WallCoord::new(100.0, 0.0)).unwrap();
        assert_eq!(img.at(far.0, far.1), 0.0);
        assert_eq!(img, render(&s, &e, &idx, &opts));
    }
}
