//! Procedural stand-ins for the evaluation targets: portraits, a three-step ramp and
//! animal textures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::io::GrayImage;

/// Smooth value noise on a lattice of `cells` per image side.
struct ValueNoise {
    n: usize,
    values: Vec<f64>,
}

impl ValueNoise {
    fn new(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ValueNoise {
            n,
            values: (0..(n + 1) * (n + 1)).map(|_| rng.gen::<f64>()).collect(),
        }
    }

    /// `u, v` in [0, 1].
    fn at(&self, u: f64, v: f64) -> f64 {
        let x = u.clamp(0.0, 1.0) * self.n as f64;
        let y = v.clamp(0.0, 1.0) * self.n as f64;
        let (i, j) = ((x as usize).min(self.n - 1), (y as usize).min(self.n - 1));
        let (fx, fy) = (x - i as f64, y - j as f64);
        let s = |t: f64| t * t * (3.0 - 2.0 * t);
        let (sx, sy) = (s(fx), s(fy));
        let g = |a: usize, b: usize| self.values[b * (self.n + 1) + a];
        let top = g(i, j) * (1.0 - sx) + g(i + 1, j) * sx;
        let bottom = g(i, j + 1) * (1.0 - sx) + g(i + 1, j + 1) * sx;
        top * (1.0 - sy) + bottom * sy
    }
}

fn fbm(layers: &[ValueNoise], u: f64, v: f64) -> f64 {
    let mut amp = 1.0;
    let mut sum = 0.0;
    let mut norm = 0.0;
    for l in layers {
        sum += amp * l.at(u, v);
        norm += amp;
        amp *= 0.5;
    }
    sum / norm
}

fn octaves(seed: u64, base: usize, count: usize) -> Vec<ValueNoise> {
    (0..count)
        .map(|k| ValueNoise::new(base << k, seed.wrapping_mul(31).wrapping_add(k as u64)))
        .collect()
}

/// Rank-based histogram equalization onto `1..=255` (pure black is reserved for "no image").
pub fn equalize(values: &[f64]) -> Vec<u8> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut out = vec![0u8; values.len()];
    let n = values.len() as f64;
    for (rank, &i) in order.iter().enumerate() {
        out[i] = 1 + ((rank as f64 / n) * 255.0).floor().min(254.0) as u8;
    }
    out
}

fn ellipse(u: f64, v: f64, cx: f64, cy: f64, rx: f64, ry: f64, soft: f64) -> f64 {
    let d = (((u - cx) / rx).powi(2) + ((v - cy) / ry).powi(2)).sqrt();
    (1.0 - (d - 1.0) / soft).clamp(0.0, 1.0)
}

/// Continuous-tone portrait-like image with a near-uniform histogram.
pub fn portrait(size: usize, variant: u64) -> GrayImage {
    let noise = octaves(variant + 100, 4, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(variant);
    let tilt: f64 = rng.gen_range(-0.08..0.08);
    let hair: f64 = rng.gen_range(0.15..0.35);
    let light: f64 = rng.gen_range(-0.6..0.6);
    let mut vals = Vec::with_capacity(size * size);
    for r in 0..size {
        for c in 0..size {
            let u = (c as f64 + 0.5) / size as f64;
            let v = (r as f64 + 0.5) / size as f64;
            let (x, y) = (u - 0.5 + tilt * (v - 0.5), v - 0.5);
            let background = 0.25 + 0.4 * u * (1.0 - v) + 0.15 * fbm(&noise, u, v);
            let face = ellipse(x, y, 0.0, 0.02, 0.22, 0.3, 0.06);
            let shade = 0.55 + 0.35 * (1.0 + light * x * 4.0).clamp(0.0, 2.0) * 0.5;
            let head_hair = ellipse(x, y, 0.0, -0.1, 0.27, 0.3, 0.05) * (y < -0.05) as i32 as f64;
            let eyes = ellipse(x, y, -0.08, -0.04, 0.045, 0.022, 0.4)
                + ellipse(x, y, 0.08, -0.04, 0.045, 0.022, 0.4);
            let mouth = ellipse(x, y, 0.0, 0.16, 0.08, 0.02, 0.5);
            let nose = ellipse(x, y, 0.0, 0.06, 0.025, 0.05, 0.8);
            let neck = ellipse(x, y, 0.0, 0.38, 0.1, 0.15, 0.1);
            let mut val = background;
            val = val * (1.0 - neck) + neck * (0.5 * shade);
            val = val * (1.0 - face) + face * shade;
            val = val * (1.0 - head_hair * (1.0 - face)) + head_hair * (1.0 - face) * hair;
            val -= 0.35 * eyes.min(1.0) + 0.25 * mouth.min(1.0) + 0.1 * nose.min(1.0);
            val += 0.08 * (fbm(&noise, u * 2.0 % 1.0, v * 2.0 % 1.0) - 0.5);
            vals.push(val);
        }
    }
    GrayImage::new(size, size, equalize(&vals))
}

/// Three concentric tones (255 inside 100 mm, 170 to 200 mm, 85 to 300 mm) and black
/// outside, for an image spanning `extent_mm`.
pub fn three_step_ramp(size: usize, extent_mm: f64) -> GrayImage {
    let mut px = Vec::with_capacity(size * size);
    for r in 0..size {
        for c in 0..size {
            let x = ((c as f64 + 0.5) / size as f64 - 0.5) * extent_mm;
            let y = ((r as f64 + 0.5) / size as f64 - 0.5) * extent_mm;
            let d = x.hypot(y);
            px.push(if d < 100.0 {
                255
            } else if d < 200.0 {
                170
            } else if d < 300.0 {
                85
            } else {
                0
            });
        }
    }
    GrayImage::new(size, size, px)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Animal {
    Zebra,
    Leopard,
    Fur,
}

pub fn animal(size: usize, kind: Animal) -> GrayImage {
    let noise = octaves(kind as u64 + 7, 6, 4);
    let mut vals = Vec::with_capacity(size * size);
    for r in 0..size {
        for c in 0..size {
            let u = (c as f64 + 0.5) / size as f64;
            let v = (r as f64 + 0.5) / size as f64;
            let n = fbm(&noise, u, v);
            let val = match kind {
                Animal::Zebra => 0.5 + 0.5 * (u * 40.0 + 6.0 * n + 3.0 * (v * 5.0).sin()).sin(),
                Animal::Leopard => {
                    let spots = ((u * 14.0 + 2.0 * n).sin() * (v * 14.0 + 2.0 * n).cos()).abs();
                    0.8 - 0.6 * (spots > 0.7) as i32 as f64 + 0.2 * n
                }
                Animal::Fur => n + 0.15 * ((u + v) * 90.0 + 10.0 * n).sin(),
            };
            vals.push(val);
        }
    }
    GrayImage::new(size, size, equalize(&vals))
}

/// The eight evaluation targets with their names.
pub fn evaluation_targets(size: usize, extent_mm: f64) -> Vec<(String, GrayImage)> {
    let mut out: Vec<(String, GrayImage)> = (0..4)
        .map(|k| (format!("portrait{}", k + 1), portrait(size, k)))
        .collect();
    out.push(("ramp".into(), three_step_ramp(size, extent_mm)));
    for (name, kind) in [
        ("zebra", Animal::Zebra),
        ("leopard", Animal::Leopard),
        ("fur", Animal::Fur),
    ] {
        out.push((name.into(), animal(size, kind)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn portrait_histogram_is_flat() {
        let img = portrait(128, 0);
        let mut h = [0usize; 256];
        for &p in &img.pixels {
            h[p as usize] += 1;
        }
        assert_eq!(h[0], 0);
        let mean = img.pixels.len() as f64 / 255.0;
        assert!(h[1..]
            .iter()
            .all(|&c| (c as f64 - mean).abs() <= mean * 0.1 + 1.0));
    }

    #[test]
    fn ramp_levels() {
        let img = three_step_ramp(100, 1000.0);
        assert_eq!(img.at(50, 50), 255);
        assert_eq!(img.at(50 + 15, 50), 170);
        assert_eq!(img.at(50 + 25, 50), 85);
        assert_eq!(img.at(0, 0), 0);
    }
}
