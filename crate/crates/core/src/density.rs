//! Wall-domain density from a target image and the reference stack.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{write_bytes, write_png16, GrayImage};
use crate::scene::{level_disk_radius, DiskConversion, Scene, WallCoord, MARGIN, TUBE_MAX};
use crate::sim::{Raster, ReferenceImageStack};

pub const GAMMA: f64 = 2.2;

pub fn linearize(v: u8) -> f64 {
    (v as f64 / 255.0).powf(GAMMA)
}

/// Target resampled onto a wall raster: linear values and which pixels carry image
/// content (inside the letterbox and not pure black).
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedTarget {
    pub raster: Raster,
    pub linear: Vec<f64>,
    pub support: Vec<bool>,
}

/// Fits the image inside the raster preserving aspect (black letterbox) and samples the
/// linearized image bilinearly at each pixel center.
pub fn align_target(img: &GrayImage, raster: Raster) -> AlignedTarget {
    let lin: Vec<f64> = img.pixels.iter().map(|&v| linearize(v)).collect();
    let scale =
        (img.width as f64 / raster.width as f64).max(img.height as f64 / raster.height as f64);
    let off_u = 0.5 * (raster.width as f64 * scale - img.width as f64);
    let off_v = 0.5 * (raster.height as f64 * scale - img.height as f64);
    let mut linear = vec![0.0; raster.len()];
    let mut support = vec![false; raster.len()];
    for row in 0..raster.height {
        for col in 0..raster.width {
            let u = (col as f64 + 0.5) * scale - off_u;
            let v = (row as f64 + 0.5) * scale - off_v;
            if u < 0.0 || v < 0.0 || u >= img.width as f64 || v >= img.height as f64 {
                continue;
            }
            let x = (u - 0.5).clamp(0.0, (img.width - 1) as f64);
            let y = (v - 0.5).clamp(0.0, (img.height - 1) as f64);
            let (c0, r0) = (x.floor() as usize, y.floor() as usize);
            let (c1, r1) = ((c0 + 1).min(img.width - 1), (r0 + 1).min(img.height - 1));
            let (fx, fy) = (x - c0 as f64, y - r0 as f64);
            let at = |c: usize, r: usize| lin[r * img.width + c];
            let val = (at(c0, r0) * (1.0 - fx) + at(c1, r0) * fx) * (1.0 - fy)
                + (at(c0, r1) * (1.0 - fx) + at(c1, r1) * fx) * fy;
            let i = row * raster.width + col;
            linear[i] = val;
            support[i] = val > 0.0;
        }
    }
    AlignedTarget {
        raster,
        linear,
        support,
    }
}

/// Per-pixel stack values as seen by a packing with the given conversion. Containment
/// packing places wall disks around the (elliptic) projection of each lamp disk, which
/// thins the tube count per lamp area by the obliquity cosine relative to the dense
/// reference layouts.
pub fn effective_levels(
    scene: &Scene,
    stack: &ReferenceImageStack,
    conversion: DiskConversion,
) -> Vec<Vec<f64>> {
    let raster = stack.images[0].raster();
    stack
        .images
        .iter()
        .map(|img| {
            img.values
                .iter()
                .enumerate()
                .map(|(i, &b)| match conversion {
                    DiskConversion::EqualArea => b,
                    DiskConversion::Containment => {
                        let w = raster.pixel_center(i % raster.width, i / raster.width);
                        b * obliquity_cos(scene, w)
                    }
                })
                .collect()
        })
        .collect()
}

fn obliquity_cos(scene: &Scene, w: WallCoord) -> f64 {
    let d = scene.wall_distance_mm;
    d / (w.x * w.x + w.y * w.y + d * d).sqrt()
}

/// Fractional level for target value `t` against the per-pixel non-decreasing values
/// `b[0..=2m]` (level `i` at index `i + m`). Brackets outward from level 0 and prefers the
/// level closest to 0 on plateaus. Returns the level and whether it was clamped.
pub fn bracket_level(b: &[f64], t: f64) -> (f64, bool) {
    let m = (b.len() as i32 - 1) / 2;
    let at = |i: i32| b[(i + m) as usize];
    if t == at(0) {
        return (0.0, false);
    }
    if t > at(0) {
        for j in 1..=m {
            if at(j) >= t {
                let lo = at(j - 1);
                return ((j - 1) as f64 + (t - lo) / (at(j) - lo), false);
            }
        }
        return (m as f64, true);
    }
    for j in 1..=m {
        if at(-j) <= t {
            let lo = at(-j);
            return (-j as f64 + (t - lo) / (at(-j + 1) - lo), false);
        }
    }
    (-m as f64, true)
}

/// Lamp disk radius of a fractional level (linear between neighboring levels).
pub fn level_radius(level: f64) -> f64 {
    let a = level.abs();
    let lo = a.floor();
    let r0 = level_disk_radius(lo as i32);
    let r1 = level_disk_radius(lo as i32 + 1);
    r0 + (a - lo) * (r1 - r0)
}

/// `radius_lookup` on a single pixel: lamp radius and fractional level.
pub fn radius_lookup(
    stack: &ReferenceImageStack,
    target: f64,
    col: usize,
    row: usize,
) -> (f64, f64) {
    let p = row * stack.width() + col;
    let column: Vec<f64> = stack.images.iter().map(|img| img.values[p]).collect();
    let (level, _) = bracket_level(&column, target);
    (level_radius(level), level)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityStats {
    pub support_pixels: usize,
    pub clamped_bright: usize,
    pub clamped_dark: usize,
    pub clamp_fraction: f64,
    pub min_r_wall: f64,
    pub max_r_wall: f64,
    pub min_r_lamp: f64,
    pub max_r_lamp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub scene_hash: String,
    pub conversion: DiskConversion,
    pub raster: Raster,
    /// Normalized density, max 1, zero outside the support.
    pub rho: Vec<f64>,
    pub r_wall: Vec<f64>,
    pub r_lamp: Vec<f64>,
    pub level: Vec<f64>,
    pub support: Vec<bool>,
    /// Target in stack units after tone alignment and clamping.
    pub target: Vec<f64>,
    pub stats: DensityStats,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn check_stack(scene: &Scene, stack: &ReferenceImageStack) -> Result<()> {
    if stack.scene_hash != scene.hash() {
        return Err(Error::Config(
            "reference stack was built for a different scene".into(),
        ));
    }
    Ok(())
}

/// Target resampled onto the stack raster and mapped linearly so that its 1st and 99th
/// percentiles land on the center values of the darkest and brightest levels. Values are
/// not clamped to the gamut.
pub fn target_in_stack_units(
    stack: &ReferenceImageStack,
    img: &GrayImage,
) -> Result<(Vec<f64>, Vec<bool>)> {
    let raster = stack.images[0].raster();
    let aligned = align_target(img, raster);
    let mut vals: Vec<f64> = aligned
        .linear
        .iter()
        .zip(&aligned.support)
        .filter(|(_, &s)| s)
        .map(|(&v, _)| v)
        .collect();
    if vals.is_empty() {
        return Err(Error::Gamut("target has no non-black pixels".into()));
    }
    vals.sort_by(f64::total_cmp);
    let (p1, p99) = (percentile(&vals, 0.01), percentile(&vals, 0.99));
    let lo = stack.level(-stack.m()).center_value();
    let hi = stack.level(stack.m()).center_value();
    let mapped = aligned
        .linear
        .iter()
        .map(|&v| {
            if p99 - p1 < 1e-6 {
                0.5 * (lo + hi)
            } else {
                lo + (v - p1) / (p99 - p1) * (hi - lo)
            }
        })
        .collect();
    Ok((mapped, aligned.support))
}

/// Full density construction: linearize, align tones to the stack, look up radii, convert
/// to wall radii and set `rho ∝ 1/r_wall²`.
pub fn build_density(
    scene: &Scene,
    stack: &ReferenceImageStack,
    img: &GrayImage,
    conversion: DiskConversion,
) -> Result<DensityField> {
    check_stack(scene, stack)?;
    let (mapped, support) = target_in_stack_units(stack, img)?;
    let eff = effective_levels(scene, stack, conversion);
    density_from_levels(
        scene,
        &eff,
        stack.images[0].raster(),
        &mapped,
        &support,
        conversion,
    )
}

/// Density for a target already expressed in (effective) stack units on the stack raster.
pub fn from_aligned(
    scene: &Scene,
    stack: &ReferenceImageStack,
    target: &[f64],
    support: &[bool],
    conversion: DiskConversion,
) -> Result<DensityField> {
    check_stack(scene, stack)?;
    let eff = effective_levels(scene, stack, conversion);
    density_from_levels(
        scene,
        &eff,
        stack.images[0].raster(),
        target,
        support,
        conversion,
    )
}

fn density_from_levels(
    scene: &Scene,
    eff: &[Vec<f64>],
    raster: Raster,
    target: &[f64],
    support: &[bool],
    conversion: DiskConversion,
) -> Result<DensityField> {
    let n = raster.len();
    let mut field = DensityField {
        scene_hash: scene.hash(),
        conversion,
        raster,
        rho: vec![0.0; n],
        r_wall: vec![0.0; n],
        r_lamp: vec![0.0; n],
        level: vec![0.0; n],
        support: support.to_vec(),
        target: vec![0.0; n],
        stats: DensityStats {
            support_pixels: 0,
            clamped_bright: 0,
            clamped_dark: 0,
            clamp_fraction: 0.0,
            min_r_wall: f64::INFINITY,
            max_r_wall: 0.0,
            min_r_lamp: f64::INFINITY,
            max_r_lamp: 0.0,
        },
    };
    let mut column = vec![0.0; eff.len()];
    for p in 0..n {
        if !support[p] {
            continue;
        }
        for (k, lvl) in eff.iter().enumerate() {
            column[k] = lvl[p];
        }
        let t = target[p];
        let (level, clamped) = bracket_level(&column, t);
        let st = &mut field.stats;
        st.support_pixels += 1;
        if clamped {
            if level > 0.0 {
                st.clamped_bright += 1;
            } else {
                st.clamped_dark += 1;
            }
        }
        let last = column.len() - 1;
        field.target[p] = t.clamp(column[0], column[last]);
        let r_lamp = level_radius(level).min(TUBE_MAX + MARGIN);
        let w = raster.pixel_center(p % raster.width, p / raster.width);
        let r_wall = conversion.wall_radius(scene, w, r_lamp);
        field.level[p] = level;
        field.r_lamp[p] = r_lamp;
        field.r_wall[p] = r_wall;
        st.min_r_wall = st.min_r_wall.min(r_wall);
        st.max_r_wall = st.max_r_wall.max(r_wall);
        st.min_r_lamp = st.min_r_lamp.min(r_lamp);
        st.max_r_lamp = st.max_r_lamp.max(r_lamp);
    }
    if field.stats.support_pixels == 0 {
        return Err(Error::Gamut("density has zero integral".into()));
    }
    let min_r = field.stats.min_r_wall;
    for p in 0..n {
        if support[p] {
            field.rho[p] = (min_r / field.r_wall[p]).powi(2);
        }
    }
    let st = &mut field.stats;
    st.clamp_fraction = (st.clamped_bright + st.clamped_dark) as f64 / st.support_pixels as f64;
    Ok(field)
}

/// Wall-plane integral of `1/r_w²` for lamp radius 0.85 mm over the whole wall raster.
fn reference_inverse_area(scene: &Scene, raster: Raster, conversion: DiskConversion) -> f64 {
    let r0 = level_disk_radius(0);
    let mut sum = 0.0;
    for row in 0..raster.height {
        for col in 0..raster.width {
            let r = conversion.wall_radius(scene, raster.pixel_center(col, row), r0);
            sum += 1.0 / (r * r);
        }
    }
    sum * raster.pixel_pitch * raster.pixel_pitch
}

impl DensityField {
    pub fn pixel_area(&self) -> f64 {
        self.raster.pixel_pitch * self.raster.pixel_pitch
    }

    /// Integral of the normalized density over the wall (mm²).
    pub fn integral(&self) -> f64 {
        self.rho.iter().sum::<f64>() * self.pixel_area()
    }

    /// Integral of `1/r_wall²` over the support (expected disk count per unit packing).
    pub fn inverse_area_integral(&self) -> f64 {
        let min_r = self.stats.min_r_wall;
        self.integral() / (min_r * min_r)
    }

    pub fn index_at(&self, w: WallCoord) -> usize {
        let (c, r) = self.raster.pixel_clamped(w);
        r * self.raster.width + c
    }

    /// Intended lamp disk radius at a wall point (nearest pixel).
    pub fn intended_radius(&self, w: WallCoord) -> f64 {
        self.r_lamp[self.index_at(w)]
    }

    /// Whether the target at `w` is at least as bright as level 0.
    pub fn is_bright(&self, w: WallCoord) -> bool {
        self.level[self.index_at(w)] >= 0.0
    }

    /// Pixel-aligned bounding box of the support: (min x, min y, max x, max y) in mm.
    pub fn domain(&self) -> (f64, f64, f64, f64) {
        let (mut c0, mut r0, mut c1, mut r1) = (usize::MAX, usize::MAX, 0, 0);
        for (p, &s) in self.support.iter().enumerate() {
            if s {
                let (c, r) = (p % self.raster.width, p / self.raster.width);
                c0 = c0.min(c);
                c1 = c1.max(c);
                r0 = r0.min(r);
                r1 = r1.max(r);
            }
        }
        let tl = self.raster.wall_at(c0 as f64, r0 as f64);
        let br = self.raster.wall_at(c1 as f64 + 1.0, r1 as f64 + 1.0);
        (tl.x, br.y, br.x, tl.y)
    }

    /// Writes `rho` as a 16-bit PNG and the statistics as a JSON sidecar.
    pub fn export(&self, png: &std::path::Path, json: &std::path::Path) -> Result<()> {
        let codes: Vec<u16> = self
            .rho
            .iter()
            .map(|&r| (r * 65535.0).round().clamp(0.0, 65535.0) as u16)
            .collect();
        write_png16(png, self.raster.width, self.raster.height, &codes)?;
        write_bytes(json, serde_json::to_string_pretty(&self.stats)?.as_bytes())
    }
}

/// Initial disk count: density integral divided by the density carried by one disk of the
/// dense level-0 reference layout.
pub fn initial_disk_count(
    scene: &Scene,
    field: &DensityField,
    stack: &ReferenceImageStack,
) -> Result<usize> {
    check_stack(scene, stack)?;
    let total = field.inverse_area_integral();
    if !(total > 0.0) {
        return Err(Error::Gamut("density has zero integral".into()));
    }
    let per_disk =
        reference_inverse_area(scene, field.raster, field.conversion) / stack.n_hex as f64;
    Ok((total / per_disk).ceil() as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn linearize_examples() {
        assert_eq!(linearize(255), 1.0);
        assert_eq!(linearize(0), 0.0);
        assert!((linearize(128) - 0.2195).abs() < 1e-4);
        assert!((linearize(127) - 0.2158).abs() < 1e-4);
    }

    fn ramp_column() -> Vec<f64> {
        (0..21).map(|i| 1.0 + i as f64).collect()
    }

    #[test]
    fn bracket_examples() {
        let b = ramp_column();
        assert_eq!(bracket_level(&b, b[10]), (0.0, false));
        let (l, c) = bracket_level(&b, 0.5 * (b[13] + b[14]));
        assert!(!c && (l - 3.5).abs() < 1e-12);
        assert!(
            (level_radius(l) - 0.5 * (level_disk_radius(3) + level_disk_radius(4))).abs() < 1e-12
        );
        assert_eq!(bracket_level(&b, 100.0), (10.0, true));
        assert_eq!(bracket_level(&b, -1.0), (-10.0, true));
        let (l, _) = bracket_level(&b, b[4] + 0.25);
        assert!((l + 5.75).abs() < 1e-12);
        assert!((level_radius(-10.0) - 1.35).abs() < 1e-12);
    }

    #[test]
    fn plateau_prefers_level_near_zero() {
        let mut b = ramp_column();
        for v in &mut b[10..15] {
            *v = 11.0;
        }
        assert_eq!(bracket_level(&b, 11.0).0, 0.0);
        let mut d = ramp_column();
        for v in &mut d[6..11] {
            *v = 11.0;
        }
        assert_eq!(bracket_level(&d, 11.0).0, 0.0);
    }

    proptest! {
        #[test]
        fn lookup_monotone(steps in proptest::collection::vec(0.0..1.0f64, 21), a in -1.0..25.0f64, b in -1.0..25.0f64) {
            let mut col = Vec::new();
            let mut acc = 0.0;
            for s in steps {
                acc += s;
                col.push(acc);
            }
            let (la, _) = bracket_level(&col, a.min(b));
            let (lb, _) = bracket_level(&col, a.max(b));
            prop_assert!(la <= lb + 1e-12);
        }
    }

    #[test]
    fn letterbox_alignment() {
        let raster = Raster {
            width: 8,
            height: 8,
            pixel_pitch: 1.0,
        };
        let img = GrayImage::new(4, 2, vec![255; 8]);
        let a = align_target(&img, raster);
        let rows: Vec<bool> = (0..8).map(|r| a.support[r * 8 + 3]).collect();
        assert_eq!(
            rows,
            vec![false, false, true, true, true, true, false, false]
        );
        assert!(a
            .linear
            .iter()
            .zip(&a.support)
            .all(|(&v, &s)| !s || (v - 1.0).abs() < 1e-12));
    }
}
