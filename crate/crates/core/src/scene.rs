//! Fixed geometry of the lamp: light disk, spherical shade, wall plane, and the
//! mappings between wall and shade.
//!
//! Light and shade share the origin; the projection axis is +z and the wall is the
//! plane `z = wall_distance`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geom::Vec3;

/// Minimum printable tube radius (mm).
pub const R_MIN: f64 = 0.6;
/// Minimum printable solid gap between tubes (mm).
pub const D_MIN: f64 = 0.5;
/// Safety margin between a tube and its embedding disk boundary (mm).
pub const MARGIN: f64 = 0.5 * D_MIN;
/// Upper bound on the radius of any tube (mm).
pub const TUBE_MAX: f64 = 1.3;
/// Radius step between reference levels (mm).
pub const DELTA_R: f64 = 0.05;
/// Number of reference levels on each side of level 0.
pub const LEVELS: i32 = 10;

/// Embedding disk radius of reference level `i` (mm).
pub fn level_disk_radius(i: i32) -> f64 {
    R_MIN + i.unsigned_abs() as f64 * DELTA_R + MARGIN
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scene {
    pub light_center: [f64; 3],
    pub light_diameter_mm: f64,
    pub total_flux_lm: f64,
    pub shade_outer_radius_mm: f64,
    pub shade_thickness_mm: f64,
    pub wall_distance_mm: f64,
    pub wall_extent_mm: [f64; 2],
    pub aniso_scale_h: f64,
    pub aniso_scale_v: f64,
    pub light_samples_n: usize,
}

impl Default for Scene {
    fn default() -> Self {
        Scene {
            light_center: [0.0; 3],
            light_diameter_mm: 9.0,
            total_flux_lm: 1000.0,
            shade_outer_radius_mm: 110.0,
            shade_thickness_mm: 3.0,
            wall_distance_mm: 400.0,
            wall_extent_mm: [1000.0, 1000.0],
            aniso_scale_h: 1.7,
            aniso_scale_v: 1.9,
            light_samples_n: 76,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointEmitter {
    pub position: Vec3,
    pub flux: f64,
    pub normal: Vec3,
}

/// Point on the wall plane (mm), origin on the projection axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallCoord {
    pub x: f64,
    pub y: f64,
}

impl WallCoord {
    pub fn new(x: f64, y: f64) -> Self {
        WallCoord { x, y }
    }
}

/// Point on the outer shade sphere, stored as the unit direction from the shade center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LampCoord {
    pub dir: Vec3,
}

impl LampCoord {
    pub fn point(&self, scene: &Scene) -> Vec3 {
        self.dir * scene.shade_outer_radius_mm
    }
}

/// How a lamp disk radius relates to the wall disk it is packed as.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiskConversion {
    /// The lamp disk (on the inner shell surface) is the largest geodesic disk whose central
    /// projection fits inside the wall disk. Guarantees that packed wall disks give disjoint
    /// lamp disks.
    #[default]
    Containment,
    /// First-order equal-area model on the outer sphere.
    EqualArea,
}

impl DiskConversion {
    pub fn wall_radius(self, scene: &Scene, w: WallCoord, r_lamp: f64) -> f64 {
        match self {
            DiskConversion::Containment => scene.wall_radius_covering(w, r_lamp),
            DiskConversion::EqualArea => scene.equal_area_wall_radius(w, r_lamp),
        }
    }

    pub fn lamp_radius(self, scene: &Scene, w: WallCoord, r_wall: f64) -> f64 {
        match self {
            DiskConversion::Containment => scene.lamp_radius_inside(w, r_wall),
            DiskConversion::EqualArea => scene.equal_area_lamp_radius(w, r_wall),
        }
    }
}

impl Scene {
    pub fn from_json(text: &str) -> Result<Scene> {
        let scene: Scene =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("scene: {e}")))?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.light_center != [0.0; 3] {
            return bad("light_center must coincide with the shade center at the origin");
        }
        if !(self.shade_thickness_mm > 0.0 && self.shade_outer_radius_mm > self.shade_thickness_mm)
        {
            return bad("need shade_outer_radius_mm > shade_thickness_mm > 0");
        }
        if self.wall_distance_mm <= self.shade_outer_radius_mm {
            return bad("wall_distance_mm must exceed shade_outer_radius_mm");
        }
        if !(self.wall_extent_mm[0] > 0.0 && self.wall_extent_mm[1] > 0.0) {
            return bad("wall_extent_mm components must be positive");
        }
        if !(self.aniso_scale_h >= 1.0 && self.aniso_scale_v >= 1.0) {
            return bad("aniso scales must be >= 1");
        }
        if !(self.light_diameter_mm > 0.0 && 0.5 * self.light_diameter_mm < self.inner_radius()) {
            return bad("light disk must fit inside the shade");
        }
        if !(self.total_flux_lm > 0.0) {
            return bad("total_flux_lm must be positive");
        }
        if self.light_samples_n == 0 {
            return bad("light_samples_n must be >= 1");
        }
        Ok(())
    }

    /// Hex digest of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("scene serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn outer_radius(&self) -> f64 {
        self.shade_outer_radius_mm
    }

    pub fn inner_radius(&self) -> f64 {
        self.shade_outer_radius_mm - self.shade_thickness_mm
    }

    /// Sphere on which lamp disk and tube radii are measured: the inner shell surface,
    /// where radial bores are narrowest and gaps between them smallest.
    pub fn metric_radius(&self) -> f64 {
        self.inner_radius()
    }

    pub fn half_extent(&self) -> (f64, f64) {
        (0.5 * self.wall_extent_mm[0], 0.5 * self.wall_extent_mm[1])
    }

    pub fn wall_point(&self, w: WallCoord) -> Vec3 {
        Vec3::new(w.x, w.y, self.wall_distance_mm)
    }

    pub fn in_wall(&self, w: WallCoord) -> bool {
        let (hx, hy) = self.half_extent();
        w.x.abs() <= hx && w.y.abs() <= hy
    }

    pub fn wall_to_lamp(&self, w: WallCoord) -> LampCoord {
        LampCoord {
            dir: self.wall_point(w).normalize(),
        }
    }

    /// Inverse of [`Scene::wall_to_lamp`]; `None` for directions that never reach the wall.
    pub fn lamp_to_wall(&self, l: LampCoord) -> Option<WallCoord> {
        if l.dir.z <= 0.0 {
            return None;
        }
        let s = self.wall_distance_mm / l.dir.z;
        Some(WallCoord::new(l.dir.x * s, l.dir.y * s))
    }

    /// Distance from the light center to the wall point and the cosine/sine of its
    /// angle to the projection axis.
    fn obliquity(&self, w: WallCoord) -> (f64, f64, f64) {
        let rho = w.x.hypot(w.y);
        let dist = rho.hypot(self.wall_distance_mm);
        (dist, self.wall_distance_mm / dist, rho / dist)
    }

    fn check_disk(&self, w: WallCoord, r_w: f64) -> Result<()> {
        let (hx, hy) = self.half_extent();
        if !(r_w > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "disk radius {r_w} must be positive"
            )));
        }
        if w.x.abs() + r_w > hx + 1e-9 || w.y.abs() + r_w > hy + 1e-9 {
            return Err(Error::OutOfDomain(format!(
                "disk at ({}, {}) radius {r_w} extends beyond the wall extent",
                w.x, w.y
            )));
        }
        Ok(())
    }

    /// Radius of the outer-sphere disk with the same (first-order) area as the central
    /// projection of the wall disk: area scales with the squared distance ratio and the
    /// obliquity cosine.
    pub fn lamp_disk_from_wall_disk(&self, w: WallCoord, r_w: f64) -> Result<f64> {
        self.check_disk(w, r_w)?;
        Ok(self.equal_area_lamp_radius(w, r_w))
    }

    /// Inverse of [`Scene::lamp_disk_from_wall_disk`].
    pub fn wall_disk_from_lamp_disk(&self, w: WallCoord, r_l: f64) -> Result<f64> {
        if !(r_l > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "disk radius {r_l} must be positive"
            )));
        }
        let r_w = self.equal_area_wall_radius(w, r_l);
        self.check_disk(w, r_w)?;
        Ok(r_w)
    }

    fn equal_area_lamp_radius(&self, w: WallCoord, r_w: f64) -> f64 {
        let (_, c, _) = self.obliquity(w);
        r_w * self.outer_radius() * c.powf(1.5) / self.wall_distance_mm
    }

    fn equal_area_wall_radius(&self, w: WallCoord, r_l: f64) -> f64 {
        let (_, c, _) = self.obliquity(w);
        r_l * self.wall_distance_mm / (self.outer_radius() * c.powf(1.5))
    }

    /// Largest geodesic radius (on the metric sphere) of a disk centred at
    /// `wall_to_lamp(w)` whose central projection lies inside the wall disk of radius `r_w`.
    pub fn lamp_radius_inside(&self, w: WallCoord, r_w: f64) -> f64 {
        let (dist, c, s) = self.obliquity(w);
        self.metric_radius() * (r_w * c).atan2(dist + r_w * s)
    }

    /// Smallest wall disk radius around `w` that contains the projection of the lamp disk
    /// of geodesic radius `r_l`; inverse of [`Scene::lamp_radius_inside`].
    pub fn wall_radius_covering(&self, w: WallCoord, r_l: f64) -> f64 {
        let (dist, c, s) = self.obliquity(w);
        let ta = (r_l / self.metric_radius()).tan();
        dist * ta / (c - ta * s)
    }
}

/// Samples the light disk with `n` equal-flux point emitters: one at the center and
/// concentric rings whose counts are proportional to their circumference.
pub fn sample_light(scene: &Scene, n: usize) -> Result<Vec<PointEmitter>> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "light sample count must be >= 1".into(),
        ));
    }
    let c = Vec3::from(scene.light_center);
    let normal = Vec3::z();
    let flux = scene.total_flux_lm / n as f64;
    let mut out = Vec::with_capacity(n);
    out.push(PointEmitter {
        position: c,
        flux,
        normal,
    });
    let rest = n - 1;
    if rest == 0 {
        return Ok(out);
    }
    let rings = (((9.0 + 12.0 * rest as f64).sqrt() - 3.0) / 6.0)
        .round()
        .max(1.0) as usize;
    let rings = rings.min(rest);
    let weight_sum = (rings * (rings + 1) / 2) as f64;
    // largest-remainder apportionment of `rest` points to rings in proportion to k
    let quotas: Vec<f64> = (1..=rings)
        .map(|k| rest as f64 * k as f64 / weight_sum)
        .collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut left = rest - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..rings).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(b.cmp(&a))
    });
    for &k in &order {
        if left == 0 {
            break;
        }
        counts[k] += 1;
        left -= 1;
    }
    let radius = 0.5 * scene.light_diameter_mm;
    for (k, &count) in counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let r = radius * (k + 1) as f64 / rings as f64;
        let phase = if k % 2 == 1 {
            std::f64::consts::PI / count as f64
        } else {
            0.0
        };
        for j in 0..count {
            let a = phase + std::f64::consts::TAU * j as f64 / count as f64;
            out.push(PointEmitter {
                position: c + Vec3::new(r * a.cos(), r * a.sin(), 0.0),
                flux,
                normal,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn defaults_from_empty_json() {
        let s = Scene::from_json("{}").unwrap();
        assert_eq!(s, Scene::default());
        assert_eq!(s.shade_outer_radius_mm, 110.0);
        assert_eq!(s.shade_thickness_mm, 3.0);
        assert_eq!(s.wall_distance_mm, 400.0);
        assert_eq!(s.wall_extent_mm, [1000.0, 1000.0]);
        assert_eq!(s.light_diameter_mm, 9.0);
        assert_eq!((s.aniso_scale_h, s.aniso_scale_v), (1.7, 1.9));
        assert_eq!(s.light_samples_n, 76);
    }

    #[test]
    fn json_keys_and_overrides() {
        let s = Scene::from_json(r#"{"wall_distance_mm": 500.0, "light_samples_n": 7}"#).unwrap();
        assert_eq!(s.wall_distance_mm, 500.0);
        assert_eq!(s.light_samples_n, 7);
        let v: serde_json::Value = serde_json::to_value(Scene::default()).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            [
                "aniso_scale_h",
                "aniso_scale_v",
                "light_center",
                "light_diameter_mm",
                "light_samples_n",
                "shade_outer_radius_mm",
                "shade_thickness_mm",
                "total_flux_lm",
                "wall_distance_mm",
                "wall_extent_mm"
            ]
        );
        assert!(Scene::from_json(r#"{"shade_thickness_mm": 200.0}"#).is_err());
        assert!(Scene::from_json(r#"{"wall_distance_mm": 100.0}"#).is_err());
        assert!(Scene::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn level_radii() {
        assert!((level_disk_radius(0) - 0.85).abs() < 1e-12);
        assert!((level_disk_radius(10) - 1.35).abs() < 1e-12);
        assert!((level_disk_radius(-10) - 1.35).abs() < 1e-12);
    }

    #[test]
    fn single_emitter() {
        let s = Scene::default();
        let e = sample_light(&s, 1).unwrap();
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].position, Vec3::zeros());
        assert_eq!(e[0].flux, s.total_flux_lm);
        assert!(sample_light(&s, 0).is_err());
    }

    #[test]
    fn seventy_six_emitters() {
        let s = Scene::default();
        let e = sample_light(&s, 76).unwrap();
        assert_eq!(e.len(), 76);
        let total: f64 = e.iter().map(|p| p.flux).sum();
        assert!((total - 1000.0).abs() < 1e-9);
        let rmax = e.iter().map(|p| p.position.norm()).fold(0.0, f64::max);
        assert!(rmax <= 4.5 + 1e-12);
    }

    #[test]
    fn seven_emitters_center_and_ring() {
        let s = Scene::default();
        let e = sample_light(&s, 7).unwrap();
        assert_eq!(e[0].position, Vec3::zeros());
        let ring: Vec<f64> = e[1..].iter().map(|p| p.position.norm()).collect();
        assert!(ring.iter().all(|r| (r - ring[0]).abs() < 1e-12 && *r > 0.0));
        let mut c = Vec3::zeros();
        for p in &e {
            c += p.position;
        }
        c /= 7.0;
        assert!(c.norm() < 1e-9);
    }

    #[test]
    fn axial_wall_to_lamp() {
        let s = Scene::default();
        let l = s.wall_to_lamp(WallCoord::new(0.0, 0.0));
        assert!((l.point(&s) - Vec3::new(0.0, 0.0, 110.0)).norm() < 1e-12);
    }

    #[test]
    fn oblique_wall_to_lamp() {
        // ray through (500, 0, 400): direction (500, 0, 400)/sqrt(410000)
        let s = Scene::default();
        let l = s.wall_to_lamp(WallCoord::new(500.0, 0.0));
        let n = 410_000f64.sqrt();
        assert!((l.dir.z - 400.0 / n).abs() < 1e-12);
        assert!((l.dir.z - 0.6247).abs() < 1e-4);
        assert!((l.point(&s).norm() - 110.0).abs() < 1e-12);
        assert!((l.point(&s).x - 110.0 * 500.0 / n).abs() < 1e-12);
    }

    #[test]
    fn equal_area_axial_example() {
        let s = Scene::default();
        let r_w = s
            .wall_disk_from_lamp_disk(WallCoord::new(0.0, 0.0), 0.85)
            .unwrap();
        assert!((r_w - 0.85 * 400.0 / 110.0).abs() < 1e-12);
        assert!((r_w - 3.09).abs() < 0.005);
    }

    #[test]
    fn equal_area_domain_error() {
        let s = Scene::default();
        assert!(matches!(
            s.lamp_disk_from_wall_disk(WallCoord::new(499.0, 0.0), 3.0),
            Err(Error::OutOfDomain(_))
        ));
        assert!(s
            .lamp_disk_from_wall_disk(WallCoord::new(0.0, 0.0), -1.0)
            .is_err());
    }

    /// Solid angle of the wall disk by Monte Carlo over uniform disk samples.
    fn mc_lamp_radius(s: &Scene, w: WallCoord, r_w: f64, samples: usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = s.wall_distance_mm;
        let mut acc = 0.0;
        for _ in 0..samples {
            let r = r_w * rng.gen::<f64>().sqrt();
            let a = std::f64::consts::TAU * rng.gen::<f64>();
            let p = Vec3::new(w.x + r * a.cos(), w.y + r * a.sin(), d);
            acc += d / p.norm().powi(3);
        }
        let omega = std::f64::consts::PI * r_w * r_w * acc / samples as f64;
        let area = omega * s.outer_radius().powi(2);
        (area / std::f64::consts::PI).sqrt()
    }

    #[test]
    fn equal_area_matches_monte_carlo() {
        let s = Scene::default();
        let w = WallCoord::new(300.0, 200.0);
        for r_w in [3.0, 5.0] {
            let analytic = s.lamp_disk_from_wall_disk(w, r_w).unwrap();
            let mc = mc_lamp_radius(&s, w, r_w, 100_000);
            assert!(
                ((analytic * analytic) / (mc * mc) - 1.0).abs() < 0.01,
                "{analytic} vs {mc}"
            );
        }
    }

    #[test]
    fn containment_is_tight() {
        // the back-projected boundary of the wall disk never comes closer (angularly) to the
        // disk center direction than the containment radius, and touches it
        let s = Scene::default();
        for (x, y, r_w) in [(0.0, 0.0, 3.0), (300.0, 200.0, 4.0), (-450.0, 480.0, 6.0)] {
            let w = WallCoord::new(x, y);
            let r_l = s.lamp_radius_inside(w, r_w);
            let c = s.wall_to_lamp(w).dir;
            let mut min_angle = f64::INFINITY;
            for k in 0..20_000 {
                let a = std::f64::consts::TAU * k as f64 / 20_000.0;
                let p =
                    Vec3::new(x + r_w * a.cos(), y + r_w * a.sin(), s.wall_distance_mm).normalize();
                min_angle = min_angle.min(crate::geom::angle_between(&c, &p));
            }
            let oracle = min_angle * s.metric_radius();
            assert!(oracle >= r_l - 1e-9, "{oracle} < {r_l}");
            assert!(oracle - r_l < 1e-6, "{oracle} vs {r_l}");
        }
    }

    #[test]
    fn containment_axial_value() {
        let s = Scene::default();
        let r_w = s.wall_radius_covering(WallCoord::new(0.0, 0.0), 0.85);
        assert!((r_w - 400.0 * (0.85f64 / 107.0).tan()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn round_trip_wall_lamp(x in -500.0..500.0f64, y in -500.0..500.0f64) {
            let s = Scene::default();
            let w = WallCoord::new(x, y);
            let back = s.lamp_to_wall(s.wall_to_lamp(w)).unwrap();
            prop_assert!((back.x - x).abs() < 1e-9 && (back.y - y).abs() < 1e-9);
            prop_assert!((s.wall_to_lamp(w).point(&s).norm() - 110.0).abs() < 1e-9);
        }

        #[test]
        fn equal_area_inverse_pair(x in -480.0..480.0f64, y in -480.0..480.0f64, r_l in 0.85..1.55f64) {
            let s = Scene::default();
            let w = WallCoord::new(x, y);
            let r_w = s.wall_disk_from_lamp_disk(w, r_l).unwrap();
            let back = s.lamp_disk_from_wall_disk(w, r_w).unwrap();
            prop_assert!((back / r_l - 1.0).abs() < 1e-3);
        }

        #[test]
        fn conversions_monotone(x in -500.0..500.0f64, y in -500.0..500.0f64, r in 0.85..1.5f64, dr in 1e-4..0.1f64) {
            let s = Scene::default();
            let w = WallCoord::new(x, y);
            prop_assert!(s.equal_area_wall_radius(w, r + dr) > s.equal_area_wall_radius(w, r));
            prop_assert!(s.wall_radius_covering(w, r + dr) > s.wall_radius_covering(w, r));
        }

        #[test]
        fn containment_inverse_pair(x in -500.0..500.0f64, y in -500.0..500.0f64, r_l in 0.85..1.6f64) {
            let s = Scene::default();
            let w = WallCoord::new(x, y);
            let back = s.lamp_radius_inside(w, s.wall_radius_covering(w, r_l));
            prop_assert!((back - r_l).abs() < 1e-9);
        }

        #[test]
        fn flux_conserved(n in 1usize..400) {
            let s = Scene::default();
            let e = sample_light(&s, n).unwrap();
            prop_assert_eq!(e.len(), n);
            let total: f64 = e.iter().map(|p| p.flux).sum();
            prop_assert!((total - s.total_flux_lm).abs() < 1e-9);
            prop_assert!(e.iter().all(|p| p.position.norm() <= 4.5 + 1e-12));
        }
    }
}
