//! Dense hexagonal packing of equal disks on the metric sphere over the projection region.

use std::collections::HashMap;

use crate::geom::Vec3;
use crate::scene::{LampCoord, Scene, WallCoord};

/// Extra wall margin (mm) around the projection region covered by reference layouts, so
/// footprints reaching into the image from outside are simulated.
pub const DEFAULT_LAYOUT_MARGIN: f64 = 40.0;

const SPACING_SLACK: f64 = 1.002;

#[derive(Debug, Clone, PartialEq)]
pub struct HexLayout {
    pub disk_radius: f64,
    pub centers: Vec<LampCoord>,
    /// Number of centers whose projection lies inside the wall extent.
    pub n_hex: usize,
}

/// Geodesic radius (metric sphere) of the largest cone around the axis that stays inside
/// the wall extent.
pub fn cap_radius(scene: &Scene) -> f64 {
    let (hx, hy) = scene.half_extent();
    scene.metric_radius() * hx.min(hy).atan2(scene.wall_distance_mm)
}

pub fn hex_grid_layout(scene: &Scene, disk_radius: f64) -> HexLayout {
    hex_grid_layout_with_margin(scene, disk_radius, DEFAULT_LAYOUT_MARGIN)
}

fn in_region(scene: &Scene, dir: &Vec3, margin: f64) -> bool {
    let Some(w) = scene.lamp_to_wall(LampCoord { dir: *dir }) else {
        return false;
    };
    let (hx, hy) = scene.half_extent();
    w.x.abs() <= hx + margin && w.y.abs() <= hy + margin
}

struct Grid {
    cell: f64,
    map: HashMap<(i64, i64, i64), Vec<usize>>,
}

impl Grid {
    fn key(&self, p: &Vec3) -> (i64, i64, i64) {
        (
            (p.x / self.cell).floor() as i64,
            (p.y / self.cell).floor() as i64,
            (p.z / self.cell).floor() as i64,
        )
    }

    fn near<'a>(&'a self, p: &Vec3) -> impl Iterator<Item = usize> + 'a {
        let (x, y, z) = self.key(p);
        (-1..=1i64).flat_map(move |dx| {
            (-1..=1i64).flat_map(move |dy| {
                (-1..=1i64).flat_map(move |dz| {
                    self.map
                        .get(&(x + dx, y + dy, z + dz))
                        .into_iter()
                        .flatten()
                        .copied()
                })
            })
        })
    }
}

/// Unit directions at angle `sigma` from both unit vectors `a` and `b`.
fn equidistant(a: &Vec3, b: &Vec3, sigma: f64) -> Option<[Vec3; 2]> {
    let cos_phi = a.dot(b);
    let n = a.cross(b);
    let sin_phi = n.norm();
    if sin_phi < 1e-12 {
        return None;
    }
    let alpha = sigma.cos() / (1.0 + cos_phi);
    let rest = 1.0 - 2.0 * alpha * alpha * (1.0 + cos_phi);
    if rest < 0.0 {
        return None;
    }
    let beta = rest.sqrt() / sin_phi;
    let base = (a + b) * alpha;
    Some([base + n * beta, base - n * beta])
}

#[derive(PartialEq)]
struct Candidate {
    z: f64,
    seq: usize,
    dir: Vec3,
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // max-heap: nearest to the axis (largest z) first, then oldest
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.z.total_cmp(&other.z).then(other.seq.cmp(&self.seq))
    }
}

/// Hexagonal layout of disks of geodesic radius `disk_radius` (metric sphere) whose
/// centers project inside the wall extent grown by `margin_mm`.
///
/// Built by an advancing front from the axis: each new center is the free position,
/// tangent to two placed disks, that is closest to the axis. In the plane this reproduces
/// the hexagonal lattice exactly; on the sphere it inserts the defects curvature requires.
pub fn hex_grid_layout_with_margin(scene: &Scene, disk_radius: f64, margin_mm: f64) -> HexLayout {
    let rho = scene.metric_radius();
    if disk_radius >= cap_radius(scene) {
        log::warn!("disk radius {disk_radius} mm fills the whole cap; single disk layout");
        return HexLayout {
            disk_radius,
            centers: vec![LampCoord { dir: Vec3::z() }],
            n_hex: 1,
        };
    }
    let sigma = 2.0 * disk_radius * SPACING_SLACK / rho;
    // unit-sphere chord of the spacing, slightly relaxed for the free-position test
    let chord = 2.0 * (0.5 * sigma).sin();
    let free_chord = chord * (1.0 - 1e-9);
    let mut placed: Vec<Vec3> = Vec::new();
    let mut grid = Grid {
        cell: 2.0 * chord,
        map: HashMap::new(),
    };
    let mut heap = std::collections::BinaryHeap::new();
    let mut seq = 0;
    let first = Vec3::z();
    let second = Vec3::new(sigma.sin(), 0.0, sigma.cos());
    for d in [first, second] {
        heap.push(Candidate {
            z: d.z,
            seq,
            dir: d,
        });
        seq += 1;
    }
    while let Some(c) = heap.pop() {
        let p = c.dir;
        if grid.near(&p).any(|k| (placed[k] - p).norm() < free_chord) {
            continue;
        }
        if !in_region(scene, &p, margin_mm) {
            continue;
        }
        let id = placed.len();
        let neighbors: Vec<usize> = grid
            .near(&p)
            .filter(|&k| (placed[k] - p).norm() < 2.0 * chord)
            .collect();
        let key = grid.key(&p);
        grid.map.entry(key).or_default().push(id);
        placed.push(p);
        for k in neighbors {
            if let Some(cands) = equidistant(&p, &placed[k], sigma) {
                for q in cands {
                    let q = q.normalize();
                    heap.push(Candidate {
                        z: q.z,
                        seq,
                        dir: q,
                    });
                    seq += 1;
                }
            }
        }
    }

    let centers: Vec<LampCoord> = placed.into_iter().map(|dir| LampCoord { dir }).collect();
    let n_hex = centers
        .iter()
        .filter(|c| {
            scene
                .lamp_to_wall(**c)
                .is_some_and(|w: WallCoord| scene.in_wall(w))
        })
        .count();
    HexLayout {
        disk_radius,
        centers,
        n_hex,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::angle_between;

    fn small_scene() -> Scene {
        Scene {
            wall_extent_mm: [160.0, 160.0],
            ..Scene::default()
        }
    }

    #[test]
    fn innermost_neighbors_at_twice_radius() {
        let s = small_scene();
        let layout = hex_grid_layout(&s, 0.85);
        let rho = s.metric_radius();
        let mut by_axis: Vec<&LampCoord> = layout.centers.iter().collect();
        by_axis.sort_by(|a, b| b.dir.z.total_cmp(&a.dir.z));
        let c = by_axis[0];
        assert!(c.dir.z > 1.0 - 1e-12);
        let mut d: Vec<f64> = layout
            .centers
            .iter()
            .map(|o| rho * angle_between(&c.dir, &o.dir))
            .filter(|&d| d > 0.0)
            .collect();
        d.sort_by(f64::total_cmp);
        for &x in &d[..6] {
            assert!((x / 1.7 - 1.0).abs() < 0.02, "{x}");
        }
        assert!(d[6] > 2.5);
    }

    #[test]
    fn no_overlap_and_count() {
        let s = small_scene();
        let layout = hex_grid_layout(&s, 0.85);
        let rho = s.metric_radius();
        let n = layout.centers.len();
        for i in 0..n {
            for j in i + 1..n {
                let g = rho * angle_between(&layout.centers[i].dir, &layout.centers[j].dir);
                assert!(g >= 1.7 - 1e-6, "overlap {g}");
            }
        }
        // packing density close to hexagonal over the wall window's lamp area
        let area_frac = layout.n_hex as f64 * std::f64::consts::PI * 0.85 * 0.85;
        assert!(layout.n_hex > 100 && area_frac > 0.0);
    }

    #[test]
    fn periphery_density_stays_hexagonal() {
        let s = Scene::default();
        let layout = hex_grid_layout_with_margin(&s, 1.35, 0.0);
        let rho = s.metric_radius();
        let n = layout.centers.len();
        let mut min = f64::INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                min = min.min(rho * angle_between(&layout.centers[i].dir, &layout.centers[j].dir));
            }
        }
        assert!(min >= 2.7 - 1e-6);
        // solid angle of the wall window over the metric sphere vs hex cell area
        let (hx, hy) = s.half_extent();
        let d = s.wall_distance_mm;
        let omega = 4.0 * ((hx * hy) / (d * (hx * hx + hy * hy + d * d).sqrt())).atan();
        let ideal = omega * rho * rho / (0.75f64.sqrt() * 2.7 * 2.7 * 1.004);
        let ratio = layout.n_hex as f64 / ideal;
        assert!(ratio > 0.85 && ratio < 1.05, "{ratio}");
    }

    #[test]
    fn degenerate_cap() {
        let s = small_scene();
        let r = cap_radius(&s);
        let layout = hex_grid_layout(&s, r);
        assert_eq!(layout.centers.len(), 1);
        assert_eq!(layout.n_hex, 1);
    }
}
