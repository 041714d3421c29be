//! Mesh checks: edge manifoldness and orientation, Euler characteristic, enclosed volume,
//! triangle-triangle intersections, and probes used to measure the bores.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geom::Vec3;

use super::ShellMesh;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshAudit {
    pub vertices: usize,
    pub triangles: usize,
    pub tunnels: usize,
    pub boundary_edges: usize,
    pub nonmanifold_edges: usize,
    pub misoriented_edges: usize,
    pub degenerate_triangles: usize,
    pub watertight: bool,
    pub oriented: bool,
    pub euler_characteristic: i64,
    pub expected_euler: i64,
    pub volume_mm3: f64,
    pub self_intersections: usize,
    /// Shortest edge in the mesh (mm).
    pub min_edge_mm: f64,
}

impl MeshAudit {
    pub fn ok(&self) -> bool {
        self.watertight
            && self.oriented
            && self.self_intersections == 0
            && self.euler_characteristic == self.expected_euler
            && self.volume_mm3 > 0.0
    }
}

#[inline]
fn orient(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> f64 {
    (b - a).cross(&(c - a)).dot(&(d - a))
}

/// Whether segment `pq` crosses the interior of triangle `abc` (touching does not count).
#[inline]
fn segment_crosses(p: &Vec3, q: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> bool {
    let dp = orient(a, b, c, p);
    let dq = orient(a, b, c, q);
    if !((dp > 0.0 && dq < 0.0) || (dp < 0.0 && dq > 0.0)) {
        return false;
    }
    let s1 = orient(p, q, a, b);
    let s2 = orient(p, q, b, c);
    let s3 = orient(p, q, c, a);
    (s1 > 0.0 && s2 > 0.0 && s3 > 0.0) || (s1 < 0.0 && s2 < 0.0 && s3 < 0.0)
}

/// Intersection test for two triangles given as vertex ids; shared vertices are allowed
/// to touch. Coplanar overlaps are not detected.
fn triangles_intersect(mesh: &ShellMesh, t: &[u32; 3], u: &[u32; 3]) -> bool {
    let shared: Vec<u32> = t.iter().filter(|v| u.contains(v)).copied().collect();
    let pt = mesh.triangle_of(t);
    let pu = mesh.triangle_of(u);
    match shared.len() {
        0 => (0..3).any(|k| {
            segment_crosses(&pt[k], &pt[(k + 1) % 3], &pu[0], &pu[1], &pu[2])
                || segment_crosses(&pu[k], &pu[(k + 1) % 3], &pt[0], &pt[1], &pt[2])
        }),
        1 => {
            let opp = |tri: &[u32; 3], p: &[Vec3; 3]| {
                let k = tri
                    .iter()
                    .position(|v| *v == shared[0])
                    .expect("shared vertex");
                (p[(k + 1) % 3], p[(k + 2) % 3])
            };
            let (a, b) = opp(t, &pt);
            let (c, d) = opp(u, &pu);
            segment_crosses(&a, &b, &pu[0], &pu[1], &pu[2])
                || segment_crosses(&c, &d, &pt[0], &pt[1], &pt[2])
        }
        _ => false,
    }
}

impl ShellMesh {
    #[inline]
    fn triangle_of(&self, t: &[u32; 3]) -> [Vec3; 3] {
        t.map(|i| self.vertices[i as usize])
    }
}

type Key = (i32, i32, i32);

/// Hashed grid over triangle bounding boxes with one level per power-of-two cell size.
/// Each triangle lives on the finest level whose cells are at least as large as its box, so
/// it occupies at most eight cells however the triangle sizes vary.
pub struct TriangleGrid {
    cell: f64,
    levels: Vec<HashMap<Key, Vec<u32>>>,
    level_of: Vec<u8>,
    boxes: Vec<(Vec3, Vec3)>,
}

impl TriangleGrid {
    pub fn new(mesh: &ShellMesh, cell: f64) -> TriangleGrid {
        let boxes: Vec<(Vec3, Vec3)> = mesh
            .triangles
            .iter()
            .map(|t| {
                let p = mesh.triangle_of(t);
                (p[0].inf(&p[1]).inf(&p[2]), p[0].sup(&p[1]).sup(&p[2]))
            })
            .collect();
        let level_of: Vec<u8> = boxes
            .iter()
            .map(|(lo, hi)| {
                let extent = (hi - lo).max();
                let mut l = 0u8;
                while cell * f64::from(1u32 << l) < extent && l < 30 {
                    l += 1;
                }
                l
            })
            .collect();
        let n_levels = level_of.iter().max().map_or(0, |&l| l as usize + 1);
        let mut levels: Vec<HashMap<Key, Vec<u32>>> = vec![HashMap::new(); n_levels];
        let mut grid = TriangleGrid {
            cell,
            levels: Vec::new(),
            level_of,
            boxes,
        };
        for (i, (lo, hi)) in grid.boxes.iter().enumerate() {
            let l = grid.level_of[i] as usize;
            grid.for_cells(l, lo, hi, |k| {
                levels[l].entry(k).or_default().push(i as u32)
            });
        }
        grid.levels = levels;
        grid
    }

    fn size(&self, level: usize) -> f64 {
        self.cell * f64::from(1u32 << level)
    }

    fn key(&self, level: usize, p: &Vec3) -> Key {
        let s = self.size(level);
        (
            (p.x / s).floor() as i32,
            (p.y / s).floor() as i32,
            (p.z / s).floor() as i32,
        )
    }

    fn for_cells(&self, level: usize, lo: &Vec3, hi: &Vec3, mut f: impl FnMut(Key)) {
        let (a, b) = (self.key(level, lo), self.key(level, hi));
        for x in a.0..=b.0 {
            for y in a.1..=b.1 {
                for z in a.2..=b.2 {
                    f((x, y, z));
                }
            }
        }
    }

    /// Cell size suited to `mesh`: twice the median edge length, clamped to [0.2, 2] mm.
    pub fn default_cell(mesh: &ShellMesh) -> f64 {
        let mut lens: Vec<f64> = mesh
            .triangles
            .iter()
            .step_by((mesh.triangles.len() / 4096).max(1))
            .map(|t| (mesh.vertices[t[0] as usize] - mesh.vertices[t[1] as usize]).norm())
            .collect();
        if lens.is_empty() {
            return 1.0;
        }
        lens.sort_by(f64::total_cmp);
        (2.0 * lens[lens.len() / 2]).clamp(0.2, 2.0)
    }

    /// Triangles whose bounding boxes may meet the segment's bounding box.
    pub fn candidates(&self, p: &Vec3, q: &Vec3) -> Vec<u32> {
        let (lo, hi) = (p.inf(q), p.sup(q));
        let mut out = Vec::new();
        for (l, cells) in self.levels.iter().enumerate() {
            self.for_cells(l, &lo, &hi, |k| {
                if let Some(v) = cells.get(&k) {
                    out.extend_from_slice(v);
                }
            });
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Whether segment `pq` crosses any triangle of `mesh`.
    pub fn segment_hits(&self, mesh: &ShellMesh, p: &Vec3, q: &Vec3) -> bool {
        self.candidates(p, q).into_iter().any(|t| {
            let [a, b, c] = mesh.triangle(t as usize);
            segment_crosses(p, q, &a, &b, &c)
        })
    }

    fn self_intersections(&self, mesh: &ShellMesh) -> usize {
        (0..self.boxes.len())
            .into_par_iter()
            .map(|i| {
                let li = self.level_of[i] as usize;
                let (a0, a1) = self.boxes[i];
                let mut hits = 0;
                // partners on the same or a coarser level; same-level pairs are taken once
                for l in li..self.levels.len() {
                    self.for_cells(l, &a0, &a1, |k| {
                        let Some(list) = self.levels[l].get(&k) else {
                            return;
                        };
                        for &j in list {
                            if l == li && j as usize <= i {
                                continue;
                            }
                            let (b0, b1) = self.boxes[j as usize];
                            let lo = a0.sup(&b0);
                            let hi = a1.inf(&b1);
                            if lo.x > hi.x || lo.y > hi.y || lo.z > hi.z {
                                continue;
                            }
                            // each pair only in the cell holding the overlap's low corner
                            if self.key(l, &lo) != k {
                                continue;
                            }
                            if triangles_intersect(
                                mesh,
                                &mesh.triangles[i],
                                &mesh.triangles[j as usize],
                            ) {
                                hits += 1;
                            }
                        }
                    });
                }
                hits
            })
            .sum()
    }
}

/// Full audit. `check_intersections = false` skips the (dominant) pairwise test.
pub fn audit(mesh: &ShellMesh, check_intersections: bool) -> MeshAudit {
    let mut edges: Vec<(u64, bool)> = Vec::with_capacity(3 * mesh.triangles.len());
    let mut degenerate = 0;
    let mut min_edge = f64::INFINITY;
    for t in &mesh.triangles {
        let p = mesh.triangle_of(t);
        if (p[1] - p[0]).cross(&(p[2] - p[0])).norm() <= 0.0 {
            degenerate += 1;
        }
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            edges.push(((lo as u64) << 32 | hi as u64, a < b));
            min_edge = min_edge.min((p[k] - p[(k + 1) % 3]).norm());
        }
    }
    edges.par_sort_unstable();
    let (mut boundary, mut nonmanifold, mut misoriented, mut n_edges) = (0, 0, 0, 0i64);
    let mut i = 0;
    while i < edges.len() {
        let mut j = i;
        while j < edges.len() && edges[j].0 == edges[i].0 {
            j += 1;
        }
        n_edges += 1;
        let forward = edges[i..j].iter().filter(|e| e.1).count();
        match j - i {
            1 => boundary += 1,
            2 if forward != 1 => misoriented += 1,
            2 => {}
            _ => nonmanifold += 1,
        }
        i = j;
    }
    let mut used = vec![false; mesh.vertices.len()];
    for t in &mesh.triangles {
        for &v in t {
            used[v as usize] = true;
        }
    }
    let n_vertices = used.iter().filter(|u| **u).count() as i64;
    let self_intersections = if check_intersections {
        TriangleGrid::new(mesh, TriangleGrid::default_cell(mesh)).self_intersections(mesh)
    } else {
        0
    };
    MeshAudit {
        vertices: mesh.vertices.len(),
        triangles: mesh.triangles.len(),
        tunnels: mesh.tunnels,
        boundary_edges: boundary,
        nonmanifold_edges: nonmanifold,
        misoriented_edges: misoriented,
        degenerate_triangles: degenerate,
        watertight: boundary == 0 && nonmanifold == 0,
        oriented: misoriented == 0 && boundary == 0 && nonmanifold == 0,
        euler_characteristic: n_vertices - n_edges + mesh.triangles.len() as i64,
        expected_euler: mesh.expected_euler(),
        volume_mm3: mesh.volume(),
        self_intersections,
        min_edge_mm: min_edge,
    }
}

/// Number of triangles crossed by the ray `p + t d`, `t > 0` (parity gives inside/outside).
pub fn ray_crossings(mesh: &ShellMesh, p: &Vec3, d: &Vec3, length: f64) -> usize {
    let q = p + d.normalize() * length;
    (0..mesh.triangles.len())
        .filter(|&t| {
            let [a, b, c] = mesh.triangle(t);
            segment_crosses(p, &q, &a, &b, &c)
        })
        .count()
}

/// Mean distance from the axis `origin + s dir` at which the mesh crosses the plane through
/// `origin` normal to `dir`, over crossings within `window` of the origin.
pub fn slice_radius(mesh: &ShellMesh, origin: &Vec3, dir: &Vec3, window: f64) -> Option<f64> {
    let n = dir.normalize();
    let mut sum = 0.0;
    let mut count = 0usize;
    for t in 0..mesh.triangles.len() {
        let p = mesh.triangle(t);
        let h = p.map(|v| (v - origin).dot(&n));
        for k in 0..3 {
            let (a, b) = (k, (k + 1) % 3);
            if (h[a] > 0.0) != (h[b] > 0.0) {
                let x = p[a] + (p[b] - p[a]) * (h[a] / (h[a] - h[b]));
                let r = x - origin;
                let d = (r - n * r.dot(&n)).norm();
                if d <= window {
                    sum += d;
                    count += 1;
                }
            }
        }
    }
    (count > 0).then(|| sum / count as f64)
}
