//! Explicit construction of the perforated shell surface.
//!
//! Both spheres are split into an upper cap (holding every tube), an equatorial band and a
//! lower cap (holding the mounting aperture). The caps are triangulated in gnomonic charts
//! with the tube contours as constrained holes; the band is a structured ring mesh. Tube
//! walls are the ruled quads between equal-index contour vertices.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spade::{ConstrainedDelaunayTriangulation, Point2, PositionInTriangulation, Triangulation};

use crate::error::{Error, Result};
use crate::geom::{angle_between, rotate_toward, Vec3};
use crate::scene::Scene;
use crate::tubes::{bore, tube_geometry, TubeGeometry, TubeSpec};

use super::{CapHash, ShellMesh};

pub const MAX_VOXEL: f64 = 0.2;
pub const DEFAULT_APERTURE_RADIUS: f64 = 30.0;
const MIN_RING_VERTICES: usize = 64;
const UPPER_SEAM_MIN: f64 = 65.0 * std::f64::consts::PI / 180.0;
const UPPER_SEAM_MAX: f64 = 82.0 * std::f64::consts::PI / 180.0;
const LOWER_SEAM_MAX: f64 = 115.0 * std::f64::consts::PI / 180.0;
const LOWER_SEAM_MIN: f64 = 98.0 * std::f64::consts::PI / 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeshOptions {
    /// Resolution (mm). Surface chords deviate from the true spheres by at most half of it.
    pub voxel_size: f64,
    /// Radius of the mounting aperture around -z, on the metric sphere (mm); 0 disables it.
    pub aperture_radius: f64,
}

impl Default for MeshOptions {
    fn default() -> Self {
        MeshOptions {
            voxel_size: 0.1,
            aperture_radius: DEFAULT_APERTURE_RADIUS,
        }
    }
}

impl MeshOptions {
    /// Target edge length on the outer sphere: edges sag by `voxel_size / 4`, leaving room
    /// for triangle interiors within `voxel_size / 2`.
    pub fn edge_length(&self, scene: &Scene) -> f64 {
        (2.0 * scene.outer_radius() * self.voxel_size).sqrt()
    }
}

/// Provenance digest of a mesh: scene, options and the tube list.
pub fn provenance(scene: &Scene, tubes: &[TubeSpec], opts: &MeshOptions) -> String {
    let mut h = Sha256::new();
    h.update(scene.hash().as_bytes());
    h.update(serde_json::to_vec(opts).expect("options serialize"));
    for t in tubes {
        h.update(serde_json::to_vec(t).expect("tube serializes"));
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

/// Closed loop of vertices on one sphere with CCW order seen from outside.
fn small_circle(center: &Vec3, beta: f64, radius: f64, n: usize) -> Vec<Vec3> {
    let reference = if center.x.abs() < 0.9 {
        Vec3::x()
    } else {
        Vec3::y()
    };
    let f1 = (reference - center * reference.dot(center)).normalize();
    let f2 = center.cross(&f1);
    (0..n)
        .map(|k| {
            let phi = std::f64::consts::TAU * k as f64 / n as f64;
            rotate_toward(center, &(f1 * phi.cos() + f2 * phi.sin()), beta) * radius
        })
        .collect()
}

#[inline]
fn polar(theta: f64, phi: f64) -> Vec3 {
    Vec3::new(
        theta.sin() * phi.cos(),
        theta.sin() * phi.sin(),
        theta.cos(),
    )
}

/// Unit directions of quasi-uniform points on the cap `angle(p, pole) < limit`, rings of
/// spacing `step` around the pole.
fn cap_points(pole_down: bool, limit: f64, step: f64, skip_pole: bool) -> Vec<Vec3> {
    let mut out = Vec::new();
    let flip = |v: Vec3| {
        if pole_down {
            Vec3::new(v.x, -v.y, -v.z)
        } else {
            v
        }
    };
    if !skip_pole {
        out.push(flip(Vec3::z()));
    }
    let mut j = 1;
    loop {
        let theta = j as f64 * step;
        if theta > limit - 0.5 * step {
            break;
        }
        let n = ((std::f64::consts::TAU * theta.sin() / step).round() as usize).max(6);
        let phase = 0.5 * (j % 2) as f64;
        for k in 0..n {
            let phi = std::f64::consts::TAU * (k as f64 + phase) / n as f64;
            out.push(flip(polar(theta, phi)));
        }
        j += 1;
    }
    out
}

/// Largest distance between a triangle with vertices on the sphere of radius `radius` and
/// the sphere, with the deepest point of the triangle.
fn chord_deviation(p: &[Vec3; 3], radius: f64) -> (f64, Vec3) {
    let n = (p[1] - p[0]).cross(&(p[2] - p[0]));
    let len = n.norm();
    if len == 0.0 {
        return (0.0, p[0]);
    }
    let n = n / len;
    let foot = n * n.dot(&p[0]);
    let inside = (0..3).all(|k| (p[(k + 1) % 3] - p[k]).cross(&(foot - p[k])).dot(&n) >= 0.0);
    if inside {
        return (radius - foot.norm(), foot);
    }
    let mut best = (0.0, p[0]);
    for k in 0..3 {
        let (a, b) = (p[k], p[(k + 1) % 3]);
        let ab = b - a;
        let t = (-a.dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
        let q = a + ab * t;
        let dev = radius - q.norm();
        if dev > best.0 {
            best = (dev, q);
        }
    }
    best
}

/// Triangulation of one cap chart. Local vertex `i < ids.len()` is global vertex `ids[i]`;
/// higher indices refer to `extra`, refinement points created here.
struct ChartMesh {
    tris: Vec<[usize; 3]>,
    ids: Vec<u32>,
    extra: Vec<Vec3>,
}

const MAX_REFINE_ROUNDS: usize = 12;

/// Triangulates one cap chart. `boundary` is the outer loop, `holes` the hole loops and
/// `steiner` free interior points, all as global vertex ids into `verts` on the sphere of
/// `radius`. Triangles deviating from the sphere by more than `tol` are refined by
/// inserting their deepest points. Triangles come back CCW as seen from outside.
#[allow(clippy::too_many_arguments)]
fn triangulate_cap(
    verts: &[Vec3],
    radius: f64,
    boundary: &[u32],
    holes: &[Vec<u32>],
    steiner: &[u32],
    down: bool,
    tol: f64,
) -> Result<ChartMesh> {
    // the lower chart mirrors y so that CCW in both charts is CCW from outside
    let chart = |v: &Vec3| {
        if down {
            Point2::new(v.x / -v.z, -v.y / -v.z)
        } else {
            Point2::new(v.x / v.z, v.y / v.z)
        }
    };
    let total = boundary.len() + holes.iter().map(Vec::len).sum::<usize>() + steiner.len();
    let mut ids = Vec::with_capacity(total);
    let mut hole_of = Vec::with_capacity(total);
    let mut edges = Vec::with_capacity(total);
    let mut push_loop = |ids: &mut Vec<u32>, hole_of: &mut Vec<u32>, lp: &[u32], tag: u32| {
        let base = ids.len();
        for (k, &g) in lp.iter().enumerate() {
            ids.push(g);
            hole_of.push(tag);
            edges.push([base + k, base + (k + 1) % lp.len()]);
        }
    };
    push_loop(&mut ids, &mut hole_of, boundary, u32::MAX);
    for (h, lp) in holes.iter().enumerate() {
        push_loop(&mut ids, &mut hole_of, lp, h as u32);
    }
    for &g in steiner {
        ids.push(g);
        hole_of.push(u32::MAX);
    }
    let points: Vec<Point2<f64>> = ids.iter().map(|&g| chart(&verts[g as usize])).collect();
    let mut conflicts = 0usize;
    let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> =
        ConstrainedDelaunayTriangulation::try_bulk_load_cdt(points, edges, |_| conflicts += 1)
            .map_err(|e| Error::Mesh(format!("triangulation failed: {e:?}")))?;
    if cdt.num_vertices() != ids.len() {
        return Err(Error::Mesh("coincident vertices in a surface chart".into()));
    }
    if conflicts > 0 {
        return Err(Error::Mesh(format!(
            "{conflicts} crossing hole boundaries in a surface chart"
        )));
    }
    let mut extra: Vec<Vec3> = Vec::new();
    let is_hole = |hole_of: &[u32], v: [usize; 3]| {
        let h = hole_of[v[0]];
        h != u32::MAX && hole_of[v[1]] == h && hole_of[v[2]] == h
    };
    let position = |extra: &[Vec3], i: usize| {
        if i < ids.len() {
            verts[ids[i] as usize]
        } else {
            extra[i - ids.len()]
        }
    };
    for _ in 0..MAX_REFINE_ROUNDS {
        let mut bad = Vec::new();
        for f in cdt.inner_faces() {
            let v = f.vertices().map(|v| v.fix().index());
            if is_hole(&hole_of, v) {
                continue;
            }
            let (dev, deepest) = chord_deviation(&v.map(|i| position(&extra, i)), radius);
            if dev > tol {
                bad.push(deepest.normalize() * radius);
            }
        }
        if bad.is_empty() {
            break;
        }
        for q in bad {
            let pt = chart(&q);
            // neighbors of a shared deepest edge point propose it twice
            let clear = |extra: &[Vec3], v: &[usize]| {
                v.iter().all(|&i| (position(extra, i) - q).norm() > tol)
            };
            let free = match cdt.locate(pt) {
                PositionInTriangulation::OnFace(f) => {
                    let v = cdt.face(f).vertices().map(|v| v.fix().index());
                    !is_hole(&hole_of, v) && clear(&extra, &v)
                }
                PositionInTriangulation::OnEdge(e) => {
                    let v = cdt.directed_edge(e).vertices().map(|v| v.fix().index());
                    !cdt.is_constraint_edge(e.as_undirected()) && clear(&extra, &v)
                }
                _ => false,
            };
            if !free {
                continue;
            }
            let h = cdt
                .insert(pt)
                .map_err(|e| Error::Mesh(format!("refinement failed: {e:?}")))?;
            if h.index() != hole_of.len() {
                return Err(Error::Mesh(
                    "refinement point merged with an existing vertex".into(),
                ));
            }
            hole_of.push(u32::MAX);
            extra.push(q);
        }
    }
    let tris = cdt
        .inner_faces()
        .map(|f| f.vertices().map(|v| v.fix().index()))
        .filter(|v| !is_hole(&hole_of, *v))
        .collect();
    Ok(ChartMesh { tris, ids, extra })
}

struct Surface {
    upper_boundary: Vec<u32>,
    lower_boundary: Vec<u32>,
    upper_holes: Vec<Vec<u32>>,
    lower_holes: Vec<Vec<u32>>,
    upper_steiner: Vec<u32>,
    lower_steiner: Vec<u32>,
    outward: bool,
}

/// Builds the perforated shell. Tubes must stay within the upper cap of the sphere.
pub fn mesh_shell(scene: &Scene, tubes: &[TubeSpec], opts: &MeshOptions) -> Result<ShellMesh> {
    if !(opts.voxel_size > 0.0 && opts.voxel_size <= MAX_VOXEL) {
        return Err(Error::Resolution(format!(
            "voxel size {} mm is outside (0, {MAX_VOXEL}] and cannot resolve the smallest bores",
            opts.voxel_size
        )));
    }
    if opts.aperture_radius < 0.0 {
        return Err(Error::InvalidArgument(
            "aperture radius must be non-negative".into(),
        ));
    }
    let geoms: Vec<TubeGeometry> = tubes
        .iter()
        .map(|t| tube_geometry(scene, t))
        .collect::<Result<_>>()?;
    let r_out = scene.outer_radius();
    let r_in = scene.inner_radius();
    let step = opts.edge_length(scene) / r_out;

    let mut reach: f64 = 0.0;
    let mut caps = CapHash::new(step);
    let clearance = 0.5 * step;
    for (i, t) in tubes.iter().enumerate() {
        let (c, rad) = bore(scene, t).envelope();
        reach = reach.max(angle_between(&c, &Vec3::z()) + rad);
        caps.insert(c, rad + clearance, i as u32);
    }
    let theta_u = UPPER_SEAM_MIN.max(reach + 3.0 * step);
    if theta_u > UPPER_SEAM_MAX {
        return Err(Error::Mesh(format!(
            "tubes reach {:.1} deg from the zenith; at most {:.1} is supported",
            reach.to_degrees(),
            (UPPER_SEAM_MAX - 3.0 * step).to_degrees()
        )));
    }
    let alpha = opts.aperture_radius / scene.metric_radius();
    let has_aperture = alpha > 0.0;
    let theta_l = LOWER_SEAM_MAX.min(std::f64::consts::PI - alpha - 3.0 * step);
    if theta_l < LOWER_SEAM_MIN {
        return Err(Error::Mesh(format!(
            "aperture radius {} mm is too large",
            opts.aperture_radius
        )));
    }

    let k_ring = ((std::f64::consts::TAU / step).ceil() as usize).max(MIN_RING_VERTICES);
    let n_rings = (((theta_l - theta_u) / step).ceil() as usize).max(1) + 1;
    let mut verts: Vec<Vec3> = Vec::new();
    let mut ring_ids: [Vec<Vec<u32>>; 2] = [Vec::new(), Vec::new()];
    for (s, radius) in [r_out, r_in].into_iter().enumerate() {
        for j in 0..n_rings {
            let theta = theta_u + (theta_l - theta_u) * j as f64 / (n_rings - 1) as f64;
            let base = verts.len() as u32;
            for k in 0..k_ring {
                verts.push(polar(theta, std::f64::consts::TAU * k as f64 / k_ring as f64) * radius);
            }
            ring_ids[s].push((base..base + k_ring as u32).collect());
        }
    }

    let mut walls: Vec<(Vec<u32>, Vec<u32>)> = Vec::with_capacity(tubes.len() + 1);
    let mut add_wall = |verts: &mut Vec<Vec3>, outer: &[Vec3], inner: &[Vec3]| {
        let o0 = verts.len() as u32;
        verts.extend_from_slice(outer);
        let i0 = verts.len() as u32;
        verts.extend_from_slice(inner);
        walls.push((
            (o0..o0 + outer.len() as u32).collect(),
            (i0..i0 + inner.len() as u32).collect(),
        ));
    };
    for g in &geoms {
        add_wall(&mut verts, &g.outer_contour, &g.inner_contour);
    }
    if has_aperture {
        let n = ((std::f64::consts::TAU * alpha / step).ceil() as usize).max(MIN_RING_VERTICES);
        let down = -Vec3::z();
        add_wall(
            &mut verts,
            &small_circle(&down, alpha, r_out, n),
            &small_circle(&down, alpha, r_in, n),
        );
    }

    let upper_dirs: Vec<Vec3> = cap_points(false, theta_u, step, false)
        .into_iter()
        .filter(|p| {
            !caps
                .near(p)
                .iter()
                .any(|(c, r, _)| angle_between(c, p) < *r)
        })
        .collect();
    let lower_limit = std::f64::consts::PI - theta_l;
    let lower_dirs: Vec<Vec3> = cap_points(true, lower_limit, step, has_aperture)
        .into_iter()
        .filter(|p| !has_aperture || angle_between(p, &-Vec3::z()) > alpha + clearance)
        .collect();

    let mut surfaces = Vec::with_capacity(2);
    for (s, radius) in [r_out, r_in].into_iter().enumerate() {
        let push_dirs = |verts: &mut Vec<Vec3>, dirs: &[Vec3]| {
            let base = verts.len() as u32;
            verts.extend(dirs.iter().map(|d| d * radius));
            (base..base + dirs.len() as u32).collect::<Vec<u32>>()
        };
        let upper_steiner = push_dirs(&mut verts, &upper_dirs);
        let lower_steiner = push_dirs(&mut verts, &lower_dirs);
        let pick = |w: &(Vec<u32>, Vec<u32>)| if s == 0 { w.0.clone() } else { w.1.clone() };
        let upper_holes: Vec<Vec<u32>> = walls[..tubes.len()].iter().map(pick).collect();
        let lower_holes: Vec<Vec<u32>> = walls[tubes.len()..].iter().map(pick).collect();
        surfaces.push(Surface {
            upper_boundary: ring_ids[s][0].clone(),
            lower_boundary: ring_ids[s][n_rings - 1].clone(),
            upper_holes,
            lower_holes,
            upper_steiner,
            lower_steiner,
            outward: s == 0,
        });
    }

    let mut tris: Vec<[u32; 3]> = Vec::new();
    for (s, rings) in ring_ids.iter().enumerate() {
        for j in 0..n_rings - 1 {
            for k in 0..k_ring {
                let k1 = (k + 1) % k_ring;
                let (a, b, c, d) = (rings[j][k], rings[j][k1], rings[j + 1][k1], rings[j + 1][k]);
                if s == 0 {
                    tris.push([a, d, c]);
                    tris.push([a, c, b]);
                } else {
                    tris.push([a, c, d]);
                    tris.push([a, b, c]);
                }
            }
        }
    }
    for (outer, inner) in &walls {
        let n = outer.len();
        for k in 0..n {
            let k1 = (k + 1) % n;
            tris.push([outer[k], outer[k1], inner[k1]]);
            tris.push([outer[k], inner[k1], inner[k]]);
        }
    }
    let tol = 0.5 * opts.voxel_size;
    let jobs: Vec<(usize, bool)> = vec![(0, false), (0, true), (1, false), (1, true)];
    let charts: Vec<Result<ChartMesh>> = jobs
        .par_iter()
        .map(|&(s, down)| {
            let sf = &surfaces[s];
            let radius = if s == 0 { r_out } else { r_in };
            if down {
                triangulate_cap(
                    &verts,
                    radius,
                    &sf.lower_boundary,
                    &sf.lower_holes,
                    &sf.lower_steiner,
                    true,
                    tol,
                )
            } else {
                triangulate_cap(
                    &verts,
                    radius,
                    &sf.upper_boundary,
                    &sf.upper_holes,
                    &sf.upper_steiner,
                    false,
                    tol,
                )
            }
        })
        .collect();
    for (c, &(s, _)) in charts.into_iter().zip(&jobs) {
        let c = c?;
        let base = verts.len();
        verts.extend_from_slice(&c.extra);
        let global = |i: usize| {
            if i < c.ids.len() {
                c.ids[i]
            } else {
                (base + i - c.ids.len()) as u32
            }
        };
        for t in &c.tris {
            let g = t.map(global);
            tris.push(if surfaces[s].outward {
                g
            } else {
                [g[0], g[2], g[1]]
            });
        }
    }

    Ok(ShellMesh {
        vertices: verts,
        triangles: tris,
        tunnels: tubes.len() + usize::from(has_aperture),
        provenance: provenance(scene, tubes, opts),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_coarse_voxels() {
        let s = Scene::default();
        let o = MeshOptions {
            voxel_size: 0.25,
            ..Default::default()
        };
        assert!(matches!(mesh_shell(&s, &[], &o), Err(Error::Resolution(_))));
    }

    #[test]
    fn small_circle_is_ccw_from_outside() {
        let c = Vec3::new(0.2, -0.3, 0.9).normalize();
        let p = small_circle(&c, 0.1, 1.0, 16);
        let n = (p[1] - p[0]).cross(&(p[2] - p[1]));
        assert!(n.dot(&c) > 0.0);
    }
}
