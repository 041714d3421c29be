//! Printable shell mesh: construction, audit, signed distance oracle and file export.

mod audit;
mod sdf;
mod shell;
mod stl;

use std::collections::HashMap;

use crate::geom::Vec3;

pub use audit::{audit, ray_crossings, slice_radius, MeshAudit, TriangleGrid};
pub use sdf::ShellSdf;
pub use shell::{mesh_shell, provenance, MeshOptions, DEFAULT_APERTURE_RADIUS, MAX_VOXEL};
pub use stl::{export_obj, export_stl, read_stl, stl_bytes, StlFile};

/// Indexed triangle mesh with outward-facing (CCW) triangles, in mm.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    /// Number of tunnels through the shell (tubes plus the mounting aperture).
    pub tunnels: usize,
    /// Hex digest of the inputs the mesh was built from.
    pub provenance: String,
}

impl ShellMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> ShellMesh {
        ShellMesh {
            vertices,
            triangles,
            tunnels: 0,
            provenance: String::new(),
        }
    }

    pub fn triangle(&self, t: usize) -> [Vec3; 3] {
        self.triangles[t].map(|i| self.vertices[i as usize])
    }

    /// Signed enclosed volume; positive when triangles face outward.
    pub fn volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| self.vertices[i as usize]);
                a.dot(&b.cross(&c))
            })
            .sum::<f64>()
            / 6.0
    }

    /// Euler characteristic of a closed surface with this many tunnels between two spheres.
    pub fn expected_euler(&self) -> i64 {
        if self.tunnels == 0 {
            4
        } else {
            2 - 2 * (self.tunnels as i64 - 1)
        }
    }
}

/// Hash of angular caps `(center, radius, id)` on the unit sphere.
pub(crate) struct CapHash {
    cell: f64,
    map: HashMap<(i32, i32, i32), Vec<(Vec3, f64, u32)>>,
}

impl CapHash {
    pub(crate) fn new(cell: f64) -> Self {
        CapHash {
            cell,
            map: HashMap::new(),
        }
    }

    fn key(&self, p: &Vec3) -> (i32, i32, i32) {
        (
            (p.x / self.cell).floor() as i32,
            (p.y / self.cell).floor() as i32,
            (p.z / self.cell).floor() as i32,
        )
    }

    pub(crate) fn insert(&mut self, c: Vec3, radius: f64, id: u32) {
        let lo = self.key(&(c - Vec3::repeat(radius)));
        let hi = self.key(&(c + Vec3::repeat(radius)));
        for i in lo.0..=hi.0 {
            for j in lo.1..=hi.1 {
                for k in lo.2..=hi.2 {
                    self.map.entry((i, j, k)).or_default().push((c, radius, id));
                }
            }
        }
    }

    /// Caps whose bounding cube shares a cell with `p`.
    pub(crate) fn near(&self, p: &Vec3) -> &[(Vec3, f64, u32)] {
        self.map.get(&self.key(p)).map_or(&[], Vec::as_slice)
    }
}
