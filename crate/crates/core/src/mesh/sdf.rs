use crate::geom::{angle_between, Vec3};
use crate::scene::Scene;
use crate::tubes::{bore, Bore, TubeSpec};

use super::{CapHash, MeshOptions};

/// Signed distance to the perforated shell, negative inside the solid. Exact for the shell
/// surfaces; bore terms use the angular distance to the local cross-section, so values are
/// approximate away from the surface and capped at `reach` mm for far bores.
pub struct ShellSdf {
    scene: Scene,
    bores: Vec<Bore>,
    aperture: f64,
    caps: CapHash,
    reach: f64,
}

impl ShellSdf {
    pub fn new(scene: &Scene, tubes: &[TubeSpec], opts: &MeshOptions) -> ShellSdf {
        let bores: Vec<Bore> = tubes.iter().map(|t| bore(scene, t)).collect();
        let reach = 2.0;
        let pad = reach / scene.inner_radius();
        let cell = bores.iter().map(|b| b.envelope().1).fold(0.0, f64::max) + pad;
        let mut caps = CapHash::new(cell.max(1e-3));
        for (i, b) in bores.iter().enumerate() {
            let (c, r) = b.envelope();
            caps.insert(c, r + pad, i as u32);
        }
        ShellSdf {
            scene: scene.clone(),
            bores,
            aperture: opts.aperture_radius / scene.metric_radius(),
            caps,
            reach,
        }
    }

    pub fn distance(&self, q: &Vec3) -> f64 {
        let r_out = self.scene.outer_radius();
        let r_in = self.scene.inner_radius();
        let rq = q.norm();
        let shell = (rq - r_out).max(r_in - rq);
        if rq == 0.0 {
            return shell;
        }
        let dir = q / rq;
        let s = ((r_out - rq) / self.scene.shade_thickness_mm).clamp(0.0, 1.0);
        let mut bore_d = self.reach;
        for &(_, _, i) in self.caps.near(&dir) {
            let b = &self.bores[i as usize];
            let d = rq * (angle_between(&dir, &b.center_at(&self.scene, s)) - b.beta);
            bore_d = bore_d.min(d);
        }
        if self.aperture > 0.0 {
            bore_d = bore_d.min(rq * (angle_between(&dir, &-Vec3::z()) - self.aperture));
        }
        shell.max(-bore_d)
    }

    pub fn inside(&self, q: &Vec3) -> bool {
        self.distance(q) < 0.0
    }
}
