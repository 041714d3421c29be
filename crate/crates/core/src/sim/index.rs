use crate::geom::{rotate_toward, sphere_exit, tangent_frame, Vec3};
use crate::scene::{PointEmitter, Scene};
use crate::tubes::{bore, Bore, TubeSpec};

/// Directions (from the shade center) at which a light ray crosses the outer, middle and
/// inner shell surfaces.
#[derive(Debug, Clone, Copy)]
pub struct Ray {
    pub q_out: Vec3,
    pub q_mid: Vec3,
    pub q_in: Vec3,
}

impl Ray {
    pub fn new(scene: &Scene, e: &Vec3, p: &Vec3) -> Ray {
        let d = p - e;
        let r = scene.outer_radius();
        let ri = scene.inner_radius();
        let rm = 0.5 * (r + ri);
        let at = |rad: f64| (e + d * sphere_exit(e, &d, rad)) / rad;
        Ray {
            q_out: at(r),
            q_mid: at(rm),
            q_in: at(ri),
        }
    }
}

#[inline]
fn passes(b: &Bore, ray: &Ray) -> bool {
    ray.q_out.dot(&b.a_out) > b.cos_beta
        && ray.q_in.dot(&b.a_in) > b.cos_beta
        && ray.q_mid.dot(&b.a_mid) > b.cos_beta
}

/// Grid over gnomonic coordinates `(x/z, y/z)` of the outer-surface tube caps.
#[derive(Debug, Clone)]
pub struct TubeIndex {
    bores: Vec<Bore>,
    cells: Vec<Vec<u32>>,
    misc: Vec<u32>,
    u0: f64,
    v0: f64,
    inv_cell: f64,
    nu: usize,
    nv: usize,
}

const BOUNDARY_SAMPLES: usize = 32;

fn cap_box(b: &Bore) -> Option<[f64; 4]> {
    let (e1, e2) = tangent_frame(&b.a_out);
    let mut bx = [
        f64::INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::NEG_INFINITY,
    ];
    let beta = b.beta * (1.0 + 1e-6) + 1e-12;
    for k in 0..BOUNDARY_SAMPLES {
        let phi = std::f64::consts::TAU * k as f64 / BOUNDARY_SAMPLES as f64;
        let q = rotate_toward(&b.a_out, &(e1 * phi.cos() + e2 * phi.sin()), beta);
        if q.z < 0.05 {
            return None;
        }
        let (u, v) = (q.x / q.z, q.y / q.z);
        bx = [bx[0].min(u), bx[1].min(v), bx[2].max(u), bx[3].max(v)];
    }
    // the polygon through boundary samples undercuts the convex image by < 1% of its size
    let pad = 0.03 * (bx[2] - bx[0]).max(bx[3] - bx[1]) + 1e-9;
    Some([bx[0] - pad, bx[1] - pad, bx[2] + pad, bx[3] + pad])
}

impl TubeIndex {
    pub fn new(scene: &Scene, tubes: &[TubeSpec]) -> TubeIndex {
        TubeIndex::from_bores(tubes.iter().map(|t| bore(scene, t)).collect())
    }

    pub fn from_bores(bores: Vec<Bore>) -> TubeIndex {
        let mut boxes = Vec::with_capacity(bores.len());
        let mut misc = Vec::new();
        let mut ext = [
            f64::INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::NEG_INFINITY,
        ];
        let mut widths = Vec::new();
        for (i, b) in bores.iter().enumerate() {
            match cap_box(b) {
                Some(bx) => {
                    ext = [
                        ext[0].min(bx[0]),
                        ext[1].min(bx[1]),
                        ext[2].max(bx[2]),
                        ext[3].max(bx[3]),
                    ];
                    widths.push((bx[2] - bx[0]).max(bx[3] - bx[1]));
                    boxes.push((i, bx));
                }
                None => misc.push(i as u32),
            }
        }
        if boxes.is_empty() {
            return TubeIndex {
                bores,
                cells: Vec::new(),
                misc,
                u0: 0.0,
                v0: 0.0,
                inv_cell: 1.0,
                nu: 0,
                nv: 0,
            };
        }
        widths.sort_by(f64::total_cmp);
        let span = (ext[2] - ext[0]).max(ext[3] - ext[1]);
        let mut cell = widths[widths.len() / 2].max(span / 2048.0);
        if cell <= 0.0 {
            cell = 1.0;
        }
        let nu = ((ext[2] - ext[0]) / cell).ceil().max(1.0) as usize;
        let nv = ((ext[3] - ext[1]) / cell).ceil().max(1.0) as usize;
        let mut cells = vec![Vec::new(); nu * nv];
        let inv_cell = 1.0 / cell;
        for (i, bx) in boxes {
            let c0 =
                (((bx[0] - ext[0]) * inv_cell).floor() as isize).clamp(0, nu as isize - 1) as usize;
            let c1 =
                (((bx[2] - ext[0]) * inv_cell).floor() as isize).clamp(0, nu as isize - 1) as usize;
            let r0 =
                (((bx[1] - ext[1]) * inv_cell).floor() as isize).clamp(0, nv as isize - 1) as usize;
            let r1 =
                (((bx[3] - ext[1]) * inv_cell).floor() as isize).clamp(0, nv as isize - 1) as usize;
            for r in r0..=r1 {
                for c in c0..=c1 {
                    cells[r * nu + c].push(i as u32);
                }
            }
        }
        TubeIndex {
            bores,
            cells,
            misc,
            u0: ext[0],
            v0: ext[1],
            inv_cell,
            nu,
            nv,
        }
    }

    pub fn len(&self) -> usize {
        self.bores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bores.is_empty()
    }

    pub fn bores(&self) -> &[Bore] {
        &self.bores
    }

    /// Index of the tube the ray passes through, if any.
    #[inline]
    pub fn hit(&self, ray: &Ray) -> Option<usize> {
        for &i in &self.misc {
            if passes(&self.bores[i as usize], ray) {
                return Some(i as usize);
            }
        }
        let q = &ray.q_out;
        if self.nu == 0 || q.z <= 0.0 {
            return None;
        }
        let u = ((q.x / q.z - self.u0) * self.inv_cell).floor();
        let v = ((q.y / q.z - self.v0) * self.inv_cell).floor();
        if u < 0.0 || v < 0.0 || u >= self.nu as f64 || v >= self.nv as f64 {
            return None;
        }
        for &i in &self.cells[v as usize * self.nu + u as usize] {
            if passes(&self.bores[i as usize], ray) {
                return Some(i as usize);
            }
        }
        None
    }

    #[inline]
    pub fn visible(&self, ray: &Ray) -> bool {
        self.hit(ray).is_some()
    }
}

/// 1 iff the segment from the emitter to the wall point passes through a tube bore: its
/// outer, middle and inner shell crossings all lie inside the same bore's cross-sections.
pub fn visibility(scene: &Scene, index: &TubeIndex, p: &Vec3, e: &PointEmitter) -> bool {
    index.visible(&Ray::new(scene, &e.position, p))
}

pub fn visibility_brute_force(scene: &Scene, bores: &[Bore], p: &Vec3, e: &PointEmitter) -> bool {
    let ray = Ray::new(scene, &e.position, p);
    bores.iter().any(|b| passes(b, &ray))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{sample_light, WallCoord};
    use crate::tubes::{max_tilt_angle, TubeKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn straight(scene: &Scene, id: usize, w: WallCoord, r: f64) -> TubeSpec {
        TubeSpec {
            id,
            kind: TubeKind::Straight,
            lamp_disk_center: scene.wall_to_lamp(w),
            disk_radius: r + 0.25,
            tube_radius: r,
            tilt_angle: 0.0,
            tilt_azimuth: 0.0,
        }
    }

    #[test]
    fn axial_tube_visible_from_center() {
        let s = Scene::default();
        let idx = TubeIndex::new(&s, &[straight(&s, 0, WallCoord::new(0.0, 0.0), 0.6)]);
        let e = sample_light(&s, 1).unwrap()[0];
        assert!(visibility(&s, &idx, &Vec3::new(0.0, 0.0, 400.0), &e));
        assert!(!visibility(&s, &idx, &Vec3::new(40.0, 0.0, 400.0), &e));
    }

    #[test]
    fn opaque_without_tubes() {
        let s = Scene::default();
        let idx = TubeIndex::new(&s, &[]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for e in sample_light(&s, 76).unwrap() {
            let p = Vec3::new(
                rng.gen_range(-500.0..500.0),
                rng.gen_range(-500.0..500.0),
                400.0,
            );
            assert!(!visibility(&s, &idx, &p, &e));
        }
    }

    #[test]
    fn index_equals_brute_force() {
        let s = Scene::default();
        let emitters = sample_light(&s, 76).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut tubes = Vec::new();
        for id in 0..50 {
            let w = WallCoord::new(rng.gen_range(-60.0..60.0), rng.gen_range(-60.0..60.0));
            let mut t = straight(&s, id, w, rng.gen_range(0.6..1.3));
            if id % 2 == 0 {
                t.kind = TubeKind::Tilted;
                t.tube_radius = 0.6;
                t.disk_radius = 1.35;
                t.tilt_angle = max_tilt_angle(1.35, 3.0).unwrap() * rng.gen::<f64>();
                t.tilt_azimuth = rng.gen_range(0.0..std::f64::consts::TAU);
            }
            tubes.push(t);
        }
        let idx = TubeIndex::new(&s, &tubes);
        let bores: Vec<Bore> = tubes.iter().map(|t| bore(&s, t)).collect();
        let mut hits = 0;
        for _ in 0..1000 {
            // aim near a random tube so that hits are frequent
            let t = &tubes[rng.gen_range(0..tubes.len())];
            let w = s.lamp_to_wall(t.lamp_disk_center).unwrap();
            let p = Vec3::new(
                w.x + rng.gen_range(-12.0..12.0),
                w.y + rng.gen_range(-12.0..12.0),
                400.0,
            );
            let e = &emitters[rng.gen_range(0..emitters.len())];
            let a = visibility(&s, &idx, &p, e);
            assert_eq!(a, visibility_brute_force(&s, &bores, &p, e));
            hits += a as usize;
        }
        assert!(hits > 50, "{hits}");
    }
}
