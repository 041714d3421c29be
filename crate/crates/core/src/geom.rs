//! Small vector helpers shared by the geometry modules.

pub type Vec2 = nalgebra::Vector2<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;

/// Deterministic orthonormal tangent frame `(e1, e2)` at unit vector `a`, with `e1 × e2 = a`.
/// At `a = +z` the frame is `(+x, +y)`.
pub fn tangent_frame(a: &Vec3) -> (Vec3, Vec3) {
    let helper = if a.y.abs() < 0.9 {
        Vec3::y()
    } else {
        Vec3::x()
    };
    let e1 = helper.cross(a).normalize();
    let e2 = a.cross(&e1);
    (e1, e2)
}

/// Unit vector at geodesic angle `angle` from `a` in the direction of the unit tangent `t`.
#[inline]
pub fn rotate_toward(a: &Vec3, t: &Vec3, angle: f64) -> Vec3 {
    a * angle.cos() + t * angle.sin()
}

#[inline]
pub fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Parameter `t` of the point where the segment `e + t (p - e)` leaves the origin-centred
/// sphere of radius `radius`; `e` must lie inside the sphere.
#[inline]
pub fn sphere_exit(e: &Vec3, d: &Vec3, radius: f64) -> f64 {
    let a = d.norm_squared();
    let b = e.dot(d);
    let c = e.norm_squared() - radius * radius;
    let disc = (b * b - a * c).max(0.0);
    (-b + disc.sqrt()) / a
}

pub fn polygon_area(pts: &[Vec2]) -> f64 {
    let n = pts.len();
    let mut s = 0.0;
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        s += a.x * b.y - a.y * b.x;
    }
    0.5 * s
}

/// Distance from point `p` to segment `ab`.
pub fn point_segment_distance3(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let ab = b - a;
    let l2 = ab.norm_squared();
    let t = if l2 > 0.0 {
        ((p - a).dot(&ab) / l2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (a + ab * t - p).norm()
}

/// Minimum distance between segments `p0p1` and `q0q1` in 3D.
pub fn segment_segment_distance3(p0: &Vec3, p1: &Vec3, q0: &Vec3, q1: &Vec3) -> f64 {
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let r = p0 - q0;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    let (s, t);
    if a <= 1e-300 && e <= 1e-300 {
        return r.norm();
    }
    if a <= 1e-300 {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= 1e-300 {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 0.0 {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    (p0 + d1 * s - (q0 + d2 * t)).norm()
}
