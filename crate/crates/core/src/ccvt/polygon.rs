//! Convex polygon clipping and exact moments.

use crate::geom::Vec2;

/// Convex polygon (counter-clockwise) whose edge `k` runs from `verts[k]` to
/// `verts[k + 1]` and is labeled with the neighboring site, or `None` on the domain boundary.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Cell {
    pub verts: Vec<Vec2>,
    pub labels: Vec<Option<usize>>,
}

impl Cell {
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Cell {
        Cell {
            verts: vec![
                Vec2::new(x0, y0),
                Vec2::new(x1, y0),
                Vec2::new(x1, y1),
                Vec2::new(x0, y1),
            ],
            labels: vec![None; 4],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.verts.len() < 3
    }

    pub fn area(&self) -> f64 {
        crate::geom::polygon_area(&self.verts)
    }

    /// Keeps the part with `n·x <= b`; the new edge gets `label`.
    pub fn clip(&self, n: Vec2, b: f64, label: Option<usize>) -> Cell {
        let mut c = self.clone();
        let mut scratch = Cell::default();
        c.clip_in_place(n, b, label, &mut scratch);
        c
    }

    /// In-place version of [`Cell::clip`] using `scratch` as the output buffer.
    pub fn clip_in_place(&mut self, n: Vec2, b: f64, label: Option<usize>, scratch: &mut Cell) {
        let k = self.verts.len();
        if k == 0 || self.verts.iter().all(|p| n.dot(p) <= b) {
            return;
        }
        let out = scratch;
        out.verts.clear();
        out.labels.clear();
        let mut dp = n.dot(&self.verts[0]) - b;
        for i in 0..k {
            let j = if i + 1 == k { 0 } else { i + 1 };
            let (p, q) = (self.verts[i], self.verts[j]);
            let dq = n.dot(&q) - b;
            if dp <= 0.0 {
                out.verts.push(p);
                out.labels.push(self.labels[i]);
                if dq > 0.0 {
                    out.verts.push(p + (q - p) * (dp / (dp - dq)));
                    out.labels.push(label);
                }
            } else if dq <= 0.0 {
                out.verts.push(p + (q - p) * (dp / (dp - dq)));
                out.labels.push(self.labels[i]);
            }
            dp = dq;
        }
        std::mem::swap(self, out);
        self.dedup();
    }

    fn dedup(&mut self) {
        if self.verts.len() < 2 {
            return;
        }
        let mut i = 0;
        while i < self.verts.len() && self.verts.len() > 1 {
            let j = (i + 1) % self.verts.len();
            if (self.verts[i] - self.verts[j]).norm_squared() < 1e-24 {
                // drop the zero-length edge starting at i
                self.verts.remove(i);
                self.labels.remove(i);
            } else {
                i += 1;
            }
        }
        if self.verts.len() < 3 {
            self.verts.clear();
            self.labels.clear();
        }
    }

    /// Largest distance from `c` to a vertex.
    pub fn radius_from(&self, c: &Vec2) -> f64 {
        self.verts
            .iter()
            .map(|v| (v - c).norm())
            .fold(0.0, f64::max)
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for a in &self.verts {
            for b in &self.verts {
                d = d.max((a - b).norm());
            }
        }
        d
    }

    pub fn is_convex(&self, tol: f64) -> bool {
        let k = self.verts.len();
        (0..k).all(|i| {
            let a = self.verts[i];
            let b = self.verts[(i + 1) % k];
            let c = self.verts[(i + 2) % k];
            let e1 = b - a;
            let e2 = c - b;
            e1.x * e2.y - e1.y * e2.x >= -tol * e1.norm() * e2.norm()
        })
    }

    pub fn contains(&self, p: &Vec2, tol: f64) -> bool {
        let k = self.verts.len();
        k >= 3
            && (0..k).all(|i| {
                let a = self.verts[i];
                let e = self.verts[(i + 1) % k] - a;
                let w = p - a;
                e.x * w.y - e.y * w.x >= -tol * e.norm()
            })
    }

    /// Outward unit normals and offsets `(n, b)` with the cell equal to `{x : n·x <= b}`.
    pub fn halfplanes(&self) -> Vec<(Vec2, f64)> {
        let k = self.verts.len();
        (0..k)
            .filter_map(|i| {
                let a = self.verts[i];
                let e = self.verts[(i + 1) % k] - a;
                let len = e.norm();
                if len < 1e-12 {
                    return None;
                }
                let n = Vec2::new(e.y, -e.x) / len;
                Some((n, n.dot(&a)))
            })
            .collect()
    }
}

/// Clips a plain polygon to `x >= v` (`keep_above`) or `x <= v`, snapping new vertices
/// exactly onto the line. `axis` 0 = x, 1 = y.
pub fn clip_axis(poly: &[Vec2], axis: usize, v: f64, keep_above: bool, out: &mut Vec<Vec2>) {
    out.clear();
    let k = poly.len();
    if k == 0 {
        return;
    }
    let side = |p: &Vec2| if keep_above { v - p[axis] } else { p[axis] - v };
    for i in 0..k {
        let p = poly[i];
        let q = poly[(i + 1) % k];
        let (dp, dq) = (side(&p), side(&q));
        if dp <= 0.0 {
            out.push(p);
            if dq > 0.0 {
                let mut x = p + (q - p) * (dp / (dp - dq));
                x[axis] = v;
                out.push(x);
            }
        } else if dq <= 0.0 {
            let mut x = p + (q - p) * (dp / (dp - dq));
            x[axis] = v;
            out.push(x);
        }
    }
    if out.len() < 3 {
        out.clear();
    }
}

/// Area, first moments and polar second moment of a polygon about the origin.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub mass: f64,
    pub sx: f64,
    pub sy: f64,
    pub polar: f64,
}

impl Moments {
    pub fn add_scaled(&mut self, o: &Moments, s: f64) {
        self.mass += s * o.mass;
        self.sx += s * o.sx;
        self.sy += s * o.sy;
        self.polar += s * o.polar;
    }
}

/// Exact moments of a polygon given in coordinates relative to `origin`.
pub fn polygon_moments(poly: &[Vec2], origin: &Vec2) -> Moments {
    let k = poly.len();
    let mut m = Moments::default();
    for i in 0..k {
        let p = poly[i] - origin;
        let q = poly[(i + 1) % k] - origin;
        let c = p.x * q.y - q.x * p.y;
        m.mass += c;
        m.sx += c * (p.x + q.x);
        m.sy += c * (p.y + q.y);
        m.polar += c * (p.x * p.x + p.x * q.x + q.x * q.x + p.y * p.y + p.y * q.y + q.y * q.y);
    }
    Moments {
        mass: m.mass / 2.0,
        sx: m.sx / 6.0,
        sy: m.sy / 6.0,
        polar: m.polar / 12.0,
    }
}

/// Moments of the axis-aligned rectangle `[x0, x0 + w] × [y0, y0 + h]` relative to the origin.
pub fn rect_moments(x0: f64, y0: f64, w: f64, h: f64) -> Moments {
    let a = w * h;
    let cx = x0 + 0.5 * w;
    let cy = y0 + 0.5 * h;
    Moments {
        mass: a,
        sx: a * cx,
        sy: a * cy,
        polar: a * (cx * cx + cy * cy) + a * (w * w + h * h) / 12.0,
    }
}
