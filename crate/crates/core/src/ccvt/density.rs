//! Piecewise-constant density on a pixel grid and exact integration over convex cells.

use super::polygon::{clip_axis, polygon_moments, rect_moments, Cell, Moments};
use crate::density::DensityField;
use crate::geom::Vec2;

/// Density on `[x0, x0 + nx·pitch] × [y0, y0 + ny·pitch]`, row 0 at the bottom.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub x0: f64,
    pub y0: f64,
    pub pitch: f64,
    pub nx: usize,
    pub ny: usize,
    pub rho: Vec<f64>,
}

impl DensityGrid {
    pub fn new(x0: f64, y0: f64, pitch: f64, nx: usize, ny: usize, rho: Vec<f64>) -> DensityGrid {
        assert_eq!(rho.len(), nx * ny);
        assert!(
            rho.iter().all(|&r| r >= 0.0 && r.is_finite()),
            "density must be finite and non-negative"
        );
        DensityGrid {
            x0,
            y0,
            pitch,
            nx,
            ny,
            rho,
        }
    }

    pub fn uniform(x0: f64, y0: f64, pitch: f64, nx: usize, ny: usize) -> DensityGrid {
        DensityGrid::new(x0, y0, pitch, nx, ny, vec![1.0; nx * ny])
    }

    /// Crops a density field to the bounding box of its support.
    pub fn from_field(field: &DensityField) -> DensityGrid {
        let r = field.raster;
        let (mut c0, mut r0, mut c1, mut r1) = (usize::MAX, usize::MAX, 0, 0);
        for (p, &s) in field.support.iter().enumerate() {
            if s {
                let (c, rr) = (p % r.width, p / r.width);
                c0 = c0.min(c);
                c1 = c1.max(c);
                r0 = r0.min(rr);
                r1 = r1.max(rr);
            }
        }
        assert!(c0 <= c1, "density field has empty support");
        let nx = c1 - c0 + 1;
        let ny = r1 - r0 + 1;
        let mut rho = vec![0.0; nx * ny];
        for j in 0..ny {
            // grid row j (from the bottom) is raster row r1 - j
            let row = r1 - j;
            for i in 0..nx {
                rho[j * nx + i] = field.rho[row * r.width + c0 + i];
            }
        }
        let bl = r.wall_at(c0 as f64, (r1 + 1) as f64);
        DensityGrid::new(bl.x, bl.y, r.pixel_pitch, nx, ny, rho)
    }

    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        (
            self.x0,
            self.y0,
            self.x0 + self.nx as f64 * self.pitch,
            self.y0 + self.ny as f64 * self.pitch,
        )
    }

    pub fn domain_cell(&self) -> Cell {
        let (a, b, c, d) = self.bounds();
        Cell::rect(a, b, c, d)
    }

    pub fn area(&self) -> f64 {
        (self.nx * self.ny) as f64 * self.pitch * self.pitch
    }

    pub fn total_mass(&self) -> f64 {
        self.rho.iter().sum::<f64>() * self.pitch * self.pitch
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.rho[j * self.nx + i]
    }

    /// Density at a point (zero outside the grid).
    pub fn value(&self, p: &Vec2) -> f64 {
        let u = (p.x - self.x0) / self.pitch;
        let v = (p.y - self.y0) / self.pitch;
        if u < 0.0 || v < 0.0 || u >= self.nx as f64 || v >= self.ny as f64 {
            return 0.0;
        }
        self.at(u as usize, v as usize)
    }

    /// Density-weighted moments of a convex polygon about `origin`.
    pub fn moments(&self, poly: &[Vec2], origin: &Vec2) -> Moments {
        let mut total = Moments::default();
        if poly.len() < 3 {
            return total;
        }
        let p = self.pitch;
        let (ymin, ymax) = poly
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                (a.min(v.y), b.max(v.y))
            });
        let j0 = (((ymin - self.y0) / p).floor().max(0.0) as usize).min(self.ny);
        let j1 = (((ymax - self.y0) / p).ceil().max(0.0) as usize).min(self.ny);
        let mut band = Vec::with_capacity(12);
        let mut tmp = Vec::with_capacity(12);
        let mut piece = Vec::with_capacity(12);
        for j in j0..j1 {
            let yb = self.y0 + j as f64 * p;
            let yt = yb + p;
            clip_axis(poly, 1, yb, true, &mut tmp);
            clip_axis(&tmp, 1, yt, false, &mut band);
            if band.is_empty() {
                continue;
            }
            let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
            let (mut t0, mut t1, mut b0, mut b1) = (
                f64::INFINITY,
                f64::NEG_INFINITY,
                f64::INFINITY,
                f64::NEG_INFINITY,
            );
            for v in &band {
                xmin = xmin.min(v.x);
                xmax = xmax.max(v.x);
                if v.y == yt {
                    t0 = t0.min(v.x);
                    t1 = t1.max(v.x);
                }
                if v.y == yb {
                    b0 = b0.min(v.x);
                    b1 = b1.max(v.x);
                }
            }
            // columns fully covered over the whole band height
            let (f0, f1) = (t0.max(b0), t1.min(b1));
            let i0 = (((xmin - self.x0) / p).floor().max(0.0) as usize).min(self.nx);
            let i1 = (((xmax - self.x0) / p).ceil().max(0.0) as usize).min(self.nx);
            for i in i0..i1 {
                let rho = self.at(i, j);
                if rho == 0.0 {
                    continue;
                }
                let xl = self.x0 + i as f64 * p;
                let xr = xl + p;
                if xl >= f0 && xr <= f1 {
                    total.add_scaled(&rect_moments(xl - origin.x, yb - origin.y, p, p), rho);
                } else {
                    clip_axis(&band, 0, xl, true, &mut tmp);
                    clip_axis(&tmp, 0, xr, false, &mut piece);
                    if !piece.is_empty() {
                        total.add_scaled(&polygon_moments(&piece, origin), rho);
                    }
                }
            }
        }
        total
    }

    /// `∫ rho ds` along the segment `a → b`.
    pub fn line_integral(&self, a: &Vec2, b: &Vec2) -> f64 {
        let d = b - a;
        let len = d.norm();
        if len == 0.0 {
            return 0.0;
        }
        let mut ts = vec![0.0, 1.0];
        for (axis, origin, n) in [(0usize, self.x0, self.nx), (1, self.y0, self.ny)] {
            if d[axis] == 0.0 {
                continue;
            }
            let (s, e) = (
                (a[axis] - origin) / self.pitch,
                (b[axis] - origin) / self.pitch,
            );
            let (lo, hi) = (
                s.min(e).ceil().max(0.0) as i64,
                s.max(e).floor().min(n as f64) as i64,
            );
            for k in lo..=hi {
                let t = (k as f64 - s) / (e - s);
                if t > 0.0 && t < 1.0 {
                    ts.push(t);
                }
            }
        }
        ts.sort_by(f64::total_cmp);
        let mut sum = 0.0;
        for w in ts.windows(2) {
            if w[1] > w[0] {
                let mid = a + d * (0.5 * (w[0] + w[1]));
                sum += self.value(&mid) * (w[1] - w[0]);
            }
        }
        sum * len
    }
}
