//! Maximal inscribed circle of a convex polygon by exact vertex enumeration of the LP
//! `max r  s.t.  n_k·c + r <= b_k`.

use super::polygon::Cell;
use crate::geom::Vec2;

/// Chebyshev center and radius; `None` for degenerate cells.
pub fn chebyshev_center(cell: &Cell) -> Option<(Vec2, f64)> {
    let hp = cell.halfplanes();
    let k = hp.len();
    if k < 3 || cell.area() <= 0.0 {
        return None;
    }
    let scale = cell.diameter().max(1e-12);
    let tol = 1e-10 * scale;
    let mut best: Option<(Vec2, f64)> = None;
    for a in 0..k {
        for b in a + 1..k {
            for c in b + 1..k {
                let rows = [hp[a], hp[b], hp[c]];
                let m = nalgebra::Matrix3::new(
                    rows[0].0.x,
                    rows[0].0.y,
                    1.0,
                    rows[1].0.x,
                    rows[1].0.y,
                    1.0,
                    rows[2].0.x,
                    rows[2].0.y,
                    1.0,
                );
                if m.determinant().abs() < 1e-12 {
                    continue;
                }
                let Some(inv) = m.try_inverse() else { continue };
                let sol = inv * nalgebra::Vector3::new(rows[0].1, rows[1].1, rows[2].1);
                let (p, r) = (Vec2::new(sol.x, sol.y), sol.z);
                if r <= 0.0 || best.is_some_and(|(_, br)| r <= br) {
                    continue;
                }
                if hp.iter().all(|(n, off)| n.dot(&p) + r <= off + tol) {
                    best = Some((p, r));
                }
            }
        }
    }
    best
}
