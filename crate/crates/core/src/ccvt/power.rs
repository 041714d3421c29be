//! Power diagram cells by half-plane clipping with a security-radius stop.

use rayon::prelude::*;

use super::polygon::Cell;
use crate::geom::Vec2;

/// Uniform bucket grid over the live sites.
pub(crate) struct SiteGrid {
    x0: f64,
    y0: f64,
    h: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl SiteGrid {
    pub fn new(bounds: (f64, f64, f64, f64), sites: &[Vec2], alive: &[bool]) -> SiteGrid {
        let (x0, y0, x1, y1) = bounds;
        let count = alive.iter().filter(|&&a| a).count().max(1);
        let h = ((x1 - x0) * (y1 - y0) / count as f64).sqrt().max(1e-9) * 1.5;
        let nx = (((x1 - x0) / h).ceil() as usize).max(1);
        let ny = (((y1 - y0) / h).ceil() as usize).max(1);
        let mut g = SiteGrid {
            x0,
            y0,
            h,
            nx,
            ny,
            buckets: vec![Vec::new(); nx * ny],
        };
        for (i, s) in sites.iter().enumerate() {
            if alive[i] {
                let (a, b) = g.bucket(s);
                g.buckets[b * nx + a].push(i);
            }
        }
        g
    }

    fn bucket(&self, p: &Vec2) -> (usize, usize) {
        let a = ((p.x - self.x0) / self.h)
            .floor()
            .clamp(0.0, (self.nx - 1) as f64) as usize;
        let b = ((p.y - self.y0) / self.h)
            .floor()
            .clamp(0.0, (self.ny - 1) as f64) as usize;
        (a, b)
    }
}

/// Power cell of site `i` clipped to `domain`.
pub(crate) fn power_cell(
    i: usize,
    sites: &[Vec2],
    weights: &[f64],
    max_weight: f64,
    grid: &SiteGrid,
    domain: &Cell,
) -> Cell {
    let xi = sites[i];
    let wi = weights[i];
    // work relative to the site for accuracy
    let mut cell = Cell {
        verts: domain.verts.iter().map(|v| v - xi).collect(),
        labels: domain.labels.clone(),
    };
    let mut scratch = Cell::default();
    let (ca, cb) = grid.bucket(&xi);
    let dw = (max_weight - wi).max(0.0);
    let max_ring = grid.nx.max(grid.ny);
    for ring in 0..=max_ring {
        if ring > 0 {
            let dmin = (ring - 1) as f64 * grid.h;
            let radius = cell.radius_from(&Vec2::zeros());
            if dmin > 0.0 && (dmin * dmin - dw) / (2.0 * dmin) >= radius {
                break;
            }
        }
        let r = ring as i64;
        for b in (cb as i64 - r)..=(cb as i64 + r) {
            if b < 0 || b >= grid.ny as i64 {
                continue;
            }
            for a in (ca as i64 - r)..=(ca as i64 + r) {
                if a < 0 || a >= grid.nx as i64 {
                    continue;
                }
                if (b - cb as i64).abs() != r && (a - ca as i64).abs() != r {
                    continue;
                }
                for &j in &grid.buckets[b as usize * grid.nx + a as usize] {
                    if j == i {
                        continue;
                    }
                    let d = sites[j] - xi;
                    let n = 2.0 * d;
                    let off = d.norm_squared() + wi - weights[j];
                    cell.clip_in_place(n, off, Some(j), &mut scratch);
                    if cell.is_empty() {
                        return Cell::default();
                    }
                }
            }
        }
    }
    for v in &mut cell.verts {
        *v += xi;
    }
    cell
}

/// All power cells; dead sites get empty cells.
pub fn power_diagram(sites: &[Vec2], weights: &[f64], alive: &[bool], domain: &Cell) -> Vec<Cell> {
    let bounds = bounds_of(domain);
    let grid = SiteGrid::new(bounds, sites, alive);
    let max_weight = weights
        .iter()
        .zip(alive)
        .filter(|(_, &a)| a)
        .map(|(&w, _)| w)
        .fold(f64::NEG_INFINITY, f64::max);
    (0..sites.len())
        .into_par_iter()
        .map(|i| {
            if alive[i] {
                power_cell(i, sites, weights, max_weight, &grid, domain)
            } else {
                Cell::default()
            }
        })
        .collect()
}

pub fn bounds_of(domain: &Cell) -> (f64, f64, f64, f64) {
    domain.verts.iter().fold(
        (
            f64::INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::NEG_INFINITY,
        ),
        |(a, b, c, d), v| (a.min(v.x), b.min(v.y), c.max(v.x), d.max(v.y)),
    )
}
