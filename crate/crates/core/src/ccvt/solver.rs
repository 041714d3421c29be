//! Capacity-constrained power diagrams: Newton on the weights (concave dual), alternated
//! with Lloyd moves of the sites to their cell centroids.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::density::DensityGrid;
use super::polygon::{Cell, Moments};
use super::power::power_diagram;
use crate::error::{Error, Result};
use crate::geom::Vec2;

/// RNG stream for initial site sampling.
pub const INIT_STREAM: u64 = 1;
/// RNG stream for undersized-disk removal.
pub const REMOVAL_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CcvtOptions {
    pub max_iterations: usize,
    /// Newton stops when every cell mass is within this fraction of the target.
    pub capacity_tol: f64,
    /// Lloyd stops when no site moves more than this fraction of the mean cell diameter.
    pub stationarity: f64,
    pub max_newton: usize,
    /// Sites move to `s + ω (centroid − s)`, clamped to the domain. Any ω in (0, 2) keeps
    /// the energy monotone, since the transport cost of the current assignment shrinks by
    /// (1 − ω)². A step whose weight solve fails is retried with ω = 1.
    pub over_relaxation: f64,
}

impl Default for CcvtOptions {
    fn default() -> Self {
        CcvtOptions {
            max_iterations: 500,
            capacity_tol: 1e-7,
            stationarity: 1e-3,
            max_newton: 50,
            over_relaxation: 1.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tessellation {
    pub sites: Vec<Vec2>,
    pub weights: Vec<f64>,
    pub cells: Vec<Cell>,
    /// Integrated density per cell.
    pub capacities: Vec<f64>,
    pub total_mass: f64,
    pub iterations: usize,
    /// Converged to the stationarity tolerance within the iteration cap.
    pub converged: bool,
    /// Weight solve reached the capacity tolerance at the final sites.
    pub capacity_converged: bool,
    /// Dual transport energy after each weight solve.
    pub energies: Vec<f64>,
    pub last_displacement: f64,
    pub mean_diameter: f64,
}

impl Tessellation {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Largest relative deviation of a cell capacity from the mean.
    pub fn max_capacity_error(&self) -> f64 {
        let mean = self.total_mass / self.sites.len() as f64;
        self.capacities
            .iter()
            .map(|c| (c / mean - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn energy_non_increasing(&self, slack: f64) -> bool {
        self.energies
            .windows(2)
            .all(|w| w[1] <= w[0] + slack * w[0].abs().max(1.0))
    }
}

pub(crate) struct State {
    pub cells: Vec<Cell>,
    pub moments: Vec<Moments>,
}

pub(crate) fn evaluate(
    grid: &DensityGrid,
    sites: &[Vec2],
    weights: &[f64],
    alive: &[bool],
) -> State {
    let domain = grid.domain_cell();
    let cells = power_diagram(sites, weights, alive, &domain);
    let moments = cells
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            if alive[i] && !c.is_empty() {
                grid.moments(&c.verts, &sites[i])
            } else {
                Moments::default()
            }
        })
        .collect();
    State { cells, moments }
}

/// Dual objective `Σ (E_i − w_i m_i) + m̄ Σ w_i`.
pub(crate) fn dual_energy(state: &State, weights: &[f64], alive: &[bool], target: f64) -> f64 {
    let mut f = 0.0;
    for (i, m) in state.moments.iter().enumerate() {
        if alive[i] {
            f += m.polar - weights[i] * m.mass + target * weights[i];
        }
    }
    f
}

/// Symmetric sparse Laplacian `h_ij = ∫_e rho / (2 |x_i − x_j|)` over shared edges.
fn laplacian(
    grid: &DensityGrid,
    sites: &[Vec2],
    state: &State,
    alive: &[bool],
) -> Vec<Vec<(usize, f64)>> {
    let mut trip: Vec<(usize, usize, f64)> = state
        .cells
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, c)| {
            let k = c.verts.len();
            let mut out = Vec::new();
            for e in 0..k {
                if let Some(j) = c.labels[e] {
                    if alive[j] {
                        let l = grid.line_integral(&c.verts[e], &c.verts[(e + 1) % k]);
                        let h = l / (2.0 * (sites[i] - sites[j]).norm());
                        out.push((i.min(j), i.max(j), h));
                    }
                }
            }
            out
        })
        .collect();
    trip.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)));
    let mut rows = vec![Vec::new(); sites.len()];
    let mut k = 0;
    while k < trip.len() {
        let (a, b) = (trip[k].0, trip[k].1);
        let mut s = 0.0;
        let mut c = 0;
        while k < trip.len() && trip[k].0 == a && trip[k].1 == b {
            s += trip[k].2;
            c += 1;
            k += 1;
        }
        let h = s / c as f64;
        if h > 0.0 {
            rows[a].push((b, h));
            rows[b].push((a, h));
        }
    }
    rows
}

/// Jacobi-preconditioned conjugate gradients on the (singular, consistent) Laplacian.
fn solve_laplacian(
    rows: &[Vec<(usize, f64)>],
    rhs: &[f64],
    active: &[bool],
    rel_tol: f64,
) -> Vec<f64> {
    let n = rhs.len();
    // compressed rows: diagonal first, then off-diagonals
    let mut start = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let diag: Vec<f64> = rows
        .iter()
        .map(|r| r.iter().map(|e| e.1).sum::<f64>())
        .collect();
    let scale = diag.iter().copied().fold(0.0, f64::max).max(1e-300);
    for i in 0..n {
        start.push(cols.len());
        if active[i] {
            cols.push(i);
            vals.push(diag[i] + 1e-12 * scale);
            for &(j, h) in &rows[i] {
                cols.push(j);
                vals.push(-h);
            }
        }
    }
    start.push(cols.len());
    let apply = |x: &[f64], out: &mut [f64]| {
        for i in 0..n {
            let mut s = 0.0;
            for k in start[i]..start[i + 1] {
                s += vals[k] * x[cols[k]];
            }
            out[i] = s;
        }
    };
    let pre: Vec<f64> = diag
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 / scale })
        .collect();
    let mut x = vec![0.0; n];
    let mut r: Vec<f64> = rhs
        .iter()
        .zip(active)
        .map(|(&v, &a)| if a { v } else { 0.0 })
        .collect();
    let mut z: Vec<f64> = r.iter().zip(&pre).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let r0 = norm2(&r);
    if r0 == 0.0 {
        return x;
    }
    for _ in 0..(4 * n).max(100) {
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        let mut rr = 0.0;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            rr += r[i] * r[i];
        }
        if rr.sqrt() < rel_tol * r0 {
            break;
        }
        let mut rz_new = 0.0;
        for i in 0..n {
            z[i] = r[i] * pre[i];
            rz_new += r[i] * z[i];
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    x
}

fn residual(state: &State, alive: &[bool], target: f64) -> Vec<f64> {
    state
        .moments
        .iter()
        .zip(alive)
        .map(|(m, &a)| if a { target - m.mass } else { 0.0 })
        .collect()
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Damped Newton on the weights until every cell holds `target` mass. Returns the final
/// state and whether the tolerance was reached.
pub(crate) fn solve_weights(
    grid: &DensityGrid,
    sites: &[Vec2],
    weights: &mut [f64],
    alive: &[bool],
    target: f64,
    opts: &CcvtOptions,
) -> (State, bool) {
    let mut state = evaluate(grid, sites, weights, alive);
    let min_alive = |s: &State| {
        s.moments
            .iter()
            .zip(alive)
            .filter(|(_, &a)| a)
            .map(|(m, _)| m.mass)
            .fold(f64::INFINITY, f64::min)
    };
    if min_alive(&state) <= 0.0 {
        // warm start lost a cell; restart from the plain Voronoi diagram
        weights.iter_mut().for_each(|w| *w = 0.0);
        state = evaluate(grid, sites, weights, alive);
    }
    let eps = 0.5 * min_alive(&state).min(target);
    for _ in 0..opts.max_newton {
        let g = residual(&state, alive, target);
        let worst = g.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if worst <= opts.capacity_tol * target {
            return (state, true);
        }
        let rows = laplacian(grid, sites, &state, alive);
        // inexact Newton: forcing term shrinks with the residual
        let mut delta = solve_laplacian(&rows, &g, alive, (worst / target).clamp(1e-10, 1e-2));
        let live = alive.iter().filter(|&&a| a).count() as f64;
        let mean = delta
            .iter()
            .zip(alive)
            .filter(|(_, &a)| a)
            .map(|(d, _)| d)
            .sum::<f64>()
            / live;
        delta
            .iter_mut()
            .zip(alive)
            .for_each(|(d, &a)| *d = if a { *d - mean } else { 0.0 });
        let gn = norm2(&g);
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = weights
                .iter()
                .zip(&delta)
                .map(|(w, d)| w + alpha * d)
                .collect();
            let s = evaluate(grid, sites, &trial, alive);
            let gt = residual(&s, alive, target);
            if min_alive(&s) >= eps && norm2(&gt) <= (1.0 - 0.5 * alpha) * gn {
                weights.copy_from_slice(&trial);
                state = s;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let g = residual(&state, alive, target);
    let ok = g.iter().map(|v| v.abs()).fold(0.0, f64::max) <= opts.capacity_tol * target;
    (state, ok)
}

/// Initial sites by rejection sampling from the density.
pub fn sample_sites(grid: &DensityGrid, n: usize, seed: u64) -> Vec<Vec2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(INIT_STREAM);
    let max = grid.rho.iter().copied().fold(0.0, f64::max);
    let (x0, y0, x1, y1) = grid.bounds();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let p = Vec2::new(rng.gen_range(x0..x1), rng.gen_range(y0..y1));
        if rng.gen::<f64>() * max < grid.value(&p) {
            out.push(p);
        }
    }
    out
}

/// Capacity-constrained tessellation with `n` cells.
pub fn ccvt(grid: &DensityGrid, n: usize, seed: u64, opts: &CcvtOptions) -> Result<Tessellation> {
    if n == 0 {
        return Err(Error::InvalidArgument("site count must be >= 1".into()));
    }
    let total = grid.total_mass();
    if !(total > 0.0) {
        return Err(Error::Gamut("density has zero integral".into()));
    }
    let sites = sample_sites(grid, n, seed);
    ccvt_from_sites(grid, sites, opts)
}

pub fn ccvt_from_sites(
    grid: &DensityGrid,
    mut sites: Vec<Vec2>,
    opts: &CcvtOptions,
) -> Result<Tessellation> {
    let n = sites.len();
    let total = grid.total_mass();
    let target = total / n as f64;
    let alive = vec![true; n];
    let mut weights = vec![0.0; n];
    let mut energies = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut last_disp;
    let mut mean_diam;
    let (x0, y0, x1, y1) = grid.bounds();
    // centroids and weights of the last step, kept while its successor was over-relaxed
    let mut fallback: Option<(Vec<Vec2>, Vec<f64>)> = None;
    loop {
        let (state, cap_ok) = solve_weights(grid, &sites, &mut weights, &alive, target, opts);
        iterations += 1;
        if !cap_ok && iterations < opts.max_iterations {
            if let Some((c, w)) = fallback.take() {
                log::debug!(
                    "ccvt: weight solve failed after an over-relaxed step; taking the plain step"
                );
                sites = c;
                weights = w;
                continue;
            }
        }
        energies.push(dual_energy(&state, &weights, &alive, target));
        mean_diam = state.cells.iter().map(Cell::diameter).sum::<f64>() / n as f64;
        let centroids: Vec<Vec2> = state
            .moments
            .iter()
            .zip(&sites)
            .map(|(m, s)| {
                if m.mass > 0.0 {
                    s + Vec2::new(m.sx, m.sy) / m.mass
                } else {
                    *s
                }
            })
            .collect();
        last_disp = centroids
            .iter()
            .zip(&sites)
            .map(|(c, s)| (c - s).norm())
            .fold(0.0, f64::max);
        if last_disp < opts.stationarity * mean_diam {
            converged = true;
        }
        if converged || iterations >= opts.max_iterations {
            let capacities = state.moments.iter().map(|m| m.mass).collect();
            if !converged {
                log::warn!("ccvt: {n} sites not stationary after {iterations} iterations (max move {last_disp:.3e} mm)");
            }
            return Ok(Tessellation {
                sites,
                weights,
                cells: state.cells,
                capacities,
                total_mass: total,
                iterations,
                converged,
                capacity_converged: cap_ok,
                energies,
                last_displacement: last_disp,
                mean_diameter: mean_diam,
            });
        }
        let w = opts.over_relaxation;
        let relaxed: Vec<Vec2> = sites
            .iter()
            .zip(&centroids)
            .map(|(s, c)| {
                let p = s + (c - s) * w;
                Vec2::new(p.x.clamp(x0, x1), p.y.clamp(y0, y1))
            })
            .collect();
        fallback = (w != 1.0).then(|| (centroids, weights.clone()));
        sites = relaxed;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_is_domain() {
        let g = DensityGrid::uniform(0.0, 0.0, 1.0, 8, 8);
        let t = ccvt(&g, 1, 3, &CcvtOptions::default()).unwrap();
        assert!((t.cells[0].area() - 64.0).abs() < 1e-9);
        assert!((t.capacities[0] - 64.0).abs() < 1e-9);
        assert!(t.converged);
    }

    #[test]
    fn uniform_square_64() {
        let g = DensityGrid::uniform(0.0, 0.0, 1.0, 64, 64);
        let t = ccvt(&g, 64, 11, &CcvtOptions::default()).unwrap();
        assert!(t.max_capacity_error() < 0.01);
        let areas: Vec<f64> = t.cells.iter().map(Cell::area).collect();
        let mean = areas.iter().sum::<f64>() / 64.0;
        assert!(areas.iter().all(|a| (a / mean - 1.0).abs() < 0.02));
        assert!(t.energy_non_increasing(1e-12));
        assert!(t.cells.iter().all(|c| c.is_convex(1e-9)));
        assert!((areas.iter().sum::<f64>() - 4096.0).abs() < 1e-6 * 4096.0);
    }

    #[test]
    fn nonuniform_capacities() {
        let nx = 40;
        let rho: Vec<f64> = (0..nx * nx)
            .map(|k| 0.2 + ((k % nx) as f64 / nx as f64))
            .collect();
        let g = DensityGrid::new(-5.0, -5.0, 0.25, nx, nx, rho);
        let t = ccvt(&g, 50, 2, &CcvtOptions::default()).unwrap();
        assert!(t.max_capacity_error() < 1e-6);
        assert!(t.energy_non_increasing(1e-12));
        let s: f64 = t.capacities.iter().sum();
        assert!((s / g.total_mass() - 1.0).abs() < 1e-9);
    }
}
