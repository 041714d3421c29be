//! Inscribed disks, count search and repair of undersized disks.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::chebyshev::chebyshev_center;
use super::density::DensityGrid;
use super::polygon::Cell;
use super::power::{bounds_of, power_cell, power_diagram, SiteGrid};
use super::solver::{ccvt, CcvtOptions, Tessellation, REMOVAL_STREAM};
use crate::density::DensityField;
use crate::error::Result;
use crate::geom::Vec2;
use crate::scene::{Scene, WallCoord, MARGIN, R_MIN};

/// Radius tolerance for a disk to count as correctly sized (mm).
pub const SIZE_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeStatus {
    Correct,
    Oversized,
    Undersized,
}

/// Classifies a realized lamp disk radius against the intended one. A disk is undersized
/// when it is more than the tolerance below the intended radius or cannot hold a minimal
/// tube with its margin.
pub fn size_status(realized: f64, intended: f64) -> SizeStatus {
    let floor = (intended - SIZE_TOLERANCE).max(R_MIN + MARGIN);
    if realized < floor - 1e-9 {
        SizeStatus::Undersized
    } else if realized > intended + SIZE_TOLERANCE {
        SizeStatus::Oversized
    } else {
        SizeStatus::Correct
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub id: usize,
    pub center: WallCoord,
    pub radius_wall: f64,
    pub radius_lamp: f64,
    pub intended_radius_lamp: f64,
    pub status: SizeStatus,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DiskLayout {
    pub disks: Vec<Disk>,
}

impl DiskLayout {
    pub fn len(&self) -> usize {
        self.disks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.disks.is_empty()
    }

    pub fn count(&self, status: SizeStatus) -> usize {
        self.disks.iter().filter(|d| d.status == status).count()
    }

    pub fn correct_fraction(&self) -> f64 {
        if self.disks.is_empty() {
            return 0.0;
        }
        self.count(SizeStatus::Correct) as f64 / self.disks.len() as f64
    }

    /// Smallest `|c_i − c_j| − r_i − r_j` over all pairs (exhaustive).
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.disks.iter().enumerate() {
            for b in &self.disks[i + 1..] {
                let d = (a.center.x - b.center.x).hypot(a.center.y - b.center.y);
                best = best.min(d - a.radius_wall - b.radius_wall);
            }
        }
        best
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for d in &self.disks {
            out.push_str(&serde_json::to_string(d).expect("disk serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<DiskLayout> {
        let disks = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<std::result::Result<_, _>>()?;
        Ok(DiskLayout { disks })
    }
}

/// Inputs shared by the packing operations.
pub struct PackContext<'a> {
    pub scene: &'a Scene,
    pub field: &'a DensityField,
    pub grid: DensityGrid,
}

impl<'a> PackContext<'a> {
    pub fn new(scene: &'a Scene, field: &'a DensityField) -> Self {
        PackContext {
            scene,
            field,
            grid: DensityGrid::from_field(field),
        }
    }

    fn supported(&self, w: WallCoord) -> bool {
        self.field.support[self.field.index_at(w)]
    }

    /// The cell clipped to the convex hull of the supported pixels it contains. Cells
    /// reaching into zero-density areas otherwise place their circle there.
    pub fn supported_part(&self, cell: &Cell) -> Cell {
        if cell
            .verts
            .iter()
            .all(|v| self.supported(WallCoord::new(v.x, v.y)))
        {
            return cell.clone();
        }
        let raster = self.field.raster;
        let (x0, y0, x1, y1) = bounds_of(cell);
        let (c0, r1) = raster.pixel_clamped(WallCoord::new(x0, y0));
        let (c1, r0) = raster.pixel_clamped(WallCoord::new(x1, y1));
        let mut pts = Vec::new();
        for row in r0..=r1 {
            for col in c0..=c1 {
                if !self.field.support[row * raster.width + col] {
                    continue;
                }
                let w = raster.pixel_center(col, row);
                if !cell.contains(&Vec2::new(w.x, w.y), 0.0) {
                    continue;
                }
                for (du, dv) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)] {
                    let q = raster.wall_at(col as f64 + du, row as f64 + dv);
                    pts.push(Vec2::new(q.x, q.y));
                }
            }
        }
        let hull = convex_hull(pts);
        if hull.len() < 3 {
            return Cell::default();
        }
        let mut out = cell.clone();
        for (n, b) in (Cell {
            labels: vec![None; hull.len()],
            verts: hull,
        })
        .halfplanes()
        {
            out = out.clip(n, b, None);
        }
        out
    }

    fn disk_for(&self, id: usize, cell: &Cell) -> Option<Disk> {
        let (c, r) = chebyshev_center(&self.supported_part(cell))?;
        let w = WallCoord::new(c.x, c.y);
        if !self.field.support[self.field.index_at(w)] {
            return None;
        }
        let radius_lamp = self.field.conversion.lamp_radius(self.scene, w, r);
        let intended = self.field.intended_radius(w);
        Some(Disk {
            id,
            center: w,
            radius_wall: r,
            radius_lamp,
            intended_radius_lamp: intended,
            status: size_status(radius_lamp, intended),
        })
    }
}

/// Counter-clockwise convex hull (monotone chain), collinear points dropped.
fn convex_hull(mut pts: Vec<Vec2>) -> Vec<Vec2> {
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross =
        |o: &Vec2, a: &Vec2, b: &Vec2| (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    let mut hull: Vec<Vec2> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vec2>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for p in iter {
            while hull.len() >= start + 2
                && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0
            {
                hull.pop();
            }
            hull.push(*p);
        }
        hull.pop();
    }
    hull
}

/// Maximal inscribed circle of every cell, with lamp radii and size status. Degenerate
/// cells and cells whose circle centers fall outside the support are skipped.
pub fn inscribe(ctx: &PackContext, t: &Tessellation) -> DiskLayout {
    let disks: Vec<Disk> = t
        .cells
        .iter()
        .enumerate()
        .filter_map(|(i, c)| ctx.disk_for(i, c))
        .collect();
    let skipped = t.cells.len() - disks.len();
    if skipped > 0 {
        log::warn!("inscribe: {skipped} degenerate or out-of-support cells skipped");
    }
    DiskLayout { disks }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PackOptions {
    pub ccvt: CcvtOptions,
    pub max_runs: usize,
    pub low_fraction: f64,
    pub high_fraction: f64,
    /// Lloyd iteration cap for the local repair relaxation.
    pub repair_iterations: usize,
    /// Local relaxation stops once no site moves more than this (mm).
    pub repair_tolerance: f64,
}

impl Default for PackOptions {
    fn default() -> Self {
        PackOptions {
            ccvt: CcvtOptions {
                max_iterations: 150,
                ..CcvtOptions::default()
            },
            max_runs: 10,
            low_fraction: 0.6,
            high_fraction: 1.1,
            repair_iterations: 50,
            repair_tolerance: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub n: usize,
    pub correct_fraction: f64,
    pub converged: bool,
    pub capacity_error: f64,
    pub iterations: usize,
}

pub struct CountSearch {
    pub n: usize,
    pub tessellation: Tessellation,
    pub layout: DiskLayout,
    pub probes: Vec<Probe>,
}

/// Golden-section search over integer disk counts in `[low·n0, high·n0]` maximizing the
/// fraction of correctly sized disks; ties go to the larger count.
pub fn optimize_count(
    ctx: &PackContext,
    n0: usize,
    seed: u64,
    opts: &PackOptions,
) -> Result<CountSearch> {
    let lo = ((opts.low_fraction * n0 as f64).round() as usize).max(1);
    let hi = ((opts.high_fraction * n0 as f64).round() as usize).max(lo);
    let mut memo: BTreeMap<usize, f64> = BTreeMap::new();
    let mut probes = Vec::new();
    let mut best: Option<(usize, f64, Tessellation, DiskLayout)> = None;
    let mut eval =
        |n: usize, memo: &mut BTreeMap<usize, f64>, probes: &mut Vec<Probe>| -> Result<f64> {
            if let Some(&s) = memo.get(&n) {
                return Ok(s);
            }
            let t = ccvt(&ctx.grid, n, seed, &opts.ccvt)?;
            let layout = inscribe(ctx, &t);
            let s = layout.correct_fraction();
            log::info!("count probe n={n}: {:.2}% correct", 100.0 * s);
            probes.push(Probe {
                n,
                correct_fraction: s,
                converged: t.converged,
                capacity_error: t.max_capacity_error(),
                iterations: t.iterations,
            });
            memo.insert(n, s);
            let better = match &best {
                None => true,
                Some((bn, bs, _, _)) => s > *bs || (s == *bs && n > *bn),
            };
            if better {
                best = Some((n, s, t, layout));
            }
            Ok(s)
        };
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let pick = |a: usize, b: usize, left: bool| -> usize {
        let span = (b - a) as f64;
        if left {
            (b as f64 - INV_PHI * span).round() as usize
        } else {
            (a as f64 + INV_PHI * span).round() as usize
        }
    };
    let mut c = pick(a, b, true);
    let mut d = pick(a, b, false);
    let mut fc = eval(c, &mut memo, &mut probes)?;
    let mut fd = if d != c {
        eval(d, &mut memo, &mut probes)?
    } else {
        fc
    };
    while probes.len() < opts.max_runs && b > a + 2 && c < d {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = pick(a, b, true);
            if c >= d {
                break;
            }
            fc = eval(c, &mut memo, &mut probes)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = pick(a, b, false);
            if d <= c {
                break;
            }
            fd = eval(d, &mut memo, &mut probes)?;
        }
    }
    let (n, _, tessellation, layout) = best.expect("at least one probe");
    Ok(CountSearch {
        n,
        tessellation,
        layout,
        probes,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub layout: DiskLayout,
    pub sites: Vec<Vec2>,
    pub cells: Vec<Cell>,
    pub removed: usize,
    /// Undersized groups whose disks were all removed (area left uncovered).
    pub uncovered_groups: usize,
}

struct RepairState<'c, 'a> {
    ctx: &'c PackContext<'a>,
    domain: Cell,
    sites: Vec<Vec2>,
    weights: Vec<f64>,
    alive: Vec<bool>,
    cells: Vec<Cell>,
    disks: Vec<Option<Disk>>,
}

impl RepairState<'_, '_> {
    fn max_weight(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.alive)
            .filter(|(_, &a)| a)
            .map(|(&w, _)| w)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn recompute(&mut self, ids: &[usize]) {
        let grid = SiteGrid::new(bounds_of(&self.domain), &self.sites, &self.alive);
        let mw = self.max_weight();
        for &i in ids {
            if self.alive[i] {
                self.cells[i] = power_cell(i, &self.sites, &self.weights, mw, &grid, &self.domain);
                self.disks[i] = self.ctx.disk_for(i, &self.cells[i]);
            } else {
                self.cells[i] = Cell::default();
                self.disks[i] = None;
            }
        }
    }

    fn full_recompute(&mut self) {
        self.cells = power_diagram(&self.sites, &self.weights, &self.alive, &self.domain);
        for i in 0..self.sites.len() {
            self.disks[i] = if self.alive[i] {
                self.ctx.disk_for(i, &self.cells[i])
            } else {
                None
            };
        }
    }

    fn undersized(&self, i: usize) -> bool {
        self.alive[i]
            && self.disks[i]
                .as_ref()
                .map_or(true, |d| d.status == SizeStatus::Undersized)
    }

    fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.cells[i]
            .labels
            .iter()
            .filter_map(|l| *l)
            .filter(|&j| self.alive[j])
    }

    fn ring(&self, ids: &[usize]) -> Vec<usize> {
        let mut out: Vec<usize> = ids.iter().copied().filter(|&i| self.alive[i]).collect();
        for &i in ids {
            out.extend(self.neighbors(i));
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Lloyd iterations with fixed weights moving only `region`.
    fn relax(&mut self, region: &[usize], opts: &PackOptions) {
        for _ in 0..opts.repair_iterations {
            let grid = SiteGrid::new(bounds_of(&self.domain), &self.sites, &self.alive);
            let mw = self.max_weight();
            let mut moved: f64 = 0.0;
            let targets: Vec<(usize, Vec2)> = region
                .iter()
                .filter(|&&i| self.alive[i])
                .map(|&i| {
                    let cell = power_cell(i, &self.sites, &self.weights, mw, &grid, &self.domain);
                    let m = self.ctx.grid.moments(&cell.verts, &self.sites[i]);
                    let c = if m.mass > 0.0 {
                        self.sites[i] + Vec2::new(m.sx, m.sy) / m.mass
                    } else {
                        self.sites[i]
                    };
                    (i, c)
                })
                .collect();
            for (i, c) in targets {
                moved = moved.max((c - self.sites[i]).norm());
                self.sites[i] = c;
            }
            if moved < opts.repair_tolerance {
                break;
            }
        }
    }
}

/// Removes undersized disks one at a time per adjacency group, relaxing the one-ring of
/// each removed disk with Lloyd's method (weights fixed), until no undersized disk remains.
pub fn resolve_sizes(
    ctx: &PackContext,
    t: &Tessellation,
    seed: u64,
    opts: &PackOptions,
) -> Resolved {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(REMOVAL_STREAM);
    let n = t.sites.len();
    let mut st = RepairState {
        ctx,
        domain: ctx.grid.domain_cell(),
        sites: t.sites.clone(),
        weights: t.weights.clone(),
        alive: vec![true; n],
        cells: Vec::new(),
        disks: vec![None; n],
    };
    let mut removed = 0;
    let mut uncovered = 0;
    loop {
        st.full_recompute();
        let bad: Vec<usize> = (0..n).filter(|&i| st.undersized(i)).collect();
        if bad.is_empty() {
            break;
        }
        log::debug!("resolve pass: {} undersized disks", bad.len());
        // connected components of undersized cells under adjacency
        let mut comp = vec![usize::MAX; n];
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for &s in &bad {
            if comp[s] != usize::MAX {
                continue;
            }
            let gid = groups.len();
            let mut stack = vec![s];
            comp[s] = gid;
            let mut members = Vec::new();
            while let Some(i) = stack.pop() {
                members.push(i);
                for j in st.neighbors(i).collect::<Vec<_>>() {
                    if comp[j] == usize::MAX && st.undersized(j) {
                        comp[j] = gid;
                        stack.push(j);
                    }
                }
            }
            members.sort_unstable();
            groups.push(members);
        }
        for group in groups {
            loop {
                let candidates: Vec<usize> = group
                    .iter()
                    .copied()
                    .filter(|&i| st.undersized(i))
                    .collect();
                if candidates.is_empty() {
                    break;
                }
                let victim = candidates[rng.gen_range(0..candidates.len())];
                let before = st.ring(&[victim]);
                st.alive[victim] = false;
                removed += 1;
                if !group.iter().any(|&i| st.alive[i]) {
                    uncovered += 1;
                    st.recompute(&before);
                    break;
                }
                // relax the one-ring of the removed disk
                let region: Vec<usize> = before.iter().copied().filter(|&i| st.alive[i]).collect();
                let old = st.ring(&region);
                st.relax(&region, opts);
                let mut affected = st.ring(&region);
                affected.extend(old);
                affected.sort_unstable();
                affected.dedup();
                st.recompute(&affected);
            }
        }
    }
    let disks: Vec<Disk> = st.disks.iter().flatten().cloned().collect();
    let layout = DiskLayout { disks };
    Resolved {
        layout,
        sites: st.sites,
        cells: st.cells,
        removed,
        uncovered_groups: uncovered,
    }
}

/// SVG drawing of cells, sites and inscribed disks in wall coordinates (y up).
pub fn tessellation_svg(
    cells: &[Cell],
    layout: &DiskLayout,
    bounds: (f64, f64, f64, f64),
) -> String {
    let (x0, y0, x1, y1) = bounds;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {} {}">"#,
        x0,
        -y1,
        x1 - x0,
        y1 - y0
    );
    let _ = writeln!(s, r#"<g fill="none" stroke="black" stroke-width="0.2">"#);
    for c in cells.iter().filter(|c| !c.is_empty()) {
        let pts: Vec<String> = c
            .verts
            .iter()
            .map(|v| format!("{:.3},{:.3}", v.x, -v.y))
            .collect();
        let _ = writeln!(s, r#"<polygon points="{}"/>"#, pts.join(" "));
    }
    let _ = writeln!(s, "</g>");
    for d in &layout.disks {
        let color = match d.status {
            SizeStatus::Correct => "green",
            SizeStatus::Oversized => "blue",
            SizeStatus::Undersized => "red",
        };
        let _ = writeln!(
            s,
            r#"<circle cx="{:.3}" cy="{:.3}" r="{:.3}" fill="none" stroke="{color}" stroke-width="0.2"/>"#,
            d.center.x, -d.center.y, d.radius_wall
        );
    }
    s.push_str("</svg>\n");
    s
}
