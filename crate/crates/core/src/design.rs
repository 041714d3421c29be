//! End-to-end design in simulation: density, packing, size repair, tube synthesis and
//! rendering, with the intermediate results kept for inspection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ccvt::{
    optimize_count, resolve_sizes, Cell, DiskLayout, PackContext, PackOptions, Probe,
};
use crate::density::{build_density, initial_disk_count, DensityField};
use crate::error::{Error, Result};
use crate::io::GrayImage;
use crate::scene::{sample_light, DiskConversion, Scene};
use crate::sim::{render, ReferenceImageStack, RenderOptions, SimulatedImage, TubeIndex};
use crate::tubes::{
    assign_tube, tube_geometry, validate_layout, AssignParams, DiskInput, TubeGeometry, TubeSpec,
    ValidationReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DesignOptions {
    pub conversion: DiskConversion,
    pub pack: PackOptions,
    pub seed: u64,
    /// Fraction of the maximal tilt that may be randomly given up for dark disks.
    pub tilt_jitter: f64,
}

impl Default for DesignOptions {
    fn default() -> Self {
        DesignOptions {
            conversion: DiskConversion::default(),
            pack: PackOptions::default(),
            seed: 0,
            tilt_jitter: 0.0,
        }
    }
}

/// Disk counts and size statistics of one packing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackStats {
    pub initial_n: usize,
    pub searched_n: usize,
    /// Correct-size fraction of the best probe, before undersized removal.
    pub correct_fraction: f64,
    pub final_n: usize,
    pub final_correct_fraction: f64,
    pub removed: usize,
    pub uncovered_groups: usize,
    pub probes: Vec<Probe>,
}

impl PackStats {
    pub fn final_ratio(&self) -> f64 {
        self.final_n as f64 / self.initial_n as f64
    }
}

pub struct Packing {
    pub layout: DiskLayout,
    pub stats: PackStats,
    /// Final power cells, indexed by disk id (empty for removed disks).
    pub cells: Vec<Cell>,
}

/// Count search followed by undersized repair.
pub fn pack(
    scene: &Scene,
    field: &DensityField,
    stack: &ReferenceImageStack,
    opts: &DesignOptions,
) -> Result<Packing> {
    let n0 = initial_disk_count(scene, field, stack)?;
    let ctx = PackContext::new(scene, field);
    let search = optimize_count(&ctx, n0, opts.seed, &opts.pack)?;
    if !search.tessellation.capacity_converged {
        return Err(Error::Convergence(format!(
            "capacity constraint not met for n={} (max error {:.2e})",
            search.n,
            search.tessellation.max_capacity_error()
        )));
    }
    let resolved = resolve_sizes(&ctx, &search.tessellation, opts.seed, &opts.pack);
    let stats = PackStats {
        initial_n: n0,
        searched_n: search.n,
        correct_fraction: search.layout.correct_fraction(),
        final_n: resolved.layout.len(),
        final_correct_fraction: resolved.layout.correct_fraction(),
        removed: resolved.removed,
        uncovered_groups: resolved.uncovered_groups,
        probes: search.probes,
    };
    Ok(Packing {
        layout: resolved.layout,
        stats,
        cells: resolved.cells,
    })
}

pub fn disk_inputs(scene: &Scene, field: &DensityField, layout: &DiskLayout) -> Vec<DiskInput> {
    layout
        .disks
        .iter()
        .map(|d| DiskInput {
            id: d.id,
            lamp_center: scene.wall_to_lamp(d.center),
            inscribed_radius: d.radius_lamp,
            intended_radius: d.intended_radius_lamp,
            bright: field.is_bright(d.center),
        })
        .collect()
}

/// One tube per disk, in layout order.
pub fn synthesize_tubes(
    scene: &Scene,
    disks: &[DiskInput],
    seed: u64,
    tilt_jitter: f64,
) -> Result<(Vec<TubeSpec>, Vec<TubeGeometry>)> {
    let params = AssignParams {
        seed,
        jitter: tilt_jitter,
    };
    let tubes: Vec<TubeSpec> = disks
        .par_iter()
        .map(|d| assign_tube(scene, d, &params))
        .collect::<Result<_>>()?;
    let geoms: Vec<TubeGeometry> = tubes
        .par_iter()
        .map(|t| tube_geometry(scene, t))
        .collect::<Result<_>>()?;
    Ok((tubes, geoms))
}

pub fn tubes_to_jsonl(tubes: &[TubeSpec]) -> Result<String> {
    let mut s = String::new();
    for t in tubes {
        s.push_str(&serde_json::to_string(t)?);
        s.push('\n');
    }
    Ok(s)
}

pub fn tubes_from_jsonl(text: &str) -> Result<Vec<TubeSpec>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

pub fn simulate(
    scene: &Scene,
    tubes: &[TubeSpec],
    resolution: usize,
    seed: u64,
) -> Result<SimulatedImage> {
    let emitters = sample_light(scene, scene.light_samples_n)?;
    let index = TubeIndex::new(scene, tubes);
    Ok(render(
        scene,
        &emitters,
        &index,
        &RenderOptions { resolution, seed },
    ))
}

pub struct Design {
    pub field: DensityField,
    pub layout: DiskLayout,
    pub stats: PackStats,
    pub tubes: Vec<TubeSpec>,
    pub geometries: Vec<TubeGeometry>,
    pub validation: ValidationReport,
}

/// Density, packing and tubes for a target image.
pub fn design(
    scene: &Scene,
    stack: &ReferenceImageStack,
    img: &GrayImage,
    opts: &DesignOptions,
) -> Result<Design> {
    let field = build_density(scene, stack, img, opts.conversion)?;
    let Packing { layout, stats, .. } = pack(scene, &field, stack, opts)?;
    let disks = disk_inputs(scene, &field, &layout);
    let (tubes, geometries) = synthesize_tubes(scene, &disks, opts.seed, opts.tilt_jitter)?;
    let validation = validate_layout(scene, &tubes, &geometries);
    Ok(Design {
        field,
        layout,
        stats,
        tubes,
        geometries,
        validation,
    })
}
