//! Fixtures shared by the benchmarks.

use lampshade::ccvt::DensityGrid;
use lampshade::sim::{level_tubes, StackOptions};
use lampshade::tubes::DiskInput;
use lampshade::{Scene, TubeSpec};

/// Smooth positive density on a `n` x `n` grid over [-1, 1]^2.
pub fn bump_density(n: usize) -> DensityGrid {
    let pitch = 2.0 / n as f64;
    let rho = (0..n * n)
        .map(|k| {
            let x = -1.0 + (k % n) as f64 * pitch;
            let y = -1.0 + (k / n) as f64 * pitch;
            0.2 + (-4.0 * (x * x + y * y)).exp()
        })
        .collect();
    DensityGrid::new(-1.0, -1.0, pitch, n, n, rho)
}

/// Uniform tubes of one reference level.
pub fn level_layout(scene: &Scene, level: i32) -> Vec<TubeSpec> {
    level_tubes(scene, level, &StackOptions::default())
        .expect("reference level")
        .0
}

/// Disks at the centers of a reference-level layout, alternating bright and dark.
pub fn disks(scene: &Scene, level: i32) -> Vec<DiskInput> {
    level_layout(scene, level)
        .iter()
        .map(|t| DiskInput {
            id: t.id,
            lamp_center: t.lamp_disk_center,
            inscribed_radius: t.disk_radius,
            intended_radius: t.disk_radius,
            bright: t.id % 2 == 0,
        })
        .collect()
}
