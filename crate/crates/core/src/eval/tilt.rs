//! Light passed by a single minimal tube as it is tilted away from the light.

use serde::{Deserialize, Serialize};

use super::plot::{line_plot, Series};
use crate::design::simulate;
use crate::error::Result;
use crate::scene::{Scene, WallCoord, MARGIN, R_MIN};
use crate::tubes::{max_tilt_angle, TubeKind, TubeSpec};

/// Embedding disk of the test tube (mm): the largest reference disk.
pub const TILT_DISK_RADIUS: f64 = 1.35;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiltCurve {
    pub angles: Vec<f64>,
    /// Sum of wall illuminance over the raster (lux · pixels).
    pub sums: Vec<f64>,
    /// `sums` divided by the sum at zero tilt.
    pub normalized: Vec<f64>,
}

/// `count` tilt angles from 0 to the maximal tilt of the test disk.
pub fn default_tilt_angles(scene: &Scene, count: usize) -> Result<Vec<f64>> {
    let max = max_tilt_angle(TILT_DISK_RADIUS, scene.shade_thickness_mm)?;
    Ok((0..count)
        .map(|i| max * i as f64 / (count - 1).max(1) as f64)
        .collect())
}

fn test_tube(scene: &Scene, tilt: f64) -> TubeSpec {
    TubeSpec {
        id: 0,
        kind: TubeKind::Tilted,
        lamp_disk_center: scene.wall_to_lamp(WallCoord::new(0.0, 0.0)),
        disk_radius: TILT_DISK_RADIUS.max(R_MIN + MARGIN),
        tube_radius: R_MIN,
        tilt_angle: tilt,
        tilt_azimuth: 0.0,
    }
}

/// Footprint sums of a 1.2 mm tube at the image center for each tilt angle.
pub fn tilt_curve(
    scene: &Scene,
    angles: &[f64],
    resolution: usize,
    seed: u64,
) -> Result<TiltCurve> {
    let mut sums = Vec::with_capacity(angles.len());
    for &a in angles {
        let img = simulate(scene, &[test_tube(scene, a)], resolution, seed)?;
        sums.push(img.values.iter().sum::<f64>());
    }
    let base = angles
        .iter()
        .position(|&a| a == 0.0)
        .map_or(sums.iter().cloned().fold(0.0, f64::max), |i| sums[i]);
    let normalized = sums
        .iter()
        .map(|s| if base > 0.0 { s / base } else { 0.0 })
        .collect();
    Ok(TiltCurve {
        angles: angles.to_vec(),
        sums,
        normalized,
    })
}

impl TiltCurve {
    pub fn is_monotone_decreasing(&self) -> bool {
        self.normalized.windows(2).all(|w| w[1] <= w[0])
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("tilt_deg,sum,normalized\n");
        for i in 0..self.angles.len() {
            s.push_str(&format!(
                "{},{},{}\n",
                self.angles[i].to_degrees(),
                self.sums[i],
                self.normalized[i]
            ));
        }
        s
    }

    pub fn to_svg(&self) -> String {
        let pts = self
            .angles
            .iter()
            .map(|a| a.to_degrees())
            .zip(self.normalized.iter().copied())
            .collect();
        line_plot(
            "Footprint sum vs tilt",
            "tilt (deg)",
            "normalized sum",
            &[Series {
                name: "simulated",
                color: "#1f77b4",
                points: pts,
            }],
        )
    }
}
