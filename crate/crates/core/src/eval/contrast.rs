//! Response to radial cosine waves: how much of the input modulation survives the design
//! and simulation, as a function of distance from the image center.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use super::plot::{line_plot, Series};
use crate::density::target_in_stack_units;
use crate::design::{design, simulate, DesignOptions};
use crate::error::Result;
use crate::io::GrayImage;
use crate::scene::Scene;
use crate::sim::{Raster, ReferenceImageStack};

/// Wave counts over the image radius.
pub const DEFAULT_CYCLES: [f64; 6] = [3.0, 4.0, 6.0, 9.0, 12.0, 16.0];
/// Central region used for the summary ratio (mm).
pub const CENTRAL_RADIUS: f64 = 100.0;

/// Gray image of `cycles` radial cosine periods over `radius_mm`, spanning `extent_mm`.
/// Pure black is avoided since it marks "no image".
pub fn radial_cosine(size: usize, extent_mm: f64, radius_mm: f64, cycles: f64) -> GrayImage {
    let mut px = Vec::with_capacity(size * size);
    for r in 0..size {
        for c in 0..size {
            let x = ((c as f64 + 0.5) / size as f64 - 0.5) * extent_mm;
            let y = ((r as f64 + 0.5) / size as f64 - 0.5) * extent_mm;
            let phase = std::f64::consts::TAU * cycles * x.hypot(y) / radius_mm;
            px.push((128.0 + 126.0 * phase.cos()).round() as u8);
        }
    }
    GrayImage::new(size, size, px)
}

/// Amplitude of the `cycles` wave around each radius in `radii`, by a Hann-weighted least
/// squares fit of offset, slope, cosine and sine over one period.
pub fn radial_amplitude(
    values: &[f64],
    raster: Raster,
    radius_mm: f64,
    cycles: f64,
    radii: &[f64],
) -> Vec<f64> {
    let period = radius_mm / cycles;
    let half = (0.5 * period).max(2.0 * raster.pixel_pitch);
    let k = std::f64::consts::TAU * cycles / radius_mm;
    let mut ata = vec![Matrix4::<f64>::zeros(); radii.len()];
    let mut atb = vec![Vector4::<f64>::zeros(); radii.len()];
    for row in 0..raster.height {
        for col in 0..raster.width {
            let w = raster.pixel_center(col, row);
            let r = w.x.hypot(w.y);
            let v = values[row * raster.width + col];
            for (i, &rk) in radii.iter().enumerate() {
                let d = r - rk;
                if d.abs() > half {
                    continue;
                }
                let wt = (std::f64::consts::FRAC_PI_2 * d / half).cos().powi(2);
                let a = Vector4::new(1.0, d, (k * r).cos(), (k * r).sin());
                ata[i] += a * a.transpose() * wt;
                atb[i] += a * (v * wt);
            }
        }
    }
    ata.iter()
        .zip(&atb)
        .map(|(m, b)| m.lu().solve(b).map_or(f64::NAN, |x| x[2].hypot(x[3])))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastCurve {
    pub cycles: f64,
    pub input_amplitude: Vec<f64>,
    pub output_amplitude: Vec<f64>,
    pub ratio: Vec<f64>,
    /// Mean ratio within `CENTRAL_RADIUS`.
    pub central_ratio: f64,
    /// First radius beyond the center where the ratio falls below half the central ratio.
    pub cutoff_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastResponse {
    pub radius_mm: f64,
    pub radii: Vec<f64>,
    pub curves: Vec<ContrastCurve>,
}

pub fn curve_from(cycles: f64, radii: &[f64], input: Vec<f64>, output: Vec<f64>) -> ContrastCurve {
    let ratio: Vec<f64> = input.iter().zip(&output).map(|(i, o)| o / i).collect();
    let central: Vec<f64> = radii
        .iter()
        .zip(&ratio)
        .filter(|(r, v)| **r <= CENTRAL_RADIUS && v.is_finite())
        .map(|(_, v)| *v)
        .collect();
    let central_ratio = if central.is_empty() {
        f64::NAN
    } else {
        central.iter().sum::<f64>() / central.len() as f64
    };
    let cutoff_radius = radii
        .iter()
        .zip(&ratio)
        .find(|(r, v)| **r > CENTRAL_RADIUS && !(**v >= 0.5 * central_ratio))
        .map_or(*radii.last().unwrap_or(&0.0), |(r, _)| *r);
    ContrastCurve {
        cycles,
        input_amplitude: input,
        output_amplitude: output,
        ratio,
        central_ratio,
        cutoff_radius,
    }
}

/// Runs the design and simulation for each wave and fits input and output amplitudes at
/// `samples` radii across `radius_mm`.
pub fn contrast_response(
    scene: &Scene,
    stack: &ReferenceImageStack,
    cycles: &[f64],
    radius_mm: f64,
    samples: usize,
    opts: &DesignOptions,
) -> Result<ContrastResponse> {
    let raster = stack.images[0].raster();
    let step = radius_mm / samples as f64;
    let radii: Vec<f64> = (0..samples).map(|i| (i as f64 + 0.5) * step).collect();
    let mut curves = Vec::new();
    for &f in cycles {
        let img = radial_cosine(raster.width, scene.wall_extent_mm[0], radius_mm, f);
        let (input, _) = target_in_stack_units(stack, &img)?;
        let d = design(scene, stack, &img, opts)?;
        let sim = simulate(scene, &d.tubes, raster.width, opts.seed)?;
        let a_in = radial_amplitude(&input, raster, radius_mm, f, &radii);
        let a_out = radial_amplitude(&sim.values, raster, radius_mm, f, &radii);
        let c = curve_from(f, &radii, a_in, a_out);
        log::info!(
            "contrast {f} cycles: central ratio {:.3}, cutoff {:.0} mm",
            c.central_ratio,
            c.cutoff_radius
        );
        curves.push(c);
    }
    Ok(ContrastResponse {
        radius_mm,
        radii,
        curves,
    })
}

const COLORS: [&str; 6] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
];

impl ContrastResponse {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("cycles,radius_mm,input_amplitude,output_amplitude,ratio\n");
        for c in &self.curves {
            for (i, r) in self.radii.iter().enumerate() {
                s.push_str(&format!(
                    "{},{r},{},{},{}\n",
                    c.cycles, c.input_amplitude[i], c.output_amplitude[i], c.ratio[i]
                ));
            }
        }
        s
    }

    pub fn to_svg(&self) -> String {
        let names: Vec<String> = self
            .curves
            .iter()
            .map(|c| format!("{} cycles", c.cycles))
            .collect();
        let series: Vec<Series> = self
            .curves
            .iter()
            .enumerate()
            .map(|(i, c)| Series {
                name: &names[i],
                color: COLORS[i % COLORS.len()],
                points: self
                    .radii
                    .iter()
                    .copied()
                    .zip(c.ratio.iter().copied())
                    .collect(),
            })
            .collect();
        line_plot(
            "Amplitude ratio vs radius",
            "radius (mm)",
            "output / input amplitude",
            &series,
        )
    }
}
