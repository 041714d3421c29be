//! Evaluation of simulated results against targets.

pub mod contrast;
pub mod histogram;
pub mod plot;
pub mod targets;
pub mod tilt;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use contrast::{contrast_response, ContrastCurve, ContrastResponse};
pub use histogram::{histogram_compare, HistogramReport};
pub use tilt::{tilt_curve, TiltCurve};

use crate::density::DensityStats;
use crate::design::PackStats;
use crate::error::Result;
use crate::io::write_bytes;

/// Disk counts and clamping of one design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableStats {
    pub initial_n: usize,
    pub final_n: usize,
    pub final_ratio: f64,
    pub correct_percent: f64,
    pub final_correct_percent: f64,
    pub clamp_fraction: f64,
    pub clamped_bright: usize,
    pub clamped_dark: usize,
}

impl TableStats {
    pub fn new(pack: &PackStats, density: &DensityStats) -> TableStats {
        TableStats {
            initial_n: pack.initial_n,
            final_n: pack.final_n,
            final_ratio: pack.final_ratio(),
            correct_percent: 100.0 * pack.correct_fraction,
            final_correct_percent: 100.0 * pack.final_correct_fraction,
            clamp_fraction: density.clamp_fraction,
            clamped_bright: density.clamped_bright,
            clamped_dark: density.clamped_dark,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub table: Option<TableStats>,
    pub histogram: Option<HistogramReport>,
    pub contrast: Option<ContrastResponse>,
    pub tilt: Option<TiltCurve>,
}

impl EvalReport {
    /// Writes `report.json` plus CSV and SVG files for every section present.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_bytes(
            &dir.join("report.json"),
            serde_json::to_string_pretty(self)?.as_bytes(),
        )?;
        if let Some(h) = &self.histogram {
            write_bytes(&dir.join("histogram.csv"), h.to_csv().as_bytes())?;
            write_bytes(&dir.join("histogram.svg"), h.to_svg().as_bytes())?;
        }
        if let Some(c) = &self.contrast {
            write_bytes(&dir.join("contrast.csv"), c.to_csv().as_bytes())?;
            write_bytes(&dir.join("contrast.svg"), c.to_svg().as_bytes())?;
        }
        if let Some(t) = &self.tilt {
            write_bytes(&dir.join("tilt.csv"), t.to_csv().as_bytes())?;
            write_bytes(&dir.join("tilt.svg"), t.to_svg().as_bytes())?;
        }
        Ok(())
    }
}
