use std::path::{Path, PathBuf};

use lampshade::ccvt::PackOptions;
use lampshade::design::DesignOptions;
use lampshade::io::read_string;
use lampshade::{DiskConversion, Error, Result, Scene};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PackConfig {
    pub conversion: DiskConversion,
    pub search: PackOptions,
    pub tilt_jitter: f64,
}

impl Default for PackConfig {
    fn default() -> Self {
        PackConfig {
            conversion: DiskConversion::default(),
            search: PackOptions::default(),
            tilt_jitter: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub tilt: bool,
    pub tilt_samples: usize,
    pub contrast: bool,
    pub contrast_cycles: Vec<f64>,
    pub contrast_radius_mm: f64,
    pub contrast_samples: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            tilt: true,
            tilt_samples: 10,
            contrast: false,
            contrast_cycles: lampshade::eval::contrast::DEFAULT_CYCLES.to_vec(),
            contrast_radius_mm: 500.0,
            contrast_samples: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub scene: Scene,
    pub target: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    /// Raster width (pixels) for the reference stack and simulations.
    pub resolution: usize,
    /// Mesh resolution (mm).
    pub voxel: f64,
    pub aperture_radius_mm: f64,
    /// Wall margin (mm) of the reference layouts.
    pub stack_margin_mm: f64,
    pub pack: PackConfig,
    pub export_obj: bool,
    pub eval: EvalConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            scene: Scene::default(),
            target: None,
            out: PathBuf::from("out"),
            seed: 0,
            resolution: 512,
            voxel: 0.1,
            aperture_radius_mm: lampshade::mesh::DEFAULT_APERTURE_RADIUS,
            stack_margin_mm: lampshade::sim::DEFAULT_LAYOUT_MARGIN,
            pack: PackConfig::default(),
            export_obj: false,
            eval: EvalConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<PipelineConfig> {
        serde_json::from_str(&read_string(path)?)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        if self.resolution < 16 {
            return Err(Error::Config(format!(
                "resolution {} is below 16 pixels",
                self.resolution
            )));
        }
        if !(self.voxel > 0.0) {
            return Err(Error::Config(format!(
                "voxel size {} must be positive",
                self.voxel
            )));
        }
        Ok(())
    }

    pub fn design_options(&self) -> DesignOptions {
        DesignOptions {
            conversion: self.pack.conversion,
            pack: self.pack.search,
            seed: self.seed,
            tilt_jitter: self.pack.tilt_jitter,
        }
    }

    pub fn target_path(&self) -> Result<&Path> {
        self.target.as_deref().ok_or_else(|| {
            Error::Config("no target image given (use --target or the config)".into())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_config_fills_defaults() {
        let c: PipelineConfig =
            serde_json::from_str(r#"{"seed": 7, "pack": {"search": {"max_runs": 3}}}"#).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.pack.search.max_runs, 3);
        assert_eq!(c.resolution, 512);
        assert_eq!(c.scene, Scene::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"sed": 7}"#).is_err());
    }

    #[test]
    fn roundtrip() {
        let c = PipelineConfig::default();
        let back: PipelineConfig =
            serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
