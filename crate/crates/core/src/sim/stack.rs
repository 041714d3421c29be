//! Reference image stack: simulated wall images of dense uniform layouts at each level,
//! smoothed, made per-pixel monotone, and cached on disk.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::filter::{gaussian_blur, isotonic_non_decreasing};
use super::hex::{hex_grid_layout_with_margin, DEFAULT_LAYOUT_MARGIN};
use super::index::TubeIndex;
use super::render::{render, RenderOptions};
use super::SimulatedImage;
use crate::error::{Error, Result};
use crate::io::{read_png16, read_string, write_bytes, write_png16};
use crate::scene::{level_disk_radius, sample_light, Scene, DELTA_R, LEVELS, R_MIN};
use crate::tubes::{max_tilt_angle, tube_rng, TubeKind, TubeSpec};

pub const STACK_CACHE_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StackOptions {
    pub resolution: usize,
    /// Seed for tilt azimuths and pixel jitter.
    pub seed: u64,
    /// Wall margin (mm) of the reference layouts beyond the projection region.
    pub layout_margin: f64,
}

impl Default for StackOptions {
    fn default() -> Self {
        StackOptions {
            resolution: 512,
            seed: 0,
            layout_margin: DEFAULT_LAYOUT_MARGIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelInfo {
    pub level: i32,
    pub disk_radius: f64,
    pub tube_radius: f64,
    pub tilted: bool,
    pub tilt_angle: f64,
    pub tube_count: usize,
    /// Gaussian smoothing applied to the raw rendering (pixels).
    pub sigma_px: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceImageStack {
    pub scene_hash: String,
    pub options: StackOptions,
    pub levels: Vec<LevelInfo>,
    /// B_{-m} .. B_{m}, linear lux.
    pub images: Vec<SimulatedImage>,
    /// Number of level-0 disks whose centers project inside the wall extent.
    pub n_hex: usize,
    /// Value of the largest 16-bit code.
    pub scale: f64,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    version: u32,
    scene_hash: String,
    options: StackOptions,
    width: usize,
    height: usize,
    pixel_pitch: f64,
    n_hex: usize,
    scale: f64,
    levels: Vec<LevelInfo>,
    files: Vec<String>,
}

fn level_file(level: i32) -> String {
    format!("level_{level:+03}.png")
}

/// Tubes of the uniform layout for reference level `level`.
pub fn level_tubes(
    scene: &Scene,
    level: i32,
    opts: &StackOptions,
) -> Result<(Vec<TubeSpec>, usize)> {
    let r = level_disk_radius(level);
    let layout = hex_grid_layout_with_margin(scene, r, opts.layout_margin);
    let tilt = if level < 0 {
        max_tilt_angle(r, scene.shade_thickness_mm)?
    } else {
        0.0
    };
    let tubes = layout
        .centers
        .iter()
        .enumerate()
        .map(|(id, c)| {
            if level >= 0 {
                TubeSpec {
                    id,
                    kind: TubeKind::Straight,
                    lamp_disk_center: *c,
                    disk_radius: r,
                    tube_radius: R_MIN + level as f64 * DELTA_R,
                    tilt_angle: 0.0,
                    tilt_azimuth: 0.0,
                }
            } else {
                let azimuth = tube_rng(opts.seed, id as u64).gen::<f64>() * std::f64::consts::TAU;
                TubeSpec {
                    id,
                    kind: TubeKind::Tilted,
                    lamp_disk_center: *c,
                    disk_radius: r,
                    tube_radius: R_MIN,
                    tilt_angle: tilt,
                    tilt_azimuth: azimuth,
                }
            }
        })
        .collect();
    Ok((tubes, layout.n_hex))
}

/// Renders, smooths and monotonizes all `2m + 1` reference levels.
pub fn build_reference_stack(scene: &Scene, opts: &StackOptions) -> Result<ReferenceImageStack> {
    scene.validate()?;
    if opts.resolution < 16 {
        return Err(Error::InvalidArgument(
            "stack resolution must be at least 16".into(),
        ));
    }
    let emitters = sample_light(scene, scene.light_samples_n)?;
    let mut levels = Vec::new();
    let mut images = Vec::new();
    let mut n_hex = 0;
    for level in -LEVELS..=LEVELS {
        let (tubes, count) = level_tubes(scene, level, opts)?;
        if level == 0 {
            n_hex = count;
        }
        let index = TubeIndex::new(scene, &tubes);
        let raw = render(
            scene,
            &emitters,
            &index,
            &RenderOptions {
                resolution: opts.resolution,
                seed: opts.seed,
            },
        );
        let r = level_disk_radius(level);
        let spacing_mm = 2.0 * r * scene.wall_distance_mm / scene.metric_radius();
        let sigma_px = spacing_mm / raw.pixel_pitch;
        log::debug!(
            "reference level {level}: {} tubes, sigma {sigma_px:.2} px",
            tubes.len()
        );
        images.push(gaussian_blur(&raw, sigma_px));
        levels.push(LevelInfo {
            level,
            disk_radius: r,
            tube_radius: tubes.first().map_or(R_MIN, |t| t.tube_radius),
            tilted: level < 0,
            tilt_angle: tubes.first().map_or(0.0, |t| t.tilt_angle),
            tube_count: tubes.len(),
            sigma_px,
        });
    }
    let n_pix = images[0].values.len();
    let mut column = vec![0.0; images.len()];
    for p in 0..n_pix {
        for (k, img) in images.iter().enumerate() {
            column[k] = img.values[p];
        }
        let fixed = isotonic_non_decreasing(&column);
        for (k, img) in images.iter_mut().enumerate() {
            img.values[p] = fixed[k];
        }
    }
    let scale = images.iter().map(SimulatedImage::max).fold(0.0, f64::max);
    let mut stack = ReferenceImageStack {
        scene_hash: scene.hash(),
        options: *opts,
        levels,
        images,
        n_hex,
        scale,
    };
    stack.canonicalize();
    Ok(stack)
}

fn quantize(v: f64, scale: f64) -> u16 {
    if scale > 0.0 {
        (v / scale * 65535.0).round().clamp(0.0, 65535.0) as u16
    } else {
        0
    }
}

impl ReferenceImageStack {
    pub fn m(&self) -> i32 {
        (self.levels.len() as i32 - 1) / 2
    }

    /// Image of level `i` in `-m..=m`.
    pub fn level(&self, i: i32) -> &SimulatedImage {
        &self.images[(i + self.m()) as usize]
    }

    pub fn disk_radii(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.disk_radius).collect()
    }

    pub fn width(&self) -> usize {
        self.images[0].width
    }

    pub fn height(&self) -> usize {
        self.images[0].height
    }

    /// Rounds every value to the 16-bit cache grid so in-memory and reloaded stacks agree.
    fn canonicalize(&mut self) {
        let scale = self.scale;
        for img in &mut self.images {
            for v in &mut img.values {
                *v = quantize(*v, scale) as f64 / 65535.0 * scale;
            }
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let mut files = Vec::new();
        for (info, img) in self.levels.iter().zip(&self.images) {
            let name = level_file(info.level);
            let codes: Vec<u16> = img
                .values
                .iter()
                .map(|&v| quantize(v, self.scale))
                .collect();
            write_png16(&dir.join(&name), img.width, img.height, &codes)?;
            files.push(name);
        }
        let img = &self.images[0];
        let manifest = Manifest {
            version: STACK_CACHE_VERSION,
            scene_hash: self.scene_hash.clone(),
            options: self.options,
            width: img.width,
            height: img.height,
            pixel_pitch: img.pixel_pitch,
            n_hex: self.n_hex,
            scale: self.scale,
            levels: self.levels.clone(),
            files,
        };
        write_bytes(
            &dir.join(MANIFEST),
            serde_json::to_string_pretty(&manifest)?.as_bytes(),
        )
    }

    /// Loads a cached stack; `Ok(None)` when the cache is absent or was built for a
    /// different version, scene or options.
    pub fn load(
        dir: &Path,
        scene: &Scene,
        opts: &StackOptions,
    ) -> Result<Option<ReferenceImageStack>> {
        let path = dir.join(MANIFEST);
        if !path.exists() {
            return Ok(None);
        }
        let Ok(manifest) = serde_json::from_str::<Manifest>(&read_string(&path)?) else {
            return Ok(None);
        };
        if manifest.version != STACK_CACHE_VERSION
            || manifest.scene_hash != scene.hash()
            || manifest.options != *opts
        {
            return Ok(None);
        }
        let mut images = Vec::new();
        for name in &manifest.files {
            let file = dir.join(name);
            if !file.exists() {
                return Ok(None);
            }
            let (w, h, codes) = read_png16(&file)?;
            if (w, h) != (manifest.width, manifest.height) {
                return Ok(None);
            }
            images.push(SimulatedImage {
                width: w,
                height: h,
                pixel_pitch: manifest.pixel_pitch,
                values: codes
                    .iter()
                    .map(|&c| c as f64 / 65535.0 * manifest.scale)
                    .collect(),
            });
        }
        Ok(Some(ReferenceImageStack {
            scene_hash: manifest.scene_hash,
            options: manifest.options,
            levels: manifest.levels,
            images,
            n_hex: manifest.n_hex,
            scale: manifest.scale,
        }))
    }

    /// Loads from `dir` if a matching cache exists, otherwise builds and saves.
    pub fn load_or_build(
        dir: &Path,
        scene: &Scene,
        opts: &StackOptions,
    ) -> Result<ReferenceImageStack> {
        if let Some(s) = Self::load(dir, scene, opts)? {
            return Ok(s);
        }
        let s = build_reference_stack(scene, opts)?;
        s.save(dir)?;
        Ok(s)
    }
}
