//! Pipeline stages with content-addressed manifests.
//!
//! Every stage records the hashes of its inputs (configuration slices and the outputs of
//! upstream stages) and of the files it wrote in `manifests/<stage>.json`. A stage whose
//! recorded inputs match and whose outputs are intact is skipped.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use lampshade::ccvt::{tessellation_svg, DiskLayout};
use lampshade::density::{build_density, DensityField, DensityStats};
use lampshade::design::{
    disk_inputs, pack, simulate, synthesize_tubes, tubes_from_jsonl, tubes_to_jsonl, PackStats,
};
use lampshade::eval::histogram::display_target;
use lampshade::eval::{
    contrast_response, histogram_compare, tilt, tilt_curve, EvalReport, TableStats,
};
use lampshade::io::{
    file_hash, read_png8, read_string, sha256_hex, write_bytes, write_png8, GrayImage,
};
use lampshade::mesh::{audit, export_obj, export_stl, mesh_shell, MeshOptions};
use lampshade::sim::{
    build_reference_stack, tone_map, ReferenceImageStack, StackOptions, STACK_CACHE_VERSION,
};
use lampshade::tubes::validate_layout;
use lampshade::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;

pub const STAGES: [&str; 7] = [
    "refs", "density", "pack", "tubes", "mesh", "simulate", "eval",
];

/// The reference stack has its own seed so that changing the design seed keeps it cached.
pub const REFS_SEED: u64 = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    stage: String,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageOutcome {
    pub stage: &'static str,
    pub skipped: bool,
    /// Fabrication-constraint violations and failed mesh checks.
    pub violations: usize,
}

pub struct Runner {
    cfg: PipelineConfig,
    out: PathBuf,
    force: bool,
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("config values serialize")
}

fn pretty<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s.into_bytes())
}

/// Files under `dir`, relative to `root`, sorted.
fn list_files(root: &Path, dir: &Path) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for e in entries {
        let p = e.map_err(|e| Error::io(dir, e))?.path();
        if p.is_file() {
            out.push(
                p.strip_prefix(root)
                    .expect("listed under root")
                    .to_string_lossy()
                    .replace('\\', "/"),
            );
        }
    }
    out.sort();
    Ok(out)
}

impl Runner {
    pub fn new(cfg: PipelineConfig, force: bool) -> Runner {
        let out = cfg.out.clone();
        Runner { cfg, out, force }
    }

    fn manifest_path(&self, stage: &str) -> PathBuf {
        self.out.join("manifests").join(format!("{stage}.json"))
    }

    fn read_manifest(&self, stage: &str) -> Option<Manifest> {
        let text = std::fs::read_to_string(self.manifest_path(stage)).ok()?;
        serde_json::from_str(&text).ok()
    }

    fn outputs_intact(&self, m: &Manifest) -> Result<bool> {
        for (f, h) in &m.outputs {
            let p = self.out.join(f);
            if !p.exists() || file_hash(&p)? != *h {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Digest of an upstream stage's outputs, after checking they are present and unchanged.
    fn upstream(&self, stage: &str) -> Result<String> {
        let m = self
            .read_manifest(stage)
            .ok_or_else(|| Error::MissingArtifact {
                path: self.manifest_path(stage),
                stage: stage.into(),
            })?;
        for f in m.outputs.keys() {
            let p = self.out.join(f);
            if !p.exists() {
                return Err(Error::MissingArtifact {
                    path: p,
                    stage: stage.into(),
                });
            }
        }
        if !self.force && !self.outputs_intact(&m)? {
            return Err(Error::StaleCache(stage.into()));
        }
        Ok(sha256_hex(json(&m.outputs).as_bytes()))
    }

    fn fresh(&self, stage: &str, inputs: &BTreeMap<String, String>) -> Result<bool> {
        if self.force {
            return Ok(false);
        }
        match self.read_manifest(stage) {
            Some(m) if m.inputs == *inputs => self.outputs_intact(&m),
            _ => Ok(false),
        }
    }

    fn finish(
        &self,
        stage: &str,
        inputs: BTreeMap<String, String>,
        files: &[String],
    ) -> Result<()> {
        let mut outputs = BTreeMap::new();
        for f in files {
            outputs.insert(f.clone(), file_hash(&self.out.join(f))?);
        }
        let m = Manifest {
            stage: stage.into(),
            inputs,
            outputs,
        };
        write_bytes(&self.manifest_path(stage), &pretty(&m)?)
    }

    fn stack_options(&self) -> StackOptions {
        StackOptions {
            resolution: self.cfg.resolution,
            seed: REFS_SEED,
            layout_margin: self.cfg.stack_margin_mm,
        }
    }

    fn load_stack(&self) -> Result<ReferenceImageStack> {
        let dir = self.out.join("refs");
        ReferenceImageStack::load(&dir, &self.cfg.scene, &self.stack_options())?.ok_or(
            Error::MissingArtifact {
                path: dir,
                stage: "refs".into(),
            },
        )
    }

    fn target(&self) -> Result<GrayImage> {
        read_png8(self.cfg.target_path()?)
    }

    fn field(&self, stack: &ReferenceImageStack) -> Result<DensityField> {
        build_density(
            &self.cfg.scene,
            stack,
            &self.target()?,
            self.cfg.pack.conversion,
        )
    }

    pub fn run(&self, stage: &str) -> Result<StageOutcome> {
        let name = STAGES
            .iter()
            .find(|s| **s == stage)
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown stage {stage}")))?;
        let inputs = self.inputs(name)?;
        if self.fresh(name, &inputs)? {
            log::info!("{name}: up to date");
            return Ok(StageOutcome {
                stage: name,
                skipped: true,
                violations: self.recorded_violations(name)?,
            });
        }
        log::info!("{name}: running");
        let (files, violations) = match name {
            "refs" => self.refs()?,
            "density" => self.density()?,
            "pack" => self.pack()?,
            "tubes" => self.tubes()?,
            "mesh" => self.mesh()?,
            "simulate" => self.simulate()?,
            _ => self.eval()?,
        };
        self.finish(name, inputs, &files)?;
        Ok(StageOutcome {
            stage: name,
            skipped: false,
            violations,
        })
    }

    pub fn pipeline(&self) -> Result<Vec<StageOutcome>> {
        STAGES.iter().map(|s| self.run(s)).collect()
    }

    fn inputs(&self, stage: &str) -> Result<BTreeMap<String, String>> {
        let c = &self.cfg;
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        match stage {
            "refs" => {
                put("scene", c.scene.hash());
                put("stack", json(&self.stack_options()));
                put("version", STACK_CACHE_VERSION.to_string());
            }
            "density" => {
                put("refs", self.upstream("refs")?);
                put("target", file_hash(c.target_path()?)?);
                put("conversion", json(&c.pack.conversion));
            }
            "pack" => {
                put("density", self.upstream("density")?);
                put("search", json(&c.pack.search));
                put("seed", c.seed.to_string());
            }
            "tubes" => {
                put("pack", self.upstream("pack")?);
                put("seed", c.seed.to_string());
                put("tilt_jitter", json(&c.pack.tilt_jitter));
            }
            "mesh" => {
                put("tubes", self.upstream("tubes")?);
                put("mesh", json(&self.mesh_options()));
                put("obj", c.export_obj.to_string());
            }
            "simulate" => {
                put("tubes", self.upstream("tubes")?);
                put("resolution", c.resolution.to_string());
                put("seed", c.seed.to_string());
            }
            _ => {
                put("density", self.upstream("density")?);
                put("pack", self.upstream("pack")?);
                put("simulate", self.upstream("simulate")?);
                put("eval", json(&c.eval));
            }
        }
        Ok(m)
    }

    fn recorded_violations(&self, stage: &str) -> Result<usize> {
        let file = match stage {
            "tubes" => "validation.json",
            "mesh" => "mesh_audit.json",
            _ => return Ok(0),
        };
        let v: serde_json::Value = serde_json::from_str(&read_string(&self.out.join(file))?)?;
        Ok(match stage {
            "tubes" => v["violations"].as_array().map_or(0, Vec::len),
            _ => usize::from(v["ok"] != serde_json::Value::Bool(true)),
        })
    }

    fn mesh_options(&self) -> MeshOptions {
        MeshOptions {
            voxel_size: self.cfg.voxel,
            aperture_radius: self.cfg.aperture_radius_mm,
        }
    }

    fn refs(&self) -> Result<(Vec<String>, usize)> {
        let dir = self.out.join("refs");
        if dir.exists() {
            std::fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        let stack = build_reference_stack(&self.cfg.scene, &self.stack_options())?;
        stack.save(&dir)?;
        Ok((list_files(&self.out, &dir)?, 0))
    }

    fn density(&self) -> Result<(Vec<String>, usize)> {
        let field = self.field(&self.load_stack()?)?;
        field.export(
            &self.out.join("density.png"),
            &self.out.join("density.json"),
        )?;
        Ok((vec!["density.png".into(), "density.json".into()], 0))
    }

    fn pack(&self) -> Result<(Vec<String>, usize)> {
        let stack = self.load_stack()?;
        let field = self.field(&stack)?;
        let p = pack(&self.cfg.scene, &field, &stack, &self.cfg.design_options())?;
        log::info!(
            "pack: {} disks from {} initial, {:.1}% correct before repair",
            p.stats.final_n,
            p.stats.initial_n,
            100.0 * p.stats.correct_fraction
        );
        write_bytes(
            &self.out.join("layout.jsonl"),
            p.layout.to_jsonl().as_bytes(),
        )?;
        write_bytes(&self.out.join("pack.json"), &pretty(&p.stats)?)?;
        write_bytes(
            &self.out.join("tessellation.svg"),
            tessellation_svg(&p.cells, &p.layout, field.domain()).as_bytes(),
        )?;
        Ok((
            vec![
                "layout.jsonl".into(),
                "pack.json".into(),
                "tessellation.svg".into(),
            ],
            0,
        ))
    }

    fn tubes(&self) -> Result<(Vec<String>, usize)> {
        let stack = self.load_stack()?;
        let field = self.field(&stack)?;
        let layout = DiskLayout::from_jsonl(&read_string(&self.out.join("layout.jsonl"))?)?;
        let disks = disk_inputs(&self.cfg.scene, &field, &layout);
        let (tubes, geoms) = synthesize_tubes(
            &self.cfg.scene,
            &disks,
            self.cfg.seed,
            self.cfg.pack.tilt_jitter,
        )?;
        let report = validate_layout(&self.cfg.scene, &tubes, &geoms);
        log::info!(
            "tubes: {} tubes, {} violations, min gap {:.3} mm",
            tubes.len(),
            report.violations.len(),
            report.min_gap_mm
        );
        write_bytes(
            &self.out.join("tubes.jsonl"),
            tubes_to_jsonl(&tubes)?.as_bytes(),
        )?;
        write_bytes(&self.out.join("validation.json"), &pretty(&report)?)?;
        Ok((
            vec!["tubes.jsonl".into(), "validation.json".into()],
            report.violations.len(),
        ))
    }

    fn read_tubes(&self) -> Result<Vec<lampshade::TubeSpec>> {
        tubes_from_jsonl(&read_string(&self.out.join("tubes.jsonl"))?)
    }

    fn mesh(&self) -> Result<(Vec<String>, usize)> {
        let tubes = self.read_tubes()?;
        let mesh = mesh_shell(&self.cfg.scene, &tubes, &self.mesh_options())?;
        let report = audit(&mesh, true);
        log::info!(
            "mesh: {} triangles, audit {}",
            report.triangles,
            if report.ok() { "ok" } else { "FAILED" }
        );
        let mut files = vec!["lamp.stl".to_string(), "mesh_audit.json".to_string()];
        export_stl(&mesh, &self.out.join("lamp.stl"))?;
        let mut value = serde_json::to_value(&report)?;
        value["ok"] = serde_json::Value::Bool(report.ok());
        write_bytes(&self.out.join("mesh_audit.json"), &pretty(&value)?)?;
        if self.cfg.export_obj {
            export_obj(&mesh, &self.out.join("lamp.obj"))?;
            files.push("lamp.obj".into());
        }
        Ok((files, usize::from(!report.ok())))
    }

    fn simulate(&self) -> Result<(Vec<String>, usize)> {
        let tubes = self.read_tubes()?;
        let img = simulate(&self.cfg.scene, &tubes, self.cfg.resolution, self.cfg.seed)?;
        let (pixels, all_zero) = tone_map(&img, lampshade::density::GAMMA);
        if all_zero {
            log::warn!("simulate: the wall receives no light");
        }
        write_png8(
            &self.out.join("simulated.png"),
            &GrayImage::new(img.width, img.height, pixels),
        )?;
        let info = serde_json::json!({ "max_lux": img.max(), "all_zero": all_zero, "width": img.width, "height": img.height });
        write_bytes(&self.out.join("simulated.json"), &pretty(&info)?)?;
        Ok((vec!["simulated.png".into(), "simulated.json".into()], 0))
    }

    fn eval(&self) -> Result<(Vec<String>, usize)> {
        let c = &self.cfg;
        let stats: PackStats = serde_json::from_str(&read_string(&self.out.join("pack.json"))?)?;
        let density: DensityStats =
            serde_json::from_str(&read_string(&self.out.join("density.json"))?)?;
        let sim = read_png8(&self.out.join("simulated.png"))?;
        let stack = self.load_stack()?;
        let target = display_target(&self.target()?, stack.images[0].raster());
        let mut report = EvalReport {
            table: Some(TableStats::new(&stats, &density)),
            histogram: Some(histogram_compare(&target, &sim.pixels)?),
            ..Default::default()
        };
        if c.eval.tilt {
            let angles = tilt::default_tilt_angles(&c.scene, c.eval.tilt_samples)?;
            report.tilt = Some(tilt_curve(&c.scene, &angles, c.resolution, c.seed)?);
        }
        if c.eval.contrast {
            report.contrast = Some(contrast_response(
                &c.scene,
                &stack,
                &c.eval.contrast_cycles,
                c.eval.contrast_radius_mm,
                c.eval.contrast_samples,
                &c.design_options(),
            )?);
        }
        let dir = self.out.join("eval");
        if dir.exists() {
            std::fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        report.write(&dir)?;
        Ok((list_files(&self.out, &dir)?, 0))
    }
}
