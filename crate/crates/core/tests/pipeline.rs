use std::sync::OnceLock;

use lampshade::ccvt::{CcvtOptions, PackOptions};
use lampshade::density::build_density;
use lampshade::design::{design, pack, simulate, DesignOptions};
use lampshade::io::GrayImage;
use lampshade::mesh::{audit, export_stl, mesh_shell, read_stl, MeshOptions};
use lampshade::sim::{build_reference_stack, ReferenceImageStack, StackOptions};
use lampshade::Scene;

const RES: usize = 64;

fn stack() -> &'static ReferenceImageStack {
    static STACK: OnceLock<ReferenceImageStack> = OnceLock::new();
    STACK.get_or_init(|| {
        let opts = StackOptions {
            resolution: RES,
            ..Default::default()
        };
        build_reference_stack(&Scene::default(), &opts).unwrap()
    })
}

fn quick() -> DesignOptions {
    DesignOptions {
        pack: PackOptions {
            max_runs: 2,
            ccvt: CcvtOptions {
                max_iterations: 40,
                ..Default::default()
            },
            ..Default::default()
        },
        seed: 3,
        ..Default::default()
    }
}

/// Disk of radius `r` pixels around the center with a left-to-right ramp from `lo` to `hi`.
fn ramp_disk(r: f64, lo: f64, hi: f64) -> GrayImage {
    let mut px = vec![0u8; RES * RES];
    for row in 0..RES {
        for col in 0..RES {
            let (x, y) = (col as f64 - 31.5, row as f64 - 31.5);
            if x.hypot(y) <= r {
                px[row * RES + col] = (lo + (hi - lo) * (x + r) / (2.0 * r)).round() as u8;
            }
        }
    }
    GrayImage::new(RES, RES, px)
}

#[test]
fn small_design_is_valid_and_printable() {
    let scene = Scene::default();
    let d = design(&scene, stack(), &ramp_disk(8.0, 60.0, 220.0), &quick()).unwrap();
    assert!(d.validation.ok(), "{:?}", d.validation.violations.first());
    assert_eq!(d.tubes.len(), d.stats.final_n);
    assert!(d.stats.final_n <= d.stats.searched_n);
    assert!((0.0..=1.0).contains(&d.stats.final_correct_fraction));

    let mesh = mesh_shell(
        &scene,
        &d.tubes,
        &MeshOptions {
            voxel_size: 0.2,
            ..Default::default()
        },
    )
    .unwrap();
    let report = audit(&mesh, true);
    assert!(report.ok(), "{report:?}");
    assert_eq!(report.tunnels, d.tubes.len() + 1);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lamp.stl");
    export_stl(&mesh, &path).unwrap();
    assert_eq!(
        read_stl(&path).unwrap().triangles.len(),
        mesh.triangles.len()
    );
}

#[test]
fn brighter_target_side_stays_brighter() {
    let scene = Scene::default();
    let d = design(&scene, stack(), &ramp_disk(20.0, 40.0, 230.0), &quick()).unwrap();
    let img = simulate(&scene, &d.tubes, RES, 3).unwrap();
    let raster = img.raster();
    let (mut left, mut right) = (0.0, 0.0);
    for row in 0..RES {
        for col in 0..RES {
            let w = raster.pixel_center(col, row);
            let v = img.values[row * RES + col];
            if w.x.hypot(w.y) < 150.0 {
                if w.x < -30.0 {
                    left += v;
                } else if w.x > 30.0 {
                    right += v;
                }
            }
        }
    }
    assert!(right > 1.2 * left, "left {left}, right {right}");
}

#[test]
fn packing_is_reproducible_per_seed() {
    let scene = Scene::default();
    let img = ramp_disk(8.0, 60.0, 220.0);
    let field = build_density(&scene, stack(), &img, Default::default()).unwrap();
    let a = pack(&scene, &field, stack(), &quick()).unwrap();
    let b = pack(&scene, &field, stack(), &quick()).unwrap();
    assert_eq!(a.layout, b.layout);
    let other = pack(
        &scene,
        &field,
        stack(),
        &DesignOptions { seed: 4, ..quick() },
    )
    .unwrap();
    assert_ne!(a.layout, other.layout);
}
