use serde::{Deserialize, Serialize};

use super::plot::{line_plot, Series};
use crate::error::{Error, Result};
use crate::sim::gaussian_blur;

pub const BINS: usize = 256;
/// Smoothing applied before peak detection (bins).
pub const PEAK_SMOOTHING: f64 = 3.0;
/// Minimum peak prominence of the log-count histogram: a mode must stand at least twice as
/// tall as the saddle separating it from any taller mode.
pub const PEAK_LOG_PROMINENCE: f64 = std::f64::consts::LN_2;
/// Minimum smoothed peak height as a fraction of all pixels.
pub const PEAK_MIN_HEIGHT: f64 = 1e-4;

pub fn histogram(pixels: &[u8]) -> Vec<u64> {
    let mut h = vec![0u64; BINS];
    for &p in pixels {
        h[p as usize] += 1;
    }
    h
}

/// Earth mover's distance between two histograms (in gray levels), after normalizing both
/// to unit mass.
pub fn emd(a: &[u64], b: &[u64]) -> f64 {
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    if na == 0 || nb == 0 {
        return 0.0;
    }
    let (mut ca, mut cb, mut d) = (0.0, 0.0, 0.0);
    for k in 0..a.len().min(b.len()) {
        ca += a[k] as f64 / na as f64;
        cb += b[k] as f64 / nb as f64;
        d += (ca - cb).abs();
    }
    d
}

/// Local maxima of the smoothed histogram whose topographic prominence on a log scale
/// reaches `PEAK_LOG_PROMINENCE`, in increasing bin order. The log scale keeps a dominant
/// background mode from hiding smaller ones.
pub fn detect_peaks(h: &[u64]) -> Vec<usize> {
    let total: u64 = h.iter().sum();
    if total == 0 {
        return Vec::new();
    }
    let raw: Vec<f64> = h.iter().map(|&v| v as f64).collect();
    let smoothed = smooth(&raw, PEAK_SMOOTHING);
    let floor = PEAK_MIN_HEIGHT * total as f64;
    let s: Vec<f64> = smoothed.iter().map(|v| v.ln_1p()).collect();
    let n = s.len();
    let mut peaks = Vec::new();
    let mut i = 0;
    while i < n {
        // plateaus count once, at their first bin
        let mut j = i;
        while j + 1 < n && s[j + 1] == s[i] {
            j += 1;
        }
        let left_lower = i == 0 || s[i - 1] < s[i];
        let right_lower = j == n - 1 || s[j + 1] < s[i];
        if left_lower && right_lower && smoothed[i] >= floor {
            // base on each side: lowest value before reaching a higher bin; a side that
            // runs into the range boundary without dropping does not constrain the peak
            let mut k = i;
            let mut lmin = s[i];
            while k > 0 && s[k - 1] <= s[i] {
                k -= 1;
                lmin = lmin.min(s[k]);
            }
            let lbase = if i == 0 { f64::NEG_INFINITY } else { lmin };
            let mut k = j;
            let mut rmin = s[i];
            while k + 1 < n && s[k + 1] <= s[i] {
                k += 1;
                rmin = rmin.min(s[k]);
            }
            let rbase = if j == n - 1 { f64::NEG_INFINITY } else { rmin };
            let prominence = s[i] - lbase.max(rbase);
            if prominence >= PEAK_LOG_PROMINENCE {
                peaks.push(i);
            }
        }
        i = j + 1;
    }
    peaks
}

fn smooth(v: &[f64], sigma: f64) -> Vec<f64> {
    let img = crate::sim::SimulatedImage {
        width: v.len(),
        height: 1,
        pixel_pitch: 1.0,
        values: v.to_vec(),
    };
    gaussian_blur(&img, sigma).values
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramReport {
    pub target: Vec<u64>,
    pub simulated: Vec<u64>,
    pub emd: f64,
    pub target_peaks: Vec<usize>,
    pub simulated_peaks: Vec<usize>,
}

impl HistogramReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin,target,simulated\n");
        for k in 0..BINS {
            s.push_str(&format!("{k},{},{}\n", self.target[k], self.simulated[k]));
        }
        s
    }

    pub fn to_svg(&self) -> String {
        let norm = |h: &[u64]| {
            let n = h.iter().sum::<u64>().max(1) as f64;
            h.iter()
                .enumerate()
                .map(|(k, &v)| (k as f64, v as f64 / n))
                .collect()
        };
        line_plot(
            "Gray-level histograms",
            "gray level",
            "fraction of pixels",
            &[
                Series {
                    name: "target",
                    color: "#d62728",
                    points: norm(&self.target),
                },
                Series {
                    name: "simulated",
                    color: "#1f77b4",
                    points: norm(&self.simulated),
                },
            ],
        )
    }
}

/// Target as displayed on the wall raster: resampled, linear, then gamma encoded.
pub fn display_target(img: &crate::io::GrayImage, raster: crate::sim::Raster) -> Vec<u8> {
    let a = crate::density::align_target(img, raster);
    a.linear
        .iter()
        .map(|v| (255.0 * v.powf(1.0 / crate::density::GAMMA)).round() as u8)
        .collect()
}

pub fn histogram_compare(target: &[u8], simulated: &[u8]) -> Result<HistogramReport> {
    if target.len() != simulated.len() {
        return Err(Error::InvalidArgument(format!(
            "images differ in size ({} vs {} pixels)",
            target.len(),
            simulated.len()
        )));
    }
    let t = histogram(target);
    let s = histogram(simulated);
    Ok(HistogramReport {
        emd: emd(&t, &s),
        target_peaks: detect_peaks(&t),
        simulated_peaks: detect_peaks(&s),
        target: t,
        simulated: s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_images_have_zero_distance() {
        let img: Vec<u8> = (0..1000).map(|i| (i * 7 % 256) as u8).collect();
        let r = histogram_compare(&img, &img).unwrap();
        assert_eq!(r.emd, 0.0);
        assert_eq!(r.target.iter().sum::<u64>(), 1000);
    }

    #[test]
    fn four_separated_modes() {
        let mut img = Vec::new();
        for (v, n) in [(3u8, 500), (85, 300), (170, 300), (250, 300)] {
            for k in 0..n {
                img.push(v.saturating_add((k % 9) as u8).saturating_sub(4));
            }
        }
        assert_eq!(detect_peaks(&histogram(&img)).len(), 4);
    }

    #[test]
    fn small_modes_survive_a_dominant_background() {
        let mut h = vec![0u64; BINS];
        h[0] = 200_000;
        for (c, n) in [(60usize, 3000u64), (150, 1500), (230, 400)] {
            for d in 0..8 {
                h[c + d] = n / 8;
            }
        }
        assert_eq!(detect_peaks(&h).len(), 4);
    }

    #[test]
    fn ramp_target_has_four_modes() {
        let img = crate::eval::targets::three_step_ramp(256, 1000.0);
        let raster = crate::sim::Raster::for_scene(&crate::scene::Scene::default(), 256);
        assert_eq!(
            detect_peaks(&histogram(&display_target(&img, raster))),
            vec![0, 85, 170, 255]
        );
    }

    #[test]
    fn mismatched_sizes_rejected() {
        assert!(histogram_compare(&[0, 1], &[0]).is_err());
    }

    proptest! {
        #[test]
        fn emd_of_shift_equals_shift(vals in proptest::collection::vec(0u8..200, 1..300), k in 0u8..56) {
            let shifted: Vec<u8> = vals.iter().map(|v| v + k).collect();
            let d = emd(&histogram(&vals), &histogram(&shifted));
            prop_assert!((d - k as f64).abs() < 1e-9);
        }

        #[test]
        fn bin_sums_equal_pixel_count(vals in proptest::collection::vec(any::<u8>(), 0..500)) {
            prop_assert_eq!(histogram(&vals).iter().sum::<u64>(), vals.len() as u64);
        }
    }
}
