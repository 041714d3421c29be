use super::SimulatedImage;

fn kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as usize;
    (0..=2 * radius)
        .map(|i| {
            let x = i as f64 - radius as f64;
            (-0.5 * x * x / (sigma * sigma)).exp()
        })
        .collect()
}

/// Separable Gaussian blur with `sigma` in pixels. Weights are renormalized at the raster
/// border so edges are not darkened.
pub fn gaussian_blur(img: &SimulatedImage, sigma: f64) -> SimulatedImage {
    if !(sigma > 0.0) {
        return img.clone();
    }
    let k = kernel(sigma);
    let r = (k.len() / 2) as isize;
    let (w, h) = (img.width, img.height);
    let mut tmp = vec![0.0; w * h];
    for row in 0..h {
        for col in 0..w {
            let (mut acc, mut norm) = (0.0, 0.0);
            for (j, kv) in k.iter().enumerate() {
                let c = col as isize + j as isize - r;
                if c >= 0 && (c as usize) < w {
                    acc += kv * img.values[row * w + c as usize];
                    norm += kv;
                }
            }
            tmp[row * w + col] = acc / norm;
        }
    }
    let mut out = img.clone();
    for row in 0..h {
        for col in 0..w {
            let (mut acc, mut norm) = (0.0, 0.0);
            for (j, kv) in k.iter().enumerate() {
                let rr = row as isize + j as isize - r;
                if rr >= 0 && (rr as usize) < h {
                    acc += kv * tmp[rr as usize * w + col];
                    norm += kv;
                }
            }
            out.values[row * w + col] = acc / norm;
        }
    }
    out
}

/// Least-squares non-decreasing fit (pool adjacent violators), equal weights.
pub fn isotonic_non_decreasing(values: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (m2, n2) = blocks[blocks.len() - 1];
            let (m1, n1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.pop();
            let n = n1 + n2;
            *blocks.last_mut().unwrap() = ((m1 * n1 as f64 + m2 * n2 as f64) / n as f64, n);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(m, n)| std::iter::repeat(m).take(n))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn blur_preserves_constant() {
        let img = SimulatedImage {
            width: 20,
            height: 10,
            pixel_pitch: 1.0,
            values: vec![2.5; 200],
        };
        let b = gaussian_blur(&img, 3.0);
        assert!(b.values.iter().all(|v| (v - 2.5).abs() < 1e-12));
    }

    #[test]
    fn blur_spreads_impulse() {
        let mut img = SimulatedImage::zeros(41, 41, 1.0);
        img.values[20 * 41 + 20] = 1.0;
        let b = gaussian_blur(&img, 2.0);
        let total: f64 = b.values.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        // second moment along x equals sigma^2 (discrete kernel, truncated at 3 sigma)
        let var: f64 = (0..41)
            .flat_map(|r| (0..41).map(move |c| (r, c)))
            .map(|(r, c)| b.values[r * 41 + c] * (c as f64 - 20.0).powi(2))
            .sum();
        assert!((var - 4.0).abs() < 0.1, "{var}");
    }

    #[test]
    fn pava_examples() {
        assert_eq!(
            isotonic_non_decreasing(&[1.0, 3.0, 2.0, 4.0]),
            vec![1.0, 2.5, 2.5, 4.0]
        );
        assert_eq!(
            isotonic_non_decreasing(&[3.0, 2.0, 1.0]),
            vec![2.0, 2.0, 2.0]
        );
        assert_eq!(isotonic_non_decreasing(&[0.0, 1.0]), vec![0.0, 1.0]);
    }

    proptest! {
        #[test]
        fn pava_monotone_and_mean_preserving(v in proptest::collection::vec(-10.0..10.0f64, 1..30)) {
            let f = isotonic_non_decreasing(&v);
            prop_assert_eq!(f.len(), v.len());
            prop_assert!(f.windows(2).all(|w| w[0] <= w[1] + 1e-12));
            let s0: f64 = v.iter().sum();
            let s1: f64 = f.iter().sum();
            prop_assert!((s0 - s1).abs() < 1e-9);
        }
    }
}
