use crate::types::GrayImage;

/// Normalized 1-D Gaussian truncated at `ceil(4 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    assert!(sigma > 0.0, "sigma must be positive");
    let radius = (4.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Half-sample symmetric reflection (`d c b a | a b c d | d c b a`).
#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

fn convolve_rows(src: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                acc += kv * row[reflect(x as isize + k as isize - r, w)];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

fn convolve_cols(src: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for (k, &kv) in kernel.iter().enumerate() {
            let sy = reflect(y as isize + k as isize - r, h);
            let src_row = &src[sy * w..(sy + 1) * w];
            let dst_row = &mut out[y * w..(y + 1) * w];
            for (d, s) in dst_row.iter_mut().zip(src_row) {
                *d += kv * s;
            }
        }
    }
    out
}

/// Separable Gaussian blur with reflect borders.
///
/// # Panics
///
/// If `sigma` is not strictly positive.
pub fn gaussian_blur(img: &GrayImage, sigma: f64) -> GrayImage {
    let kernel = gaussian_kernel(sigma);
    let (w, h) = (img.width(), img.height());
    let tmp = convolve_rows(img.pixels(), w, h, &kernel);
    let out = convolve_cols(&tmp, w, h, &kernel);
    GrayImage::from_raw_clamped(w, h, out, img.nm_per_pixel())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kernel_sums_to_one() {
        for sigma in [0.3, 1.0, 2.5] {
            let k = gaussian_kernel(sigma);
            assert_eq!(k.len(), 2 * (4.0f64 * sigma).ceil() as usize + 1);
            assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn reflect_indices() {
        let got: Vec<usize> = (-4..8).map(|i| reflect(i, 4)).collect();
        assert_eq!(got, vec![3, 2, 1, 0, 0, 1, 2, 3, 3, 2, 1, 0]);
        assert_eq!(reflect(-3, 1), 0);
    }

    #[test]
    fn constant_is_preserved() {
        let img = GrayImage::filled(13, 7, 0.37).unwrap();
        let out = gaussian_blur(&img, 1.0);
        for v in out.pixels() {
            assert!((v - 0.37).abs() < 1e-12);
        }
    }

    #[test]
    fn impulse_response_is_kernel_outer_product() {
        let n = 31;
        let c = 15;
        let img = GrayImage::from_fn(n, n, |x, y| if x == c && y == c { 1.0 } else { 0.0 }).unwrap();
        let sigma = 1.5;
        let k = gaussian_kernel(sigma);
        let r = k.len() / 2;
        let out = gaussian_blur(&img, sigma);
        for y in 0..n {
            for x in 0..n {
                let dx = x as isize - c as isize + r as isize;
                let dy = y as isize - c as isize + r as isize;
                let expected = if (0..k.len() as isize).contains(&dx) && (0..k.len() as isize).contains(&dy) {
                    k[dy as usize] * k[dx as usize]
                } else {
                    0.0
                };
                assert!((out.get(x, y) - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn smoothing_reduces_noise_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let img = GrayImage::from_fn(64, 64, |_, _| rng.random::<f64>()).unwrap();
        let out = gaussian_blur(&img, 1.0);
        assert!(out.variance() < img.variance());
    }
}
