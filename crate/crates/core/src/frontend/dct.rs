use std::f64::consts::PI;

use super::image::MfccImage;
use super::stft::Spectrogram;
use crate::error::{Error, Result};

pub const LOG_FLOOR: f64 = 1e-10;

/// Orthonormal DCT-II basis, `n × n` row-major (row = coefficient).
pub fn dct2_matrix(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for k in 0..n {
        let scale = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
        for i in 0..n {
            m[k * n + i] = scale * (PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos();
        }
    }
    m
}

/// Per-frame DCT of the log-Mel energies, keeping the first `n_coeffs`.
/// Rows of the image are coefficients, columns are frames.
pub fn dct_compress(mel: &Spectrogram, n_coeffs: usize) -> Result<MfccImage> {
    let n = mel.n_bins;
    if n_coeffs == 0 || n_coeffs > n {
        return Err(Error::param(format!(
            "need 1 <= n_coeffs <= n_mels, got {n_coeffs} with {n} Mel channels"
        )));
    }
    let basis = dct2_matrix(n);
    let width = mel.n_frames;
    let mut pixels = vec![0.0; n_coeffs * width];
    let mut logs = vec![0.0; n];
    for t in 0..width {
        for (l, &x) in logs.iter_mut().zip(mel.frame(t)) {
            *l = (x + LOG_FLOOR).ln();
        }
        for k in 0..n_coeffs {
            let row = &basis[k * n..(k + 1) * n];
            pixels[k * width + t] = row.iter().zip(&logs).map(|(a, b)| a * b).sum();
        }
    }
    Ok(MfccImage::new(pixels, width, n_coeffs))
}
