use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::clip::AudioClip;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    #[default]
    Hann,
    Rectangular,
}

impl Window {
    /// Periodic window coefficients of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

/// Frames × bins grid of non-negative values, row-major by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub magnitudes: Vec<f64>,
    pub n_frames: usize,
    pub n_bins: usize,
    pub frame_len: usize,
    pub hop: usize,
    pub sample_rate: u32,
}

impl Spectrogram {
    pub fn frame(&self, t: usize) -> &[f64] {
        &self.magnitudes[t * self.n_bins..(t + 1) * self.n_bins]
    }

    pub fn frame_len_ms(&self) -> f64 {
        self.frame_len as f64 * 1000.0 / self.sample_rate as f64
    }

    pub fn hop_ms(&self) -> f64 {
        self.hop as f64 * 1000.0 / self.sample_rate as f64
    }

    /// Centre frequency of linear bin `k` in Hz.
    pub fn bin_hz(&self, k: usize) -> f64 {
        k as f64 * self.sample_rate as f64 / self.frame_len as f64
    }
}

/// Number of frames for a clip of `n` samples.
pub fn frame_count(n: usize, frame_len: usize, hop: usize) -> usize {
    if frame_len > n || hop == 0 {
        0
    } else {
        (n - frame_len) / hop + 1
    }
}

/// Full complex DFT of a real signal.
pub fn dft_core(signal: &[f64]) -> Vec<Complex<f64>> {
    let mut buf: Vec<Complex<f64>> = signal.iter().map(|&x| Complex::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

pub fn ms_to_samples(ms: f64, sample_rate: u32) -> usize {
    (ms * sample_rate as f64 / 1000.0).round() as usize
}

/// Magnitude STFT with frame and overlap given in milliseconds.
pub fn stft(clip: &AudioClip, frame_len_ms: f64, overlap_ms: f64) -> Result<Spectrogram> {
    if !(frame_len_ms > overlap_ms && overlap_ms > 0.0) {
        return Err(Error::param(format!(
            "need frame_len > overlap > 0, got {frame_len_ms} ms / {overlap_ms} ms"
        )));
    }
    let frame = ms_to_samples(frame_len_ms, clip.sample_rate);
    let hop = frame - ms_to_samples(overlap_ms, clip.sample_rate);
    stft_samples(clip, frame, hop, Window::Hann)
}

pub fn stft_samples(clip: &AudioClip, frame_len: usize, hop: usize, window: Window) -> Result<Spectrogram> {
    if frame_len == 0 || hop == 0 {
        return Err(Error::param("frame length and hop must be positive"));
    }
    if frame_len > clip.samples.len() {
        return Err(Error::param(format!(
            "frame of {frame_len} samples longer than clip of {}",
            clip.samples.len()
        )));
    }
    let n_frames = frame_count(clip.samples.len(), frame_len, hop);
    let n_bins = frame_len / 2 + 1;
    let win = window.coefficients(frame_len);
    let fft = FftPlanner::new().plan_fft_forward(frame_len);
    let mut buf = vec![Complex::new(0.0, 0.0); frame_len];
    let mut magnitudes = Vec::with_capacity(n_frames * n_bins);
    for t in 0..n_frames {
        let start = t * hop;
        for (slot, (x, w)) in buf
            .iter_mut()
            .zip(clip.samples[start..start + frame_len].iter().zip(&win))
        {
            *slot = Complex::new(x * w, 0.0);
        }
        fft.process(&mut buf);
        magnitudes.extend(buf[..n_bins].iter().map(|c| c.norm()));
    }
    Ok(Spectrogram {
        magnitudes,
        n_frames,
        n_bins,
        frame_len,
        hop,
        sample_rate: clip.sample_rate,
    })
}
