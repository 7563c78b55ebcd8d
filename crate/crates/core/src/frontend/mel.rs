use super::stft::Spectrogram;
use crate::error::{Error, Result};

pub const F_MIN_HZ: f64 = 20.0;
pub const F_MAX_HZ: f64 = 8000.0;
pub const N_MELS: usize = 26;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters with centres equally spaced on the Mel scale, each
/// normalized to unit weight sum.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    /// (first bin, weights) per filter.
    filters: Vec<(usize, Vec<f64>)>,
    n_bins: usize,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, n_bins: usize, bin_hz: f64, f_min: f64, f_max: f64) -> Result<Self> {
        if n_mels < 2 {
            return Err(Error::param("need at least two Mel channels"));
        }
        if n_mels > n_bins {
            return Err(Error::param(format!(
                "{n_mels} Mel channels exceed {n_bins} spectrogram bins"
            )));
        }
        if !(f_max > f_min && f_min >= 0.0) {
            return Err(Error::param("Mel band must satisfy 0 <= f_min < f_max"));
        }
        let (lo, hi) = (hz_to_mel(f_min), hz_to_mel(f_max));
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64))
            .collect();
        let filters = (0..n_mels)
            .map(|m| {
                let (left, centre, right) = (edges[m], edges[m + 1], edges[m + 2]);
                let first = (left / bin_hz).floor().max(0.0) as usize;
                let last = ((right / bin_hz).ceil() as usize).min(n_bins - 1);
                let mut weights: Vec<f64> = (first..=last)
                    .map(|k| {
                        let f = k as f64 * bin_hz;
                        if f <= left || f >= right {
                            0.0
                        } else if f <= centre {
                            (f - left) / (centre - left)
                        } else {
                            (right - f) / (right - centre)
                        }
                    })
                    .collect();
                let sum: f64 = weights.iter().sum();
                if sum > 0.0 {
                    weights.iter_mut().for_each(|w| *w /= sum);
                    (first, weights)
                } else {
                    // narrower than one bin: take the nearest bin
                    let k = ((centre / bin_hz).round() as usize).min(n_bins - 1);
                    (k, vec![1.0])
                }
            })
            .collect();
        Ok(Self { filters, n_bins })
    }

    pub fn n_mels(&self) -> usize {
        self.filters.len()
    }

    /// Dense weight of bin `k` in filter `m`.
    pub fn weight(&self, m: usize, k: usize) -> f64 {
        let (first, w) = &self.filters[m];
        k.checked_sub(*first).and_then(|i| w.get(i)).copied().unwrap_or(0.0)
    }

    pub fn apply(&self, spectrum: &[f64]) -> Vec<f64> {
        debug_assert_eq!(spectrum.len(), self.n_bins);
        self.filters
            .iter()
            .map(|(first, w)| w.iter().zip(&spectrum[*first..]).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Mel-frequency resampling of every frame, 20 Hz to 8 kHz.
pub fn mel_sample(spec: &Spectrogram, n_mels: usize) -> Result<Spectrogram> {
    mel_sample_band(spec, n_mels, F_MIN_HZ, F_MAX_HZ)
}

pub fn mel_sample_band(spec: &Spectrogram, n_mels: usize, f_min: f64, f_max: f64) -> Result<Spectrogram> {
    let bank = MelFilterbank::new(n_mels, spec.n_bins, spec.bin_hz(1), f_min, f_max)?;
    let magnitudes = (0..spec.n_frames)
        .flat_map(|t| bank.apply(spec.frame(t)))
        .collect();
    Ok(Spectrogram {
        magnitudes,
        n_frames: spec.n_frames,
        n_bins: n_mels,
        frame_len: spec.frame_len,
        hop: spec.hop,
        sample_rate: spec.sample_rate,
    })
}
