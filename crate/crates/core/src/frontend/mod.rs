//! Audio front end: WAV ingestion, utterance centering, STFT, Mel sampling,
//! DCT compression, normalization and multi-image composition.

mod clip;
mod dct;
mod image;
pub mod imgfile;
mod mel;
mod stft;

pub use clip::{
    center_utterance, conform, fit_length, load_clip, resample_linear, shift_samples, write_wav,
    AudioClip, CLIP_SAMPLES, SAMPLE_RATE,
};
pub use dct::{dct2_matrix, dct_compress, LOG_FLOOR};
pub use image::{
    compose, format_layout, min_max_unit, normalize, parse_layout, standardize_rows,
    CompositeImage, MfccImage,
};
pub use mel::{hz_to_mel, mel_sample, mel_sample_band, mel_to_hz, MelFilterbank, F_MAX_HZ, F_MIN_HZ, N_MELS};
pub use stft::{dft_core, frame_count, ms_to_samples, stft, stft_samples, Spectrogram, Window};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tunables of the feature pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrontendConfig {
    /// Member images as `WxH` joined by `+`; width counts frames, height
    /// counts DCT coefficients.
    pub images: String,
    pub frame_to_hop_ratio: usize,
    pub min_mel_channels: usize,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub center_utterance: bool,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        Self {
            images: "16x16+8x16".into(),
            frame_to_hop_ratio: 4,
            min_mel_channels: N_MELS,
            f_min_hz: F_MIN_HZ,
            f_max_hz: F_MAX_HZ,
            center_utterance: true,
        }
    }
}

impl FrontendConfig {
    pub fn single(width: usize, height: usize) -> Self {
        Self {
            images: format_layout(&[(width, height)]),
            ..Self::default()
        }
    }

    pub fn layout(&self) -> Result<Vec<(usize, usize)>> {
        let layout = parse_layout(&self.images).map_err(|e| Error::Config(e.to_string()))?;
        if layout.is_empty() {
            return Err(Error::Config("frontend.images is empty".into()));
        }
        Ok(layout)
    }

    pub fn pixel_count(&self) -> Result<usize> {
        Ok(self.layout()?.iter().map(|(w, h)| w * h).sum())
    }

    pub fn validate(&self) -> Result<()> {
        for &(w, h) in &self.layout()? {
            FrameGeometry::for_frames(w, CLIP_SAMPLES, self.frame_to_hop_ratio)
                .and_then(|g| g.check_coeffs(h, self.mel_channels(h)))
                .map_err(|e| Error::Config(format!("image {w}x{h}: {e}")))?;
        }
        if !(self.f_max_hz > self.f_min_hz && self.f_min_hz >= 0.0) {
            return Err(Error::Config("need 0 <= f_min_hz < f_max_hz".into()));
        }
        Ok(())
    }

    fn mel_channels(&self, n_coeffs: usize) -> usize {
        self.min_mel_channels.max(n_coeffs)
    }
}

/// Frame and hop lengths (samples) that tile a clip into a requested number
/// of frames with a fixed frame:hop ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameGeometry {
    pub frame: usize,
    pub hop: usize,
    pub n_frames: usize,
}

impl FrameGeometry {
    pub fn for_frames(n_frames: usize, clip_len: usize, ratio: usize) -> Result<Self> {
        if n_frames == 0 || ratio == 0 {
            return Err(Error::param("frame count and frame:hop ratio must be positive"));
        }
        let hop = clip_len / (n_frames + ratio - 1);
        if hop == 0 {
            return Err(Error::param(format!("{n_frames} frames do not fit in {clip_len} samples")));
        }
        let frame = ratio * hop;
        debug_assert!(frame_count(clip_len, frame, hop) >= n_frames);
        Ok(Self { frame, hop, n_frames })
    }

    fn check_coeffs(&self, n_coeffs: usize, n_mels: usize) -> Result<()> {
        let bins = self.frame / 2 + 1;
        if n_coeffs == 0 {
            return Err(Error::param("image height must be positive"));
        }
        if n_mels > bins {
            return Err(Error::param(format!("{n_mels} Mel channels exceed {bins} bins")));
        }
        Ok(())
    }
}

/// One normalized `width × height` image from a conformed clip.
pub fn extract_image(clip: &AudioClip, width: usize, height: usize, cfg: &FrontendConfig) -> Result<MfccImage> {
    let geom = FrameGeometry::for_frames(width, clip.samples.len(), cfg.frame_to_hop_ratio)?;
    let n_mels = cfg.mel_channels(height);
    geom.check_coeffs(height, n_mels)?;
    let mut spec = stft_samples(clip, geom.frame, geom.hop, Window::Hann)?;
    if spec.n_frames > width {
        let skip = (spec.n_frames - width) / 2;
        spec.magnitudes = spec.magnitudes[skip * spec.n_bins..(skip + width) * spec.n_bins].to_vec();
        spec.n_frames = width;
    }
    let mel = mel_sample_band(&spec, n_mels, cfg.f_min_hz, cfg.f_max_hz)?;
    Ok(normalize(&dct_compress(&mel, height)?))
}

/// Full pipeline: optional centering, then one image per layout member.
pub fn extract(clip: &AudioClip, cfg: &FrontendConfig) -> Result<CompositeImage> {
    let centered;
    let clip = if cfg.center_utterance {
        centered = center_utterance(clip);
        &centered
    } else {
        clip
    };
    let images = cfg
        .layout()?
        .into_iter()
        .map(|(w, h)| extract_image(clip, w, h, cfg))
        .collect::<Result<Vec<_>>>()?;
    compose(&images)
}
