use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};

pub const SAMPLE_RATE: u32 = 16_000;
pub const CLIP_SAMPLES: usize = SAMPLE_RATE as usize;

/// One mono utterance. After [`load_clip`] it is always exactly one second
/// at 16 kHz.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn silent() -> Self {
        Self::new(vec![0.0; CLIP_SAMPLES], SAMPLE_RATE)
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Energy centroid in samples, `None` for an all-zero clip.
    pub fn energy_centroid(&self) -> Option<f64> {
        let (mut weighted, mut total) = (0.0, 0.0);
        for (n, s) in self.samples.iter().enumerate() {
            let e = s * s;
            weighted += n as f64 * e;
            total += e;
        }
        (total > 0.0).then(|| weighted / total)
    }
}

/// Reads a mono PCM WAV and conforms it to one second at 16 kHz.
pub fn load_clip(path: &Path) -> Result<AudioClip> {
    let reader = WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::format(format!("{}: {other}", path.display())),
    })?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::format(format!(
            "{}: expected mono audio, found {} channels",
            path.display(),
            spec.channels
        )));
    }
    let bad = |e: hound::Error| Error::format(format!("{}: {e}", path.display()));
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 8) => reader
            .into_samples::<i8>()
            .map(|s| s.map(|v| v as f64 / 128.0))
            .collect::<Result<_, _>>()
            .map_err(bad)?,
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<Result<_, _>>()
            .map_err(bad)?,
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<Result<_, _>>()
            .map_err(bad)?,
        (fmt, bits) => {
            return Err(Error::format(format!(
                "{}: unsupported encoding {fmt:?} {bits}-bit",
                path.display()
            )))
        }
    };
    if spec.sample_rate == 0 {
        return Err(Error::format(format!("{}: zero sample rate", path.display())));
    }
    Ok(conform(AudioClip::new(samples, spec.sample_rate)))
}

/// Writes a clip as 16-bit mono PCM.
pub fn write_wav(path: &Path, clip: &AudioClip) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let wrap = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::format(other.to_string()),
    };
    let mut writer = WavWriter::create(path, spec).map_err(wrap)?;
    for &s in &clip.samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        writer.write_sample(v).map_err(wrap)?;
    }
    writer.finalize().map_err(wrap)
}

/// Resamples to 16 kHz and pads or crops to exactly one second.
pub fn conform(clip: AudioClip) -> AudioClip {
    let clip = if clip.sample_rate == SAMPLE_RATE {
        clip
    } else {
        resample_linear(&clip, SAMPLE_RATE)
    };
    AudioClip::new(fit_length(&clip.samples, CLIP_SAMPLES), SAMPLE_RATE)
}

pub fn resample_linear(clip: &AudioClip, target_rate: u32) -> AudioClip {
    let src = &clip.samples;
    if src.is_empty() {
        return AudioClip::new(Vec::new(), target_rate);
    }
    let ratio = clip.sample_rate as f64 / target_rate as f64;
    let n_out = (src.len() as f64 / ratio).round() as usize;
    let last = src.len() - 1;
    let out = (0..n_out)
        .map(|k| {
            let pos = k as f64 * ratio;
            let i = pos.floor() as usize;
            if i >= last {
                return src[last];
            }
            let frac = pos - i as f64;
            src[i] * (1.0 - frac) + src[i + 1] * frac
        })
        .collect();
    AudioClip::new(out, target_rate)
}

/// Symmetric zero padding (odd remainder goes to the end) or center crop.
pub fn fit_length(samples: &[f64], len: usize) -> Vec<f64> {
    use std::cmp::Ordering;
    match samples.len().cmp(&len) {
        Ordering::Equal => samples.to_vec(),
        Ordering::Less => {
            let lead = (len - samples.len()) / 2;
            let mut out = vec![0.0; len];
            out[lead..lead + samples.len()].copy_from_slice(samples);
            out
        }
        Ordering::Greater => {
            let start = (samples.len() - len) / 2;
            samples[start..start + len].to_vec()
        }
    }
}

/// Shifts the clip so its energy centroid sits at the midpoint, zero-filling
/// rather than wrapping. Silent clips come back unchanged.
pub fn center_utterance(clip: &AudioClip) -> AudioClip {
    let Some(centroid) = clip.energy_centroid() else {
        return clip.clone();
    };
    let target = clip.samples.len() as f64 / 2.0;
    let shift = (target - centroid).round() as i64;
    AudioClip::new(shift_samples(&clip.samples, shift), clip.sample_rate)
}

pub fn shift_samples(samples: &[f64], shift: i64) -> Vec<f64> {
    let n = samples.len() as i64;
    let mut out = vec![0.0; samples.len()];
    for (i, &s) in samples.iter().enumerate() {
        let j = i as i64 + shift;
        if (0..n).contains(&j) {
            out[j as usize] = s;
        }
    }
    out
}
