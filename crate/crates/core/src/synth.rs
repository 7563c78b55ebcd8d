//! Synthetic spoken-command corpus.
//!
//! Words are built from voiced segments (a glottal harmonic series shaped
//! by three moving formants) and band-limited noise bursts. Each utterance
//! draws its own speaker (pitch, vocal-tract scale, tempo, loudness), onset
//! time and background noise, so classes overlap the way recorded speech
//! does and the word position inside the one-second clip varies.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::frontend::{write_wav, AudioClip, CLIP_SAMPLES, SAMPLE_RATE};
use crate::rng;

pub const COMMANDS: [&str; 4] = ["up", "down", "left", "right"];

#[derive(Debug, Clone, Copy)]
enum Seg {
    /// Formant frequencies move linearly from `from` to `to`.
    Voiced { ms: f64, from: [f64; 3], to: [f64; 3], amp: f64 },
    Noise { ms: f64, center_hz: f64, bw_hz: f64, amp: f64 },
    Gap { ms: f64 },
}

impl Seg {
    fn ms(&self) -> f64 {
        match *self {
            Seg::Voiced { ms, .. } | Seg::Noise { ms, .. } | Seg::Gap { ms } => ms,
        }
    }
}

fn v(ms: f64, from: [f64; 3], to: [f64; 3], amp: f64) -> Seg {
    Seg::Voiced { ms, from, to, amp }
}

fn n(ms: f64, center_hz: f64, bw_hz: f64, amp: f64) -> Seg {
    Seg::Noise { ms, center_hz, bw_hz, amp }
}

fn template(word: &str) -> Option<Vec<Seg>> {
    Some(match word {
        "up" => vec![
            v(40.0, [450.0, 1300.0, 2400.0], [640.0, 1190.0, 2390.0], 0.7),
            v(170.0, [640.0, 1190.0, 2390.0], [600.0, 1100.0, 2300.0], 1.0),
            Seg::Gap { ms: 70.0 },
            n(25.0, 900.0, 1400.0, 0.35),
        ],
        "down" => vec![
            n(15.0, 3200.0, 2200.0, 0.35),
            v(60.0, [400.0, 1700.0, 2600.0], [700.0, 1250.0, 2450.0], 0.8),
            v(200.0, [700.0, 1250.0, 2450.0], [450.0, 900.0, 2300.0], 1.0),
            v(100.0, [320.0, 1400.0, 2500.0], [300.0, 1450.0, 2500.0], 0.45),
        ],
        "left" => vec![
            v(70.0, [360.0, 1000.0, 2600.0], [380.0, 1100.0, 2600.0], 0.6),
            v(40.0, [380.0, 1100.0, 2600.0], [580.0, 1800.0, 2550.0], 0.9),
            v(140.0, [580.0, 1800.0, 2550.0], [560.0, 1750.0, 2500.0], 1.0),
            n(110.0, 5500.0, 4000.0, 0.15),
            Seg::Gap { ms: 40.0 },
            n(20.0, 4500.0, 3000.0, 0.3),
        ],
        "right" => vec![
            v(80.0, [420.0, 1050.0, 1500.0], [450.0, 1150.0, 1700.0], 0.6),
            v(60.0, [450.0, 1150.0, 1700.0], [750.0, 1300.0, 2500.0], 0.9),
            v(220.0, [750.0, 1300.0, 2500.0], [400.0, 2100.0, 2800.0], 1.0),
            Seg::Gap { ms: 50.0 },
            n(25.0, 4500.0, 3000.0, 0.3),
        ],
        _ => return None,
    })
}

/// Per-utterance speaker and recording draw.
#[derive(Debug, Clone, Copy)]
struct Speaker {
    f0_hz: f64,
    f0_slope: f64,
    tract: f64,
    tempo: f64,
    level: f64,
    snr_db: f64,
}

impl Speaker {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        Self {
            f0_hz: rng.gen_range(90.0..240.0),
            f0_slope: rng.gen_range(-0.25..0.1),
            tract: rng.gen_range(0.8..1.22),
            tempo: rng.gen_range(0.7..1.4),
            level: rng.gen_range(0.2..0.9),
            snr_db: rng.gen_range(3.0..20.0),
        }
    }
}

const BANDWIDTHS: [f64; 3] = [90.0, 110.0, 150.0];
const GAINS: [f64; 3] = [1.0, 0.55, 0.3];
const VOICE_TOP_HZ: f64 = 4000.0;

fn formant_gain(f: f64, formants: &[f64; 3]) -> f64 {
    (0..3)
        .map(|k| {
            let x = (f - formants[k]) / BANDWIDTHS[k];
            GAINS[k] / (1.0 + x * x)
        })
        .sum()
}

/// Moving average over `width` samples, centred.
fn smooth(x: &[f64], width: usize) -> Vec<f64> {
    let half = width / 2;
    let mut prefix = vec![0.0; x.len() + 1];
    for (i, &v) in x.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(x.len());
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Constant-peak band-pass biquad applied in place.
fn bandpass(x: &mut [f64], center_hz: f64, bw_hz: f64) {
    let fs = SAMPLE_RATE as f64;
    let w0 = 2.0 * PI * center_hz.min(0.45 * fs) / fs;
    let q = (center_hz / bw_hz).max(0.3);
    let alpha = w0.sin() / (2.0 * q);
    let a0 = 1.0 + alpha;
    let (b0, b2) = (alpha / a0, -alpha / a0);
    let (a1, a2) = (-2.0 * w0.cos() / a0, (1.0 - alpha) / a0);
    let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
    for s in x.iter_mut() {
        let y = b0 * *s + b2 * x2 - a1 * y1 - a2 * y2;
        x2 = x1;
        x1 = *s;
        y2 = y1;
        y1 = y;
        *s = y;
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// One second of 16 kHz audio containing `word` spoken by a random speaker
/// at a random onset.
pub fn synth_utterance(word: &str, seed: u64) -> Result<AudioClip> {
    let segs = template(word).ok_or_else(|| Error::Parameter(format!("no template for word '{word}'")))?;
    let mut rng = rng::seeded(seed);
    let sp = Speaker::draw(&mut rng);
    let fs = SAMPLE_RATE as f64;

    let lens: Vec<usize> = segs
        .iter()
        .map(|s| (s.ms() * sp.tempo * rng.gen_range(0.75..1.3) * fs / 1000.0).round() as usize)
        .collect();
    let total: usize = lens.iter().sum();
    let margin = CLIP_SAMPLES / 40;
    let onset = rng.gen_range(margin..(CLIP_SAMPLES - total - margin).max(margin + 1));
    let jitter: Vec<[f64; 3]> = segs.iter().map(|_| [0; 3].map(|_| rng.gen_range(0.88..1.12))).collect();

    // Per-sample formant tracks and amplitudes.
    let mut formants = vec![[0.0; 3]; total];
    let mut voice_amp = vec![0.0; total];
    let mut noise = vec![0.0; total];
    let mut start = 0;
    for (k, seg) in segs.iter().enumerate() {
        let len = lens[k];
        match *seg {
            Seg::Voiced { from, to, amp, .. } => {
                for i in 0..len {
                    let a = i as f64 / len.max(1) as f64;
                    for f in 0..3 {
                        formants[start + i][f] = (from[f] + a * (to[f] - from[f])) * sp.tract * jitter[k][f];
                    }
                    voice_amp[start + i] = amp;
                }
            }
            // Unreleased stops and weak fricatives: bursts are sometimes absent.
            Seg::Noise { .. } if rng.gen_bool(0.3) => {}
            Seg::Noise { center_hz, bw_hz, amp, .. } => {
                let mut burst: Vec<f64> = (0..len).map(|_| gauss(&mut rng)).collect();
                bandpass(&mut burst, center_hz * sp.tract, bw_hz);
                let rms = (burst.iter().map(|x| x * x).sum::<f64>() / len.max(1) as f64).sqrt().max(1e-12);
                for (i, b) in burst.iter().enumerate() {
                    noise[start + i] = amp * b / rms * 0.3;
                }
            }
            Seg::Gap { .. } => {}
        }
        start += len;
    }
    // Carry formants through gaps and noise so the harmonic sum stays smooth.
    let mut last = [500.0 * sp.tract, 1500.0 * sp.tract, 2500.0 * sp.tract];
    for f in formants.iter_mut() {
        if f[0] == 0.0 {
            *f = last;
        } else {
            last = *f;
        }
    }
    let voice_amp = smooth(&voice_amp, (0.012 * fs) as usize);

    let mut word_samples = vec![0.0; total];
    let mut phase = 0.0;
    for i in 0..total {
        let progress = i as f64 / total as f64;
        let f0 = sp.f0_hz * (1.0 + sp.f0_slope * progress);
        phase = (phase + 2.0 * PI * f0 / fs) % (2.0 * PI);
        if voice_amp[i] < 1e-4 {
            continue;
        }
        let mut s = 0.0;
        let mut h = 1.0;
        while h * f0 < VOICE_TOP_HZ {
            // Glottal roll-off of about 12 dB per octave.
            s += formant_gain(h * f0, &formants[i]) / h * (h * phase).sin();
            h += 1.0;
        }
        word_samples[i] = voice_amp[i] * s;
    }
    let vpeak = word_samples.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-12);
    for (w, nz) in word_samples.iter_mut().zip(&noise) {
        *w = *w / vpeak + nz;
    }
    let peak = word_samples.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-12);
    let rms_word = (word_samples.iter().map(|x| x * x).sum::<f64>() / total as f64).sqrt() / peak * sp.level;
    let floor = rms_word * 10f64.powf(-sp.snr_db / 20.0);

    let mut out: Vec<f64> = (0..CLIP_SAMPLES).map(|_| floor * gauss(&mut rng)).collect();
    for (i, w) in word_samples.iter().enumerate() {
        if let Some(o) = out.get_mut(onset + i) {
            *o += w / peak * sp.level;
        }
    }
    for o in out.iter_mut() {
        *o = o.clamp(-1.0, 1.0);
    }
    Ok(AudioClip::new(out, SAMPLE_RATE))
}

/// Seed for utterance `index` of `word` under a corpus seed.
pub fn utterance_seed(seed: u64, class: usize, index: usize) -> u64 {
    rng::derive_seed(seed, &[0x5759, class as u64, index as u64])
}

/// Writes `per_class` clips per command as `dir/<word>/<nnnn>.wav`.
pub fn write_corpus(dir: &Path, words: &[&str], per_class: usize, seed: u64) -> Result<usize> {
    let mut written = 0;
    for (c, word) in words.iter().enumerate() {
        let sub = dir.join(word);
        std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        for k in 0..per_class {
            let clip = synth_utterance(word, utterance_seed(seed, c, k))?;
            write_wav(&sub.join(format!("{k:04}.wav")), &clip)?;
            written += 1;
        }
    }
    Ok(written)
}
