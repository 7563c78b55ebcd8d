//! Rate coding of images, labels and bias sources into Poisson spike trains,
//! and spike-count decoding of label neurons.

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::spikes::{Layer, SpikeEvent, SpikeRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncodingConfig {
    pub r_max_hz: f64,
    pub r_label_high_hz: f64,
    pub r_label_low_hz: f64,
    pub r_bias_hz: f64,
    pub dt_ms: f64,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        Self {
            r_max_hz: 20.0,
            r_label_high_hz: 20.0,
            r_label_low_hz: 0.0,
            r_bias_hz: 20.0,
            dt_ms: 1.0,
        }
    }
}

impl EncodingConfig {
    pub fn dt_us(&self) -> u64 {
        (self.dt_ms * 1000.0).round() as u64
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [self.r_max_hz, self.r_label_high_hz, self.r_label_low_hz, self.r_bias_hz];
        if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::Config("spike rates must be finite and non-negative".into()));
        }
        if !(self.dt_ms > 0.0) || self.dt_us() == 0 {
            return Err(Error::Config("dt_ms must be at least 1 µs".into()));
        }
        let max = rates.iter().copied().fold(0.0, f64::max);
        if max * self.dt_ms * 1e-3 > 0.1 {
            return Err(Error::Config(format!(
                "rate {max} Hz with dt {} ms breaks the Bernoulli bound rate·dt <= 0.1",
                self.dt_ms
            )));
        }
        Ok(())
    }
}

/// Converts a duration in seconds to a whole number of ticks (in µs).
pub fn duration_us(duration_s: f64, dt_us: u64) -> u64 {
    let ticks = (duration_s * 1e6 / dt_us as f64).round() as u64;
    ticks * dt_us
}

/// Bernoulli-per-tick spike trains; source `i` fires with probability
/// `rates[i]·dt` on each tick and draws from stream `first_stream + i`.
pub fn poisson_trains(rates: &[f64], first_stream: u64, dt_us: u64, duration_us: u64, seed: u64) -> Vec<SpikeEvent> {
    let n_ticks = duration_us / dt_us;
    let dt_s = dt_us as f64 * 1e-6;
    let mut events = Vec::new();
    for (i, &rate) in rates.iter().enumerate() {
        if rate <= 0.0 {
            continue;
        }
        let p = rate * dt_s;
        let mut rng = rng::stream(seed, first_stream + i as u64);
        for tick in 0..n_ticks {
            if rng.gen::<f64>() < p {
                events.push(SpikeEvent::new(i as u32, tick * dt_us));
            }
        }
    }
    events.sort_unstable();
    events
}

/// Encodes `[0, 1]` intensities at `value · r_max`.
pub fn poisson_encode(values: &[f64], cfg: &EncodingConfig, duration_s: f64, seed: u64) -> Result<Vec<SpikeEvent>> {
    if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::param(format!("intensity {v} outside [0, 1]")));
    }
    if !(duration_s > 0.0) {
        return Err(Error::param("duration must be positive"));
    }
    let rates: Vec<f64> = values.iter().map(|v| v * cfg.r_max_hz).collect();
    Ok(poisson_trains(&rates, 0, cfg.dt_us(), duration_us(duration_s, cfg.dt_us()), seed))
}

/// Contiguous, as-even-as-possible split of label neurons into classes;
/// the first `n_label % n_classes` classes get one extra neuron.
pub fn label_groups(n_label: usize, n_classes: usize) -> Result<Vec<Range<usize>>> {
    if n_classes == 0 || n_label < n_classes {
        return Err(Error::param(format!(
            "{n_label} label neurons cannot cover {n_classes} classes"
        )));
    }
    let (base, extra) = (n_label / n_classes, n_label % n_classes);
    let mut start = 0;
    Ok((0..n_classes)
        .map(|c| {
            let len = base + usize::from(c < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect())
}

/// Per-label-neuron rates for `class`.
pub fn label_rates(class: usize, n_classes: usize, n_label: usize, cfg: &EncodingConfig) -> Result<Vec<f64>> {
    if class >= n_classes {
        return Err(Error::param(format!("class {class} out of range for {n_classes} classes")));
    }
    let groups = label_groups(n_label, n_classes)?;
    let mut rates = vec![cfg.r_label_low_hz; n_label];
    rates[groups[class].clone()].iter_mut().for_each(|r| *r = cfg.r_label_high_hz);
    Ok(rates)
}

pub fn encode_label(
    class: usize,
    n_classes: usize,
    n_label: usize,
    cfg: &EncodingConfig,
    duration_s: f64,
    seed: u64,
) -> Result<Vec<SpikeEvent>> {
    let rates = label_rates(class, n_classes, n_label, cfg)?;
    Ok(poisson_trains(&rates, 0, cfg.dt_us(), duration_us(duration_s, cfg.dt_us()), seed))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelDecision {
    pub class: usize,
    pub class_counts: Vec<u64>,
    /// No label neuron fired; `class` is the tie-break default.
    pub no_spike: bool,
}

/// Argmax over per-class sums, ties to the lowest class index.
pub fn decode_counts(neuron_counts: &[u64], n_classes: usize) -> Result<LabelDecision> {
    let groups = label_groups(neuron_counts.len(), n_classes)?;
    let class_counts: Vec<u64> = groups.iter().map(|g| neuron_counts[g.clone()].iter().sum()).collect();
    let mut class = 0;
    for (c, &n) in class_counts.iter().enumerate() {
        if n > class_counts[class] {
            class = c;
        }
    }
    let no_spike = class_counts.iter().all(|&n| n == 0);
    Ok(LabelDecision {
        class,
        class_counts,
        no_spike,
    })
}

/// Decodes from the visible-layer spikes of `record` in `label_range`.
pub fn decode_label(record: &SpikeRecord, label_range: Range<usize>, n_classes: usize) -> Result<LabelDecision> {
    decode_counts(&record.counts(Layer::Visible, label_range), n_classes)
}
