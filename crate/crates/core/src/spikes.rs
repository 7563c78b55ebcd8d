//! Spike events, run records and their line-delimited text export.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// One spike of an external source, on the simulation tick grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SpikeEvent {
    pub time_us: u64,
    pub neuron: u32,
}

impl SpikeEvent {
    pub fn new(neuron: u32, time_us: u64) -> Self {
        Self { time_us, neuron }
    }

    pub fn time_s(&self) -> f64 {
        self.time_us as f64 * 1e-6
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Layer {
    Visible = 0,
    Hidden = 1,
}

impl Layer {
    pub fn tag(self) -> char {
        match self {
            Layer::Visible => 'v',
            Layer::Hidden => 'h',
        }
    }

    pub fn other(self) -> Layer {
        match self {
            Layer::Visible => Layer::Hidden,
            Layer::Hidden => Layer::Visible,
        }
    }

    fn from_tag(s: &str) -> Option<Layer> {
        match s {
            "v" => Some(Layer::Visible),
            "h" => Some(Layer::Hidden),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Spike {
    pub time_us: u64,
    pub layer: Layer,
    pub neuron: u32,
}

/// Time-ordered log of every spike of a run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SpikeRecord {
    pub events: Vec<Spike>,
}

impl SpikeRecord {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn push(&mut self, spike: Spike) {
        debug_assert!(self.events.last().is_none_or(|l| l.time_us <= spike.time_us));
        self.events.push(spike);
    }

    pub fn is_time_ordered(&self) -> bool {
        self.events.windows(2).all(|w| w[0].time_us <= w[1].time_us)
    }

    pub fn count_layer(&self, layer: Layer) -> usize {
        self.events.iter().filter(|s| s.layer == layer).count()
    }

    /// Spike count per neuron of `layer` for neurons `range`.
    pub fn counts(&self, layer: Layer, range: std::ops::Range<usize>) -> Vec<u64> {
        let mut out = vec![0; range.len()];
        for s in &self.events {
            let n = s.neuron as usize;
            if s.layer == layer && range.contains(&n) {
                out[n - range.start] += 1;
            }
        }
        out
    }

    /// `time_us<TAB>neuron<TAB>layer` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.events {
            let _ = writeln!(out, "{}\t{}\t{}", s.time_us, s.neuron, s.layer.tag());
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut record = SpikeRecord::default();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = || Error::format(format!("spike record line {}: '{line}'", lineno + 1));
            let mut cols = line.split('\t');
            let time_us = cols.next().and_then(|c| c.parse().ok()).ok_or_else(bad)?;
            let neuron = cols.next().and_then(|c| c.parse().ok()).ok_or_else(bad)?;
            let layer = cols.next().and_then(Layer::from_tag).ok_or_else(bad)?;
            record.events.push(Spike { time_us, layer, neuron });
        }
        if !record.is_time_ordered() {
            return Err(Error::format("spike record timestamps decrease"));
        }
        Ok(record)
    }
}

/// `time_us<TAB>neuron` lines for a list of source events.
pub fn events_to_text(events: &[SpikeEvent]) -> String {
    let mut out = String::new();
    for e in events {
        let _ = writeln!(out, "{}\t{}", e.time_us, e.neuron);
    }
    out
}

pub fn events_from_text(text: &str) -> Result<Vec<SpikeEvent>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let (t, n) = line
                .split_once('\t')
                .ok_or_else(|| Error::format(format!("bad event line '{line}'")))?;
            let parse_err = |_| Error::format(format!("bad event line '{line}'"));
            Ok(SpikeEvent::new(n.parse().map_err(parse_err)?, t.parse().map_err(parse_err)?))
        })
        .collect()
}
