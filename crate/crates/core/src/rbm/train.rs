use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::{Network, TrainConfig};
use crate::error::{Error, Result};
use crate::rng;

const SALT_SHUFFLE: u64 = 0x5348;
const SALT_TRAIN: u64 = 0x5452;
const SALT_EVAL: u64 = 0x4556;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PresentationStats {
    pub data_spikes: u64,
    pub model_spikes: u64,
    pub potentiations: u64,
    pub depressions: u64,
    /// Σ|Δw| over the crossbar across the presentation.
    pub weight_change: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub presentations: usize,
    pub train_spikes: u64,
    pub potentiations: u64,
    pub depressions: u64,
    pub test: Option<Evaluation>,
    pub wall_time_s: f64,
}

impl EpochMetrics {
    pub fn updates(&self) -> u64 {
        self.potentiations + self.depressions
    }

    pub fn test_error(&self) -> Option<f64> {
        self.test.as_ref().map(|e| 1.0 - e.accuracy)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochMetrics>,
    pub presentations: Vec<PresentationStats>,
}

impl TrainLog {
    pub fn total_spikes(&self) -> u64 {
        self.epochs.iter().map(|e| e.train_spikes).sum()
    }

    pub fn total_updates(&self) -> u64 {
        self.epochs.iter().map(|e| e.updates()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub predictions: Vec<usize>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<u64>>,
    pub accuracy: f64,
    pub per_class_error: Vec<f64>,
    pub class_sizes: Vec<u64>,
    pub total_spikes: u64,
    pub sim_time_s: f64,
    pub no_spike: usize,
}

/// Classifies every example in parallel from a read-only crossbar.
pub fn evaluate(net: &Network, examples: &[(Vec<f64>, usize)], duration_ms: f64, seed: u64) -> Result<Evaluation> {
    if examples.is_empty() {
        return Err(Error::Parameter("nothing to evaluate".into()));
    }
    let results: Vec<_> = examples
        .par_iter()
        .enumerate()
        .map(|(k, (pixels, _))| {
            let inf = net.infer(pixels, duration_ms, rng::derive_seed(seed, &[SALT_EVAL, k as u64]))?;
            Ok((inf.class(), inf.spikes(), inf.decision.no_spike, inf.sim_time_s))
        })
        .collect::<Result<_>>()?;
    let n = net.n_classes;
    let mut confusion = vec![vec![0u64; n]; n];
    let mut eval = Evaluation {
        predictions: Vec::with_capacity(examples.len()),
        confusion: Vec::new(),
        accuracy: 0.0,
        per_class_error: vec![0.0; n],
        class_sizes: vec![0; n],
        total_spikes: 0,
        sim_time_s: 0.0,
        no_spike: 0,
    };
    for ((_, label), (pred, spikes, silent, t)) in examples.iter().zip(results) {
        if *label >= n {
            return Err(Error::Parameter(format!("label {label} out of range")));
        }
        confusion[*label][pred] += 1;
        eval.predictions.push(pred);
        eval.total_spikes += spikes;
        eval.sim_time_s += t;
        eval.no_spike += usize::from(silent);
    }
    let correct: u64 = (0..n).map(|c| confusion[c][c]).sum();
    eval.accuracy = correct as f64 / examples.len() as f64;
    for c in 0..n {
        let size: u64 = confusion[c].iter().sum();
        eval.class_sizes[c] = size;
        eval.per_class_error[c] = if size == 0 { 0.0 } else { 1.0 - confusion[c][c] as f64 / size as f64 };
    }
    eval.confusion = confusion;
    Ok(eval)
}

/// Event-driven contrastive divergence, one image at a time in a seeded
/// shuffled order each epoch. `on_epoch` sees each epoch's metrics as soon
/// as they are final.
pub fn train(
    net: &mut Network,
    data: &[(Vec<f64>, usize)],
    test: Option<&[(Vec<f64>, usize)]>,
    cfg: &TrainConfig,
    seed: u64,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainLog> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Parameter("training set is empty".into()));
    }
    let mut log = TrainLog::default();
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        let mut shuffle = rng::seeded(rng::derive_seed(seed, &[SALT_SHUFFLE, epoch as u64]));
        order.shuffle(&mut shuffle);
        let mut m = EpochMetrics {
            epoch,
            presentations: 0,
            train_spikes: 0,
            potentiations: 0,
            depressions: 0,
            test: None,
            wall_time_s: 0.0,
        };
        for &k in &order {
            let (pixels, label) = &data[k];
            let before = net.bar.weights().to_vec();
            let s = rng::derive_seed(seed, &[SALT_TRAIN, epoch as u64, k as u64]);
            let (d, md) = net.present(pixels, *label, cfg, s)?;
            let change = net.bar.weights().iter().zip(&before).map(|(a, b)| (a - b).abs()).sum();
            let stats = PresentationStats {
                data_spikes: d.record.len() as u64,
                model_spikes: md.record.len() as u64,
                potentiations: d.potentiations,
                depressions: md.depressions,
                weight_change: change,
            };
            m.presentations += 1;
            m.train_spikes += stats.data_spikes + stats.model_spikes;
            m.potentiations += stats.potentiations;
            m.depressions += stats.depressions;
            log.presentations.push(stats);
        }
        if let Some(test) = test {
            m.test = Some(evaluate(net, test, cfg.t_infer_ms, seed)?);
        }
        m.wall_time_s = started.elapsed().as_secs_f64();
        on_epoch(&m);
        log.epochs.push(m);
    }
    Ok(log)
}
