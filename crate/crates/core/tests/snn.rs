use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use raven_core::pcm::{DeviceConfig, DifferentialSynapse};
use raven_core::snn::*;
use raven_core::spikes::{Layer, SpikeRecord};

const MS: u64 = 1000;

fn device(w_max: f64) -> raven_core::pcm::Device {
    DeviceConfig { w_max, ..Default::default() }.build().unwrap()
}

fn bar_from(weights: &[Vec<f64>], w_max: f64) -> Crossbar {
    let dev = device(w_max);
    let (r, c) = (weights.len(), weights[0].len());
    let mut bar = Crossbar::filled(r, c, dev.clone(), DifferentialSynapse::new(500, 500));
    for (i, row) in weights.iter().enumerate() {
        for (j, &w) in row.iter().enumerate() {
            bar.set(i, j, dev.synapse_for_weight(w));
        }
    }
    bar
}

fn random_bar(r: usize, c: usize, w_max: f64, spread: f64, bias: f64, seed: u64) -> Crossbar {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<Vec<f64>> = (0..r)
        .map(|_| (0..c).map(|_| bias + spread * rng.gen_range(-1.0..1.0)).collect())
        .collect();
    bar_from(&w, w_max)
}

fn poisson_input(layer: Layer, n: usize, p: f64, ticks: u64, seed: u64) -> Vec<ExternalSpike> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for k in 0..ticks {
        for i in 0..n {
            if rng.gen_bool(p) {
                out.push(ExternalSpike { time_us: k * MS, layer, neuron: i as u32 });
            }
        }
    }
    out
}

fn isi_ok(record: &SpikeRecord, refr_us: u64) -> bool {
    let mut last = std::collections::HashMap::new();
    for s in &record.events {
        if let Some(prev) = last.insert((s.layer, s.neuron), s.time_us) {
            if s.time_us - prev < refr_us {
                return false;
            }
        }
    }
    true
}

/// Dense 1 ms-step reference of a single hidden neuron fed by scripted
/// visible spikes. Returns the potential at the start of each next tick.
fn dense_trace(w: &[f64], script: &[Vec<usize>], p: &LifParams) -> Vec<f64> {
    let step = (-1.0 / p.tau_leak_ms).exp();
    let mut v = p.v_rest;
    let mut refr_until = 0u64;
    let mut out = Vec::new();
    for k in 0..script.len() {
        let t = k as u64 * MS;
        if k > 0 {
            for &i in &script[k - 1] {
                v += p.alpha * w[i];
                v = v.max(p.v_min);
                if v >= p.v_th {
                    if t >= refr_until {
                        v = p.v_rest;
                        refr_until = t + p.t_refr_us();
                    } else {
                        v = p.v_th;
                    }
                }
            }
        }
        v = p.v_rest + (v - p.v_rest) * step;
        out.push(v);
    }
    out
}

fn toy_trace_matches(w0: f64, w1: f64, seed: u64) {
    let p = LifParams::default();
    let bar = bar_from(&[vec![w0], vec![w1]], 20.0);
    let w = [bar.weight(0, 0), bar.weight(1, 0)];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Inputs respect the source refractory period so none are dropped.
    let mut ready = [0u64; 2];
    let script: Vec<Vec<usize>> = (0..400u64)
        .map(|k| {
            (0..2)
                .filter(|&i| {
                    let go = k >= ready[i] && rng.gen_bool(0.6);
                    if go {
                        ready[i] = k + 4;
                    }
                    go
                })
                .collect()
        })
        .collect();
    let reference = dense_trace(&w, &script, &p);
    let mut sim = Simulator::new(2, 1, &p, MS).unwrap();
    let recv = Receivers { visible: vec![false; 2], hidden: vec![true] };
    let mut fired = 0;
    for (k, spikes) in script.iter().enumerate() {
        let ext: Vec<_> = spikes
            .iter()
            .map(|&i| ExternalSpike { time_us: 0, layer: Layer::Visible, neuron: i as u32 })
            .collect();
        let out = sim.run_phase(BarRef::Frozen(&bar), &ext, &recv, MS).unwrap();
        fired += out.record.count_layer(Layer::Hidden);
        let v = sim.potential(Layer::Hidden, 0);
        assert!((v - reference[k]).abs() <= 1e-9, "tick {k}: {v} vs {}", reference[k]);
    }
    assert!(fired > 0, "toy trace never fired");
}

#[test]
fn toy_kernel_matches_dense_reference() {
    toy_trace_matches(12.0, 8.0, 1);
    toy_trace_matches(18.0, -9.0, 2);
    toy_trace_matches(17.0, 3.0, 3);
}

#[test]
fn fan_out_counts_match_topology() {
    let p = LifParams::default();
    let bar = random_bar(412, 508, 1.0, 0.05, 0.0, 4);
    let mut hidden = vec![LifNeuron::at_rest(&p); 508];
    let (_, n) = propagate_forward(7, MS, &bar, &mut hidden, &p).unwrap();
    assert_eq!(n, 508);
    let mut visible = vec![LifNeuron::at_rest(&p); 412];
    let (_, n) = propagate_backward(11, MS, &bar, &mut visible, &p).unwrap();
    assert_eq!(n, 412);
}

#[test]
fn zero_weights_leave_targets_untouched() {
    let p = LifParams::default();
    let bar = bar_from(&vec![vec![0.0; 3]; 2], 1.0);
    let mut hidden = vec![LifNeuron { v: 0.5, last_update_us: 0, refr_until_us: 0 }; 3];
    let (fired, _) = propagate_forward(0, 2 * MS, &bar, &mut hidden, &p).unwrap();
    assert!(fired.is_empty());
    for h in &hidden {
        assert!((h.v - 0.5 * (-2f64).exp()).abs() < 1e-15);
    }
    let mut visible = vec![LifNeuron::at_rest(&p); 2];
    let (fired, _) = propagate_backward(1, MS, &bar, &mut visible, &p).unwrap();
    assert!(fired.is_empty());
    assert!(visible.iter().all(|v| v.v == 0.0));
}

#[test]
fn strongest_column_fires_first() {
    let p = LifParams::default();
    let bar = bar_from(&[vec![0.2, 1.0, 0.5, 0.1]], 1.0);
    let mut hidden = vec![LifNeuron::at_rest(&p); 4];
    for _ in 0..40 {
        let (fired, _) = propagate_forward(0, MS, &bar, &mut hidden, &p).unwrap();
        if !fired.is_empty() {
            assert_eq!(fired, vec![1]);
            return;
        }
    }
    panic!("no hidden neuron fired");
}

#[test]
fn no_input_gives_empty_record() {
    let bar = random_bar(6, 5, 1.0, 1.0, 0.0, 5);
    let rec = run(&[], &bar, &LifParams::default(), MS, 100 * MS).unwrap();
    assert!(rec.is_empty());
    assert!(run(&[], &bar, &LifParams::default(), MS, 0).is_err());
}

#[test]
fn saturated_drive_fires_periodically_within_refractory_bound() {
    let p = LifParams::default();
    let bar = bar_from(&[vec![20.0, 20.0]], 20.0);
    let ext: Vec<_> = (0..200)
        .map(|k| ExternalSpike { time_us: k * MS, layer: Layer::Visible, neuron: 0 })
        .collect();
    let mut sim = Simulator::new(1, 2, &p, MS).unwrap();
    let recv = Receivers { visible: vec![false], hidden: vec![true; 2] };
    let rec = sim.run_phase(BarRef::Frozen(&bar), &ext, &recv, 200 * MS).unwrap().record;
    let times: Vec<u64> = rec.events.iter().filter(|s| s.layer == Layer::Hidden && s.neuron == 0).map(|s| s.time_us).collect();
    assert!(times.len() > 30);
    let gaps: Vec<u64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    assert!(gaps.iter().all(|&g| g == gaps[0] && g >= p.t_refr_us()), "{gaps:?}");
}

#[test]
fn symmetric_toy_has_symmetric_rates() {
    let p = LifParams::default();
    let w = vec![
        vec![9.0, 4.0, 2.0, 1.0],
        vec![4.0, 9.0, 1.0, 2.0],
        vec![2.0, 1.0, 9.0, 4.0],
        vec![1.0, 2.0, 4.0, 9.0],
    ];
    let bar = bar_from(&w, 10.0);
    let ticks = 20_000;
    let mut ext = poisson_input(Layer::Visible, 4, 0.05, ticks, 6);
    ext.extend(poisson_input(Layer::Hidden, 4, 0.05, ticks, 7));
    ext.sort();
    let rec = run(&ext, &bar, &p, MS, ticks * MS).unwrap();
    let v = rec.count_layer(Layer::Visible) as f64;
    let h = rec.count_layer(Layer::Hidden) as f64;
    let rel = (v - h).abs() / (v + h);
    assert!(v > 3000.0 && rel < 0.03, "visible {v} hidden {h}");
}

#[test]
fn stdp_counts_match_window_scan() {
    let p = LifParams::default();
    for (seed, dir, window) in [
        (10, Direction::Potentiate, 10 * MS),
        (11, Direction::Depress, 10 * MS),
        (12, Direction::Potentiate, 3 * MS),
        (13, Direction::Depress, 1 * MS),
    ] {
        let (nv, nh) = (30, 20);
        let mut bar = random_bar(nv, nh, 1.0, 0.6, 0.3, seed);
        let ticks = 2000;
        let mut ext = poisson_input(Layer::Visible, nv, 0.08, ticks, seed + 100);
        ext.extend(poisson_input(Layer::Hidden, 2, 0.05, ticks, seed + 200));
        let lif = LifParams { alpha: 0.3, ..p.clone() };
        let mut sim = Simulator::new(nv, nh, &lif, MS).unwrap();
        let rule = Plasticity { direction: dir, window_us: window, magnitude: 1 };
        let before = bar.weights().to_vec();
        let out = sim
            .run_phase(BarRef::Plastic(&mut bar, rule), &ext, &Receivers::all(nv, nh), ticks * MS)
            .unwrap();
        let scan = coincidence_scan(&out.record, nv, nh, window);
        assert!(scan > 100, "too few coincidences: {scan}");
        assert_eq!(out.updates(), scan);
        match dir {
            Direction::Potentiate => {
                assert_eq!(out.depressions, 0);
                assert!(bar.weights().iter().zip(&before).all(|(a, b)| a >= b));
            }
            Direction::Depress => {
                assert_eq!(out.potentiations, 0);
                assert!(bar.weights().iter().zip(&before).all(|(a, b)| a <= b));
            }
        }
    }
}

#[test]
fn frozen_runs_never_touch_weights() {
    let bar = random_bar(10, 8, 1.0, 1.0, 0.2, 20);
    let before = bar.clone();
    let ext = poisson_input(Layer::Visible, 10, 0.2, 500, 21);
    run(&ext, &bar, &LifParams { alpha: 0.5, ..Default::default() }, MS, 500 * MS).unwrap();
    assert_eq!(before.array(), bar.array());
}

#[test]
fn identical_inputs_give_identical_records() {
    let make = || {
        let mut bar = random_bar(12, 9, 1.0, 1.0, 0.2, 30);
        let ext = poisson_input(Layer::Visible, 12, 0.1, 1000, 31);
        let mut sim = Simulator::new(12, 9, &LifParams { alpha: 0.4, ..Default::default() }, MS).unwrap();
        let rule = Plasticity { direction: Direction::Potentiate, window_us: 10 * MS, magnitude: 1 };
        let out = sim.run_phase(BarRef::Plastic(&mut bar, rule), &ext, &Receivers::all(12, 9), 1000 * MS).unwrap();
        (out, bar.into_array())
    };
    assert_eq!(make(), make());
}

#[test]
fn mismatched_dimensions_are_rejected() {
    let bar = random_bar(4, 3, 1.0, 1.0, 0.0, 40);
    let mut sim = Simulator::new(4, 4, &LifParams::default(), MS).unwrap();
    assert!(sim.run_phase(BarRef::Frozen(&bar), &[], &Receivers::all(4, 4), MS).is_err());
    let mut sim = Simulator::new(4, 3, &LifParams::default(), MS).unwrap();
    let bad = [ExternalSpike { time_us: 0, layer: Layer::Hidden, neuron: 3 }];
    assert!(sim.run_phase(BarRef::Frozen(&bar), &bad, &Receivers::all(4, 3), MS).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn record_invariants(seed in 0u64..10_000, alpha in 0.05f64..0.8, rate in 0.01f64..0.3, bias in -0.5f64..0.8) {
        let (nv, nh) = (8, 6);
        let lif = LifParams { alpha, ..Default::default() };
        let bar = random_bar(nv, nh, 1.0, 1.0, bias, seed);
        let ticks = 300;
        let mut ext = poisson_input(Layer::Visible, nv, rate, ticks, seed ^ 1);
        ext.extend(poisson_input(Layer::Hidden, nh, rate / 2.0, ticks, seed ^ 2));
        let mut sim = Simulator::new(nv, nh, &lif, MS).unwrap();
        let recv = Receivers::all(nv, nh);
        let mut total = 0;
        let mut all = SpikeRecord::default();
        for chunk in 0..(ticks / 10) {
            let lo = chunk * 10 * MS;
            let part: Vec<_> = ext.iter().filter(|e| e.time_us >= lo && e.time_us < lo + 10 * MS)
                .map(|e| ExternalSpike { time_us: e.time_us - lo, ..*e }).collect();
            let out = sim.run_phase(BarRef::Frozen(&bar), &part, &recv, 10 * MS).unwrap();
            for layer in [Layer::Visible, Layer::Hidden] {
                for k in 0..sim.neurons(layer).len() {
                    let v = sim.potential(layer, k);
                    prop_assert!(v >= lif.v_min - 1e-12 && v <= lif.v_th + 1e-12);
                }
            }
            total += out.record.len();
            all.events.extend(out.record.events);
        }
        prop_assert!(all.is_time_ordered());
        prop_assert!(isi_ok(&all, lif.t_refr_us()));
        let per_neuron: usize = [Layer::Visible, Layer::Hidden]
            .iter()
            .map(|&l| all.counts(l, 0..if l == Layer::Visible { nv } else { nh }).iter().sum::<u64>() as usize)
            .sum();
        prop_assert_eq!(per_neuron, total);
        // Once input stops, activity dies out unless synaptic input alone can
        // reach threshold (a reverberating loop).
        let gain = |ws: &[f64]| lif.alpha * ws.iter().filter(|w| **w > 0.0).sum::<f64>();
        let reverberant = (0..nv).any(|i| gain(bar.row(i)) >= lif.v_th) || (0..nh).any(|j| gain(bar.col(j)) >= lif.v_th);
        if !reverberant {
            sim.run_phase(BarRef::Frozen(&bar), &[], &recv, 10 * MS).unwrap();
            let out = sim.run_phase(BarRef::Frozen(&bar), &[], &recv, 50 * MS).unwrap();
            prop_assert!(out.record.is_empty());
        }
    }
}
