use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::crossbar::{Crossbar, Direction};
use super::neuron::{LifNeuron, LifParams};
use crate::error::{Error, Result};
use crate::spikes::{Layer, Spike, SpikeRecord};

/// A forced spike from an external source. Times are relative to the start
/// of the phase that receives it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ExternalSpike {
    pub time_us: u64,
    pub layer: Layer,
    pub neuron: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    External,
    Arrival,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Queued {
    time_us: u64,
    layer: Layer,
    neuron: u32,
    kind: Kind,
}

/// STDP gating for a phase: every coincidence within `window_us` programs
/// the synapse by `magnitude` steps in `direction`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Plasticity {
    pub direction: Direction,
    pub window_us: u64,
    pub magnitude: u32,
}

pub enum BarRef<'a> {
    Frozen(&'a Crossbar),
    Plastic(&'a mut Crossbar, Plasticity),
}

impl BarRef<'_> {
    fn bar(&self) -> &Crossbar {
        match self {
            BarRef::Frozen(b) => b,
            BarRef::Plastic(b, _) => b,
        }
    }
}

/// Which neurons integrate synaptic input. Neurons that do not receive can
/// still be driven by external spikes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Receivers {
    pub visible: Vec<bool>,
    pub hidden: Vec<bool>,
}

impl Receivers {
    pub fn all(n_visible: usize, n_hidden: usize) -> Self {
        Self {
            visible: vec![true; n_visible],
            hidden: vec![true; n_hidden],
        }
    }

    fn of(&self, layer: Layer) -> &[bool] {
        match layer {
            Layer::Visible => &self.visible,
            Layer::Hidden => &self.hidden,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PhaseOutcome {
    pub record: SpikeRecord,
    pub potentiations: u64,
    pub depressions: u64,
    /// Synaptic deliveries into receiving neurons.
    pub deliveries: u64,
    /// External spikes dropped because their target was refractory.
    pub suppressed: u64,
}

impl PhaseOutcome {
    pub fn updates(&self) -> u64 {
        self.potentiations + self.depressions
    }
}

/// Precomputed leak factors for whole-tick gaps.
#[derive(Debug, Clone)]
struct Leak {
    dt_us: u64,
    table: Vec<f64>,
}

impl Leak {
    fn new(p: &LifParams, dt_us: u64) -> Self {
        let table = (0..64u64).map(|k| p.decay(k * dt_us)).collect();
        Self { dt_us, table }
    }

    #[inline]
    fn factor(&self, elapsed_us: u64, p: &LifParams) -> f64 {
        if elapsed_us % self.dt_us == 0 {
            if let Some(&f) = self.table.get((elapsed_us / self.dt_us) as usize) {
                return f;
            }
        }
        p.decay(elapsed_us)
    }
}

/// Delivers spike `src` of `src_layer` at `t_us` into every receiving
/// neuron of the opposite layer. Neurons that fire are appended to `fired`.
/// Returns the delivery count.
pub fn propagate(
    src_layer: Layer,
    src: usize,
    t_us: u64,
    bar: &Crossbar,
    targets: &mut [LifNeuron],
    receives: &[bool],
    p: &LifParams,
    fired: &mut Vec<u32>,
) -> Result<u64> {
    let weights = match src_layer {
        Layer::Visible => bar.row(src),
        Layer::Hidden => bar.col(src),
    };
    if targets.len() != weights.len() || receives.len() != weights.len() {
        return Err(Error::Parameter(format!(
            "{} targets for {} synapses",
            targets.len(),
            weights.len()
        )));
    }
    let mut n = 0;
    for (k, (nrn, &w)) in targets.iter_mut().zip(weights).enumerate() {
        if !receives[k] {
            continue;
        }
        n += 1;
        if nrn.deliver(w, t_us, p)? {
            fired.push(k as u32);
        }
    }
    Ok(n)
}

/// Visible spike `i` reaching all hidden neurons at `t_us`.
pub fn propagate_forward(
    i: usize,
    t_us: u64,
    bar: &Crossbar,
    hidden: &mut [LifNeuron],
    p: &LifParams,
) -> Result<(Vec<u32>, u64)> {
    let mut fired = Vec::new();
    let all = vec![true; hidden.len()];
    let n = propagate(Layer::Visible, i, t_us, bar, hidden, &all, p, &mut fired)?;
    Ok((fired, n))
}

/// Hidden spike `j` reaching all visible neurons at `t_us`.
pub fn propagate_backward(
    j: usize,
    t_us: u64,
    bar: &Crossbar,
    visible: &mut [LifNeuron],
    p: &LifParams,
) -> Result<(Vec<u32>, u64)> {
    let mut fired = Vec::new();
    let all = vec![true; visible.len()];
    let n = propagate(Layer::Hidden, j, t_us, bar, visible, &all, p, &mut fired)?;
    Ok((fired, n))
}

/// Event-driven two-layer simulator on an integer microsecond clock.
/// Neuron state and in-flight spikes carry over between phases until
/// [`reset`](Self::reset).
#[derive(Debug, Clone)]
pub struct Simulator {
    lif: LifParams,
    leak: Leak,
    dt_us: u64,
    syn_us: u64,
    visible: Vec<LifNeuron>,
    hidden: Vec<LifNeuron>,
    queue: BinaryHeap<Reverse<Queued>>,
    now_us: u64,
    last_pop_us: u64,
}

impl Simulator {
    pub fn new(n_visible: usize, n_hidden: usize, lif: &LifParams, dt_us: u64) -> Result<Self> {
        lif.validate()?;
        if dt_us == 0 {
            return Err(Error::Config("dt must be positive".into()));
        }
        let syn_us = lif.t_syn_us().max(dt_us);
        Ok(Self {
            leak: Leak::new(lif, dt_us),
            lif: lif.clone(),
            dt_us,
            syn_us,
            visible: vec![LifNeuron::at_rest(lif); n_visible],
            hidden: vec![LifNeuron::at_rest(lif); n_hidden],
            queue: BinaryHeap::new(),
            now_us: 0,
            last_pop_us: 0,
        })
    }

    pub fn reset(&mut self) {
        let rest = LifNeuron::at_rest(&self.lif);
        self.visible.fill(rest);
        self.hidden.fill(rest);
        self.queue.clear();
        self.now_us = 0;
        self.last_pop_us = 0;
    }

    pub fn dt_us(&self) -> u64 {
        self.dt_us
    }

    pub fn now_us(&self) -> u64 {
        self.now_us
    }

    pub fn neurons(&self, layer: Layer) -> &[LifNeuron] {
        match layer {
            Layer::Visible => &self.visible,
            Layer::Hidden => &self.hidden,
        }
    }

    /// Leaked potential of one neuron at the current clock.
    pub fn potential(&self, layer: Layer, n: usize) -> f64 {
        self.neurons(layer)[n].potential_at(self.now_us, &self.lif)
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Advances the clock by `duration_us`, processing every event that
    /// falls inside the phase.
    pub fn run_phase(
        &mut self,
        mut bar: BarRef<'_>,
        external: &[ExternalSpike],
        receivers: &Receivers,
        duration_us: u64,
    ) -> Result<PhaseOutcome> {
        let (nv, nh) = (self.visible.len(), self.hidden.len());
        {
            let b = bar.bar();
            if b.rows() != nv || b.cols() != nh {
                return Err(Error::Parameter(format!(
                    "crossbar {}x{} does not match {nv}x{nh} neurons",
                    b.rows(),
                    b.cols()
                )));
            }
        }
        if receivers.visible.len() != nv || receivers.hidden.len() != nh {
            return Err(Error::Parameter("receiver masks do not match layer sizes".into()));
        }
        let start = self.now_us;
        let end = start + duration_us;
        for e in external {
            let size = if e.layer == Layer::Visible { nv } else { nh };
            if e.neuron as usize >= size {
                return Err(Error::Parameter(format!("external spike targets missing neuron {}", e.neuron)));
            }
            if e.time_us >= duration_us {
                continue;
            }
            self.queue.push(Reverse(Queued {
                time_us: start + e.time_us,
                layer: e.layer,
                neuron: e.neuron,
                kind: Kind::External,
            }));
        }

        let mut out = PhaseOutcome::default();
        let mut last_v: Vec<Option<u64>> = vec![None; nv];
        let mut last_h: Vec<Option<u64>> = vec![None; nh];
        let mut tick: Vec<Spike> = Vec::new();
        let mut fired: Vec<u32> = Vec::new();

        while let Some(&Reverse(head)) = self.queue.peek() {
            if head.time_us >= end {
                break;
            }
            let t = head.time_us;
            if t < self.last_pop_us {
                return Err(Error::Contract(format!("event queue went back in time to {t} µs")));
            }
            self.last_pop_us = t;
            tick.clear();
            while let Some(&Reverse(ev)) = self.queue.peek() {
                if ev.time_us != t {
                    break;
                }
                self.queue.pop();
                match ev.kind {
                    Kind::External => {
                        let nrn = match ev.layer {
                            Layer::Visible => &mut self.visible[ev.neuron as usize],
                            Layer::Hidden => &mut self.hidden[ev.neuron as usize],
                        };
                        if nrn.is_refractory(t) {
                            out.suppressed += 1;
                        } else {
                            nrn.fire(t, &self.lif);
                            tick.push(Spike { time_us: t, layer: ev.layer, neuron: ev.neuron });
                        }
                    }
                    Kind::Arrival => {
                        let target = ev.layer.other();
                        fired.clear();
                        out.deliveries += self.arrive(bar.bar(), ev.layer, ev.neuron as usize, t, receivers.of(target), &mut fired);
                        tick.extend(fired.iter().map(|&k| Spike { time_us: t, layer: target, neuron: k }));
                    }
                }
            }
            tick.sort_unstable_by_key(|s| (s.layer, s.neuron));
            for s in &tick {
                out.record.push(*s);
                if receivers.of(s.layer.other()).iter().any(|&r| r) {
                    self.queue.push(Reverse(Queued {
                        time_us: t + self.syn_us,
                        layer: s.layer,
                        neuron: s.neuron,
                        kind: Kind::Arrival,
                    }));
                }
            }
            if let BarRef::Plastic(b, rule) = &mut bar {
                stdp_tick(b, *rule, t, &tick, &mut last_v, &mut last_h, &mut out);
            }
        }
        self.now_us = end;
        Ok(out)
    }

    fn arrive(&mut self, bar: &Crossbar, src_layer: Layer, src: usize, t: u64, receives: &[bool], fired: &mut Vec<u32>) -> u64 {
        let (weights, targets) = match src_layer {
            Layer::Visible => (bar.row(src), &mut self.hidden),
            Layer::Hidden => (bar.col(src), &mut self.visible),
        };
        let mut n = 0;
        for (k, (nrn, &w)) in targets.iter_mut().zip(weights).enumerate() {
            if !receives[k] {
                continue;
            }
            n += 1;
            // Queue order guarantees t ≥ last_update for every target.
            let decay = self.leak.factor(t - nrn.last_update_us, &self.lif);
            if nrn.integrate(w, t, decay, &self.lif) {
                fired.push(k as u32);
            }
        }
        n
    }
}

/// End-of-tick coincidence scan. A visible spike pairs with hidden spikes
/// strictly earlier in the window; a hidden spike pairs with visible spikes
/// in the window including the current tick. Each synapse is programmed at
/// most once per triggering spike.
fn stdp_tick(
    bar: &mut Crossbar,
    rule: Plasticity,
    t: u64,
    tick: &[Spike],
    last_v: &mut [Option<u64>],
    last_h: &mut [Option<u64>],
    out: &mut PhaseOutcome,
) {
    let in_window = |last: Option<u64>| last.is_some_and(|tl| t - tl < rule.window_us);
    let mut count = 0u64;
    for s in tick.iter().filter(|s| s.layer == Layer::Visible) {
        let i = s.neuron as usize;
        for (j, &lh) in last_h.iter().enumerate() {
            if lh.is_some_and(|tl| tl < t) && in_window(lh) {
                bar.update(i, j, rule.direction, rule.magnitude);
                count += 1;
            }
        }
    }
    for s in tick.iter().filter(|s| s.layer == Layer::Visible) {
        last_v[s.neuron as usize] = Some(t);
    }
    for s in tick.iter().filter(|s| s.layer == Layer::Hidden) {
        let j = s.neuron as usize;
        for (i, &lv) in last_v.iter().enumerate() {
            if in_window(lv) {
                bar.update(i, j, rule.direction, rule.magnitude);
                count += 1;
            }
        }
    }
    for s in tick.iter().filter(|s| s.layer == Layer::Hidden) {
        last_h[s.neuron as usize] = Some(t);
    }
    match rule.direction {
        Direction::Potentiate => out.potentiations += count,
        Direction::Depress => out.depressions += count,
    }
}

/// Runs a fresh simulator over `external` for `duration_us` with every
/// neuron receiving and no plasticity.
pub fn run(
    external: &[ExternalSpike],
    bar: &Crossbar,
    lif: &LifParams,
    dt_us: u64,
    duration_us: u64,
) -> Result<SpikeRecord> {
    if duration_us == 0 {
        return Err(Error::Parameter("duration must be positive".into()));
    }
    let mut sim = Simulator::new(bar.rows(), bar.cols(), lif, dt_us)?;
    let recv = Receivers::all(bar.rows(), bar.cols());
    Ok(sim.run_phase(BarRef::Frozen(bar), external, &recv, duration_us)?.record)
}

/// Offline coincidence count over a finished record: for each spike, the
/// number of opposite-layer neurons with a spike inside the window
/// (exclusive of the current time for visible-triggered pairs).
pub fn coincidence_scan(record: &SpikeRecord, n_visible: usize, n_hidden: usize, window_us: u64) -> u64 {
    let mut times: [Vec<Vec<u64>>; 2] = [vec![Vec::new(); n_visible], vec![Vec::new(); n_hidden]];
    for s in &record.events {
        times[s.layer as usize][s.neuron as usize].push(s.time_us);
    }
    let mut total = 0;
    for s in &record.events {
        let t = s.time_us;
        let strict = s.layer == Layer::Visible;
        for partner in &times[s.layer.other() as usize] {
            let hit = partner
                .iter()
                .any(|&o| o <= t && t - o < window_us && !(strict && o == t));
            if hit {
                total += 1;
            }
        }
    }
    total
}
