//! Spiking RBM on a PCM crossbar: topology, event-driven contrastive
//! divergence and spike-count inference.

mod train;

pub use train::{evaluate, train, EpochMetrics, Evaluation, PresentationStats, TrainLog};

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{self, label_rates, EncodingConfig, LabelDecision};
use crate::error::{Error, Result};
use crate::pcm::{Device, DifferentialSynapse, SynapseArray};
use crate::rng;
use crate::snn::{
    BarRef, Crossbar, Direction, ExternalSpike, LifParams, PhaseOutcome, Plasticity, Receivers, Simulator,
};
use crate::spikes::{Layer, SpikeRecord};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RbmTopology {
    pub n_image: usize,
    pub n_label: usize,
    pub n_bias_v: usize,
    pub n_hidden: usize,
    pub n_bias_h: usize,
}

impl Default for RbmTopology {
    fn default() -> Self {
        Self {
            n_image: 384,
            n_label: 20,
            n_bias_v: 8,
            n_hidden: 500,
            n_bias_h: 8,
        }
    }
}

impl RbmTopology {
    pub fn n_visible(&self) -> usize {
        self.n_image + self.n_label + self.n_bias_v
    }

    pub fn n_hidden_total(&self) -> usize {
        self.n_hidden + self.n_bias_h
    }

    pub fn synapse_count(&self) -> usize {
        self.n_visible() * self.n_hidden_total()
    }

    pub fn image_range(&self) -> Range<usize> {
        0..self.n_image
    }

    pub fn label_range(&self) -> Range<usize> {
        self.n_image..self.n_image + self.n_label
    }

    pub fn bias_v_range(&self) -> Range<usize> {
        self.n_image + self.n_label..self.n_visible()
    }

    pub fn bias_h_range(&self) -> Range<usize> {
        self.n_hidden..self.n_hidden_total()
    }

    pub fn validate(&self, n_classes: usize) -> Result<()> {
        if self.n_image == 0 || self.n_hidden == 0 {
            return Err(Error::Config("topology needs image and hidden neurons".into()));
        }
        if n_classes == 0 || self.n_label < n_classes {
            return Err(Error::Config(format!(
                "{} label neurons cannot encode {n_classes} classes",
                self.n_label
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Device steps per STDP coincidence.
    pub eta: u32,
    pub t_stdp_ms: f64,
    pub t_data_ms: f64,
    pub t_model_ms: f64,
    pub t_infer_ms: f64,
    pub epochs: usize,
    /// Half-width of the uniform initial weight, as a fraction of w_max.
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            eta: 1,
            t_stdp_ms: 10.0,
            t_data_ms: 50.0,
            t_model_ms: 50.0,
            t_infer_ms: 450.0,
            epochs: 6,
            init_scale: 0.05,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("t_stdp_ms", self.t_stdp_ms),
            ("t_data_ms", self.t_data_ms),
            ("t_model_ms", self.t_model_ms),
            ("t_infer_ms", self.t_infer_ms),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(0.0..=1.0).contains(&self.init_scale) {
            return Err(Error::Config("init_scale must lie in [0, 1]".into()));
        }
        Ok(())
    }

    fn us(ms: f64, dt_us: u64) -> u64 {
        codec::duration_us(ms * 1e-3, dt_us)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Data,
    Model,
    Inference,
}

impl Phase {
    fn salt(self) -> u64 {
        match self {
            Phase::Data => 1,
            Phase::Model => 2,
            Phase::Inference => 3,
        }
    }

    /// Which neurons integrate synaptic input. Driven neurons (image and
    /// bias during the data phase, bias otherwise) are clamped to their
    /// trains; label neurons run free outside the data phase.
    fn receivers(self, t: &RbmTopology) -> Receivers {
        let mut visible = vec![false; t.n_visible()];
        let mut hidden = vec![true; t.n_hidden_total()];
        hidden[t.bias_h_range()].fill(false);
        match self {
            Phase::Data => {}
            Phase::Model => {
                visible[t.image_range()].fill(true);
                visible[t.label_range()].fill(true);
            }
            Phase::Inference => visible[t.label_range()].fill(true),
        }
        Receivers { visible, hidden }
    }
}

/// Crossbar plus the fixed parameters needed to drive it.
#[derive(Debug, Clone)]
pub struct Network {
    pub topology: RbmTopology,
    pub n_classes: usize,
    pub lif: LifParams,
    pub encoding: EncodingConfig,
    pub bar: Crossbar,
}

/// Builds a crossbar with weights uniform in ±`init_scale`·w_max.
pub fn build_network(
    topology: &RbmTopology,
    n_classes: usize,
    device: Device,
    lif: &LifParams,
    encoding: &EncodingConfig,
    init_scale: f64,
    seed: u64,
) -> Result<Network> {
    let mut rng = rng::stream(seed, 0x1417);
    let (r, c) = (topology.n_visible(), topology.n_hidden_total());
    let cells: Vec<DifferentialSynapse> = (0..r * c)
        .map(|_| {
            let w = if init_scale > 0.0 {
                rng.gen_range(-init_scale..=init_scale) * device.w_max()
            } else {
                0.0
            };
            device.synapse_for_weight(w)
        })
        .collect();
    let array = SynapseArray { rows: r, cols: c, device, cells };
    Network::from_array(topology, n_classes, lif, encoding, array)
}

impl Network {
    pub fn from_array(
        topology: &RbmTopology,
        n_classes: usize,
        lif: &LifParams,
        encoding: &EncodingConfig,
        array: SynapseArray,
    ) -> Result<Self> {
        topology.validate(n_classes)?;
        lif.validate()?;
        encoding.validate()?;
        if array.rows != topology.n_visible() || array.cols != topology.n_hidden_total() {
            return Err(Error::Config(format!(
                "checkpoint is {}x{} but the topology needs {}x{}",
                array.rows,
                array.cols,
                topology.n_visible(),
                topology.n_hidden_total()
            )));
        }
        Ok(Self {
            topology: topology.clone(),
            n_classes,
            lif: lif.clone(),
            encoding: encoding.clone(),
            bar: Crossbar::new(array),
        })
    }

    pub fn synapse_count(&self) -> usize {
        self.bar.synapse_count()
    }

    fn simulator(&self) -> Result<Simulator> {
        Simulator::new(
            self.topology.n_visible(),
            self.topology.n_hidden_total(),
            &self.lif,
            self.encoding.dt_us(),
        )
    }

    fn check_image(&self, pixels: &[f64]) -> Result<()> {
        if pixels.len() != self.topology.n_image {
            return Err(Error::Parameter(format!(
                "image has {} pixels, topology expects {}",
                pixels.len(),
                self.topology.n_image
            )));
        }
        Ok(())
    }

    /// External trains for one phase. `pixels` and `label` are only used
    /// where the phase drives them.
    fn drive(&self, phase: Phase, pixels: &[f64], label: Option<usize>, duration_us: u64, seed: u64) -> Result<Vec<ExternalSpike>> {
        let t = &self.topology;
        let e = &self.encoding;
        let mut rv = vec![0.0; t.n_visible()];
        if phase != Phase::Model {
            for (r, &x) in rv[t.image_range()].iter_mut().zip(pixels) {
                *r = x.clamp(0.0, 1.0) * e.r_max_hz;
            }
        }
        if let (Phase::Data, Some(class)) = (phase, label) {
            let lr = label_rates(class, self.n_classes, t.n_label, e)?;
            rv[t.label_range()].copy_from_slice(&lr);
        }
        rv[t.bias_v_range()].fill(e.r_bias_hz);
        let mut rh = vec![0.0; t.n_hidden_total()];
        rh[t.bias_h_range()].fill(e.r_bias_hz);

        let seed = rng::derive_seed(seed, &[phase.salt()]);
        let dt = e.dt_us();
        let mut out: Vec<ExternalSpike> = codec::poisson_trains(&rv, 0, dt, duration_us, seed)
            .into_iter()
            .map(|s| ExternalSpike { time_us: s.time_us, layer: Layer::Visible, neuron: s.neuron })
            .collect();
        out.extend(
            codec::poisson_trains(&rh, 1 << 20, dt, duration_us, seed)
                .into_iter()
                .map(|s| ExternalSpike { time_us: s.time_us, layer: Layer::Hidden, neuron: s.neuron }),
        );
        out.sort_unstable();
        Ok(out)
    }

    /// Data phase then model phase for one labelled image, on a fresh
    /// simulator. The model phase continues from the data-phase state.
    pub fn present(&mut self, pixels: &[f64], label: usize, cfg: &TrainConfig, seed: u64) -> Result<(PhaseOutcome, PhaseOutcome)> {
        self.check_image(pixels)?;
        if label >= self.n_classes {
            return Err(Error::Parameter(format!("label {label} out of range")));
        }
        let mut sim = self.simulator()?;
        let data = self.run_phase(&mut sim, Phase::Data, pixels, Some(label), cfg, seed)?;
        let model = self.run_phase(&mut sim, Phase::Model, pixels, None, cfg, seed)?;
        Ok((data, model))
    }

    /// Runs one plastic phase on `sim`, which may carry state from an
    /// earlier phase.
    pub fn run_phase(
        &mut self,
        sim: &mut Simulator,
        phase: Phase,
        pixels: &[f64],
        label: Option<usize>,
        cfg: &TrainConfig,
        seed: u64,
    ) -> Result<PhaseOutcome> {
        let dt = self.encoding.dt_us();
        let (dur, direction) = match phase {
            Phase::Data => (TrainConfig::us(cfg.t_data_ms, dt), Direction::Potentiate),
            Phase::Model => (TrainConfig::us(cfg.t_model_ms, dt), Direction::Depress),
            Phase::Inference => return Err(Error::Parameter("inference is not a training phase".into())),
        };
        if phase == Phase::Data {
            self.check_image(pixels)?;
        }
        let ext = self.drive(phase, pixels, label, dur, seed)?;
        let rule = Plasticity {
            direction,
            window_us: TrainConfig::us(cfg.t_stdp_ms, dt).max(1),
            magnitude: cfg.eta,
        };
        let recv = phase.receivers(&self.topology);
        let out = sim.run_phase(BarRef::Plastic(&mut self.bar, rule), &ext, &recv, dur)?;
        match phase {
            Phase::Data if out.depressions > 0 => Err(Error::Contract("data phase depressed a synapse".into())),
            Phase::Model if out.potentiations > 0 => Err(Error::Contract("model phase potentiated a synapse".into())),
            _ => Ok(out),
        }
    }

    /// Classifies one image from label-neuron spike counts. Never programs
    /// the crossbar.
    pub fn infer(&self, pixels: &[f64], duration_ms: f64, seed: u64) -> Result<Inference> {
        self.check_image(pixels)?;
        if !(duration_ms > 0.0) {
            return Err(Error::Parameter("inference duration must be positive".into()));
        }
        let dur = TrainConfig::us(duration_ms, self.encoding.dt_us());
        let ext = self.drive(Phase::Inference, pixels, None, dur, seed)?;
        let mut sim = self.simulator()?;
        let recv = Phase::Inference.receivers(&self.topology);
        let out = sim.run_phase(BarRef::Frozen(&self.bar), &ext, &recv, dur)?;
        let decision = codec::decode_label(&out.record, self.topology.label_range(), self.n_classes)?;
        Ok(Inference {
            decision,
            sim_time_s: dur as f64 * 1e-6,
            deliveries: out.deliveries,
            record: out.record,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub decision: LabelDecision,
    pub sim_time_s: f64,
    pub deliveries: u64,
    pub record: SpikeRecord,
}

impl Inference {
    pub fn class(&self) -> usize {
        self.decision.class
    }

    pub fn spikes(&self) -> u64 {
        self.record.len() as u64
    }
}
