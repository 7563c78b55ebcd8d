//! Event-driven LIF simulation over a PCM crossbar.

mod crossbar;
mod kernel;
mod neuron;

pub use crossbar::{Crossbar, Direction};
pub use kernel::{
    coincidence_scan, propagate, propagate_backward, propagate_forward, run, BarRef, ExternalSpike, PhaseOutcome,
    Plasticity, Receivers, Simulator,
};
pub use neuron::{LifNeuron, LifParams};
