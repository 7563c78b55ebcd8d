//! Event-driven simulator of a phase-change-memory spiking RBM accelerator
//! for speech-command recognition, with an MFCC front end, a reference
//! fully-convolutional baseline and spike/MAC/energy accounting.

pub mod codec;
pub mod config;
pub mod dataset;
pub mod error;
pub mod fcnn;
pub mod frontend;
pub mod pcm;
pub mod rbm;
pub mod report;
pub mod rng;
pub mod snn;
pub mod synth;
pub mod spikes;

pub use error::{Error, Result};
