//! Design workbench for clock-driven spiking neural network accelerators.
//!
//! The crate models the accelerator at the integer level: saturating
//! fixed-point words ([`fxp`]), the six neuron datapaths ([`neuron`]), a
//! multi-layer simulator with cycle accounting ([`network`]), float-to-fixed
//! conversion and bit-width sweeps ([`quant`]), analytic BRAM and latency
//! models ([`estimate`]), VHDL emission ([`hdlgen`]) and file formats
//! ([`codec`]).

pub mod codec;
pub mod error;
pub mod estimate;
pub mod fxp;
pub mod hdlgen;
pub mod network;
pub mod neuron;
pub mod quant;
pub mod rng;
pub mod spikes;

pub use error::{Error, Result};
pub use fxp::{FxpFormat, FxpValue};
pub use network::{LayerSpec, NetworkSpec, Propagation, RunReport, SimOptions, WeightMatrix};
pub use neuron::{NeuronModel, NeuronOrder, NeuronSpec, NeuronState, ResetMode};
pub use spikes::SpikeStream;
