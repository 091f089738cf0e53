//! Simulation of a superconducting nanowire single-photon detector (SNSPD)
//! and its readout chain under bright, tailored illumination.
//!
//! The crate is organised bottom-up:
//!
//! * [`physics`] – the nanowire as a stochastic state machine (hotspots,
//!   current recovery, latching, latched-state I-V) driven by optical power
//!   waveforms.
//! * [`readout`] – the band-limited RF amplifier chain and the threshold
//!   comparator with a minimum dwell time.
//! * [`attack`] – eavesdropper waveforms for latched-state and
//!   deadtime-extension control, Bob's unbalanced interferometer, and
//!   Monte Carlo evaluation of control fidelity.
//! * [`qkd`] – intercept-resend sessions against DPS-QKD and BB84 receivers.
//! * [`io`] – parameter files and CSV formats.
//!
//! The physics and readout layers are generic over the scalar type
//! ([`Real`], implemented for `f32` and `f64`). The attack and protocol layers
//! work in `f64`; the aliases below name the `f64` instantiations.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod attack;
pub mod error;
pub mod io;
pub mod physics;
pub mod qkd;
pub mod readout;
pub mod rng;
pub mod scalar;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Real;

/// Detector parameters in double precision.
pub type DetectorParams = physics::DetectorParams<f64>;
/// Bias source in double precision.
pub type BiasSource = physics::BiasSource<f64>;
/// Optical waveform in double precision.
pub type OpticalWaveform = physics::OpticalWaveform<f64>;
/// Electrical trace in double precision.
pub type ElectricalTrace = physics::ElectricalTrace<f64>;
/// Detector state in double precision.
pub type DetectorState = physics::DetectorState<f64>;
/// Readout parameters in double precision.
pub type ReadoutParams = readout::ReadoutParams<f64>;
/// Comparator click in double precision.
pub type ClickEvent = readout::ClickEvent<f64>;
/// Detector, bias and readout bundled together in double precision.
pub type Bench = readout::Bench<f64>;

/// Version string written into every CSV header.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
