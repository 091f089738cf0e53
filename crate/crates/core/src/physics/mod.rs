//! Nanowire physics: parameters, stimulus and trace types, current recovery,
//! hotspot sensitivity, latched-state I-V and the stochastic state machine.

mod calibrate;
mod detector;
mod latched;
mod params;
mod sensitivity;
mod waveform;

pub use calibrate::{calibrate_from_anchors, CalibrationAnchor};
pub use detector::{
    drive, reset_latch, simulate, simulate_from, step_detector, DetectorSim, DetectorState, NotLatched, MAX_STEP,
};
pub use latched::{cw_slope, latched_iv, latched_iv_with_dark, latched_pulse_response};
pub use params::{default_params, default_sens_table, BiasSource, DetectorParams, SensAnchor};
pub use sensitivity::{
    hotspot_probability, logistic, recovery_current, sensitivity_at, single_photon_click_probability,
};
pub use waveform::{ElectricalTrace, EventKind, EventRecord, OpticalWaveform};
