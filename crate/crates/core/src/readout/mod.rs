//! RF amplifier chain and threshold comparator.

mod chain;
mod comparator;
mod montecarlo;

pub use chain::{amplify, AmplifierChain};
pub use comparator::{discriminate, ClickEvent, Comparator};
pub use montecarlo::{click_jitter, click_probability, run_trial, Bench, TrialOutcome};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutParams<T> {
    /// High-pass corner, Hz.
    pub hp_cutoff: T,
    /// Low-pass corner, Hz.
    pub lp_cutoff: T,
    /// Amplifier voltage gain.
    pub gain: T,
    /// Voltage loss between the amplifier and the counter, dB.
    pub splitter_loss_db: T,
    /// Comparator threshold, V. Kept on the `threshold_resolution` grid.
    pub threshold: T,
    /// Minimum continuous time above threshold for a click, s.
    pub min_dwell: T,
    /// Threshold setting resolution, V.
    pub threshold_resolution: T,
    /// Comparator hysteresis, V.
    pub hysteresis: T,
}

impl<T: Real> Default for ReadoutParams<T> {
    fn default() -> Self {
        Self {
            hp_cutoff: T::lit(0.1e6),
            lp_cutoff: T::lit(1.5e9),
            gain: T::lit(100.0),
            // sets a 50 mV single-photon peak and a ~21 mV latched saturation
            splitter_loss_db: T::lit(4.4),
            threshold: T::lit(10e-3),
            min_dwell: T::lit(3e-9),
            threshold_resolution: T::lit(0.2e-3),
            hysteresis: T::zero(),
        }
    }
}

impl<T: Real> ReadoutParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.hp_cutoff > T::zero() && self.hp_cutoff < self.lp_cutoff) {
            return Err(Error::param("readout.hp_cutoff", "require 0 < hp_cutoff < lp_cutoff"));
        }
        if !(self.gain > T::zero()) {
            return Err(Error::param("readout.gain", "must be positive"));
        }
        if !(self.min_dwell >= T::zero()) {
            return Err(Error::param("readout.min_dwell", "must be non-negative"));
        }
        if !(self.threshold_resolution > T::zero()) {
            return Err(Error::param("readout.threshold_resolution", "must be positive"));
        }
        if !(self.hysteresis >= T::zero()) {
            return Err(Error::param("readout.hysteresis", "must be non-negative"));
        }
        if !self.threshold.is_finite() {
            return Err(Error::param("readout.threshold", "must be finite"));
        }
        Ok(())
    }

    /// Copy with `threshold` rounded to the setting grid.
    pub fn with_threshold(&self, threshold: T) -> Self {
        Self {
            threshold: self.quantize(threshold),
            ..self.clone()
        }
    }

    pub fn quantize(&self, threshold: T) -> T {
        (threshold / self.threshold_resolution).round() * self.threshold_resolution
    }

    /// Voltage gain from the 50 Ω load to the comparator input.
    pub fn total_gain(&self) -> T {
        self.gain * T::lit(10.0).powf(-self.splitter_loss_db / T::lit(20.0))
    }
}
