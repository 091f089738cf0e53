//! Seeded Monte Carlo over detector + readout trials.

use super::{AmplifierChain, ClickEvent, Comparator, ReadoutParams};
use crate::error::{Error, Result};
use crate::physics::{drive, BiasSource, DetectorParams, DetectorSim, DetectorState, EventRecord, OpticalWaveform};
use crate::rng::{trial_stream, RandomStream};
use crate::scalar::Real;
use crate::stats::{fwhm_from_samples, Estimate};

/// Everything needed to turn light into clicks.
#[derive(Debug, Clone, PartialEq)]
pub struct Bench<T> {
    pub detector: DetectorParams<T>,
    pub bias: BiasSource<T>,
    pub readout: ReadoutParams<T>,
}

impl<T: Real> Default for Bench<T> {
    fn default() -> Self {
        Self {
            detector: DetectorParams::default(),
            bias: BiasSource::default(),
            readout: ReadoutParams::default(),
        }
    }
}

impl<T: Real> Bench<T> {
    pub fn validate(&self) -> Result<()> {
        self.detector.validate()?;
        self.bias.validate()?;
        self.readout.validate()
    }

    pub fn with_threshold(&self, threshold: T) -> Self {
        Self {
            readout: self.readout.with_threshold(threshold),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrialOutcome<T> {
    pub clicks: Vec<ClickEvent<T>>,
    pub events: Vec<EventRecord<T>>,
    pub detector: DetectorSim<T>,
}

/// Run one detector through `waveform` and the readout chain without storing
/// the trace.
pub fn run_trial<T: Real>(
    bench: &Bench<T>,
    sim: DetectorSim<T>,
    waveform: &OpticalWaveform<T>,
    rng: &mut RandomStream,
) -> Result<TrialOutcome<T>> {
    let mut sim = sim;
    let mut chain = AmplifierChain::new(&bench.readout, waveform.dt)?;
    let mut cmp = Comparator::new(&bench.readout, waveform.dt);
    let mut clicks = Vec::new();
    let mut events = Vec::new();
    drive(&mut sim, waveform, T::zero(), &bench.detector, &bench.bias, rng, &mut events, |k, v| {
        if let Some(c) = cmp.process(k, chain.process(v)) {
            clicks.push(c);
        }
    })?;
    clicks.extend(cmp.finish());
    Ok(TrialOutcome {
        clicks,
        events,
        detector: sim,
    })
}

/// Probability of at least one click, estimated over `n_trials` seeded trials.
pub fn click_probability<T: Real>(
    bench: &Bench<T>,
    waveform: &OpticalWaveform<T>,
    state0: DetectorState<T>,
    threshold: T,
    n_trials: u64,
    seed: u64,
) -> Result<Estimate> {
    if n_trials < 100 {
        return Err(Error::InsufficientStatistics(format!("{n_trials} trials, need at least 100")));
    }
    waveform.validate()?;
    let bench = bench.with_threshold(threshold);
    let mut hits = 0;
    for trial in 0..n_trials {
        let out = run_trial(&bench, DetectorSim::new(state0), waveform, &mut trial_stream(seed, trial))?;
        hits += u64::from(!out.clicks.is_empty());
    }
    Ok(Estimate::new(hits, n_trials))
}

/// FWHM of the first-click crossing time inside `window` (whole record if
/// `None`), Gaussian-equivalent from the sample spread.
pub fn click_jitter<T: Real>(
    bench: &Bench<T>,
    waveform: &OpticalWaveform<T>,
    state0: DetectorState<T>,
    threshold: T,
    n_trials: u64,
    seed: u64,
    window: Option<(T, T)>,
) -> Result<T> {
    waveform.validate()?;
    let bench = bench.with_threshold(threshold);
    let (lo, hi) = window.unwrap_or((T::neg_infinity(), T::infinity()));
    let mut times = Vec::new();
    for trial in 0..n_trials {
        let out = run_trial(&bench, DetectorSim::new(state0), waveform, &mut trial_stream(seed, trial))?;
        if let Some(c) = out.clicks.iter().find(|c| c.t_cross >= lo && c.t_cross <= hi) {
            times.push(c.t_cross.as_f64());
        }
    }
    if n_trials == 0 || 2 * times.len() as u64 <= n_trials {
        return Err(Error::InsufficientStatistics(format!(
            "{} of {n_trials} trials clicked; jitter needs a click probability above 0.5",
            times.len()
        )));
    }
    let fwhm = fwhm_from_samples(&times).unwrap_or(0.0);
    Ok(T::lit(fwhm))
}
