use crate::error::{Error, Result};
use crate::physics::{DetectorSim, EventKind};
use crate::readout::{run_trial, AmplifierChain, Comparator};
use crate::rng::{trial_stream, RandomStream};
use crate::stats::Estimate;
use crate::{Bench, DetectorState, OpticalWaveform};

/// Darkness before a trigger pulse, s.
pub const TRIGGER_LEAD: f64 = 2e-9;
/// Darkness after a trigger pulse so the comparator can close, s.
pub const TRIGGER_TAIL: f64 = 20e-9;
/// Highest trigger power searched, W.
pub const MAX_TRIGGER_POWER: f64 = 20e-3;
const MIN_TRIGGER_POWER: f64 = 1e-7;

/// Trigger pulse delivered to one detector: the full pulse when Bob's basis
/// matches Eve's, otherwise half of it (the other half goes to the other
/// detector).
pub fn build_latched_attack(trigger_power: f64, trigger_duration: f64, basis_match: bool, dt: f64) -> OpticalWaveform {
    let p = if basis_match { trigger_power } else { 0.5 * trigger_power };
    OpticalWaveform::rectangle(dt, p, trigger_duration, TRIGGER_LEAD, TRIGGER_TAIL)
}

fn clicks_at(bench: &Bench, state: DetectorState, power: f64, duration: f64, dt: f64) -> Result<bool> {
    let w = build_latched_attack(power, duration, true, dt);
    let out = run_trial(bench, DetectorSim::new(state), &w, &mut trial_stream(0, 0))?;
    Ok(!out.clicks.is_empty())
}

/// Smallest trigger power that makes a latched detector in `state` click at
/// the bench threshold, by bisection in log power.
pub fn min_trigger_power(bench: &Bench, state: DetectorState, duration: f64, dt: f64) -> Result<f64> {
    if !state.is_latched() {
        return Err(Error::param("state", "trigger calibration needs a latched detector"));
    }
    if !clicks_at(bench, state, MAX_TRIGGER_POWER, duration, dt)? {
        return Err(Error::InfeasibleAttack(format!(
            "no trigger up to {MAX_TRIGGER_POWER} W clicks at threshold {} V",
            bench.readout.threshold
        )));
    }
    if clicks_at(bench, state, MIN_TRIGGER_POWER, duration, dt)? {
        return Ok(MIN_TRIGGER_POWER);
    }
    let (mut lo, mut hi) = (MIN_TRIGGER_POWER.ln(), MAX_TRIGGER_POWER.ln());
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if clicks_at(bench, state, mid.exp(), duration, dt)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi.exp())
}

/// Full trigger power that makes every detector in `states` click while half
/// of it clicks none of them. Placed at the geometric centre of the feasible
/// interval.
pub fn calibrate_trigger_power(bench: &Bench, states: &[DetectorState], duration: f64, dt: f64) -> Result<f64> {
    if states.is_empty() {
        return Err(Error::param("states", "need at least one detector"));
    }
    let mins = states
        .iter()
        .map(|&s| min_trigger_power(bench, s, duration, dt))
        .collect::<Result<Vec<_>>>()?;
    let need = mins.iter().copied().fold(0.0, f64::max);
    let limit = 2.0 * mins.iter().copied().fold(f64::INFINITY, f64::min);
    if need >= limit {
        return Err(Error::InfeasibleAttack(format!(
            "trigger window closed: full power must exceed {need:e} W but stay below {limit:e} W"
        )));
    }
    Ok((need * limit).sqrt())
}

/// Click probabilities of a latched detector at full trigger power and at
/// 3 dB and 6 dB below it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackCondition {
    pub full: Estimate,
    pub minus_3db: Estimate,
    pub minus_6db: Estimate,
}

impl AttackCondition {
    /// Detection probability ratio between full power and -3 dB.
    pub fn ratio_3db(&self) -> f64 {
        self.full.p() / self.minus_3db.p()
    }

    pub fn ratio_6db(&self) -> f64 {
        self.full.p() / self.minus_6db.p()
    }

    /// Full power clicks at least `p_hi` of the time and -3 dB at most `p_lo`.
    pub fn holds_3db(&self, p_hi: f64, p_lo: f64) -> bool {
        self.full.p() >= p_hi && self.minus_3db.p() <= p_lo
    }

    pub fn holds_6db(&self, p_hi: f64, p_lo: f64) -> bool {
        self.full.p() >= p_hi && self.minus_6db.p() <= p_lo
    }
}

pub fn attack_condition(
    bench: &Bench,
    state: DetectorState,
    trigger_power: f64,
    duration: f64,
    dt: f64,
    n_trials: u64,
    seed: u64,
) -> Result<AttackCondition> {
    let w = build_latched_attack(trigger_power, duration, true, dt);
    let t = bench.readout.threshold;
    let at = |scale: f64, salt: u64| {
        crate::readout::click_probability(bench, &w.scaled(scale), state, t, n_trials, seed ^ salt)
    };
    Ok(AttackCondition {
        full: at(1.0, 0)?,
        minus_3db: at(0.5, 1)?,
        minus_6db: at(0.25, 2)?,
    })
}

/// Constant illumination meant to latch the detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatchProgram {
    pub power: f64,
    pub duration: f64,
}

/// Outcome of running a [`LatchProgram`].
#[derive(Debug, Clone)]
pub struct LatchReport {
    pub latched: bool,
    pub latch_time: Option<f64>,
    /// Clicks registered while latching.
    pub spurious_clicks: usize,
    pub detector: DetectorSim<f64>,
}

pub fn latch_device(power: f64, duration: f64) -> LatchProgram {
    LatchProgram { power, duration }
}

impl LatchProgram {
    /// Materialise the program as a waveform. Only sensible for short programs.
    pub fn to_waveform(&self, dt: f64) -> OpticalWaveform {
        OpticalWaveform::rectangle(dt, self.power, self.duration, 0.0, 0.0)
    }

    /// Stream the program through `sim` and the readout chain at step `dt`
    /// without storing it.
    ///
    /// Once latched under constant light the output is a step that the
    /// high-pass removes, and switching the light off only swings the output
    /// negative, so the run stops ten high-pass time constants after the
    /// latch with the comparator low.
    pub fn run(&self, bench: &Bench, sim: DetectorSim<f64>, dt: f64, rng: &mut RandomStream) -> Result<LatchReport> {
        bench.validate()?;
        if !(self.power >= 0.0 && self.power.is_finite()) {
            return Err(Error::NonFinitePower(self.power));
        }
        let mut sim = sim;
        let mut chain = AmplifierChain::new(&bench.readout, dt)?;
        let mut cmp = Comparator::new(&bench.readout, dt);
        let mut events = Vec::new();
        let settle = 10.0 / (2.0 * std::f64::consts::PI * bench.readout.hp_cutoff);
        let n = (self.duration / dt).round() as usize;
        let mut spurious = 0;
        let mut latch_time = sim.state.is_latched().then_some(0.0);
        for k in 0..n {
            let t = dt * k as f64;
            let v = sim.step(self.power, dt, t, &bench.detector, &bench.bias, rng, &mut events)?;
            if latch_time.is_none() && events.iter().any(|e| e.kind == EventKind::LatchEntered) {
                latch_time = Some(t);
            }
            events.clear();
            if cmp.process(k, chain.process(v)).is_some() {
                spurious += 1;
            }
            if let Some(tl) = latch_time {
                if t - tl > settle && !cmp.is_high() {
                    break;
                }
            }
        }
        spurious += cmp.finish().map_or(0, |_| 1);
        Ok(LatchReport {
            latched: sim.state.is_latched(),
            latch_time,
            spurious_clicks: spurious,
            detector: sim,
        })
    }
}
