//! The nanowire as a time-stepped stochastic state machine.

use rand::Rng;

use super::latched::latched_iv_unchecked;
use super::params::{BiasSource, DetectorParams};
use super::sensitivity::{recovery_current, sensitivity_at};
use super::waveform::{samples_for, ElectricalTrace, EventKind, EventRecord, OpticalWaveform};
use crate::error::{Error, Result};
use crate::rng::{trial_stream, RandomStream};
use crate::scalar::{Real, LOAD_OHMS};

/// Longest step the hotspot model is calibrated for.
pub const MAX_STEP: f64 = 100e-12;

/// Recovery is treated as complete after this many time constants.
const SETTLE_TAU: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DetectorState<T> {
    Superconducting,
    HotspotActive { time_remaining: T },
    Recovering { i_now: T, t_since_reset: T },
    Latched { r_latched: T, v_bias: T },
}

impl<T: Real> DetectorState<T> {
    pub fn is_latched(&self) -> bool {
        matches!(self, DetectorState::Latched { .. })
    }

    /// Latched state sitting at dark current `i_latched` behind `bias`.
    pub fn latched_at(i_latched: T, bias: &BiasSource<T>) -> Self {
        let v_bias = bias.latched_voltage(i_latched);
        DetectorState::Latched {
            r_latched: v_bias / i_latched,
            v_bias,
        }
    }
}

/// Warning returned when [`reset_latch`] is applied to a non-latched state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NotLatched;

/// Lower the bias below the latched current and restore it.
pub fn reset_latch<T: Real>(state: DetectorState<T>) -> (DetectorState<T>, Option<NotLatched>) {
    match state {
        DetectorState::Latched { .. } => (DetectorState::Superconducting, None),
        other => {
            log::warn!("reset_latch on a detector that is not latched: {other:?}");
            (other, Some(NotLatched))
        }
    }
}

/// Step-size dependent constants, recomputed only when `dt` changes.
#[derive(Debug, Clone)]
struct StepConsts<T> {
    dt: T,
    window_len: usize,
    inv_window: T,
    duty_alpha: T,
    lag_alpha: T,
    dark_q: T,
    photons_per_joule: T,
}

/// Detector state plus the memory the transition rules need: the optical
/// energy window, the time since full recovery, the heating integrator and
/// the lagged latched current.
#[derive(Debug, Clone)]
pub struct DetectorSim<T> {
    pub state: DetectorState<T>,
    since_full_recovery: T,
    duty: T,
    latched_current: T,
    window: Vec<T>,
    window_pos: usize,
    consts: Option<StepConsts<T>>,
}

impl<T: Real> Default for DetectorSim<T> {
    fn default() -> Self {
        Self::new(DetectorState::Superconducting)
    }
}

impl<T: Real> DetectorSim<T> {
    pub fn new(state: DetectorState<T>) -> Self {
        let latched_current = match state {
            DetectorState::Latched { r_latched, v_bias } => v_bias / r_latched,
            _ => T::zero(),
        };
        Self {
            state,
            since_full_recovery: T::zero(),
            duty: T::zero(),
            latched_current,
            window: Vec::new(),
            window_pos: 0,
            consts: None,
        }
    }

    /// Heating integrator value (suppressed-time duty cycle).
    pub fn duty(&self) -> T {
        self.duty
    }

    pub fn since_full_recovery(&self) -> T {
        self.since_full_recovery
    }

    /// Reset a latched detector, clearing the heating memory.
    pub fn reset_latch(&mut self) -> Option<NotLatched> {
        let (state, warn) = reset_latch(self.state);
        if warn.is_none() {
            *self = Self::new(state);
        }
        warn
    }

    /// Current through the nanowire, A.
    pub fn current(&self, params: &DetectorParams<T>) -> T {
        match self.state {
            DetectorState::Superconducting => params.i_b,
            DetectorState::HotspotActive { .. } => params.f_reset * params.i_b,
            DetectorState::Recovering { i_now, .. } => i_now,
            DetectorState::Latched { .. } => self.latched_current,
        }
    }

    fn fully_recovered(&self, params: &DetectorParams<T>) -> bool {
        match self.state {
            DetectorState::Superconducting => true,
            DetectorState::Recovering { i_now, .. } => i_now >= params.recovery_threshold_frac * params.i_b,
            _ => false,
        }
    }

    fn output_voltage(&self, params: &DetectorParams<T>) -> T {
        let load = T::lit(LOAD_OHMS);
        match self.state {
            DetectorState::Latched { r_latched, v_bias } => (v_bias / r_latched - self.latched_current) * load,
            _ => (params.i_b - self.current(params)) * load,
        }
    }

    fn consts(&mut self, dt: T, params: &DetectorParams<T>) -> StepConsts<T> {
        match &self.consts {
            Some(c) if c.dt == dt => c.clone(),
            _ => {
                let window_len = samples_for(params.sens_window, dt).max(1);
                let c = StepConsts {
                    dt,
                    window_len,
                    inv_window: T::one() / T::from_usize_lossy(window_len),
                    duty_alpha: T::one() - (-dt / params.latch_duty_tau).exp(),
                    lag_alpha: T::one() - (-dt / params.latched_lag).exp(),
                    dark_q: T::one() - (-params.dark_rate * dt).exp(),
                    photons_per_joule: T::one() / params.photon_energy(),
                };
                if self.window.len() != window_len {
                    self.window = vec![T::zero(); window_len];
                    self.window_pos = 0;
                }
                self.consts = Some(c.clone());
                c
            }
        }
    }

    /// Advance one step of length `dt` under optical power `p_sample` (before
    /// coupling). Events are appended to `events` stamped with `t_now`.
    /// Returns the load voltage at the end of the step.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        p_sample: T,
        dt: T,
        t_now: T,
        params: &DetectorParams<T>,
        bias: &BiasSource<T>,
        rng: &mut R,
        events: &mut Vec<EventRecord<T>>,
    ) -> Result<T> {
        if !p_sample.is_finite() {
            return Err(Error::NonFinitePower(p_sample.as_f64()));
        }
        if !(dt > T::zero()) {
            return Err(Error::StepTooCoarse {
                dt: dt.as_f64(),
                reason: "step must be positive".into(),
            });
        }
        if dt > T::lit(MAX_STEP * (1.0 + 1e-9)) {
            return Err(Error::StepTooCoarse {
                dt: dt.as_f64(),
                reason: format!("hotspot model requires dt <= {MAX_STEP:e} s"),
            });
        }
        let p = p_sample.max(T::zero()) * params.coupling;
        let c = self.consts(dt, params);

        // optical energy received within the sensitivity window
        self.window[self.window_pos] = p * dt;
        self.window_pos = (self.window_pos + 1) % c.window_len;
        let window_energy: T = self.window.iter().copied().sum();

        match self.state {
            DetectorState::Latched { r_latched, v_bias } => {
                let i_dark = v_bias / r_latched;
                let (target, _) = latched_iv_unchecked(v_bias, p, i_dark, params);
                self.latched_current = self.latched_current + (target - self.latched_current) * c.lag_alpha;
                return Ok(self.output_voltage(params));
            }
            DetectorState::HotspotActive { time_remaining } => {
                let left = time_remaining - dt;
                self.state = if left > T::zero() {
                    DetectorState::HotspotActive { time_remaining: left }
                } else {
                    DetectorState::Recovering {
                        i_now: params.f_reset * params.i_b,
                        t_since_reset: T::zero(),
                    }
                };
            }
            DetectorState::Superconducting | DetectorState::Recovering { .. } => {
                let delay = match self.state {
                    DetectorState::Recovering { t_since_reset, .. } => t_since_reset,
                    _ => T::infinity(),
                };
                let recovered = self.fully_recovered(params);
                let q_hot = if window_energy > T::zero() {
                    let (e50, slope) = sensitivity_at(delay, &params.sens_e50_table);
                    let z = slope * (window_energy / e50).log10();
                    // per-sample share of the window probability: 1 - (1 - p)^(1/n)
                    let ln_miss = -softplus(z);
                    -(ln_miss * c.inv_window).exp_m1()
                } else {
                    T::zero()
                };
                let (q_dark, q_lin) = if recovered {
                    let photons = p * dt * c.photons_per_joule;
                    (c.dark_q, -(-params.eta * photons).exp_m1())
                } else {
                    (T::zero(), T::zero())
                };
                let u = T::lit(rng.gen::<f64>());
                let fired = if u < q_dark {
                    Some(EventKind::DarkCount)
                } else {
                    let q_any = T::one() - (T::one() - q_dark) * (T::one() - q_lin) * (T::one() - q_hot);
                    (u < q_any).then_some(EventKind::HotspotFormed)
                };
                if let Some(kind) = fired {
                    events.push(EventRecord { kind, time: t_now });
                    self.state = DetectorState::HotspotActive {
                        time_remaining: params.t_hotspot,
                    };
                } else if let DetectorState::Recovering { t_since_reset, .. } = self.state {
                    let t = t_since_reset + dt;
                    self.state = if t >= T::lit(SETTLE_TAU) * params.tau_rec {
                        DetectorState::Superconducting
                    } else {
                        DetectorState::Recovering {
                            i_now: recovery_current(t, params),
                            t_since_reset: t,
                        }
                    };
                }
            }
        }

        let suppressed = !self.fully_recovered(params);
        if suppressed {
            self.since_full_recovery = self.since_full_recovery + dt;
        } else {
            self.since_full_recovery = T::zero();
        }
        let x = if suppressed { T::one() } else { T::zero() };
        self.duty = self.duty + (x - self.duty) * c.duty_alpha;

        if self.since_full_recovery > params.latch_hold_time || self.duty > params.latch_duty_threshold {
            self.enter_latch(p, params, bias, rng);
            events.push(EventRecord {
                kind: EventKind::LatchEntered,
                time: t_now,
            });
        }
        Ok(self.output_voltage(params))
    }

    fn enter_latch<R: Rng + ?Sized>(&mut self, p: T, params: &DetectorParams<T>, bias: &BiasSource<T>, rng: &mut R) {
        let u = T::lit(rng.gen::<f64>());
        let i_lat = params.i_latched_nominal + params.i_latched_jitter * (u + u - T::one());
        self.state = DetectorState::latched_at(i_lat, bias);
        if let DetectorState::Latched { r_latched, v_bias } = self.state {
            self.latched_current = latched_iv_unchecked(v_bias, p, v_bias / r_latched, params).0;
        }
    }

    /// Let the detector sit in darkness for `duration` without sampling it.
    /// Dark counts during the gap are not generated; the caller accounts for
    /// them if needed.
    pub fn idle(&mut self, duration: T, params: &DetectorParams<T>) {
        if duration <= T::zero() {
            return;
        }
        self.window.iter_mut().for_each(|e| *e = T::zero());
        match self.state {
            DetectorState::Latched { r_latched, v_bias } => {
                self.latched_current = v_bias / r_latched;
                return;
            }
            DetectorState::HotspotActive { time_remaining } => {
                let rest = (duration - time_remaining).max(T::zero());
                let t = rest;
                self.state = recovered_state(t, params);
            }
            DetectorState::Recovering { t_since_reset, .. } => {
                self.state = recovered_state(t_since_reset + duration, params);
            }
            DetectorState::Superconducting => {}
        }
        self.duty = self.duty * (-duration / params.latch_duty_tau).exp();
        self.since_full_recovery = if self.fully_recovered(params) {
            T::zero()
        } else {
            self.since_full_recovery + duration
        };
    }
}

fn recovered_state<T: Real>(t: T, params: &DetectorParams<T>) -> DetectorState<T> {
    if t >= T::lit(SETTLE_TAU) * params.tau_rec {
        DetectorState::Superconducting
    } else {
        DetectorState::Recovering {
            i_now: recovery_current(t, params),
            t_since_reset: t,
        }
    }
}

/// ln(1 + e^z) without overflow; the log of the logistic miss probability is its negation.
#[inline]
fn softplus<T: Real>(z: T) -> T {
    if z > T::zero() {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Single-step wrapper with explicit inputs and outputs.
pub fn step_detector<T: Real, R: Rng + ?Sized>(
    sim: &DetectorSim<T>,
    p_sample: T,
    dt: T,
    params: &DetectorParams<T>,
    bias: &BiasSource<T>,
    rng: &mut R,
) -> Result<(DetectorSim<T>, T, Vec<EventRecord<T>>)> {
    let mut next = sim.clone();
    let mut events = Vec::new();
    let v = next.step(p_sample, dt, T::zero(), params, bias, rng, &mut events)?;
    Ok((next, v, events))
}

/// Drive `sim` through `waveform`, calling `on_sample(k, v_out)` for every
/// waveform sample. Waveform steps longer than [`MAX_STEP`] are split into
/// equal sub-steps; the voltage reported is the one at the sample's end.
pub fn drive<T: Real, R: Rng + ?Sized, F: FnMut(usize, T)>(
    sim: &mut DetectorSim<T>,
    waveform: &OpticalWaveform<T>,
    t0: T,
    params: &DetectorParams<T>,
    bias: &BiasSource<T>,
    rng: &mut R,
    events: &mut Vec<EventRecord<T>>,
    mut on_sample: F,
) -> Result<()> {
    let sub = (waveform.dt / T::lit(MAX_STEP)).ceil().to_usize().unwrap_or(1).max(1);
    let h = waveform.dt / T::from_usize_lossy(sub);
    for (k, &p) in waveform.power.iter().enumerate() {
        let mut v = T::zero();
        for j in 0..sub {
            let t = t0 + waveform.dt * T::from_usize_lossy(k) + h * T::from_usize_lossy(j);
            v = sim.step(p, h, t, params, bias, rng, events)?;
        }
        on_sample(k, v);
    }
    Ok(())
}

/// Simulate a detector starting superconducting.
pub fn simulate<T: Real>(
    params: &DetectorParams<T>,
    bias: &BiasSource<T>,
    waveform: &OpticalWaveform<T>,
    seed: u64,
) -> Result<ElectricalTrace<T>> {
    simulate_from(DetectorSim::default(), params, bias, waveform, &mut trial_stream(seed, 0)).map(|(t, _)| t)
}

/// Simulate from an arbitrary starting detector, returning the trace and the
/// final detector.
pub fn simulate_from<T: Real>(
    mut sim: DetectorSim<T>,
    params: &DetectorParams<T>,
    bias: &BiasSource<T>,
    waveform: &OpticalWaveform<T>,
    rng: &mut RandomStream,
) -> Result<(ElectricalTrace<T>, DetectorSim<T>)> {
    waveform.validate()?;
    let mut trace = ElectricalTrace::zeros(waveform.dt, waveform.len());
    let mut events = Vec::new();
    drive(&mut sim, waveform, T::zero(), params, bias, rng, &mut events, |k, v| {
        trace.v_out[k] = v
    })?;
    trace.events = events;
    Ok((trace, sim))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::default_params;

    fn setup() -> (DetectorParams<f64>, BiasSource<f64>) {
        (default_params(), BiasSource::default())
    }

    #[test]
    fn dark_detector_stays_quiet() {
        let (p, b) = setup();
        let w = OpticalWaveform::zeros(10e-12, 100_000);
        for seed in 0..3 {
            let t = simulate(&p, &b, &w, seed).unwrap();
            assert!(t.v_out.iter().all(|&v| v == 0.0));
            assert!(t.events.is_empty());
        }
    }

    #[test]
    fn step_rejects_bad_input() {
        let (p, b) = setup();
        let sim = DetectorSim::default();
        let mut rng = trial_stream(0, 0);
        assert!(matches!(
            step_detector(&sim, f64::NAN, 1e-11, &p, &b, &mut rng),
            Err(Error::NonFinitePower(_))
        ));
        assert!(step_detector(&sim, 0.0, 0.0, &p, &b, &mut rng).is_err());
        assert!(step_detector(&sim, 0.0, 1e-9, &p, &b, &mut rng).is_err());
    }

    #[test]
    fn single_photon_pulse_shape() {
        let (p, b) = setup();
        let mut sim = DetectorSim::default();
        let mut rng = trial_stream(1, 0);
        let mut ev = Vec::new();
        // one bright sample guarantees a hotspot in a recovered detector
        let v0 = sim.step(1.0, 10e-12, 0.0, &p, &b, &mut rng, &mut ev).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].kind, EventKind::HotspotFormed);
        let peak = (1.0 - p.f_reset) * p.i_b * 50.0;
        assert!((v0 - peak).abs() < 1e-15);
        let mut last = v0;
        for k in 1..40_000 {
            let v = sim.step(0.0, 10e-12, k as f64 * 1e-11, &p, &b, &mut rng, &mut ev).unwrap();
            assert!(v <= last + 1e-18);
            last = v;
        }
        assert!(matches!(sim.state, DetectorState::Superconducting));
        assert_eq!(last, 0.0);
    }

    #[test]
    fn reset_latch_semantics() {
        let b = BiasSource::<f64>::default();
        let latched = DetectorState::latched_at(7e-6, &b);
        assert_eq!(reset_latch(latched), (DetectorState::Superconducting, None));
        assert_eq!(
            reset_latch(DetectorState::<f64>::Superconducting),
            (DetectorState::Superconducting, Some(NotLatched))
        );
        let rec = DetectorState::Recovering {
            i_now: 1e-5,
            t_since_reset: 1e-9,
        };
        assert_eq!(reset_latch(rec), (rec, Some(NotLatched)));
    }

    #[test]
    fn bright_cw_latches_after_hold_time() {
        let (p, b) = setup();
        let w = OpticalWaveform::rectangle(20e-12, 5e-3, 3e-6, 0.0, 0.0);
        let t = simulate(&p, &b, &w, 3).unwrap();
        let latch = t.event_times(EventKind::LatchEntered);
        assert_eq!(latch.len(), 1);
        assert!(latch[0] > p.latch_hold_time - 40e-12 && latch[0] < 1.2e-6, "{}", latch[0]);
    }

    #[test]
    fn coarse_waveforms_are_substepped() {
        let (p, b) = setup();
        let w = OpticalWaveform::rectangle(1e-9, 2.5e-3, 48e-9, 2e-9, 100e-9);
        let t = simulate(&p, &b, &w, 5).unwrap();
        assert_eq!(t.len(), w.len());
        assert!(t.count(EventKind::HotspotFormed) > 5);
    }

    #[test]
    fn idle_completes_recovery() {
        let (p, _) = setup();
        let mut sim = DetectorSim::new(DetectorState::HotspotActive { time_remaining: 1e-9 });
        sim.idle(5e-9, &p);
        assert!(matches!(sim.state, DetectorState::Recovering { .. }));
        sim.idle(1e-6, &p);
        assert!(matches!(sim.state, DetectorState::Superconducting));
    }
}
