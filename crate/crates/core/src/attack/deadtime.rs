use std::f64::consts::{FRAC_PI_2, PI, TAU};

use super::interferometer::InterferometerParams;
use crate::error::{Error, Result};
use crate::physics::{logistic, sensitivity_at, DetectorParams};
use crate::scalar::LOAD_OHMS;
use crate::{Bench, OpticalWaveform};

/// Longest control sequence the readout chain tolerates, s.
pub const LATCH_SAFE_DURATION: f64 = 500e-9;
/// Nominal width of a short pulse, used only when describing segments, s.
pub const SHORT_PULSE_FWHM: f64 = 53e-12;

/// One of Bob's two detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Target {
    D0,
    D1,
}

impl Target {
    pub fn index(self) -> usize {
        match self {
            Target::D0 => 0,
            Target::D1 => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Target::D0
        } else {
            Target::D1
        }
    }

    pub fn other(self) -> Self {
        match self {
            Target::D0 => Target::D1,
            Target::D1 => Target::D0,
        }
    }

    /// Phase difference across one arm delay that routes light here.
    pub fn phase_step(self) -> f64 {
        match self {
            Target::D0 => 0.0,
            Target::D1 => PI,
        }
    }
}

impl std::fmt::Display for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Target::D0 => "D0",
            Target::D1 => "D1",
        })
    }
}

impl std::str::FromStr for Target {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "D0" | "d0" | "0" => Ok(Target::D0),
            "D1" | "d1" | "1" => Ok(Target::D1),
            other => Err(Error::param("target", format!("expected D0 or D1, got `{other}`"))),
        }
    }
}

/// Bright pulse that blinds both detectors at once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LongPulse {
    pub start: f64,
    pub power: f64,
    pub duration: f64,
    /// Phase advance per arm delay, rad.
    pub phase_step: f64,
}

/// Short pulse deposited within one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShortPulse {
    pub time: f64,
    pub energy: f64,
    pub phase: f64,
    /// Detector the pulse is routed to together with its predecessor.
    pub target: Target,
}

/// Eve's optical output for one controlled click, optionally repeated.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlDiagram {
    pub target: Target,
    pub delta_t: f64,
    pub long_pulse: LongPulse,
    /// Steering pulses followed by the readout pulse, in time order.
    pub short_pulses: Vec<ShortPulse>,
    pub readout_time: f64,
    /// Length of one block, s.
    pub block_duration: f64,
    pub repeat_count: usize,
}

/// One piece of a diagram for export.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub t_start: f64,
    pub duration: f64,
    pub power: f64,
    pub phase: f64,
    pub label: &'static str,
}

impl ControlDiagram {
    pub fn duration(&self) -> f64 {
        self.block_duration * self.repeat_count as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeat_count == 0 {
            return Err(Error::param("repeat_count", "must be at least 1"));
        }
        if self.duration() > LATCH_SAFE_DURATION * (1.0 + 1e-9) {
            return Err(Error::InfeasibleAttack(format!(
                "diagram lasts {:.1} ns, longer than the {:.0} ns the readout holds a level",
                self.duration() * 1e9,
                LATCH_SAFE_DURATION * 1e9
            )));
        }
        if self.short_pulses.windows(2).any(|w| w[1].time <= w[0].time) {
            return Err(Error::param("short_pulses", "times must be strictly increasing"));
        }
        if self.short_pulses.iter().any(|p| !(p.energy >= 0.0)) || !(self.long_pulse.power >= 0.0) {
            return Err(Error::param("short_pulses", "energies must be non-negative"));
        }
        Ok(())
    }

    /// Same diagram chained `n` times back to back.
    pub fn with_repeat(&self, n: usize) -> Result<Self> {
        let d = Self {
            repeat_count: n,
            ..self.clone()
        };
        d.validate()?;
        Ok(d)
    }

    /// Readout pulse time of every repetition.
    pub fn readout_times(&self) -> Vec<f64> {
        (0..self.repeat_count)
            .map(|r| r as f64 * self.block_duration + self.readout_time)
            .collect()
    }

    /// The diagram with only the readout pulse left among the short pulses.
    pub fn without_steering(&self) -> Self {
        Self {
            short_pulses: self.short_pulses.last().copied().into_iter().collect(),
            ..self.clone()
        }
    }

    /// Every power and energy multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut d = self.clone();
        d.long_pulse.power *= factor;
        d.short_pulses.iter_mut().for_each(|p| p.energy *= factor);
        d
    }

    pub fn steering_pulses(&self) -> &[ShortPulse] {
        &self.short_pulses[..self.short_pulses.len().saturating_sub(1)]
    }

    /// Sample the diagram at step `dt`, which must divide the arm delay.
    pub fn render(&self, dt: f64) -> Result<OpticalWaveform> {
        self.validate()?;
        let iface = InterferometerParams {
            delta_t: self.delta_t,
            ..Default::default()
        };
        iface.delay_samples(dt)?;
        let n = (self.duration() / dt).round() as usize;
        let mut w = OpticalWaveform::zeros(dt, n);
        let lp = &self.long_pulse;
        let n_long = (lp.duration / dt).round() as usize;
        for r in 0..self.repeat_count {
            let offset = r as f64 * self.block_duration;
            let k0 = ((offset + lp.start) / dt).round() as usize;
            w.pad_to(k0 + n_long);
            for j in 0..n_long {
                let steps = ((j as f64 * dt) / self.delta_t + 1e-9).floor();
                w.power[k0 + j] = lp.power;
                w.phase[k0 + j] = lp.phase_step * steps;
            }
            for p in &self.short_pulses {
                w.add_short_pulse(offset + p.time, p.energy, p.phase);
            }
        }
        w.pad_to(n);
        Ok(w)
    }

    /// Piecewise description: one segment per arm delay of the long pulse and
    /// one per short pulse.
    pub fn segments(&self) -> Vec<Segment> {
        let mut out = Vec::new();
        let lp = &self.long_pulse;
        for r in 0..self.repeat_count {
            let offset = r as f64 * self.block_duration;
            let mut t = 0.0;
            let mut step = 0.0;
            while t < lp.duration * (1.0 - 1e-12) {
                let len = self.delta_t.min(lp.duration - t);
                out.push(Segment {
                    t_start: offset + lp.start + t,
                    duration: len,
                    power: lp.power,
                    phase: lp.phase_step * step,
                    label: "long",
                });
                t += self.delta_t;
                step += 1.0;
            }
            let last = self.short_pulses.len().saturating_sub(1);
            for (i, p) in self.short_pulses.iter().enumerate() {
                out.push(Segment {
                    t_start: offset + p.time,
                    duration: SHORT_PULSE_FWHM,
                    power: p.energy / SHORT_PULSE_FWHM,
                    phase: p.phase,
                    label: if i == last { "readout" } else { "steer" },
                });
            }
        }
        out
    }
}

/// Tunables of the deadtime-control diagram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeadtimeConfig {
    pub long_power: f64,
    pub long_duration: f64,
    /// Darkness before the long pulse, s.
    pub lead: f64,
    /// Short-pulse spacing; must divide the arm delay. `None` uses the arm delay.
    pub steering_period: Option<f64>,
    /// Short-pulse energy before the interferometer. `None` picks it from the
    /// sensitivity table and the extinction.
    pub steering_energy: Option<f64>,
    /// Longest time from the first short pulse to the readout. `None` uses
    /// one period less than the full recovery delay.
    pub hold: Option<f64>,
    pub repeat_count: usize,
}

impl Default for DeadtimeConfig {
    fn default() -> Self {
        Self {
            long_power: 2e-3,
            long_duration: 53e-9,
            lead: 1e-9,
            steering_period: None,
            steering_energy: None,
            hold: None,
            repeat_count: 1,
        }
    }
}

/// Build the diagram that makes `target` click at a chosen time while the
/// other detector is kept dead.
///
/// A long pulse split equally blinds both detectors. Short pulses on a grid
/// commensurate with the arm delay then keep re-firing the other detector,
/// each pair of neighbours interfering toward it, while `target` recovers.
/// The readout pulse follows on the next grid slot with the phase that
/// routes it to `target`.
pub fn build_deadtime_control_diagram(
    target: Target,
    iface: &InterferometerParams,
    bench: &Bench,
    threshold: f64,
    config: &DeadtimeConfig,
) -> Result<ControlDiagram> {
    iface.validate()?;
    bench.validate()?;
    let det = &bench.detector;
    let period = config.steering_period.unwrap_or(iface.delta_t);
    let per_delay = iface.delta_t / period;
    let m = per_delay.round();
    if !(period > 0.0) || m < 1.0 || (per_delay - m).abs() > 1e-6 * m {
        return Err(Error::param(
            "attack.steering_period",
            format!("{period:e} s does not divide the arm delay {:e} s", iface.delta_t),
        ));
    }
    let m = m as usize;
    if !(config.long_power >= 0.0 && config.long_duration > 0.0 && config.lead >= 0.0) {
        return Err(Error::param("attack.long_pulse", "power, duration and lead must be valid"));
    }

    let x = iface.leak_fraction();
    let l = iface.transmission();
    let table = &det.sens_e50_table;
    let floor = sensitivity_at(f64::INFINITY, table).0;
    let (e_refire, _) = sensitivity_at((period - det.t_hotspot).max(0.0), table);

    // single-photon pulse height at the comparator and how long it stays above threshold
    let v_pulse = (1.0 - det.f_reset) * det.i_b * LOAD_OHMS * bench.readout.total_gain();
    if !(threshold > 0.0 && threshold < v_pulse) {
        return Err(Error::InfeasibleAttack(format!(
            "threshold {threshold} V is outside the working range (0, {v_pulse:.4}) V"
        )));
    }
    let t_above = det.tau_rec * (v_pulse / threshold).ln();
    let latest_refire = t_above - period;
    if latest_refire <= 0.0 {
        return Err(Error::InfeasibleAttack(format!(
            "steering period {period:e} s exceeds the {t_above:e} s a pulse stays above threshold"
        )));
    }
    let (e_needed, _) = sensitivity_at(latest_refire, table);

    // The target must drop below threshold before the readout but must not
    // reach full recovery, where steering leakage is seen at single-photon
    // efficiency.
    let hold = config
        .hold
        .unwrap_or_else(|| det.full_recovery_delay() - period);
    let n_read = (hold / period + 1e-9).floor() as usize;
    let n_min = (((t_above + det.t_hotspot) / period) - 1e-9).ceil().max(m as f64) as usize;
    if n_read < n_min {
        return Err(Error::InfeasibleAttack(format!(
            "hold {hold:e} s is too short for the target to fall below threshold ({:e} s needed)",
            n_min as f64 * period
        )));
    }
    let energy = match config.steering_energy {
        Some(e) if e >= 0.0 => e,
        Some(e) => return Err(Error::param("attack.steering_energy", format!("negative energy {e}"))),
        None => {
            let hi = (2.0 * e_refire).min(0.5 * floor / x) / l;
            let lo = (2.0 * e_needed / ((1.0 - x) * l)).min(hi);
            // the high-pass corner sags the baseline over the sequence
            let sag = v_pulse * (config.long_duration + hold) * TAU * bench.readout.hp_cutoff;
            let t_hold = det.tau_rec * (v_pulse / (threshold + sag)).ln();
            let risk = |e: f64| control_risk(e, x, l, period, t_hold, n_read, det);
            (0..=STEERING_GRID)
                .map(|i| lo * (hi / lo).powf(i as f64 / STEERING_GRID as f64))
                .min_by(|a, b| risk(*a).total_cmp(&risk(*b)))
                .unwrap_or(hi)
        }
    };
    if x * l * energy > floor {
        return Err(Error::InfeasibleAttack(format!(
            "leakage {:e} J per steering pulse exceeds the recovered-detector e50 {floor:e} J at {} dB extinction",
            x * l * energy,
            iface.extinction_db
        )));
    }
    if (1.0 - x) * l * energy < 2.0 * e_needed {
        return Err(Error::InfeasibleAttack(format!(
            "steering pulses of {:e} J cannot hold the other detector: {:e} J needed at {} dB extinction",
            (1.0 - x) * l * energy,
            2.0 * e_needed,
            iface.extinction_db
        )));
    }

    let long_end = config.lead + config.long_duration;
    let t0 = long_end + iface.delta_t;
    let other = target.other();
    let mut phases = Vec::with_capacity(n_read + 1);
    let mut pulses = Vec::with_capacity(n_read + 1);
    for k in 0..=n_read {
        let to = if k == n_read { target } else { other };
        let phase = if k < m { 0.0 } else { phases[k - m] + to.phase_step() };
        phases.push(phase);
        pulses.push(ShortPulse {
            time: t0 + k as f64 * period,
            energy,
            phase,
            target: to,
        });
    }
    let readout_time = pulses[n_read].time;
    let d = ControlDiagram {
        target,
        delta_t: iface.delta_t,
        long_pulse: LongPulse {
            start: config.lead,
            power: config.long_power,
            duration: config.long_duration,
            phase_step: FRAC_PI_2,
        },
        short_pulses: pulses,
        readout_time,
        block_duration: readout_time + iface.delta_t,
        repeat_count: config.repeat_count,
    };
    d.validate()?;
    Ok(d)
}

const STEERING_GRID: usize = 200;

/// Predicted chance that one diagram fails: the other detector's comparator
/// drops between refires and a later pulse or the readout echo clicks it, the
/// target fires on leakage before the readout, or the readout misses.
/// `t_above` is how long a refire keeps the comparator high.
fn control_risk(energy: f64, x: f64, l: f64, period: f64, t_above: f64, n_read: usize, det: &DetectorParams<f64>) -> f64 {
    let table = &det.sens_e50_table;
    let p = |e: f64, delay: f64| {
        let (e50, slope) = sensitivity_at(delay, table);
        logistic(e, e50, slope)
    };
    let routed = (1.0 - x) * l * energy;
    let leak = x * l * energy;
    let delay = |j: usize| j as f64 * period - det.t_hotspot;
    // weight by periods since the other detector last fired
    let mut dist = vec![1.0];
    let mut escape = 0.0;
    for _ in 1..n_read {
        let mut next = vec![0.0; dist.len() + 1];
        for (j, &w) in dist.iter().enumerate() {
            let d = delay(j + 1);
            if d >= t_above {
                escape += w;
                continue;
            }
            let q = p(routed, d);
            next[0] += w * q;
            next[j + 1] += w * (1.0 - q);
        }
        dist = next;
    }
    for (j, &w) in dist.iter().enumerate() {
        let d = delay(j + 2);
        if d >= t_above {
            escape += w * p(l * energy / 4.0, d);
        }
    }
    let early: f64 = (1..n_read).map(|k| p(leak, k as f64 * period)).sum();
    let miss = 1.0 - p(routed, n_read as f64 * period);
    escape + early + miss
}
