use crate::error::{Error, Result};
use crate::scalar::Real;

/// Sampled optical power envelope with a relative optical phase per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct OpticalWaveform<T> {
    pub dt: T,
    pub power: Vec<T>,
    pub phase: Vec<T>,
    pub wavelength: T,
}

impl<T: Real> OpticalWaveform<T> {
    pub fn new(dt: T, power: Vec<T>, phase: Vec<T>, wavelength: T) -> Result<Self> {
        let w = Self {
            dt,
            power,
            phase,
            wavelength,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero() && self.dt.is_finite()) {
            return Err(Error::InvalidWaveform(format!("dt must be positive, got {}", self.dt)));
        }
        if self.power.len() != self.phase.len() {
            return Err(Error::InvalidWaveform(format!(
                "power has {} samples but phase has {}",
                self.power.len(),
                self.phase.len()
            )));
        }
        if let Some((k, p)) = self
            .power
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p >= T::zero()))
        {
            return Err(Error::InvalidWaveform(format!("power[{k}] = {p} is not a finite non-negative value")));
        }
        if let Some(k) = self.phase.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidWaveform(format!("phase[{k}] is not finite")));
        }
        Ok(())
    }

    pub fn zeros(dt: T, len: usize) -> Self {
        Self {
            dt,
            power: vec![T::zero(); len],
            phase: vec![T::zero(); len],
            wavelength: T::lit(1550e-9),
        }
    }

    /// Number of samples covering `duration` at this waveform's step.
    pub fn samples_for(&self, duration: T) -> usize {
        samples_for(duration, self.dt)
    }

    /// A rectangular pulse of `power` lasting `duration`, preceded by `lead`
    /// and followed by `tail` of darkness.
    pub fn rectangle(dt: T, power: T, duration: T, lead: T, tail: T) -> Self {
        let n_lead = samples_for(lead, dt);
        let n_on = samples_for(duration, dt);
        let n_tail = samples_for(tail, dt);
        let mut w = Self::zeros(dt, n_lead + n_on + n_tail);
        w.power[n_lead..n_lead + n_on].iter_mut().for_each(|p| *p = power);
        w
    }

    pub fn len(&self) -> usize {
        self.power.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power.is_empty()
    }

    pub fn duration(&self) -> T {
        self.dt * T::from_usize_lossy(self.len())
    }

    pub fn time(&self, k: usize) -> T {
        self.dt * T::from_usize_lossy(k)
    }

    /// Total optical energy, Σ P·dt, with compensated summation.
    pub fn energy(&self) -> T {
        let (mut sum, mut comp) = (T::zero(), T::zero());
        for &p in &self.power {
            let t = sum + p;
            comp = comp + if sum.abs() >= p.abs() { (sum - t) + p } else { (p - t) + sum };
            sum = t;
        }
        (sum + comp) * self.dt
    }

    /// Add `energy` as a single-sample deposit at time `t` with phase `phase`.
    /// Returns the sample index used.
    pub fn add_short_pulse(&mut self, t: T, energy: T, phase: T) -> usize {
        let k = (t / self.dt).round().to_usize().unwrap_or(0);
        if k >= self.len() {
            self.power.resize(k + 1, T::zero());
            self.phase.resize(k + 1, T::zero());
        }
        self.power[k] = self.power[k] + energy / self.dt;
        self.phase[k] = phase;
        k
    }

    /// Extend with zero power so the waveform has at least `len` samples.
    pub fn pad_to(&mut self, len: usize) {
        if len > self.len() {
            self.power.resize(len, T::zero());
            self.phase.resize(len, T::zero());
        }
    }

    /// Multiply every sample's power by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        let mut w = self.clone();
        w.power.iter_mut().for_each(|p| *p = *p * factor);
        w
    }

    pub fn peak_power(&self) -> T {
        self.power.iter().copied().fold(T::zero(), T::max)
    }
}

pub(crate) fn samples_for<T: Real>(duration: T, dt: T) -> usize {
    if duration <= T::zero() {
        return 0;
    }
    (duration / dt).round().to_usize().unwrap_or(0)
}

/// Kind of a physics event recorded in a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    HotspotFormed,
    LatchEntered,
    LatchExited,
    DarkCount,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::HotspotFormed => "HotspotFormed",
            EventKind::LatchEntered => "LatchEntered",
            EventKind::LatchExited => "LatchExited",
            EventKind::DarkCount => "DarkCount",
        }
    }
}

impl std::str::FromStr for EventKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "HotspotFormed" => EventKind::HotspotFormed,
            "LatchEntered" => EventKind::LatchEntered,
            "LatchExited" => EventKind::LatchExited,
            "DarkCount" => EventKind::DarkCount,
            other => return Err(Error::Parse { line: 0, reason: format!("unknown event kind `{other}`") }),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord<T> {
    pub kind: EventKind,
    pub time: T,
}

/// Voltage across the 50 Ω load before amplification, plus physics events.
#[derive(Debug, Clone, PartialEq)]
pub struct ElectricalTrace<T> {
    pub dt: T,
    pub v_out: Vec<T>,
    pub events: Vec<EventRecord<T>>,
}

impl<T: Real> ElectricalTrace<T> {
    pub fn zeros(dt: T, len: usize) -> Self {
        Self {
            dt,
            v_out: vec![T::zero(); len],
            events: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.v_out.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v_out.is_empty()
    }

    pub fn peak(&self) -> T {
        self.v_out.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    pub fn event_times(&self, kind: EventKind) -> Vec<T> {
        self.events.iter().filter(|e| e.kind == kind).map(|e| e.time).collect()
    }
}
