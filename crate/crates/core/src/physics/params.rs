use crate::error::{Error, Result};
use crate::scalar::Real;

/// One anchor of the hotspot sensitivity table: at `delay` after the start of
/// current recovery a pulse of energy `e50` forms a hotspot with probability
/// one half, and the logistic steepness in log10-energy is `slope`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensAnchor<T> {
    pub delay: T,
    pub e50: T,
    pub slope: T,
}

impl<T: Real> SensAnchor<T> {
    pub fn new(delay: f64, e50: f64, slope: f64) -> Self {
        Self {
            delay: T::lit(delay),
            e50: T::lit(e50),
            slope: T::lit(slope),
        }
    }
}

/// Calibrated constants of the nanowire, its bias point and its sensitivity.
///
/// All quantities are SI. See [`DetectorParams::default`] for the calibrated
/// values and [`DetectorParams::validate`] for the enforced invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorParams<T> {
    /// Critical current, A.
    pub i_c: T,
    /// Bias current in the normal regime, A.
    pub i_b: T,
    /// Resistance of the whole nanowire when normally conductive, Ω.
    pub r_normal_total: T,
    /// Nominal steady current in the latched state, A.
    pub i_latched_nominal: T,
    /// Half-range of the latched current drawn at each latch event, A.
    pub i_latched_jitter: T,
    /// Current recovery time constant, s.
    pub tau_rec: T,
    /// Fraction of `i_b` the current drops to when a hotspot forms.
    pub f_reset: T,
    /// How long a hotspot holds the current at the reset level, s.
    pub t_hotspot: T,
    /// Single-photon detection efficiency at full recovery.
    pub eta: T,
    /// Dark count rate at full recovery, 1/s.
    pub dark_rate: T,
    /// Latched-state resistance increase per optical watt at low bias voltage, Ω/W.
    pub cw_slope_low_v: T,
    /// Same at 10 V, Ω/W.
    pub cw_slope_high_v: T,
    /// Continuous time without full recovery after which the wire latches, s.
    pub latch_hold_time: T,
    /// Current fraction of `i_b` counted as fully recovered.
    pub recovery_threshold_frac: T,
    /// Hotspot sensitivity anchors, sorted by delay.
    pub sens_e50_table: Vec<SensAnchor<T>>,
    /// Optical and polarization coupling factor.
    pub coupling: T,
    /// Operating wavelength, m.
    pub wavelength: T,
    /// Energy integration window of the hotspot sensitivity, s. Optical
    /// energy arriving within this window counts as one pulse.
    pub sens_window: T,
    /// Thermal response time of the latched-state current, s.
    pub latched_lag: T,
    /// Time constant of the suppression duty-cycle heating integrator, s.
    pub latch_duty_tau: T,
    /// Integrated suppression duty cycle above which the wire latches.
    pub latch_duty_threshold: T,
}

impl<T: Real> Default for DetectorParams<T> {
    fn default() -> Self {
        let i_b = 22.5e-6;
        Self {
            i_c: T::lit(i_b / 0.85),
            i_b: T::lit(i_b),
            r_normal_total: T::lit(2.3e6),
            i_latched_nominal: T::lit(7e-6),
            i_latched_jitter: T::lit(1e-6),
            tau_rec: T::lit(15e-9),
            f_reset: T::lit(0.26),
            t_hotspot: T::lit(1e-9),
            eta: T::lit(2.2e-5),
            dark_rate: T::lit(0.5),
            // 375 kΩ per 20 mW at low voltage, 110 kΩ per 20 mW at 10 V
            cw_slope_low_v: T::lit(375e3 / 20e-3),
            cw_slope_high_v: T::lit(110e3 / 20e-3),
            latch_hold_time: T::lit(1e-6),
            recovery_threshold_frac: T::lit(0.95),
            sens_e50_table: default_sens_table(),
            coupling: T::one(),
            wavelength: T::lit(1550e-9),
            sens_window: T::lit(160e-12),
            latched_lag: T::lit(1e-9),
            latch_duty_tau: T::lit(1e-3),
            latch_duty_threshold: T::lit(0.15),
        }
    }
}

/// Logistic sensitivity anchors. 3 ns / 78 fJ and 8 ns / 25 fJ are the
/// measured 50 % points; the rest are fitted so that continuous illumination
/// at 0.25 mW and 0.5 mW re-forms hotspots every ~6 ns and ~2.7 ns.
pub fn default_sens_table<T: Real>() -> Vec<SensAnchor<T>> {
    const FJ: f64 = 1e-15;
    const NS: f64 = 1e-9;
    [
        (0.0, 160.0),
        (1.0, 120.0),
        (2.0, 95.0),
        (3.0, 78.0),
        (5.0, 55.0),
        (8.0, 25.0),
        (10.0, 16.0),
        (20.0, 6.0),
        (40.0, 4.0),
    ]
    .iter()
    .map(|&(d, e)| SensAnchor::new(d * NS, e * FJ, 16.0))
    .collect()
}

/// Convenience: the calibrated defaults.
pub fn default_params<T: Real>() -> DetectorParams<T> {
    DetectorParams::default()
}

impl<T: Real> DetectorParams<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be positive and finite, got {v}")))
            }
        };
        positive("i_c", self.i_c)?;
        positive("i_b", self.i_b)?;
        positive("i_latched_nominal", self.i_latched_nominal)?;
        positive("r_normal_total", self.r_normal_total)?;
        positive("tau_rec", self.tau_rec)?;
        positive("t_hotspot", self.t_hotspot)?;
        positive("cw_slope_low_v", self.cw_slope_low_v)?;
        positive("cw_slope_high_v", self.cw_slope_high_v)?;
        positive("latch_hold_time", self.latch_hold_time)?;
        positive("wavelength", self.wavelength)?;
        positive("sens_window", self.sens_window)?;
        positive("latched_lag", self.latched_lag)?;
        positive("latch_duty_tau", self.latch_duty_tau)?;
        positive("latch_duty_threshold", self.latch_duty_threshold)?;
        if !(self.i_latched_nominal < self.i_b && self.i_b < self.i_c) {
            return Err(Error::param("i_b", "require 0 < i_latched_nominal < i_b < i_c"));
        }
        if self.i_latched_jitter < T::zero() || self.i_latched_jitter >= self.i_latched_nominal {
            return Err(Error::param("i_latched_jitter", "must lie in [0, i_latched_nominal)"));
        }
        let unit_open = |name: &str, v: T| {
            if v > T::zero() && v < T::one() {
                Ok(())
            } else {
                Err(Error::param(name, format!("must lie in (0, 1), got {v}")))
            }
        };
        unit_open("f_reset", self.f_reset)?;
        unit_open("eta", self.eta)?;
        unit_open("recovery_threshold_frac", self.recovery_threshold_frac)?;
        if self.recovery_threshold_frac <= self.f_reset {
            return Err(Error::param("recovery_threshold_frac", "must exceed f_reset"));
        }
        if !(self.coupling > T::zero() && self.coupling <= T::one()) {
            return Err(Error::param("coupling", "must lie in (0, 1]"));
        }
        if !(self.dark_rate >= T::zero() && self.dark_rate.is_finite()) {
            return Err(Error::param("dark_rate", "must be non-negative"));
        }
        validate_table(&self.sens_e50_table)
    }

    /// Time after a reset at which the current reaches the full-recovery threshold.
    pub fn full_recovery_delay(&self) -> T {
        let deficit = (T::one() - self.recovery_threshold_frac) / (T::one() - self.f_reset);
        -self.tau_rec * deficit.ln()
    }

    /// Energy of one photon at the operating wavelength.
    pub fn photon_energy(&self) -> T {
        crate::scalar::photon_energy(self.wavelength)
    }
}

pub(crate) fn validate_table<T: Real>(table: &[SensAnchor<T>]) -> Result<()> {
    if table.is_empty() {
        return Err(Error::param("sens_e50_table", "must not be empty"));
    }
    for a in table {
        if !(a.delay >= T::zero() && a.e50 > T::zero() && a.slope > T::zero()) {
            return Err(Error::param(
                "sens_e50_table",
                "delays must be non-negative, e50 and slope positive",
            ));
        }
    }
    for w in table.windows(2) {
        if w[1].delay <= w[0].delay {
            return Err(Error::param("sens_e50_table", "delays must be strictly increasing"));
        }
        if w[1].e50 >= w[0].e50 {
            return Err(Error::param("sens_e50_table", "e50 must strictly decrease with delay"));
        }
    }
    Ok(())
}

/// Battery bias circuit: an open-circuit voltage behind a series resistor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasSource<T> {
    pub v_open: T,
    pub r_series: T,
    /// Compliance limit of an external source, V.
    pub v_max: T,
}

impl<T: Real> Default for BiasSource<T> {
    fn default() -> Self {
        // 22.5 µA into a superconductor from 0.1 V behind ~4.5 kΩ
        Self {
            v_open: T::lit(0.1),
            r_series: T::lit(0.1 / 22.5e-6),
            v_max: T::lit(10.0),
        }
    }
}

impl<T: Real> BiasSource<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_open > T::zero() && self.r_series > T::zero()) {
            return Err(Error::param("bias", "v_open and r_series must be positive"));
        }
        if !(self.v_max > T::zero() && self.v_max <= T::lit(10.0)) {
            return Err(Error::param("bias.v_max", "must lie in (0, 10] V"));
        }
        Ok(())
    }

    /// Current delivered into a zero-resistance load.
    pub fn short_circuit_current(&self) -> T {
        self.v_open / self.r_series
    }

    /// Voltage left across the nanowire once it latches at current `i_latched`.
    pub fn latched_voltage(&self, i_latched: T) -> T {
        (self.v_open - i_latched * self.r_series).max(T::lit(1e-6))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let p = DetectorParams::<f64>::default();
        p.validate().unwrap();
        BiasSource::<f64>::default().validate().unwrap();
        DetectorParams::<f32>::default().validate().unwrap();
    }

    #[test]
    fn bias_point_anchors() {
        let p = default_params::<f64>();
        assert_eq!(p.i_b, 22.5e-6);
        assert!((p.i_b / p.i_c - 0.85).abs() < 0.0085);
        assert!((p.i_c - 26.47e-6).abs() < 0.05e-6);
        assert_eq!(p.r_normal_total, 2.3e6);
        assert_eq!(p.eta, 2.2e-5);
        assert!(p.dark_rate < 1.0);
    }

    #[test]
    fn bias_source_is_a_current_source_into_zero_resistance() {
        let b = BiasSource::<f64>::default();
        assert!((b.short_circuit_current() - 22.5e-6).abs() < 1e-12);
        assert!((b.r_series - 4.44e3).abs() < 0.1e3);
    }

    #[test]
    fn full_recovery_takes_about_40ns() {
        let p = default_params::<f64>();
        let t = p.full_recovery_delay();
        assert!((t - 40e-9).abs() < 2e-9, "{t}");
    }

    #[test]
    fn rejects_bad_ordering() {
        let mut p = default_params::<f64>();
        p.i_b = p.i_c * 1.1;
        assert!(p.validate().is_err());
        let mut p = default_params::<f64>();
        p.sens_e50_table.swap(0, 1);
        assert!(p.validate().is_err());
        let mut p = default_params::<f64>();
        p.coupling = 0.0;
        assert!(p.validate().is_err());
    }
}
