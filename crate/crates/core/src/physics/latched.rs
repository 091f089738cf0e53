//! Latched-state electrical behaviour under illumination.

use super::params::DetectorParams;
use super::waveform::{ElectricalTrace, OpticalWaveform};
use crate::error::{Error, Result};
use crate::scalar::{Real, LOAD_OHMS};

const V_LOW: f64 = 0.1;
const V_HIGH: f64 = 10.0;

/// Resistance increase per optical watt at bias voltage `v`: interpolated
/// linearly in log10(V) between the 0.1 V and 10 V slopes, clamped outside.
pub fn cw_slope<T: Real>(v_bias: T, params: &DetectorParams<T>) -> T {
    let x = ((v_bias.log10() - T::lit(V_LOW).log10()) / (T::lit(V_HIGH).log10() - T::lit(V_LOW).log10()))
        .max(T::zero())
        .min(T::one());
    params.cw_slope_low_v + x * (params.cw_slope_high_v - params.cw_slope_low_v)
}

/// Latched current and resistance at `v_bias` under `optical_power`, using
/// the nominal latched current as the dark value.
pub fn latched_iv<T: Real>(v_bias: T, optical_power: T, params: &DetectorParams<T>) -> Result<(T, T)> {
    latched_iv_with_dark(v_bias, optical_power, params.i_latched_nominal, params)
}

/// As [`latched_iv`] with an explicit dark latched current (drawn per latch
/// event from the 6–8 µA range).
pub fn latched_iv_with_dark<T: Real>(
    v_bias: T,
    optical_power: T,
    i_dark: T,
    params: &DetectorParams<T>,
) -> Result<(T, T)> {
    if !(v_bias > T::zero() && v_bias <= T::lit(V_HIGH)) {
        return Err(Error::BiasOutOfRange(v_bias.as_f64()));
    }
    if !(optical_power >= T::zero() && optical_power.is_finite()) {
        return Err(Error::NonFinitePower(optical_power.as_f64()));
    }
    Ok(latched_iv_unchecked(v_bias, optical_power, i_dark, params))
}

#[inline]
pub(crate) fn latched_iv_unchecked<T: Real>(v_bias: T, optical_power: T, i_dark: T, params: &DetectorParams<T>) -> (T, T) {
    let r = v_bias / i_dark + cw_slope(v_bias, params) * optical_power;
    (v_bias / r, r)
}

/// Deterministic latched response to `waveform` at `v_bias`: the current
/// follows its quasi-static value through a first-order thermal lag and the
/// load sees the drop from the dark current.
pub fn latched_pulse_response<T: Real>(
    waveform: &OpticalWaveform<T>,
    v_bias: T,
    params: &DetectorParams<T>,
) -> Result<ElectricalTrace<T>> {
    waveform.validate()?;
    let i_dark = params.i_latched_nominal;
    latched_iv_with_dark(v_bias, T::zero(), i_dark, params)?;
    let alpha = T::one() - (-waveform.dt / params.latched_lag).exp();
    let load = T::lit(LOAD_OHMS);
    let mut i = i_dark;
    let v_out = waveform
        .power
        .iter()
        .map(|&p| {
            let (target, _) = latched_iv_unchecked(v_bias, p * params.coupling, i_dark, params);
            i = i + (target - i) * alpha;
            (i_dark - i) * load
        })
        .collect();
    Ok(ElectricalTrace {
        dt: waveform.dt,
        v_out,
        events: Vec::new(),
    })
}
