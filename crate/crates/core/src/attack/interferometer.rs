use crate::error::{Error, Result};
use crate::OpticalWaveform;

/// Bob's unbalanced Mach-Zehnder interferometer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferometerParams {
    /// Arm delay, s.
    pub delta_t: f64,
    /// Routing contrast between the two outputs, dB.
    pub extinction_db: f64,
    /// Loss common to both outputs, dB.
    pub insertion_loss_db: f64,
}

impl Default for InterferometerParams {
    fn default() -> Self {
        Self {
            delta_t: 5e-9,
            extinction_db: 20.0,
            insertion_loss_db: 0.0,
        }
    }
}

impl InterferometerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_t > 0.0 && self.delta_t.is_finite()) {
            return Err(Error::param("iface.delta_t", "must be positive"));
        }
        if !(self.extinction_db > 0.0) {
            return Err(Error::param("iface.extinction_db", "must be positive"));
        }
        if !(self.insertion_loss_db >= 0.0 && self.insertion_loss_db.is_finite()) {
            return Err(Error::param("iface.insertion_loss_db", "must be non-negative and finite"));
        }
        Ok(())
    }

    /// Fraction of each output mixed into the other, 10^(-ER/10).
    pub fn leak_fraction(&self) -> f64 {
        10f64.powf(-self.extinction_db / 10.0)
    }

    /// Power transmission common to both outputs.
    pub fn transmission(&self) -> f64 {
        10f64.powf(-self.insertion_loss_db / 10.0)
    }

    /// Arm delay in samples of `dt`; errors unless `dt` divides it.
    pub fn delay_samples(&self, dt: f64) -> Result<usize> {
        let n = self.delta_t / dt;
        let r = n.round();
        if r < 1.0 || (n - r).abs() > 1e-6 * r.max(1.0) {
            return Err(Error::param(
                "iface.delta_t",
                format!("sample step {dt:e} s does not divide the arm delay {:e} s", self.delta_t),
            ));
        }
        Ok(r as usize)
    }
}

/// Split `waveform` into the powers reaching D0 and D1.
///
/// D0 sees |a(t) + a(t−Δt)|²/4, D1 sees |a(t) − a(t−Δt)|²/4, scaled by the
/// insertion loss and cross-mixed by the finite extinction. The outputs are
/// one arm delay longer than the input so the delayed copy of the last
/// samples is kept.
pub fn interferometer_split(
    waveform: &OpticalWaveform,
    params: &InterferometerParams,
) -> Result<(OpticalWaveform, OpticalWaveform)> {
    waveform.validate()?;
    params.validate()?;
    let lag = params.delay_samples(waveform.dt)?;
    let n = waveform.len() + lag;
    let x = params.leak_fraction();
    let l = params.transmission();
    let mut d0 = OpticalWaveform::zeros(waveform.dt, n);
    let mut d1 = OpticalWaveform::zeros(waveform.dt, n);
    d0.wavelength = waveform.wavelength;
    d1.wavelength = waveform.wavelength;
    let sample = |k: usize| -> (f64, f64) {
        if k < waveform.len() {
            (waveform.power[k], waveform.phase[k])
        } else {
            (0.0, 0.0)
        }
    };
    for k in 0..n {
        let (p_now, ph_now) = sample(k);
        let (p_old, ph_old) = if k >= lag { sample(k - lag) } else { (0.0, 0.0) };
        let cross = 2.0 * (p_now * p_old).sqrt() * (ph_now - ph_old).cos();
        let plus = ((p_now + p_old + cross) / 4.0).max(0.0) * l;
        let minus = ((p_now + p_old - cross) / 4.0).max(0.0) * l;
        d0.power[k] = (1.0 - x) * plus + x * minus;
        d1.power[k] = (1.0 - x) * minus + x * plus;
    }
    Ok((d0, d1))
}
