use super::ReadoutParams;
use crate::error::{Error, Result};
use crate::physics::ElectricalTrace;
use crate::scalar::Real;

/// First-order high-pass, first-order low-pass and flat gain, run sample by
/// sample. Linear and time-invariant; zero in, zero out.
#[derive(Debug, Clone)]
pub struct AmplifierChain<T> {
    hp_pole: T,
    lp_alpha: T,
    gain: T,
    hp_prev_in: T,
    hp_out: T,
    lp_out: T,
}

impl<T: Real> AmplifierChain<T> {
    pub fn new(params: &ReadoutParams<T>, dt: T) -> Result<Self> {
        params.validate()?;
        if dt > T::one() / (T::lit(10.0) * params.lp_cutoff) {
            return Err(Error::StepTooCoarse {
                dt: dt.as_f64(),
                reason: format!("readout needs dt <= 1/(10·{:e} Hz)", params.lp_cutoff.as_f64()),
            });
        }
        let two_pi = T::PI() + T::PI();
        Ok(Self {
            hp_pole: (-two_pi * params.hp_cutoff * dt).exp(),
            lp_alpha: -(-two_pi * params.lp_cutoff * dt).exp_m1(),
            gain: params.total_gain(),
            hp_prev_in: T::zero(),
            hp_out: T::zero(),
            lp_out: T::zero(),
        })
    }

    #[inline]
    pub fn process(&mut self, x: T) -> T {
        self.hp_out = self.hp_pole * self.hp_out + (x - self.hp_prev_in);
        self.hp_prev_in = x;
        self.lp_out = self.lp_out + self.lp_alpha * (self.hp_out - self.lp_out);
        self.lp_out * self.gain
    }
}

/// Pass a load-voltage trace through the RF chain. Events are carried over.
pub fn amplify<T: Real>(trace: &ElectricalTrace<T>, params: &ReadoutParams<T>) -> Result<ElectricalTrace<T>> {
    let mut chain = AmplifierChain::new(params, trace.dt)?;
    Ok(ElectricalTrace {
        dt: trace.dt,
        v_out: trace.v_out.iter().map(|&x| chain.process(x)).collect(),
        events: trace.events.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(v: Vec<f64>, dt: f64) -> ElectricalTrace<f64> {
        ElectricalTrace { dt, v_out: v, events: vec![] }
    }

    #[test]
    fn zero_in_zero_out() {
        let r = ReadoutParams::default();
        let out = amplify(&trace(vec![0.0; 1000], 10e-12), &r).unwrap();
        assert!(out.v_out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn step_response_decays_with_hp_time_constant() {
        let r = ReadoutParams::<f64>::default();
        let dt = 50e-12;
        let tau = 1.0 / (2.0 * std::f64::consts::PI * r.hp_cutoff);
        let n = (3.0 * tau / dt) as usize;
        let out = amplify(&trace(vec![1e-3; n], dt), &r).unwrap();
        let peak = out.peak();
        let at_tau = out.v_out[(tau / dt) as usize];
        assert!((at_tau / peak - (-1.0f64).exp()).abs() < 0.01, "{}", at_tau / peak);
    }

    #[test]
    fn rejects_coarse_step() {
        let r = ReadoutParams::<f64>::default();
        assert!(matches!(
            amplify(&trace(vec![0.0; 3], 1e-10), &r),
            Err(Error::StepTooCoarse { .. })
        ));
    }

    #[test]
    fn single_photon_peak_is_about_50mv() {
        let p = crate::physics::default_params::<f64>();
        let r = ReadoutParams::<f64>::default();
        let pre = (1.0 - p.f_reset) * p.i_b * 50.0;
        assert!((pre * r.total_gain() - 50e-3).abs() < 1e-3);
    }
}
