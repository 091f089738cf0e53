//! Current recovery after a hotspot and the resulting optical sensitivity.

use super::params::{DetectorParams, SensAnchor};
use crate::scalar::Real;

/// Nanowire current `t_since_reset` after the hotspot released the current:
/// an exponential return from `f_reset·i_b` to `i_b`.
pub fn recovery_current<T: Real>(t_since_reset: T, params: &DetectorParams<T>) -> T {
    let i_b = params.i_b;
    let t = t_since_reset.max(T::zero());
    i_b - (i_b - params.f_reset * i_b) * (-t / params.tau_rec).exp()
}

/// Interpolated `(e50, slope)` at `delay`: linear in log-e50 and in slope
/// between anchors, clamped outside the table.
pub fn sensitivity_at<T: Real>(delay: T, table: &[SensAnchor<T>]) -> (T, T) {
    let first = table[0];
    let last = table[table.len() - 1];
    if !(delay > first.delay) {
        return (first.e50, first.slope);
    }
    if delay >= last.delay {
        return (last.e50, last.slope);
    }
    // table is short; linear scan
    let hi = table.iter().position(|a| a.delay >= delay).unwrap_or(table.len() - 1);
    let (a, b) = (table[hi - 1], table[hi]);
    let w = (delay - a.delay) / (b.delay - a.delay);
    let ln_e50 = a.e50.ln() + w * (b.e50.ln() - a.e50.ln());
    (ln_e50.exp(), a.slope + w * (b.slope - a.slope))
}

/// Logistic hotspot probability in log10 energy.
pub fn logistic<T: Real>(energy: T, e50: T, slope: T) -> T {
    if energy <= T::zero() {
        return T::zero();
    }
    let z = slope * (energy / e50).log10();
    T::one() / (T::one() + (-z).exp())
}

/// Probability that a short pulse of `pulse_energy` (already including any
/// coupling losses) forms a hotspot `delay` after the start of recovery.
/// Dark counts and the linear single-photon channel are not included.
pub fn hotspot_probability<T: Real>(pulse_energy: T, delay: T, params: &DetectorParams<T>) -> T {
    let (e50, slope) = sensitivity_at(delay, &params.sens_e50_table);
    logistic(pulse_energy, e50, slope)
}

/// Probability that a fully recovered detector clicks on a coherent pulse
/// carrying `mean_photons` on average.
pub fn single_photon_click_probability<T: Real>(params: &DetectorParams<T>, mean_photons: T) -> T {
    let m = mean_photons.max(T::zero());
    T::one() - (-params.eta * params.coupling * m).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::default_params;

    const FJ: f64 = 1e-15;
    const NS: f64 = 1e-9;

    #[test]
    fn recovery_current_closed_form() {
        let p = default_params::<f64>();
        assert!((recovery_current(0.0, &p) - p.f_reset * p.i_b).abs() < 1e-18);
        assert!((recovery_current(1.0, &p) - p.i_b).abs() < 1e-18);
        let at_tau = p.i_b - (p.i_b - p.f_reset * p.i_b) / std::f64::consts::E;
        assert!((recovery_current(p.tau_rec, &p) - at_tau).abs() < 1e-15);
        // 95 % of i_b after ~40 ns
        let t95 = p.full_recovery_delay();
        assert!((recovery_current(t95, &p) - 0.95 * p.i_b).abs() < 1e-15);
        assert!((t95 - 40.0 * NS).abs() < 2.0 * NS);
    }

    #[test]
    fn hotspot_anchors() {
        let p = default_params::<f64>();
        assert!(hotspot_probability(150.0 * FJ, 8.0 * NS, &p) >= 0.99);
        assert!(hotspot_probability(1.5 * FJ, 8.0 * NS, &p) <= 0.01);
        assert_eq!(hotspot_probability(0.0, 8.0 * NS, &p), 0.0);
        assert_eq!(hotspot_probability(0.0, 100.0 * NS, &p), 0.0);
        assert!((hotspot_probability(25.0 * FJ, 8.0 * NS, &p) - 0.5).abs() < 1e-12);
        assert!((hotspot_probability(78.0 * FJ, 3.0 * NS, &p) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn superlinearity_witness_at_8ns() {
        let p = default_params::<f64>();
        let (e50, _) = sensitivity_at(8.0 * NS, &p.sens_e50_table);
        let ratio = hotspot_probability(e50, 8.0 * NS, &p) / hotspot_probability(e50 / 2.0, 8.0 * NS, &p);
        assert!(ratio > 10.0, "{ratio}");
    }

    #[test]
    fn interpolation_is_log_linear_and_clamped() {
        let p = default_params::<f64>();
        let (e, _) = sensitivity_at(4.0 * NS, &p.sens_e50_table);
        assert!((e - (78.0 * 55.0_f64).sqrt() * FJ).abs() < 1e-20);
        assert_eq!(sensitivity_at(-1.0, &p.sens_e50_table).0, 160.0 * FJ);
        assert_eq!(sensitivity_at(1.0, &p.sens_e50_table).0, 4.0 * FJ);
    }

    #[test]
    fn single_photon_probability() {
        let p = default_params::<f64>();
        assert_eq!(single_photon_click_probability(&p, 0.0), 0.0);
        assert!((single_photon_click_probability(&p, 1.0) - 2.2e-5).abs() < 1e-9);
        let big = single_photon_click_probability(&p, 1e6);
        assert!((big - (1.0 - (-22.0_f64).exp())).abs() < 1e-12);
    }
}
