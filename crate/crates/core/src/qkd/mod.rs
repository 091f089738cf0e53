//! Intercept-resend sessions against DPS-QKD and BB84 receivers built from
//! the simulated detectors.
//!
//! Sessions are event driven: only the bit slots in which Eve acts (or, with
//! the attack disabled, in which Bob clicks) are simulated, and the detectors
//! idle in between with their state carried over.

use std::fmt;

use rand::Rng;

use crate::attack::{
    build_deadtime_control_diagram, build_latched_attack, calibrate_trigger_power, interferometer_split,
    latch_device, DeadtimeConfig, InterferometerParams, Target, EVAL_DT, MAX_TRIGGER_POWER,
};
use crate::error::{Error, Result};
use crate::physics::DetectorSim;
use crate::readout::run_trial;
use crate::rng::{derive_seed, trial_stream, RandomStream};
use crate::{Bench, OpticalWaveform};

/// Optical power used to latch Bob's detectors before a BB84 session, W.
pub const LATCH_POWER: f64 = 5e-3;
/// Longest latching exposure, s.
pub const LATCH_DURATION: f64 = 1e-3;
/// Record kept after a control diagram so the last click closes, s.
const RECORD_TAIL: f64 = 5e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    Dps,
    Bb84,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Dps => "DPS",
            Protocol::Bb84 => "BB84",
        })
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "DPS" => Ok(Protocol::Dps),
            "BB84" => Ok(Protocol::Bb84),
            other => Err(Error::param("protocol.protocol", format!("expected DPS or BB84, got `{other}`"))),
        }
    }
}

/// Session settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolConfig {
    pub protocol: Protocol,
    pub n_bits: u64,
    /// BB84 pulse period, s.
    pub bit_slot: f64,
    /// DPS pulse period; equals the interferometer arm delay, s.
    pub delta_t: f64,
    /// Mean photon number of Alice's pulses.
    pub mu: f64,
    pub channel_loss_db: f64,
    pub qber_abort_threshold: f64,
    /// With `false` Eve is transparent and lossless.
    pub attack_enabled: bool,
    /// BB84 full trigger power; `None` calibrates it against the latched detectors.
    pub trigger_power: Option<f64>,
    pub trigger_duration: f64,
    pub control: DeadtimeConfig,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            protocol: Protocol::Dps,
            n_bits: 10_000,
            bit_slot: 10e-9,
            delta_t: 5e-9,
            mu: 0.2,
            channel_loss_db: 0.0,
            qber_abort_threshold: 0.11,
            attack_enabled: true,
            trigger_power: None,
            trigger_duration: 10e-9,
            control: DeadtimeConfig::default(),
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::param("protocol.mu", "must be positive"));
        }
        if !(self.bit_slot > 0.0 && self.delta_t > 0.0) {
            return Err(Error::param("protocol.bit_slot", "slot lengths must be positive"));
        }
        if !(self.qber_abort_threshold > 0.0 && self.qber_abort_threshold < 1.0) {
            return Err(Error::param("protocol.qber_abort_threshold", "must lie in (0, 1)"));
        }
        if !(self.channel_loss_db >= 0.0) {
            return Err(Error::param("protocol.channel_loss_db", "must be non-negative"));
        }
        if !(self.trigger_duration > 0.0) {
            return Err(Error::param("protocol.trigger_duration", "must be positive"));
        }
        if let Some(p) = self.trigger_power {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::param("protocol.trigger_power", "must be positive"));
            }
        }
        Ok(())
    }
}

/// Mismatch fraction over the sifted positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Qber {
    pub value: f64,
    pub sifted: u64,
    pub errors: u64,
    /// Nothing survived sifting; `value` is then 0.
    pub empty: bool,
}

pub fn compute_qber(alice_bits: &[bool], bob_bits: &[bool], sift_mask: &[bool]) -> Result<Qber> {
    if alice_bits.len() != bob_bits.len() {
        return Err(Error::LengthMismatch {
            left: alice_bits.len(),
            right: bob_bits.len(),
        });
    }
    if alice_bits.len() != sift_mask.len() {
        return Err(Error::LengthMismatch {
            left: alice_bits.len(),
            right: sift_mask.len(),
        });
    }
    let (mut sifted, mut errors) = (0u64, 0u64);
    for ((a, b), s) in alice_bits.iter().zip(bob_bits).zip(sift_mask) {
        if *s {
            sifted += 1;
            errors += u64::from(a != b);
        }
    }
    Ok(Qber {
        value: if sifted == 0 { 0.0 } else { errors as f64 / sifted as f64 },
        sifted,
        errors,
        empty: sifted == 0,
    })
}

/// Session summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QkdOutcome {
    pub protocol: Protocol,
    pub sifted_bits: u64,
    pub errors: u64,
    pub qber: f64,
    /// No bit survived sifting.
    pub empty: bool,
    /// Share of sifted bits whose click Eve caused and whose value she knows.
    pub eve_known_fraction: f64,
    /// Raw clicks per second in D0 and D1.
    pub detector_rates: [f64; 2],
    /// Times Eve resent.
    pub resends: u64,
    pub aborted: bool,
}

impl QkdOutcome {
    fn empty(protocol: Protocol) -> Self {
        Self {
            protocol,
            sifted_bits: 0,
            errors: 0,
            qber: 0.0,
            empty: true,
            eve_known_fraction: 0.0,
            detector_rates: [0.0; 2],
            resends: 0,
            aborted: false,
        }
    }

    fn finish(
        protocol: Protocol,
        q: Qber,
        eve_known: u64,
        raw: [u64; 2],
        span: f64,
        resends: u64,
        abort_at: f64,
    ) -> Self {
        let rate = |n: u64| if span > 0.0 { n as f64 / span } else { 0.0 };
        Self {
            protocol,
            sifted_bits: q.sifted,
            errors: q.errors,
            qber: q.value,
            empty: q.empty,
            eve_known_fraction: if q.sifted == 0 { 0.0 } else { eve_known as f64 / q.sifted as f64 },
            detector_rates: [rate(raw[0]), rate(raw[1])],
            resends,
            aborted: q.value > abort_at,
        }
    }
}

impl fmt::Display for QkdOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "protocol        {}", self.protocol)?;
        writeln!(f, "sifted bits     {}", self.sifted_bits)?;
        writeln!(f, "qber            {:.3e}{}", self.qber, if self.empty { " (empty)" } else { "" })?;
        writeln!(f, "eve known       {:.6}", self.eve_known_fraction)?;
        writeln!(
            f,
            "click rates     D0 {:.3e} /s, D1 {:.3e} /s",
            self.detector_rates[0], self.detector_rates[1]
        )?;
        writeln!(f, "resends         {}", self.resends)?;
        write!(f, "aborted         {}", self.aborted)
    }
}

/// Number of failures before the first success of a Bernoulli(p) sequence.
fn geometric(p: f64, rng: &mut RandomStream) -> u64 {
    if p >= 1.0 {
        return 0;
    }
    if p <= 0.0 {
        return u64::MAX;
    }
    let u: f64 = 1.0 - rng.gen::<f64>();
    (u.ln() / (-p).ln_1p()).floor().min(u64::MAX as f64 / 2.0) as u64
}

#[derive(Debug, Clone, Copy)]
struct BobClick {
    t: f64,
    det: usize,
    /// Caused by Eve's readout and routed to the detector she chose.
    eve: bool,
}

/// Bob's mutual-deadtime rule: a click is kept only if the other detector
/// stayed silent for `window` on either side of it. Coincident double clicks
/// are dropped by the same rule.
fn accept_clicks(clicks: &mut [BobClick], window: f64) -> Vec<BobClick> {
    clicks.sort_by(|a, b| a.t.total_cmp(&b.t));
    let n = clicks.len();
    (0..n)
        .filter(|&i| {
            let c = clicks[i];
            let before = clicks[..i]
                .iter()
                .rev()
                .take_while(|o| c.t - o.t < window)
                .any(|o| o.det != c.det);
            let after = clicks[i + 1..]
                .iter()
                .take_while(|o| o.t - c.t < window)
                .any(|o| o.det != c.det);
            !(before || after)
        })
        .map(|i| clicks[i])
        .collect()
}

/// Dark clicks of an idle detector over `gap` starting at `t0`. At most one
/// per gap; the detector state is not disturbed.
fn idle_dark(bench: &Bench, det: usize, t0: f64, gap: f64, rng: &mut RandomStream, out: &mut Vec<BobClick>) {
    let p = -(-bench.detector.dark_rate * gap).exp_m1();
    if rng.gen::<f64>() < p {
        out.push(BobClick {
            t: t0 + gap * rng.gen::<f64>(),
            det,
            eve: false,
        });
    }
}

struct Resend {
    waves: [OpticalWaveform; 2],
    readout: f64,
    record: f64,
}

/// DPS session under the deadtime-control attack.
///
/// Eve sits at Alice's output with an ideal receiver. Each time she detects a
/// pulse and her previous diagram has finished (plus one recovery window so
/// Bob's deadtime rule does not erase it), she learns the phase difference
/// and sends the control diagram whose readout lands in that bit slot on the
/// matching detector.
pub fn run_dps_attack(
    config: &ProtocolConfig,
    iface: &InterferometerParams,
    bench: &Bench,
    seed: u64,
) -> Result<QkdOutcome> {
    config.validate()?;
    iface.validate()?;
    bench.validate()?;
    if (config.delta_t - iface.delta_t).abs() > 1e-6 * iface.delta_t {
        return Err(Error::param(
            "protocol.delta_t",
            format!("DPS pulse period {:e} s must equal the arm delay {:e} s", config.delta_t, iface.delta_t),
        ));
    }
    if config.n_bits == 0 {
        return Ok(QkdOutcome::empty(Protocol::Dps));
    }
    if !config.attack_enabled {
        return run_dps_baseline(config, iface, bench, seed);
    }

    let slot = iface.delta_t;
    let window = bench.detector.full_recovery_delay();
    let threshold = bench.readout.threshold;
    let mut resend_for = Vec::with_capacity(2);
    for target in [Target::D0, Target::D1] {
        let d = build_deadtime_control_diagram(target, iface, bench, threshold, &config.control)?;
        let record = d.duration() + RECORD_TAIL;
        let mut w = d.render(EVAL_DT)?;
        w.pad_to((record / EVAL_DT).round() as usize);
        let (w0, w1) = interferometer_split(&w, iface)?;
        resend_for.push(Resend {
            waves: [w0, w1],
            readout: d.readout_time,
            record: w.duration() + slot,
        });
    }

    let n = config.n_bits as usize;
    let mut rng = trial_stream(seed, 0);
    let alice: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
    let p_eve = -(-config.mu).exp_m1();
    let resend_seed = derive_seed(seed, 1);

    let mut sims = [DetectorSim::default(), DetectorSim::default()];
    let mut clicks = Vec::new();
    let mut raw = [0u64; 2];
    let mut t_free = 0.0;
    let mut next = 1u64;
    let mut resends = 0u64;
    loop {
        let lead = resend_for[0].readout.max(resend_for[1].readout);
        let earliest = ((t_free + window + lead) / slot).ceil() as u64;
        let k = next.max(earliest).saturating_add(geometric(p_eve, &mut rng));
        if k >= config.n_bits {
            break;
        }
        let target = usize::from(alice[k as usize]);
        let r = &resend_for[target];
        let start = k as f64 * slot - r.readout;
        let gap = start - t_free;
        for (d, sim) in sims.iter_mut().enumerate() {
            sim.idle(gap, &bench.detector);
            idle_dark(bench, d, t_free, gap, &mut rng, &mut clicks);
        }
        let mut trng = trial_stream(resend_seed, resends);
        for (d, sim) in sims.iter_mut().enumerate() {
            let out = run_trial(bench, sim.clone(), &r.waves[d], &mut trng)?;
            *sim = out.detector;
            for c in out.clicks {
                let in_readout = c.t_cross >= r.readout && c.t_cross < r.readout + slot;
                clicks.push(BobClick {
                    t: start + c.t_cross,
                    det: d,
                    eve: d == target && in_readout,
                });
            }
        }
        t_free = start + r.record;
        next = k + 1;
        resends += 1;
    }
    let span = config.n_bits as f64 * slot;
    if t_free < span {
        for d in 0..2 {
            idle_dark(bench, d, t_free, span - t_free, &mut rng, &mut clicks);
        }
    }
    for c in &clicks {
        raw[c.det] += 1;
    }
    let accepted = accept_clicks(&mut clicks, window);
    let (q, eve_known) = sift_dps(&alice, &accepted, slot)?;
    Ok(QkdOutcome::finish(
        Protocol::Dps,
        q,
        eve_known,
        raw,
        span,
        resends,
        config.qber_abort_threshold,
    ))
}

fn sift_dps(alice: &[bool], accepted: &[BobClick], slot: f64) -> Result<(Qber, u64)> {
    let n = alice.len();
    let mut bob = vec![false; n];
    let mut mask = vec![false; n];
    let mut eve_known = 0;
    for c in accepted {
        let k = (c.t / slot).round();
        if k < 1.0 || k >= n as f64 {
            continue;
        }
        let k = k as usize;
        if mask[k] {
            continue;
        }
        mask[k] = true;
        bob[k] = c.det == 1;
        eve_known += u64::from(c.eve);
    }
    Ok((compute_qber(alice, &bob, &mask)?, eve_known))
}

/// DPS session with Eve transparent: Alice's weak pulses reach Bob through
/// the channel loss and an ideally aligned interferometer. Only slots with a
/// click are visited; after a click the next recovery window is skipped.
fn run_dps_baseline(
    config: &ProtocolConfig,
    iface: &InterferometerParams,
    bench: &Bench,
    seed: u64,
) -> Result<QkdOutcome> {
    let det = &bench.detector;
    let slot = iface.delta_t;
    let window = det.full_recovery_delay();
    let transmission = 10f64.powf(-config.channel_loss_db / 10.0) * iface.transmission();
    let p_sig = -(-det.eta * det.coupling * config.mu * transmission).exp_m1();
    let p_dark = -(-det.dark_rate * slot).exp_m1();
    let p_right = 1.0 - (1.0 - p_sig) * (1.0 - p_dark);
    let p_wrong = p_dark;
    let p_any = 1.0 - (1.0 - p_right) * (1.0 - p_wrong);

    let n = config.n_bits as usize;
    let mut rng = trial_stream(seed, 0);
    let alice: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
    let mut bob = vec![false; n];
    let mut mask = vec![false; n];
    let mut raw = [0u64; 2];
    let skip = (window / slot).ceil() as u64;
    let mut k = 1u64;
    loop {
        k = k.saturating_add(geometric(p_any, &mut rng));
        if k >= config.n_bits {
            break;
        }
        let right = usize::from(alice[k as usize]);
        let u = rng.gen::<f64>() * p_any;
        let only_right = p_right * (1.0 - p_wrong);
        let only_wrong = p_wrong * (1.0 - p_right);
        if u < only_right {
            raw[right] += 1;
            mask[k as usize] = true;
            bob[k as usize] = right == 1;
        } else if u < only_right + only_wrong {
            raw[1 - right] += 1;
            mask[k as usize] = true;
            bob[k as usize] = right == 0;
        } else {
            raw[0] += 1;
            raw[1] += 1;
        }
        k = k.saturating_add(skip + 1);
    }
    let q = compute_qber(&alice, &bob, &mask)?;
    Ok(QkdOutcome::finish(
        Protocol::Dps,
        q,
        0,
        raw,
        config.n_bits as f64 * slot,
        0,
        config.qber_abort_threshold,
    ))
}

/// BB84 session against latched detectors.
///
/// Both detectors are first latched with bright light. Eve then measures
/// each pulse she detects in a random basis and resends a trigger: the full
/// pulse to the detector of her bit when Bob's basis matches hers, half of it
/// to each detector otherwise. Bob keeps single clicks only.
pub fn run_bb84_latched_attack(config: &ProtocolConfig, bench: &Bench, seed: u64) -> Result<QkdOutcome> {
    config.validate()?;
    bench.validate()?;
    if config.n_bits == 0 {
        return Ok(QkdOutcome::empty(Protocol::Bb84));
    }
    let dt = EVAL_DT;
    let mut sims = Vec::with_capacity(2);
    for d in 0..2 {
        let latch_bench = bench.with_threshold(bench.readout.threshold);
        let rep = latch_device(LATCH_POWER, LATCH_DURATION).run(
            &latch_bench,
            DetectorSim::default(),
            dt,
            &mut trial_stream(derive_seed(seed, 2), d),
        )?;
        if !rep.latched {
            return Err(Error::InfeasibleAttack(format!("detector D{d} did not latch")));
        }
        log::info!("D{d} latched with {} spurious clicks", rep.spurious_clicks);
        sims.push(rep.detector);
    }
    let states: Vec<_> = sims.iter().map(|s| s.state).collect();
    let power = match config.trigger_power {
        Some(p) => p,
        None => match calibrate_trigger_power(bench, &states, config.trigger_duration, dt) {
            Ok(p) => p,
            Err(Error::InfeasibleAttack(why)) => {
                log::warn!("{why}; sending saturating {MAX_TRIGGER_POWER} W triggers");
                MAX_TRIGGER_POWER
            }
            Err(e) => return Err(e),
        },
    };
    let full = build_latched_attack(power, config.trigger_duration, true, dt);
    let half = build_latched_attack(power, config.trigger_duration, false, dt);
    let dark = OpticalWaveform::zeros(dt, full.len());
    let busy = full.duration();
    let slot = config.bit_slot;

    let n = config.n_bits as usize;
    let mut rng = trial_stream(seed, 0);
    let alice_basis: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
    let alice_bit: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
    let bob_basis: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
    let p_eve = -(-config.mu).exp_m1();
    let resend_seed = derive_seed(seed, 1);

    let mut bob = vec![false; n];
    let mut mask = vec![false; n];
    let mut raw = [0u64; 2];
    let mut eve_known = 0u64;
    let mut t_free = 0.0;
    let mut next = 0u64;
    let mut resends = 0u64;
    loop {
        let earliest = (t_free / slot).ceil() as u64;
        let k = next.max(earliest).saturating_add(geometric(p_eve, &mut rng));
        if k >= config.n_bits {
            break;
        }
        let i = k as usize;
        let eve_basis: bool = rng.gen();
        let eve_bit = if eve_basis == alice_basis[i] { alice_bit[i] } else { rng.gen() };
        let matched = bob_basis[i] == eve_basis;
        let start = k as f64 * slot;
        let mut trng = trial_stream(resend_seed, resends);
        let mut clicked = [false; 2];
        for (d, sim) in sims.iter_mut().enumerate() {
            sim.idle(start - t_free, &bench.detector);
            let wave = match (matched, d == usize::from(eve_bit)) {
                (true, true) => &full,
                (true, false) => &dark,
                (false, _) => &half,
            };
            let out = run_trial(bench, sim.clone(), wave, &mut trng)?;
            *sim = out.detector;
            raw[d] += out.clicks.len() as u64;
            clicked[d] = !out.clicks.is_empty();
        }
        if clicked[0] != clicked[1] {
            let det = usize::from(clicked[1]);
            if alice_basis[i] == bob_basis[i] {
                mask[i] = true;
                bob[i] = det == 1;
                eve_known += u64::from(matched && det == usize::from(eve_bit));
            }
        }
        t_free = start + busy;
        next = k + 1;
        resends += 1;
    }
    let alice_sifted: Vec<bool> = alice_bit;
    let q = compute_qber(&alice_sifted, &bob, &mask)?;
    Ok(QkdOutcome::finish(
        Protocol::Bb84,
        q,
        eve_known,
        raw,
        config.n_bits as f64 * slot,
        resends,
        config.qber_abort_threshold,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qber_examples() {
        let a = [true, false, true];
        assert_eq!(compute_qber(&a, &a, &[true; 3]).unwrap().value, 0.0);
        let b = [false, true, false];
        assert_eq!(compute_qber(&a, &b, &[true; 3]).unwrap().value, 1.0);
        let c = [true, true, false];
        let q = compute_qber(&a, &c, &[true, false, true]).unwrap();
        assert_eq!(q.value, 0.5);
        assert_eq!(q.sifted, 2);
        let e = compute_qber(&a, &c, &[false; 3]).unwrap();
        assert!(e.empty && e.value == 0.0);
        assert!(matches!(
            compute_qber(&a, &c[..2], &[true; 3]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn mutual_deadtime_drops_both_sides() {
        let mut c = vec![
            BobClick { t: 0.0, det: 0, eve: false },
            BobClick { t: 1e-9, det: 1, eve: false },
            BobClick { t: 100e-9, det: 0, eve: true },
            BobClick { t: 200e-9, det: 1, eve: true },
        ];
        let a = accept_clicks(&mut c, 40e-9);
        assert_eq!(a.len(), 2);
        assert!(a.iter().all(|c| c.eve));
    }

    #[test]
    fn geometric_mean() {
        let mut rng = trial_stream(5, 0);
        let n = 20_000;
        let m = (0..n).map(|_| geometric(0.2, &mut rng)).sum::<u64>() as f64 / n as f64;
        assert!((m - 4.0).abs() < 0.15, "{m}");
        assert_eq!(geometric(1.0, &mut rng), 0);
    }

    #[test]
    fn zero_bits_is_empty() {
        let cfg = ProtocolConfig {
            n_bits: 0,
            ..Default::default()
        };
        let o = run_dps_attack(&cfg, &InterferometerParams::default(), &Bench::default(), 1).unwrap();
        assert!(o.empty && o.sifted_bits == 0);
        let o = run_bb84_latched_attack(&cfg, &Bench::default(), 1).unwrap();
        assert!(o.empty && o.sifted_bits == 0);
    }

    #[test]
    fn dps_attack_small_run() {
        let cfg = ProtocolConfig {
            n_bits: 2000,
            ..Default::default()
        };
        let bench = Bench::default().with_threshold(11.6e-3);
        let o = run_dps_attack(&cfg, &InterferometerParams::default(), &bench, 7).unwrap();
        assert!(o.sifted_bits > 20, "{o}");
        assert!(o.qber < 0.011, "{o}");
        assert!(o.eve_known_fraction > 0.95, "{o}");
        assert!(!o.aborted);
    }

    #[test]
    fn bb84_attack_small_run() {
        let cfg = ProtocolConfig {
            protocol: Protocol::Bb84,
            n_bits: 1000,
            ..Default::default()
        };
        let o = run_bb84_latched_attack(&cfg, &Bench::default(), 3).unwrap();
        assert!(o.sifted_bits > 20, "{o}");
        assert_eq!(o.errors, 0, "{o}");
        assert_eq!(o.eve_known_fraction, 1.0, "{o}");
    }
}
