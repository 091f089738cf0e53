//! Randomised invariant suites shared by the property and acceptance targets.

#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use snspd_sim::attack::{
    build_deadtime_control_diagram, evaluate_attack, interferometer_split, DeadtimeConfig, InterferometerParams,
    Target,
};
use snspd_sim::physics::{drive, hotspot_probability, recovery_current, DetectorSim, EventKind, EventRecord};
use snspd_sim::readout::{amplify, discriminate, run_trial};
use snspd_sim::rng::trial_stream;
use snspd_sim::{Bench, DetectorParams, DetectorState, ElectricalTrace, OpticalWaveform, ReadoutParams};

pub const CASES: u32 = 1000;

pub type Suite = fn(u32) -> Result<(), String>;

/// Every suite by name.
pub fn suites() -> Vec<(&'static str, Suite)> {
    vec![
        ("absorbing latch (latched start)", latched_detector_never_forms_hotspots),
        ("absorbing latch (after bright illumination)", latch_is_absorbing_after_bright_illumination),
        ("recovery monotonicity (stepped)", current_recovers_monotonically),
        ("recovery monotonicity (analytic)", analytic_recovery_is_monotone),
        ("hotspot probability monotonicity", hotspot_probability_is_monotone),
        ("threshold-set monotonicity", higher_threshold_samples_are_a_subset),
        ("amplifier linearity", amplifier_is_linear),
        ("interferometer power conservation", interferometer_conserves_power),
        ("rectangle energy bookkeeping", rectangle_energy_matches_analytic),
        ("seed determinism (detector and readout)", pipeline_is_seed_deterministic),
        ("seed determinism (attack evaluation)", attack_evaluation_is_seed_deterministic),
    ]
}

fn check<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn waveform(dt: f64, power: Vec<f64>, phase: Vec<f64>) -> OpticalWaveform {
    OpticalWaveform::new(dt, power, phase, 1550e-9).unwrap()
}

/// Random piecewise-constant optical waveform.
fn arb_waveform(n: std::ops::Range<usize>, max_power: f64) -> impl Strategy<Value = OpticalWaveform> {
    (10e-12..50e-12f64, prop::collection::vec((0.0..max_power, 1usize..40, -7.0..7.0f64), 1..12), n).prop_map(
        move |(dt, segs, n)| {
            let mut power = Vec::with_capacity(n);
            let mut phase = Vec::with_capacity(n);
            for (p, len, ph) in segs.iter().cycle() {
                for _ in 0..*len {
                    power.push(*p);
                    phase.push(*ph);
                }
                if power.len() >= n {
                    break;
                }
            }
            power.truncate(n);
            phase.truncate(n);
            waveform(dt, power, phase)
        },
    )
}

fn run(sim: &mut DetectorSim<f64>, w: &OpticalWaveform, t0: f64, seed: u64) -> Vec<EventRecord<f64>> {
    let b = Bench::default();
    let mut events = Vec::new();
    drive(sim, w, t0, &b.detector, &b.bias, &mut trial_stream(seed, 0), &mut events, |_, _| {}).unwrap();
    events
}

fn no_detections(events: &[EventRecord<f64>]) -> bool {
    events
        .iter()
        .all(|e| !matches!(e.kind, EventKind::HotspotFormed | EventKind::DarkCount))
}

pub fn latched_detector_never_forms_hotspots(cases: u32) -> Result<(), String> {
    check(
        cases,
        (6e-6..8e-6f64, arb_waveform(10..400, 30e-3), any::<u64>()),
        |(i_l, w, seed)| {
            let b = Bench::default();
            let mut sim = DetectorSim::new(DetectorState::latched_at(i_l, &b.bias));
            let events = run(&mut sim, &w, 0.0, seed);
            prop_assert!(no_detections(&events));
            prop_assert!(sim.state.is_latched());
            Ok(())
        },
    )
}

pub fn latch_is_absorbing_after_bright_illumination(cases: u32) -> Result<(), String> {
    check(
        cases,
        (1e-3..20e-3f64, arb_waveform(10..300, 30e-3), any::<u64>()),
        |(p, suffix, seed)| {
            let prefix = OpticalWaveform::rectangle(suffix.dt, p, 1.1e-6, 0.0, 0.0);
            let mut sim = DetectorSim::default();
            let mut events = run(&mut sim, &prefix, 0.0, seed);
            events.extend(run(&mut sim, &suffix, prefix.duration(), seed ^ 1));
            let latch = events.iter().position(|e| e.kind == EventKind::LatchEntered);
            prop_assert!(latch.is_some(), "never latched");
            prop_assert!(no_detections(&events[latch.unwrap() + 1..]));
            Ok(())
        },
    )
}

pub fn current_recovers_monotonically(cases: u32) -> Result<(), String> {
    check(
        cases,
        (5e-9..30e-9f64, 0.05..0.6f64, 10e-12..100e-12f64, any::<u64>()),
        |(tau, f_reset, dt, seed)| {
            let params = DetectorParams {
                tau_rec: tau,
                f_reset,
                dark_rate: 0.0,
                ..Default::default()
            };
            let b = Bench::default();
            let mut sim = DetectorSim::new(DetectorState::HotspotActive {
                time_remaining: params.t_hotspot,
            });
            let mut rng = trial_stream(seed, 0);
            let mut events = Vec::new();
            let mut last = sim.current(&params);
            let steps = ((10.0 * tau + params.t_hotspot) / dt).ceil() as usize;
            for k in 0..steps {
                sim.step(0.0, dt, k as f64 * dt, &params, &b.bias, &mut rng, &mut events)
                    .unwrap();
                let i = sim.current(&params);
                prop_assert!(i >= last, "current fell from {} to {} at step {}", last, i, k);
                last = i;
            }
            prop_assert!(last >= 0.99 * params.i_b);
            prop_assert!(events.is_empty());
            Ok(())
        },
    )
}

pub fn analytic_recovery_is_monotone(cases: u32) -> Result<(), String> {
    check(cases, (0.0..200e-9f64, 0.0..200e-9f64), |(t1, t2)| {
        let p = DetectorParams::default();
        let (a, b) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        prop_assert!(recovery_current(a, &p) <= recovery_current(b, &p));
        Ok(())
    })
}

pub fn hotspot_probability_is_monotone(cases: u32) -> Result<(), String> {
    check(
        cases,
        (1e-16..1e-11f64, 1e-16..1e-11f64, 0.0..40e-9f64, 0.0..40e-9f64),
        |(e1, e2, d1, d2)| {
            let p = DetectorParams::default();
            let (elo, ehi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
            let (dlo, dhi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            prop_assert!(hotspot_probability(elo, d1, &p) <= hotspot_probability(ehi, d1, &p));
            prop_assert!(hotspot_probability(e1, dlo, &p) <= hotspot_probability(e1, dhi, &p));
            Ok(())
        },
    )
}

pub fn higher_threshold_samples_are_a_subset(cases: u32) -> Result<(), String> {
    check(
        cases,
        (prop::collection::vec(-0.06..0.06f64, 10..2000), 0.0..0.05f64, 0.0..0.05f64),
        |(v, t1, t2)| {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            for &x in &v {
                prop_assert!(x <= hi || x > lo);
            }
            let tr = ElectricalTrace {
                dt: 10e-12,
                v_out: v,
                events: vec![],
            };
            let base = ReadoutParams::default();
            let c_lo = discriminate(&tr, &ReadoutParams { threshold: lo, ..base.clone() });
            let c_hi = discriminate(&tr, &ReadoutParams { threshold: hi, ..base });
            for c in &c_hi {
                prop_assert!(c_lo
                    .iter()
                    .any(|d| d.t_cross <= c.t_cross && c.t_cross + c.dwell <= d.t_cross + d.dwell + 1e-15));
            }
            Ok(())
        },
    )
}

pub fn amplifier_is_linear(cases: u32) -> Result<(), String> {
    check(
        cases,
        (
            prop::collection::vec((-1e-3..1e-3f64, -1e-3..1e-3f64), 10..1000),
            -10.0..10.0f64,
            -10.0..10.0f64,
            5e-12..60e-12f64,
        ),
        |(xy, a, b, dt)| {
            let r = ReadoutParams::default();
            let (x, y): (Vec<f64>, Vec<f64>) = xy.into_iter().unzip();
            let tr = |v: Vec<f64>| ElectricalTrace {
                dt,
                v_out: v,
                events: vec![],
            };
            let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            let ax = amplify(&tr(x), &r).unwrap().v_out;
            let ay = amplify(&tr(y), &r).unwrap().v_out;
            let am = amplify(&tr(mix), &r).unwrap().v_out;
            let scale = ax
                .iter()
                .zip(&ay)
                .map(|(p, q)| a.abs() * p.abs() + b.abs() * q.abs())
                .fold(f64::MIN_POSITIVE, f64::max);
            for k in 0..am.len() {
                let err = (am[k] - (a * ax[k] + b * ay[k])).abs();
                prop_assert!(err <= 1e-9 * scale, "sample {}: error {:e} vs scale {:e}", k, err, scale);
            }
            Ok(())
        },
    )
}

pub fn interferometer_conserves_power(cases: u32) -> Result<(), String> {
    check(
        cases,
        (arb_waveform(10..600, 20e-3), 1usize..40, 5.0..40.0f64, 0.0..6.0f64),
        |(w, lag, er, loss)| {
            let w = OpticalWaveform {
                dt: 5e-9 / lag as f64,
                ..w
            };
            let iface = InterferometerParams {
                delta_t: 5e-9,
                extinction_db: er,
                insertion_loss_db: loss,
            };
            let (d0, d1) = interferometer_split(&w, &iface).unwrap();
            let out: f64 = d0.power.iter().zip(&d1.power).map(|(a, b)| a + b).sum();
            let input: f64 = w.power.iter().sum();
            prop_assert!((out - iface.transmission() * input).abs() <= 1e-12 * input.max(1e-30));
            prop_assert!(d0.power.iter().chain(&d1.power).all(|&p| p >= 0.0));
            Ok(())
        },
    )
}

pub fn rectangle_energy_matches_analytic(cases: u32) -> Result<(), String> {
    check(
        cases,
        (1e-9..1.0f64, 1usize..20_000, 1e-12..100e-12f64, 0usize..100),
        |(p, n_on, dt, lead)| {
            let w = OpticalWaveform::rectangle(dt, p, n_on as f64 * dt, lead as f64 * dt, 0.0);
            let exact = p * n_on as f64 * dt;
            prop_assert!(((w.energy() - exact) / exact).abs() <= 1e-12);
            Ok(())
        },
    )
}

pub fn pipeline_is_seed_deterministic(cases: u32) -> Result<(), String> {
    check(cases, (arb_waveform(10..800, 5e-3), any::<u64>()), |(w, seed)| {
        let b = Bench::default();
        let a = run_trial(&b, DetectorSim::default(), &w, &mut trial_stream(seed, 3)).unwrap();
        let c = run_trial(&b, DetectorSim::default(), &w, &mut trial_stream(seed, 3)).unwrap();
        prop_assert_eq!(&a.clicks, &c.clicks);
        prop_assert_eq!(&a.events, &c.events);
        Ok(())
    })
}

pub fn attack_evaluation_is_seed_deterministic(cases: u32) -> Result<(), String> {
    check(
        cases,
        (10.0..30.0f64, any::<bool>(), 1u64..3, any::<u64>()),
        |(er, d1, n, seed)| {
            let b = Bench::default().with_threshold(11.6e-3);
            let iface = InterferometerParams {
                extinction_db: er,
                ..Default::default()
            };
            let t = if d1 { Target::D1 } else { Target::D0 };
            let d = build_deadtime_control_diagram(t, &iface, &b, 11.6e-3, &DeadtimeConfig::default()).unwrap();
            let r1 = evaluate_attack(&d, &iface, &b, n, seed).unwrap();
            let r2 = evaluate_attack(&d, &iface, &b, n, seed).unwrap();
            prop_assert_eq!(r1, r2);
            Ok(())
        },
    )
}
