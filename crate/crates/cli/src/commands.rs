use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};
use snspd_sim::attack::{
    build_deadtime_control_diagram, build_latched_attack, evaluate_attack, min_trigger_power, InterferometerParams,
    Target, EVAL_DT,
};
use snspd_sim::io::{
    read_waveform, write_attack_reports, write_clicks, write_events, write_qkd, write_rows, write_segments,
    write_threshold_sweep, write_trace, write_waveform, AttackRow, ParamSet, Provenance, QkdRow, SweepPoint,
};
use snspd_sim::physics::{
    hotspot_probability, latched_iv, simulate_from, DetectorSim, EventKind,
};
use snspd_sim::qkd::{run_bb84_latched_attack, run_dps_attack, Protocol};
use snspd_sim::readout::{amplify, click_probability, discriminate};
use snspd_sim::rng::trial_stream;
use snspd_sim::scalar::photon_energy;
use snspd_sim::{DetectorState, OpticalWaveform};

use crate::Common;

const DEFAULT_PROBABILITY_TRIALS: u64 = 10_000;
const DEFAULT_ATTACK_TRIALS: u64 = 1_000_000;
const TRACE_LEAD: f64 = 2e-9;
const TRACE_TAIL: f64 = 60e-9;
const SWEEP_DT: f64 = 20e-12;

/// Loaded parameters and where and how to write results.
struct Ctx {
    params: ParamSet,
    seed: u64,
    trials: Option<u64>,
    out: PathBuf,
    force: bool,
    prov: Provenance,
}

impl Ctx {
    /// `args` names the command and every setting that shapes its output;
    /// together with the parameters it forms the config hash.
    fn new(common: &Common, args: String) -> Result<Self> {
        let params = match &common.params {
            Some(p) => ParamSet::load(p).with_context(|| format!("loading parameters from {}", p.display()))?,
            None => ParamSet::default(),
        };
        let mut h = Sha256::new();
        h.update(params.emit().as_bytes());
        h.update(args.as_bytes());
        let hash: String = h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect();
        Ok(Self {
            params,
            seed: common.seed,
            trials: common.trials,
            out: common.out.clone(),
            force: common.force,
            prov: Provenance::new(hash, common.seed),
        })
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        create(&self.out, name, self.force)
    }

    fn trials(&self, default: u64) -> u64 {
        self.trials.unwrap_or(default)
    }
}

fn create(dir: &Path, name: &str, force: bool) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let mut opts = OpenOptions::new();
    opts.write(true);
    if force {
        opts.create(true).truncate(true);
    } else {
        opts.create_new(true);
    }
    let f = opts.open(&path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::AlreadyExists {
            std::io::Error::new(e.kind(), format!("{} exists; pass --force to overwrite", path.display()))
        } else {
            e
        }
    });
    Ok(BufWriter::new(f.with_context(|| format!("opening {}", path.display()))?))
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn or_default(list: &[f64], default: f64) -> Vec<f64> {
    if list.is_empty() {
        vec![default]
    } else {
        list.to_vec()
    }
}

pub fn trace(common: &Common, waveform: Option<&Path>, power: f64, duration: f64, dt: f64, traces: u64) -> Result<()> {
    let ctx = Ctx::new(
        common,
        format!("trace waveform={waveform:?} power={power:e} duration={duration:e} dt={dt:e} traces={traces}"),
    )?;
    let bench = &ctx.params.bench;
    let w = match waveform {
        Some(p) => {
            let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            read_waveform(f, bench.detector.wavelength).with_context(|| format!("reading {}", p.display()))?
        }
        None => OpticalWaveform::rectangle(dt, power, duration, TRACE_LEAD, TRACE_TAIL),
    };
    let mut with_hotspot = 0u64;
    let mut counts = Vec::new();
    for i in 0..traces.max(1) {
        let (tr, _) = simulate_from(
            DetectorSim::default(),
            &bench.detector,
            &bench.bias,
            &w,
            &mut trial_stream(ctx.seed, i),
        )?;
        let n = tr.count(EventKind::HotspotFormed);
        with_hotspot += u64::from(n > 0);
        if i == 0 {
            let out = amplify(&tr, &bench.readout)?;
            let clicks = discriminate(&out, &bench.readout);
            write_trace(ctx.create("trace.csv")?, &ctx.prov, &tr)?;
            write_trace(ctx.create("readout.csv")?, &ctx.prov, &out)?;
            write_events(ctx.create("events.csv")?, &ctx.prov, &tr.events)?;
            write_clicks(ctx.create("clicks.csv")?, &ctx.prov, &clicks)?;
        }
        if traces > 1 {
            counts.push([i.to_string(), n.to_string()]);
        }
    }
    if traces > 1 {
        write_rows(ctx.create("hotspots.csv")?, &ctx.prov, &["trial", "hotspots"], counts)?;
    }
    let n = traces.max(1);
    println!(
        "{n} trace(s); {with_hotspot} with a hotspot ({:.4})",
        with_hotspot as f64 / n as f64
    );
    Ok(())
}

pub fn sweep_cw(common: &Common, voltages: &[f64], max_power: f64, points: usize) -> Result<()> {
    let ctx = Ctx::new(
        common,
        format!("sweep-cw voltages={voltages:?} max_power={max_power:e} points={points}"),
    )?;
    let det = &ctx.params.bench.detector;
    let steps = points.max(2) - 1;
    let mut rows = Vec::new();
    for &v in voltages {
        for k in 0..=steps {
            let p = max_power * k as f64 / steps as f64;
            let (i, r) = latched_iv(v, p, det)?;
            rows.push([num(v), num(p), num(i), num(r)]);
        }
    }
    write_rows(
        ctx.create("cw.csv")?,
        &ctx.prov,
        &["v_bias_V", "power_W", "current_A", "resistance_ohm"],
        rows,
    )?;
    Ok(())
}

pub fn sweep_threshold(
    common: &Common,
    trigger_power: Option<f64>,
    duration: f64,
    scales: &[f64],
    max_threshold: f64,
    step: f64,
) -> Result<()> {
    let ctx = Ctx::new(
        common,
        format!(
            "sweep-threshold trigger_power={trigger_power:?} duration={duration:e} scales={scales:?} \
             max_threshold={max_threshold:e} step={step:e}"
        ),
    )?;
    anyhow::ensure!(step > 0.0, snspd_sim::Error::InvalidParam {
        name: "step".into(),
        reason: "must be positive".into()
    });
    let bench = &ctx.params.bench;
    let state = DetectorState::latched_at(bench.detector.i_latched_nominal, &bench.bias);
    let full = match trigger_power {
        Some(p) => p,
        None => min_trigger_power(bench, state, duration, SWEEP_DT)? * std::f64::consts::SQRT_2,
    };
    println!("full trigger power {full:e} W");
    let trials = ctx.trials(DEFAULT_PROBABILITY_TRIALS);
    let n = (max_threshold / step + 1e-9).floor() as usize;
    let mut points = Vec::new();
    for k in 0..=n {
        let th = k as f64 * step;
        for &s in scales {
            let w = build_latched_attack(full * s, duration, true, SWEEP_DT);
            let e = click_probability(bench, &w, state, th, trials, ctx.seed)?;
            points.push(SweepPoint {
                threshold: bench.readout.quantize(th),
                power_scale: s,
                click_prob: e.p(),
                stderr: e.stderr(),
            });
        }
    }
    write_threshold_sweep(ctx.create("threshold_sweep.csv")?, &ctx.prov, &points)?;
    Ok(())
}

pub fn sweep_trigger(common: &Common, delays: &[f64], lo: f64, hi: f64, points: usize) -> Result<()> {
    let ctx = Ctx::new(
        common,
        format!("sweep-trigger delays={delays:?} min_energy={lo:e} max_energy={hi:e} points={points}"),
    )?;
    anyhow::ensure!(lo > 0.0 && hi > lo, snspd_sim::Error::InvalidParam {
        name: "energy range".into(),
        reason: format!("need 0 < min < max, got {lo:e}..{hi:e}")
    });
    let det = &ctx.params.bench.detector;
    let e_photon = photon_energy(det.wavelength);
    let steps = points.max(2) - 1;
    let mut rows = Vec::new();
    for &d in delays {
        for k in 0..=steps {
            let e = lo * (hi / lo).powf(k as f64 / steps as f64);
            rows.push([num(d), num(e), num(e / e_photon), num(hotspot_probability(e, d, det))]);
        }
    }
    write_rows(
        ctx.create("trigger_sweep.csv")?,
        &ctx.prov,
        &["delay_s", "energy_J", "photons", "hotspot_prob"],
        rows,
    )?;
    Ok(())
}

pub fn deadtime(common: &Common, target: Target, threshold: Option<f64>, waveform: bool) -> Result<()> {
    let ctx = Ctx::new(common, format!("deadtime target={target} threshold={threshold:?} waveform={waveform}"))?;
    let p = &ctx.params;
    let th = p.bench.readout.quantize(threshold.unwrap_or(p.bench.readout.threshold));
    let bench = p.bench.with_threshold(th);
    let d = build_deadtime_control_diagram(target, &p.iface, &bench, th, &p.protocol.control)?;
    write_segments(ctx.create("diagram.csv")?, &ctx.prov, &d)?;
    if waveform {
        write_waveform(ctx.create("diagram_waveform.csv")?, &ctx.prov, &d.render(EVAL_DT)?)?;
    }
    println!(
        "target {target}: {} short pulses of {:e} J, readout at {:e} s, block {:e} s",
        d.short_pulses.len(),
        d.short_pulses.first().map_or(0.0, |s| s.energy),
        d.readout_time,
        d.duration()
    );
    Ok(())
}

pub fn attack_eval(
    common: &Common,
    target: Target,
    er: &[f64],
    delta_t: &[f64],
    threshold: &[f64],
    without_steering: bool,
) -> Result<()> {
    let ctx = Ctx::new(
        common,
        format!(
            "attack-eval target={target} er={er:?} delta_t={delta_t:?} threshold={threshold:?} \
             without_steering={without_steering} trials={:?}",
            common.trials
        ),
    )?;
    let p = &ctx.params;
    let trials = ctx.trials(DEFAULT_ATTACK_TRIALS);
    let mut rows = Vec::new();
    for &er_db in &or_default(er, p.iface.extinction_db) {
        for &dt in &or_default(delta_t, p.iface.delta_t) {
            for &th in &or_default(threshold, p.bench.readout.threshold) {
                let iface = InterferometerParams {
                    extinction_db: er_db,
                    delta_t: dt,
                    ..p.iface
                };
                let th = p.bench.readout.quantize(th);
                let bench = p.bench.with_threshold(th);
                let d = build_deadtime_control_diagram(target, &iface, &bench, th, &p.protocol.control)
                    .with_context(|| format!("ER {er_db} dB, delay {dt:e} s, threshold {th:e} V"))?;
                let mut variants = vec![(true, d.clone())];
                if without_steering {
                    variants.push((false, d.without_steering()));
                }
                for (steering, d) in variants {
                    let report = evaluate_attack(&d, &iface, &bench, trials, ctx.seed)?;
                    println!(
                        "ER {er_db} dB, delay {dt:e} s, threshold {th:e} V, steering {steering}\n{report}\n"
                    );
                    rows.push(AttackRow {
                        target: target.to_string(),
                        er_db,
                        delta_t: dt,
                        threshold: th,
                        steering,
                        report,
                    });
                }
            }
        }
    }
    write_attack_reports(ctx.create("attack.csv")?, &ctx.prov, &rows)?;
    Ok(())
}

pub fn qkd(
    common: &Common,
    protocol: Option<Protocol>,
    er: &[f64],
    threshold: &[f64],
    no_attack: bool,
    n_bits: Option<u64>,
) -> Result<()> {
    let ctx = Ctx::new(
        common,
        format!("qkd protocol={protocol:?} er={er:?} threshold={threshold:?} no_attack={no_attack} n_bits={n_bits:?}"),
    )?;
    let p = &ctx.params;
    let mut config = p.protocol;
    if let Some(pr) = protocol {
        config.protocol = pr;
    }
    if let Some(n) = n_bits {
        config.n_bits = n;
    }
    if no_attack {
        config.attack_enabled = false;
    }
    let mut rows = Vec::new();
    for &er_db in &or_default(er, p.iface.extinction_db) {
        for &th in &or_default(threshold, p.bench.readout.threshold) {
            let iface = InterferometerParams {
                extinction_db: er_db,
                ..p.iface
            };
            let th = p.bench.readout.quantize(th);
            let bench = p.bench.with_threshold(th);
            let outcome = match config.protocol {
                Protocol::Dps => run_dps_attack(&config, &iface, &bench, ctx.seed)?,
                Protocol::Bb84 => run_bb84_latched_attack(&config, &bench, ctx.seed)?,
            };
            println!("ER {er_db} dB, threshold {th:e} V\n{outcome}\n");
            rows.push(QkdRow {
                er_db,
                threshold: th,
                outcome,
            });
        }
    }
    write_qkd(ctx.create("qkd.csv")?, &ctx.prov, &rows)?;
    Ok(())
}

pub fn emit_defaults(out: &Path, force: bool) -> Result<()> {
    let mut f = create(out, "params.txt", force)?;
    f.write_all(ParamSet::default().emit().as_bytes())?;
    f.flush()?;
    Ok(())
}
