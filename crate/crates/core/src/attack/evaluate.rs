use std::fmt;

use super::deadtime::ControlDiagram;
use super::interferometer::{interferometer_split, InterferometerParams};
use crate::error::Result;
use crate::physics::{DetectorSim, EventKind};
use crate::readout::run_trial;
use crate::rng::trial_stream;
use crate::stats::{Estimate, Moments};
use crate::{Bench, ClickEvent, OpticalWaveform};

/// Sample step used to evaluate control diagrams, s.
pub const EVAL_DT: f64 = 50e-12;
/// Clicks in the two detectors closer than this count as one double click, s.
pub const COINCIDENCE_WINDOW: f64 = 1e-9;
/// Record kept after the last optical sample, s.
const RECORD_TAIL: f64 = 5e-9;
const CHUNK: u64 = 1024;

/// Aggregated outcome of many control trials. Merging reports of disjoint
/// trial sets gives the report of their union.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AttackReport {
    pub trials: u64,
    /// Readout windows in which the target clicked, over all readouts.
    pub target: Estimate,
    /// Trials with any non-target click other than the initial double click.
    pub wrong: Estimate,
    /// Trials opening with a coincident click in both detectors.
    pub double_click: Estimate,
    /// Target click time relative to the first readout pulse.
    pub readout_timing: Moments,
    /// Time of the target's opening click.
    pub edge_timing: Moments,
    pub latch_events: u64,
}

impl AttackReport {
    pub fn p_click_target(&self) -> f64 {
        self.target.p()
    }

    pub fn p_click_wrong(&self) -> f64 {
        self.wrong.p()
    }

    pub fn double_click_rate(&self) -> f64 {
        self.double_click.p()
    }

    /// FWHM of the controlled click time; zero when it never varies.
    pub fn jitter_fwhm(&self) -> f64 {
        self.readout_timing.fwhm().unwrap_or(0.0)
    }

    /// FWHM of the opening double click time.
    pub fn edge_jitter_fwhm(&self) -> f64 {
        self.edge_timing.fwhm().unwrap_or(0.0)
    }

    /// Upper end of the 95 % Wilson interval of the wrong-click probability.
    pub fn wrong_upper_95(&self) -> f64 {
        self.wrong.wilson(1.96).1
    }

    /// Fewer trials than needed to resolve wrong-click rates near 1e-5.
    pub fn insufficient_statistics(&self) -> bool {
        self.trials < 1000
    }

    pub fn merge(self, other: AttackReport) -> AttackReport {
        AttackReport {
            trials: self.trials + other.trials,
            target: self.target.merge(other.target),
            wrong: self.wrong.merge(other.wrong),
            double_click: self.double_click.merge(other.double_click),
            readout_timing: self.readout_timing.merge(other.readout_timing),
            edge_timing: self.edge_timing.merge(other.edge_timing),
            latch_events: self.latch_events + other.latch_events,
        }
    }
}

impl fmt::Display for AttackReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "trials              {}", self.trials)?;
        writeln!(
            f,
            "target click        {:.6} ± {:.2e}",
            self.p_click_target(),
            self.target.stderr()
        )?;
        writeln!(
            f,
            "wrong click         {:.3e} ± {:.2e} (95% upper {:.3e})",
            self.p_click_wrong(),
            self.wrong.stderr(),
            self.wrong_upper_95()
        )?;
        writeln!(f, "opening double      {:.6}", self.double_click_rate())?;
        writeln!(f, "readout jitter FWHM {:.3e} s", self.jitter_fwhm())?;
        writeln!(f, "edge jitter FWHM    {:.3e} s", self.edge_jitter_fwhm())?;
        write!(f, "latch events        {}", self.latch_events)?;
        if self.insufficient_statistics() {
            write!(f, "\nwarning: fewer than 1000 trials")?;
        }
        Ok(())
    }
}

struct Prepared<'a> {
    bench: &'a Bench,
    waves: [OpticalWaveform; 2],
    target: usize,
    readouts: Vec<f64>,
    delta_t: f64,
}

/// Run `n_trials` seeded trials of `diagram` through Bob's interferometer and
/// both detectors, each starting fully recovered.
///
/// Trials run on all available cores in fixed chunks that are merged in
/// order, so the report depends only on the inputs and `seed`.
pub fn evaluate_attack(
    diagram: &ControlDiagram,
    iface: &InterferometerParams,
    bench: &Bench,
    n_trials: u64,
    seed: u64,
) -> Result<AttackReport> {
    bench.validate()?;
    let mut w = diagram.render(EVAL_DT)?;
    w.pad_to(((diagram.duration() + RECORD_TAIL) / EVAL_DT).round() as usize);
    let (d0, d1) = interferometer_split(&w, iface)?;
    let prep = Prepared {
        bench,
        waves: [d0, d1],
        target: diagram.target.index(),
        readouts: diagram.readout_times(),
        delta_t: diagram.delta_t,
    };
    let n_chunks = n_trials.div_ceil(CHUNK);
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(n_chunks.max(1) as usize);
    let mut parts: Vec<Result<AttackReport>> = Vec::new();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|wkr| {
                let prep = &prep;
                s.spawn(move || {
                    (wkr as u64..n_chunks)
                        .step_by(workers)
                        .map(|c| {
                            let lo = c * CHUNK;
                            let hi = (lo + CHUNK).min(n_trials);
                            run_chunk(prep, lo..hi, seed).map(|r| (c, r))
                        })
                        .collect::<Result<Vec<_>>>()
                })
            })
            .collect();
        let mut indexed = Vec::new();
        for h in handles {
            match h.join().expect("evaluation worker panicked") {
                Ok(v) => indexed.extend(v),
                Err(e) => parts.push(Err(e)),
            }
        }
        indexed.sort_by_key(|(c, _)| *c);
        parts.extend(indexed.into_iter().map(|(_, r)| Ok(r)));
    });
    parts
        .into_iter()
        .try_fold(AttackReport::default(), |acc, r| r.map(|r| acc.merge(r)))
}

fn run_chunk(prep: &Prepared, trials: std::ops::Range<u64>, seed: u64) -> Result<AttackReport> {
    let mut rep = AttackReport::default();
    for trial in trials {
        let mut rng = trial_stream(seed, trial);
        let mut clicks: [Vec<ClickEvent>; 2] = [Vec::new(), Vec::new()];
        for (d, wave) in prep.waves.iter().enumerate() {
            let out = run_trial(prep.bench, DetectorSim::default(), wave, &mut rng)?;
            rep.latch_events += out.events.iter().filter(|e| e.kind == EventKind::LatchEntered).count() as u64;
            clicks[d] = out.clicks;
        }
        let tc = &clicks[prep.target];
        let nc = &clicks[1 - prep.target];
        let double = match (tc.first(), nc.first()) {
            (Some(a), Some(b)) => (a.t_cross - b.t_cross).abs() <= COINCIDENCE_WINDOW,
            _ => false,
        };
        if double {
            rep.edge_timing.push(tc[0].t_cross);
        }
        let wrong = nc.len() > usize::from(double);
        let mut hits = 0;
        for (i, &r) in prep.readouts.iter().enumerate() {
            if let Some(c) = tc.iter().find(|c| c.t_cross >= r && c.t_cross < r + prep.delta_t) {
                hits += 1;
                if i == 0 {
                    rep.readout_timing.push(c.t_cross - r);
                }
            }
        }
        rep.trials += 1;
        rep.target = rep.target.merge(Estimate::new(hits, prep.readouts.len() as u64));
        rep.wrong = rep.wrong.merge(Estimate::new(u64::from(wrong), 1));
        rep.double_click = rep.double_click.merge(Estimate::new(u64::from(double), 1));
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::{build_deadtime_control_diagram, DeadtimeConfig, Target};

    fn diagram(target: Target) -> ControlDiagram {
        build_deadtime_control_diagram(
            target,
            &InterferometerParams::default(),
            &Bench::default().with_threshold(11.6e-3),
            11.6e-3,
            &DeadtimeConfig::default(),
        )
        .unwrap()
    }

    fn bench() -> Bench {
        Bench::default().with_threshold(11.6e-3)
    }

    #[test]
    fn default_diagram_controls_either_detector() {
        for target in [Target::D0, Target::D1] {
            let r = evaluate_attack(&diagram(target), &InterferometerParams::default(), &bench(), 200, 3).unwrap();
            assert_eq!(r.trials, 200);
            assert_eq!(r.target.successes, 200, "{target}: {r}");
            assert_eq!(r.wrong.successes, 0, "{target}: {r}");
            assert_eq!(r.double_click.successes, 200, "{target}: {r}");
            assert_eq!(r.latch_events, 0);
            assert!(r.insufficient_statistics());
        }
    }

    #[test]
    fn dark_diagram_gives_nothing() {
        let d = diagram(Target::D0).scaled(0.0);
        let r = evaluate_attack(&d, &InterferometerParams::default(), &bench(), 100, 1).unwrap();
        assert_eq!(r.target.successes + r.wrong.successes + r.double_click.successes, 0);
    }

    #[test]
    fn reports_merge_associatively() {
        let d = diagram(Target::D1);
        let i = InterferometerParams::default();
        let a = evaluate_attack(&d, &i, &bench(), 30, 9).unwrap();
        let b = evaluate_attack(&d, &i, &bench(), 30, 10).unwrap();
        let c = evaluate_attack(&d, &i, &bench(), 30, 11).unwrap();
        let l = a.merge(b).merge(c);
        let r = a.merge(b.merge(c));
        assert_eq!(l.trials, r.trials);
        assert_eq!(l.target, r.target);
        assert_eq!(l.wrong, r.wrong);
        assert!((l.readout_timing.mean - r.readout_timing.mean).abs() < 1e-18);
    }

    #[test]
    fn same_seed_same_report() {
        let d = diagram(Target::D0);
        let i = InterferometerParams::default();
        let a = evaluate_attack(&d, &i, &bench(), 2100, 4).unwrap();
        let b = evaluate_attack(&d, &i, &bench(), 2100, 4).unwrap();
        assert_eq!(a, b);
    }
}
