use std::io::{Read, Write};

use crate::attack::{AttackReport, ControlDiagram};
use crate::error::{Error, Result};
use crate::physics::EventRecord;
use crate::qkd::QkdOutcome;
use crate::{ClickEvent, ElectricalTrace, OpticalWaveform};

/// Relative tolerance on the sample spacing of a loaded waveform.
pub const DT_TOLERANCE: f64 = 1e-6;

/// What produced an output file; written as `#` comment lines before the
/// CSV header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

impl Provenance {
    pub fn new(config_hash: impl Into<String>, seed: u64) -> Self {
        Self {
            config_hash: config_hash.into(),
            seed,
            version: crate::VERSION.to_string(),
        }
    }
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

/// CSV writer over `out` with the provenance comment already written.
pub fn csv_writer<W: Write>(mut out: W, prov: &Provenance, header: &[&str]) -> Result<csv::Writer<W>> {
    writeln!(out, "# config_hash = {}", prov.config_hash)?;
    writeln!(out, "# seed = {}", prov.seed)?;
    writeln!(out, "# version = snspd-sim {}", prov.version)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header)?;
    Ok(w)
}

/// Write `rows` of already formatted fields.
pub fn write_rows<W: Write, I, R>(out: W, prov: &Provenance, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv_writer(out, prov, header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// `t_s,v_out_V`.
pub fn write_trace<W: Write>(out: W, prov: &Provenance, trace: &ElectricalTrace) -> Result<()> {
    write_rows(
        out,
        prov,
        &["t_s", "v_out_V"],
        trace
            .v_out
            .iter()
            .enumerate()
            .map(|(k, &v)| [num(k as f64 * trace.dt), num(v)]),
    )
}

/// `time_s,kind`.
pub fn write_events<W: Write>(out: W, prov: &Provenance, events: &[EventRecord<f64>]) -> Result<()> {
    write_rows(
        out,
        prov,
        &["time_s", "kind"],
        events.iter().map(|e| [num(e.time), e.kind.as_str().to_string()]),
    )
}

/// `t_cross_s,dwell_s`.
pub fn write_clicks<W: Write>(out: W, prov: &Provenance, clicks: &[ClickEvent]) -> Result<()> {
    write_rows(
        out,
        prov,
        &["t_cross_s", "dwell_s"],
        clicks.iter().map(|c| [num(c.t_cross), num(c.dwell)]),
    )
}

/// One point of a click-probability sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub threshold: f64,
    pub power_scale: f64,
    pub click_prob: f64,
    pub stderr: f64,
}

/// `threshold_V,power_scale,click_prob,stderr`.
pub fn write_threshold_sweep<W: Write>(out: W, prov: &Provenance, points: &[SweepPoint]) -> Result<()> {
    write_rows(
        out,
        prov,
        &["threshold_V", "power_scale", "click_prob", "stderr"],
        points
            .iter()
            .map(|p| [num(p.threshold), num(p.power_scale), num(p.click_prob), num(p.stderr)]),
    )
}

/// `t_start_s,duration_s,power_W,phase_rad,label`.
pub fn write_segments<W: Write>(out: W, prov: &Provenance, diagram: &ControlDiagram) -> Result<()> {
    write_rows(
        out,
        prov,
        &["t_start_s", "duration_s", "power_W", "phase_rad", "label"],
        diagram
            .segments()
            .iter()
            .map(|s| [num(s.t_start), num(s.duration), num(s.power), num(s.phase), s.label.to_string()]),
    )
}

/// A QKD outcome with the settings it was run at.
#[derive(Debug, Clone, PartialEq)]
pub struct QkdRow {
    pub er_db: f64,
    pub threshold: f64,
    pub outcome: QkdOutcome,
}

/// `protocol,er_db,threshold_V,sifted,qber,eve_fraction,aborted`.
pub fn write_qkd<W: Write>(out: W, prov: &Provenance, rows: &[QkdRow]) -> Result<()> {
    write_rows(
        out,
        prov,
        &["protocol", "er_db", "threshold_V", "sifted", "qber", "eve_fraction", "aborted"],
        rows.iter().map(|r| {
            [
                r.outcome.protocol.to_string(),
                num(r.er_db),
                num(r.threshold),
                r.outcome.sifted_bits.to_string(),
                num(r.outcome.qber),
                num(r.outcome.eve_known_fraction),
                r.outcome.aborted.to_string(),
            ]
        }),
    )
}

/// An attack report with the settings it was evaluated at.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackRow {
    pub target: String,
    pub er_db: f64,
    pub delta_t: f64,
    pub threshold: f64,
    pub steering: bool,
    pub report: AttackReport,
}

/// One row per evaluated diagram.
pub fn write_attack_reports<W: Write>(out: W, prov: &Provenance, rows: &[AttackRow]) -> Result<()> {
    write_rows(
        out,
        prov,
        &[
            "target",
            "er_db",
            "delta_t_s",
            "threshold_V",
            "steering",
            "trials",
            "p_click_target",
            "p_click_wrong",
            "p_click_wrong_upper95",
            "double_click_rate",
            "jitter_fwhm_s",
            "latch_events",
        ],
        rows.iter().map(|r| {
            [
                r.target.clone(),
                num(r.er_db),
                num(r.delta_t),
                num(r.threshold),
                r.steering.to_string(),
                r.report.trials.to_string(),
                num(r.report.p_click_target()),
                num(r.report.p_click_wrong()),
                num(r.report.wrong_upper_95()),
                num(r.report.double_click_rate()),
                num(r.report.jitter_fwhm()),
                r.report.latch_events.to_string(),
            ]
        }),
    )
}

/// Read a `t_s,power_W,phase_rad` waveform. `#` lines are skipped and the
/// sample spacing must be uniform.
pub fn read_waveform<R: Read>(input: R, wavelength: f64) -> Result<OpticalWaveform> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["t_s", "power_W", "phase_rad"] {
        return Err(Error::InvalidWaveform(format!(
            "header must be t_s,power_W,phase_rad, got {}",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut t = Vec::new();
    let mut power = Vec::new();
    let mut phase = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parse {
                    line,
                    reason: format!("column {} is not a number", i + 1),
                })
        };
        t.push(field(0)?);
        power.push(field(1)?);
        phase.push(field(2)?);
    }
    if t.len() < 2 {
        return Err(Error::InvalidWaveform("need at least two samples to fix dt".into()));
    }
    let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    for (k, w) in t.windows(2).enumerate() {
        let step = w[1] - w[0];
        if !((step - dt).abs() <= DT_TOLERANCE * dt.abs()) {
            return Err(Error::InvalidWaveform(format!(
                "non-uniform sample spacing at row {}: {step:e} s vs {dt:e} s",
                k + 2
            )));
        }
    }
    OpticalWaveform::new(dt, power, phase, wavelength)
}

/// Write a waveform in the format [`read_waveform`] accepts.
pub fn write_waveform<W: Write>(out: W, prov: &Provenance, w: &OpticalWaveform) -> Result<()> {
    write_rows(
        out,
        prov,
        &["t_s", "power_W", "phase_rad"],
        (0..w.len()).map(|k| [num(w.time(k)), num(w.power[k]), num(w.phase[k])]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::EventKind;

    fn prov() -> Provenance {
        Provenance::new("abc123", 7)
    }

    fn text(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> String {
        let mut buf = Vec::new();
        f(&mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn header_then_columns() {
        let s = text(|b| write_clicks(b, &prov(), &[ClickEvent { t_cross: 1e-9, dwell: 4e-9 }]));
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "# config_hash = abc123");
        assert_eq!(lines[1], "# seed = 7");
        assert!(lines[2].starts_with("# version = snspd-sim "));
        assert_eq!(lines[3], "t_cross_s,dwell_s");
        assert_eq!(lines[4], "1e-9,4e-9");
    }

    #[test]
    fn events_use_kind_names() {
        let ev = [EventRecord { kind: EventKind::HotspotFormed, time: 2e-9 }];
        let s = text(|b| write_events(b, &prov(), &ev));
        assert!(s.ends_with("time_s,kind\n2e-9,HotspotFormed\n"));
    }

    #[test]
    fn waveform_round_trip() {
        let w = OpticalWaveform::rectangle(10e-12, 2.5e-3, 1e-9, 0.2e-9, 0.3e-9);
        let s = text(|b| write_waveform(b, &prov(), &w));
        let back = read_waveform(s.as_bytes(), w.wavelength).unwrap();
        assert_eq!(back.power, w.power);
        assert_eq!(back.phase, w.phase);
        assert!((back.dt - w.dt).abs() < 1e-6 * w.dt);
    }

    #[test]
    fn non_uniform_waveform_rejected() {
        let s = "t_s,power_W,phase_rad\n0,0,0\n1e-11,0,0\n2.5e-11,0,0\n";
        assert!(matches!(read_waveform(s.as_bytes(), 1550e-9), Err(Error::InvalidWaveform(_))));
    }

    #[test]
    fn jitter_below_tolerance_accepted() {
        let s = "t_s,power_W,phase_rad\n0,0,0\n1e-11,1e-3,0\n2.00000000001e-11,0,0\n";
        assert_eq!(read_waveform(s.as_bytes(), 1550e-9).unwrap().len(), 3);
    }

    #[test]
    fn bad_header_and_cells_rejected() {
        assert!(read_waveform("t,p,phi\n0,0,0\n1,0,0\n".as_bytes(), 1550e-9).is_err());
        assert!(matches!(
            read_waveform("t_s,power_W,phase_rad\n0,0,0\n1e-11,x,0\n".as_bytes(), 1550e-9),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(read_waveform("t_s,power_W,phase_rad\n0,0,0\n".as_bytes(), 1550e-9).is_err());
    }
}
