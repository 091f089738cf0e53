use std::fmt::Write as _;
use std::path::Path;

use crate::attack::InterferometerParams;
use crate::error::{Error, Result};
use crate::physics::SensAnchor;
use crate::qkd::{Protocol, ProtocolConfig};
use crate::Bench;

/// Everything a run can be configured with: the detector bench, Bob's
/// interferometer and the protocol (which carries the control-diagram tunables).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet {
    pub bench: Bench,
    pub iface: InterferometerParams,
    pub protocol: ProtocolConfig,
}

impl ParamSet {
    pub fn validate(&self) -> Result<()> {
        self.bench.validate()?;
        self.iface.validate()?;
        self.protocol.validate()
    }

    /// Parse a `key = value` parameter file. Keys not given keep their
    /// defaults; unknown keys and repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut p = ParamSet::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                reason: format!("expected `key = value`, got `{line}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Parse {
                    line: i + 1,
                    reason: format!("`{key}` given twice"),
                });
            }
            if !assign(&mut p, key, value).map_err(|reason| Error::Parse { line: i + 1, reason })? {
                return Err(Error::UnknownKey(key.to_string()));
            }
        }
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Render every parameter with a short note on its origin.
    pub fn emit(&self) -> String {
        let mut out = String::from("# SNSPD simulator parameters, SI units unless noted\n");
        let mut section = "";
        for (key, value, note) in entries(self) {
            let head = key.split('.').next().unwrap_or("");
            if head != section {
                section = head;
                let _ = writeln!(out, "\n# --- {head} ---");
            }
            let _ = writeln!(out, "# {note}");
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "auto".to_string(), num)
}

fn parse_num(v: &str) -> std::result::Result<f64, String> {
    let x: f64 = v.parse().map_err(|_| format!("`{v}` is not a number"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("`{v}` is not finite"))
    }
}

fn parse_opt(v: &str) -> std::result::Result<Option<f64>, String> {
    if v.eq_ignore_ascii_case("auto") {
        Ok(None)
    } else {
        parse_num(v).map(Some)
    }
}

fn parse_int<I: std::str::FromStr>(v: &str) -> std::result::Result<I, String> {
    v.parse().map_err(|_| format!("`{v}` is not a non-negative integer"))
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    v.parse().map_err(|_| format!("`{v}` is not true or false"))
}

/// `delay:e50:slope` triples separated by commas.
fn table_text(t: &[SensAnchor<f64>]) -> String {
    t.iter()
        .map(|a| format!("{:e}:{:e}:{}", a.delay, a.e50, a.slope))
        .collect::<Vec<_>>()
        .join(", ")
}

fn parse_table(v: &str) -> std::result::Result<Vec<SensAnchor<f64>>, String> {
    v.split(',')
        .map(|item| {
            let f: Vec<&str> = item.trim().split(':').collect();
            if f.len() != 3 {
                return Err(format!("table entry `{}` is not delay:e50:slope", item.trim()));
            }
            Ok(SensAnchor {
                delay: parse_num(f[0])?,
                e50: parse_num(f[1])?,
                slope: parse_num(f[2])?,
            })
        })
        .collect()
}

macro_rules! param_table {
    ($($key:literal, $kind:ident, $note:literal => $($field:ident).+;)*) => {
        fn entries(p: &ParamSet) -> Vec<(&'static str, String, &'static str)> {
            vec![$(($key, param_table!(@show $kind, p.$($field).+), $note),)*]
        }

        fn assign(p: &mut ParamSet, key: &str, v: &str) -> std::result::Result<bool, String> {
            match key {
                $($key => p.$($field).+ = param_table!(@read $kind, v),)*
                _ => return Ok(false),
            }
            Ok(true)
        }

        /// Every recognised key, in file order.
        pub fn param_keys() -> &'static [&'static str] {
            &[$($key,)*]
        }
    };
    (@show num, $e:expr) => { num($e) };
    (@show opt, $e:expr) => { opt($e) };
    (@show int, $e:expr) => { $e.to_string() };
    (@show bool, $e:expr) => { $e.to_string() };
    (@show proto, $e:expr) => { $e.to_string() };
    (@show table, $e:expr) => { table_text(&$e) };
    (@read num, $v:expr) => { parse_num($v)? };
    (@read opt, $v:expr) => { parse_opt($v)? };
    (@read int, $v:expr) => { parse_int($v)? };
    (@read bool, $v:expr) => { parse_bool($v)? };
    (@read proto, $v:expr) => { $v.parse::<Protocol>().map_err(|e| e.to_string())? };
    (@read table, $v:expr) => { parse_table($v)? };
}

param_table! {
    "detector.i_c", num, "critical current; bias sits at 85 % of it" => bench.detector.i_c;
    "detector.i_b", num, "bias current, measured operating point" => bench.detector.i_b;
    "detector.r_normal_total", num, "normal-state wire resistance, from the latched dark slope" => bench.detector.r_normal_total;
    "detector.i_latched_nominal", num, "latched current, measured" => bench.detector.i_latched_nominal;
    "detector.i_latched_jitter", num, "half-width of the latched current spread, measured" => bench.detector.i_latched_jitter;
    "detector.tau_rec", num, "current recovery time constant, fitted to the recovery anchors" => bench.detector.tau_rec;
    "detector.f_reset", num, "current fraction left after a hotspot, fitted to the pulse height" => bench.detector.f_reset;
    "detector.t_hotspot", num, "hotspot lifetime, fitted to the CW re-firing intervals" => bench.detector.t_hotspot;
    "detector.eta", num, "single-photon detection efficiency at full recovery, assumed" => bench.detector.eta;
    "detector.dark_rate", num, "dark count rate at full recovery, assumed" => bench.detector.dark_rate;
    "detector.cw_slope_low_v", num, "latched resistance per optical watt at 0.1 V, measured" => bench.detector.cw_slope_low_v;
    "detector.cw_slope_high_v", num, "latched resistance per optical watt at 10 V, measured" => bench.detector.cw_slope_high_v;
    "detector.latch_hold_time", num, "time without full recovery that latches the wire, assumed" => bench.detector.latch_hold_time;
    "detector.recovery_threshold_frac", num, "current fraction counted as fully recovered, assumed" => bench.detector.recovery_threshold_frac;
    "detector.sens_table", table, "hotspot sensitivity delay:e50:slope; 3 ns and 8 ns measured, rest fitted" => bench.detector.sens_e50_table;
    "detector.coupling", num, "optical and polarization coupling, aligned scale" => bench.detector.coupling;
    "detector.wavelength", num, "operating wavelength, m" => bench.detector.wavelength;
    "detector.sens_window", num, "energy integration window of the hotspot sensitivity, fitted" => bench.detector.sens_window;
    "detector.latched_lag", num, "latched-state thermal lag, assumed" => bench.detector.latched_lag;
    "detector.latch_duty_tau", num, "time constant of the suppression duty integrator, fitted to the CW latch anchor" => bench.detector.latch_duty_tau;
    "detector.latch_duty_threshold", num, "duty level that latches the wire, fitted to the CW latch anchor" => bench.detector.latch_duty_threshold;
    "bias.v_open", num, "bias source open-circuit voltage, V" => bench.bias.v_open;
    "bias.r_series", num, "bias source series resistance, ohm" => bench.bias.r_series;
    "bias.v_max", num, "highest voltage applied in the measurements, V" => bench.bias.v_max;
    "readout.hp_cutoff", num, "amplifier high-pass corner, Hz, measured" => bench.readout.hp_cutoff;
    "readout.lp_cutoff", num, "amplifier low-pass corner, Hz, measured" => bench.readout.lp_cutoff;
    "readout.gain", num, "amplifier voltage gain, measured" => bench.readout.gain;
    "readout.splitter_loss_db", num, "loss to the counter input, dB, fitted to the pulse heights" => bench.readout.splitter_loss_db;
    "readout.threshold", num, "comparator threshold, V" => bench.readout.threshold;
    "readout.min_dwell", num, "minimum time above threshold for a click, measured" => bench.readout.min_dwell;
    "readout.threshold_resolution", num, "threshold setting step, V" => bench.readout.threshold_resolution;
    "readout.hysteresis", num, "comparator hysteresis, V, assumed zero" => bench.readout.hysteresis;
    "iface.delta_t", num, "interferometer arm delay, s" => iface.delta_t;
    "iface.extinction_db", num, "interferometer extinction ratio, dB" => iface.extinction_db;
    "iface.insertion_loss_db", num, "interferometer insertion loss, dB" => iface.insertion_loss_db;
    "control.long_power", num, "blinding long-pulse power, measured setting" => protocol.control.long_power;
    "control.long_duration", num, "blinding long-pulse duration, measured setting" => protocol.control.long_duration;
    "control.lead", num, "darkness before the long pulse, s" => protocol.control.lead;
    "control.steering_period", opt, "short-pulse spacing, s; auto uses the arm delay" => protocol.control.steering_period;
    "control.steering_energy", opt, "short-pulse energy, J; auto picks it from the sensitivity table" => protocol.control.steering_energy;
    "control.hold", opt, "first short pulse to readout, s; auto stops one period before full recovery" => protocol.control.hold;
    "control.repeat_count", int, "diagram repetitions in one chained block" => protocol.control.repeat_count;
    "protocol.kind", proto, "dps or bb84" => protocol.protocol;
    "protocol.n_bits", int, "pulses sent by Alice" => protocol.n_bits;
    "protocol.bit_slot", num, "BB84 pulse period, s" => protocol.bit_slot;
    "protocol.delta_t", num, "DPS pulse period, s; must equal iface.delta_t" => protocol.delta_t;
    "protocol.mu", num, "mean photon number per pulse" => protocol.mu;
    "protocol.channel_loss_db", num, "Alice to Bob channel loss, dB" => protocol.channel_loss_db;
    "protocol.qber_abort_threshold", num, "QBER at which Alice and Bob abort" => protocol.qber_abort_threshold;
    "protocol.attack_enabled", bool, "run Eve; false gives the no-attack baseline" => protocol.attack_enabled;
    "protocol.trigger_power", opt, "BB84 trigger power, W; auto calibrates against the latched detectors" => protocol.trigger_power;
    "protocol.trigger_duration", num, "BB84 trigger pulse duration, s" => protocol.trigger_duration;
}
