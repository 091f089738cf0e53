//! `snspd`: command-line front end to the detector simulator.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use snspd_sim::attack::Target;
use snspd_sim::qkd::Protocol;

#[derive(Parser, Debug)]
#[command(name = "snspd", version, about = "SNSPD detector-control attack simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Parameter file (`key = value`); defaults when omitted.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Master seed. Required: runs are never seeded from the clock.
    #[arg(long)]
    pub seed: u64,
    /// Monte Carlo trials per point.
    #[arg(long)]
    pub trials: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Overwrite existing output files.
    #[arg(long)]
    pub force: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate detector traces for a waveform file or a rectangular pulse.
    Trace {
        #[command(flatten)]
        common: Common,
        /// Waveform CSV `t_s,power_W,phase_rad`.
        #[arg(long)]
        waveform: Option<PathBuf>,
        /// Rectangle power when no waveform is given, W.
        #[arg(long, default_value_t = 2.5e-3)]
        power: f64,
        /// Rectangle duration, s.
        #[arg(long, default_value_t = 48e-9)]
        duration: f64,
        /// Sample step of the rectangle, s.
        #[arg(long, default_value_t = 10e-12)]
        dt: f64,
        /// Number of traces; only the first is written in full.
        #[arg(long, default_value_t = 1)]
        traces: u64,
    },
    /// Latched current and resistance over bias voltage and CW power.
    SweepCw {
        #[command(flatten)]
        common: Common,
        /// Bias voltages, V.
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.5,1,2,5,10")]
        voltages: Vec<f64>,
        /// Highest CW power, W.
        #[arg(long, default_value_t = 20e-3)]
        max_power: f64,
        #[arg(long, default_value_t = 21)]
        points: usize,
    },
    /// Latched-state click probability against comparator threshold.
    SweepThreshold {
        #[command(flatten)]
        common: Common,
        /// Full trigger power, W; found by bisection when omitted.
        #[arg(long)]
        trigger_power: Option<f64>,
        #[arg(long, default_value_t = 10e-9)]
        trigger_duration: f64,
        /// Trigger power scales relative to full power.
        #[arg(long, value_delimiter = ',', default_value = "1,0.5,0.25")]
        scales: Vec<f64>,
        /// Highest threshold, V.
        #[arg(long, default_value_t = 40e-3)]
        max_threshold: f64,
        /// Threshold step, V.
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
    },
    /// Hotspot probability against trigger energy at several recovery delays.
    SweepTrigger {
        #[command(flatten)]
        common: Common,
        /// Delays after the start of recovery, s.
        #[arg(long, value_delimiter = ',', default_value = "2e-9,3e-9,5e-9,8e-9,10e-9,20e-9,40e-9")]
        delays: Vec<f64>,
        #[arg(long, default_value_t = 1e-15)]
        min_energy: f64,
        #[arg(long, default_value_t = 1e-12)]
        max_energy: f64,
        #[arg(long, default_value_t = 31)]
        points: usize,
    },
    /// Build a deadtime-control diagram and write its segments.
    Deadtime {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "D0")]
        target: Target,
        /// Comparator threshold, V; the parameter file value when omitted.
        #[arg(long)]
        threshold: Option<f64>,
        /// Write the rendered waveform too.
        #[arg(long)]
        waveform: bool,
    },
    /// Monte Carlo evaluation of deadtime control over extinction, delay and threshold.
    AttackEval {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "D0")]
        target: Target,
        /// Extinction ratios, dB; the parameter file value when omitted.
        #[arg(long, value_delimiter = ',')]
        er: Vec<f64>,
        /// Arm delays, s; the parameter file value when omitted.
        #[arg(long, value_delimiter = ',')]
        delta_t: Vec<f64>,
        /// Comparator thresholds, V; the parameter file value when omitted.
        #[arg(long, value_delimiter = ',')]
        threshold: Vec<f64>,
        /// Also evaluate each diagram with the steering pulses removed.
        #[arg(long)]
        without_steering: bool,
    },
    /// Full intercept-resend QKD sessions.
    Qkd {
        #[command(flatten)]
        common: Common,
        /// Protocol; the parameter file value when omitted.
        #[arg(long)]
        protocol: Option<Protocol>,
        #[arg(long, value_delimiter = ',')]
        er: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        threshold: Vec<f64>,
        /// Run without Eve.
        #[arg(long)]
        no_attack: bool,
        #[arg(long)]
        n_bits: Option<u64>,
    },
    /// Write the default parameter file.
    EmitDefaults {
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use snspd_sim::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::InfeasibleAttack(_) => 3,
                E::Io(_) => 4,
                E::Csv(c) if c.is_io_error() => 4,
                _ => 2,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 4;
        }
    }
    2
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Trace {
            common,
            waveform,
            power,
            duration,
            dt,
            traces,
        } => commands::trace(&common, waveform.as_deref(), power, duration, dt, traces),
        Command::SweepCw {
            common,
            voltages,
            max_power,
            points,
        } => commands::sweep_cw(&common, &voltages, max_power, points),
        Command::SweepThreshold {
            common,
            trigger_power,
            trigger_duration,
            scales,
            max_threshold,
            step,
        } => commands::sweep_threshold(&common, trigger_power, trigger_duration, &scales, max_threshold, step),
        Command::SweepTrigger {
            common,
            delays,
            min_energy,
            max_energy,
            points,
        } => commands::sweep_trigger(&common, &delays, min_energy, max_energy, points),
        Command::Deadtime {
            common,
            target,
            threshold,
            waveform,
        } => commands::deadtime(&common, target, threshold, waveform),
        Command::AttackEval {
            common,
            target,
            er,
            delta_t,
            threshold,
            without_steering,
        } => commands::attack_eval(&common, target, &er, &delta_t, &threshold, without_steering),
        Command::Qkd {
            common,
            protocol,
            er,
            threshold,
            no_attack,
            n_bits,
        } => commands::qkd(&common, protocol, &er, &threshold, no_attack, n_bits),
        Command::EmitDefaults { out, force } => commands::emit_defaults(&out, force),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
