//! Eavesdropper waveforms and their evaluation against simulated detectors.
//!
//! Two control strategies are covered. Latched-state control blinds the
//! detector by latching it and then forces clicks with bright triggers whose
//! strength depends on Bob's basis choice. Deadtime control keeps one
//! detector dead with short pulses routed through Bob's own interferometer
//! while the other is allowed to recover and click on demand.

mod deadtime;
mod evaluate;
mod interferometer;
mod latched;

pub use deadtime::{
    build_deadtime_control_diagram, ControlDiagram, DeadtimeConfig, LongPulse, Segment, ShortPulse, Target,
    LATCH_SAFE_DURATION, SHORT_PULSE_FWHM,
};
pub use evaluate::{evaluate_attack, AttackReport, COINCIDENCE_WINDOW, EVAL_DT};
pub use interferometer::{interferometer_split, InterferometerParams};
pub use latched::{
    attack_condition, build_latched_attack, calibrate_trigger_power, latch_device, min_trigger_power,
    AttackCondition, LatchProgram, LatchReport, MAX_TRIGGER_POWER, TRIGGER_LEAD, TRIGGER_TAIL,
};
