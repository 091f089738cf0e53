//! Parameter files and CSV formats.

mod csv;
mod params;

pub use self::csv::{
    csv_writer, read_waveform, write_attack_reports, write_clicks, write_events, write_qkd, write_rows,
    write_segments, write_threshold_sweep, write_trace, write_waveform, AttackRow, Provenance, QkdRow, SweepPoint,
    DT_TOLERANCE,
};
pub use params::{param_keys, ParamSet};
