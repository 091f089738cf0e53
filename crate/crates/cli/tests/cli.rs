use std::path::Path;
use std::process::{Command, Output};

fn snspd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snspd"))
        .args(args)
        .output()
        .expect("failed to run snspd")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

fn data_lines(s: &str) -> Vec<&str> {
    s.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn emit_defaults_round_trips_through_params() {
    let dir = tempfile::tempdir().unwrap();
    assert!(snspd(&["emit-defaults", "--out", path(dir.path())]).status.success());
    let params = dir.path().join("params.txt");
    let text = read(&params);
    assert!(text.contains("detector.i_b = 2.25e-5"));
    let out = dir.path().join("run");
    let o = snspd(&["sweep-cw", "--seed", "1", "--params", path(&params), "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let with_file = read(&out.join("cw.csv"));
    let o = snspd(&["sweep-cw", "--seed", "1", "--out", path(&dir.path().join("plain"))]);
    assert!(o.status.success());
    assert_eq!(with_file, read(&dir.path().join("plain/cw.csv")));
}

#[test]
fn refuses_to_overwrite_without_force() {
    let dir = tempfile::tempdir().unwrap();
    assert!(snspd(&["emit-defaults", "--out", path(dir.path())]).status.success());
    let o = snspd(&["emit-defaults", "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--force"));
    assert!(snspd(&["emit-defaults", "--out", path(dir.path()), "--force"]).status.success());
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "detector.nonsense = 3\n").unwrap();
    let o = snspd(&["trace", "--seed", "1", "--params", path(&bad), "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("detector.nonsense"));
    std::fs::write(&bad, "readout.gain = -3\n").unwrap();
    let o = snspd(&["trace", "--seed", "1", "--params", path(&bad), "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seed_is_mandatory() {
    let dir = tempfile::tempdir().unwrap();
    let o = snspd(&["trace", "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn missing_params_file_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = snspd(&["trace", "--seed", "1", "--params", "/nonexistent/p.txt", "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn infeasible_diagram_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.txt");
    std::fs::write(&p, "iface.extinction_db = 5\n").unwrap();
    let o = snspd(&["deadtime", "--seed", "1", "--params", path(&p), "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn trace_of_bright_rectangle_has_many_hotspots() {
    let dir = tempfile::tempdir().unwrap();
    let o = snspd(&["trace", "--seed", "5", "--out", path(dir.path())]);
    assert!(o.status.success());
    let ev = read(&dir.path().join("events.csv"));
    assert!(ev.starts_with("# config_hash = "));
    let hotspots = data_lines(&ev).iter().filter(|l| l.ends_with(",HotspotFormed")).count();
    assert!(hotspots > 5, "{hotspots}");
    assert_eq!(data_lines(&read(&dir.path().join("trace.csv")))[0], "t_s,v_out_V");
    assert_eq!(data_lines(&read(&dir.path().join("clicks.csv")))[0], "t_cross_s,dwell_s");
}

#[test]
fn zero_waveform_gives_empty_event_log() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("w.csv");
    let mut s = String::from("t_s,power_W,phase_rad\n");
    for k in 0..2000 {
        s.push_str(&format!("{:e},0,0\n", k as f64 * 10e-12));
    }
    std::fs::write(&w, s).unwrap();
    let out = dir.path().join("o");
    let o = snspd(&["trace", "--seed", "1", "--waveform", path(&w), "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(data_lines(&read(&out.join("events.csv"))), ["time_s,kind"]);
}

#[test]
fn non_uniform_waveform_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("w.csv");
    std::fs::write(&w, "t_s,power_W,phase_rad\n0,0,0\n1e-11,0,0\n3e-11,0,0\n").unwrap();
    let o = snspd(&["trace", "--seed", "1", "--waveform", path(&w), "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = snspd(&["attack-eval", "--seed", "9", "--trials", "300", "--threshold", "11.6e-3", "--out", path(&out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let o = snspd(&["trace", "--seed", "9", "--traces", "3", "--out", path(&out)]);
        assert!(o.status.success());
    }
    for f in ["attack.csv", "trace.csv", "events.csv", "hotspots.csv"] {
        assert_eq!(read(&dir.path().join("a").join(f)), read(&dir.path().join("b").join(f)), "{f}");
    }
}

#[test]
fn different_seed_changes_header() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(snspd(&["sweep-trigger", "--seed", "1", "--out", path(&a)]).status.success());
    assert!(snspd(&["sweep-trigger", "--seed", "2", "--out", path(&b)]).status.success());
    let ta = read(&a.join("trigger_sweep.csv"));
    let tb = read(&b.join("trigger_sweep.csv"));
    assert_ne!(ta, tb);
    assert_eq!(data_lines(&ta), data_lines(&tb));
}

#[test]
fn sweep_trigger_marks_photon_scale() {
    let dir = tempfile::tempdir().unwrap();
    let o = snspd(&[
        "sweep-trigger", "--seed", "1", "--delays", "8e-9", "--min-energy", "1e-13", "--max-energy", "1e-12", "--points", "2",
        "--out", path(dir.path()),
    ]);
    assert!(o.status.success());
    let s = read(&dir.path().join("trigger_sweep.csv"));
    let row: Vec<&str> = data_lines(&s)[1].split(',').collect();
    let photons: f64 = row[2].parse().unwrap();
    assert!((photons / 780_000.0 - 1.0).abs() < 0.01, "{photons}");
}

#[test]
fn threshold_sweep_shows_superlinear_window() {
    let dir = tempfile::tempdir().unwrap();
    let o = snspd(&[
        "sweep-threshold", "--seed", "1", "--trials", "100", "--max-threshold", "30e-3", "--step", "10e-3", "--out",
        path(dir.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = read(&dir.path().join("threshold_sweep.csv"));
    let rows: Vec<Vec<f64>> = data_lines(&s)[1..]
        .iter()
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    let at = |th: f64, scale: f64| {
        rows.iter()
            .find(|r| (r[0] - th).abs() < 1e-6 && (r[1] - scale).abs() < 1e-9)
            .unwrap()[2]
    };
    assert!(at(10e-3, 1.0) >= 0.99);
    assert!(at(10e-3, 0.5) <= 0.01);
    assert_eq!(at(30e-3, 1.0), 0.0);
}

#[test]
fn qkd_writes_outcome_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = snspd(&["qkd", "--seed", "4", "--n-bits", "2000", "--threshold", "11.6e-3", "--out", path(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = read(&dir.path().join("qkd.csv"));
    let d = data_lines(&s);
    assert_eq!(d[0], "protocol,er_db,threshold_V,sifted,qber,eve_fraction,aborted");
    assert!(d[1].starts_with("DPS,2e1,"));
    assert!(d[1].ends_with(",false"));
}

#[test]
fn deadtime_writes_segments() {
    let dir = tempfile::tempdir().unwrap();
    let o = snspd(&["deadtime", "--seed", "1", "--threshold", "11.6e-3", "--waveform", "--out", path(dir.path())]);
    assert!(o.status.success());
    let s = read(&dir.path().join("diagram.csv"));
    let d = data_lines(&s);
    assert_eq!(d[0], "t_start_s,duration_s,power_W,phase_rad,label");
    assert!(d.iter().any(|l| l.ends_with(",readout")));
    assert!(dir.path().join("diagram_waveform.csv").exists());
}
