use std::process::{Command, Output};

use dyson_memory::analysis::{sweep, SweepGrid, SweepRecord};
use dyson_memory::classical::MachineDescription;
use dyson_memory::cli::{parse_args, Task, EXIT_FAILURE, EXIT_OK, EXIT_USAGE};
use dyson_memory::output::{records_to_csv, records_to_json, rounded_record, SWEEP_CSV_HEADER};
use dyson_memory::quantum::GramDump;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dyson-memory"))
        .args(args)
        .env_remove("DYSON_MEMORY_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn small_grid() -> SweepGrid {
    SweepGrid {
        ranges: vec![1, 2, 3],
        temperatures: vec![0.5, 1.0, 2.0, 10.0, 300.0],
        deltas: vec![2.0],
        fields: vec![0.0, 0.3],
        j0: 1.0,
    }
}

#[test]
fn parse_examples() {
    let c = parse_args(["dyson-memory", "validate", "--N", "2", "--T", "2", "--L", "16"]).unwrap();
    assert!(matches!(c.task, Task::Validate { .. }));
    assert_eq!(c.grid.ranges, vec![2]);
    let e = parse_args(["dyson-memory", "sweep", "--delta", "0.5"]).unwrap_err();
    assert!(e.to_string().contains("nonextensive"));
    assert!(parse_args(["dyson-memory", "sweep", "--T", "-1"]).is_err());
    assert!(parse_args(["dyson-memory", "frobnicate"]).is_err());
}

#[test]
fn one_record_matches_schema() {
    let grid = SweepGrid {
        ranges: vec![2],
        temperatures: vec![3.0],
        deltas: vec![2.0],
        fields: vec![0.0],
        j0: 1.0,
    };
    let records = sweep(&grid).unwrap();
    let csv = records_to_csv(&records);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines, [SWEEP_CSV_HEADER, lines[1]]);
    let cols: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(cols.len(), 10);
    assert_eq!(&cols[..4], ["2", "2", "0", "3"]);
    let c_mu: f64 = cols[4].parse().unwrap();
    let c_q: f64 = cols[5].parse().unwrap();
    let adv: f64 = cols[6].parse().unwrap();
    assert!((c_mu / c_q - adv).abs() <= 1e-9 * adv);
    assert_eq!(cols[9], "false");
}

#[test]
fn json_round_trip_at_twelve_digits() {
    let records = sweep(&small_grid()).unwrap();
    let parsed: Vec<SweepRecord> = serde_json::from_str(&records_to_json(&records).unwrap()).unwrap();
    let expected: Vec<SweepRecord> = records.iter().map(rounded_record).collect();
    assert_eq!(parsed, expected);
    for (p, r) in parsed.iter().zip(&records) {
        let (a, b) = (p.c_mu.unwrap(), r.c_mu.unwrap());
        assert!((a - b).abs() <= 1e-11 * b.abs().max(1e-300));
    }
}

#[test]
fn sweep_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (threads, name) in [("1", "a.csv"), ("4", "b.csv"), ("4", "c.csv")] {
        let path = dir.path().join(name);
        let out = bin(&[
            "sweep", "--N", "1..4", "--T", "1..20", "--B", "0,0.3", "--threads", threads, "-o",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), EXIT_OK, "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[1], outputs[2]);
    let text = String::from_utf8(outputs.remove(0)).unwrap();
    assert_eq!(text.lines().count(), 1 + 4 * 20 * 2);
}

#[test]
fn json_format_from_binary() {
    let out = bin(&["sweep", "--N", "1,2", "--T", "2,4", "--format", "json"]);
    assert_eq!(code(&out), EXIT_OK);
    let v: Vec<SweepRecord> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v.len(), 4);
    assert_eq!((v[0].range, v[0].temperature), (1, 2.0));
    assert_eq!((v[3].range, v[3].temperature), (2, 4.0));
}

#[test]
fn usage_errors_exit_one() {
    let out = bin(&["sweep", "--delta", "0.5"]);
    assert_eq!(code(&out), EXIT_USAGE);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonextensive"));
    let out = bin(&["sweep", "--T", "0"]);
    assert_eq!(code(&out), EXIT_USAGE);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--T"));
    assert_eq!(code(&bin(&["sweep", "--unknown"])), EXIT_USAGE);
    assert_eq!(code(&bin(&["--help"])), EXIT_OK);
}

#[test]
fn unwritable_output_reports_path() {
    let out = bin(&["sweep", "--N", "1", "--T", "2", "-o", "/nonexistent-dir/x.csv"]);
    assert_eq!(code(&out), EXIT_FAILURE);
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent-dir/x.csv"));
}

#[test]
fn validate_exit_code_follows_tolerance() {
    let out = bin(&["validate", "--N", "2", "--T", "5", "--L", "8,12,16"]);
    assert_eq!(code(&out), EXIT_OK);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().skip(1).last().unwrap().ends_with("true"));

    let out = bin(&["validate", "--N", "3", "--T", "1", "--L", "8,12"]);
    assert_eq!(code(&out), EXIT_FAILURE);
}

#[test]
fn fit_outputs_object() {
    let out = bin(&["fit", "--quantity", "collapse", "--format", "json"]);
    assert_eq!(code(&out), EXIT_OK);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let e = v["exponent"].as_f64().unwrap();
    assert!((e + 2.0).abs() < 0.05);
    assert!(v["r_squared"].as_f64().unwrap() > 0.999);
    assert_eq!(v["window"], serde_json::json!([50.0, 300.0]));
    assert_eq!(code(&bin(&["fit", "--N", "1..3"])), EXIT_USAGE);
}

#[test]
fn dumps_parse() {
    let out = bin(&["dump-machine", "--N", "2", "--T", "2"]);
    assert_eq!(code(&out), EXIT_OK);
    let m: MachineDescription = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(m.n_states, 4);
    assert_eq!(m.transitions.len(), 8);
    let total: f64 = m.pi.iter().sum();
    assert!((total - 1.0).abs() < 1e-12);

    let out = bin(&["dump-qmachine", "--N", "2", "--T", "2"]);
    assert_eq!(code(&out), EXIT_OK);
    let g: GramDump = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(g.spectrum.len(), 4);
    assert!((g.trace - 1.0).abs() < 1e-10);
}
