use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lshlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lshlab")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn bounds_table_has_header_and_one_row_per_step() {
    let o = lshlab(&["bounds", "--c-min", "1", "--c-max", "10"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "c,im,ai,diim,mnp,main");
    assert_eq!(lines.len(), 20);
    // mnp at c = 1
    assert!(lines[1].contains("0.462117157260"), "{}", lines[1]);
    for line in &lines[1..] {
        assert_eq!(line.split(',').count(), 6);
    }
}

#[test]
fn bounds_rejects_empty_c_range() {
    let o = lshlab(&["bounds", "--c-min", "3", "--c-max", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("c_min < c_max"));
    assert!(stdout(&o).is_empty());
}

#[test]
fn bounds_rejects_s_outside_range() {
    let o = lshlab(&["bounds", "--s", "0.5,2.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn json_lines_mirror_csv() {
    let csv = stdout(&lshlab(&["bounds", "--steps", "4"]));
    let jl = stdout(&lshlab(&["--format", "json-lines", "bounds", "--steps", "4"]));
    let mut rows = csv.lines();
    let header: Vec<&str> = rows.next().unwrap().split(',').collect();
    let objects: Vec<&str> = jl.lines().collect();
    assert_eq!(objects.len(), 4);
    for (row, obj) in rows.zip(objects) {
        let expected: Vec<String> = header
            .iter()
            .zip(row.split(','))
            .map(|(k, v)| format!("\"{k}\":{v}"))
            .collect();
        assert_eq!(obj, format!("{{{}}}", expected.join(",")));
    }
}

#[test]
fn dictator_stability_curve_and_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("cert.txt");
    let o = lshlab(&[
        "stability",
        "--family",
        "bit-sampling",
        "--d",
        "1",
        "--t",
        "0,0.5,1,2",
        "--certificate",
        path(&cert),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for line in stdout(&o).lines().skip(1) {
        let (t, k) = line.split_once(',').unwrap();
        let (t, k): (f64, f64) = (t.parse().unwrap(), k.parse().unwrap());
        assert!((k - (1.0 + (-t).exp()) / 2.0).abs() < 1e-11, "{line}");
    }
    assert!(fs::read_to_string(&cert).unwrap().contains("PASS"));
}

#[test]
fn stability_rejects_bad_grid() {
    let o = lshlab(&["stability", "--family", "bit-sampling", "--d", "4", "--t-steps", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sensitivity_of_bit_sampling_is_exact() {
    let o = lshlab(&[
        "sensitivity",
        "--family",
        "bit-sampling",
        "--d",
        "8",
        "--r",
        "2",
        "--cr",
        "4",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains(",3/4,1/2,"), "{text}");
}

#[test]
fn trivial_family_reports_undefined_rho() {
    let o = lshlab(&[
        "sensitivity",
        "--family",
        "trivial",
        "--d",
        "6",
        "--r",
        "1",
        "--cr",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("undefined"));
}

#[test]
fn exact_sensitivity_refuses_large_dimension() {
    let o = lshlab(&[
        "sensitivity",
        "--family",
        "bit-sampling",
        "--d",
        "20",
        "--r",
        "1",
        "--cr",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--mode mc"));
    let o = lshlab(&[
        "sensitivity",
        "--family",
        "bit-sampling",
        "--d",
        "20",
        "--r",
        "1",
        "--cr",
        "3",
        "--mode",
        "mc",
        "--samples",
        "20000",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

fn write_dataset(dir: &Path) -> std::path::PathBuf {
    let data = dir.join("points.txt");
    let text: String = (0..64u32)
        .map(|i| format!("{:016b}\n", i.wrapping_mul(2_654_435_761) >> 16))
        .collect();
    fs::write(&data, text).unwrap();
    data
}

#[test]
fn index_build_query_round_trip_and_same_seed_rebuild() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dataset(dir.path());
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let o = lshlab(&[
            "--seed",
            "7",
            "--out",
            path(out),
            "index",
            "build",
            "--data",
            path(&data),
            "--r",
            "2",
            "--c",
            "2",
            "--k",
            "3",
            "--L",
            "6",
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(stdout(&o).contains("entries,384"), "{}", stdout(&o));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let o = lshlab(&["index", "query", "--index", path(&a), "--queries", path(&data)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 64);
    for row in rows {
        // the query's own bucket always holds a valid answer, and any answer is within cr
        let cells: Vec<&str> = row.split(',').collect();
        let distance: u32 = cells[2].parse().unwrap_or_else(|_| panic!("no answer: {row}"));
        assert!(distance <= 4, "{row}");
    }

    let o = lshlab(&["index", "stats", "--index", path(&a)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("L,6"));
}

#[test]
fn index_build_without_out_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dataset(dir.path());
    let o = lshlab(&["index", "build", "--data", path(&data), "--r", "2", "--c", "2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_index_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    let o = lshlab(&["index", "query", "--index", path(&missing), "--queries", path(&missing)]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("missing.json") && err.contains("i/o error"), "{err}");
}

#[test]
fn tampered_index_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dataset(dir.path());
    let idx = dir.path().join("idx.json");
    let o = lshlab(&[
        "--out",
        path(&idx),
        "index",
        "build",
        "--data",
        path(&data),
        "--r",
        "2",
        "--c",
        "2",
        "--k",
        "2",
        "--L",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&idx)
        .unwrap()
        .replacen("\"version\":1", "\"version\":99", 1);
    fs::write(&idx, text).unwrap();
    let o = lshlab(&["index", "stats", "--index", path(&idx)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_is_deterministic_and_passes() {
    let a = lshlab(&["verify", "full"]);
    let b = lshlab(&["verify", "full"]);
    assert_eq!(a.status.code(), Some(0), "{}", stdout(&a));
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).ends_with("RESULT: PASS\n"));
}

#[test]
fn corrupted_spectrum_fails_verification() {
    let o = lshlab(&["verify", "parseval", "--corrupt-spectrum"]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.contains("[FAIL] parseval"), "{text}");
    assert!(text.contains("RESULT: FAIL"));
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let o = lshlab(&["verify", "nonsense"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn experiment_runs() {
    let o = lshlab(&[
        "index",
        "experiment",
        "--n",
        "300",
        "--d",
        "64",
        "--r",
        "4",
        "--queries",
        "40",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("success_rate"));
}
