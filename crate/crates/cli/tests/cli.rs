use pcstream::report::{AllocationReport, SessionSummary};
use pcstream::{
    allocate, load_manifest, prioritize, PrioritizationConfig, PriorityWeights, Quality, Vec3,
    ViewState,
};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

const I1: &str = r#"{ "ladder_levels": 3,
  "models": [ { "id": "A", "levels_bps": [10000000, 6000000, 3000000], "center": [0.0, 0.0, 5.0], "radius": 1.0 },
              { "id": "B", "levels_bps": [10000000, 6000000, 3000000], "center": [0.0, 0.0, 20.0], "radius": 1.0 },
              { "id": "C", "levels_bps": [10000000, 6000000, 3000000], "center": [0.0, 0.0, -5.0], "radius": 1.0 } ] }
"#;

const TRACE_HEADER: &str = "interval_index,duration_s,budget_bps,cam_x,cam_y,cam_z,fwd_x,fwd_y,fwd_z,fov_half_deg,near_threshold\n";

fn pcstream(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcstream"))
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn allocate_i1_csv() {
    let dir = TempDir::new().unwrap();
    let m = write(dir.path(), "i1.json", I1);
    let out = pcstream(&[
        "allocate",
        "--manifest",
        s(&m),
        "--budget-bps",
        "22000000",
        "--near",
        "10",
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(
        stdout(&out),
        "id,class,level,bitrate_bps,quality\nA,C1,0,10000000,10000000\nB,C2,1,6000000,3600000\nC,C3,1,6000000,1800000\n"
    );
}

#[test]
fn allocate_matches_library_field_for_field() {
    let dir = TempDir::new().unwrap();
    let m = write(dir.path(), "i1.json", I1);
    let out = pcstream(&[
        "allocate",
        "--manifest",
        s(&m),
        "--budget-bps",
        "22000000",
        "--near",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let cli: AllocationReport = serde_json::from_slice(&out.stdout).unwrap();

    let scene = load_manifest(I1.as_bytes()).unwrap();
    let config = PrioritizationConfig::new(PriorityWeights::default(), 10.0);
    let view = ViewState::new(
        Vec3::default(),
        Vec3::new(0.0, 0.0, 1.0),
        45f64.to_radians(),
        10.0,
    )
    .unwrap();
    let lib =
        AllocationReport::from(&allocate(&prioritize(&scene, &view, &config), 22_000_000).unwrap());
    assert_eq!(cli, lib);
    assert_eq!(cli.total_quality, "15400000".parse::<Quality>().unwrap());
    assert_eq!(cli.boundary_index, 1);
}

#[test]
fn allocate_infeasible_exits_2() {
    let dir = TempDir::new().unwrap();
    let m = write(dir.path(), "i1.json", I1);
    let out = pcstream(&[
        "allocate",
        "--manifest",
        s(&m),
        "--budget-bps",
        "8000000",
        "--near",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("W_min"), "{}", stderr(&out));
    assert!(stderr(&out).contains("8000000"));
}

#[test]
fn input_errors_exit_1() {
    let dir = TempDir::new().unwrap();
    let bad = write(
        dir.path(),
        "bad.json",
        "{ \"ladder_levels\": 3, \"models\": [ ",
    );
    let out = pcstream(&[
        "allocate",
        "--manifest",
        s(&bad),
        "--budget-bps",
        "22000000",
        "--near",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line"), "{}", stderr(&out));

    let m = write(dir.path(), "i1.json", I1);
    let no_near = pcstream(&["allocate", "--manifest", s(&m), "--budget-bps", "22000000"]);
    assert_eq!(no_near.status.code(), Some(1));
    assert!(stderr(&no_near).contains("--near"));

    let usage = pcstream(&["allocate", "--manifest", s(&m), "--budget-bps", "lots"]);
    assert_eq!(usage.status.code(), Some(1));

    let weights = pcstream(&[
        "allocate",
        "--manifest",
        s(&m),
        "--budget-bps",
        "1",
        "--near",
        "1",
        "--weights",
        "0.3,0.6,1",
    ]);
    assert_eq!(weights.status.code(), Some(1));

    let missing = pcstream(&["validate", "--manifest", s(&dir.path().join("nope.json"))]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn validate_lists_every_problem() {
    let dir = TempDir::new().unwrap();
    let m = write(
        dir.path(),
        "bad.json",
        r#"{"ladder_levels": 3, "models": [
            {"id": "A", "levels_bps": [10, 10, 3], "center": [0,0,0], "radius": 1},
            {"id": "B", "levels_bps": [10, 6, 3], "center": [0,0,0], "radius": 1},
            {"id": "B", "levels_bps": [10, 6, 3], "center": [0,0,0], "radius": 1}]}"#,
    );
    let out = pcstream(&["validate", "--manifest", s(&m)]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(
        err.contains("not strictly decreasing") && err.contains("duplicate id B"),
        "{err}"
    );

    let ok = write(dir.path(), "i1.json", I1);
    let out = pcstream(&["validate", "--manifest", s(&ok)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "ok: 3 models, 3 levels each\n");
}

fn simulate(trace_rows: &str) -> (Output, TempDir) {
    let dir = TempDir::new().unwrap();
    let m = write(dir.path(), "i1.json", I1);
    let t = write(
        dir.path(),
        "trace.csv",
        &format!("{TRACE_HEADER}{trace_rows}"),
    );
    let out_dir = dir.path().join("out");
    let out = pcstream(&[
        "simulate",
        "--manifest",
        s(&m),
        "--trace",
        s(&t),
        "--near",
        "10",
        "--out-dir",
        s(&out_dir),
    ]);
    (out, dir)
}

fn summary(dir: &TempDir) -> SessionSummary {
    serde_json::from_slice(&fs::read(dir.path().join("out/report.json")).unwrap()).unwrap()
}

#[test]
fn simulate_single_interval() {
    let (out, dir) = simulate("0,1,22000000,0,0,0,0,0,1,45,\n");
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r = summary(&dir);
    assert_eq!(
        r.time_weighted_mean_quality,
        Some("15400000".parse().unwrap())
    );
    assert_eq!(r.per_interval[0].total_bitrate_bps, Some(22_000_000));
    let rows = fs::read_to_string(dir.path().join("out/allocations.csv")).unwrap();
    assert_eq!(
        rows,
        "interval_index,id,class,level,bitrate_bps,quality\n0,A,C1,0,10000000,10000000\n0,B,C2,1,6000000,3600000\n0,C,C3,1,6000000,1800000\n"
    );
}

#[test]
fn simulate_identical_intervals() {
    let (out, dir) = simulate("0,1,22000000,0,0,0,0,0,1,45,\n1,1,22000000,0,0,0,0,0,1,45,\n");
    assert_eq!(out.status.code(), Some(0));
    let r = summary(&dir);
    assert!(r.level_switches.iter().all(|(_, n)| *n == 0));
    assert_eq!(
        r.time_weighted_mean_quality,
        Some("15400000".parse().unwrap())
    );
}

#[test]
fn simulate_turnaround() {
    let (out, dir) = simulate("0,1,22000000,0,0,0,0,0,1,45,\n1,1,22000000,0,0,0,0,0,-1,45,\n");
    assert_eq!(out.status.code(), Some(0));
    let r = summary(&dir);
    assert_eq!(
        r.per_interval[1].total_quality,
        Some("13600000".parse().unwrap())
    );
    assert_ne!(
        r.per_interval[0].total_quality,
        r.per_interval[1].total_quality
    );
    assert_eq!(
        r.level_switches,
        [("A".into(), 1), ("B".into(), 0), ("C".into(), 1)]
    );
}

#[test]
fn simulate_infeasible_interval_still_exits_0() {
    let (out, dir) = simulate("0,1,22000000,0,0,0,0,0,1,45,\n1,2,1000,0,0,0,0,0,1,45,\n");
    assert_eq!(out.status.code(), Some(0));
    let r = summary(&dir);
    assert_eq!(r.infeasible_intervals, 1);
    assert!(!r.per_interval[1].feasible);
    assert!(stderr(&out).contains("W_min"));
}

#[test]
fn gap_zero_trials() {
    let out = pcstream(&["gap", "--trials", "0", "--seed", "42"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        stdout(&out),
        "trial,n,L,W,heuristic_q,optimal_q,abs_gap,rel_gap,bound_term\n"
    );
}

#[test]
fn gap_thousand_trials() {
    let args = [
        "gap", "--trials", "1000", "--seed", "42", "--n-min", "2", "--n-max", "6", "--l-min", "1",
        "--l-max", "3",
    ];
    let out = pcstream(&args);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let mut rows = 0;
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let h: Quality = f[4].parse().unwrap();
        let o: Quality = f[5].parse().unwrap();
        let rel: f64 = f[7].parse().unwrap();
        assert!(h <= o, "{line}");
        assert!((0.0..=1.0).contains(&rel), "{line}");
        rows += 1;
    }
    assert_eq!(rows, 1000);
    assert_eq!(pcstream(&args).stdout, out.stdout, "not byte-deterministic");
}

#[test]
fn gap_above_cap_is_input_error() {
    let out = pcstream(&["gap", "--trials", "1", "--n-max", "13"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn gen_is_deterministic_and_valid() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let args = |d: &Path| {
        vec![
            "gen".to_string(),
            "--seed".into(),
            "7".into(),
            "--n-min".into(),
            "3".into(),
            "--n-max".into(),
            "3".into(),
            "--l-min".into(),
            "2".into(),
            "--l-max".into(),
            "2".into(),
            "--out-dir".into(),
            d.to_str().unwrap().into(),
        ]
    };
    for d in [&a, &b] {
        let out = Command::new(env!("CARGO_BIN_EXE_pcstream"))
            .args(args(d))
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    for f in ["manifest.json", "trace.csv"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let scene = load_manifest(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(scene.len(), 3);
    assert_eq!(scene.ladder_level_count(), 3);

    let out = pcstream(&[
        "simulate",
        "--manifest",
        s(&a.join("manifest.json")),
        "--trace",
        s(&a.join("trace.csv")),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r: SessionSummary = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r.intervals, 10);
}

#[test]
fn gen_rejects_narrow_bitrate_range() {
    let dir = TempDir::new().unwrap();
    let out = pcstream(&[
        "gen",
        "--bitrate-min",
        "1",
        "--bitrate-max",
        "2",
        "--l-min",
        "3",
        "--l-max",
        "3",
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("distinct"), "{}", stderr(&out));
}
