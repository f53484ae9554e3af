//! End-to-end checks of the files written by runs, sweeps and comparisons.

use std::path::Path;

use pdflow_core::experiment::{
    cmd_compare, cmd_run, cmd_sweep, preset, CompareSpec, Preset, PresetOptions, ProblemSpec,
    RunSpec, SweepSpec,
};
use pdflow_core::problem::{builtin, Builtin};

const CSVS: [&str; 3] = ["trajectory.csv", "metrics.csv", "integrals.csv"];

fn run_preset(name: &str, opts: &PresetOptions) -> RunSpec {
    match preset(name, opts).unwrap() {
        Preset::Run(s) => s,
        _ => panic!("{name} is not a run preset"),
    }
}

fn fig1() -> RunSpec {
    run_preset("example1-fig1", &PresetOptions::default())
}

fn same_csvs(a: &Path, b: &Path) {
    for f in CSVS {
        let (x, y) = (
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
        );
        assert!(!x.is_empty(), "{f} is empty");
        assert!(
            x == y,
            "{f} differs between {} and {}",
            a.display(),
            b.display()
        );
    }
}

#[test]
fn resolved_spec_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    cmd_run(&fig1(), &a, false).unwrap();
    let text = std::fs::read_to_string(a.join("resolved_spec.json")).unwrap();
    let replay = RunSpec::from_json(&text).unwrap();
    cmd_run(&replay, &b, false).unwrap();
    same_csvs(&a, &b);
    let again = RunSpec::from_json(&std::fs::read_to_string(b.join("resolved_spec.json")).unwrap())
        .unwrap();
    let mut lhs = replay.clone();
    lhs.output.dir = None;
    let mut rhs = again;
    rhs.output.dir = None;
    assert_eq!(lhs, rhs);
}

#[test]
fn inline_problem_matches_builtin() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = run_preset("example2-tikhonov", &PresetOptions::default());
    let doc = builtin(&Builtin::Example2).unwrap().to_json().unwrap();
    let mut inline = spec.clone();
    inline.problem = serde_json::from_value(
        serde_json::json!({ "inline": serde_json::from_str::<serde_json::Value>(&doc).unwrap() }),
    )
    .unwrap();
    assert!(matches!(inline.problem, ProblemSpec::Inline { .. }));
    cmd_run(&spec, &tmp.path().join("a"), false).unwrap();
    cmd_run(&inline, &tmp.path().join("b"), false).unwrap();
    same_csvs(&tmp.path().join("a"), &tmp.path().join("b"));
}

#[test]
fn single_cell_sweep_equals_plain_run() {
    let tmp = tempfile::tempdir().unwrap();
    let base = fig1();
    let sweep = SweepSpec {
        name: "one".into(),
        base: base.clone(),
        parameter: "/system/eps/r".into(),
        values: vec![serde_json::json!(1.6)],
        output: Default::default(),
    };
    let report = cmd_sweep(&sweep, &tmp.path().join("sweep"), false, Some(1)).unwrap();
    assert_eq!((report.succeeded, report.failed), (1, 0));
    cmd_run(&base, &tmp.path().join("run"), false).unwrap();
    same_csvs(
        &tmp.path().join("sweep").join(&report.cells[0].dir),
        &tmp.path().join("run"),
    );
    assert!(tmp.path().join("sweep/sweep.csv").is_file());
    assert!(tmp.path().join("sweep/sweep.json").is_file());
}

#[test]
fn charts_leave_tables_untouched() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("plain"), tmp.path().join("charted"));
    cmd_run(&fig1(), &a, false).unwrap();
    cmd_run(&fig1(), &b, true).unwrap();
    same_csvs(&a, &b);
    for svg in [
        "convergence.svg",
        "velocities.svg",
        "energy.svg",
        "integrals.svg",
    ] {
        let text = std::fs::read_to_string(b.join(svg)).unwrap();
        assert!(
            text.starts_with("<svg") || text.starts_with("<?xml"),
            "{svg}"
        );
        assert!(!a.join(svg).exists());
    }
}

#[test]
fn empty_grid_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let sweep = SweepSpec {
        name: "empty".into(),
        base: fig1(),
        parameter: "/system/eps/r".into(),
        values: vec![],
        output: Default::default(),
    };
    let err = cmd_sweep(&sweep, tmp.path(), false, None).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn failed_cells_are_recorded_without_aborting() {
    let tmp = tempfile::tempdir().unwrap();
    let sweep = SweepSpec {
        name: "mixed".into(),
        base: fig1(),
        parameter: "/system/eps/r".into(),
        values: vec![serde_json::json!(1.6), serde_json::json!(-1.0)],
        output: Default::default(),
    };
    let report = cmd_sweep(&sweep, tmp.path(), false, Some(2)).unwrap();
    assert_eq!((report.succeeded, report.failed), (1, 1));
    let bad = report.cells.iter().find(|c| !c.ok).unwrap();
    assert_eq!(bad.exit_code, Some(2));
    assert!(bad.error.is_some());
    let csv = std::fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);

    let all_bad = SweepSpec {
        values: vec![serde_json::json!(-1.0)],
        ..sweep
    };
    assert!(cmd_sweep(&all_bad, &tmp.path().join("bad"), false, None).is_err());
}

#[test]
fn comparison_writes_one_row_per_sample() {
    let tmp = tempfile::tempdir().unwrap();
    let spec: CompareSpec = match preset("example2-compare", &PresetOptions::default()).unwrap() {
        Preset::Compare(c) => c,
        _ => panic!("not a comparison"),
    };
    let res = cmd_compare(&spec, tmp.path(), false, Some(2)).unwrap();
    let rows: usize = res.runs.iter().map(|r| r.metrics.times.len()).sum();
    let csv = std::fs::read_to_string(tmp.path().join("compare.csv")).unwrap();
    assert_eq!(csv.lines().count(), rows + 1);
    let fin = std::fs::read_to_string(tmp.path().join("compare_final.csv")).unwrap();
    assert_eq!(fin.lines().count(), spec.runs.len() + 1);
    for r in &spec.runs {
        assert!(
            tmp.path().join(&r.name).join("metrics.csv").is_file(),
            "{}",
            r.name
        );
    }
    let mut dup = spec.clone();
    dup.runs.push(spec.runs[0].clone());
    assert_eq!(
        cmd_compare(&dup, &tmp.path().join("dup"), false, None)
            .unwrap_err()
            .exit_code(),
        2
    );
}
