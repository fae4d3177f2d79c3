use std::path::PathBuf;
use std::process::Command;

use facspeed::benchmarks::{Params, Registry};
use facspeed::harness::{
    load_results, parse_results, run_experiment, run_single, save_results, ExperimentPlan, HarnessError, PlanCell,
    ResultSet, RunKind, RunOptions, RunSample,
};

fn exe() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_facspeed"))
}

fn isolated() -> RunOptions {
    RunOptions { exe: Some(exe()), oversubscribe: true, ..RunOptions::default() }
}

fn small_plan(isolate: bool) -> ExperimentPlan {
    ExperimentPlan {
        reps: 2,
        warmup_runs: 1,
        isolate,
        oversubscribe: true,
        ..ExperimentPlan::new("cilksort", Params::new().with("n", 20_000).with("cutoff", 200), vec![1, 2, 4])
    }
}

#[test]
fn experiment_shape_and_save_load_identity() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nested/results.json");
    let plan = ExperimentPlan { output_path: Some(out.clone()), ..small_plan(false) };
    let set = run_experiment(&plan, &Registry::default(), None).unwrap();
    assert!(set.is_complete(), "{:?}", set.failures);
    // 2 reps x (baseline + elision + one-core + 3 worker counts)
    assert_eq!(set.samples.len(), 12);
    let kinds: Vec<RunKind> = set.samples.iter().map(|s| s.kind).collect();
    assert!(kinds.windows(2).all(|w| w[0] <= w[1]), "fixed execution order");
    let loaded = load_results(&out).unwrap();
    assert_eq!(loaded, set);
    assert!(!loaded.metadata.isolate);
    let summary = loaded.summary.unwrap();
    assert_eq!(summary.per_p.keys().copied().collect::<Vec<_>>(), [1, 2, 4]);
}

#[test]
fn outputs_are_reproducible_across_runs_and_modes() {
    let a = run_experiment(&small_plan(false), &Registry::default(), None).unwrap();
    let b = run_experiment(&small_plan(false), &Registry::default(), None).unwrap();
    let digests = |s: &ResultSet| s.samples.iter().map(|x| x.output_digest.unwrap()).collect::<Vec<_>>();
    assert_eq!(digests(&a), digests(&b));
    let first = digests(&a)[0];
    assert!(digests(&a).iter().all(|&d| d == first), "every mode sorts to the same output");
}

#[test]
fn isolated_experiment_matches_in_process_shape() {
    let plan = ExperimentPlan { reps: 1, warmup_runs: 0, ..small_plan(true) };
    let set = run_experiment(&plan, &Registry::default(), Some(exe())).unwrap();
    assert!(set.is_complete(), "{:?}", set.failures);
    assert_eq!(set.samples.len(), 6);
    assert!(set.metadata.isolate);
}

#[test]
fn child_record_round_trips_field_for_field() {
    let out = Command::new(exe())
        .args(["run-one", "--bench", "cilksort", "--kind", "parallel", "--procs", "2", "--oversubscribe"])
        .args(["--param", "n=30000", "--param", "cutoff=100"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let emitted: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let sample: RunSample = serde_json::from_value(emitted.clone()).unwrap();
    assert_eq!(serde_json::to_value(&sample).unwrap(), emitted);
    sample.validate().unwrap();
    assert_eq!((sample.kind, sample.p), (RunKind::Parallel, 2));
}

#[test]
fn isolated_single_run_kinds() {
    let reg = Registry::default();
    let params = Params::new().with("m", 8192).with("g", 8).with("l", 2).with("grain", 256);
    let base =
        run_single(&reg, "array_gap", &params, PlanCell { kind: RunKind::Baseline, p: 1, for_p: None }, &isolated())
            .unwrap();
    assert_eq!((base.p, base.idle_time, base.steals), (1, 0.0, 0));
    let one =
        run_single(&reg, "array_gap", &params, PlanCell { kind: RunKind::Parallel, p: 1, for_p: None }, &isolated())
            .unwrap();
    assert_eq!(one.idle_time, 0.0);
    assert_eq!(base.output_digest, one.output_digest);
}

#[test]
fn failed_children_are_recorded_not_fatal() {
    let plan = ExperimentPlan { reps: 1, warmup_runs: 0, ..small_plan(true) };
    let set = run_experiment(&plan, &Registry::default(), Some(PathBuf::from("/bin/false"))).unwrap();
    assert!(set.samples.is_empty());
    assert_eq!(set.failures.len(), 6);
    assert!(set.summary.is_none());
    assert!(!set.is_complete());
    assert!(set.holes.contains(&"baseline".to_string()));
}

#[test]
fn adaptive_one_core_runs_per_p() {
    let plan = ExperimentPlan {
        adaptive_t1: true,
        reps: 1,
        warmup_runs: 0,
        ..ExperimentPlan::new("cilksort", Params::new().with("n", 50_000).with("cutoff", "8000/P"), vec![1, 2, 4])
    };
    let plan = ExperimentPlan { isolate: false, oversubscribe: true, ..plan };
    let set = run_experiment(&plan, &Registry::default(), None).unwrap();
    let for_ps: Vec<Option<usize>> =
        set.samples.iter().filter(|s| s.kind == RunKind::OneCore).map(|s| s.for_p).collect();
    assert_eq!(for_ps, [Some(1), Some(2), Some(4)]);
    assert!(set.is_complete());
    let summary = set.summary.unwrap();
    assert!(matches!(summary.one_core_time, facspeed::measures::OneCoreTime::PerP(ref m) if m.len() == 3));
}

#[test]
fn interleaved_rounds_alternate_direction() {
    let plan = ExperimentPlan {
        reps: 3,
        warmup_runs: 0,
        isolate: false,
        oversubscribe: true,
        interleave: true,
        ..ExperimentPlan::new("noop", Params::new().with("depth", 4), vec![1, 2])
    };
    let set = run_experiment(&plan, &Registry::default(), None).unwrap();
    let order: Vec<(RunKind, usize)> = set.samples.iter().map(|s| (s.kind, s.p)).collect();
    let round = [
        (RunKind::Baseline, 1),
        (RunKind::Elision, 1),
        (RunKind::OneCore, 1),
        (RunKind::Parallel, 1),
        (RunKind::Parallel, 2),
    ];
    let back: Vec<_> = round.iter().rev().copied().collect();
    assert_eq!(order, [&round[..], &back[..], &round[..]].concat());
    assert!(set.is_complete());
    assert_eq!(set.summary.unwrap().per_p.len(), 2);
}

#[test]
fn empty_set_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.json");
    let set = ResultSet::empty();
    save_results(&set, &path).unwrap();
    let back = load_results(&path).unwrap();
    assert_eq!(back, set);
    assert!(back.samples.is_empty());
}

#[test]
fn idle_beyond_capacity_is_rejected() {
    let mut set = ResultSet::empty();
    set.samples.push(RunSample::synthetic("b", RunKind::Parallel, 2, 1.0, 1.0));
    let mut v = serde_json::to_value(&set).unwrap();
    v["samples"][0]["idle_time"] = 2.5.into();
    v["samples"][0]["per_worker_idle"] = serde_json::json!([1.25, 1.25]);
    let err = parse_results(&v.to_string()).unwrap_err();
    assert!(matches!(err, HarnessError::InvalidSample { index: 0, .. }), "{err}");

    let dir = tempfile::tempdir().unwrap();
    let mut bad = ResultSet::empty();
    bad.samples.push(RunSample::synthetic("b", RunKind::Parallel, 2, 1.0, 3.0));
    assert!(save_results(&bad, &dir.path().join("x.json")).is_err());
}

#[test]
fn unknown_major_version_is_rejected() {
    let mut v = serde_json::to_value(ResultSet::empty()).unwrap();
    v["schema_version"] = "2.0".into();
    assert!(matches!(parse_results(&v.to_string()), Err(HarnessError::UnsupportedVersion(_))));
    v["schema_version"] = "1.3".into();
    assert!(parse_results(&v.to_string()).is_ok());
}

#[test]
fn malformed_file_reports_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\n  \"schema_version\": \"1.0\",\n  \"samples\": [ }\n").unwrap();
    let msg = load_results(&path).unwrap_err().to_string();
    assert!(msg.contains("line 3"), "{msg}");
    assert!(msg.contains("bad.json"), "{msg}");
}
