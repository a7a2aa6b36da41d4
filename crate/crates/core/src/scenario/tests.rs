use super::presets::{fig3, section5, Fig3Variant};
use super::*;
use crate::entities::TaskOutcome;
use crate::kernel::Tag;
use crate::model::SharingPolicy;

const MINIMAL: &str = r#"{
  "datacenters": [
    {"id": 0, "cost_per_ram_mb": 0.01, "cost_per_storage_mb": 0.001,
     "hosts": [{"cores": 1, "mips_per_core": 1000, "ram_mb": 2048, "storage_mb": 10000, "vm_policy": "space_shared"}]}
  ],
  "broker": {
    "vms": [{"id": 0, "cores": 1, "mips_per_core": 1000, "ram_mb": 512, "storage_mb": 1024, "task_policy": "space_shared"}]
  }
}"#;

#[test]
fn fig3_variants_match_hand_computation() {
    for variant in Fig3Variant::ALL {
        let out = run_scenario(&fig3(variant), RunOptions::default()).unwrap();
        let finish: Vec<f64> = out.records.iter().map(|r| r.finish_t.seconds()).collect();
        let expected = variant.expected_finish();
        assert_eq!(finish.len(), 8, "variant {variant}");
        for (got, want) in finish.iter().zip(expected) {
            assert!((got - want).abs() < 1e-9, "variant {variant}: {finish:?}");
        }
    }
}

#[test]
fn minimal_document_parses_with_empty_groups() {
    let s = parse_scenario(MINIMAL).unwrap();
    assert_eq!(s.host_count(), 1);
    assert!(s.broker_plan.task_groups.is_empty());
    assert!(s.broker_plan.destroy_on_completion);
}

#[test]
fn empty_plan_charges_creation_only() {
    let s = parse_scenario(MINIMAL).unwrap();
    let out = run_scenario(&s, RunOptions::default()).unwrap();
    assert!(out.records.is_empty());
    assert_eq!(out.ledger.total(), 512.0 * 0.01 + 1024.0 * 0.001);
}

#[test]
fn dangling_binding_is_a_validation_error() {
    let doc = MINIMAL.replace(
        r#""task_policy": "space_shared"}]"#,
        r#""task_policy": "space_shared"}],
    "task_groups": [{"submit_time": 0, "binding": {"explicit": {"5": 9}}, "tasks": [{"id": 5, "length_mi": 10}]}]"#,
    );
    match parse_scenario(&doc).unwrap_err() {
        ScenarioError::Validation { path, .. } => {
            assert_eq!(path, "broker.task_groups[0].binding.explicit.5")
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn schema_errors_name_the_path() {
    let doc = MINIMAL.replace(
        r#""cores": 1, "mips_per_core": 1000, "ram_mb": 512"#,
        r#""cores": -1, "mips_per_core": 1000, "ram_mb": 512"#,
    );
    match parse_scenario(&doc).unwrap_err() {
        ScenarioError::Schema { path, .. } => assert_eq!(path, "broker.vms[0].cores"),
        other => panic!("unexpected {other:?}"),
    }
    let err = parse_scenario(r#"{"datacenters": [], "extra": 1}"#).unwrap_err();
    assert!(err.is_invalid_input());
}

#[test]
fn presets_round_trip_through_documents() {
    for s in Fig3Variant::ALL.map(fig3).into_iter().chain([
        section5(SharingPolicy::SpaceShared, 120),
        section5(SharingPolicy::TimeShared, 50),
    ]) {
        let text = emit_scenario(&s);
        assert_eq!(parse_scenario(&text).unwrap(), s);
    }
}

#[test]
fn section5_host_templates_fold() {
    let text = emit_scenario(&section5(SharingPolicy::SpaceShared, 10_000));
    assert!(text.len() < 4096, "{} bytes", text.len());
    assert_eq!(parse_scenario(&text).unwrap().host_count(), 10_000);
}

#[test]
fn section5_space_shared_tasks_take_1200_s() {
    let out = run_scenario(
        &section5(SharingPolicy::SpaceShared, 100),
        RunOptions::default(),
    )
    .unwrap();
    assert_eq!(out.records.len(), 500);
    for r in &out.records {
        assert_eq!(r.outcome, TaskOutcome::Finished);
        assert_eq!(r.finish_t.seconds() - r.start_t.seconds(), 1200.0);
        let group = (r.task_id / 50) as f64;
        assert_eq!(r.finish_t.seconds(), 1200.0 * (group + 1.0));
    }
    assert_eq!(out.dispatched(Tag::CreateVm), out.dispatched(Tag::VmAck));
    assert_eq!(out.dispatched(Tag::TaskDone), 500);
    assert!(out.busy_hosts.values().all(Vec::is_empty));
}

#[test]
fn no_suitable_provider_is_reported() {
    let doc = MINIMAL.replace(r#""ram_mb": 512"#, r#""ram_mb": 4096"#);
    let s = parse_scenario(&doc).unwrap();
    assert!(matches!(
        run_scenario(&s, RunOptions::default()),
        Err(ScenarioError::NoSuitableProvider)
    ));
}

#[test]
fn traces_are_reproducible() {
    let s = fig3(Fig3Variant::C);
    let a = run_scenario(&s, RunOptions { trace: true })
        .unwrap()
        .trace
        .unwrap();
    let b = run_scenario(&s, RunOptions { trace: true })
        .unwrap()
        .trace
        .unwrap();
    assert!(!a.is_empty());
    assert_eq!(a.hash(), b.hash());
    assert!(run_scenario(&s, RunOptions::default())
        .unwrap()
        .trace
        .is_none());
}

#[test]
fn results_table_format() {
    let out = run_scenario(&fig3(Fig3Variant::A), RunOptions::default()).unwrap();
    let csv = render_results_csv(&out.records);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 9);
    assert_eq!(lines[0], RESULTS_HEADER);
    assert_eq!(
        lines[1],
        "1,1,0,0,0.000000,0.000000,1.000000,1.000000,0.000000"
    );
    assert_eq!(render_results_csv(&[]), format!("{RESULTS_HEADER}\n"));
}

#[test]
fn write_results_creates_both_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_scenario(&fig3(Fig3Variant::D), RunOptions::default()).unwrap();
    let target = dir.path().join("nested");
    write_results(&out.records, &out.ledger, &target).unwrap();
    let csv = std::fs::read_to_string(target.join(RESULTS_FILE)).unwrap();
    assert_eq!(csv, render_results_csv(&out.records));
    let ledger: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(target.join(LEDGER_FILE)).unwrap()).unwrap();
    assert!(ledger.is_object());
}

#[test]
fn write_results_reports_the_failing_path() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    match write_results(&[], &Default::default(), &blocker.join("sub")) {
        Err(ScenarioError::Io { path, .. }) => assert!(path.starts_with(&blocker)),
        other => panic!("unexpected {other:?}"),
    }
}
