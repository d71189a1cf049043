mod common;

use std::fs;

use vulnprop::depgraph::build_p_graph;
use vulnprop::snapshot::{pv_dir, FindingKind, SnapshotError};
use vulnprop::synthgen::{generate, GenConfig};
use vulnprop::{load_snapshot, propagate, validate_snapshot, EcosystemSnapshot};

use common::*;

#[test]
fn generated_snapshot_round_trips_and_validates() {
    for seed in 0..10 {
        let synth = generate(&GenConfig { seed, n_projects: 25, ..Default::default() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        synth.write_to(dir.path()).unwrap();
        let loaded = load_snapshot(&dir.path().join("snapshot")).unwrap();
        assert_eq!(loaded.pvs, synth.snapshot.pvs, "seed {seed}");
        assert_eq!(loaded.index, synth.snapshot.index, "seed {seed}");
        assert!(validate_snapshot(&loaded).is_empty(), "seed {seed}");

        let a = propagate(&synth.snapshot, &build_p_graph(&synth.snapshot), &synth.vuln).unwrap();
        let b = propagate(&loaded, &build_p_graph(&loaded), &synth.vuln).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn empty_index_is_an_empty_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("index.json"), "[]").unwrap();
    let s = load_snapshot(dir.path()).unwrap();
    assert_eq!((s.total_p(), s.total_pv()), (0, 0));
    assert_eq!(build_p_graph(&s).edge_count(), 0);
}

#[test]
fn missing_index_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_snapshot(dir.path()), Err(SnapshotError::MissingIndex(_))));
}

#[test]
fn malformed_record_names_file_and_line() {
    let (s, _) = diamond();
    let dir = tempfile::tempdir().unwrap();
    s.write_to(dir.path()).unwrap();
    let calls = pv_dir(dir.path(), &pv("B", "1")).join("calls.json");
    fs::write(&calls, "[\n  {\"caller\": \"B.wrap\",\n   \"callee\": 7}\n]").unwrap();
    match load_snapshot(dir.path()) {
        Err(SnapshotError::MalformedRecord { path, line, .. }) => {
            assert_eq!(path, calls);
            assert_eq!(line, 3);
        }
        other => panic!("expected a malformed record, got {other:?}"),
    }
}

#[test]
fn duplicate_index_entry_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let entry = r#"{"project": "A", "version": "1", "released_at": "2021-01-01T00:00:00Z"}"#;
    fs::write(dir.path().join("index.json"), format!("[{entry}, {entry}]")).unwrap();
    assert!(matches!(load_snapshot(dir.path()), Err(SnapshotError::DuplicatePv(_))));
}

#[test]
fn missing_per_pv_records_are_warnings() {
    let (s, v) = diamond();
    let dir = tempfile::tempdir().unwrap();
    s.write_to(dir.path()).unwrap();
    fs::remove_file(pv_dir(dir.path(), &pv("C", "1")).join("imports.json")).unwrap();
    let loaded = load_snapshot(dir.path()).unwrap();
    let report = validate_snapshot(&loaded);
    assert!(report.is_usable());
    assert_eq!(report.of_kind(FindingKind::MissingRecord).count(), 1);

    // without imports C is pruned at the import level, with a warning
    let r = propagate(&loaded, &build_p_graph(&loaded), &v).unwrap();
    assert!(!r.affected.contains_key(&pid("C")));
    assert!(r.warnings.iter().any(|w| w.contains("C@1")), "{:?}", r.warnings);
}

#[test]
fn awkward_identifiers_survive_the_disk_layout() {
    let s = snapshot(
        "odd",
        vec![
            Pv::new("org.example:core/lib", "1.0-RC1+build.5", 0).public("core.f", "core/F.src"),
            Pv::new("org.example:app", "2.0", 1)
                .public("app.main", "app/Main.src")
                .call("app.main", "core.f")
                .dep("org.example:core/lib", "1.0-RC1+build.5")
                .import("core/F.src"),
        ],
    );
    let dir = tempfile::tempdir().unwrap();
    s.write_to(dir.path()).unwrap();
    let loaded: EcosystemSnapshot = load_snapshot(dir.path()).unwrap();
    assert_eq!(loaded.pvs, s.pvs);
    assert!(validate_snapshot(&loaded).is_empty());
}
