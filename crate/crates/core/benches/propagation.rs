//! Sequential vs. data-parallel propagation and scoring.
//!
//! `jobs=1` forces the sequential path; `jobs=0` uses the default rayon
//! pool. Built with `--no-default-features`, both variants run sequentially.

use std::hint::black_box;

use chrono::{Duration, TimeZone, Utc};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use vulnprop::depgraph::build_p_graph;
use vulnprop::par::Jobs;
use vulnprop::propagation::{propagate_with, EngineOptions};
use vulnprop::snapshot::{CallEdge, FunctionDecl, PvManifest, Visibility};
use vulnprop::synthgen::{generate, GenConfig};
use vulnprop::vpss::{timeseries, VpssParams};
use vulnprop::{propagate, EcosystemSnapshot, PvId, VulnSpec};

const MODES: [(&str, Jobs); 2] = [("sequential", Jobs(1)), ("parallel", Jobs(0))];

fn layered(n: usize) -> (EcosystemSnapshot, VulnSpec) {
    let synth = generate(&GenConfig { seed: 1, n_projects: n, dep_density: 10.0 / n as f64, ..Default::default() })
        .expect("valid config");
    (synth.snapshot, synth.vuln)
}

fn declare(m: &mut PvManifest, fqn: &str, file: &str, visibility: Visibility) {
    m.files.insert(file.into());
    m.functions.insert(fqn.into(), FunctionDecl { fqn: fqn.into(), file: file.into(), visibility });
}

/// One root with `n` direct dependents, each with one dependent of its own,
/// so the first pass prunes `n` pairs at once.
fn star(n: usize) -> (EcosystemSnapshot, VulnSpec) {
    let t0 = Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 0).unwrap();
    let mut pvs = Vec::with_capacity(2 * n + 1);
    let mut root = PvManifest::new(PvId::new("root", "1"), t0);
    declare(&mut root, "root.api", "root/Api.src", Visibility::Public);
    declare(&mut root, "root.vf", "root/Impl.src", Visibility::Internal);
    root.calls.push(CallEdge { caller: "root.api".into(), callee: "root.vf".into() });
    pvs.push(root);
    for i in 0..n {
        let (mid, leaf) = (format!("mid{i:05}"), format!("leaf{i:05}"));
        let mut m = PvManifest::new(PvId::new(&mid, "1"), t0 + Duration::days(1));
        declare(&mut m, &format!("{mid}.run"), &format!("{mid}/Main.src"), Visibility::Public);
        m.calls.push(CallEdge { caller: format!("{mid}.run"), callee: "root.api".into() });
        m.deps.push(PvId::new("root", "1"));
        m.imports.insert("root/Api.src".into());
        pvs.push(m);

        let mut l = PvManifest::new(PvId::new(&leaf, "1"), t0 + Duration::days(2));
        declare(&mut l, &format!("{leaf}.main"), &format!("{leaf}/Main.src"), Visibility::Public);
        l.calls.push(CallEdge { caller: format!("{leaf}.main"), callee: format!("{mid}.run") });
        l.deps.push(PvId::new(&mid, "1"));
        l.imports.insert(format!("{mid}/Main.src"));
        pvs.push(l);
    }
    let s = EcosystemSnapshot::from_manifests("star", pvs).expect("unique ids");
    let v = VulnSpec {
        cve_id: "BENCH-STAR".into(),
        root_project: "root".into(),
        vulnerable_versions: ["1".to_string()].into(),
        vulnerable_functions: ["root.vf".to_string()].into(),
        disclosed_at: t0,
    };
    (s, v)
}

fn bench_propagation(c: &mut Criterion) {
    let mut group = c.benchmark_group("propagate");
    group.sample_size(10);
    let cases = [
        ("layered", 250, layered(250)),
        ("layered", 1000, layered(1000)),
        ("star", 2000, star(2000)),
    ];
    for (shape, n, (s, v)) in &cases {
        let g = build_p_graph(s);
        for (mode, jobs) in MODES {
            group.bench_with_input(BenchmarkId::new(format!("{shape}/{mode}"), n), &jobs, |b, &jobs| {
                b.iter(|| {
                    let r = propagate_with(s, &g, v, EngineOptions { jobs, ..Default::default() }).expect("converges");
                    black_box(r.affected.len())
                })
            });
        }
    }
    group.finish();
}

fn bench_series(c: &mut Criterion) {
    let mut group = c.benchmark_group("vpss_series");
    group.sample_size(10);
    let (s, v) = layered(1000);
    let r = propagate(&s, &build_p_graph(&s), &v).expect("converges");
    let p = VpssParams::default();
    for (mode, jobs) in MODES {
        group.bench_with_input(BenchmarkId::new(mode, "24x30d"), &jobs, |b, &jobs| {
            b.iter(|| black_box(timeseries(&r, &s, &p, v.disclosed_at, 30, 24, jobs).len()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_propagation, bench_series);
criterion_main!(benches);
