use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use log::{info, warn};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use vulnprop::depgraph::{build_p_graph, PDepGraph, PGraphExport};
use vulnprop::oracle::{compare, oracle_propagate_capped, OracleError};
use vulnprop::par::Jobs;
use vulnprop::patchvf::{
    extract_function_map, FilterConfig, FunctionMap, HeuristicFilter, ManualDecision, RemoteConfig, Side,
    VfPipeline,
};
use vulnprop::propagation::{Engine, EngineOptions, PropagationError, WorklistOrder};
use vulnprop::snapshot::{load_snapshot, validate_snapshot, SnapshotError, ValidationReport};
use vulnprop::synthgen::{generate, GenConfig, GenError};
use vulnprop::vpss::{score_at, timeseries, VpssParams, VpssReport, CSV_HEADER};
use vulnprop::{report, EcosystemSnapshot, ProjectId, PropagationResult, VulnSpec, SCHEMA_VERSION};

use crate::exit::{fail, Failure, Outcome, OrExit, ANALYSIS, RESOURCE, USAGE, VALIDATION};
use crate::{Command, OrderArg, Series};

pub fn run(cmd: Command) -> Outcome {
    match cmd {
        Command::Ingest { snapshot, export_pgraph, out } => ingest(&snapshot, export_pgraph, &out.out),
        Command::Funcmap { side, sources } => funcmap(&side, &sources),
        Command::Vf { diff, pre_map, post_map, cve, classifier, timeout, retries, manual, filters, jobs, out } => {
            let mut pipeline = VfPipeline { jobs: Jobs(jobs), ..Default::default() };
            if let Some(path) = filters {
                let cfg = FilterConfig::load(&path).or_exit(VALIDATION)?;
                pipeline.filter = HeuristicFilter::new(&cfg).or_exit(VALIDATION)?;
            }
            if let Some(url) = classifier.filter(|u| !u.is_empty()) {
                let mut remote = RemoteConfig::new(url);
                remote.timeout = std::time::Duration::from_secs(timeout);
                remote.retries = retries;
                pipeline.remote = Some(remote);
            }
            if let Some(path) = manual {
                pipeline.manual = read_json::<Vec<ManualDecision>>(&path)?;
            }
            vf(&pipeline, &cve, &diff, &pre_map, &post_map, &out.out)
        }
        Command::Analyze { snapshot, vuln, cache, stop_after, checkpoint_every, order, jobs, max_passes, out } => {
            let order = match order {
                OrderArg::Fifo => WorklistOrder::Fifo,
                OrderArg::Seeded(seed) => WorklistOrder::Seeded(seed),
                OrderArg::Ranked(path) => {
                    let text = fs::read_to_string(&path)
                        .with_context(|| format!("reading {}", path.display()))
                        .or_exit(USAGE)?;
                    WorklistOrder::Ranked(
                        text.lines().map(str::trim).filter(|l| !l.is_empty()).map(ProjectId::new).collect(),
                    )
                }
            };
            let opts = EngineOptions { order, jobs: Jobs(jobs), max_passes };
            analyze(&snapshot, &vuln, cache.as_deref(), stop_after, checkpoint_every as usize, opts, &out.out)
        }
        Command::Score { result, snapshot, params, at, series, jobs, out } => {
            score(&result, &snapshot, params.as_deref(), at, series, Jobs(jobs), &out.out)
        }
        Command::Report { result, snapshot, scores } => {
            let r: PropagationResult = read_json(&result)?;
            let s = snapshot.as_deref().map(load_checked).transpose()?;
            let records = match scores {
                Some(path) => read_json::<VpssReport>(&path)?.records,
                None => Vec::new(),
            };
            print!("{}", report::render(&r, s.as_ref(), &records));
            Ok(())
        }
        Command::Gen { config, out_dir, seed } => {
            let mut cfg = read_gen_config(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let synth = generate(&cfg).map_err(gen_failure)?;
            synth.write_to(&out_dir).map_err(gen_failure)?;
            println!(
                "seed {}: {} projects, {} project-versions, {} affected",
                cfg.seed,
                synth.snapshot.total_p(),
                synth.snapshot.total_pv(),
                synth.truth.affected.len()
            );
            Ok(())
        }
        Command::Oraclecheck { snapshot, vuln, gen_config, seeds, node_cap, out } => match (snapshot, vuln, gen_config) {
            (Some(s), Some(v), None) => oraclecheck_snapshot(&s, &v, node_cap, &out.out),
            (None, None, Some(cfg)) => oraclecheck_generated(&cfg, seeds, node_cap),
            _ => fail(USAGE, "give either <snapshot-dir> <vuln.json> or --gen-config"),
        },
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Outcome<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).or_exit(VALIDATION)?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display())).or_exit(VALIDATION)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Outcome<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).or_exit(RESOURCE)?;
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value).expect("output serializes") + "\n";
    fs::write(&path, text).with_context(|| format!("writing {}", path.display())).or_exit(RESOURCE)?;
    Ok(path)
}

fn snapshot_failure(e: SnapshotError) -> Failure {
    Failure::new(VALIDATION, e)
}

fn propagation_failure(e: PropagationError) -> Failure {
    let code = match e {
        PropagationError::UnknownRootProject(_)
        | PropagationError::NoVulnerableVersionInSnapshot(_)
        | PropagationError::InvalidVulnSpec(_) => VALIDATION,
        PropagationError::PassBudgetExceeded(_) | PropagationError::Cache(_) => ANALYSIS,
    };
    Failure::new(code, e)
}

fn gen_failure(e: GenError) -> Failure {
    let code = match e {
        GenError::InvalidConfig(_) => VALIDATION,
        GenError::Snapshot(_) | GenError::Io { .. } => RESOURCE,
    };
    Failure::new(code, e)
}

fn oracle_failure(e: OracleError) -> Failure {
    Failure::new(RESOURCE, e)
}

fn read_gen_config(path: &Path) -> Outcome<GenConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).or_exit(VALIDATION)?;
    GenConfig::from_toml(&text).map_err(gen_failure)
}

/// Loads a snapshot and refuses it when validation finds fatal problems.
fn load_checked(dir: &Path) -> Outcome<EcosystemSnapshot> {
    let s = load_snapshot(dir).map_err(snapshot_failure)?;
    let report = validate_snapshot(&s);
    if let Some(first) = report.fatal().next() {
        let n = report.fatal().count();
        return fail(
            VALIDATION,
            format!("snapshot has {n} fatal findings, first: {:?} in {}: {}", first.kind, first.pv, first.detail),
        );
    }
    if !report.is_empty() {
        warn!("snapshot has {} warnings; run `ingest` for details", report.findings.len());
    }
    Ok(s)
}

fn ingest(dir: &Path, export_pgraph: bool, out: &Path) -> Outcome {
    let s = load_snapshot(dir).map_err(snapshot_failure)?;
    let report: ValidationReport = validate_snapshot(&s);
    let fatal = report.fatal().count();
    let path = write_json(
        out,
        "validation.json",
        &json!({
            "schema_version": SCHEMA_VERSION,
            "projects": s.total_p(),
            "project_versions": s.total_pv(),
            "fatal": fatal,
            "warnings": report.findings.len() - fatal,
            "findings": report.findings,
        }),
    )?;
    println!(
        "{} projects, {} project-versions, {fatal} fatal, {} warnings",
        s.total_p(),
        s.total_pv(),
        report.findings.len() - fatal
    );
    if fatal > 0 {
        return fail(VALIDATION, format!("snapshot failed validation, report at {}", path.display()));
    }
    if export_pgraph {
        let g = build_p_graph(&s);
        let export: PGraphExport = g.to_export();
        let p = write_json(out, "pgraph.json", &export)?;
        println!("{} edges written to {}", g.edge_count(), p.display());
    }
    Ok(())
}

fn funcmap(side: &str, sources: &[String]) -> Outcome {
    let side = if side == "pre" { Side::Pre } else { Side::Post };
    let mut map = FunctionMap::new(side, Vec::new()).expect("empty map is valid");
    for spec in sources {
        let (path, name) = spec.split_once('=').unwrap_or((spec, spec));
        let text = fs::read_to_string(path).with_context(|| format!("reading {path}")).or_exit(VALIDATION)?;
        let m = extract_function_map(side, name, &text).or_exit(VALIDATION)?;
        map.extend(m).or_exit(VALIDATION)?;
    }
    println!("{}", serde_json::to_string_pretty(&map).expect("map serializes"));
    Ok(())
}

fn vf(pipeline: &VfPipeline, cve: &str, diff: &Path, pre: &Path, post: &Path, out: &Path) -> Outcome {
    let read = |p: &Path| fs::read_to_string(p).with_context(|| format!("reading {}", p.display())).or_exit(VALIDATION);
    let diff_text = read(diff)?;
    let pre_map = FunctionMap::from_json(&read(pre)?).or_exit(VALIDATION)?;
    let post_map = FunctionMap::from_json(&read(post)?).or_exit(VALIDATION)?;
    let report = pipeline.run(cve, &diff_text, &pre_map, &post_map).or_exit(VALIDATION)?;
    for w in &report.warnings {
        warn!("{w}");
    }
    if report.degraded {
        warn!("classifier unavailable for some candidates; heuristic verdicts used");
    }
    write_json(out, "vfs.json", &report)?;
    for d in &report.decisions {
        println!("{:<5} {} ({:?}: {})", format!("{:?}", d.verdict).to_lowercase(), d.fqn, d.source, d.reason);
    }
    println!("{} of {} candidates kept", report.final_vfs.len(), report.candidates.len());
    Ok(())
}

fn analyze(
    snapshot: &Path,
    vuln: &Path,
    cache: Option<&Path>,
    stop_after: Option<usize>,
    checkpoint_every: usize,
    opts: EngineOptions,
    out: &Path,
) -> Outcome {
    let s = load_checked(snapshot)?;
    let v: VulnSpec = read_json(vuln)?;
    let g: PDepGraph = build_p_graph(&s);
    let mut engine = match cache {
        Some(dir) => Engine::resume(&s, &g, &v, opts, dir),
        None => Engine::new(&s, &g, &v, opts),
    }
    .map_err(propagation_failure)?;
    if engine.passes() > 0 {
        info!("resumed at pass {}", engine.passes());
    }

    let mut budget = stop_after;
    let done = loop {
        let chunk = match (cache, budget) {
            (None, _) => None,
            (Some(_), Some(b)) => Some(b.min(checkpoint_every)),
            (Some(_), None) => Some(checkpoint_every),
        };
        let before = engine.passes();
        let done = engine.run(chunk).map_err(propagation_failure)?;
        if let Some(dir) = cache {
            engine.save(dir).map_err(propagation_failure)?;
        }
        if let Some(b) = budget.as_mut() {
            *b -= engine.passes() - before;
        }
        if done || budget == Some(0) {
            break done;
        }
    };
    if !done {
        println!(
            "stopped after pass {}; rerun with the same --cache to continue",
            engine.passes()
        );
        return Ok(());
    }

    let r = engine.result();
    write_json(out, "result.json", &r)?;
    let path = out.join("passlog.jsonl");
    let mut log = fs::File::create(&path).with_context(|| format!("writing {}", path.display())).or_exit(RESOURCE)?;
    for rec in &r.pass_log {
        let line = serde_json::to_string(rec).expect("pass record serializes");
        writeln!(log, "{line}").with_context(|| format!("writing {}", path.display())).or_exit(RESOURCE)?;
    }
    let pvs: usize = r.affected.values().map(|a| a.versions.len()).sum();
    println!("{} projects, {pvs} project-versions affected after {} passes", r.affected.len(), r.pass_log.len());
    for w in &r.warnings {
        warn!("{w}");
    }
    Ok(())
}

fn score(
    result: &Path,
    snapshot: &Path,
    params: Option<&Path>,
    at: Option<chrono::DateTime<chrono::Utc>>,
    series: Option<Series>,
    jobs: Jobs,
    out: &Path,
) -> Outcome {
    let r: PropagationResult = read_json(result)?;
    let s = load_checked(snapshot)?;
    let p = match params {
        Some(path) => VpssParams::load(path).or_exit(VALIDATION)?,
        None => VpssParams::default(),
    };
    if !p.weights_ordered() {
        warn!("weights are not ordered w1 > w3 > w2 > w4");
    }
    if s.total_p() == 0 {
        return fail(ANALYSIS, "snapshot is empty, nothing to score against");
    }
    let records = match series {
        Some(sr) => timeseries(&r, &s, &p, sr.t0, sr.interval_days, sr.count, jobs),
        None => {
            let t = at.or_else(|| s.latest_release()).expect("non-empty snapshot has releases");
            vec![score_at(&r, &s, &p, t)]
        }
    };

    let report = VpssReport::new(p, records);
    write_json(out, "vpss.json", &report)?;
    let path = out.join("vpss.csv");
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display())).or_exit(RESOURCE)?;
    w.write_record(CSV_HEADER).or_exit(RESOURCE)?;
    for rec in &report.records {
        w.write_record(rec.csv_row()).or_exit(RESOURCE)?;
    }
    w.flush().or_exit(RESOURCE)?;
    for rec in &report.records {
        println!("{} {:.3} {}", rec.timestamp.to_rfc3339(), rec.vpss, rec.tier);
    }
    Ok(())
}

fn oraclecheck_snapshot(snapshot: &Path, vuln: &Path, cap: usize, out: &Path) -> Outcome {
    let s = load_checked(snapshot)?;
    let v: VulnSpec = read_json(vuln)?;
    let o = oracle_propagate_capped(&s, &v, cap).map_err(oracle_failure)?;
    let r = vulnprop::propagate(&s, &build_p_graph(&s), &v).map_err(propagation_failure)?;
    let affected: BTreeMap<_, _> = o.affected_map(&v.root_project);
    write_json(out, "oracle.json", &json!({ "schema_version": SCHEMA_VERSION, "affected": affected }))?;
    let diffs = compare(&r, &o);
    for d in &diffs {
        println!("{d}");
    }
    if !diffs.is_empty() {
        return fail(ANALYSIS, format!("engine and oracle differ in {} places", diffs.len()));
    }
    println!("engine and oracle agree on {} affected project-versions", o.affected.len());
    Ok(())
}

fn oraclecheck_generated(config: &Path, seeds: u64, cap: usize) -> Outcome {
    let base = read_gen_config(config)?;
    let mut failed = 0;
    for seed in base.seed..base.seed + seeds {
        let synth = generate(&GenConfig { seed, ..base.clone() }).map_err(gen_failure)?;
        let o = oracle_propagate_capped(&synth.snapshot, &synth.vuln, cap).map_err(oracle_failure)?;
        let r = vulnprop::propagate(&synth.snapshot, &build_p_graph(&synth.snapshot), &synth.vuln)
            .map_err(propagation_failure)?;
        let mut diffs = compare(&r, &o);
        if o.affected != synth.truth.affected {
            diffs.push("oracle disagrees with the planted truth".into());
        }
        if diffs.is_empty() {
            println!("seed {seed}: ok ({} affected)", o.affected.len());
        } else {
            failed += 1;
            println!("seed {seed}: {} differences", diffs.len());
            for d in &diffs {
                println!("  {d}");
            }
        }
    }
    if failed > 0 {
        return fail(ANALYSIS, format!("{failed} of {seeds} seeds disagree"));
    }
    Ok(())
}
