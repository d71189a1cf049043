//! Seeded synthetic ecosystems with planted ground truth.
//!
//! Project `i` is named `synth.g:pNNN`; project 0 is the vulnerable root.
//! Every PV ships two own files:
//!
//! ```text
//! pNNN/Api.src   pNNN.Api.entry (public)  -> pNNN.Impl.helper
//!                pNNN.Api.safe  (public)
//! pNNN/Impl.src  pNNN.Impl.helper (internal)
//!                pNNN.Impl.vuln   (internal; root, vulnerable versions only)
//! ```
//!
//! Dependencies point from project `i` to projects `j < i`, plus optional
//! back edges that close two-project cycles. For every dependency a PV is
//! wired one of four ways: calling the upstream `entry` from `helper`
//! (the call propagates further), calling it from an unreachable internal
//! function (the PV is affected but exposes no entry point), importing the
//! upstream and only calling `safe`, or not importing it at all. Fat PVs
//! additionally bundle a copy of one dependency's files and functions.
//!
//! The generator's truth is computed from the wiring table plus file
//! ownership, without the propagation engine.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use chrono::{DateTime, Duration, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::propagation::VulnSpec;
use crate::rng::SplitMix64;
use crate::snapshot::{CallEdge, EcosystemSnapshot, FunctionDecl, ProjectId, PvId, PvManifest, SnapshotError, Visibility};
use crate::SCHEMA_VERSION;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub seed: u64,
    pub n_projects: usize,
    pub versions_min: usize,
    pub versions_max: usize,
    pub dep_density: f64,
    pub cycle_probability: f64,
    pub fat_package_probability: f64,
    pub call_through_probability: f64,
    pub release_span_days: i64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 42,
            n_projects: 20,
            versions_min: 1,
            versions_max: 4,
            dep_density: 0.15,
            cycle_probability: 0.1,
            fat_package_probability: 0.2,
            call_through_probability: 0.6,
            release_span_days: 720,
        }
    }
}

impl GenConfig {
    pub fn from_toml(text: &str) -> Result<Self, GenError> {
        let c: GenConfig = toml::from_str(text).map_err(|e| GenError::InvalidConfig(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: String| Err(GenError::InvalidConfig(m));
        if self.n_projects == 0 {
            return bad("n_projects must be at least 1".into());
        }
        if self.versions_min == 0 || self.versions_min > self.versions_max {
            return bad(format!("version range {}..={} is empty or starts at 0", self.versions_min, self.versions_max));
        }
        if self.release_span_days < 0 {
            return bad("release_span_days must be non-negative".into());
        }
        for (name, p) in [
            ("dep_density", self.dep_density),
            ("cycle_probability", self.cycle_probability),
            ("fat_package_probability", self.fat_package_probability),
            ("call_through_probability", self.call_through_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        Ok(())
    }
}

/// How a downstream PV uses one of its dependencies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Wiring {
    /// `helper` calls the upstream `entry`.
    CallEntry,
    /// An unreachable internal function calls the upstream `entry`.
    CallEntryHidden,
    /// Imports the upstream, calls only its `safe`.
    ImportOnly,
    /// Declares the dependency and nothing else.
    Unused,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WiringRecord {
    pub downstream: PvId,
    pub upstream: PvId,
    pub wiring: Wiring,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthCall {
    pub upstream: PvId,
    pub downstream: PvId,
    pub caller: String,
    pub callee: String,
}

/// `truth.json`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truth {
    pub schema_version: u32,
    pub seed: u64,
    pub affected: BTreeSet<PvId>,
    pub eps: BTreeMap<PvId, BTreeSet<String>>,
    pub calls: Vec<TruthCall>,
    pub fat: Vec<(PvId, PvId)>,
    pub cycles: Vec<(ProjectId, ProjectId)>,
    pub wiring: Vec<WiringRecord>,
}

#[derive(Clone, Debug)]
pub struct Synthetic {
    pub config: GenConfig,
    pub snapshot: EcosystemSnapshot,
    pub vuln: VulnSpec,
    pub truth: Truth,
}

impl Synthetic {
    /// Writes `snapshot/`, `vuln.json`, `truth.json` and `config.toml` under
    /// `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), GenError> {
        self.snapshot.write_to(&dir.join("snapshot"))?;
        let write = |name: &str, text: String| {
            let path = dir.join(name);
            std::fs::write(&path, text + "\n").map_err(|e| GenError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })
        };
        write("vuln.json", pretty(&self.vuln))?;
        write("truth.json", pretty(&self.truth))?;
        write(
            "config.toml",
            toml::to_string(&self.config).map_err(|e| GenError::InvalidConfig(e.to_string()))?,
        )?;
        Ok(())
    }
}

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("generator output serializes")
}

pub fn project_name(i: usize) -> ProjectId {
    ProjectId::new(format!("synth.g:p{i:03}"))
}

fn short(i: usize) -> String {
    format!("p{i:03}")
}

fn entry(i: usize) -> String {
    format!("{}.Api.entry", short(i))
}

fn safe(i: usize) -> String {
    format!("{}.Api.safe", short(i))
}

fn helper(i: usize) -> String {
    format!("{}.Impl.helper", short(i))
}

fn hidden(i: usize, j: usize) -> String {
    format!("{}.Impl.hidden{j:03}", short(i))
}

pub fn vuln_function() -> String {
    format!("{}.Impl.vuln", short(0))
}

fn api_file(i: usize) -> String {
    format!("{}/Api.src", short(i))
}

fn impl_file(i: usize) -> String {
    format!("{}/Impl.src", short(i))
}

fn base_time() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap()
}

fn declare(m: &mut PvManifest, fqn: String, file: String, vis: Visibility) {
    m.files.insert(file.clone());
    m.functions.insert(fqn.clone(), FunctionDecl { fqn, file, visibility: vis });
}

fn call(m: &mut PvManifest, caller: String, callee: String) {
    m.calls.push(CallEdge { caller, callee });
}

/// Generates an ecosystem. Identical configs give identical output.
pub fn generate(c: &GenConfig) -> Result<Synthetic, GenError> {
    c.validate()?;
    let mut rng = SplitMix64::new(c.seed);
    let n = c.n_projects;

    // versions and release dates
    let mut versions: Vec<Vec<(String, DateTime<Utc>)>> = Vec::with_capacity(n);
    for _ in 0..n {
        let count = rng.range_inclusive(c.versions_min, c.versions_max);
        let mut days: Vec<i64> = (0..count)
            .map(|_| rng.range_inclusive(0, c.release_span_days as usize) as i64)
            .collect();
        days.sort_unstable();
        versions.push(
            days.into_iter()
                .enumerate()
                .map(|(k, d)| (format!("1.{k}.0"), base_time() + Duration::days(d)))
                .collect(),
        );
    }
    // all root versions but the newest are vulnerable
    let root_count = versions[0].len();
    let vulnerable: BTreeSet<String> = versions[0]
        .iter()
        .take(root_count.saturating_sub(1).max(1))
        .map(|(v, _)| v.clone())
        .collect();

    // project-level dependencies
    let mut p_deps: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    let mut cycles = Vec::new();
    for i in 1..n {
        for j in 0..i {
            if rng.chance(c.dep_density) {
                p_deps[i].insert(j);
            }
        }
        if p_deps[i].is_empty() {
            p_deps[i].insert(rng.below(i));
        }
        if rng.chance(c.cycle_probability) {
            let options: Vec<usize> = p_deps[i].iter().copied().collect();
            let j = options[rng.below(options.len())];
            p_deps[j].insert(i);
            cycles.push((project_name(j), project_name(i)));
        }
    }
    // P-level reachability over dependencies, for safe bundling
    let mut reaches: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for i in 0..n {
        let mut stack: Vec<usize> = p_deps[i].iter().copied().collect();
        while let Some(j) = stack.pop() {
            if reaches[i].insert(j) {
                stack.extend(p_deps[j].iter().copied());
            }
        }
    }

    let pv = |i: usize, k: usize| PvId::new(project_name(i).as_str(), versions[i][k].0.clone());

    // base manifests and wiring
    let mut manifests: BTreeMap<PvId, PvManifest> = BTreeMap::new();
    let mut wiring = Vec::new();
    let mut dep_choice: BTreeMap<PvId, Vec<(usize, PvId)>> = BTreeMap::new();
    for i in 0..n {
        for k in 0..versions[i].len() {
            let id = pv(i, k);
            let mut m = PvManifest::new(id.clone(), versions[i][k].1);
            declare(&mut m, entry(i), api_file(i), Visibility::Public);
            declare(&mut m, safe(i), api_file(i), Visibility::Public);
            declare(&mut m, helper(i), impl_file(i), Visibility::Internal);
            call(&mut m, entry(i), helper(i));
            if i == 0 && vulnerable.contains(&id.version) {
                declare(&mut m, vuln_function(), impl_file(0), Visibility::Internal);
                call(&mut m, helper(0), vuln_function());
            }
            let mut chosen = Vec::new();
            for &j in &p_deps[i] {
                let up = pv(j, rng.below(versions[j].len()));
                let w = if rng.chance(c.call_through_probability) {
                    if rng.chance(0.8) {
                        Wiring::CallEntry
                    } else {
                        Wiring::CallEntryHidden
                    }
                } else if rng.chance(0.5) {
                    Wiring::ImportOnly
                } else {
                    Wiring::Unused
                };
                match w {
                    Wiring::CallEntry => call(&mut m, helper(i), entry(j)),
                    Wiring::CallEntryHidden => {
                        declare(&mut m, hidden(i, j), impl_file(i), Visibility::Internal);
                        call(&mut m, hidden(i, j), entry(j));
                    }
                    Wiring::ImportOnly => call(&mut m, helper(i), safe(j)),
                    Wiring::Unused => {}
                }
                if w != Wiring::Unused {
                    m.imports.insert(api_file(j));
                }
                m.deps.push(up.clone());
                wiring.push(WiringRecord { downstream: id.clone(), upstream: up.clone(), wiring: w });
                chosen.push((j, up));
            }
            dep_choice.insert(id.clone(), chosen);
            manifests.insert(id, m);
        }
    }

    // fat PVs: bundle one dependency that cannot reach back to the bundler
    let mut fat = Vec::new();
    for (i, vs) in versions.iter().enumerate() {
        for k in 0..vs.len() {
            let id = pv(i, k);
            let options: Vec<&PvId> = dep_choice[&id]
                .iter()
                .filter(|(j, _)| !reaches[*j].contains(&i))
                .map(|(_, up)| up)
                .collect();
            if options.is_empty() || !rng.chance(c.fat_package_probability) {
                continue;
            }
            let bundled = options[rng.below(options.len())].clone();
            let source = manifests[&bundled].clone();
            let m = manifests.get_mut(&id).expect("manifest exists");
            m.files.extend(source.files.iter().cloned());
            for (fqn, d) in &source.functions {
                m.functions.entry(fqn.clone()).or_insert_with(|| d.clone());
            }
            m.calls.extend(
                source
                    .calls
                    .iter()
                    .filter(|e| source.functions.contains_key(&e.callee))
                    .cloned(),
            );
            fat.push((id, bundled));
        }
    }
    for m in manifests.values_mut() {
        m.calls.sort();
        m.calls.dedup();
    }

    let truth = relax(c.seed, &manifests, &vulnerable, wiring, fat, cycles);
    let snapshot = EcosystemSnapshot::from_manifests(format!("synth-{}", c.seed), manifests.into_values())?;
    let disclosed_at = versions[0]
        .iter()
        .find(|(v, _)| !vulnerable.contains(v))
        .map(|(_, t)| *t)
        .unwrap_or_else(|| versions[0].last().map(|(_, t)| *t).unwrap_or_else(base_time) + Duration::days(1));
    let vuln = VulnSpec {
        cve_id: format!("SYNTH-{}", c.seed),
        root_project: project_name(0),
        vulnerable_versions: vulnerable,
        vulnerable_functions: BTreeSet::from([vuln_function()]),
        disclosed_at,
    };
    Ok(Synthetic { config: c.clone(), snapshot, vuln, truth })
}

/// For every PV, the files that no PV of another project in its dependency
/// closure ships.
fn own_files(manifests: &BTreeMap<PvId, PvManifest>) -> BTreeMap<&PvId, BTreeSet<String>> {
    let ids: Vec<&PvId> = manifests.keys().collect();
    let pos: HashMap<&PvId, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let deps: Vec<Vec<usize>> =
        ids.iter().map(|id| manifests[*id].deps.iter().filter_map(|d| pos.get(d).copied()).collect()).collect();
    let mut shippers: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, id) in ids.iter().enumerate() {
        for f in &manifests[*id].files {
            shippers.entry(f).or_default().push(i);
        }
    }
    // visit stamps: stamp[j] == i + 1 means j was reached from i
    let mut stamp = vec![0usize; ids.len()];
    let mut out = BTreeMap::new();
    for (i, id) in ids.iter().enumerate() {
        stamp[i] = i + 1;
        let mut stack = deps[i].clone();
        while let Some(j) = stack.pop() {
            if stamp[j] != i + 1 {
                stamp[j] = i + 1;
                stack.extend(&deps[j]);
            }
        }
        let shipped_elsewhere =
            |f: &str| shippers[f].iter().any(|&j| j != i && stamp[j] == i + 1 && ids[j].project != id.project);
        let own = manifests[*id].files.iter().filter(|f| !shipped_elsewhere(f)).cloned().collect();
        out.insert(*id, own);
    }
    out
}

/// Fixpoint over the wiring table. A PV is hot when `entry` reaches the
/// vulnerable function: a vulnerable root PV, or one whose own `helper`
/// calls the `entry` of a hot upstream that is still an entry point there.
/// Fat PVs can strip a dependency's files of ownership, so ownership is
/// recomputed here rather than assumed.
fn relax(
    seed: u64,
    manifests: &BTreeMap<PvId, PvManifest>,
    vulnerable: &BTreeSet<String>,
    wiring: Vec<WiringRecord>,
    fat: Vec<(PvId, PvId)>,
    cycles: Vec<(ProjectId, ProjectId)>,
) -> Truth {
    let root = project_name(0);
    let index = |p: &ProjectId| -> usize { p.as_str().rsplit('p').next().and_then(|s| s.parse().ok()).unwrap_or(0) };
    let own = own_files(manifests);
    let api_own = |pv: &PvId| own[pv].contains(&api_file(index(&pv.project)));
    let impl_own = |pv: &PvId| own[pv].contains(&impl_file(index(&pv.project)));

    let seeds: BTreeSet<PvId> = manifests
        .keys()
        .filter(|id| id.project == root && vulnerable.contains(&id.version))
        .cloned()
        .collect();
    let mut hot = seeds.clone();
    loop {
        let before = hot.len();
        for w in &wiring {
            if w.wiring == Wiring::CallEntry && hot.contains(&w.upstream) && api_own(&w.upstream) && impl_own(&w.downstream) {
                hot.insert(w.downstream.clone());
            }
        }
        if hot.len() == before {
            break;
        }
    }
    let mut affected = seeds;
    let mut calls = Vec::new();
    for w in &wiring {
        if !(hot.contains(&w.upstream) && api_own(&w.upstream) && impl_own(&w.downstream)) {
            continue;
        }
        let (i, j) = (index(&w.downstream.project), index(&w.upstream.project));
        let caller = match w.wiring {
            Wiring::CallEntry => helper(i),
            Wiring::CallEntryHidden => hidden(i, j),
            _ => continue,
        };
        affected.insert(w.downstream.clone());
        calls.push(TruthCall { upstream: w.upstream.clone(), downstream: w.downstream.clone(), caller, callee: entry(j) });
    }
    calls.sort_by(|a, b| (&a.upstream, &a.downstream, &a.caller).cmp(&(&b.upstream, &b.downstream, &b.caller)));
    calls.dedup();
    let eps = affected
        .iter()
        .map(|pv| {
            let set = if hot.contains(pv) && api_own(pv) {
                BTreeSet::from([entry(index(&pv.project))])
            } else {
                BTreeSet::new()
            };
            (pv.clone(), set)
        })
        .collect();
    Truth { schema_version: SCHEMA_VERSION, seed, affected, eps, calls, fat, cycles, wiring }
}
