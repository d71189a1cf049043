//! Worklist-driven propagation of a vulnerability through the ecosystem.
//!
//! Each pass takes one project off the worklist and
//!
//! 1. merges the versions/target functions it received from upstream
//!    (for the root: the vulnerable versions and functions) into its cached
//!    state, keeping only the deltas;
//! 2. recomputes entry points for versions whose targets grew;
//! 3. fetches the PV-level dependency records of each direct dependent;
//! 4. prunes them by version (`v1`), by imported content (`v2`) and by
//!    calls into the new entry points (`v3`);
//! 5. hands the calling downstream functions to each dependent as its new
//!    targets, enqueuing dependents whose targets grew.
//!
//! All per-project state only grows, so the loop reaches a fixpoint on any
//! finite snapshot. The final state does not depend on worklist order;
//! only the number of passes does.

mod cache;
pub mod prune;
pub mod scope;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::depgraph::{direct_downstream, pv_dep_records, PDepGraph};
use crate::par::{self, Jobs};
use crate::rng::SplitMix64;
use crate::snapshot::{EcosystemSnapshot, ProjectId, PvId};
use crate::SCHEMA_VERSION;

pub use prune::{prune_cg, prune_import, prune_version, CallPair, PvPair};
pub use scope::{compute_eps, intrinsic_scope, ScopeCache};

#[derive(Debug, Error)]
pub enum PropagationError {
    #[error("root project {0} is not in the dependency graph")]
    UnknownRootProject(ProjectId),
    #[error("none of the vulnerable versions of {0} exist in the snapshot")]
    NoVulnerableVersionInSnapshot(ProjectId),
    #[error("invalid vulnerability: {0}")]
    InvalidVulnSpec(String),
    #[error("pass budget of {0} exceeded before reaching a fixpoint")]
    PassBudgetExceeded(usize),
    #[error("cache: {0}")]
    Cache(String),
}

/// A disclosed vulnerability. Serialized as `vuln.json`:
/// `{"cve", "project", "versions": [...], "vfs": [...], "disclosed_at"}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VulnSpec {
    #[serde(rename = "cve")]
    pub cve_id: String,
    #[serde(rename = "project")]
    pub root_project: ProjectId,
    #[serde(rename = "versions")]
    pub vulnerable_versions: BTreeSet<String>,
    #[serde(rename = "vfs")]
    pub vulnerable_functions: BTreeSet<String>,
    pub disclosed_at: DateTime<Utc>,
}

/// Mutable analysis state of one project.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectState {
    /// Affected versions.
    pub tvs: BTreeSet<String>,
    /// Target functions per affected version.
    pub tfs: BTreeMap<String, BTreeSet<String>>,
    /// Reachable entry points per affected PV.
    pub eps: BTreeMap<PvId, BTreeSet<String>>,
    /// upstream PV (of this project) -> downstream PV -> calls.
    pub inter_pv_calls: BTreeMap<PvId, BTreeMap<PvId, BTreeSet<CallPair>>>,
    /// Every PV dependency record examined, before pruning.
    pub declared: BTreeSet<PvPair>,
    pub v1: BTreeSet<PvPair>,
    pub v2: BTreeSet<PvPair>,
    pub v3: BTreeSet<PvPair>,
    /// Targets handed down by upstream projects, per version of this project.
    pub incoming: BTreeMap<String, BTreeSet<String>>,
    pub pass_count: usize,
}

/// One line of `passlog.jsonl`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassRecord {
    pub pass: usize,
    pub project: ProjectId,
    pub project_pass: usize,
    pub delta_tvs: usize,
    pub delta_tfs: usize,
    pub delta_eps: usize,
    pub v1: usize,
    pub v2: usize,
    pub v3: usize,
    pub new_v1: usize,
    pub new_v2: usize,
    pub new_v3: usize,
    pub enqueued: Vec<ProjectId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PvDetail {
    pub eps: BTreeSet<String>,
    pub tfs: BTreeSet<String>,
    pub upstream: BTreeSet<PvId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffectedProject {
    pub versions: BTreeSet<String>,
    pub depth: usize,
    pub per_pv: BTreeMap<String, PvDetail>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffectedEdge {
    pub upstream: PvId,
    pub downstream: PvId,
    pub calls: BTreeSet<CallPair>,
}

/// Distinct downstream projects and PVs surviving a pruning stage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCount {
    pub p: usize,
    pub pv: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageStats {
    pub declared: StageCount,
    pub v1: StageCount,
    pub v2: StageCount,
    pub v3: StageCount,
    pub passes: usize,
    pub projects_analyzed: usize,
}

impl StageStats {
    fn from_states(states: &BTreeMap<ProjectId, ProjectState>, passes: usize) -> Self {
        let count = |pick: fn(&ProjectState) -> &BTreeSet<PvPair>| {
            let pvs: BTreeSet<&PvId> = states.values().flat_map(|s| pick(s).iter().map(|(d, _)| d)).collect();
            let ps: BTreeSet<&ProjectId> = pvs.iter().map(|p| &p.project).collect();
            StageCount { p: ps.len(), pv: pvs.len() }
        };
        StageStats {
            declared: count(|s| &s.declared),
            v1: count(|s| &s.v1),
            v2: count(|s| &s.v2),
            v3: count(|s| &s.v3),
            passes,
            projects_analyzed: states.values().filter(|s| s.pass_count > 0).count(),
        }
    }
}

/// `result.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagationResult {
    pub schema_version: u32,
    pub cve_id: String,
    pub root: ProjectId,
    pub disclosed_at: DateTime<Utc>,
    pub vulnerable_versions: BTreeSet<String>,
    pub vulnerable_functions: BTreeSet<String>,
    pub affected: BTreeMap<ProjectId, AffectedProject>,
    pub affected_edges: Vec<AffectedEdge>,
    pub stage_stats: StageStats,
    pub pass_log: Vec<PassRecord>,
    pub warnings: Vec<String>,
}

impl PropagationResult {
    pub fn affected_pvs(&self) -> BTreeSet<PvId> {
        self.affected
            .iter()
            .flat_map(|(p, a)| a.versions.iter().map(move |v| PvId { project: p.clone(), version: v.clone() }))
            .collect()
    }

    pub fn eps(&self) -> BTreeMap<PvId, BTreeSet<String>> {
        self.affected
            .iter()
            .flat_map(|(p, a)| {
                a.per_pv.iter().map(move |(v, d)| (PvId { project: p.clone(), version: v.clone() }, d.eps.clone()))
            })
            .collect()
    }

    /// Flattened `(upstream, downstream, caller, callee)` tuples.
    pub fn call_tuples(&self) -> BTreeSet<(PvId, PvId, String, String)> {
        self.affected_edges
            .iter()
            .flat_map(|e| {
                e.calls
                    .iter()
                    .map(|c| (e.upstream.clone(), e.downstream.clone(), c.caller.clone(), c.callee.clone()))
            })
            .collect()
    }

    pub fn pass_count(&self, p: &ProjectId) -> usize {
        self.pass_log.iter().filter(|r| &r.project == p).count()
    }
}

/// How the next project is chosen from the worklist. Every order reaches
/// the same fixpoint.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum WorklistOrder {
    /// First in, first out; projects enqueued by one pass go in id order.
    #[default]
    Fifo,
    /// Lowest rank first; unranked projects after ranked ones, FIFO among
    /// themselves.
    Ranked(Vec<ProjectId>),
    /// Uniformly random member, from a seeded SplitMix64 stream.
    Seeded(u64),
}

#[derive(Clone, Debug, Default)]
pub struct EngineOptions {
    pub order: WorklistOrder,
    pub jobs: Jobs,
    /// Overrides the default pass budget (see [`pass_bound`]).
    pub max_passes: Option<usize>,
}

/// Smallest per-pass batch worth handing to the thread pool.
const PAR_MIN: usize = 32;

/// Upper bound on the number of passes: every project can be processed
/// once for free, then at most once per growth of its target set.
pub fn pass_bound(s: &EcosystemSnapshot) -> usize {
    s.index
        .values()
        .map(|versions| {
            let max_fns = versions.iter().map(|v| s.pvs[v].functions.len()).max().unwrap_or(0);
            1 + versions.len() * max_fns.max(1)
        })
        .sum()
}

/// The propagation engine. Drive it with [`Engine::step`] or run it to the
/// fixpoint with [`Engine::run`].
pub struct Engine<'s> {
    snapshot: &'s EcosystemSnapshot,
    graph: &'s PDepGraph,
    vuln: VulnSpec,
    cache: ScopeCache<'s>,
    options: EngineOptions,
    rng: Option<SplitMix64>,
    states: BTreeMap<ProjectId, ProjectState>,
    worklist: VecDeque<ProjectId>,
    records: BTreeMap<(ProjectId, ProjectId), Vec<PvPair>>,
    pass_log: Vec<PassRecord>,
    warnings: Vec<String>,
    passes: usize,
    budget: usize,
}

impl<'s> Engine<'s> {
    pub fn new(
        snapshot: &'s EcosystemSnapshot,
        graph: &'s PDepGraph,
        vuln: &VulnSpec,
        options: EngineOptions,
    ) -> Result<Self, PropagationError> {
        let root = &vuln.root_project;
        if !graph.nodes.contains(root) {
            return Err(PropagationError::UnknownRootProject(root.clone()));
        }
        if vuln.vulnerable_functions.is_empty() {
            return Err(PropagationError::InvalidVulnSpec("no vulnerable functions".into()));
        }
        let mut warnings = Vec::new();
        let mut seed: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let mut present = 0usize;
        for v in &vuln.vulnerable_versions {
            let id = PvId { project: root.clone(), version: v.clone() };
            let Some(m) = snapshot.pv(&id) else {
                warnings.push(format!("vulnerable version {id} not in snapshot; dropped"));
                continue;
            };
            present += 1;
            let declared: BTreeSet<String> = vuln
                .vulnerable_functions
                .iter()
                .filter(|f| m.functions.contains_key(*f))
                .cloned()
                .collect();
            if declared.is_empty() {
                warnings.push(format!("{id} declares none of the vulnerable functions; skipped"));
                continue;
            }
            if declared.len() < vuln.vulnerable_functions.len() {
                warnings.push(format!(
                    "{id} lacks {} of the vulnerable functions",
                    vuln.vulnerable_functions.len() - declared.len()
                ));
            }
            seed.insert(v.clone(), declared);
        }
        if present == 0 {
            return Err(PropagationError::NoVulnerableVersionInSnapshot(root.clone()));
        }
        for w in &warnings {
            log::warn!("{w}");
        }

        let mut states = BTreeMap::new();
        states.insert(root.clone(), ProjectState { incoming: seed, ..Default::default() });
        let rng = match options.order {
            WorklistOrder::Seeded(s) => Some(SplitMix64::new(s)),
            _ => None,
        };
        let budget = options.max_passes.unwrap_or_else(|| pass_bound(snapshot));
        Ok(Engine {
            snapshot,
            graph,
            vuln: vuln.clone(),
            cache: ScopeCache::new(snapshot),
            options,
            rng,
            states,
            worklist: VecDeque::from([root.clone()]),
            records: BTreeMap::new(),
            pass_log: Vec::new(),
            warnings,
            passes: 0,
            budget,
        })
    }

    /// Resumes from a cache directory written by [`Engine::save`], or starts
    /// fresh when the directory holds no state.
    pub fn resume(
        snapshot: &'s EcosystemSnapshot,
        graph: &'s PDepGraph,
        vuln: &VulnSpec,
        options: EngineOptions,
        dir: &Path,
    ) -> Result<Self, PropagationError> {
        let mut engine = Engine::new(snapshot, graph, vuln, options)?;
        if let Some(saved) = cache::load(dir, &engine.fingerprint())? {
            engine.states = saved.states;
            engine.worklist = saved.worklist;
            engine.pass_log = saved.pass_log;
            engine.warnings = saved.warnings;
            engine.passes = saved.passes;
            if let Some(state) = saved.rng_state {
                engine.rng = Some(SplitMix64::new(state));
            }
        }
        Ok(engine)
    }

    /// Persists the full analysis state under `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), PropagationError> {
        cache::save(
            dir,
            &cache::Saved {
                fingerprint: self.fingerprint(),
                states: self.states.clone(),
                worklist: self.worklist.clone(),
                pass_log: self.pass_log.clone(),
                warnings: self.warnings.clone(),
                passes: self.passes,
                rng_state: self.rng.as_ref().map(SplitMix64::state),
            },
        )
    }

    fn fingerprint(&self) -> String {
        let v = &self.vuln;
        format!(
            "{}|{}|{}|{}|{}|{}",
            v.cve_id,
            v.root_project,
            v.vulnerable_versions.iter().cloned().collect::<Vec<_>>().join(","),
            v.vulnerable_functions.iter().cloned().collect::<Vec<_>>().join(","),
            self.snapshot.total_p(),
            self.snapshot.total_pv()
        )
    }

    pub fn states(&self) -> &BTreeMap<ProjectId, ProjectState> {
        &self.states
    }

    pub fn passes(&self) -> usize {
        self.passes
    }

    pub fn is_done(&self) -> bool {
        self.worklist.is_empty()
    }

    pub fn pass_log(&self) -> &[PassRecord] {
        &self.pass_log
    }

    fn pop(&mut self) -> Option<ProjectId> {
        if self.worklist.is_empty() {
            return None;
        }
        let idx = match &self.options.order {
            WorklistOrder::Fifo => 0,
            WorklistOrder::Ranked(ranks) => {
                let rank = |p: &ProjectId| ranks.iter().position(|r| r == p).unwrap_or(usize::MAX);
                // min_by_key keeps the first minimum, so ties stay FIFO
                (0..self.worklist.len()).min_by_key(|&i| rank(&self.worklist[i])).unwrap_or(0)
            }
            WorklistOrder::Seeded(_) => {
                let n = self.worklist.len();
                self.rng.as_mut().map_or(0, |r| r.below(n))
            }
        };
        self.worklist.remove(idx)
    }

    /// Runs one pass. Returns `None` once the worklist is empty.
    pub fn step(&mut self) -> Result<Option<&PassRecord>, PropagationError> {
        let Some(item) = self.pop() else {
            return Ok(None);
        };
        if self.passes >= self.budget {
            return Err(PropagationError::PassBudgetExceeded(self.budget));
        }
        self.passes += 1;
        let jobs = self.options.jobs;
        let s = self.snapshot;
        let cache = &self.cache;

        let state = self.states.entry(item.clone()).or_default();
        state.pass_count += 1;

        // 1-2: merge incoming targets, keep deltas
        let mut delta_tvs = BTreeSet::new();
        let mut delta_tfs: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (version, fns) in &state.incoming {
            if state.tvs.insert(version.clone()) {
                delta_tvs.insert(version.clone());
            }
            let known = state.tfs.entry(version.clone()).or_default();
            let fresh: BTreeSet<String> = fns.difference(known).cloned().collect();
            if !fresh.is_empty() {
                known.extend(fresh.iter().cloned());
                delta_tfs.insert(version.clone(), fresh);
            }
        }

        // entry points for every version whose targets grew
        let grown: Vec<(PvId, &BTreeSet<String>)> = delta_tfs
            .keys()
            .map(|v| (PvId { project: item.clone(), version: v.clone() }, &state.tfs[v]))
            .collect();
        let new_eps = par::map_min(jobs, PAR_MIN, &grown, |(pv, tfs)| cache.eps(pv, tfs));
        let mut delta_eps: BTreeMap<PvId, BTreeSet<String>> = BTreeMap::new();
        for ((pv, _), eps) in grown.into_iter().zip(new_eps) {
            let known = state.eps.entry(pv.clone()).or_default();
            let fresh: BTreeSet<String> = eps.difference(known).cloned().collect();
            if !fresh.is_empty() {
                known.extend(fresh.iter().cloned());
                delta_eps.insert(pv, fresh);
            }
        }

        // 3-5: candidate PV dependencies, version and import pruning
        let mut new_v1 = BTreeSet::new();
        for down in direct_downstream(self.graph, &item) {
            let recs = self
                .records
                .entry((down.clone(), item.clone()))
                .or_insert_with(|| pv_dep_records(s, down, &item));
            state.declared.extend(recs.iter().cloned());
            new_v1.extend(prune_version(recs, &delta_tvs).into_iter().filter(|p| !state.v1.contains(p)));
        }
        let v1_list: Vec<PvPair> = new_v1.iter().cloned().collect();
        let import_ok = par::map_min(jobs, PAR_MIN, &v1_list, |(down, up)| prune::imports_upstream(cache, down, up));
        let mut new_v2 = BTreeSet::new();
        for (pair, ok) in v1_list.into_iter().zip(import_ok) {
            if ok {
                new_v2.insert(pair);
            } else if let Some(m) = s.pv(&pair.0) {
                if !m.missing.is_empty() {
                    self.warnings.push(format!("{}: incomplete records {:?}; pruned", pair.0, m.missing));
                }
            }
        }
        state.v1.extend(new_v1.iter().cloned());
        state.v2.extend(new_v2.iter().cloned());

        // 6-8: call-graph pruning against the new entry points
        let mut new_v3 = BTreeSet::new();
        let mut handoff: BTreeMap<PvId, BTreeSet<String>> = BTreeMap::new();
        if !delta_eps.is_empty() {
            let candidates: Vec<&PvPair> = state.v2.iter().filter(|(_, up)| delta_eps.contains_key(up)).collect();
            let calls = par::map_min(jobs, PAR_MIN, &candidates, |(down, up)| prune::calls_into(cache, down, &delta_eps[up]));
            for ((down, up), calls) in candidates.into_iter().zip(calls) {
                if calls.is_empty() {
                    continue;
                }
                let recorded = state
                    .inter_pv_calls
                    .entry(up.clone())
                    .or_default()
                    .entry(down.clone())
                    .or_default();
                let mut fresh = false;
                for c in calls {
                    handoff.entry(down.clone()).or_default().insert(c.caller.clone());
                    fresh |= recorded.insert(c);
                }
                if fresh {
                    new_v3.insert((down.clone(), up.clone()));
                }
            }
            state.v3.extend(new_v3.iter().cloned());
        }
        debug_assert!(state.v3.is_subset(&state.v2) && state.v2.is_subset(&state.v1));

        let snapshot_record = (
            state.pass_count,
            state.v1.len(),
            state.v2.len(),
            state.v3.len(),
        );

        // 9-10: hand targets to dependents, enqueue those that grew
        let mut grew: BTreeSet<ProjectId> = BTreeSet::new();
        for (down, callers) in handoff {
            let target = self.states.entry(down.project.clone()).or_default();
            let slot = target.incoming.entry(down.version.clone()).or_default();
            let before = slot.len();
            slot.extend(callers);
            if slot.len() > before {
                grew.insert(down.project.clone());
            }
        }
        let mut enqueued = Vec::new();
        for p in grew {
            if !self.worklist.contains(&p) {
                self.worklist.push_back(p.clone());
                enqueued.push(p);
            }
        }

        self.pass_log.push(PassRecord {
            pass: self.passes,
            project: item,
            project_pass: snapshot_record.0,
            delta_tvs: delta_tvs.len(),
            delta_tfs: delta_tfs.values().map(BTreeSet::len).sum(),
            delta_eps: delta_eps.values().map(BTreeSet::len).sum(),
            v1: snapshot_record.1,
            v2: snapshot_record.2,
            v3: snapshot_record.3,
            new_v1: new_v1.len(),
            new_v2: new_v2.len(),
            new_v3: new_v3.len(),
            enqueued,
        });
        Ok(self.pass_log.last())
    }

    /// Runs passes until the worklist is empty or `limit` passes have run
    /// in this call. Returns whether the fixpoint was reached.
    pub fn run(&mut self, limit: Option<usize>) -> Result<bool, PropagationError> {
        let jobs = self.options.jobs;
        par::install(jobs, || {
            let mut ran = 0;
            while !self.is_done() {
                if limit.is_some_and(|l| ran >= l) {
                    return Ok(false);
                }
                self.step()?;
                ran += 1;
            }
            Ok(true)
        })
    }

    /// Assembles the result from the current state.
    pub fn result(&self) -> PropagationResult {
        let root = &self.vuln.root_project;
        let mut edges = Vec::new();
        for st in self.states.values() {
            for (up, downs) in &st.inter_pv_calls {
                for (down, calls) in downs {
                    edges.push(AffectedEdge { upstream: up.clone(), downstream: down.clone(), calls: calls.clone() });
                }
            }
        }
        edges.sort_by(|a, b| (&a.upstream, &a.downstream).cmp(&(&b.upstream, &b.downstream)));

        let mut upstream_of: BTreeMap<&PvId, BTreeSet<PvId>> = BTreeMap::new();
        let mut p_adj: BTreeMap<&ProjectId, BTreeSet<&ProjectId>> = BTreeMap::new();
        for e in &edges {
            upstream_of.entry(&e.downstream).or_default().insert(e.upstream.clone());
            p_adj.entry(&e.upstream.project).or_default().insert(&e.downstream.project);
        }
        let depth = project_depths(root, &p_adj);

        let mut affected = BTreeMap::new();
        for (p, st) in &self.states {
            if st.tvs.is_empty() && p != root {
                continue;
            }
            let per_pv = st
                .tvs
                .iter()
                .map(|v| {
                    let id = PvId { project: p.clone(), version: v.clone() };
                    let detail = PvDetail {
                        eps: st.eps.get(&id).cloned().unwrap_or_default(),
                        tfs: st.tfs.get(v).cloned().unwrap_or_default(),
                        upstream: upstream_of.get(&id).cloned().unwrap_or_default(),
                    };
                    (v.clone(), detail)
                })
                .collect();
            affected.insert(
                p.clone(),
                AffectedProject {
                    versions: st.tvs.clone(),
                    depth: depth.get(p).copied().unwrap_or(0),
                    per_pv,
                },
            );
        }
        affected.entry(root.clone()).or_insert_with(|| AffectedProject {
            versions: BTreeSet::new(),
            depth: 0,
            per_pv: BTreeMap::new(),
        });

        PropagationResult {
            schema_version: SCHEMA_VERSION,
            cve_id: self.vuln.cve_id.clone(),
            root: root.clone(),
            disclosed_at: self.vuln.disclosed_at,
            vulnerable_versions: self.vuln.vulnerable_versions.clone(),
            vulnerable_functions: self.vuln.vulnerable_functions.clone(),
            affected,
            affected_edges: edges,
            stage_stats: StageStats::from_states(&self.states, self.passes),
            pass_log: self.pass_log.clone(),
            warnings: self.warnings.clone(),
        }
    }
}

/// Shortest hop counts from `root` over a project adjacency.
pub(crate) fn project_depths<'a>(
    root: &'a ProjectId,
    adj: &BTreeMap<&'a ProjectId, BTreeSet<&'a ProjectId>>,
) -> BTreeMap<ProjectId, usize> {
    let mut depth: BTreeMap<ProjectId, usize> = BTreeMap::from([(root.clone(), 0)]);
    let mut queue = VecDeque::from([root]);
    while let Some(p) = queue.pop_front() {
        let d = depth[p];
        for &next in adj.get(p).into_iter().flatten() {
            if !depth.contains_key(next) {
                depth.insert(next.clone(), d + 1);
                queue.push_back(next);
            }
        }
    }
    depth
}

/// Runs the engine to its fixpoint with default options.
pub fn propagate(s: &EcosystemSnapshot, g: &PDepGraph, v: &VulnSpec) -> Result<PropagationResult, PropagationError> {
    propagate_with(s, g, v, EngineOptions::default())
}

pub fn propagate_with(
    s: &EcosystemSnapshot,
    g: &PDepGraph,
    v: &VulnSpec,
    options: EngineOptions,
) -> Result<PropagationResult, PropagationError> {
    let mut engine = Engine::new(s, g, v, options)?;
    engine.run(None)?;
    Ok(engine.result())
}
