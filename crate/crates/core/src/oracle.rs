//! Brute-force reference for propagation.
//!
//! Materializes one global graph whose nodes are `(PV, function)` pairs,
//! with every intra-PV call edge plus every admissible cross-PV call edge,
//! and runs a single backward reachability from the vulnerable functions.
//! Shares no scope, import or pruning code with [`crate::propagation`].

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::propagation::{AffectedProject, PropagationResult, PvDetail, VulnSpec};
use crate::snapshot::{EcosystemSnapshot, ProjectId, PvId};
use crate::SCHEMA_VERSION;

pub const DEFAULT_NODE_CAP: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("global function graph has {nodes} nodes, above the cap of {cap}")]
    GraphTooLarge { nodes: usize, cap: usize },
}

/// `(upstream, downstream, caller, callee)`.
pub type CallTuple = (PvId, PvId, String, String);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleOutput {
    pub schema_version: u32,
    pub affected: BTreeSet<PvId>,
    pub eps: BTreeMap<PvId, BTreeSet<String>>,
    pub calls: BTreeSet<CallTuple>,
}

impl OracleOutput {
    /// Projects the output onto the result's `affected` map layout
    /// (`oracle.json`).
    pub fn affected_map(&self, root: &ProjectId) -> BTreeMap<ProjectId, AffectedProject> {
        let mut up_of: BTreeMap<&PvId, BTreeSet<PvId>> = BTreeMap::new();
        let mut next: BTreeMap<&ProjectId, BTreeSet<&ProjectId>> = BTreeMap::new();
        for (u, d, _, _) in &self.calls {
            up_of.entry(d).or_default().insert(u.clone());
            next.entry(&u.project).or_default().insert(&d.project);
        }
        let mut depth: BTreeMap<&ProjectId, usize> = BTreeMap::from([(root, 0)]);
        let mut frontier = vec![root];
        let mut level = 0;
        while !frontier.is_empty() {
            level += 1;
            let mut fresh = Vec::new();
            for p in frontier {
                for &n in next.get(p).into_iter().flatten() {
                    if !depth.contains_key(n) {
                        depth.insert(n, level);
                        fresh.push(n);
                    }
                }
            }
            frontier = fresh;
        }
        let mut out: BTreeMap<ProjectId, AffectedProject> = BTreeMap::new();
        for pv in &self.affected {
            let entry = out.entry(pv.project.clone()).or_insert_with(|| AffectedProject {
                versions: BTreeSet::new(),
                depth: depth.get(&pv.project).copied().unwrap_or(0),
                per_pv: BTreeMap::new(),
            });
            entry.versions.insert(pv.version.clone());
            entry.per_pv.insert(
                pv.version.clone(),
                PvDetail {
                    eps: self.eps.get(pv).cloned().unwrap_or_default(),
                    tfs: BTreeSet::new(),
                    upstream: up_of.get(pv).cloned().unwrap_or_default(),
                },
            );
        }
        out
    }
}

/// Files of `pv` not shipped by any other project `pv` transitively
/// depends on.
fn own_files(s: &EcosystemSnapshot, pv: &PvId) -> HashSet<String> {
    let mut visited: HashSet<&PvId> = HashSet::new();
    let mut stack: Vec<&PvId> = s.pvs[pv].deps.iter().collect();
    let mut shipped: HashSet<&str> = HashSet::new();
    while let Some(d) = stack.pop() {
        if d == pv || !visited.insert(d) {
            continue;
        }
        if let Some(m) = s.pvs.get(d) {
            if d.project != pv.project {
                shipped.extend(m.files.iter().map(String::as_str));
            }
            stack.extend(m.deps.iter());
        }
    }
    s.pvs[pv].files.iter().filter(|f| !shipped.contains(f.as_str())).cloned().collect()
}

pub fn oracle_propagate(s: &EcosystemSnapshot, v: &VulnSpec) -> Result<OracleOutput, OracleError> {
    oracle_propagate_capped(s, v, DEFAULT_NODE_CAP)
}

pub fn oracle_propagate_capped(s: &EcosystemSnapshot, v: &VulnSpec, cap: usize) -> Result<OracleOutput, OracleError> {
    let nodes: usize = s.pvs.values().map(|m| m.functions.len()).sum();
    if nodes > cap {
        return Err(OracleError::GraphTooLarge { nodes, cap });
    }

    let own: HashMap<&PvId, HashSet<String>> = s.pvs.keys().map(|k| (k, own_files(s, k))).collect();
    let is_own = |pv: &PvId, fqn: &str| {
        s.pvs[pv].functions.get(fqn).is_some_and(|d| own[pv].contains(&d.file))
    };
    let is_public = |pv: &PvId, fqn: &str| s.pvs[pv].functions.get(fqn).is_some_and(|d| d.is_public());

    // reverse adjacency: callee node -> caller nodes
    type Node = (PvId, String);
    let mut rev: HashMap<Node, Vec<Node>> = HashMap::new();
    // cross edges, remembered for reporting
    let mut cross: Vec<(Node, Node)> = Vec::new();
    for (id, m) in &s.pvs {
        for c in &m.calls {
            if !m.functions.contains_key(&c.caller) {
                continue;
            }
            let from = (id.clone(), c.caller.clone());
            if m.functions.contains_key(&c.callee) {
                rev.entry((id.clone(), c.callee.clone())).or_default().push(from.clone());
            }
            if !is_own(id, &c.caller) {
                continue;
            }
            for dep in &m.deps {
                if dep.project == id.project || !s.pvs.contains_key(dep) {
                    continue;
                }
                if !is_public(dep, &c.callee) || !is_own(dep, &c.callee) {
                    continue;
                }
                let imports_dep = m.imports.iter().any(|f| !own[id].contains(f) && own[dep].contains(f));
                if !imports_dep {
                    continue;
                }
                let to = (dep.clone(), c.callee.clone());
                rev.entry(to.clone()).or_default().push(from.clone());
                cross.push((from.clone(), to));
            }
        }
    }

    let mut seeds: Vec<Node> = Vec::new();
    for ver in &v.vulnerable_versions {
        let id = PvId { project: v.root_project.clone(), version: ver.clone() };
        if let Some(m) = s.pvs.get(&id) {
            for f in &v.vulnerable_functions {
                if m.functions.contains_key(f) {
                    seeds.push((id.clone(), f.clone()));
                }
            }
        }
    }

    let mut reach: HashSet<Node> = HashSet::new();
    let mut stack = seeds.clone();
    while let Some(n) = stack.pop() {
        if !reach.insert(n.clone()) {
            continue;
        }
        if let Some(callers) = rev.get(&n) {
            stack.extend(callers.iter().filter(|c| !reach.contains(*c)).cloned());
        }
    }

    let mut affected: BTreeSet<PvId> = seeds.iter().map(|(pv, _)| pv.clone()).collect();
    let mut eps: BTreeMap<PvId, BTreeSet<String>> = BTreeMap::new();
    for (pv, f) in &reach {
        if is_own(pv, f) {
            affected.insert(pv.clone());
            if is_public(pv, f) {
                eps.entry(pv.clone()).or_default().insert(f.clone());
            }
        }
    }
    for pv in &affected {
        eps.entry(pv.clone()).or_default();
    }
    let calls = cross
        .into_iter()
        .filter(|(_, to)| reach.contains(to))
        .map(|((d, caller), (u, callee))| (u, d, caller, callee))
        .collect();
    Ok(OracleOutput { schema_version: SCHEMA_VERSION, affected, eps, calls })
}

/// Differences between the engine and the oracle, empty when they agree.
pub fn compare(r: &PropagationResult, o: &OracleOutput) -> Vec<String> {
    let mut diffs = Vec::new();
    let got = r.affected_pvs();
    for pv in got.difference(&o.affected) {
        diffs.push(format!("engine-only affected PV {pv}"));
    }
    for pv in o.affected.difference(&got) {
        diffs.push(format!("oracle-only affected PV {pv}"));
    }
    let got_eps = r.eps();
    for pv in got.intersection(&o.affected) {
        let a = got_eps.get(pv).cloned().unwrap_or_default();
        let b = o.eps.get(pv).cloned().unwrap_or_default();
        if a != b {
            diffs.push(format!("EPs of {pv}: engine {a:?}, oracle {b:?}"));
        }
    }
    let calls = r.call_tuples();
    for c in calls.difference(&o.calls) {
        diffs.push(format!("engine-only call {} -> {}: {} -> {}", c.1, c.0, c.2, c.3));
    }
    for c in o.calls.difference(&calls) {
        diffs.push(format!("oracle-only call {} -> {}: {} -> {}", c.1, c.0, c.2, c.3));
    }
    diffs
}
