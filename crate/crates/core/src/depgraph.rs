//! Project-level dependency graph.
//!
//! Nodes are projects; an edge `U -> D` exists when some version of `D`
//! declares a resolved dependency on some version of `U`. Edges carry only a
//! support count. Version detail stays in the snapshot and is recovered on
//! demand through [`pv_dep_records`].

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::snapshot::{EcosystemSnapshot, ProjectId, PvId};
use crate::SCHEMA_VERSION;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PDepGraph {
    pub nodes: BTreeSet<ProjectId>,
    /// upstream -> downstream dependents
    pub edges: BTreeMap<ProjectId, BTreeSet<ProjectId>>,
    pub edge_support: BTreeMap<(ProjectId, ProjectId), usize>,
    /// Projects with versions depending on other versions of themselves.
    /// Recorded but never traversed.
    pub self_loops: BTreeMap<ProjectId, usize>,
}

impl PDepGraph {
    pub fn edge_count(&self) -> usize {
        self.edge_support.len()
    }

    pub fn has_edge(&self, up: &ProjectId, down: &ProjectId) -> bool {
        self.edge_support.contains_key(&(up.clone(), down.clone()))
    }

    pub fn support(&self, up: &ProjectId, down: &ProjectId) -> usize {
        self.edge_support
            .get(&(up.clone(), down.clone()))
            .copied()
            .unwrap_or(0)
    }

    pub fn to_export(&self) -> PGraphExport {
        PGraphExport {
            schema_version: SCHEMA_VERSION,
            nodes: self.nodes.iter().cloned().collect(),
            edges: self
                .edge_support
                .iter()
                .map(|((up, down), &support)| ExportEdge {
                    upstream: up.clone(),
                    downstream: down.clone(),
                    support,
                })
                .collect(),
            self_loops: self
                .self_loops
                .iter()
                .map(|(project, &support)| ExportSelfLoop {
                    project: project.clone(),
                    support,
                })
                .collect(),
        }
    }

    pub fn from_export(e: &PGraphExport) -> Self {
        let mut g = PDepGraph {
            nodes: e.nodes.iter().cloned().collect(),
            ..Default::default()
        };
        for edge in &e.edges {
            g.edges
                .entry(edge.upstream.clone())
                .or_default()
                .insert(edge.downstream.clone());
            g.edge_support
                .insert((edge.upstream.clone(), edge.downstream.clone()), edge.support);
        }
        for l in &e.self_loops {
            g.self_loops.insert(l.project.clone(), l.support);
        }
        g
    }
}

/// `pgraph.json`: an adjacency list for external graph tooling.
///
/// ```json
/// {
///   "schema_version": 1,
///   "nodes": ["a", "b"],
///   "edges": [{"upstream": "a", "downstream": "b", "support": 2}],
///   "self_loops": [{"project": "c", "support": 1}]
/// }
/// ```
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PGraphExport {
    pub schema_version: u32,
    pub nodes: Vec<ProjectId>,
    pub edges: Vec<ExportEdge>,
    pub self_loops: Vec<ExportSelfLoop>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportEdge {
    pub upstream: ProjectId,
    pub downstream: ProjectId,
    pub support: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportSelfLoop {
    pub project: ProjectId,
    pub support: usize,
}

/// Aggregates every resolved PV-level dependency into the project graph.
pub fn build_p_graph(s: &EcosystemSnapshot) -> PDepGraph {
    let mut g = PDepGraph {
        nodes: s.index.keys().cloned().collect(),
        ..Default::default()
    };
    for id in s.pvs.keys() {
        for dep in s.resolved_deps(id) {
            let down = &id.project;
            let up = &dep.project;
            if up == down {
                *g.self_loops.entry(up.clone()).or_default() += 1;
                continue;
            }
            g.edges.entry(up.clone()).or_default().insert(down.clone());
            *g.edge_support.entry((up.clone(), down.clone())).or_default() += 1;
        }
    }
    g
}

/// Direct dependents of `p`, sorted.
pub fn direct_downstream<'g>(g: &'g PDepGraph, p: &ProjectId) -> impl Iterator<Item = &'g ProjectId> {
    g.edges.get(p).into_iter().flatten()
}

/// Every `(downstream PV, upstream PV)` pair where a version of `down`
/// declares a resolved dependency on a version of `up`.
pub fn pv_dep_records(s: &EcosystemSnapshot, down: &ProjectId, up: &ProjectId) -> Vec<(PvId, PvId)> {
    let mut out = Vec::new();
    if down == up {
        return out;
    }
    for d in s.versions(down) {
        for dep in s.resolved_deps(d) {
            if &dep.project == up {
                out.push((d.clone(), dep.clone()));
            }
        }
    }
    out.sort();
    out.dedup();
    out
}
