//! Intrinsic scope and entry-point computation for single project-versions.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::sync::OnceLock;

use crate::snapshot::{EcosystemSnapshot, PvId};

/// Files shipped by `pv` minus every file shipped by a PV in the transitive
/// closure of its resolved dependencies. PVs of the same project reached
/// through a dependency cycle are walked through but never count as bundled
/// content.
pub fn intrinsic_scope(s: &EcosystemSnapshot, pv: &PvId) -> BTreeSet<String> {
    let Some(m) = s.pv(pv) else {
        return BTreeSet::new();
    };
    let mut seen: BTreeSet<&PvId> = BTreeSet::from([pv]);
    let mut queue: VecDeque<&PvId> = s.resolved_deps(pv).collect();
    let mut down: BTreeSet<&str> = BTreeSet::new();
    while let Some(d) = queue.pop_front() {
        if !seen.insert(d) {
            continue;
        }
        if d.project != pv.project {
            down.extend(s.pvs[d].files.iter().map(String::as_str));
        }
        queue.extend(s.resolved_deps(d).filter(|x| !seen.contains(x)));
    }
    m.files
        .iter()
        .filter(|f| !down.contains(f.as_str()))
        .cloned()
        .collect()
}

/// Derived, immutable facts about one PV used across passes.
#[derive(Debug, Default)]
pub struct PvFacts {
    pub intrinsic: BTreeSet<String>,
    /// Intra-PV reverse call graph: callee -> callers, both declared here.
    pub callers_of: BTreeMap<String, BTreeSet<String>>,
    /// Outgoing calls from intrinsic callers, keyed by callee (which may live
    /// in another PV).
    pub intrinsic_calls_to: BTreeMap<String, BTreeSet<String>>,
    /// `imports` minus the PV's own intrinsic files.
    pub external_imports: BTreeSet<String>,
}

impl PvFacts {
    pub fn build(s: &EcosystemSnapshot, pv: &PvId) -> Self {
        Self::with_scope(s, pv, intrinsic_scope(s, pv))
    }

    fn with_scope(s: &EcosystemSnapshot, pv: &PvId, intrinsic: BTreeSet<String>) -> Self {
        let Some(m) = s.pv(pv) else {
            return PvFacts::default();
        };
        let mut callers_of: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let mut intrinsic_calls_to: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for c in &m.calls {
            let Some(caller) = m.function(&c.caller) else {
                continue;
            };
            if m.functions.contains_key(&c.callee) {
                callers_of.entry(c.callee.clone()).or_default().insert(c.caller.clone());
            }
            if intrinsic.contains(&caller.file) {
                intrinsic_calls_to
                    .entry(c.callee.clone())
                    .or_default()
                    .insert(c.caller.clone());
            }
        }
        let external_imports = m.imports.difference(&intrinsic).cloned().collect();
        PvFacts {
            intrinsic,
            callers_of,
            intrinsic_calls_to,
            external_imports,
        }
    }
}

/// Resolved dependency graph over dense indices, plus the PVs shipping each
/// file. Computes the same scope as [`intrinsic_scope`] but only walks the
/// closure of a PV when another project ships one of its files, and stops
/// as soon as every such shipper has been reached.
struct ShipIndex<'s> {
    ids: Vec<&'s PvId>,
    pos: HashMap<&'s PvId, usize>,
    deps: Vec<Vec<usize>>,
    shippers: HashMap<&'s str, Vec<usize>>,
}

impl<'s> ShipIndex<'s> {
    fn new(s: &'s EcosystemSnapshot) -> Self {
        let ids: Vec<&PvId> = s.pvs.keys().collect();
        let pos: HashMap<&PvId, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        let deps = ids.iter().map(|id| s.resolved_deps(id).map(|d| pos[d]).collect()).collect();
        let mut shippers: HashMap<&str, Vec<usize>> = HashMap::new();
        for (i, id) in ids.iter().enumerate() {
            for f in &s.pvs[*id].files {
                shippers.entry(f.as_str()).or_default().push(i);
            }
        }
        ShipIndex { ids, pos, deps, shippers }
    }

    fn intrinsic(&self, s: &EcosystemSnapshot, pv: &PvId) -> BTreeSet<String> {
        let Some(&me) = self.pos.get(pv) else {
            return BTreeSet::new();
        };
        let files = &s.pvs[pv].files;
        let mut contested: Vec<(&str, Vec<usize>)> = Vec::new();
        for f in files {
            let others: Vec<usize> =
                self.shippers[f.as_str()].iter().copied().filter(|&j| self.ids[j].project != pv.project).collect();
            if !others.is_empty() {
                contested.push((f, others));
            }
        }
        if contested.is_empty() {
            return files.clone();
        }

        let mut targets: HashSet<usize> = contested.iter().flat_map(|(_, o)| o.iter().copied()).collect();
        let mut reached: HashSet<usize> = HashSet::new();
        let mut seen = vec![false; self.ids.len()];
        seen[me] = true;
        let mut stack = self.deps[me].clone();
        while let Some(d) = stack.pop() {
            if std::mem::replace(&mut seen[d], true) {
                continue;
            }
            if targets.remove(&d) {
                reached.insert(d);
                if targets.is_empty() {
                    break;
                }
            }
            stack.extend(self.deps[d].iter().copied().filter(|&x| !seen[x]));
        }
        let stripped: HashSet<&str> = contested
            .into_iter()
            .filter(|(_, o)| o.iter().any(|j| reached.contains(j)))
            .map(|(f, _)| f)
            .collect();
        files.iter().filter(|f| !stripped.contains(f.as_str())).cloned().collect()
    }
}

/// Lazily computed [`PvFacts`] for every PV of a snapshot. Safe to share
/// across threads.
pub struct ScopeCache<'s> {
    snapshot: &'s EcosystemSnapshot,
    index: ShipIndex<'s>,
    cells: BTreeMap<&'s PvId, OnceLock<PvFacts>>,
    empty: PvFacts,
}

impl<'s> ScopeCache<'s> {
    pub fn new(snapshot: &'s EcosystemSnapshot) -> Self {
        ScopeCache {
            snapshot,
            index: ShipIndex::new(snapshot),
            cells: snapshot.pvs.keys().map(|k| (k, OnceLock::new())).collect(),
            empty: PvFacts::default(),
        }
    }

    pub fn snapshot(&self) -> &'s EcosystemSnapshot {
        self.snapshot
    }

    pub fn facts(&self, pv: &PvId) -> &PvFacts {
        match self.cells.get(pv) {
            Some(cell) => cell.get_or_init(|| {
                PvFacts::with_scope(self.snapshot, pv, self.index.intrinsic(self.snapshot, pv))
            }),
            None => &self.empty,
        }
    }

    /// Public, intrinsic functions of `pv` from which some member of `tfs`
    /// is reachable over intra-PV call edges. Undeclared `tfs` are ignored.
    pub fn eps(&self, pv: &PvId, tfs: &BTreeSet<String>) -> BTreeSet<String> {
        let Some(m) = self.snapshot.pv(pv) else {
            return BTreeSet::new();
        };
        let facts = self.facts(pv);
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        let mut queue: VecDeque<&str> = tfs
            .iter()
            .filter(|t| m.functions.contains_key(*t))
            .map(String::as_str)
            .collect();
        while let Some(f) = queue.pop_front() {
            if !seen.insert(f) {
                continue;
            }
            if let Some(callers) = facts.callers_of.get(f) {
                queue.extend(callers.iter().map(String::as_str).filter(|c| !seen.contains(c)));
            }
        }
        seen.into_iter()
            .filter_map(|f| m.function(f))
            .filter(|d| d.is_public() && facts.intrinsic.contains(&d.file))
            .map(|d| d.fqn.clone())
            .collect()
    }
}

/// Entry points of `pv` that reach any of `tfs`. Members of `tfs` that
/// the PV does not declare are dropped with a warning.
pub fn compute_eps(s: &EcosystemSnapshot, pv: &PvId, tfs: &BTreeSet<String>) -> BTreeSet<String> {
    if let Some(m) = s.pv(pv) {
        for t in tfs.iter().filter(|t| !m.functions.contains_key(*t)) {
            log::warn!("{pv}: target function {t} is not declared; ignored");
        }
    }
    ScopeCache::new(s).eps(pv, tfs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snapshot::{CallEdge, FunctionDecl, PvManifest, Visibility};
    use chrono::{TimeZone, Utc};

    fn pv(p: &str, v: &str) -> PvManifest {
        PvManifest::new(PvId::new(p, v), Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap())
    }

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    fn with_fn(m: &mut PvManifest, fqn: &str, file: &str, public: bool) {
        m.files.insert(file.into());
        m.functions.insert(
            fqn.into(),
            FunctionDecl {
                fqn: fqn.into(),
                file: file.into(),
                visibility: if public { Visibility::Public } else { Visibility::Internal },
            },
        );
    }

    #[test]
    fn no_deps_keeps_all_files() {
        let mut a = pv("A", "1");
        a.files = set(&["a", "b"]);
        let s = EcosystemSnapshot::from_manifests("t", vec![a]).unwrap();
        assert_eq!(intrinsic_scope(&s, &PvId::new("A", "1")), set(&["a", "b"]));
    }

    #[test]
    fn fat_package_loses_direct_and_transitive_bundles() {
        let mut fat = pv("F", "1");
        fat.files = set(&["a", "b", "lib1", "lib2"]);
        fat.deps = vec![PvId::new("L1", "1")];
        let mut l1 = pv("L1", "1");
        l1.files = set(&["lib1"]);
        l1.deps = vec![PvId::new("L2", "1")];
        let mut l2 = pv("L2", "1");
        l2.files = set(&["lib2"]);
        let s = EcosystemSnapshot::from_manifests("t", vec![fat, l1, l2]).unwrap();
        assert_eq!(intrinsic_scope(&s, &PvId::new("F", "1")), set(&["a", "b"]));
    }

    #[test]
    fn cycle_does_not_remove_own_files() {
        let mut a = pv("A", "1");
        a.files = set(&["a"]);
        a.deps = vec![PvId::new("B", "1")];
        let mut b = pv("B", "1");
        b.files = set(&["b"]);
        b.deps = vec![PvId::new("A", "1")];
        let s = EcosystemSnapshot::from_manifests("t", vec![a, b]).unwrap();
        assert_eq!(intrinsic_scope(&s, &PvId::new("A", "1")), set(&["a"]));
    }

    #[test]
    fn cycle_through_other_version_keeps_own_files() {
        let mut a1 = pv("A", "1");
        a1.files = set(&["a"]);
        a1.deps = vec![PvId::new("B", "1")];
        let mut b = pv("B", "1");
        b.files = set(&["b", "c"]);
        b.deps = vec![PvId::new("A", "2")];
        let mut a2 = pv("A", "2");
        a2.files = set(&["a", "c"]);
        let s = EcosystemSnapshot::from_manifests("t", vec![a1, a2, b]).unwrap();
        assert_eq!(intrinsic_scope(&s, &PvId::new("A", "1")), set(&["a"]));
        assert_eq!(intrinsic_scope(&s, &PvId::new("B", "1")), set(&["b"]));
    }

    #[test]
    fn eps_follow_backward_bfs_to_public_functions() {
        let mut a = pv("A", "1");
        with_fn(&mut a, "A", "x", true);
        with_fn(&mut a, "B", "x", false);
        with_fn(&mut a, "C", "x", false);
        with_fn(&mut a, "Lone", "x", true);
        a.calls = vec![
            CallEdge { caller: "A".into(), callee: "B".into() },
            CallEdge { caller: "B".into(), callee: "C".into() },
        ];
        let s = EcosystemSnapshot::from_manifests("t", vec![a]).unwrap();
        let id = PvId::new("A", "1");
        assert!(compute_eps(&s, &id, &BTreeSet::new()).is_empty());
        assert_eq!(compute_eps(&s, &id, &set(&["C"])), set(&["A"]));
        assert_eq!(compute_eps(&s, &id, &set(&["Lone"])), set(&["Lone"]));
        assert_eq!(compute_eps(&s, &id, &set(&["Ghost"])), BTreeSet::new());
    }

    #[test]
    fn bundled_public_functions_are_not_entry_points() {
        let mut fat = pv("F", "1");
        with_fn(&mut fat, "F.api", "own", true);
        with_fn(&mut fat, "L.api", "lib", true);
        fat.calls = vec![CallEdge { caller: "F.api".into(), callee: "L.api".into() }];
        fat.deps = vec![PvId::new("L", "1")];
        let mut l = pv("L", "1");
        with_fn(&mut l, "L.api", "lib", true);
        let s = EcosystemSnapshot::from_manifests("t", vec![fat, l]).unwrap();
        assert_eq!(compute_eps(&s, &PvId::new("F", "1"), &set(&["L.api"])), set(&["F.api"]));
    }
}
