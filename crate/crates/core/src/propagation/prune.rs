//! The three pruning levels applied to candidate `(downstream, upstream)`
//! PV dependency pairs.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::scope::ScopeCache;
use crate::snapshot::{EcosystemSnapshot, PvId};

/// `(downstream PV, upstream PV)`.
pub type PvPair = (PvId, PvId);

/// A downstream function calling an upstream entry point.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CallPair {
    pub caller: String,
    pub callee: String,
}

/// Level 1: keep pairs whose upstream version is a newly affected version.
pub fn prune_version(records: &[PvPair], delta_tvs: &BTreeSet<String>) -> BTreeSet<PvPair> {
    records
        .iter()
        .filter(|(_, up)| delta_tvs.contains(&up.version))
        .cloned()
        .collect()
}

/// Level 2 check for one pair: the downstream imports at least one file of
/// the upstream's intrinsic scope (downstream imports that are the
/// downstream's own intrinsic files do not count).
pub fn imports_upstream(cache: &ScopeCache<'_>, down: &PvId, up: &PvId) -> bool {
    let d = cache.facts(down);
    let u = cache.facts(up);
    d.external_imports.iter().any(|f| u.intrinsic.contains(f))
}

/// Level 3 check for one pair: calls from intrinsic downstream functions
/// into the given upstream entry points.
pub fn calls_into(cache: &ScopeCache<'_>, down: &PvId, eps: &BTreeSet<String>) -> BTreeSet<CallPair> {
    let d = cache.facts(down);
    let mut out = BTreeSet::new();
    // iterate the smaller side
    if eps.len() <= d.intrinsic_calls_to.len() {
        for ep in eps {
            if let Some(callers) = d.intrinsic_calls_to.get(ep) {
                out.extend(callers.iter().map(|c| CallPair {
                    caller: c.clone(),
                    callee: ep.clone(),
                }));
            }
        }
    } else {
        for (callee, callers) in &d.intrinsic_calls_to {
            if eps.contains(callee) {
                out.extend(callers.iter().map(|c| CallPair {
                    caller: c.clone(),
                    callee: callee.clone(),
                }));
            }
        }
    }
    out
}

pub fn prune_import(v1: &BTreeSet<PvPair>, s: &EcosystemSnapshot) -> BTreeSet<PvPair> {
    let cache = ScopeCache::new(s);
    v1.iter()
        .filter(|(down, up)| imports_upstream(&cache, down, up))
        .cloned()
        .collect()
}

/// Level 3 over a pair set. Returns the surviving pairs and, per
/// downstream PV, the calling functions (the downstream's new targets).
pub fn prune_cg(
    v2: &BTreeSet<PvPair>,
    delta_eps: &BTreeMap<PvId, BTreeSet<String>>,
    s: &EcosystemSnapshot,
) -> (BTreeSet<PvPair>, BTreeMap<PvId, BTreeSet<String>>) {
    let cache = ScopeCache::new(s);
    let mut kept = BTreeSet::new();
    let mut tfs: BTreeMap<PvId, BTreeSet<String>> = BTreeMap::new();
    for (down, up) in v2 {
        let Some(eps) = delta_eps.get(up) else { continue };
        let calls = calls_into(&cache, down, eps);
        if !calls.is_empty() {
            kept.insert((down.clone(), up.clone()));
            tfs.entry(down.clone())
                .or_default()
                .extend(calls.into_iter().map(|c| c.caller));
        }
    }
    (kept, tfs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snapshot::{CallEdge, FunctionDecl, PvManifest, Visibility};
    use chrono::{TimeZone, Utc};

    fn pv(p: &str, v: &str) -> PvManifest {
        PvManifest::new(PvId::new(p, v), Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap())
    }

    fn f(m: &mut PvManifest, fqn: &str, file: &str) {
        m.files.insert(file.into());
        m.functions.insert(
            fqn.into(),
            FunctionDecl { fqn: fqn.into(), file: file.into(), visibility: Visibility::Public },
        );
    }

    fn strs(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    /// A@1 and A@2 ship `a.src` with `api`; B@1 -> A@1 imports and calls,
    /// B@2 -> A@2 imports without calling, B@3 -> A@2 imports nothing.
    fn fixture() -> EcosystemSnapshot {
        let mut out = Vec::new();
        for v in ["1", "2"] {
            let mut a = pv("A", v);
            f(&mut a, "api", "a.src");
            out.push(a);
        }
        let mut b1 = pv("B", "1");
        f(&mut b1, "use", "b.src");
        b1.deps = vec![PvId::new("A", "1")];
        b1.imports = strs(&["a.src"]);
        b1.calls = vec![CallEdge { caller: "use".into(), callee: "api".into() }];
        let mut b2 = pv("B", "2");
        f(&mut b2, "idle", "b.src");
        b2.deps = vec![PvId::new("A", "2")];
        b2.imports = strs(&["a.src"]);
        let mut b3 = pv("B", "3");
        f(&mut b3, "idle", "b.src");
        b3.deps = vec![PvId::new("A", "2")];
        out.extend([b1, b2, b3]);
        EcosystemSnapshot::from_manifests("p", out).unwrap()
    }

    fn records() -> Vec<PvPair> {
        vec![
            (PvId::new("B", "1"), PvId::new("A", "1")),
            (PvId::new("B", "2"), PvId::new("A", "2")),
            (PvId::new("B", "3"), PvId::new("A", "2")),
        ]
    }

    #[test]
    fn version_level() {
        let recs = records();
        assert!(prune_version(&recs, &BTreeSet::new()).is_empty());
        let v1 = prune_version(&recs, &strs(&["2"]));
        assert_eq!(v1.len(), 2);
        assert!(v1.iter().all(|(_, up)| up.version == "2"));
        let all = prune_version(&recs, &strs(&["1", "2"]));
        assert_eq!(all, recs.iter().cloned().collect());
    }

    #[test]
    fn import_level() {
        let s = fixture();
        let v1: BTreeSet<_> = records().into_iter().collect();
        let v2 = prune_import(&v1, &s);
        assert!(!v2.contains(&(PvId::new("B", "3"), PvId::new("A", "2"))));
        assert_eq!(v2.len(), 2);
        assert!(prune_import(&BTreeSet::new(), &s).is_empty());
    }

    #[test]
    fn cg_level() {
        let s = fixture();
        let v2: BTreeSet<_> = records().into_iter().take(2).collect();
        let eps = BTreeMap::from([
            (PvId::new("A", "1"), strs(&["api"])),
            (PvId::new("A", "2"), strs(&["api"])),
        ]);
        let (v3, tfs) = prune_cg(&v2, &eps, &s);
        assert_eq!(v3, BTreeSet::from([(PvId::new("B", "1"), PvId::new("A", "1"))]));
        assert_eq!(tfs[&PvId::new("B", "1")], strs(&["use"]));

        let only_a2 = BTreeMap::from([(PvId::new("A", "2"), strs(&["api"]))]);
        let (v3, _) = prune_cg(&v2, &only_a2, &s);
        assert!(v3.is_empty());
    }
}
