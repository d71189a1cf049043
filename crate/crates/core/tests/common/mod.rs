#![allow(dead_code)]

use std::collections::BTreeSet;

use chrono::{DateTime, Duration, TimeZone, Utc};
use vulnprop::snapshot::{CallEdge, FunctionDecl, PvManifest, Visibility};
use vulnprop::{EcosystemSnapshot, ProjectId, PvId, VulnSpec};

pub fn day(n: i64) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 0).unwrap() + Duration::days(n)
}

pub fn pid(s: &str) -> ProjectId {
    ProjectId::new(s)
}

pub fn pv(p: &str, v: &str) -> PvId {
    PvId::new(p, v)
}

pub fn strs(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

pub struct Pv(PvManifest);

impl Pv {
    pub fn new(p: &str, v: &str, released: i64) -> Self {
        Pv(PvManifest::new(PvId::new(p, v), day(released)))
    }

    fn declare(mut self, fqn: &str, file: &str, visibility: Visibility) -> Self {
        self.0.files.insert(file.into());
        self.0.functions.insert(fqn.into(), FunctionDecl { fqn: fqn.into(), file: file.into(), visibility });
        self
    }

    pub fn public(self, fqn: &str, file: &str) -> Self {
        self.declare(fqn, file, Visibility::Public)
    }

    pub fn internal(self, fqn: &str, file: &str) -> Self {
        self.declare(fqn, file, Visibility::Internal)
    }

    pub fn file(mut self, file: &str) -> Self {
        self.0.files.insert(file.into());
        self
    }

    pub fn call(mut self, caller: &str, callee: &str) -> Self {
        self.0.calls.push(CallEdge { caller: caller.into(), callee: callee.into() });
        self
    }

    pub fn dep(mut self, p: &str, v: &str) -> Self {
        self.0.deps.push(PvId::new(p, v));
        self
    }

    pub fn import(mut self, file: &str) -> Self {
        self.0.imports.insert(file.into());
        self
    }

    pub fn build(mut self) -> PvManifest {
        self.0.calls.sort();
        self.0.calls.dedup();
        self.0
    }
}

pub fn snapshot(name: &str, pvs: Vec<Pv>) -> EcosystemSnapshot {
    EcosystemSnapshot::from_manifests(name, pvs.into_iter().map(Pv::build)).unwrap()
}

pub fn vuln(project: &str, versions: &[&str], vfs: &[&str], disclosed: i64) -> VulnSpec {
    VulnSpec {
        cve_id: format!("CVE-TEST-{project}"),
        root_project: pid(project),
        vulnerable_versions: strs(versions),
        vulnerable_functions: strs(vfs),
        disclosed_at: day(disclosed),
    }
}

/// A <- B, A <- C, B <- C. `B.wrap` calls `A.api`; `C.c1` calls `A.api`
/// and `C.c2` calls `B.wrap`. `A@2` is patched.
pub fn diamond() -> (EcosystemSnapshot, VulnSpec) {
    let a = |v: &str, vulnerable: bool| {
        let p = Pv::new("A", v, if vulnerable { 0 } else { 40 }).public("A.api", "a/A.src");
        if vulnerable {
            p.internal("A.vf", "a/A.src").call("A.api", "A.vf")
        } else {
            p
        }
    };
    let s = snapshot(
        "diamond",
        vec![
            a("1", true),
            a("2", false),
            Pv::new("B", "1", 5)
                .public("B.wrap", "b/B.src")
                .call("B.wrap", "A.api")
                .dep("A", "1")
                .import("a/A.src"),
            Pv::new("C", "1", 10)
                .public("C.c1", "c/C.src")
                .public("C.c2", "c/C.src")
                .call("C.c1", "A.api")
                .call("C.c2", "B.wrap")
                .dep("A", "1")
                .dep("B", "1")
                .import("a/A.src")
                .import("b/B.src"),
        ],
    );
    (s, vuln("A", &["1"], &["A.vf"], 20))
}

/// P and Q depend on each other; only Q calls into P.
pub fn two_cycle() -> (EcosystemSnapshot, VulnSpec) {
    let s = snapshot(
        "cycle",
        vec![
            Pv::new("P", "1", 0)
                .public("P.api", "p/P.src")
                .internal("P.vf", "p/P.src")
                .call("P.api", "P.vf")
                .dep("Q", "1"),
            Pv::new("Q", "1", 1)
                .public("Q.use", "q/Q.src")
                .call("Q.use", "P.api")
                .dep("P", "1")
                .import("p/P.src"),
        ],
    );
    (s, vuln("P", &["1"], &["P.vf"], 2))
}

/// `F@1` bundles the files of its direct dep `L1@1` and of `L1`'s dep `L2@1`.
pub fn fat_package() -> EcosystemSnapshot {
    snapshot(
        "fat",
        vec![
            Pv::new("F", "1", 2)
                .public("F.main", "f/Main.src")
                .internal("F.util", "f/Util.src")
                .public("L1.api", "l1/L1.src")
                .public("L2.api", "l2/L2.src")
                .dep("L1", "1"),
            Pv::new("L1", "1", 1).public("L1.api", "l1/L1.src").dep("L2", "1"),
            Pv::new("L2", "1", 0).public("L2.api", "l2/L2.src"),
        ],
    )
}

/// Root `R@1` (day 0, disclosed day 10). `D1` joins on day 5, `D3` on day
/// 25, `D2` on day 55, each calling `R.api`. `U` never depends on `R`, and
/// 20000 unrelated single-version projects keep the ratios realistic.
pub fn timed() -> (EcosystemSnapshot, VulnSpec) {
    let downstream = |p: &str, released: i64| {
        Pv::new(p, "1", released)
            .public(&format!("{p}.run"), &format!("{p}/Main.src"))
            .call(&format!("{p}.run"), "R.api")
            .dep("R", "1")
            .import("r/R.src")
    };
    let mut pvs = vec![
        Pv::new("R", "1", 0).public("R.api", "r/R.src").internal("R.vf", "r/R.src").call("R.api", "R.vf"),
        Pv::new("U", "1", 0).public("U.main", "u/U.src"),
        Pv::new("U", "2", 30).public("U.main", "u/U.src"),
        downstream("D1", 5),
        downstream("D3", 25),
        downstream("D2", 55),
    ];
    pvs.extend((0..20_000).map(|i| Pv::new(&format!("filler{i:05}"), "1", 0)));
    let s = snapshot("timed", pvs);
    (s, vuln("R", &["1"], &["R.vf"], 10))
}
