//! On-disk ecosystem snapshots.
//!
//! A snapshot directory holds an `index.json` listing every project-version
//! with its release time, plus one `pv/<project>/<version>/` directory per
//! entry carrying `deps.json`, `files.json`, `imports.json`,
//! `functions.json` and `calls.json`. Project and version path components
//! are percent-encoded (`%`, `/` and `:`).
//!
//! Per-PV record files that are absent are read as empty and reported as
//! `missing_record` warnings by [`validate_snapshot`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, Utc};
use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, CONTROLS};
use serde::de::{self, DeserializeOwned};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

const PATH_ENCODE: &AsciiSet = &CONTROLS.add(b'%').add(b'/').add(b':').add(b'\\');

/// Encodes one path component of the snapshot layout.
pub fn encode_component(raw: &str) -> String {
    utf8_percent_encode(raw, PATH_ENCODE).to_string()
}

pub fn decode_component(encoded: &str) -> String {
    percent_decode_str(encoded).decode_utf8_lossy().into_owned()
}

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("missing index: {0}")]
    MissingIndex(PathBuf),
    #[error("malformed record in {path} at line {line}: {message}")]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("duplicate project-version {0}")]
    DuplicatePv(PvId),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Project identifier, opaque to the engine (`group:artifact` for Maven).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProjectId(String);

impl ProjectId {
    pub fn new(id: impl Into<String>) -> Self {
        ProjectId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ProjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for ProjectId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl From<&str> for ProjectId {
    fn from(s: &str) -> Self {
        ProjectId(s.to_owned())
    }
}

/// A project-version. Serialized as `project@version`; versions may not
/// contain `@` so the split at the last `@` is unambiguous.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PvId {
    pub project: ProjectId,
    pub version: String,
}

impl PvId {
    pub fn new(project: impl Into<String>, version: impl Into<String>) -> Self {
        PvId {
            project: ProjectId::new(project),
            version: version.into(),
        }
    }
}

impl fmt::Display for PvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.project, self.version)
    }
}

#[derive(Debug, Error)]
#[error("invalid project-version `{0}`, expected project@version")]
pub struct ParsePvIdError(String);

impl FromStr for PvId {
    type Err = ParsePvIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.rsplit_once('@') {
            Some((p, v)) if !p.is_empty() && !v.is_empty() => Ok(PvId::new(p, v)),
            _ => Err(ParsePvIdError(s.to_owned())),
        }
    }
}

impl Serialize for PvId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PvId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    Public,
    Internal,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionDecl {
    pub fqn: String,
    pub file: String,
    pub visibility: Visibility,
}

impl FunctionDecl {
    pub fn is_public(&self) -> bool {
        self.visibility == Visibility::Public
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CallEdge {
    pub caller: String,
    pub callee: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PvManifest {
    pub id: PvId,
    pub released_at: DateTime<Utc>,
    pub deps: Vec<PvId>,
    pub files: BTreeSet<String>,
    pub imports: BTreeSet<String>,
    /// Keyed by fully qualified name.
    pub functions: BTreeMap<String, FunctionDecl>,
    /// Sorted, duplicate-free.
    pub calls: Vec<CallEdge>,
    /// Record files that were absent on disk.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub missing: Vec<String>,
}

impl PvManifest {
    pub fn new(id: PvId, released_at: DateTime<Utc>) -> Self {
        PvManifest {
            id,
            released_at,
            deps: Vec::new(),
            files: BTreeSet::new(),
            imports: BTreeSet::new(),
            functions: BTreeMap::new(),
            calls: Vec::new(),
            missing: Vec::new(),
        }
    }

    pub fn function(&self, fqn: &str) -> Option<&FunctionDecl> {
        self.functions.get(fqn)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EcosystemSnapshot {
    pub name: String,
    pub pvs: BTreeMap<PvId, PvManifest>,
    /// Versions of each project ordered by release time, then version string.
    pub index: BTreeMap<ProjectId, Vec<PvId>>,
}

impl EcosystemSnapshot {
    /// Builds a snapshot from manifests, computing the ordered index.
    pub fn from_manifests(
        name: impl Into<String>,
        manifests: impl IntoIterator<Item = PvManifest>,
    ) -> Result<Self, SnapshotError> {
        let mut pvs = BTreeMap::new();
        for m in manifests {
            if pvs.contains_key(&m.id) {
                return Err(SnapshotError::DuplicatePv(m.id));
            }
            pvs.insert(m.id.clone(), m);
        }
        let mut index: BTreeMap<ProjectId, Vec<PvId>> = BTreeMap::new();
        for id in pvs.keys() {
            index.entry(id.project.clone()).or_default().push(id.clone());
        }
        for list in index.values_mut() {
            list.sort_by(|a, b| {
                pvs[a]
                    .released_at
                    .cmp(&pvs[b].released_at)
                    .then_with(|| a.version.cmp(&b.version))
            });
        }
        Ok(EcosystemSnapshot {
            name: name.into(),
            pvs,
            index,
        })
    }

    pub fn total_p(&self) -> usize {
        self.index.len()
    }

    pub fn total_pv(&self) -> usize {
        self.pvs.len()
    }

    pub fn pv(&self, id: &PvId) -> Option<&PvManifest> {
        self.pvs.get(id)
    }

    pub fn versions(&self, project: &ProjectId) -> &[PvId] {
        self.index.get(project).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Declared deps of `id` that exist in the snapshot, excluding self-references.
    pub fn resolved_deps<'a>(&'a self, id: &'a PvId) -> impl Iterator<Item = &'a PvId> + 'a {
        self.pvs
            .get(id)
            .into_iter()
            .flat_map(|m| m.deps.iter())
            .filter(move |d| *d != id && self.pvs.contains_key(*d))
    }

    pub fn latest_release(&self) -> Option<DateTime<Utc>> {
        self.pvs.values().map(|m| m.released_at).max()
    }

    pub fn earliest_release(&self) -> Option<DateTime<Utc>> {
        self.pvs.values().map(|m| m.released_at).min()
    }

    /// Writes the snapshot in the on-disk layout understood by [`load_snapshot`].
    pub fn write_to(&self, root: &Path) -> Result<(), SnapshotError> {
        #[derive(Serialize)]
        struct IndexOut<'a> {
            project: &'a str,
            version: &'a str,
            released_at: String,
        }
        #[derive(Serialize)]
        struct DepOut<'a> {
            project: &'a str,
            version: &'a str,
        }

        let mut index = Vec::with_capacity(self.pvs.len());
        for list in self.index.values() {
            for id in list {
                let m = &self.pvs[id];
                index.push(IndexOut {
                    project: id.project.as_str(),
                    version: &id.version,
                    released_at: m.released_at.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
                });
            }
        }
        write_json(&root.join("index.json"), &index)?;
        for (id, m) in &self.pvs {
            let dir = pv_dir(root, id);
            let deps: Vec<_> = m
                .deps
                .iter()
                .map(|d| DepOut {
                    project: d.project.as_str(),
                    version: &d.version,
                })
                .collect();
            write_json(&dir.join("deps.json"), &deps)?;
            write_json(&dir.join("files.json"), &m.files)?;
            write_json(&dir.join("imports.json"), &m.imports)?;
            let functions: Vec<_> = m.functions.values().collect();
            write_json(&dir.join("functions.json"), &functions)?;
            write_json(&dir.join("calls.json"), &m.calls)?;
        }
        Ok(())
    }
}

pub fn pv_dir(root: &Path, id: &PvId) -> PathBuf {
    root.join("pv")
        .join(encode_component(id.project.as_str()))
        .join(encode_component(&id.version))
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), SnapshotError> {
    let io_err = |source| SnapshotError::Io {
        path: path.to_owned(),
        source,
    };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err)?;
    }
    let mut text = serde_json::to_string_pretty(value).expect("snapshot records serialize");
    text.push('\n');
    fs::write(path, text).map_err(io_err)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IndexEntry {
    project: String,
    version: String,
    released_at: DateTime<Utc>,
}

#[derive(Deserialize)]
struct DepEntry {
    project: String,
    version: String,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<Option<T>, SnapshotError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
        Err(source) => {
            return Err(SnapshotError::Io {
                path: path.to_owned(),
                source,
            })
        }
    };
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| SnapshotError::MalformedRecord {
            path: path.to_owned(),
            line: e.line(),
            message: e.to_string(),
        })
}

fn malformed(path: &Path, message: impl Into<String>) -> SnapshotError {
    SnapshotError::MalformedRecord {
        path: path.to_owned(),
        line: 0,
        message: message.into(),
    }
}

/// Loads and indexes a snapshot directory.
pub fn load_snapshot(root: &Path) -> Result<EcosystemSnapshot, SnapshotError> {
    let index_path = root.join("index.json");
    let entries: Vec<IndexEntry> =
        read_json(&index_path)?.ok_or_else(|| SnapshotError::MissingIndex(index_path.clone()))?;

    let mut seen = BTreeSet::new();
    let mut manifests = Vec::with_capacity(entries.len());
    for e in entries {
        if e.project.is_empty() || e.version.is_empty() {
            return Err(malformed(&index_path, "empty project or version"));
        }
        if e.version.contains('@') {
            return Err(malformed(
                &index_path,
                format!("version `{}` contains `@`", e.version),
            ));
        }
        let id = PvId::new(e.project, e.version);
        if !seen.insert(id.clone()) {
            return Err(SnapshotError::DuplicatePv(id));
        }
        manifests.push(load_manifest(root, id, e.released_at)?);
    }
    let name = root
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    EcosystemSnapshot::from_manifests(name, manifests)
}

fn load_manifest(
    root: &Path,
    id: PvId,
    released_at: DateTime<Utc>,
) -> Result<PvManifest, SnapshotError> {
    let dir = pv_dir(root, &id);
    let mut m = PvManifest::new(id, released_at);

    let deps_path = dir.join("deps.json");
    match read_json::<Vec<DepEntry>>(&deps_path)? {
        Some(deps) => {
            let mut seen = BTreeSet::new();
            for d in deps {
                let dep = PvId::new(d.project, d.version);
                if seen.insert(dep.clone()) {
                    m.deps.push(dep);
                }
            }
        }
        None => m.missing.push("deps.json".into()),
    }
    match read_json::<Vec<String>>(&dir.join("files.json"))? {
        Some(files) => m.files = files.into_iter().collect(),
        None => m.missing.push("files.json".into()),
    }
    match read_json::<Vec<String>>(&dir.join("imports.json"))? {
        Some(imports) => m.imports = imports.into_iter().collect(),
        None => m.missing.push("imports.json".into()),
    }
    let functions_path = dir.join("functions.json");
    match read_json::<Vec<FunctionDecl>>(&functions_path)? {
        Some(functions) => {
            for f in functions {
                if m.functions.contains_key(&f.fqn) {
                    return Err(malformed(
                        &functions_path,
                        format!("duplicate function `{}`", f.fqn),
                    ));
                }
                m.functions.insert(f.fqn.clone(), f);
            }
        }
        None => m.missing.push("functions.json".into()),
    }
    match read_json::<Vec<CallEdge>>(&dir.join("calls.json"))? {
        Some(mut calls) => {
            calls.sort();
            calls.dedup();
            m.calls = calls;
        }
        None => m.missing.push("calls.json".into()),
    }
    Ok(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Fatal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    UnresolvedDep,
    SelfDep,
    DanglingCaller,
    DanglingCallee,
    UnknownFile,
    MissingRecord,
}

impl FindingKind {
    pub fn severity(self) -> Severity {
        match self {
            FindingKind::SelfDep | FindingKind::DanglingCaller | FindingKind::UnknownFile => {
                Severity::Fatal
            }
            FindingKind::UnresolvedDep | FindingKind::DanglingCallee | FindingKind::MissingRecord => {
                Severity::Warning
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub kind: FindingKind,
    pub pv: PvId,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_usable(&self) -> bool {
        self.fatal().next().is_none()
    }

    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn fatal(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Fatal)
    }

    pub fn of_kind(&self, kind: FindingKind) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(move |f| f.kind == kind)
    }
}

/// Checks the structural invariants of a loaded snapshot.
pub fn validate_snapshot(s: &EcosystemSnapshot) -> ValidationReport {
    let mut findings = Vec::new();
    let mut push = |kind: FindingKind, pv: &PvId, detail: String| {
        findings.push(Finding {
            severity: kind.severity(),
            kind,
            pv: pv.clone(),
            detail,
        })
    };

    for (id, m) in &s.pvs {
        for missing in &m.missing {
            push(FindingKind::MissingRecord, id, missing.clone());
        }
        for dep in &m.deps {
            if dep == id {
                push(FindingKind::SelfDep, id, dep.to_string());
            } else if !s.pvs.contains_key(dep) {
                push(FindingKind::UnresolvedDep, id, dep.to_string());
            }
        }
        for f in m.functions.values() {
            if !m.files.contains(&f.file) {
                push(
                    FindingKind::UnknownFile,
                    id,
                    format!("{} declared in unknown file {}", f.fqn, f.file),
                );
            }
        }
        for c in &m.calls {
            if !m.functions.contains_key(&c.caller) {
                push(
                    FindingKind::DanglingCaller,
                    id,
                    format!("{} -> {}", c.caller, c.callee),
                );
                continue;
            }
            let resolved = m.functions.contains_key(&c.callee)
                || s.resolved_deps(id).any(|d| s.pvs[d].functions.contains_key(&c.callee));
            if !resolved {
                push(
                    FindingKind::DanglingCallee,
                    id,
                    format!("{} -> {}", c.caller, c.callee),
                );
            }
        }
    }
    findings.sort();
    ValidationReport { findings }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn ts(day: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2021, 1, day, 0, 0, 0).unwrap()
    }

    fn manifest(p: &str, v: &str, day: u32) -> PvManifest {
        PvManifest::new(PvId::new(p, v), ts(day))
    }

    #[test]
    fn pvid_round_trips_through_string_form() {
        let id = PvId::new("@scope/pkg", "1.0.0");
        assert_eq!(id.to_string(), "@scope/pkg@1.0.0");
        assert_eq!(id.to_string().parse::<PvId>().unwrap(), id);
        assert!("noversion".parse::<PvId>().is_err());
        assert!("trailing@".parse::<PvId>().is_err());
    }

    #[test]
    fn component_encoding_escapes_separators() {
        let enc = encode_component("org.x:lib/core%");
        assert!(!enc.contains('/') && !enc.contains(':'));
        assert_eq!(decode_component(&enc), "org.x:lib/core%");
    }

    #[test]
    fn index_ordering_uses_time_then_version() {
        let s = EcosystemSnapshot::from_manifests(
            "t",
            vec![manifest("a", "2.0", 3), manifest("a", "1.0", 3), manifest("a", "0.9", 5)],
        )
        .unwrap();
        let versions: Vec<_> = s.versions(&"a".into()).iter().map(|p| p.version.as_str()).collect();
        assert_eq!(versions, ["1.0", "2.0", "0.9"]);
    }

    #[test]
    fn duplicate_manifest_rejected() {
        let err = EcosystemSnapshot::from_manifests("t", vec![manifest("a", "1", 1), manifest("a", "1", 2)])
            .unwrap_err();
        assert!(matches!(err, SnapshotError::DuplicatePv(id) if id == PvId::new("a", "1")));
    }

    #[test]
    fn validation_flags_each_kind() {
        let mut a = manifest("a", "1", 1);
        a.files.insert("a.src".into());
        a.functions.insert(
            "a.f".into(),
            FunctionDecl { fqn: "a.f".into(), file: "a.src".into(), visibility: Visibility::Public },
        );
        a.functions.insert(
            "a.g".into(),
            FunctionDecl { fqn: "a.g".into(), file: "nowhere.src".into(), visibility: Visibility::Internal },
        );
        a.calls.push(CallEdge { caller: "a.ghost".into(), callee: "a.f".into() });
        a.calls.push(CallEdge { caller: "a.f".into(), callee: "x.unknown".into() });
        a.deps.push(PvId::new("a", "1"));
        a.deps.push(PvId::new("zzz", "9"));
        let s = EcosystemSnapshot::from_manifests("t", vec![a]).unwrap();
        let r = validate_snapshot(&s);
        let kinds: BTreeSet<_> = r.findings.iter().map(|f| f.kind).collect();
        assert_eq!(
            kinds,
            BTreeSet::from([
                FindingKind::UnresolvedDep,
                FindingKind::SelfDep,
                FindingKind::DanglingCaller,
                FindingKind::DanglingCallee,
                FindingKind::UnknownFile,
            ])
        );
        assert!(!r.is_usable());
    }

    #[test]
    fn unresolved_dep_alone_is_not_fatal() {
        let mut a = manifest("a", "1", 1);
        a.deps.push(PvId::new("gone", "1"));
        let s = EcosystemSnapshot::from_manifests("t", vec![a]).unwrap();
        let r = validate_snapshot(&s);
        assert!(r.is_usable());
        assert_eq!(r.of_kind(FindingKind::UnresolvedDep).count(), 1);
        assert_eq!(s.resolved_deps(&PvId::new("a", "1")).count(), 0);
    }
}
