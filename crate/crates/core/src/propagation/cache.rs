//! On-disk persistence of engine state.
//!
//! ```text
//! <dir>/tvs/<P>.json      {"pass": n, "data": [versions]}
//! <dir>/tfs/<P>.json      {"pass": n, "data": {version: [fqn]}}
//! <dir>/eps/<P>.json      {"pass": n, "data": {pv: [fqn]}}
//! <dir>/interpv/<P>.json  {"pass": n, "data": {upstream pv: {downstream pv: [call]}}}
//! <dir>/stages/<P>.json   {"pass": n, "data": {declared, v1, v2, v3, incoming, pass_count}}
//! <dir>/worklist.json     written last
//! ```
//!
//! `<P>` is the percent-encoded project id. Every file is stamped with the
//! pass count at save time; a project file stamped later than
//! `worklist.json` means an interrupted save.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{CallPair, PassRecord, ProjectState, PropagationError, PvPair};
use crate::snapshot::{decode_component, encode_component, ProjectId, PvId};
use crate::SCHEMA_VERSION;

pub(super) struct Saved {
    pub fingerprint: String,
    pub states: BTreeMap<ProjectId, ProjectState>,
    pub worklist: VecDeque<ProjectId>,
    pub pass_log: Vec<PassRecord>,
    pub warnings: Vec<String>,
    pub passes: usize,
    pub rng_state: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct Stamped<T> {
    pass: usize,
    data: T,
}

#[derive(Serialize, Deserialize)]
struct Stages {
    declared: BTreeSet<PvPair>,
    v1: BTreeSet<PvPair>,
    v2: BTreeSet<PvPair>,
    v3: BTreeSet<PvPair>,
    incoming: BTreeMap<String, BTreeSet<String>>,
    pass_count: usize,
}

#[derive(Serialize, Deserialize)]
struct Worklist {
    schema_version: u32,
    fingerprint: String,
    passes: usize,
    queue: Vec<ProjectId>,
    projects: Vec<ProjectId>,
    rng_state: Option<u64>,
    pass_log: Vec<PassRecord>,
    warnings: Vec<String>,
}

const DIRS: [&str; 5] = ["tvs", "tfs", "eps", "interpv", "stages"];

fn err(e: impl std::fmt::Display) -> PropagationError {
    PropagationError::Cache(e.to_string())
}

fn write<T: Serialize>(path: &Path, value: &T) -> Result<(), PropagationError> {
    let text = serde_json::to_string(value).map_err(err)?;
    // write-then-rename so a crash never leaves a half-written file
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, text).map_err(|e| err(format!("{}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| err(format!("{}: {e}", path.display())))
}

fn read<T: DeserializeOwned>(path: &Path) -> Result<T, PropagationError> {
    let text = fs::read_to_string(path).map_err(|e| err(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| err(format!("{}: {e}", path.display())))
}

pub(super) fn save(dir: &Path, saved: &Saved) -> Result<(), PropagationError> {
    for d in DIRS {
        fs::create_dir_all(dir.join(d)).map_err(|e| err(format!("{}: {e}", dir.display())))?;
    }
    let pass = saved.passes;
    for (p, st) in &saved.states {
        let name = format!("{}.json", encode_component(p.as_str()));
        write(&dir.join("tvs").join(&name), &Stamped { pass, data: &st.tvs })?;
        write(&dir.join("tfs").join(&name), &Stamped { pass, data: &st.tfs })?;
        write(&dir.join("eps").join(&name), &Stamped { pass, data: &st.eps })?;
        write(&dir.join("interpv").join(&name), &Stamped { pass, data: &st.inter_pv_calls })?;
        let stages = Stages {
            declared: st.declared.clone(),
            v1: st.v1.clone(),
            v2: st.v2.clone(),
            v3: st.v3.clone(),
            incoming: st.incoming.clone(),
            pass_count: st.pass_count,
        };
        write(&dir.join("stages").join(&name), &Stamped { pass, data: stages })?;
    }
    write(
        &dir.join("worklist.json"),
        &Worklist {
            schema_version: SCHEMA_VERSION,
            fingerprint: saved.fingerprint.clone(),
            passes: pass,
            queue: saved.worklist.iter().cloned().collect(),
            projects: saved.states.keys().cloned().collect(),
            rng_state: saved.rng_state,
            pass_log: saved.pass_log.clone(),
            warnings: saved.warnings.clone(),
        },
    )
}

fn read_stamped<T: DeserializeOwned>(path: &Path, limit: usize) -> Result<T, PropagationError> {
    let s: Stamped<T> = read(path)?;
    if s.pass > limit {
        return Err(err(format!(
            "{} is from pass {} but the worklist is at pass {limit}; cache is inconsistent",
            path.display(),
            s.pass
        )));
    }
    Ok(s.data)
}

/// `Ok(None)` when `dir` holds no saved worklist.
pub(super) fn load(dir: &Path, fingerprint: &str) -> Result<Option<Saved>, PropagationError> {
    let wl_path = dir.join("worklist.json");
    if !wl_path.exists() {
        return Ok(None);
    }
    let wl: Worklist = read(&wl_path)?;
    if wl.fingerprint != fingerprint {
        return Err(err(format!(
            "cache at {} belongs to a different vulnerability or snapshot",
            dir.display()
        )));
    }
    let mut states = BTreeMap::new();
    for d in DIRS {
        let Ok(entries) = fs::read_dir(dir.join(d)) else { continue };
        for e in entries.flatten() {
            let name = e.file_name().to_string_lossy().into_owned();
            let Some(stem) = name.strip_suffix(".json") else { continue };
            let p = ProjectId::new(decode_component(stem));
            if !wl.projects.contains(&p) {
                // leftovers from a save that never reached the worklist
                read_stamped::<serde_json::Value>(&e.path(), wl.passes)?;
                return Err(err(format!("{} is not listed in the worklist", e.path().display())));
            }
        }
    }
    for p in &wl.projects {
        let name = format!("{}.json", encode_component(p.as_str()));
        let f = |d: &str| dir.join(d).join(&name);
        let stages: Stages = read_stamped(&f("stages"), wl.passes)?;
        let st = ProjectState {
            tvs: read_stamped(&f("tvs"), wl.passes)?,
            tfs: read_stamped(&f("tfs"), wl.passes)?,
            eps: read_stamped::<BTreeMap<PvId, BTreeSet<String>>>(&f("eps"), wl.passes)?,
            inter_pv_calls: read_stamped::<BTreeMap<PvId, BTreeMap<PvId, BTreeSet<CallPair>>>>(
                &f("interpv"),
                wl.passes,
            )?,
            declared: stages.declared,
            v1: stages.v1,
            v2: stages.v2,
            v3: stages.v3,
            incoming: stages.incoming,
            pass_count: stages.pass_count,
        };
        states.insert(p.clone(), st);
    }
    Ok(Some(Saved {
        fingerprint: wl.fingerprint,
        states,
        worklist: wl.queue.into(),
        pass_log: wl.pass_log,
        warnings: wl.warnings,
        passes: wl.passes,
        rng_state: wl.rng_state,
    }))
}
