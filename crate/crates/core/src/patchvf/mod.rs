//! Vulnerable-function identification from security patches.
//!
//! A patch is split into function-level hunks ([`diff::parse_patch`]);
//! every function touched by a hunk other than a pure function addition is
//! a candidate ([`diff::candidate_vfs`]). Candidates are then filtered,
//! either by the local [`filter::HeuristicFilter`] or by a remote
//! classifier ([`remote::classify_remote`]), and optionally overridden by
//! manual decisions.

pub mod diff;
pub mod filter;
pub mod funcmap;
pub mod remote;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use diff::{candidate_vfs, parse_patch, Hunk, HunkKind, ParseOutcome};
pub use filter::{heuristic_filter, FilterConfig, HeuristicFilter};
pub use funcmap::{extract_function_map, FunctionMap, FunctionSpan, Side};
pub use remote::{classify_remote, ClassifyOutcome, RemoteConfig};

use crate::par::Jobs;
use crate::SCHEMA_VERSION;

#[derive(Debug, Error)]
pub enum PatchError {
    #[error("malformed diff at line {line}: {message}")]
    MalformedDiff { line: usize, message: String },
    #[error("invalid function map: {0}")]
    InvalidFunctionMap(String),
    #[error("invalid filter configuration: {0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Keep,
    Drop,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecisionSource {
    Heuristic,
    Remote,
    Manual,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VfDecision {
    pub fqn: String,
    pub verdict: Verdict,
    pub reason: String,
    pub source: DecisionSource,
}

/// A manual override, as read from a `--manual` JSON file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManualDecision {
    pub fqn: String,
    pub verdict: Verdict,
    pub reason: String,
}

/// One candidate function with all of its hunks merged.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Candidate {
    pub fqn: String,
    pub hunk: Hunk,
}

/// Groups the non-addition hunks by touched function. When a function has
/// several hunks their lines and texts are concatenated in patch order and
/// the kind is the first hunk's kind unless they differ, in which case it
/// becomes an internal modification.
pub fn merge_candidates(hunks: &[Hunk]) -> Vec<Candidate> {
    let mut by_fqn: BTreeMap<&str, Hunk> = BTreeMap::new();
    for h in hunks.iter().filter(|h| h.kind != HunkKind::FunctionAddition) {
        for fqn in &h.touched_fqns {
            match by_fqn.get_mut(fqn.as_str()) {
                None => {
                    let mut single = h.clone();
                    single.touched_fqns = [fqn.clone()].into();
                    by_fqn.insert(fqn, single);
                }
                Some(m) => {
                    m.removed.extend(h.removed.iter().cloned());
                    m.added.extend(h.added.iter().cloned());
                    m.pre_text.push_str(&h.pre_text);
                    m.post_text.push_str(&h.post_text);
                    if m.kind != h.kind {
                        m.kind = match (m.kind, h.kind) {
                            (HunkKind::FunctionDeletion, _) | (_, HunkKind::FunctionDeletion) => {
                                HunkKind::FunctionDeletion
                            }
                            _ => HunkKind::InternalModification,
                        };
                    }
                }
            }
        }
    }
    by_fqn
        .into_iter()
        .map(|(fqn, hunk)| Candidate {
            fqn: fqn.to_owned(),
            hunk,
        })
        .collect()
}

/// `vfs.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VfReport {
    pub schema_version: u32,
    pub cve: String,
    pub candidates: Vec<String>,
    pub decisions: Vec<VfDecision>,
    pub final_vfs: Vec<String>,
    /// Set when a remote classifier was requested but at least one decision
    /// fell back to the heuristic.
    pub degraded: bool,
    pub discarded_hunks: usize,
    pub hunks: Vec<HunkSummary>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HunkSummary {
    pub file: String,
    pub fqn: String,
    pub kind: HunkKind,
    pub removed: usize,
    pub added: usize,
}

#[derive(Clone, Debug, Default)]
pub struct VfPipeline {
    pub filter: HeuristicFilter,
    pub remote: Option<RemoteConfig>,
    pub manual: Vec<ManualDecision>,
    pub jobs: Jobs,
}

impl VfPipeline {
    pub fn run(
        &self,
        cve: &str,
        diff_text: &str,
        pre_map: &FunctionMap,
        post_map: &FunctionMap,
    ) -> Result<VfReport, PatchError> {
        let parsed = parse_patch(diff_text, pre_map, post_map)?;
        let candidates = merge_candidates(&parsed.hunks);
        let mut warnings = parsed.warnings.clone();

        let (mut decisions, degraded) = match &self.remote {
            Some(cfg) => {
                let out = classify_remote(&candidates, cfg, &self.filter, self.jobs);
                warnings.extend(out.errors);
                (out.decisions, out.degraded)
            }
            None => (
                candidates
                    .iter()
                    .map(|c| {
                        let mut d = self.filter.decide(&c.hunk, &c.hunk.pre_text, &c.hunk.post_text);
                        d.fqn = c.fqn.clone();
                        d
                    })
                    .collect(),
                false,
            ),
        };
        for m in &self.manual {
            match decisions.iter_mut().find(|d| d.fqn == m.fqn) {
                Some(d) => {
                    *d = VfDecision {
                        fqn: m.fqn.clone(),
                        verdict: m.verdict,
                        reason: m.reason.clone(),
                        source: DecisionSource::Manual,
                    }
                }
                None => warnings.push(format!("manual decision for non-candidate {} ignored", m.fqn)),
            }
        }
        decisions.sort_by(|a, b| a.fqn.cmp(&b.fqn));

        let final_vfs = decisions
            .iter()
            .filter(|d| d.verdict == Verdict::Keep)
            .map(|d| d.fqn.clone())
            .collect();
        Ok(VfReport {
            schema_version: SCHEMA_VERSION,
            cve: cve.to_owned(),
            candidates: candidates.iter().map(|c| c.fqn.clone()).collect(),
            decisions,
            final_vfs,
            degraded,
            discarded_hunks: parsed.discarded,
            hunks: parsed
                .hunks
                .iter()
                .flat_map(|h| {
                    h.touched_fqns.iter().map(move |fqn| HunkSummary {
                        file: h.file.clone(),
                        fqn: fqn.clone(),
                        kind: h.kind,
                        removed: h.removed.len(),
                        added: h.added.len(),
                    })
                })
                .collect(),
            warnings,
        })
    }
}
