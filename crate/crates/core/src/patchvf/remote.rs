//! Client for an external VF classifier.
//!
//! Protocol: `POST <endpoint>/classify` with
//! `{"fqn", "hunk", "pre", "post", "principles": [...]}`; the response is
//! `{"verdict": "keep" | "drop", "reason": string}`. Transport failures and
//! unparseable responses fall back to the heuristic verdict and mark the
//! run as degraded.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::filter::HeuristicFilter;
use super::{Candidate, DecisionSource, VfDecision, Verdict};
use crate::par::{self, Jobs};

/// Filtering principles sent with every request.
pub const DEFAULT_PRINCIPLES: &[&str] = &[
    "semantics-equivalent modification: if the function's behaviour is unchanged by the hunk \
     (renamed variables, whitespace, formatting, literal quoting), the hunk is irrelevant; answer drop",
    "semantics-changing modification: a behaviour change can still be irrelevant when it only adds or \
     removes logging or debugging code, or removes a trivial accessor; answer drop. Otherwise answer keep",
    "always give a short reason for the verdict",
];

#[derive(Debug, Error)]
pub enum RemoteError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("unparseable classifier response: {0}")]
    RemoteSchemaError(String),
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassifyRequest<'a> {
    pub fqn: &'a str,
    pub hunk: &'a str,
    pub pre: &'a str,
    pub post: &'a str,
    pub principles: &'a [String],
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyResponse {
    pub verdict: Verdict,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub timeout: Duration,
    /// Extra attempts after the first failure.
    pub retries: u32,
    pub principles: Vec<String>,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        RemoteConfig {
            endpoint: endpoint.into(),
            timeout: Duration::from_secs(30),
            retries: 1,
            principles: DEFAULT_PRINCIPLES.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn url(&self) -> String {
        let base = self.endpoint.trim_end_matches('/');
        if base.ends_with("/classify") {
            base.to_owned()
        } else {
            format!("{base}/classify")
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ClassifyOutcome {
    pub decisions: Vec<VfDecision>,
    pub degraded: bool,
    pub errors: Vec<String>,
}

fn request_once(agent: &ureq::Agent, url: &str, req: &ClassifyRequest<'_>) -> Result<ClassifyResponse, RemoteError> {
    let mut resp = agent
        .post(url)
        .send_json(req)
        .map_err(|e| RemoteError::Transport(e.to_string()))?;
    let text = resp
        .body_mut()
        .read_to_string()
        .map_err(|e| RemoteError::Transport(e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| RemoteError::RemoteSchemaError(format!("{e}: {text}")))
}

fn request(agent: &ureq::Agent, cfg: &RemoteConfig, c: &Candidate) -> Result<ClassifyResponse, RemoteError> {
    let hunk = c.hunk.render();
    let req = ClassifyRequest {
        fqn: &c.fqn,
        hunk: &hunk,
        pre: &c.hunk.pre_text,
        post: &c.hunk.post_text,
        principles: &cfg.principles,
    };
    let url = cfg.url();
    let mut last = None;
    for _ in 0..=cfg.retries {
        match request_once(agent, &url, &req) {
            Ok(r) => return Ok(r),
            // a well-formed reply that does not parse will not improve on retry
            Err(e @ RemoteError::RemoteSchemaError(_)) => return Err(e),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Classifies each candidate remotely, in candidate order. Requests may run
/// concurrently.
pub fn classify_remote(
    candidates: &[Candidate],
    cfg: &RemoteConfig,
    fallback: &HeuristicFilter,
    jobs: Jobs,
) -> ClassifyOutcome {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(cfg.timeout))
        .http_status_as_error(true)
        .build()
        .into();
    let responses = par::map(jobs, candidates, |c| request(&agent, cfg, c));
    let mut out = ClassifyOutcome::default();
    for (c, r) in candidates.iter().zip(responses) {
        match r {
            Ok(resp) => out.decisions.push(VfDecision {
                fqn: c.fqn.clone(),
                verdict: resp.verdict,
                reason: resp.reason,
                source: DecisionSource::Remote,
            }),
            Err(e) => {
                log::warn!("classifier failed for {}: {e}; using heuristic verdict", c.fqn);
                out.degraded = true;
                out.errors.push(format!("{}: {e}", c.fqn));
                let mut d = fallback.decide(&c.hunk, &c.hunk.pre_text, &c.hunk.post_text);
                d.fqn = c.fqn.clone();
                out.decisions.push(d);
            }
        }
    }
    out
}
