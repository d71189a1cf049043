//! Vulnerability propagation scope score (VPSS).
//!
//! ```text
//! X   = (p_dir, p_trans, pv_dir, pv_trans) / (total_p, total_p, total_pv, total_pv)
//! PBF = ln(1 + gamma * (w1 X1 + w2 X2 + w3 X3 + w4 X4))
//! PDF = 1 + (l_max + l_avg) / (2 l_norm)
//! raw = PBF * PDF
//! vpss = 10 (1 - exp(-raw / k))
//! ```
//!
//! Scores are time-aware: [`score_at`] only counts PVs released at or
//! before the evaluation time.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par::{self, Jobs};
use crate::propagation::PropagationResult;
use crate::snapshot::{EcosystemSnapshot, ProjectId, PvId};
use crate::SCHEMA_VERSION;

#[derive(Debug, Error)]
pub enum VpssError {
    #[error("ecosystem totals are zero")]
    ZeroTotals,
    #[error("score {0} is outside [0, 10]")]
    OutOfRange(f64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VpssParams {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub w4: f64,
    pub gamma: f64,
    pub l_norm: f64,
    pub k: f64,
}

impl Default for VpssParams {
    fn default() -> Self {
        VpssParams { w1: 5.0, w2: 2.5, w3: 3.0, w4: 1.5, gamma: 500.0, l_norm: 10.0, k: 0.5 }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsFile {
    gamma: Option<f64>,
    l_norm: Option<f64>,
    k: Option<f64>,
    #[serde(default)]
    weights: WeightsFile,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightsFile {
    w1: Option<f64>,
    w2: Option<f64>,
    w3: Option<f64>,
    w4: Option<f64>,
}

impl VpssParams {
    /// Parses a `params.toml`:
    ///
    /// ```toml
    /// gamma = 500
    /// l_norm = 10
    /// k = 0.5
    /// [weights]
    /// w1 = 5
    /// w2 = 2.5
    /// w3 = 3
    /// w4 = 1.5
    /// ```
    ///
    /// Missing keys keep their defaults.
    pub fn from_toml(text: &str) -> Result<Self, VpssError> {
        let f: ParamsFile = toml::from_str(text).map_err(|e| VpssError::InvalidParams(e.to_string()))?;
        let d = VpssParams::default();
        let p = VpssParams {
            w1: f.weights.w1.unwrap_or(d.w1),
            w2: f.weights.w2.unwrap_or(d.w2),
            w3: f.weights.w3.unwrap_or(d.w3),
            w4: f.weights.w4.unwrap_or(d.w4),
            gamma: f.gamma.unwrap_or(d.gamma),
            l_norm: f.l_norm.unwrap_or(d.l_norm),
            k: f.k.unwrap_or(d.k),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self, VpssError> {
        let text = std::fs::read_to_string(path).map_err(|e| VpssError::InvalidParams(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Rejects non-positive or non-finite values. An unusual weight order
    /// is only logged.
    pub fn validate(&self) -> Result<(), VpssError> {
        let named = [
            ("w1", self.w1),
            ("w2", self.w2),
            ("w3", self.w3),
            ("w4", self.w4),
            ("gamma", self.gamma),
            ("l_norm", self.l_norm),
            ("k", self.k),
        ];
        for (name, v) in named {
            if !(v.is_finite() && v > 0.0) {
                return Err(VpssError::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.weights_ordered() {
            log::warn!(
                "weights ({}, {}, {}, {}) do not satisfy w1 > w3 > w2 > w4",
                self.w1,
                self.w2,
                self.w3,
                self.w4
            );
        }
        Ok(())
    }

    pub fn weights_ordered(&self) -> bool {
        self.w1 > self.w3 && self.w3 > self.w2 && self.w2 > self.w4
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BreadthCounts {
    pub p_dir: usize,
    pub p_trans: usize,
    pub pv_dir: usize,
    pub pv_trans: usize,
    pub total_p: usize,
    pub total_pv: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Low,
    Medium,
    High,
    Critical,
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tier::Low => "low",
            Tier::Medium => "medium",
            Tier::High => "high",
            Tier::Critical => "critical",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VpssRecord {
    pub cve: String,
    pub timestamp: DateTime<Utc>,
    pub vpss: f64,
    pub tier: Tier,
    pub pbf: f64,
    pub pdf: f64,
    pub raw: f64,
    pub counts: BreadthCounts,
    pub l_max: f64,
    pub l_avg: f64,
}

/// `vpss.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VpssReport {
    pub schema_version: u32,
    pub params: VpssParams,
    pub records: Vec<VpssRecord>,
}

impl VpssReport {
    pub fn new(params: VpssParams, records: Vec<VpssRecord>) -> Self {
        VpssReport { schema_version: SCHEMA_VERSION, params, records }
    }
}

pub const CSV_HEADER: [&str; 14] = [
    "timestamp", "vpss", "tier", "pbf", "pdf", "raw", "p_dir", "p_trans", "pv_dir", "pv_trans", "total_p",
    "total_pv", "l_max", "l_avg",
];

impl VpssRecord {
    /// Values in [`CSV_HEADER`] order.
    pub fn csv_row(&self) -> Vec<String> {
        let c = &self.counts;
        vec![
            self.timestamp.to_rfc3339(),
            self.vpss.to_string(),
            self.tier.to_string(),
            self.pbf.to_string(),
            self.pdf.to_string(),
            self.raw.to_string(),
            c.p_dir.to_string(),
            c.p_trans.to_string(),
            c.pv_dir.to_string(),
            c.pv_trans.to_string(),
            c.total_p.to_string(),
            c.total_pv.to_string(),
            self.l_max.to_string(),
            self.l_avg.to_string(),
        ]
    }
}

pub fn breadth_factor(c: &BreadthCounts, p: &VpssParams) -> Result<f64, VpssError> {
    if c.total_p == 0 || c.total_pv == 0 {
        return Err(VpssError::ZeroTotals);
    }
    let tp = c.total_p as f64;
    let tpv = c.total_pv as f64;
    let w = p.w1 * (c.p_dir as f64 / tp)
        + p.w2 * (c.p_trans as f64 / tp)
        + p.w3 * (c.pv_dir as f64 / tpv)
        + p.w4 * (c.pv_trans as f64 / tpv);
    Ok((p.gamma * w).ln_1p())
}

pub fn depth_factor(l_max: f64, l_avg: f64, p: &VpssParams) -> f64 {
    1.0 + (l_max + l_avg) / (2.0 * p.l_norm)
}

/// Largest `f64` below 10; saturated scores are clamped to it.
const BELOW_TEN: f64 = 9.999_999_999_999_998;

/// Returns `(raw, vpss)`.
pub fn score(pbf: f64, pdf: f64, p: &VpssParams) -> (f64, f64) {
    let raw = pbf * pdf;
    let vpss = -10.0 * (-raw / p.k).exp_m1();
    (raw, vpss.min(BELOW_TEN))
}

/// Low `[0,4)`, medium `[4,7)`, high `[7,9)`, critical `[9,10]`.
pub fn tier(vpss: f64) -> Result<Tier, VpssError> {
    match vpss {
        v if !(0.0..=10.0).contains(&v) => Err(VpssError::OutOfRange(v)),
        v if v < 4.0 => Ok(Tier::Low),
        v if v < 7.0 => Ok(Tier::Medium),
        v if v < 9.0 => Ok(Tier::High),
        _ => Ok(Tier::Critical),
    }
}

/// Affected PVs and P-level depths as seen at time `t`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TimeView {
    pub pvs: BTreeSet<PvId>,
    pub depths: BTreeMap<ProjectId, usize>,
}

/// Affected PVs reachable from a root PV released at or before `t`, over
/// affected edges whose both ends are released at or before `t`.
pub fn time_view(r: &PropagationResult, s: &EcosystemSnapshot, t: DateTime<Utc>) -> TimeView {
    let released = |pv: &PvId| s.pv(pv).is_some_and(|m| m.released_at <= t);
    let mut adj: BTreeMap<&PvId, Vec<&PvId>> = BTreeMap::new();
    for e in &r.affected_edges {
        if released(&e.upstream) && released(&e.downstream) {
            adj.entry(&e.upstream).or_default().push(&e.downstream);
        }
    }
    let roots: Vec<PvId> = r
        .affected
        .get(&r.root)
        .into_iter()
        .flat_map(|a| a.versions.iter())
        .map(|v| PvId { project: r.root.clone(), version: v.clone() })
        .filter(released)
        .collect();
    let mut pvs: BTreeSet<PvId> = BTreeSet::new();
    let mut queue: VecDeque<&PvId> = roots.iter().collect();
    while let Some(pv) = queue.pop_front() {
        if !pvs.insert(pv.clone()) {
            continue;
        }
        queue.extend(adj.get(pv).into_iter().flatten().copied());
    }

    let mut p_adj: BTreeMap<&ProjectId, BTreeSet<&ProjectId>> = BTreeMap::new();
    for (up, downs) in &adj {
        if !pvs.contains(*up) {
            continue;
        }
        for d in downs {
            if d.project != up.project {
                p_adj.entry(&up.project).or_default().insert(&d.project);
            }
        }
    }
    let mut depths = BTreeMap::new();
    if !pvs.is_empty() {
        depths.insert(r.root.clone(), 0usize);
        let mut queue = VecDeque::from([&r.root]);
        while let Some(p) = queue.pop_front() {
            let d = depths[p];
            for &n in p_adj.get(p).into_iter().flatten() {
                if !depths.contains_key(n) {
                    depths.insert(n.clone(), d + 1);
                    queue.push_back(n);
                }
            }
        }
    }
    TimeView { pvs, depths }
}

/// Breadth counts and `(l_max, l_avg)` for a time view.
pub fn measure(view: &TimeView, r: &PropagationResult, s: &EcosystemSnapshot, t: DateTime<Utc>) -> (BreadthCounts, f64, f64) {
    let root_pvs: BTreeSet<&PvId> = view.pvs.iter().filter(|p| p.project == r.root).collect();
    let mut c = BreadthCounts::default();
    let mut direct_p: BTreeSet<&ProjectId> = BTreeSet::new();
    let mut all_p: BTreeSet<&ProjectId> = BTreeSet::new();
    for pv in view.pvs.iter().filter(|p| p.project != r.root) {
        all_p.insert(&pv.project);
        let direct = s.pv(pv).is_some_and(|m| m.deps.iter().any(|d| root_pvs.contains(d)));
        if direct {
            c.pv_dir += 1;
            direct_p.insert(&pv.project);
        } else {
            c.pv_trans += 1;
        }
    }
    c.p_dir = direct_p.len();
    c.p_trans = all_p.len() - direct_p.len();
    for versions in s.index.values() {
        let n = versions.iter().filter(|v| s.pvs[*v].released_at <= t).count();
        c.total_pv += n;
        if n > 0 {
            c.total_p += 1;
        }
    }

    let depths: Vec<usize> = view
        .depths
        .iter()
        .filter(|(p, _)| **p != r.root)
        .map(|(_, d)| *d)
        .collect();
    let l_max = depths.iter().copied().max().unwrap_or(0) as f64;
    let l_avg = if depths.is_empty() { 0.0 } else { depths.iter().sum::<usize>() as f64 / depths.len() as f64 };
    (c, l_max, l_avg)
}

pub fn score_at(r: &PropagationResult, s: &EcosystemSnapshot, p: &VpssParams, t: DateTime<Utc>) -> VpssRecord {
    let view = time_view(r, s, t);
    let (counts, l_max, l_avg) = measure(&view, r, s, t);
    let pbf = breadth_factor(&counts, p).unwrap_or(0.0);
    let pdf = depth_factor(l_max, l_avg, p);
    let (raw, vpss) = score(pbf, pdf, p);
    VpssRecord {
        cve: r.cve_id.clone(),
        timestamp: t,
        vpss,
        tier: tier(vpss).unwrap_or(Tier::Critical),
        pbf,
        pdf,
        raw,
        counts,
        l_max,
        l_avg,
    }
}

/// Scores at `t0`, `t0 + interval`, ... (`points` records).
pub fn timeseries(
    r: &PropagationResult,
    s: &EcosystemSnapshot,
    p: &VpssParams,
    t0: DateTime<Utc>,
    interval_days: i64,
    points: usize,
    jobs: Jobs,
) -> Vec<VpssRecord> {
    let times: Vec<DateTime<Utc>> = (0..points).map(|i| t0 + Duration::days(interval_days * i as i64)).collect();
    par::map(jobs, &times, |t| score_at(r, s, p, *t))
}
