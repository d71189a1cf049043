//! Plain-text summary of a propagation result.

use std::fmt::Write;

use crate::propagation::{PropagationResult, StageCount};
use crate::snapshot::EcosystemSnapshot;
use crate::vpss::VpssRecord;

fn pct(part: usize, whole: usize) -> String {
    if whole == 0 {
        "-".into()
    } else {
        format!("{:.1}%", 100.0 * (1.0 - part as f64 / whole as f64))
    }
}

/// Stage table: distinct downstream projects and PVs left after each
/// pruning level, with the reduction relative to the declared dependents.
pub fn stage_table(r: &PropagationResult) -> String {
    let s = &r.stage_stats;
    let mut out = String::new();
    let _ = writeln!(out, "{:<10} {:>8} {:>9} {:>8} {:>9}", "stage", "P", "P pruned", "PV", "PV pruned");
    let rows: [(&str, StageCount); 4] = [("declared", s.declared), ("version", s.v1), ("import", s.v2), ("callgraph", s.v3)];
    for (name, c) in rows {
        let _ = writeln!(
            out,
            "{:<10} {:>8} {:>9} {:>8} {:>9}",
            name,
            c.p,
            pct(c.p, s.declared.p),
            c.pv,
            pct(c.pv, s.declared.pv)
        );
    }
    out
}

pub fn render(r: &PropagationResult, s: Option<&EcosystemSnapshot>, scores: &[VpssRecord]) -> String {
    let mut out = String::new();
    let affected_pv: usize = r.affected.values().map(|a| a.versions.len()).sum();
    let _ = writeln!(out, "{} in {}", r.cve_id, r.root);
    let _ = writeln!(out, "disclosed  {}", r.disclosed_at.to_rfc3339());
    let _ = writeln!(
        out,
        "affected   {} projects, {} project-versions",
        r.affected.len(),
        affected_pv
    );
    if let Some(s) = s {
        let _ = writeln!(out, "ecosystem  {} projects, {} project-versions", s.total_p(), s.total_pv());
    }
    let max_depth = r.affected.values().map(|a| a.depth).max().unwrap_or(0);
    let _ = writeln!(
        out,
        "passes     {} over {} projects, max depth {max_depth}",
        r.stage_stats.passes, r.stage_stats.projects_analyzed
    );
    out.push('\n');
    out.push_str(&stage_table(r));
    if !scores.is_empty() {
        out.push('\n');
        let _ = writeln!(out, "{:<26} {:>7} {:<9} {:>6} {:>6} {:>6} {:>6}", "timestamp", "vpss", "tier", "p_dir", "p_tr", "pv_dir", "pv_tr");
        for rec in scores {
            let c = &rec.counts;
            let _ = writeln!(
                out,
                "{:<26} {:>7.3} {:<9} {:>6} {:>6} {:>6} {:>6}",
                rec.timestamp.to_rfc3339(),
                rec.vpss,
                rec.tier,
                c.p_dir,
                c.p_trans,
                c.pv_dir,
                c.pv_trans
            );
        }
    }
    if !r.warnings.is_empty() {
        let _ = writeln!(out, "\n{} warnings", r.warnings.len());
        for w in &r.warnings {
            let _ = writeln!(out, "  {w}");
        }
    }
    out
}
