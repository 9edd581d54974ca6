//! The JSON report document and plain-text renderings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statman_core::diagnostics::{IdentityRow, Verdict};
use statman_core::{AlphaScan, DiagnosticsReport, TheoremReport};

use crate::eval::TensorDump;
use crate::manifest::{Loaded, SCHEMA};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldMeta {
    pub name: String,
    pub label: String,
    pub dim: usize,
    pub coords: Vec<String>,
    #[serde(rename = "box")]
    pub domain: Vec<[f64; 2]>,
    pub finite_difference_jets: bool,
}

impl ManifoldMeta {
    pub fn new(loaded: &Loaded) -> Self {
        let chart = &loaded.chart;
        Self {
            name: loaded.file.name.clone(),
            label: chart.label().to_string(),
            dim: chart.dim(),
            coords: chart.coords().to_vec(),
            domain: chart.domain().iter().map(|&(lo, hi)| [lo, hi]).collect(),
            finite_difference_jets: chart.uses_finite_differences(),
        }
    }
}

/// Top-level output of every command. Sections not produced by a command
/// are omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema: String,
    pub tool_version: String,
    pub command: String,
    pub manifold: ManifoldMeta,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<DiagnosticsReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theorems: Option<Vec<TheoremReport>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_scan: Option<AlphaScan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tensor: Option<TensorDump>,
}

impl ReportDocument {
    pub fn new(command: &str, loaded: &Loaded) -> Self {
        Self {
            schema: SCHEMA.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            manifold: ManifoldMeta::new(loaded),
            seed: None,
            points: None,
            tol: None,
            diagnostics: None,
            theorems: None,
            alpha_scan: None,
            tensor: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn verdict(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "pass",
        Verdict::Fail => "fail",
        Verdict::Inconclusive => "inconclusive",
    }
}

/// Worst first by defect relative to tolerance; ties by name.
fn worst_first(rows: &[IdentityRow]) -> Vec<&IdentityRow> {
    let mut sorted: Vec<&IdentityRow> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        (b.defect / b.tol)
            .total_cmp(&(a.defect / a.tol))
            .then_with(|| a.name.cmp(&b.name))
    });
    sorted
}

pub fn render_check(doc: &ReportDocument) -> String {
    let mut out = String::new();
    let m = &doc.manifold;
    let Some(r) = &doc.diagnostics else {
        return out;
    };
    let _ = writeln!(
        out,
        "{} ({}-dimensional, {} points, seed {}, tol {:e})",
        m.label, m.dim, r.points_tested, r.seed, r.tol
    );
    let _ = writeln!(out);
    let v = &r.validation;
    let _ = writeln!(
        out,
        "validation: {} ({} checks, {} violations)",
        if v.passed() { "pass" } else { "fail" },
        v.checks.len(),
        v.violations.len()
    );
    for viol in &v.violations {
        let _ = writeln!(out, "  {} at {:?}: {}", viol.check, viol.point, viol.message);
    }
    if !r.identities.is_empty() {
        let _ = writeln!(out, "\nidentities (worst first):");
        for row in worst_first(&r.identities) {
            let status = if row.applicable { verdict(row.verdict) } else { "n/a" };
            let _ = writeln!(
                out,
                "  {status:<12} {:>10.3e} / {:<8.1e} {}",
                row.defect, row.tol, row.name
            );
        }
    }
    if !r.checks.is_empty() {
        let _ = writeln!(out, "\nclassification:");
        for c in &r.checks {
            let note = c.note.as_deref().map(|n| format!("  ({n})")).unwrap_or_default();
            let _ = writeln!(
                out,
                "  {:<34} {:<12} {:>10.3e}{note}",
                c.name,
                verdict(c.verdict),
                c.defect
            );
        }
    }
    if !r.theorems.is_empty() {
        let _ = writeln!(out, "\ntheorems:");
        out.push_str(&theorem_lines(&r.theorems));
    }
    if !r.alpha_scan.rows.is_empty() {
        let _ = writeln!(out, "\nalpha scan:");
        out.push_str(&alpha_lines(&r.alpha_scan));
    }
    for e in &r.consistency_errors {
        let _ = writeln!(out, "\nconsistency error: {e}");
    }
    let _ = writeln!(out, "\nresult: {}", if r.passed() { "PASS" } else { "FAIL" });
    out
}

fn theorem_lines(theorems: &[TheoremReport]) -> String {
    let mut out = String::new();
    for t in theorems {
        let agreement = match (t.hypothesis_met, t.agree) {
            (false, _) => "hypothesis not met",
            (true, Some(true)) => "agree",
            (true, Some(false)) => "DISAGREE",
            (true, None) => "inconclusive",
        };
        let _ = writeln!(
            out,
            "  {}: {agreement} ({}, {} points; k = {:.6e})",
            t.theorem, t.scope, t.points_tested, t.k
        );
        for (label, v) in &t.conditions {
            let _ = writeln!(out, "    {label:<44} {}", verdict(*v));
        }
        if let Some(d) = t.ricci_consequence {
            let _ = writeln!(out, "    {:<44} {:.3e}", "ricci_equals_(n-1)kg defect", d);
        }
    }
    out
}

fn alpha_lines(scan: &AlphaScan) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "  hypothesis_g_not_cc: {}", scan.hypothesis_g_not_cc);
    let _ = writeln!(
        out,
        "  {:>8}  {:<12} {:>14}  {:>10}  {:<12}  g_not_cc",
        "alpha", "conjugate_r", "k", "residual", "fit"
    );
    for row in &scan.rows {
        let _ = writeln!(
            out,
            "  {:>8}  {:<12} {:>14.6e}  {:>10.3e}  {:<12}  {}",
            row.alpha,
            verdict(row.conjugate_r),
            row.k,
            row.residual,
            verdict(row.constant_curvature),
            row.hypothesis_g_not_cc
        );
    }
    out
}

pub fn render_theorems(doc: &ReportDocument) -> String {
    let mut out = format!("{}\n", doc.manifold.label);
    if let Some(t) = &doc.theorems {
        out.push_str(&theorem_lines(t));
    }
    out
}

pub fn render_alpha_scan(doc: &ReportDocument) -> String {
    let mut out = format!("{}\n", doc.manifold.label);
    if let Some(scan) = &doc.alpha_scan {
        out.push_str(&alpha_lines(scan));
    }
    out
}
