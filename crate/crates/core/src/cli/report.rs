//! Suite reports: assembly, human table and machine JSON.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::scenario::{Expectation, Scenario, Suite, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::lifts::{ConventionResidual, Flavor, Resolution};
use crate::report::CheckReport;

/// One check as it appears in a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    /// `None` for an expectation that matched no scheduled check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<Suite>,
    #[serde(flatten)]
    pub check: CheckReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<Expectation>,
    /// Whether this entry is acceptable for the overall verdict.
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub suite: Suite,
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    /// Gating entries that were not ok.
    pub gating_failures: usize,
}

/// Which placement of the curvature indices matched the lifted Nijenhuis tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConventionRecord {
    pub flavor: Flavor,
    pub resolution: Resolution,
    pub residuals: Vec<ConventionResidual>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub schema_version: u32,
    pub scenario: String,
    pub seed: u64,
    pub samples: usize,
    pub tolerance: f64,
    pub passed: bool,
    pub checks: Vec<ReportEntry>,
    pub summary: Vec<SuiteSummary>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub curvature_convention: BTreeMap<String, ConventionRecord>,
}

/// The suite a check id belongs to, from its prefix.
pub fn owning_suite(id: &str) -> Option<Suite> {
    let head = id.split('.').next()?;
    match head {
        "metallic" | "chart" => Some(Suite::Core),
        "lifts" => match id.split('.').nth(1)? {
            "tangent" => Some(Suite::LiftsTangent),
            "cotangent" => Some(Suite::LiftsCotangent),
            _ => None,
        },
        other => Suite::from_name(other),
    }
}

impl SuiteReport {
    pub(crate) fn assemble(s: &Scenario, checks: Vec<(Suite, CheckReport)>, conventions: Vec<ConventionRecord>) -> Self {
        let mut entries: Vec<ReportEntry> = checks
            .into_iter()
            .map(|(suite, mut check)| {
                let expected = s.expect.get(&check.id).copied();
                if expected.is_some() {
                    check.gating = true;
                }
                let ok = match expected {
                    Some(e) => check.passed == (e == Expectation::Pass),
                    None => check.passed || !check.gating,
                };
                ReportEntry {
                    suite: Some(suite),
                    check,
                    expected,
                    ok,
                }
            })
            .collect();
        for (id, e) in &s.expect {
            let ran = owning_suite(id).is_some_and(|o| s.suites.contains(&o));
            if ran && !entries.iter().any(|x| &x.check.id == id) {
                let err = Error::Validation(vec![format!("expected check `{id}` was not produced")]);
                entries.push(ReportEntry {
                    suite: None,
                    check: CheckReport::failed_with(id.clone(), "expectation", s.tolerance, &err),
                    expected: Some(*e),
                    ok: false,
                });
            }
        }
        let summary = s
            .suites
            .iter()
            .map(|suite| {
                let mine: Vec<&ReportEntry> = entries.iter().filter(|x| x.suite == Some(*suite)).collect();
                let passed = mine.iter().filter(|x| x.check.passed).count();
                SuiteSummary {
                    suite: *suite,
                    total: mine.len(),
                    passed,
                    failed: mine.len() - passed,
                    gating_failures: mine.iter().filter(|x| !x.ok).count(),
                }
            })
            .collect();
        let curvature_convention = conventions.into_iter().map(|c| (c.flavor.label().to_string(), c)).collect();
        SuiteReport {
            schema_version: SCHEMA_VERSION,
            scenario: s.name.clone(),
            seed: s.seed(),
            samples: s.samples,
            tolerance: s.tolerance,
            passed: entries.iter().all(|x| x.ok),
            checks: entries,
            summary,
            curvature_convention,
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }

    pub fn find(&self, id: &str) -> Option<&ReportEntry> {
        self.checks.iter().find(|x| x.check.id == id)
    }

    /// Verdicts keyed by check id, for comparing runs.
    pub fn verdicts(&self) -> BTreeMap<&str, (bool, bool)> {
        self.checks.iter().map(|x| (x.check.id.as_str(), (x.check.passed, x.ok))).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Human,
    Machine,
}

pub fn emit_report(report: &SuiteReport, format: Format) -> String {
    match format {
        Format::Machine => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        Format::Human => human(report),
    }
}

pub fn load_report(text: &str) -> Result<SuiteReport> {
    let r: SuiteReport = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    if r.schema_version != SCHEMA_VERSION {
        return Err(Error::Schema(format!("unsupported report schema version {}", r.schema_version)));
    }
    Ok(r)
}

fn verdict(x: &ReportEntry) -> String {
    let base = if x.check.passed { "pass" } else { "fail" };
    match (x.expected, x.check.gating, x.ok) {
        (Some(_), _, true) => format!("{base} (expected)"),
        (Some(_), _, false) => format!("{} (unexpected)", base.to_uppercase()),
        (None, false, _) => format!("{base} (info)"),
        (None, true, true) => base.to_string(),
        (None, true, false) => base.to_uppercase(),
    }
}

fn fmt_point(p: &[f64]) -> String {
    let parts: Vec<String> = p.iter().map(|v| format!("{v:.16e}")).collect();
    format!("({})", parts.join(", "))
}

fn human(r: &SuiteReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "scenario {}  seed {}  samples {}  tolerance {:.1e}",
        r.scenario, r.seed, r.samples, r.tolerance
    );
    let width = r.checks.iter().map(|x| x.check.id.len()).max().unwrap_or(2).max(5);
    let _ = writeln!(out, "{:<16} {:<width$} {:>12} {:>9}  verdict", "suite", "check", "residual", "tol");
    for x in &r.checks {
        let suite = x.suite.map_or("-", Suite::name);
        let res = x.check.residual.map_or_else(|| "error".to_string(), |v| format!("{v:.3e}"));
        let _ = writeln!(
            out,
            "{:<16} {:<width$} {:>12} {:>9.1e}  {}",
            suite,
            x.check.id,
            res,
            x.check.tolerance,
            verdict(x)
        );
        if !x.check.passed || !x.ok {
            if let Some(w) = &x.check.witness {
                let _ = writeln!(out, "{:<16}   witness {}", "", fmt_point(w));
            }
        }
        if let Some(n) = &x.check.note {
            if !x.check.passed || !x.ok || x.check.id.ends_with("nijenhuis_hh") {
                let _ = writeln!(out, "{:<16}   note: {}", "", n);
            }
        }
    }
    let _ = writeln!(out);
    for s in &r.summary {
        let _ = writeln!(
            out,
            "{:<16} {} checks, {} pass, {} fail, {} gating failures",
            s.suite.name(),
            s.total,
            s.passed,
            s.failed,
            s.gating_failures
        );
    }
    for (flavor, c) in &r.curvature_convention {
        let text = match &c.resolution {
            Resolution::Unique(v) => format!("unique {v}"),
            Resolution::Ambiguous(v) => format!("ambiguous among {}", v.join(", ")),
            Resolution::None => "no convention matches".to_string(),
        };
        let _ = writeln!(out, "curvature convention ({flavor}): {text}");
    }
    let _ = writeln!(out, "overall: {}", if r.passed { "PASS" } else { "FAIL" });
    out
}
