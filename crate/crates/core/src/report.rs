//! Residual-based check results.

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Outcome of one numerical check: the largest residual seen over the
/// sample set, compared against a tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub id: String,
    /// The identity being checked, written out.
    pub anchor: String,
    /// `None` when evaluation failed before a residual could be formed.
    pub residual: Option<f64>,
    pub tolerance: f64,
    pub passed: bool,
    /// Informational checks are reported but never decide the verdict.
    #[serde(default = "gating_default")]
    pub gating: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn gating_default() -> bool {
    true
}

impl CheckReport {
    pub fn new(id: impl Into<String>, anchor: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        CheckReport {
            id: id.into(),
            anchor: anchor.into(),
            residual: Some(residual),
            tolerance,
            passed: residual.is_finite() && residual <= tolerance,
            gating: true,
            witness: None,
            note: None,
        }
    }

    pub fn failed_with(id: impl Into<String>, anchor: impl Into<String>, tolerance: f64, err: &Error) -> Self {
        CheckReport {
            id: id.into(),
            anchor: anchor.into(),
            residual: None,
            tolerance,
            passed: false,
            gating: true,
            witness: err.witness().map(<[f64]>::to_vec),
            note: Some(err.to_string()),
        }
    }

    /// Runs `residual_at` on every sample and keeps the worst value. The
    /// first evaluation error aborts the check and becomes its witness.
    pub fn over_samples<F>(
        id: impl Into<String>,
        anchor: impl Into<String>,
        tolerance: f64,
        samples: &[Vec<f64>],
        mut residual_at: F,
    ) -> Self
    where
        F: FnMut(&[f64]) -> Result<f64, Error>,
    {
        let id = id.into();
        let anchor = anchor.into();
        let mut worst = 0.0_f64;
        let mut worst_at: Option<&[f64]> = None;
        for pt in samples {
            match residual_at(pt) {
                Ok(r) => {
                    // NaN residuals count as failures
                    if r.is_nan() || r > worst || worst_at.is_none() {
                        let nan = r.is_nan();
                        worst = if nan { f64::INFINITY } else { r };
                        worst_at = Some(pt);
                        if nan {
                            break;
                        }
                    }
                }
                Err(e) => {
                    let mut report = CheckReport::failed_with(id, anchor, tolerance, &e);
                    if report.witness.is_none() {
                        report.witness = Some(pt.clone());
                    }
                    return report;
                }
            }
        }
        let mut report = CheckReport::new(id, anchor, worst, tolerance);
        if !report.passed {
            report.witness = worst_at.map(<[f64]>::to_vec);
        }
        report
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn informational(mut self) -> Self {
        self.gating = false;
        self
    }

    pub fn residual_or_inf(&self) -> f64 {
        self.residual.unwrap_or(f64::INFINITY)
    }
}
