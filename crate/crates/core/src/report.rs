//! Verification records.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Acceptance rule for residuals: `r <= abs` or `r <= rel * scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    /// Polynomial objects.
    pub const POLY: Tolerance = Tolerance { abs: 1e-9, rel: 0.0 };
    /// Objects with reciprocals or solves.
    pub const RATIONAL: Tolerance = Tolerance { abs: 1e-9, rel: 1e-7 };
    /// Demands an exactly zero residual.
    pub const EXACT: Tolerance = Tolerance { abs: 0.0, rel: 0.0 };

    pub fn abs(abs: f64) -> Tolerance {
        Tolerance { abs, rel: 0.0 }
    }

    pub fn with_abs(self, abs: f64) -> Tolerance {
        Tolerance { abs, ..self }
    }

    pub fn accepts(&self, residual: f64, scale: f64) -> bool {
        residual.is_finite() && (residual <= self.abs || residual <= self.rel * scale.max(1.0))
    }

    /// The effective threshold for a given scale.
    pub fn threshold(&self, scale: f64) -> f64 {
        self.abs.max(self.rel * scale.max(1.0))
    }
}

/// A residual together with the magnitude of the quantities it compares.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub value: f64,
    pub scale: f64,
}

impl Residual {
    pub fn new(value: f64, scale: f64) -> Self {
        Residual { value, scale }
    }

    pub fn exact(value: f64) -> Self {
        Residual { value, scale: 0.0 }
    }

    pub fn max(self, other: Residual) -> Residual {
        Residual { value: self.value.max(other.value), scale: self.scale.max(other.scale) }
    }
}

/// Boolean outcome of a pointwise predicate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub passed: bool,
    pub residual: Residual,
}

impl Verdict {
    pub fn judge(residual: Residual, tol: Tolerance) -> Verdict {
        Verdict { passed: tol.accepts(residual.value, residual.scale), residual }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub id: String,
    pub anchor: String,
    pub points: usize,
    pub max_residual: Option<f64>,
    pub threshold: f64,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    pub fn residual(id: &str, anchor: &str, points: usize, r: Residual, tol: Tolerance) -> Check {
        Check {
            id: id.into(),
            anchor: anchor.into(),
            points,
            max_residual: Some(r.value),
            threshold: tol.threshold(r.scale),
            passed: tol.accepts(r.value, r.scale),
            note: None,
        }
    }

    /// A residual that is expected to be large (a negative control).
    pub fn nonzero(id: &str, anchor: &str, points: usize, r: Residual, tol: Tolerance) -> Check {
        let mut c = Check::residual(id, anchor, points, r, tol);
        c.passed = !c.passed;
        c.note = Some("expected a nonzero residual".into());
        c
    }

    pub fn flag(id: &str, anchor: &str, points: usize, passed: bool, note: impl Into<String>) -> Check {
        let note = note.into();
        Check {
            id: id.into(),
            anchor: anchor.into(),
            points,
            max_residual: None,
            threshold: 0.0,
            passed,
            note: (!note.is_empty()).then_some(note),
        }
    }

    /// Turns a fallible residual computation into a check; errors fail it.
    pub fn from_result(id: &str, anchor: &str, points: usize, r: Result<Residual>, tol: Tolerance) -> Check {
        match r {
            Ok(r) => Check::residual(id, anchor, points, r, tol),
            Err(e) => Check::flag(id, anchor, points, false, e.to_string()),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Check {
        self.note = Some(note.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub n: usize,
    pub points: usize,
    pub seed: u64,
    pub tolerance: Tolerance,
    pub suite: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub scenario: String,
    pub config: RunConfig,
    pub checks: Vec<Check>,
    pub summary: Summary,
}

impl VerificationReport {
    /// Orders checks by id and fills in the summary.
    pub fn new(scenario: &str, config: RunConfig, mut checks: Vec<Check>) -> Self {
        checks.sort_by(|a, b| a.id.cmp(&b.id));
        let passed = checks.iter().filter(|c| c.passed).count();
        VerificationReport {
            scenario: scenario.into(),
            config,
            summary: Summary { total: checks.len(), passed, failed: checks.len() - passed },
            checks,
        }
    }

    pub fn all_passed(&self) -> bool {
        self.summary.failed == 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "scenario {} (n = {}, {} points, seed {}, suite {})",
            self.scenario, self.config.n, self.config.points, self.config.seed, self.config.suite
        )?;
        for c in &self.checks {
            let r = c.max_residual.map(|r| format!("{r:.3e}")).unwrap_or_else(|| "-".into());
            write!(f, "{} {:<40} {:>10}  {}", if c.passed { "PASS" } else { "FAIL" }, c.id, r, c.anchor)?;
            if let Some(n) = &c.note {
                write!(f, "  [{n}]")?;
            }
            writeln!(f)?;
        }
        write!(f, "{} checks, {} passed, {} failed", self.summary.total, self.summary.passed, self.summary.failed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_rules() {
        assert!(Tolerance::POLY.accepts(1e-10, 1e6));
        assert!(!Tolerance::POLY.accepts(1e-8, 1e6));
        assert!(Tolerance::RATIONAL.accepts(1e-8, 1e3));
        assert!(!Tolerance::EXACT.accepts(1e-300, 1.0));
        assert!(Tolerance::EXACT.accepts(0.0, 1.0));
        assert!(!Tolerance::POLY.accepts(f64::NAN, 1.0));
    }

    #[test]
    fn report_sorts_and_counts() {
        let cfg = RunConfig { n: 1, points: 1, seed: 0, tolerance: Tolerance::POLY, suite: "all".into() };
        let r = VerificationReport::new(
            "t",
            cfg,
            vec![Check::flag("b", "", 1, false, ""), Check::flag("a", "", 1, true, "")],
        );
        assert_eq!(r.checks[0].id, "a");
        assert_eq!(r.summary.failed, 1);
        assert!(!r.all_passed());
    }
}
