//! Verification reports: per-claim measured/bound curves and verdicts.

use std::fmt;
use std::io::{self, Write};

pub const REPORT_HEADER: &str = "claim,t,measured,bound,margin,pass";

/// How a row's violation is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// `(measured - bound) / bound`
    Relative,
    /// `measured - bound`
    Absolute,
}

/// One comparison point of a claim.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClaimRow {
    pub t: f64,
    pub measured: f64,
    pub bound: f64,
}

impl ClaimRow {
    /// `bound - measured`; positive when the bound holds.
    pub fn margin(&self) -> f64 {
        self.bound - self.measured
    }

    pub fn violation(&self, kind: ViolationKind) -> f64 {
        match kind {
            ViolationKind::Absolute => self.measured - self.bound,
            ViolationKind::Relative => {
                if self.bound > 0.0 {
                    (self.measured - self.bound) / self.bound
                } else if self.measured <= self.bound {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}

/// Verdict for one claim.
#[derive(Debug, Clone, PartialEq)]
pub struct ClaimResult {
    pub claim: String,
    pub rows: Vec<ClaimRow>,
    pub kind: ViolationKind,
    pub tol: f64,
    /// `false` when the claim's hypotheses do not hold; such claims pass
    /// vacuously.
    pub applicable: bool,
    pub note: String,
}

impl ClaimResult {
    pub fn new(claim: impl Into<String>, rows: Vec<ClaimRow>, kind: ViolationKind, tol: f64) -> Self {
        Self { claim: claim.into(), rows, kind, tol, applicable: true, note: String::new() }
    }

    pub fn not_applicable(claim: impl Into<String>, note: impl Into<String>) -> Self {
        Self {
            claim: claim.into(),
            rows: Vec::new(),
            kind: ViolationKind::Relative,
            tol: 0.0,
            applicable: false,
            note: note.into(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    /// Largest violation over the rows (`-∞` without rows).
    pub fn max_violation(&self) -> f64 {
        self.rows.iter().map(|r| r.violation(self.kind)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn row_passes(&self, row: &ClaimRow) -> bool {
        row.violation(self.kind) <= self.tol
    }

    pub fn passed(&self) -> bool {
        !self.applicable || self.rows.iter().all(|r| self.row_passes(r))
    }

    /// Row with the smallest margin.
    pub fn worst(&self) -> Option<&ClaimRow> {
        self.rows.iter().max_by(|a, b| a.violation(self.kind).total_cmp(&b.violation(self.kind)))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerificationReport {
    pub claims: Vec<ClaimResult>,
}

impl VerificationReport {
    pub fn single(claim: ClaimResult) -> Self {
        Self { claims: vec![claim] }
    }

    pub fn passed(&self) -> bool {
        self.claims.iter().all(ClaimResult::passed)
    }

    pub fn get(&self, claim: &str) -> Option<&ClaimResult> {
        self.claims.iter().find(|c| c.claim == claim)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ClaimResult> {
        self.claims.iter().filter(|c| !c.passed())
    }

    pub fn merge(mut self, other: VerificationReport) -> Self {
        self.claims.extend(other.claims);
        self
    }

    pub fn push(&mut self, claim: ClaimResult) {
        self.claims.push(claim);
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{REPORT_HEADER}")?;
        for c in &self.claims {
            if !c.applicable {
                writeln!(out, "{},,,,,n/a", c.claim)?;
                continue;
            }
            for row in &c.rows {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    c.claim,
                    row.t,
                    row.measured,
                    row.bound,
                    row.margin(),
                    c.row_passes(row)
                )?;
            }
        }
        Ok(())
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<24} {:>6} {:>14} {:>12} {:>10}  note", "claim", "result", "max violation", "tol", "rows")?;
        for c in &self.claims {
            let verdict = if !c.applicable {
                "n/a"
            } else if c.passed() {
                "pass"
            } else {
                "FAIL"
            };
            let violation = if c.rows.is_empty() { "-".to_string() } else { format!("{:.3e}", c.max_violation()) };
            writeln!(
                f,
                "{:<24} {:>6} {:>14} {:>12.3e} {:>10}  {}",
                c.claim,
                verdict,
                violation,
                c.tol,
                c.rows.len(),
                c.note
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_violation_edge_cases() {
        let r = ClaimRow { t: 1.0, measured: 0.0, bound: 0.0 };
        assert_eq!(r.violation(ViolationKind::Relative), 0.0);
        let r = ClaimRow { t: 1.0, measured: 1e-20, bound: 0.0 };
        assert_eq!(r.violation(ViolationKind::Relative), f64::INFINITY);
        let r = ClaimRow { t: 1.0, measured: 1.01, bound: 1.0 };
        assert!((r.violation(ViolationKind::Relative) - 0.01).abs() < 1e-12);
    }

    #[test]
    fn pass_iff_max_violation_within_tol() {
        let rows =
            vec![ClaimRow { t: 0.5, measured: 1.0, bound: 2.0 }, ClaimRow { t: 1.0, measured: 1.015, bound: 1.0 }];
        let c = ClaimResult::new("x", rows.clone(), ViolationKind::Relative, 0.02);
        assert!(c.passed());
        assert!(!ClaimResult::new("x", rows, ViolationKind::Relative, 0.01).passed());
        assert!(ClaimResult::not_applicable("y", "mixed sign").passed());
    }

    #[test]
    fn csv_rows() {
        let c = ClaimResult::new(
            "iss",
            vec![ClaimRow { t: 1.0, measured: 0.5, bound: 2.0 }],
            ViolationKind::Relative,
            0.02,
        );
        let mut report = VerificationReport::single(c);
        report.push(ClaimResult::not_applicable("max_principle", "f changes sign"));
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            format!("{REPORT_HEADER}\niss,1,0.5,2,1.5,true\nmax_principle,,,,,n/a\n")
        );
    }
}
