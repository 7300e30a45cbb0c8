use std::fmt::Write as _;
use std::time::Duration;

use serde::{Deserialize, Serialize};

/// How an observed value is judged against its expectation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode", content = "tolerance")]
pub enum Tolerance {
    /// `|observed - expected| <= tol`
    Absolute(f64),
    /// `|observed - expected| <= tol * |expected|`
    Relative(f64),
    /// `observed <= expected + tol`
    AtMost(f64),
    /// `observed >= expected - tol`
    AtLeast(f64),
}

impl Tolerance {
    pub fn accepts(self, expected: f64, observed: f64) -> bool {
        match self {
            Tolerance::Absolute(t) => (observed - expected).abs() <= t,
            Tolerance::Relative(t) => (observed - expected).abs() <= t * expected.abs(),
            Tolerance::AtMost(t) => observed <= expected + t,
            Tolerance::AtLeast(t) => observed >= expected - t,
        }
    }

    pub fn mode(self) -> &'static str {
        match self {
            Tolerance::Absolute(_) => "absolute",
            Tolerance::Relative(_) => "relative",
            Tolerance::AtMost(_) => "at-most",
            Tolerance::AtLeast(_) => "at-least",
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Tolerance::Absolute(t) | Tolerance::Relative(t) | Tolerance::AtMost(t) | Tolerance::AtLeast(t) => t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub id: String,
    pub expected: f64,
    pub observed: f64,
    pub tolerance: Tolerance,
    pub passed: bool,
}

/// A named value reported without a pass/fail bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub id: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub campaign: String,
    pub seed: Option<u64>,
    pub checks: Vec<CheckRecord>,
    pub observations: Vec<Observation>,
    /// Wall-clock time; kept out of serialized output so reports stay
    /// byte-identical across runs.
    #[serde(skip)]
    pub runtime: Duration,
}

pub const CSV_HEADER: &str = "campaign,check,expected,observed,tolerance,mode,passed";

impl CampaignReport {
    pub fn new(campaign: impl Into<String>, seed: Option<u64>) -> Self {
        CampaignReport {
            campaign: campaign.into(),
            seed,
            checks: Vec::new(),
            observations: Vec::new(),
            runtime: Duration::ZERO,
        }
    }

    pub fn check(&mut self, id: impl Into<String>, expected: f64, observed: f64, tolerance: Tolerance) -> bool {
        let passed = tolerance.accepts(expected, observed);
        self.checks.push(CheckRecord { id: id.into(), expected, observed, tolerance, passed });
        passed
    }

    pub fn observe(&mut self, id: impl Into<String>, value: f64) {
        self.observations.push(Observation { id: id.into(), value });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }

    /// One CSV record per check, then one per observation (with empty
    /// expected/tolerance/mode/passed columns), under [`CSV_HEADER`].
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{},{},{:e},{:e},{:e},{},{}",
                self.campaign,
                c.id,
                c.expected,
                c.observed,
                c.tolerance.value(),
                c.tolerance.mode(),
                c.passed
            );
        }
        for o in &self.observations {
            let _ = writeln!(out, "{},{},,{:e},,,", self.campaign, o.id, o.value);
        }
        out
    }

    /// Human-readable table.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let width = self
            .checks
            .iter()
            .map(|c| c.id.len())
            .chain(self.observations.iter().map(|o| o.id.len()))
            .max()
            .unwrap_or(5)
            .max(5);
        let _ = writeln!(out, "campaign {} ({} checks, {} failed)", self.campaign, self.checks.len(), self.failures());
        for c in &self.checks {
            let _ = writeln!(
                out,
                "  {:<width$}  {}  expected {:>+.12e}  observed {:>+.12e}  {} {:.1e}",
                c.id,
                if c.passed { "PASS" } else { "FAIL" },
                c.expected,
                c.observed,
                c.tolerance.mode(),
                c.tolerance.value()
            );
        }
        for o in &self.observations {
            let _ = writeln!(out, "  {:<width$}  ----  value    {:>+.12e}", o.id, o.value);
        }
        out
    }
}
