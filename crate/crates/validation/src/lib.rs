//! Pass/fail bookkeeping for the acceptance target.

use std::time::{Duration, Instant};

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub id: &'static str,
    pub pass: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl Verdict {
    pub fn line(&self) -> String {
        let tag = if self.pass { "[PASS]" } else { "[FAIL]" };
        format!("{tag} {}: {} ({:.2?})", self.id, self.detail, self.elapsed)
    }
}

#[derive(Debug, Default)]
pub struct Report {
    verdicts: Vec<Verdict>,
}

impl Report {
    /// Runs `check`, prints its line and records it.
    pub fn run(&mut self, id: &'static str, check: impl FnOnce() -> (bool, String)) {
        let start = Instant::now();
        let (pass, detail) = check();
        let v = Verdict {
            id,
            pass,
            detail,
            elapsed: start.elapsed(),
        };
        println!("{}", v.line());
        self.verdicts.push(v);
    }

    pub fn failures(&self) -> Vec<&Verdict> {
        self.verdicts.iter().filter(|v| !v.pass).collect()
    }

    pub fn summary(&self) -> String {
        let failed = self.failures().len();
        format!(
            "{} criteria, {} passed, {failed} failed",
            self.verdicts.len(),
            self.verdicts.len() - failed
        )
    }
}

/// Collects sub-check failures into one verdict.
#[derive(Debug, Default)]
pub struct Checks {
    notes: Vec<String>,
    failed: Vec<String>,
}

impl Checks {
    pub fn expect(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        if !ok {
            self.failed.push(what.clone());
        }
        self.notes.push(what);
    }

    pub fn note(&mut self, what: impl Into<String>) {
        self.notes.push(what.into());
    }

    pub fn finish(self) -> (bool, String) {
        if self.failed.is_empty() {
            (true, self.notes.join("; "))
        } else {
            (false, format!("failed {}", self.failed.join("; ")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checks_report_only_failures() {
        let mut c = Checks::default();
        c.expect(true, "a");
        c.expect(false, "b");
        c.note("c");
        assert_eq!(c.finish(), (false, "failed b".to_string()));

        let mut r = Report::default();
        r.run("ok", || (true, "fine".into()));
        r.run("bad", || (false, "broken".into()));
        assert_eq!(r.failures().len(), 1);
        assert_eq!(r.summary(), "2 criteria, 1 passed, 1 failed");
    }
}
