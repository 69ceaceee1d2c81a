//! Verdict bookkeeping for the acceptance run in `tests/acceptance.rs`.

use std::time::Instant;

pub struct Verdict {
    pub id: u32,
    pub title: &'static str,
    pub passed: bool,
    pub details: Vec<String>,
}

impl Verdict {
    pub fn new(id: u32, title: &'static str) -> Self {
        Self { id, title, passed: true, details: Vec::new() }
    }

    /// Record a check; any failed check fails the criterion.
    pub fn check(&mut self, ok: bool, detail: impl Into<String>) {
        self.passed &= ok;
        let detail = detail.into();
        self.details.push(if ok { detail } else { format!("FAILED {detail}") });
    }

    pub fn note(&mut self, detail: impl Into<String>) {
        self.details.push(detail.into());
    }
}

/// Run every criterion, print one status line each plus indented details,
/// and return whether all of them passed.
pub fn run_all(criteria: Vec<fn() -> Verdict>) -> bool {
    let mut verdicts = Vec::new();
    for criterion in criteria {
        let start = Instant::now();
        let v = criterion();
        let secs = start.elapsed().as_secs_f64();
        println!("criterion {:>2}: {} {} ({secs:.1}s)", v.id, if v.passed { "PASS" } else { "FAIL" }, v.title);
        for d in &v.details {
            println!("      {d}");
        }
        verdicts.push(v);
    }
    let failed: Vec<u32> = verdicts.iter().filter(|v| !v.passed).map(|v| v.id).collect();
    println!();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", verdicts.len());
    } else {
        println!("acceptance: {} of {} criteria passed; failing: {failed:?}", verdicts.len() - failed.len(), verdicts.len());
    }
    failed.is_empty()
}
