//! Acceptance suite: one PASS/FAIL line per criterion, with the measured
//! values of every failing sub-check. Exits non-zero when any line fails.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use phasecell::audits::AuditReport;
use phasecell::report::Report;
use phasecell::scenario::{ResolvedState, Scenario};
use serde_json::{json, Value};

fn scenario_file(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    Scenario::from_path(&path).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn scenario(doc: Value) -> Scenario {
    Scenario::from_json(&doc.to_string()).expect("inline scenario parses")
}

fn run(s: &Scenario) -> Result<Report, String> {
    let experiment = s.resolve_experiment(None).map_err(|e| e.to_string())?;
    s.run(experiment, None).map_err(|e| e.to_string())
}

/// Sub-checks of one criterion.
struct Criterion {
    id: u32,
    title: &'static str,
    budget: Duration,
    start: Instant,
    checks: usize,
    failures: Vec<String>,
}

impl Criterion {
    fn new(id: u32, title: &'static str, budget_secs: u64) -> Self {
        Self { id, title, budget: Duration::from_secs(budget_secs), start: Instant::now(), checks: 0, failures: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures.push(what());
        }
    }

    fn row(&mut self, label: &str, r: &AuditReport) {
        self.check(r.passed(), || {
            let unmet: Vec<&str> = r.conditions.iter().filter(|c| !c.satisfied).map(|c| c.name.as_str()).collect();
            let mut s = format!("{label}{} [{}] {:.6e} vs {:.6e}", r.quantity, r.equation, r.measured, r.predicted);
            if !unmet.is_empty() {
                s.push_str(&format!(" (unmet: {})", unmet.join(", ")));
            }
            s
        });
    }

    fn rows<'a>(&mut self, label: &str, report: &'a Report, keep: impl Fn(&AuditReport) -> bool) -> Vec<&'a AuditReport> {
        let picked: Vec<&AuditReport> = report.rows.iter().filter(|r| keep(r)).collect();
        self.check(!picked.is_empty(), || format!("{label}no rows selected"));
        for r in &picked {
            self.row(label, r);
        }
        picked
    }

    fn report(&mut self, label: &str, result: Result<Report, String>) -> Option<Report> {
        match result {
            Ok(r) => Some(r),
            Err(e) => {
                self.check(false, || format!("{label}run failed: {e}"));
                None
            }
        }
    }

    fn finish(mut self) -> bool {
        let elapsed = self.start.elapsed();
        let budget = self.budget;
        self.check(elapsed < budget, || format!("runtime {:.1} s over budget {} s", elapsed.as_secs_f64(), budget.as_secs()));
        let ok = self.failures.is_empty();
        let mut line = format!(
            "criterion {}: {} {} ({} checks, {:.1} s of {} s)",
            self.id,
            if ok { "PASS" } else { "FAIL" },
            self.title,
            self.checks,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
        if !ok {
            line.push_str(&format!("; failed {}: {}", self.failures.len(), self.failures.join("; ")));
        }
        println!("{line}");
        ok
    }
}

fn eq(r: &AuditReport, tag: &str) -> bool {
    r.equation == tag
}

fn exact_algebra() -> bool {
    let mut c = Criterion::new(1, "exact algebra, N = 2..5", 10);
    for n in 2..=5u32 {
        let label = format!("N={n} ");
        let physics = json!({ "levels": n, "n_range": [0, 0], "macro_range": [0, 0] });
        let states = scenario(json!({ "experiment": "states", "physics": physics, "states": { "levels": [] } }));
        if let Some(r) = c.report(&label, run(&states)) {
            c.rows(&label, &r, |r| eq(r, "Eq. 4.9"));
        }
        let projector = scenario(json!({ "experiment": "projector", "physics": physics }));
        if let Some(r) = c.report(&label, run(&projector)) {
            let rows = c.rows(&label, &r, |r| ["Eq. 4.33", "Eq. 4.27", "Eq. 1.17"].contains(&r.equation.as_str()));
            let trace = rows.iter().find(|r| eq(r, "Eq. 4.33"));
            c.check(trace.is_some_and(|t| t.predicted == (2f64.powi(n as i32) - 1.0)), || format!("{label}Tr E target is not 2^N - 1"));
        }
    }
    c.finish()
}

fn fiducial_moments() -> bool {
    let mut c = Criterion::new(2, "fiducial moments, K = 1..5", 60);
    if let Some(r) = c.report("", run(&scenario_file("states.json"))) {
        c.rows("", &r, |r| ["Eq. 4.18", "Eq. 4.19", "Eq. 4.20", "Eq. 4.21"].contains(&r.equation.as_str()));
        c.rows("", &r, |r| eq(r, "Eq. 4.2"));
        let ks = r.rows.iter().filter(|r| eq(r, "Eq. 4.21")).count();
        c.check(ks == 5, || format!("expected 5 levels, found {ks}"));
    }
    c.finish()
}

fn completeness_deficit() -> bool {
    let mut c = Criterion::new(3, "completeness deficit and level shares, N = 2..4", 300);
    for n in 2..=4u32 {
        let label = format!("N={n} ");
        let s = scenario(json!({
            "experiment": "audit",
            "physics": { "levels": n, "n_range": [-49, 49], "macro_range": [-49, 49] },
            "state": { "kind": "broad", "spread_cells": 8.0, "spread_macros": 8.0, "center_cells": 0.3, "center_macros": 0.4 },
        }));
        match s.state.as_ref().map(|st| st.resolve(&s.physics)) {
            Some(Ok(ResolvedState::Gaussian(g))) => {
                let m = g.phase_moments();
                let product = (m.var_q * m.var_p).sqrt() / s.physics.hbar;
                let needed = 100.0 * 2f64.powi(n as i32);
                c.check(product >= needed, || format!("{label}dx dp / hbar = {product:.1} below {needed}"));
            }
            _ => c.check(false, || format!("{label}state does not resolve to a Gaussian")),
        }
        if let Some(r) = c.report(&label, run(&s)) {
            let total = c.rows(&label, &r, |r| eq(r, "Eq. 5.7"));
            let target = 1.0 - 0.5f64.powi(n as i32);
            c.check(total.iter().all(|t| t.predicted == target && t.tolerance <= 0.005), || format!("{label}Eq. 5.7 target or tolerance"));
            let shares = c.rows(&label, &r, |r| eq(r, "Eq. 5.6"));
            c.check(shares.len() == n as usize && shares.iter().all(|s| s.tolerance <= 0.01), || format!("{label}Eq. 5.6 rows"));
        }
    }
    c.finish()
}

fn closeness_constant() -> bool {
    let mut c = Criterion::new(4, "closeness constant and its scaling", 600);
    if let Some(r) = c.report("", run(&scenario_file("scaling.json"))) {
        for n in 3..=5 {
            let tag = format!("N={n}");
            c.rows("", &r, |r| (eq(r, "Eq. 6.16") || eq(r, "Eq. 6.13")) && r.quantity.ends_with(&tag));
        }
        let x_tol = r.rows.iter().filter(|r| eq(r, "Eq. 6.16")).all(|r| r.tolerance <= 0.1);
        let p_tol = r.rows.iter().filter(|r| eq(r, "Eq. 6.13")).all(|r| r.tolerance <= 0.15);
        c.check(x_tol && p_tol, || "norm tolerances looser than 10% / 15%".into());
        let slope = c.rows("", &r, |r| r.quantity.starts_with("slope"));
        c.check(slope.iter().all(|s| s.predicted == 0.5 && s.tolerance <= 0.05), || "slope target".into());
        let closed = c.rows("", &r, |r| r.quantity.starts_with("closed-form C"));
        c.check(closed.iter().all(|s| ((s.measured - 760.0) / 760.0).abs() < 0.01), || {
            format!("closed-form C(20) = {:.1}, expected about 7.6e2", closed.first().map_or(f64::NAN, |s| s.measured))
        });
    }
    c.finish()
}

fn condition_value(report: &Report, name: &str) -> Option<f64> {
    report.details["intervals"][0]["audit"]["conditions"].as_array()?.iter().find(|c| c["name"] == name).and_then(|c| c["value"].as_f64())
}

fn probability_coincidence() -> bool {
    let mut c = Criterion::new(5, "interval probabilities against canonical marginals", 300);
    if let Some(r) = c.report("", run(&scenario_file("probabilities.json"))) {
        let intervals = c.rows("", &r, |r| eq(r, "Eq. 7.11") || eq(r, "Eq. 7.13"));
        c.check(intervals.len() == 2 && intervals.iter().all(|r| r.tolerance <= 0.01 && !r.conditions.is_empty()), || {
            "need one X and one P interval at 1% with conditions".into()
        });
        let sums = c.rows("", &r, |r| eq(r, "Eq. 7.4") && r.quantity.starts_with("interval, complementary"));
        c.check(sums.iter().all(|r| r.predicted == 1.0 && r.tolerance <= 1e-10), || "partition is not checked against 1".into());
        c.rows("", &r, |r| r.quantity == "largest negative cell probability");
    }
    if let Some(r) = c.report("control ", run(&scenario_file("probabilities_negative_control.json"))) {
        match r.rows.iter().find(|r| eq(r, "Eq. 7.11")) {
            Some(row) => {
                let gap = (row.measured / row.predicted - 1.0).abs();
                c.check(gap > 0.05, || format!("control disagreement {:.2}% not above 5%", 100.0 * gap));
            }
            None => c.check(false, || "control has no position interval".into()),
        }
        let volume = condition_value(&r, "(iii) phase volume");
        c.check(volume.is_some_and(|v| v <= 0.1), || format!("control phase-volume ratio {volume:?} not 10x below 1"));
        let deficit = r.details["intervals"][0]["audit"]["conditions"][0]["satisfied"].as_bool();
        c.check(deficit == Some(true), || "control should keep condition (i)".into());
        c.rows("control ", &r, |r| eq(r, "Eq. 7.4"));
    }
    c.finish()
}

fn wigner_dynamics() -> bool {
    let mut c = Criterion::new(6, "Wigner pairing, moment laws and correspondences", 300);
    if let Some(r) = c.report("", run(&scenario_file("evolve.json"))) {
        let wanted = ["Eq. 2.3", "Eq. 2.6", "Eq. 2.7", "Eq. 2.9", "Eq. 2.11", "Eq. 2.12"];
        let rows = c.rows("", &r, |r| wanted.contains(&r.equation.as_str()));
        let found: Vec<&str> = rows.iter().map(|r| r.equation.as_str()).collect();
        c.check(wanted.iter().all(|w| found.contains(w)), || format!("missing rows among {wanted:?}"));
    }
    c.finish()
}

fn pseudoclassical() -> bool {
    let mut c = Criterion::new(7, "pseudo-classical approximation along a broadness ladder, N = 3", 300);
    let s = scenario_file("closeness_ladder.json");
    c.check(s.physics.levels == 3, || "ladder scenario is not N = 3".into());
    if let Some(r) = c.report("", run(&s)) {
        let rows = c.rows("", &r, |r| eq(r, "Eq. 1.5"));
        c.check(rows.len() == 7, || format!("expected 3 x 2 ladder rows plus monotonicity, found {}", rows.len()));
    }
    c.finish()
}

fn regime() -> bool {
    let mut c = Criterion::new(8, "regime ratio", 1);
    if let Some(r) = c.report("", run(&scenario_file("regime.json"))) {
        let rows = c.rows("", &r, |r| eq(r, "Eq. 1.3"));
        c.check(rows.iter().all(|r| (5e11..=2e12).contains(&r.measured)), || {
            format!("ratio {:.3e} outside [5e11, 2e12]", rows.first().map_or(f64::NAN, |r| r.measured))
        });
    }
    c.finish()
}

fn main() -> ExitCode {
    let suite: [fn() -> bool; 8] = [
        exact_algebra,
        fiducial_moments,
        completeness_deficit,
        closeness_constant,
        probability_coincidence,
        wigner_dynamics,
        pseudoclassical,
        regime,
    ];
    let passed = suite.iter().map(|f| f()).filter(|&ok| ok).count();
    println!("acceptance: {passed} of {} criteria pass", suite.len());
    if passed == suite.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
