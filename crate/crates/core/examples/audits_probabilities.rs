//! Completeness deficit, validity conditions and an interval probability
//! against the canonical marginal.

use phasecell::audits::{completeness_audit, interval_probability, IntervalSpec, Thresholds};
use phasecell::cell_traces::{CellTraces, TraceOptions};
use phasecell::config::PhysConfig;
use phasecell::pair::{CommutingPair, Observable};
use phasecell::wigner::GaussianState;

fn main() -> phasecell::error::Result<()> {
    let cfg = PhysConfig::code_units(7, 49, 49);
    let spreads = (8.0 * cfg.a, 8.0 * cfg.macro_width());
    let g = GaussianState::new((0.3, 0.4 * cfg.macro_width()), spreads, 0.0, cfg.hbar)?;
    let rho = CellTraces::new(&cfg, &g, TraceOptions::default())?;
    let thresholds = Thresholds::default();

    let report = completeness_audit(&rho, 0.005, &thresholds)?;
    println!("sum of level weights {:.6}, 1 - 2^-N = {:.6}", report.audit.measured, report.audit.predicted);
    for share in &report.levels {
        println!("  K={} {:.5} (2^-K = {:.5})", share.k, share.measured, share.predicted);
    }

    let pair = CommutingPair::build(&cfg)?;
    let interval = IntervalSpec { axis: Observable::X, lo_index: -8, hi_index: 8 };
    let r = interval_probability(&pair, &rho, &interval, 0.01, &thresholds)?;
    println!("P(X in [{:.1}, {:.1}]) = {:.5}, canonical {:.5}", r.bounds.0, r.bounds.1, r.audit.measured, r.audit.predicted);
    for c in &r.audit.conditions {
        println!("  {} = {:.4} (threshold {}) {}", c.name, c.value, c.threshold, if c.satisfied { "holds" } else { "violated" });
    }
    Ok(())
}
