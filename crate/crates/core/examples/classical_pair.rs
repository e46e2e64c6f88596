//! The commuting pair (X, P): spectra and its distance from (x, p) on a
//! broad Gaussian state.

use phasecell::cell_traces::{CellTraces, TraceOptions};
use phasecell::config::PhysConfig;
use phasecell::pair::{closeness_product, CommutingPair};
use phasecell::wigner::GaussianState;

fn main() -> phasecell::error::Result<()> {
    let cfg = PhysConfig::code_units(4, 30, 30);
    let pair = CommutingPair::build(&cfg)?;
    println!("X spectrum near 0: {:?}", &pair.x_spectrum()[29..32]);
    println!("P spectrum near 0: {:?}", &pair.p_spectrum()[29..32]);

    let spreads = (5.0 * cfg.a, 5.0 * cfg.macro_width());
    let g = GaussianState::new((0.0, 0.0), spreads, 0.0, cfg.hbar)?;
    let rho = CellTraces::new(&cfg, &g, TraceOptions::default())?;
    let d = pair.distances(&rho)?;
    let c = closeness_product(&cfg, &d);
    println!("||X - x||^2 {:.5} (a^2/12 = {:.5})", d.x.restricted, cfg.a * cfg.a / 12.0);
    println!("||P - p||^2 {:.3}", d.p.restricted);
    println!("C measured {:.3}, closed form 2^(N/2) pi / (3 sqrt 2) = {:.3}", c.c_measured, c.c_predicted);
    Ok(())
}
