//! The cell projector E: rank, idempotence, exclusivity and moments.

use phasecell::config::PhysConfig;
use phasecell::projectors::CellProjector;

fn main() -> phasecell::error::Result<()> {
    let cfg = PhysConfig::code_units(3, 1, 1);
    let e = CellProjector::build(&cfg, 0, 0)?;
    let m = e.matrix();
    let trace: f64 = (0..m.nrows()).map(|i| m[(i, i)].re).sum();
    let idempotence = (&m * &m - &m).iter().map(|z| z.norm()).fold(0.0, f64::max);
    println!("rank {} trace {trace:.12} max |E^2 - E| {idempotence:.2e}", e.rank());

    let neighbour = e.shifted(&cfg, 0, 1)?;
    let overlap = e.level_states(&cfg)?.iter().map(|s| neighbour.apply(s).norm()).fold(0.0, f64::max);
    println!("max |E' psi| over the level states of E: {overlap:.2e}");

    let moments = e.moments(&cfg)?;
    println!("<x>_E {:.6} (dx)^2_E {:.6} <p>_E {:.6} (dp)^2_E {:.6}", moments.mean_x, moments.var_x, moments.mean_p, moments.var_p);
    let bl = e.balian_low_diagnostic(&cfg)?;
    println!("Tr(E[x,p]) = {:.6} i, expected {:.6} i", bl.trace_commutator.im, bl.expected.im);
    Ok(())
}
