//! Level states of one macro cell: orthonormality and fiducial moments.

use phasecell::config::PhysConfig;
use phasecell::lattice_states::LatticeState;

fn main() -> phasecell::error::Result<()> {
    let cfg = PhysConfig::code_units(4, 0, 0);
    let family = LatticeState::macro_cell_states(&cfg, 0, 0)?;
    let mut worst = 0.0f64;
    for (i, s) in family.iter().enumerate() {
        for (j, t) in family.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((s.inner(t).re - target).abs());
        }
    }
    println!("{} states per macro cell, max |<s|t> - delta| = {worst:.2e}", family.len());
    println!("K  <p>            (dp)^2         (dx)^2");
    for k in 1..=cfg.levels {
        let s = LatticeState::level(&cfg, k, 0, 0)?;
        let p1 = s.momentum_moment_exact(&cfg, 1)?;
        let p2 = s.momentum_moment_exact(&cfg, 2)?;
        let x1 = s.position_moment(&cfg, 1)?;
        let x2 = s.position_moment(&cfg, 2)?;
        println!("{k}  {p1:<13.6} {:<14.6} {:.6}", p2 - p1 * p1, x2 - x1 * x1);
    }
    let chi = LatticeState::remainder(&cfg, 0, 0)?;
    println!("remainder norm {:.12}", chi.norm());
    Ok(())
}
