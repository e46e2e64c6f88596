//! Evolve a Gaussian Wigner function under the high-temperature master
//! equation and compare its second moments with the moment law.

use phasecell::dynamics::{evolve_master, moment_law, BathParams};
use phasecell::wigner::{Axis, GaussianState, WignerGrid};

fn main() -> phasecell::error::Result<()> {
    let g = GaussianState::new((0.0, 0.5), (1.0, 1.0), 0.0, 1.0)?;
    let bath = BathParams::new(1.0, 2.0, 1.0)?;
    let q = Axis::centered(0.0, 0.125, 720);
    let p = Axis::centered(0.5, 0.125, 480);
    let w0 = WignerGrid::from_fn(q, p, |q, p| g.wigner(p, q));
    let t = 2.0;
    let w = evolve_master(&w0, &bath, t, 64)?;
    let start = w0.moments();
    let got = w.moments();
    let law = moment_law(&start, &bath, t);
    println!("t = {t}: norm {:.9}", got.norm);
    println!("(dx)^2 grid {:.6} law {:.6}", got.var_q, law.var_q);
    println!("(dp)^2 grid {:.6} law {:.6}", got.var_p, law.var_p);
    println!("purity {:.4} -> {:.4}", w0.purity(1.0), w.purity(1.0));
    Ok(())
}
