//! Dense window-basis matrix of a continuous density kernel.
//!
//! `⟨ψ_{nm}|ρ|ψ_{n'm'}⟩ = ∫∫ ψ*_{nm}(x) ρ(x, y) ψ_{n'm'}(y)` is evaluated by
//! Gauss-Legendre quadrature on each pair of cells `(n, n')` close enough
//! for `ρ(x, y)` to be non-negligible, as `B = V_n† K V_{n'}`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::config::PhysConfig;
use crate::density::WindowDensity;
use crate::error::{Error, Result};
use crate::quad::panel_nodes;
use crate::wigner::Kernel;

const PANEL: usize = 16;
const COHERENCE_CUTOFF: f64 = 9.0;
const CELL_FLOOR: f64 = 1e-16;

/// Quadrature nodes per cell and the sampled windows `√w ψ_m(x)`.
struct CellBasis {
    nodes: Vec<(f64, f64)>,
    /// `q × W`.
    v: DMatrix<C64>,
}

fn cell_basis(cfg: &PhysConfig, n: i64, panels: usize) -> CellBasis {
    let a = cfg.a;
    let c = n as f64 * a;
    let nodes = panel_nodes(c - 0.5 * a, c + 0.5 * a, panels, PANEL);
    let (m_lo, _) = cfg.window_range();
    let w = cfg.windows_per_cell();
    let v = DMatrix::from_fn(nodes.len(), w, |i, j| {
        let (x, wt) = nodes[i];
        let m = m_lo + j as i64;
        C64::from_polar((wt / a).sqrt(), 2.0 * PI * m as f64 * (x - c) / a)
    });
    CellBasis { nodes, v }
}

/// Window-basis matrix of `ρ` over the whole truncation.
pub fn window_density(cfg: &PhysConfig, kernel: &dyn Kernel) -> Result<WindowDensity> {
    cfg.validate()?;
    if (kernel.hbar() - cfg.hbar).abs() > 1e-12 * cfg.hbar {
        return Err(Error::InvalidConfig("kernel and configuration disagree on hbar".into()));
    }
    let a = cfg.a;
    let (sx, coh) = kernel.scales();
    let reach = ((COHERENCE_CUTOFF * coh) / a).ceil() as i64 + 1;
    let (m_lo, m_hi) = cfg.window_range();
    let cycles = m_lo.abs().max(m_hi.abs()) as f64;
    let mu_max = [cfg.n_range.0, cfg.n_range.1].iter().map(|&n| kernel.local_momentum(n as f64 * a).abs()).fold(0.0, f64::max);
    let count = 8.0 * (cycles + mu_max * a / (2.0 * PI * cfg.hbar)) + 64.0 + 24.0 * a / sx + 8.0 * a / coh;
    let panels = (count / PANEL as f64).ceil() as usize;

    let cells: Vec<i64> = (cfg.n_range.0..=cfg.n_range.1).collect();
    let bases: Vec<CellBasis> = cells.par_iter().map(|&n| cell_basis(cfg, n, panels)).collect();
    let weights: Vec<f64> = bases.iter().map(|b| b.nodes.iter().map(|&(x, w)| w * kernel.density(x)).sum()).collect();
    let floor = CELL_FLOOR * kernel.trace();
    let mut pairs = Vec::new();
    for i in 0..cells.len() {
        for j in i..cells.len() {
            if (j - i) as i64 <= reach && weights[i].max(0.0).sqrt() * weights[j].max(0.0).sqrt() > floor {
                pairs.push((i, j));
            }
        }
    }
    let blocks: Vec<((usize, usize), DMatrix<C64>)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (bi, bj) = (&bases[i], &bases[j]);
            let k = DMatrix::from_fn(bi.nodes.len(), bj.nodes.len(), |r, c| {
                let (x, wx) = bi.nodes[r];
                let (y, wy) = bj.nodes[c];
                kernel.kernel(x, y) * (wx * wy).sqrt()
            });
            let mut b = bi.v.adjoint() * k * &bj.v;
            if i == j {
                b = (&b + b.adjoint()) * C64::new(0.5, 0.0);
            }
            ((i, j), b)
        })
        .collect();
    let w = cfg.windows_per_cell();
    let mut mat = DMatrix::<C64>::zeros(cfg.basis_size(), cfg.basis_size());
    for ((i, j), b) in blocks {
        mat.view_mut((i * w, j * w), (w, w)).copy_from(&b);
        if i != j {
            mat.view_mut((j * w, i * w), (w, w)).copy_from(&b.adjoint());
        }
    }
    WindowDensity::from_matrix(cfg, mat)
}
