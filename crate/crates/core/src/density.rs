//! Density operators as seen through the window basis.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::config::PhysConfig;
use crate::error::{Error, Result};
use crate::lattice_states::LatticeState;

/// What the projector and probability code needs from a density operator.
pub trait CellDensity: Sync {
    fn config(&self) -> &PhysConfig;

    /// `Σ_{m ∈ M} ⟨ψ_{nm}|ρ|ψ_{nm}⟩`: weight of the full window block of a
    /// macro cell.
    fn block_trace(&self, n: i64, big_m: i64) -> f64;

    /// `⟨s|ρ|s⟩`.
    fn expect(&self, s: &LatticeState) -> f64;

    /// Trace over the whole Hilbert space (including weight outside the
    /// truncation).
    fn total_trace(&self) -> f64;

    /// Weight of `ρ` in position or momentum beyond the phase-space region
    /// covered by the truncation; zero for operators built on the window basis.
    fn tail_mass(&self) -> f64 {
        0.0
    }

    /// Standard deviations of `ρ` in position and momentum.
    fn spreads(&self) -> (f64, f64) {
        crate::audits::coarse_spreads(self)
    }

    /// Weight inside the truncated window basis.
    fn truncated_trace(&self) -> f64 {
        let cfg = self.config();
        let mut acc = 0.0;
        for n in cfg.n_range.0..=cfg.n_range.1 {
            for big_m in cfg.macro_range.0..=cfg.macro_range.1 {
                acc += self.block_trace(n, big_m);
            }
        }
        acc
    }
}

/// Dense Hermitian matrix over the truncated window basis, ordered by
/// [`PhysConfig::flat_index`].
#[derive(Debug, Clone)]
pub struct WindowDensity {
    cfg: PhysConfig,
    pub mat: DMatrix<C64>,
}

impl WindowDensity {
    pub fn from_matrix(cfg: &PhysConfig, mat: DMatrix<C64>) -> Result<Self> {
        let d = cfg.basis_size();
        if mat.nrows() != d || mat.ncols() != d {
            return Err(Error::InvalidConfig(format!("density matrix is {}x{}, basis has {d} states", mat.nrows(), mat.ncols())));
        }
        let herm = (&mat - mat.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max);
        if herm > 1e-10 {
            return Err(Error::Numerical(format!("density matrix not Hermitian ({herm:.2e})")));
        }
        Ok(Self { cfg: cfg.clone(), mat })
    }

    /// Mixture `Σ w_i |s_i⟩⟨s_i|` of lattice states (weights are used as given).
    pub fn mixture(cfg: &PhysConfig, terms: &[(f64, LatticeState)]) -> Result<Self> {
        let d = cfg.basis_size();
        let mut mat = DMatrix::<C64>::zeros(d, d);
        for (w, s) in terms {
            let v = embed(cfg, s)?;
            mat += (&v * v.adjoint()) * C64::new(*w, 0.0);
        }
        Ok(Self { cfg: cfg.clone(), mat })
    }

    pub fn pure(cfg: &PhysConfig, s: &LatticeState) -> Result<Self> {
        Self::mixture(cfg, &[(1.0, s.clone())])
    }

    /// Column vector of `s` in the truncated basis.
    pub fn column(&self, s: &LatticeState) -> Result<DMatrix<C64>> {
        embed(&self.cfg, s)
    }
}

/// Column vector of a lattice state in the truncated basis.
pub fn embed(cfg: &PhysConfig, s: &LatticeState) -> Result<DMatrix<C64>> {
    let mut v = DMatrix::<C64>::zeros(cfg.basis_size(), 1);
    for (i, c) in s.coeffs.iter().enumerate() {
        let m = s.m_offset + i as i64;
        let idx = cfg
            .flat_index(s.cell_n, m)
            .ok_or_else(|| Error::Truncation(format!("state support ({}, {m}) outside truncation", s.cell_n)))?;
        v[(idx, 0)] = *c;
    }
    Ok(v)
}

impl CellDensity for WindowDensity {
    fn config(&self) -> &PhysConfig {
        &self.cfg
    }

    fn block_trace(&self, n: i64, big_m: i64) -> f64 {
        let size = self.cfg.macro_size();
        (0..size).filter_map(|j| self.cfg.flat_index(n, big_m * size + j)).map(|i| self.mat[(i, i)].re).sum()
    }

    fn expect(&self, s: &LatticeState) -> f64 {
        let mut acc = C64::new(0.0, 0.0);
        let idx: Vec<Option<usize>> = (0..s.coeffs.len()).map(|i| self.cfg.flat_index(s.cell_n, s.m_offset + i as i64)).collect();
        for (i, ci) in s.coeffs.iter().enumerate() {
            let Some(a) = idx[i] else { continue };
            for (j, cj) in s.coeffs.iter().enumerate() {
                let Some(b) = idx[j] else { continue };
                acc += ci.conj() * self.mat[(a, b)] * cj;
            }
        }
        acc.re
    }

    fn total_trace(&self) -> f64 {
        self.mat.trace().re
    }
}
