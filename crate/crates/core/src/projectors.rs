//! Exact phase-space cell projectors `E = I_cell − |χ⟩⟨χ|`, their translates
//! and unions.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::config::PhysConfig;
use crate::density::CellDensity;
use crate::error::Result;
use crate::lattice_states::{window_u, LatticeState};

/// Projector onto the `2^N − 1` finite-dispersion states of macro cell
/// `(n, M)`, stored as the identity on the cell's window block minus the
/// remainder state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellProjector {
    #[serde(rename = "N")]
    pub levels: u32,
    pub cell: (i64, i64),
    #[serde(rename = "complement_state")]
    pub complement: LatticeState,
    /// Momentum recentring value in units of `2πℏ/a` (absolute, not relative
    /// to the cell); zero means the projector has not been recentred.
    pub p_offset: f64,
}

/// First and second moments of `E / Tr E` viewed as a density operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectorMoments {
    pub mean_x: f64,
    pub var_x: f64,
    /// `⟨p⟩_E` minus the recentring offset.
    pub mean_p: f64,
    pub var_p: f64,
}

/// `Tr(E[x̂, p̂])` split into the projector part and the remainder channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalianLowReport {
    pub levels: u32,
    pub rank: usize,
    /// `Tr(E[x̂, p̂])`, equal to `iℏ Tr E` for this non-exhaustive projector.
    pub trace_commutator: C64,
    pub expected: C64,
    /// `⟨χ|[x̂, p̂]|χ⟩` evaluated on the same window block.
    pub remainder_channel: C64,
    /// Sum over the whole block, which vanishes.
    pub block_total: C64,
}

/// `⟨s|[x̂, p̂]|s⟩` using the exact window matrix elements of `x̂` and the
/// diagonal lattice momentum.
pub fn block_commutator(cfg: &PhysConfig, s: &LatticeState) -> C64 {
    let b = cfg.b();
    let mut acc = C64::new(0.0, 0.0);
    for (i, ci) in s.coeffs.iter().enumerate() {
        for (j, cj) in s.coeffs.iter().enumerate() {
            if i != j {
                let k = j as i64 - i as i64;
                acc += ci.conj() * cj * window_u(cfg.a, k) * (b * k as f64);
            }
        }
    }
    acc
}

impl CellProjector {
    pub fn build(cfg: &PhysConfig, n: i64, big_m: i64) -> Result<Self> {
        let complement = LatticeState::remainder(cfg, n, big_m)?;
        Ok(Self { levels: cfg.levels, cell: (n, big_m), complement, p_offset: 0.0 })
    }

    pub fn size(&self) -> usize {
        1usize << self.levels
    }

    pub fn rank(&self) -> usize {
        self.size() - 1
    }

    /// Lowest window index of the cell's block.
    pub fn m_lo(&self) -> i64 {
        self.cell.1 * self.size() as i64
    }

    /// Dense `2^N × 2^N` matrix on the cell's window block.
    pub fn matrix(&self) -> DMatrix<C64> {
        let d = self.size();
        let chi = DMatrix::from_iterator(d, 1, self.complement.coeffs.iter().copied());
        DMatrix::<C64>::identity(d, d) - &chi * chi.adjoint()
    }

    /// `E|s⟩`.
    pub fn apply(&self, s: &LatticeState) -> LatticeState {
        let d = self.size() as i64;
        let lo = self.m_lo();
        let mut coeffs: Vec<C64> =
            if s.cell_n == self.cell.0 { (lo..lo + d).map(|m| s.coeff(m)).collect() } else { vec![C64::new(0.0, 0.0); d as usize] };
        let overlap = self.complement.inner(s);
        for (c, x) in coeffs.iter_mut().zip(&self.complement.coeffs) {
            *c -= x * overlap;
        }
        LatticeState { cell_n: self.cell.0, m_offset: lo, coeffs, label: crate::lattice_states::StateLabel::Combination }
    }

    pub fn shifted(&self, cfg: &PhysConfig, dn: i64, d_macro: i64) -> Result<Self> {
        let complement = self.complement.shift(cfg, dn, d_macro)?;
        Ok(Self {
            levels: self.levels,
            cell: (self.cell.0 + dn, self.cell.1 + d_macro),
            complement,
            p_offset: if self.p_offset == 0.0 { 0.0 } else { self.p_offset + (d_macro * self.size() as i64) as f64 },
        })
    }

    /// `Tr(Eρ)`.
    pub fn expectation(&self, rho: &dyn CellDensity) -> f64 {
        rho.block_trace(self.cell.0, self.cell.1) - rho.expect(&self.complement)
    }

    /// The finite-dispersion states spanning the range of `E`.
    pub fn level_states(&self, cfg: &PhysConfig) -> Result<Vec<LatticeState>> {
        let mut states = LatticeState::macro_cell_states(cfg, self.cell.0, self.cell.1)?;
        states.pop();
        Ok(states)
    }

    /// Moments of the mixture `E / Tr E`, including the spread of the
    /// per-level means.
    pub fn moments(&self, cfg: &PhysConfig) -> Result<ProjectorMoments> {
        let states = self.level_states(cfg)?;
        let w = 1.0 / states.len() as f64;
        let (mut x1, mut x2, mut p1, mut p2) = (0.0, 0.0, 0.0, 0.0);
        for s in &states {
            x1 += w * s.position_moment(cfg, 1)?;
            x2 += w * s.position_moment(cfg, 2)?;
            p1 += w * s.momentum_moment_exact(cfg, 1)?;
            p2 += w * s.momentum_moment_exact(cfg, 2)?;
        }
        Ok(ProjectorMoments { mean_x: x1, var_x: x2 - x1 * x1, mean_p: p1 - self.p_offset * cfg.b(), var_p: p2 - p1 * p1 })
    }

    /// Same projector with `p_offset = ⟨p⟩_E / (2πℏ/a)`.
    pub fn recenter(&self, cfg: &PhysConfig) -> Result<Self> {
        let plain = Self { p_offset: 0.0, ..self.clone() };
        let mean = plain.moments(cfg)?.mean_p;
        Ok(Self { p_offset: mean / cfg.b(), ..plain })
    }

    pub fn balian_low_diagnostic(&self, cfg: &PhysConfig) -> Result<BalianLowReport> {
        let mut trace = C64::new(0.0, 0.0);
        for s in self.level_states(cfg)? {
            trace += block_commutator(cfg, &s);
        }
        let chi = block_commutator(cfg, &self.complement);
        Ok(BalianLowReport {
            levels: self.levels,
            rank: self.rank(),
            trace_commutator: trace,
            expected: C64::new(0.0, cfg.hbar * self.rank() as f64),
            remainder_channel: chi,
            block_total: trace + chi,
        })
    }
}

/// Split of `1 − Σ Tr(E_{nM} ρ)` into the remainder weight inside the
/// truncation and the weight the truncation misses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeficitReport {
    /// `Σ ⟨χ|ρ|χ⟩` over truncated cells.
    pub deficit: f64,
    /// `Tr ρ − (weight inside the truncated window basis)`.
    pub leakage: f64,
    /// `Σ Tr(E_{nM} ρ)` over truncated cells.
    pub captured: f64,
}

pub fn exhaustivity_deficit(rho: &dyn CellDensity) -> Result<DeficitReport> {
    let cfg = rho.config().clone();
    let cells: Vec<(i64, i64)> =
        (cfg.n_range.0..=cfg.n_range.1).flat_map(|n| (cfg.macro_range.0..=cfg.macro_range.1).map(move |m| (n, m))).collect();
    let parts: Vec<(f64, f64)> = cells
        .par_iter()
        .map(|&(n, m)| -> Result<(f64, f64)> {
            let chi = LatticeState::remainder(&cfg, n, m)?;
            Ok((rho.block_trace(n, m), rho.expect(&chi)))
        })
        .collect::<Result<_>>()?;
    let block: f64 = parts.iter().map(|p| p.0).sum();
    let deficit: f64 = parts.iter().map(|p| p.1).sum();
    Ok(DeficitReport { deficit, leakage: rho.total_trace() - block, captured: block - deficit })
}

/// Union of macro cells `Γ` with projector `E_Γ = Σ_{cells ∈ Γ} E_cell`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionProjector {
    pub cells: BTreeSet<(i64, i64)>,
}

impl RegionProjector {
    pub fn new<I: IntoIterator<Item = (i64, i64)>>(cells: I) -> Self {
        Self { cells: cells.into_iter().collect() }
    }

    /// Rectangle of cells `n ∈ [n1, n2]`, `M ∈ [m1, m2]`.
    pub fn rectangle(n: (i64, i64), big_m: (i64, i64)) -> Self {
        Self::new((n.0..=n.1).flat_map(|a| (big_m.0..=big_m.1).map(move |b| (a, b))))
    }

    pub fn projectors(&self, cfg: &PhysConfig) -> Result<Vec<CellProjector>> {
        self.cells.iter().map(|&(n, m)| CellProjector::build(cfg, n, m)).collect()
    }

    /// `Tr(E_Γ ρ)`.
    pub fn probability(&self, cfg: &PhysConfig, rho: &dyn CellDensity) -> Result<f64> {
        Ok(self.projectors(cfg)?.iter().map(|e| e.expectation(rho)).sum())
    }

    /// Dense matrix of `E_Γ` over the truncated window basis.
    pub fn matrix(&self, cfg: &PhysConfig) -> Result<DMatrix<C64>> {
        let d = cfg.basis_size();
        let mut out = DMatrix::<C64>::zeros(d, d);
        for e in self.projectors(cfg)? {
            let block = e.matrix();
            let base = cfg
                .flat_index(e.cell.0, e.m_lo())
                .ok_or_else(|| crate::error::Error::Truncation(format!("cell {:?} outside truncation", e.cell)))?;
            out.view_mut((base, base), (e.size(), e.size())).copy_from(&block);
        }
        Ok(out)
    }
}
