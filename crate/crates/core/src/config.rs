use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Physical constants and lattice truncation.
///
/// Positions are split into cells of length `a` centred on `n * a`; momenta
/// into lattice steps of `b = 2πℏ/a`. A macro momentum cell groups `2^N`
/// consecutive momentum lattice points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct PhysConfig {
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "one")]
    pub a: f64,
    /// Halving depth `N`.
    pub levels: u32,
    /// Inclusive range of position cells.
    pub n_range: (i64, i64),
    /// Inclusive range of macro momentum cells.
    pub macro_range: (i64, i64),
    /// Resolution used by quadrature oracles.
    #[serde(default = "default_quad")]
    pub quad_points: usize,
}

fn one() -> f64 {
    1.0
}

fn default_quad() -> usize {
    64
}

/// Integer position/momentum lattice coordinates of a window state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeIndex {
    pub n: i64,
    pub m: i64,
}

impl LatticeIndex {
    pub fn new(n: i64, m: i64) -> Self {
        Self { n, m }
    }
}

impl PhysConfig {
    /// Code units (ℏ = a = 1) with a symmetric truncation.
    pub fn code_units(levels: u32, cells: i64, macros: i64) -> Self {
        Self { hbar: 1.0, a: 1.0, levels, n_range: (-cells, cells), macro_range: (-macros, macros), quad_points: default_quad() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return Err(Error::InvalidConfig(format!("hbar must be positive, got {}", self.hbar)));
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::InvalidConfig(format!("a must be positive, got {}", self.a)));
        }
        if self.levels == 0 || self.levels > 30 {
            return Err(Error::InvalidConfig(format!("levels must be in 1..=30, got {}", self.levels)));
        }
        if self.n_range.0 > self.n_range.1 {
            return Err(Error::InvalidConfig("empty position-cell range".into()));
        }
        if self.macro_range.0 > self.macro_range.1 {
            return Err(Error::InvalidConfig("empty macro-cell range".into()));
        }
        if self.quad_points < 2 {
            return Err(Error::InvalidConfig("quad_points must be at least 2".into()));
        }
        Ok(())
    }

    /// Momentum lattice spacing `2πℏ/a`.
    pub fn b(&self) -> f64 {
        2.0 * PI * self.hbar / self.a
    }

    /// Number of window states per macro cell, `2^N`.
    pub fn macro_size(&self) -> i64 {
        1i64 << self.levels
    }

    /// Momentum width of a macro cell, `2^N · 2πℏ/a`.
    pub fn macro_width(&self) -> f64 {
        self.macro_size() as f64 * self.b()
    }

    pub fn cell_count(&self) -> usize {
        (self.n_range.1 - self.n_range.0 + 1) as usize
    }

    pub fn macro_count(&self) -> usize {
        (self.macro_range.1 - self.macro_range.0 + 1) as usize
    }

    /// Inclusive range of window momentum indices inside the truncation.
    pub fn window_range(&self) -> (i64, i64) {
        let s = self.macro_size();
        (self.macro_range.0 * s, (self.macro_range.1 + 1) * s - 1)
    }

    pub fn windows_per_cell(&self) -> usize {
        self.macro_count() * self.macro_size() as usize
    }

    /// Total dimension of the truncated window basis.
    pub fn basis_size(&self) -> usize {
        self.cell_count() * self.windows_per_cell()
    }

    pub fn contains_cell(&self, n: i64) -> bool {
        n >= self.n_range.0 && n <= self.n_range.1
    }

    pub fn contains_window(&self, m: i64) -> bool {
        let (lo, hi) = self.window_range();
        m >= lo && m <= hi
    }

    pub fn contains_macro(&self, big_m: i64) -> bool {
        big_m >= self.macro_range.0 && big_m <= self.macro_range.1
    }

    /// Macro cell holding window index `m`.
    pub fn macro_of(&self, m: i64) -> i64 {
        m.div_euclid(self.macro_size())
    }

    /// Position of the centre of cell `n`.
    pub fn cell_center(&self, n: i64) -> f64 {
        n as f64 * self.a
    }

    /// Cell containing position `x`; boundary points go to the upper cell.
    pub fn cell_of(&self, x: f64) -> i64 {
        (x / self.a + 0.5).floor() as i64
    }

    /// Row-major flat index of window state `(n, m)` in the truncated basis.
    pub fn flat_index(&self, n: i64, m: i64) -> Option<usize> {
        if !self.contains_cell(n) || !self.contains_window(m) {
            return None;
        }
        let cell = (n - self.n_range.0) as usize;
        let w = (m - self.window_range().0) as usize;
        Some(cell * self.windows_per_cell() + w)
    }

    /// Inverse of [`flat_index`](Self::flat_index).
    pub fn lattice_of(&self, flat: usize) -> LatticeIndex {
        let per = self.windows_per_cell();
        LatticeIndex { n: self.n_range.0 + (flat / per) as i64, m: self.window_range().0 + (flat % per) as i64 }
    }
}
