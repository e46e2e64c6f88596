//! Cell-local traces of a continuous density kernel.
//!
//! Every quantity the projector code needs from `ρ` is a bilinear form
//! `⟨f|ρ|g⟩` with `f`, `g` supported on one position cell. Writing `x = na +
//! ū + ξ/2`, `y = na + ū − ξ/2`, such a form is `∫ dξ S_fg(ξ)` with the
//! profile `S_fg(ξ) = ∫ dū f*(ū + ξ/2) g(ū − ξ/2) ρ(na + ū, ξ)`. Momentum
//! translations of `f` and `g` only multiply the profile by a phase, so one
//! profile per cell serves every macro cell and every level state.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::config::PhysConfig;
use crate::density::CellDensity;
use crate::error::{Error, Result};
use crate::lattice_states::{sinc, LatticeState, StateLabel};
use crate::quad::panel_nodes;
use crate::wigner::Kernel;

const PANEL: usize = 16;
/// `ρ(x̄, ξ)` is treated as zero beyond this many coherence lengths.
const COHERENCE_CUTOFF: f64 = 9.0;
/// Cells whose diagonal weight is below this fraction of the trace are skipped.
const CELL_FLOOR: f64 = 1e-16;

/// `Σ_{i<l} e^{iθi}`.
pub fn dirichlet(l: usize, theta: f64) -> C64 {
    let t = theta - 2.0 * PI * (theta / (2.0 * PI)).round();
    let lf = l as f64;
    let r = lf * sinc(0.5 * lf * t) / sinc(0.5 * t);
    C64::from_polar(r, 0.5 * (lf - 1.0) * t)
}

/// `Σ_{i<l} i e^{iθi}`.
pub fn dirichlet_weighted(l: usize, theta: f64) -> C64 {
    let t = theta - 2.0 * PI * (theta / (2.0 * PI)).round();
    let lf = l as f64;
    let c = 0.5 * (lf - 1.0);
    let r = lf * sinc(0.5 * lf * t) / sinc(0.5 * t);
    let dr = if (t * lf).abs() < 1e-3 {
        let l2 = lf * lf - 1.0;
        -t * lf * l2 / 12.0 + t.powi(3) / 6.0 * lf * l2 * (3.0 * lf * lf - 7.0) / 240.0
    } else {
        let (sh, ch) = (0.5 * t).sin_cos();
        let (sl, cl) = (0.5 * lf * t).sin_cos();
        (0.5 * lf * cl * sh - 0.5 * sl * ch) / (sh * sh)
    };
    C64::from_polar(1.0, c * t) * C64::new(c * r, -dr)
}

/// Per macro cell `(n, M)` sums over its window block and its remainder
/// state `χ`. Window sums use the local index `i = m − M·2^N`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MacroRecord {
    /// `Σ_i ⟨ψ_i|ρ|ψ_i⟩`.
    pub block: f64,
    /// `Σ_i i ⟨ψ_i|ρ|ψ_i⟩`.
    pub q1: f64,
    /// `Σ_i i² ⟨ψ_i|ρ|ψ_i⟩`.
    pub q2: f64,
    /// `Σ_i ⟨uψ_i|ρ|uψ_i⟩` with `u = x − na`.
    pub u2_block: f64,
    /// `⟨χ|ρ|χ⟩`.
    pub chi: f64,
    /// `⟨iχ|ρ|iχ⟩` where `iχ = Σ_i i χ_i ψ_i`.
    pub chi_ii: f64,
    /// `⟨iχ|ρ|χ⟩`.
    pub chi_i0: C64,
    /// `⟨uχ|ρ|uχ⟩`.
    pub chi_uu: f64,
    /// `⟨uχ|ρ|χ⟩`.
    pub chi_u0: C64,
    /// `⟨χ|p̂ρp̂|χ⟩`.
    pub chi_pp: f64,
    /// `Σ_i ⟨uψ_i|ρ|ψ_i⟩`.
    pub u1_block: C64,
    /// `Σ_i ⟨ψ_i|p̂ρ|ψ_i⟩`.
    pub p_block: C64,
    /// `⟨χ|p̂ρ|χ⟩`.
    pub chi_p: C64,
    /// `Σ_i ⟨ψ_i|p̂ρp̂|ψ_i⟩`.
    pub pp_block: f64,
}

impl MacroRecord {
    /// `Tr(E x̂ ρ)` for the cell projector of cell `n` (cell centre `na`).
    pub fn trace_x_rho(&self, center: f64) -> C64 {
        (self.u1_block - self.chi_u0) + center * (self.block - self.chi)
    }

    /// `Tr(E p̂ ρ)`.
    pub fn trace_p_rho(&self) -> C64 {
        self.p_block - self.chi_p
    }
}

/// Which optional quantities to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceOptions {
    /// Every level state `⟨φ_{K,m}|ρ|φ_{K,m}⟩` in the truncation.
    pub levels: bool,
    /// `⟨χ|p̂ρp̂|χ⟩`, `Σ_i ⟨ψ_i|p̂ρ|ψ_i⟩` and `⟨χ|p̂ρ|χ⟩`.
    pub momentum_kernel: bool,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self { levels: true, momentum_kernel: true }
    }
}

// Indices of tabulated profiles.
const CHI: usize = 0;
const CHI_II: usize = 1;
const CHI_I0: usize = 2;
const CHI_UU: usize = 3;
const CHI_U0: usize = 4;
const FIRST_LEVEL: usize = 5;

struct Grid {
    /// `(ξ, weight)`.
    xi: Vec<(f64, f64)>,
    /// `(ū, weight)` for each `ξ` node.
    u: Vec<Vec<(f64, f64)>>,
    /// `f*(ū + ξ/2) g(ū − ξ/2)` per `ξ` node, flattened `[u][profile]`.
    table: Vec<Vec<C64>>,
    /// `D_r(ξ) = Σ_i i^r e^{−2πiiξ/a}` for `r = 0, 1, 2`.
    dr: Vec<[C64; 3]>,
    profiles: usize,
}

/// Diagonal moments of one position cell.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CellMoments {
    /// `∫_cell ρ(x, x) dx`.
    pub weight: f64,
    /// `∫_cell x ρ(x, x) dx`.
    pub x1: f64,
    /// `∫_cell x² ρ(x, x) dx`.
    pub x2: f64,
    /// `∫_cell ⟨x|p̂ρ|x⟩ dx`.
    pub p1: f64,
    /// `∫_cell ⟨x|p̂ρp̂|x⟩ dx`.
    pub p2: f64,
}

struct CellData {
    mu: f64,
    active: bool,
    moments: CellMoments,
    records: Vec<MacroRecord>,
    /// `[K − 1][m − m_lo(K)]`.
    levels: Vec<Vec<f64>>,
}

/// Cell-local traces of a [`Kernel`], precomputed over the truncation.
pub struct CellTraces<'k> {
    cfg: PhysConfig,
    kernel: &'k dyn Kernel,
    grid: Grid,
    cells: Vec<CellData>,
    options: TraceOptions,
}

impl<'k> CellTraces<'k> {
    pub fn new(cfg: &PhysConfig, kernel: &'k dyn Kernel, options: TraceOptions) -> Result<Self> {
        cfg.validate()?;
        if (kernel.hbar() - cfg.hbar).abs() > 1e-12 * cfg.hbar {
            return Err(Error::InvalidConfig(format!("kernel uses hbar = {}, configuration uses {}", kernel.hbar(), cfg.hbar)));
        }
        let a = cfg.a;
        let hbar = cfg.hbar;
        let l = cfg.macro_size() as usize;
        let (sx, coh) = kernel.scales();
        if !(sx > 0.0 && coh > 0.0) {
            return Err(Error::InvalidConfig("kernel scales must be positive".into()));
        }
        let xi_max = a.min(COHERENCE_CUTOFF * coh);
        let trace = kernel.trace();

        let x_panels = ((64.0 + 24.0 * a / sx) / PANEL as f64).ceil() as usize;
        let mut cells: Vec<CellData> = (cfg.n_range.0..=cfg.n_range.1)
            .map(|n| {
                let c = n as f64 * a;
                let mut moments = CellMoments::default();
                for (x, w) in panel_nodes(c - 0.5 * a, c + 0.5 * a, x_panels, PANEL) {
                    let d = w * kernel.density(x);
                    moments.weight += d;
                    moments.x1 += d * x;
                    moments.x2 += d * x * x;
                    if options.momentum_kernel {
                        moments.p1 += w * kernel.kernel_p_cs(x, 0.0).re;
                        moments.p2 += w * kernel.kernel_pp_cs(x, 0.0).re;
                    }
                }
                CellData {
                    mu: kernel.local_momentum(c),
                    active: moments.weight > CELL_FLOOR * trace,
                    moments,
                    records: Vec::new(),
                    levels: Vec::new(),
                }
            })
            .collect();

        let macro_k = |big_m: i64| 2.0 * PI * (big_m * l as i64) as f64 / a;
        let mut kmax: f64 = 0.0;
        let mut mu_spread: f64 = 0.0;
        for (idx, cell) in cells.iter().enumerate() {
            if !cell.active {
                continue;
            }
            for big_m in [cfg.macro_range.0, cfg.macro_range.1 + 1] {
                kmax = kmax.max((macro_k(big_m) - cell.mu / hbar).abs());
            }
            let c = (cfg.n_range.0 + idx as i64) as f64 * a;
            let spread = (kernel.local_momentum(c + 0.5 * a) - kernel.local_momentum(c - 0.5 * a)).abs();
            mu_spread = mu_spread.max(spread);
        }
        kmax += 2.0 * PI * l as f64 / a;

        let n_xi = 32.0 + 1.5 * kmax * xi_max + 8.0 * l as f64 * xi_max / a;
        let xi_panels = (n_xi / PANEL as f64).ceil() as usize;
        let n_u = 8.0 * l as f64 + 64.0 + 24.0 * a / sx + 2.0 * mu_spread * xi_max / hbar;
        let u_panels = (n_u / PANEL as f64).ceil() as usize;
        let grid = build_grid(cfg, xi_max, xi_panels, u_panels, options);

        let n_lo = cfg.n_range.0;
        cells.par_iter_mut().enumerate().for_each(|(idx, cell)| {
            if cell.active {
                fill_cell(cfg, kernel, &grid, n_lo + idx as i64, cell, options);
            }
        });
        Ok(Self { cfg: cfg.clone(), kernel, grid, cells, options })
    }

    fn cell(&self, n: i64) -> Option<&CellData> {
        if !self.cfg.contains_cell(n) {
            return None;
        }
        Some(&self.cells[(n - self.cfg.n_range.0) as usize])
    }

    /// Record of macro cell `(n, M)`; zero for skipped cells and outside the
    /// truncation.
    pub fn record(&self, n: i64, big_m: i64) -> MacroRecord {
        match self.cell(n) {
            Some(c) if c.active && self.cfg.contains_macro(big_m) => c.records[(big_m - self.cfg.macro_range.0) as usize],
            _ => MacroRecord::default(),
        }
    }

    /// Diagonal moments of cell `n` (zero outside the truncation).
    pub fn cell_moments(&self, n: i64) -> CellMoments {
        self.cell(n).map(|c| c.moments).unwrap_or_default()
    }

    pub fn options(&self) -> TraceOptions {
        self.options
    }

    /// `⟨φ_{K,m}|ρ|φ_{K,m}⟩` for the level state in cell `n`.
    pub fn level_value(&self, n: i64, k: u32, m: i64) -> Option<f64> {
        if !self.options.levels || k == 0 || k > self.cfg.levels {
            return None;
        }
        let c = self.cell(n)?;
        let per = 1i64 << (self.cfg.levels - k);
        let lo = self.cfg.macro_range.0 * per;
        let hi = (self.cfg.macro_range.1 + 1) * per - 1;
        if m < lo || m > hi {
            return None;
        }
        if !c.active {
            return Some(0.0);
        }
        Some(c.levels[(k - 1) as usize][(m - lo) as usize])
    }

    /// `⟨s|ρ|s⟩` by direct quadrature on the profile grid.
    pub fn direct_expect(&self, s: &LatticeState) -> f64 {
        let Some(cell) = self.cell(s.cell_n) else { return 0.0 };
        if !cell.active {
            return 0.0;
        }
        let a = self.cfg.a;
        let base = s.cell_n as f64 * a;
        let k0 = 2.0 * PI * s.m_offset as f64 / a;
        let eval = |u: f64| -> C64 {
            let z = C64::from_polar(1.0, 2.0 * PI * u / a);
            let mut acc = C64::new(0.0, 0.0);
            for c in s.coeffs.iter().rev() {
                acc = acc * z + c;
            }
            acc / a.sqrt()
        };
        let total: C64 = self
            .grid
            .xi
            .par_iter()
            .zip(&self.grid.u)
            .map(|(&(xi, wx), us)| {
                let mut prof = C64::new(0.0, 0.0);
                for &(u, w) in us {
                    let rho = self.kernel.kernel_cs(base + u, xi);
                    prof += eval(u + 0.5 * xi).conj() * eval(u - 0.5 * xi) * rho * w;
                }
                prof * C64::from_polar(wx, -k0 * xi)
            })
            .collect::<Vec<C64>>()
            .iter()
            .sum();
        total.re
    }

    pub fn kernel(&self) -> &'k dyn Kernel {
        self.kernel
    }

    /// Weight of `ρ` outside the truncated cells, `Tr ρ − ∫_cells ρ(x, x)`.
    pub fn position_tail(&self) -> f64 {
        let inside: f64 = self.cells.iter().map(|c| c.moments.weight).sum();
        (self.kernel.trace() - inside).max(0.0)
    }

    /// Weight of `ρ` outside the momentum band of the truncated windows,
    /// `[(m_lo − ½) b, (m_hi + ½) b]`.
    pub fn momentum_tail(&self) -> f64 {
        (self.kernel.trace() - self.momentum_moments()[0]).max(0.0)
    }

    /// `∫ p^r ⟨p|ρ|p⟩ dp` for `r = 0, 1, 2` over the momentum band of the
    /// truncated windows.
    pub fn momentum_moments(&self) -> [f64; 3] {
        let b = self.cfg.b();
        let (m_lo, m_hi) = self.cfg.window_range();
        let (lo, hi) = ((m_lo as f64 - 0.5) * b, (m_hi as f64 + 0.5) * b);
        let (sx, coh) = self.kernel.scales();
        let hbar = self.cfg.hbar;
        let scale = (hbar / coh).max(0.5 * hbar / sx);
        let panels = ((64.0 + 24.0 * (hi - lo) / scale) / PANEL as f64).ceil() as usize;
        panel_nodes(lo, hi, panels, PANEL)
            .par_iter()
            .map(|&(p, w)| {
                let d = w * self.kernel.momentum_density(p);
                [d, d * p, d * p * p]
            })
            .collect::<Vec<[f64; 3]>>()
            .iter()
            .fold([0.0; 3], |x, y| [x[0] + y[0], x[1] + y[1], x[2] + y[2]])
    }

    /// Number of `(ξ, ū)` nodes per cell.
    pub fn nodes_per_cell(&self) -> usize {
        self.grid.u.iter().map(|u| u.len()).sum()
    }
}

/// Entries of `Grid` for one `ξ` node.
type XiRow = (Vec<(f64, f64)>, Vec<C64>, [C64; 3]);

fn build_grid(cfg: &PhysConfig, xi_max: f64, xi_panels: usize, u_panels: usize, options: TraceOptions) -> Grid {
    let a = cfg.a;
    let l = cfg.macro_size() as usize;
    let levels = if options.levels { cfg.levels as usize } else { 0 };
    let profiles = FIRST_LEVEL + levels;
    let mut xi = panel_nodes(-xi_max, 0.0, xi_panels, PANEL);
    xi.extend(panel_nodes(0.0, xi_max, xi_panels, PANEL));
    let norm = 1.0 / (a * l as f64).sqrt();
    let chi0 = |u: f64| dirichlet(l, 2.0 * PI * u / a + PI) * norm;
    let ichi0 = |u: f64| dirichlet_weighted(l, 2.0 * PI * u / a + PI) * norm;
    let level0 = |k: usize, u: f64| {
        let h = 1usize << (k - 1);
        let theta = 2.0 * PI * u / a + PI;
        let zh = C64::from_polar(1.0, theta * h as f64);
        dirichlet(h, theta) * (C64::new(1.0, 0.0) - zh) / (a * (2 * h) as f64).sqrt()
    };

    let rows: Vec<XiRow> = xi
        .par_iter()
        .map(|&(x, _)| {
            let half = 0.5 * (a - x.abs());
            let us = panel_nodes(-half, half, u_panels, PANEL);
            let mut table = Vec::with_capacity(us.len() * profiles);
            for &(u, _) in &us {
                let (up, um) = (u + 0.5 * x, u - 0.5 * x);
                let (cp, cm) = (chi0(up).conj(), chi0(um));
                let ip = ichi0(up).conj();
                table.push(cp * cm);
                table.push(ip * ichi0(um));
                table.push(ip * cm);
                table.push(cp * cm * (up * um));
                table.push(cp * cm * up);
                for k in 1..=levels {
                    table.push(level0(k, up).conj() * level0(k, um));
                }
            }
            let mut dr = [C64::new(0.0, 0.0); 3];
            for i in 0..l {
                let e = C64::from_polar(1.0, -2.0 * PI * i as f64 * x / a);
                let fi = i as f64;
                dr[0] += e;
                dr[1] += e * fi;
                dr[2] += e * (fi * fi);
            }
            (us, table, dr)
        })
        .collect();
    let mut grid = Grid { xi, u: Vec::new(), table: Vec::new(), dr: Vec::new(), profiles };
    for (us, t, d) in rows {
        grid.u.push(us);
        grid.table.push(t);
        grid.dr.push(d);
    }
    grid
}

fn fill_cell(cfg: &PhysConfig, kernel: &dyn Kernel, grid: &Grid, n: i64, cell: &mut CellData, options: TraceOptions) {
    let a = cfg.a;
    let hbar = cfg.hbar;
    let l = cfg.macro_size();
    let base = n as f64 * a;
    let np = grid.profiles;
    let nx = grid.xi.len();
    // Profiles with the local momentum phase removed.
    let mut tab = vec![C64::new(0.0, 0.0); nx * np];
    let mut s11 = vec![C64::new(0.0, 0.0); nx];
    let mut suu = vec![C64::new(0.0, 0.0); nx];
    let mut su1 = vec![C64::new(0.0, 0.0); nx];
    let mut spp = vec![C64::new(0.0, 0.0); nx];
    let mut sp1 = vec![C64::new(0.0, 0.0); nx];
    let mut spchi = vec![C64::new(0.0, 0.0); nx];
    let mut spp1 = vec![C64::new(0.0, 0.0); nx];
    for (i, &(xi, _)) in grid.xi.iter().enumerate() {
        let demod = C64::from_polar(1.0, -cell.mu * xi / hbar);
        let row = &grid.table[i];
        let acc = &mut tab[i * np..(i + 1) * np];
        for (j, &(u, w)) in grid.u[i].iter().enumerate() {
            let rho = kernel.kernel_cs(base + u, xi) * demod * w;
            let t = &row[j * np..(j + 1) * np];
            for (s, f) in acc.iter_mut().zip(t) {
                *s += rho * f;
            }
            s11[i] += rho / a;
            suu[i] += rho * ((u + 0.5 * xi) * (u - 0.5 * xi) / a);
            su1[i] += rho * ((u + 0.5 * xi) / a);
            if options.momentum_kernel {
                let rpp = kernel.kernel_pp_cs(base + u, xi) * demod * w;
                spp[i] += rpp * t[CHI];
                spp1[i] += rpp / a;
                let rp = kernel.kernel_p_cs(base + u, xi) * demod * w;
                sp1[i] += rp / a;
                spchi[i] += rp * t[CHI];
            }
        }
    }

    let phases = |k: f64| -> Vec<C64> { grid.xi.iter().map(|&(xi, w)| C64::from_polar(w, (cell.mu / hbar - k) * xi)).collect() };
    cell.records = (cfg.macro_range.0..=cfg.macro_range.1)
        .map(|big_m| {
            let e = phases(2.0 * PI * (big_m * l) as f64 / a);
            let mut r = [C64::new(0.0, 0.0); 14];
            for i in 0..nx {
                let d = &grid.dr[i];
                let t = &tab[i * np..];
                let ei = e[i];
                r[0] += ei * d[0] * s11[i];
                r[1] += ei * d[1] * s11[i];
                r[2] += ei * d[2] * s11[i];
                r[3] += ei * d[0] * suu[i];
                r[4] += ei * t[CHI];
                r[5] += ei * t[CHI_II];
                r[6] += ei * t[CHI_I0];
                r[7] += ei * t[CHI_UU];
                r[8] += ei * t[CHI_U0];
                r[9] += ei * spp[i];
                r[10] += ei * d[0] * su1[i];
                r[11] += ei * d[0] * sp1[i];
                r[12] += ei * spchi[i];
                r[13] += ei * d[0] * spp1[i];
            }
            MacroRecord {
                block: r[0].re,
                q1: r[1].re,
                q2: r[2].re,
                u2_block: r[3].re,
                chi: r[4].re,
                chi_ii: r[5].re,
                chi_i0: r[6],
                chi_uu: r[7].re,
                chi_u0: r[8],
                chi_pp: r[9].re,
                u1_block: r[10],
                p_block: r[11],
                chi_p: r[12],
                pp_block: r[13].re,
            }
        })
        .collect();

    if options.levels {
        cell.levels = (1..=cfg.levels)
            .map(|k| {
                let per = 1i64 << (cfg.levels - k);
                let lo = cfg.macro_range.0 * per;
                let hi = (cfg.macro_range.1 + 1) * per - 1;
                let p = FIRST_LEVEL + (k - 1) as usize;
                let step = 2.0 * PI * (1i64 << k) as f64 / a;
                // Phases advance by a fixed factor per m; restart every 64
                // steps to bound rounding drift.
                let mut out = Vec::with_capacity((hi - lo + 1) as usize);
                let mut e: Vec<C64> = Vec::new();
                let ratio: Vec<C64> = grid.xi.iter().map(|&(xi, _)| C64::from_polar(1.0, -step * xi)).collect();
                for (c, m) in (lo..=hi).enumerate() {
                    if c % 64 == 0 {
                        e = phases(step * m as f64);
                    }
                    let v: C64 = (0..nx).map(|i| e[i] * tab[i * np + p]).sum();
                    out.push(v.re);
                    for (ei, ri) in e.iter_mut().zip(&ratio) {
                        *ei *= ri;
                    }
                }
                out
            })
            .collect();
    }
}

impl CellDensity for CellTraces<'_> {
    fn config(&self) -> &PhysConfig {
        &self.cfg
    }

    fn block_trace(&self, n: i64, big_m: i64) -> f64 {
        self.record(n, big_m).block
    }

    fn expect(&self, s: &LatticeState) -> f64 {
        match s.label {
            StateLabel::Remainder { levels, m } if levels == self.cfg.levels && self.cfg.contains_macro(m) => self.record(s.cell_n, m).chi,
            StateLabel::Level { k, m } => match self.level_value(s.cell_n, k, m) {
                Some(v) => v,
                None => self.direct_expect(s),
            },
            _ => self.direct_expect(s),
        }
    }

    fn total_trace(&self) -> f64 {
        self.kernel.trace()
    }

    fn tail_mass(&self) -> f64 {
        self.position_tail() + self.momentum_tail()
    }

    fn spreads(&self) -> (f64, f64) {
        let (mut w, mut x1, mut x2) = (0.0, 0.0, 0.0);
        for c in &self.cells {
            w += c.moments.weight;
            x1 += c.moments.x1;
            x2 += c.moments.x2;
        }
        let [pw, p1, p2] = self.momentum_moments();
        let vx = x2 / w - (x1 / w).powi(2);
        let vp = p2 / pw - (p1 / pw).powi(2);
        (vx.max(0.0).sqrt(), vp.max(0.0).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wigner::GaussianState;

    #[test]
    fn dirichlet_sums_match_direct() {
        for &l in &[1usize, 2, 8, 256] {
            for &t in &[0.0, 1e-7, 3e-4, 0.2, 1.0, 3.1, -2.5, 7.0, PI, -PI] {
                let mut s0 = C64::new(0.0, 0.0);
                let mut s1 = C64::new(0.0, 0.0);
                for i in 0..l {
                    let e = C64::from_polar(1.0, t * i as f64);
                    s0 += e;
                    s1 += e * i as f64;
                }
                let scale = (l * l) as f64;
                assert!((dirichlet(l, t) - s0).norm() < 1e-12 * scale, "{l} {t}");
                assert!((dirichlet_weighted(l, t) - s1).norm() < 1e-11 * scale, "{l} {t}");
            }
        }
    }

    fn setup() -> (PhysConfig, GaussianState) {
        let cfg = PhysConfig::code_units(3, 6, 4);
        let g = GaussianState::new((0.2, 1.5), (1.1, 0.45 * cfg.macro_width()), 0.3, 1.0).unwrap();
        (cfg, g)
    }

    #[test]
    fn tabulated_values_match_direct_quadrature() {
        let (cfg, g) = setup();
        let t = CellTraces::new(&cfg, &g, TraceOptions::default()).unwrap();
        for &(n, big_m) in &[(0, 0), (1, 1), (-1, -1)] {
            let chi = LatticeState::remainder(&cfg, n, big_m).unwrap();
            let direct = t.direct_expect(&chi);
            assert!((t.expect(&chi) - direct).abs() < 1e-12, "{n} {big_m}");
            for k in 1..=cfg.levels {
                let per = 1i64 << (cfg.levels - k);
                let s = LatticeState::level(&cfg, k, n, big_m * per).unwrap();
                assert!((t.expect(&s) - t.direct_expect(&s)).abs() < 1e-12);
            }
            let mut block = 0.0;
            for i in 0..cfg.macro_size() {
                let w = LatticeState::window(&cfg, n, big_m * cfg.macro_size() + i).unwrap();
                block += t.direct_expect(&w);
            }
            assert!((t.block_trace(n, big_m) - block).abs() < 1e-12);
        }
    }

    #[test]
    fn level_sums_obey_poisson_identity() {
        // Σ_m ⟨φ_{K,m}|ρ|φ_{K,m}⟩ over all m equals (a/2^K) Σ_l S_K(l a / 2^K),
        // S_K the level profile. Level states lose weight outside the
        // truncation as M^-3, so two truncations are extrapolated.
        let (mut cfg, g) = setup();
        let a = cfg.a;
        let mut sums = Vec::new();
        for mr in [8, 16] {
            cfg.macro_range = (-mr, mr);
            let t = CellTraces::new(&cfg, &g, TraceOptions::default()).unwrap();
            let per_level: Vec<f64> = (1..=cfg.levels)
                .map(|k| {
                    let per = 1i64 << (cfg.levels - k);
                    let lo = cfg.macro_range.0 * per;
                    let hi = (cfg.macro_range.1 + 1) * per - 1;
                    (lo..=hi).map(|m| t.level_value(0, k, m).unwrap()).sum()
                })
                .collect();
            sums.push(per_level);
        }
        for k in 1..=cfg.levels {
            let (coarse, fine) = (sums[0][k as usize - 1], sums[1][k as usize - 1]);
            let extrapolated = fine + (fine - coarse) / 7.0;
            let len = 1usize << k;
            let h = len / 2;
            let phi = |u: f64| -> C64 {
                let z = C64::from_polar(-1.0, 2.0 * PI * u / a);
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..len {
                    let c = if j < h { 1.0 } else { -1.0 };
                    acc += z.powu(j as u32) * c;
                }
                acc / (a * len as f64).sqrt()
            };
            let profile = |xi: f64| -> f64 {
                let half = 0.5 * (a - xi.abs());
                panel_nodes(-half, half, 40, 16)
                    .iter()
                    .map(|&(u, w)| (phi(u + 0.5 * xi).conj() * phi(u - 0.5 * xi) * g.kernel_cs(u, xi) * w).re)
                    .sum()
            };
            let step = a / len as f64;
            let poisson: f64 = (-(len as i64) + 1..len as i64).map(|j| profile(j as f64 * step)).sum::<f64>() * step;
            assert!((fine - poisson).abs() < 1e-7, "K={k}: {fine} {poisson}");
            assert!((extrapolated - poisson).abs() < 5e-9, "K={k}: {extrapolated} {poisson}");
        }
    }

    #[test]
    fn momentum_kernel_consistent_with_total() {
        // Σ over all states of ⟨s|p̂ρp̂|s⟩ is Tr(p̂²ρ); the window blocks plus χ
        // carry it when the truncation holds the state.
        let (cfg, g) = setup();
        let t = CellTraces::new(&cfg, &g, TraceOptions::default()).unwrap();
        let mut chi_pp = 0.0;
        for n in cfg.n_range.0..=cfg.n_range.1 {
            for big_m in cfg.macro_range.0..=cfg.macro_range.1 {
                chi_pp += t.record(n, big_m).chi_pp;
            }
        }
        let total = g.dp * g.dp + g.p0 * g.p0;
        assert!(chi_pp > 0.0 && chi_pp < total);
        // Sharp window edges give every cell a 1/m² tail in window index, so
        // the truncated trace falls short of 1 by about 2/(π² m_max).
        let m_max = (cfg.window_range().1 as f64).abs();
        let short = 1.0 - t.truncated_trace();
        assert!(short > 0.0 && short < 2.0 / (PI * PI * m_max) * 1.5, "{short}");
    }

    #[test]
    fn records_match_two_dimensional_quadrature() {
        let (cfg, g) = setup();
        let t = CellTraces::new(&cfg, &g, TraceOptions::default()).unwrap();
        let l = cfg.macro_size();
        for &(n, big_m) in &[(0i64, 0i64), (1, -1)] {
            let c = n as f64 * cfg.a;
            let nodes = panel_nodes(c - 0.5, c + 0.5, 24, 16);
            let chi_state = LatticeState::remainder(&cfg, n, big_m).unwrap();
            let chi: Vec<C64> = nodes.iter().map(|&(x, _)| chi_state.eval_position(&cfg, x)).collect();
            let ichi: Vec<C64> = nodes
                .iter()
                .map(|&(x, _)| {
                    (0..l)
                        .map(|i| {
                            let w = LatticeState::window(&cfg, n, big_m * l + i).unwrap();
                            w.eval_position(&cfg, x) * chi_state.coeffs[i as usize] * i as f64
                        })
                        .sum()
                })
                .collect();
            let windows: Vec<Vec<C64>> = (0..l)
                .map(|i| {
                    let w = LatticeState::window(&cfg, n, big_m * l + i).unwrap();
                    nodes.iter().map(|&(x, _)| w.eval_position(&cfg, x)).collect()
                })
                .collect();
            // ∫∫ f*(x) K(x, y) g(y) with f, g sampled and weighted by fx, gy.
            let form = |f: &[C64], fx: &dyn Fn(f64) -> f64, k: &dyn Fn(f64, f64) -> C64, h: &[C64]| -> C64 {
                let mut acc = C64::new(0.0, 0.0);
                for (i, &(x, wx)) in nodes.iter().enumerate() {
                    for (j, &(y, wy)) in nodes.iter().enumerate() {
                        acc += f[i].conj() * fx(x - c) * k(x, y) * h[j] * (wx * wy);
                    }
                }
                acc
            };
            let rho = |x: f64, y: f64| g.kernel(x, y);
            let rho_p = |x: f64, y: f64| g.kernel_p_cs(0.5 * (x + y), x - y);
            let rho_pp = |x: f64, y: f64| g.kernel_pp_cs(0.5 * (x + y), x - y);
            let one = |_: f64| 1.0;
            let lin = |u: f64| u;
            let r = t.record(n, big_m);
            let close = |a: C64, b: C64, what: &str| assert!((a - b).norm() < 1e-9, "{what}: {a} {b}");
            let re = |v: f64| C64::new(v, 0.0);
            close(re(r.chi), form(&chi, &one, &rho, &chi), "chi");
            close(re(r.chi_ii), form(&ichi, &one, &rho, &ichi), "chi_ii");
            close(r.chi_i0, form(&ichi, &one, &rho, &chi), "chi_i0");
            close(r.chi_u0, form(&chi, &lin, &rho, &chi), "chi_u0");
            let uchi: Vec<C64> = nodes.iter().zip(&chi).map(|(&(x, _), v)| v * (x - c)).collect();
            close(re(r.chi_uu), form(&uchi, &one, &rho, &uchi), "chi_uu");
            close(r.chi_p, form(&chi, &one, &rho_p, &chi), "chi_p");
            close(re(r.chi_pp) / 100.0, form(&chi, &one, &rho_pp, &chi) / 100.0, "chi_pp");
            let mut sums = [C64::new(0.0, 0.0); 6];
            let mut pp = C64::new(0.0, 0.0);
            for (i, w) in windows.iter().enumerate() {
                let fi = i as f64;
                let b = form(w, &one, &rho, w);
                sums[0] += b;
                sums[1] += b * fi;
                sums[2] += b * (fi * fi);
                let uw: Vec<C64> = nodes.iter().zip(w).map(|(&(x, _), v)| v * (x - c)).collect();
                sums[3] += form(&uw, &one, &rho, &uw);
                sums[4] += form(w, &lin, &rho, w);
                sums[5] += form(w, &one, &rho_p, w);
                pp += form(w, &one, &rho_pp, w);
            }
            close(re(r.pp_block) / 100.0, pp / 100.0, "pp_block");
            close(re(r.block), sums[0], "block");
            close(re(r.q1), sums[1], "q1");
            close(re(r.q2) / 10.0, sums[2] / 10.0, "q2");
            close(re(r.u2_block), sums[3], "u2");
            close(r.u1_block, sums[4], "u1");
            close(r.p_block, sums[5], "p_block");
        }
    }
}
