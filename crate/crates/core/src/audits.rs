//! Audits of approximate completeness and of the coincidence between
//! interval probabilities of the commuting pair and the canonical marginals.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

use crate::cell_traces::{dirichlet, CellTraces};
use crate::config::PhysConfig;
use crate::density::CellDensity;
use crate::error::{Error, Result};
use crate::lattice_states::{sinc, LatticeState};
use crate::pair::{CommutingPair, Observable};
use crate::projectors::{exhaustivity_deficit, DeficitReport};
use crate::quad::panel_nodes;
use crate::wigner::{GaussianState, Kernel};

/// Largest weight of `ρ` allowed outside the truncated phase-space region.
pub const TAIL_BUDGET: f64 = 1e-6;

const PANEL: usize = 16;

/// Thresholds used by [`validity_conditions`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Largest acceptable `2^{-N}`.
    pub deficit: f64,
    /// Largest acceptable slow-variation metric.
    pub slow_variation: f64,
    /// Smallest ratio accepted as "much greater than".
    pub much_greater: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { deficit: 0.01, slow_variation: 0.1, much_greater: 10.0 }
    }
}

/// One validity condition. `margin ≥ 1` exactly when the condition holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub equation: String,
    pub satisfied: bool,
    pub margin: f64,
    pub value: f64,
    pub threshold: f64,
}

impl Condition {
    /// Holds when `value ≤ threshold`.
    pub fn at_most(name: &str, equation: &str, value: f64, threshold: f64) -> Self {
        let margin = if value > 0.0 { threshold / value } else { f64::INFINITY };
        Self::new(name, equation, value, threshold, margin)
    }

    /// Holds when `value ≥ threshold`.
    pub fn at_least(name: &str, equation: &str, value: f64, threshold: f64) -> Self {
        Self::new(name, equation, value, threshold, value / threshold)
    }

    fn new(name: &str, equation: &str, value: f64, threshold: f64, margin: f64) -> Self {
        Self { name: name.into(), equation: equation.into(), satisfied: margin >= 1.0, margin, value, threshold }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToleranceMode {
    Absolute,
    Relative,
    /// `measured / predicted` lies in `[1/tolerance, tolerance]`.
    Factor,
}

/// Measured against predicted value of one prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub quantity: String,
    pub equation: String,
    pub measured: f64,
    pub predicted: f64,
    pub tolerance: f64,
    pub tolerance_mode: ToleranceMode,
    pub within_tolerance: bool,
    pub conditions: Vec<Condition>,
}

impl AuditReport {
    pub fn new(quantity: &str, equation: &str, measured: f64, predicted: f64, tolerance: f64, mode: ToleranceMode) -> Self {
        let err = (measured - predicted).abs();
        let within = match mode {
            ToleranceMode::Absolute => err <= tolerance,
            ToleranceMode::Relative => err <= tolerance * predicted.abs(),
            ToleranceMode::Factor => {
                let r = measured / predicted;
                r >= 1.0 / tolerance && r <= tolerance
            }
        };
        Self {
            quantity: quantity.into(),
            equation: equation.into(),
            measured,
            predicted,
            tolerance,
            tolerance_mode: mode,
            within_tolerance: within,
            conditions: Vec::new(),
        }
    }

    /// Prediction met and every condition satisfied.
    pub fn passed(&self) -> bool {
        self.within_tolerance && self.conditions.iter().all(|c| c.satisfied)
    }
}

/// Weight of one level of the hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelShare {
    pub k: u32,
    pub measured: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletenessReport {
    pub audit: AuditReport,
    pub levels: Vec<LevelShare>,
    pub level_equation: String,
    /// Remainder weight and truncation leakage.
    pub deficit: DeficitReport,
    /// Weight of `ρ` outside the truncated region.
    pub tail_mass: f64,
}

fn check_tail(rho: &dyn CellDensity) -> Result<f64> {
    let tail = rho.tail_mass();
    if tail > TAIL_BUDGET {
        return Err(Error::TruncationLeak { leak: tail, budget: TAIL_BUDGET });
    }
    Ok(tail)
}

/// `Σ_{K,n,m} ⟨φ_{K,nm}|ρ|φ_{K,nm}⟩` over the truncation against `1 − 2^{-N}`.
pub fn completeness_audit(rho: &dyn CellDensity, tolerance: f64, thresholds: &Thresholds) -> Result<CompletenessReport> {
    let tail_mass = check_tail(rho)?;
    let cfg = rho.config().clone();
    let cells: Vec<i64> = (cfg.n_range.0..=cfg.n_range.1).collect();
    let per_cell: Vec<Vec<f64>> = cells
        .par_iter()
        .map(|&n| -> Result<Vec<f64>> {
            (1..=cfg.levels)
                .map(|k| {
                    let per = 1i64 << (cfg.levels - k);
                    let lo = cfg.macro_range.0 * per;
                    let hi = (cfg.macro_range.1 + 1) * per - 1;
                    (lo..=hi).map(|m| Ok(rho.expect(&LatticeState::level(&cfg, k, n, m)?))).sum()
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let levels: Vec<LevelShare> = (1..=cfg.levels)
        .map(|k| LevelShare {
            k,
            measured: per_cell.iter().map(|c| c[(k - 1) as usize]).sum(),
            predicted: 0.5f64.powi(k as i32) * rho.total_trace(),
        })
        .collect();
    let measured: f64 = levels.iter().map(|l| l.measured).sum();
    let predicted = (1.0 - 0.5f64.powi(cfg.levels as i32)) * rho.total_trace();
    let mut audit = AuditReport::new("completeness", "Eq. 5.7", measured, predicted, tolerance, ToleranceMode::Absolute);
    audit.conditions = validity_conditions(rho, None, thresholds)?;
    Ok(CompletenessReport { audit, levels, level_equation: "Eq. 5.6".into(), deficit: exhaustivity_deficit(rho)?, tail_mass })
}

/// Largest change of the coarse-grained Wigner weight between adjacent macro
/// cells, relative to its largest value. The coarse weight of cell `(n, M)`
/// is the trace of `ρ` over its full window block.
pub fn slow_variation(rho: &dyn CellDensity) -> f64 {
    let cfg = rho.config();
    let (nc, mc) = (cfg.cell_count(), cfg.macro_count());
    let w: Vec<f64> = (0..nc * mc)
        .into_par_iter()
        .map(|i| rho.block_trace(cfg.n_range.0 + (i / mc) as i64, cfg.macro_range.0 + (i % mc) as i64))
        .collect();
    let max = w.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return 0.0;
    }
    let mut worst: f64 = 0.0;
    for i in 0..nc {
        for j in 0..mc {
            let v = w[i * mc + j];
            if i + 1 < nc {
                worst = worst.max((w[(i + 1) * mc + j] - v).abs());
            }
            if j + 1 < mc {
                worst = worst.max((w[i * mc + j + 1] - v).abs());
            }
        }
    }
    worst / max
}

/// Coarse standard deviations of `ρ` in position and momentum from the
/// macro-cell weights, including the width of one cell.
pub fn coarse_spreads<D: CellDensity + ?Sized>(rho: &D) -> (f64, f64) {
    let cfg = rho.config();
    let (mut w, mut x1, mut x2, mut p1, mut p2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let width = cfg.macro_width();
    for n in cfg.n_range.0..=cfg.n_range.1 {
        for big_m in cfg.macro_range.0..=cfg.macro_range.1 {
            let t = rho.block_trace(n, big_m);
            let x = cfg.cell_center(n);
            let p = (big_m as f64 + 0.5) * width;
            w += t;
            x1 += t * x;
            x2 += t * x * x;
            p1 += t * p;
            p2 += t * p * p;
        }
    }
    if w <= 0.0 {
        return (cfg.a / 12f64.sqrt(), width / 12f64.sqrt());
    }
    let vx = (x2 / w - (x1 / w).powi(2)).max(0.0) + cfg.a * cfg.a / 12.0;
    let vp = (p2 / w - (p1 / w).powi(2)).max(0.0) + width * width / 12.0;
    (vx.sqrt(), vp.sqrt())
}

/// Interval of cells `[lo, hi]` along one axis of the commuting pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct IntervalSpec {
    pub axis: Observable,
    pub lo_index: i64,
    pub hi_index: i64,
}

impl IntervalSpec {
    pub fn validate(&self, cfg: &PhysConfig) -> Result<()> {
        if self.lo_index > self.hi_index {
            return Err(Error::InvalidConfig(format!("interval bounds reversed: {} > {}", self.lo_index, self.hi_index)));
        }
        let inside = match self.axis {
            Observable::X => cfg.contains_cell(self.lo_index) && cfg.contains_cell(self.hi_index),
            Observable::P => cfg.contains_macro(self.lo_index) && cfg.contains_macro(self.hi_index),
        };
        if !inside {
            return Err(Error::Truncation(format!("interval [{}, {}] outside the truncation", self.lo_index, self.hi_index)));
        }
        Ok(())
    }

    /// Physical end points: cells `[n1, n2]` cover `[(n1 − ½)a, (n2 + ½)a]`,
    /// macro cells `[M1, M2]` cover the momenta of their windows,
    /// `[(M1·2^N − ½) b, ((M2 + 1)·2^N − ½) b]`.
    pub fn bounds(&self, cfg: &PhysConfig) -> (f64, f64) {
        match self.axis {
            Observable::X => ((self.lo_index as f64 - 0.5) * cfg.a, (self.hi_index as f64 + 0.5) * cfg.a),
            Observable::P => {
                let l = cfg.macro_size();
                let b = cfg.b();
                ((self.lo_index * l) as f64 * b - 0.5 * b, ((self.hi_index + 1) * l) as f64 * b - 0.5 * b)
            }
        }
    }

    pub fn width(&self, cfg: &PhysConfig) -> f64 {
        let (lo, hi) = self.bounds(cfg);
        hi - lo
    }

    /// The whole truncation along `axis`.
    pub fn full(cfg: &PhysConfig, axis: Observable) -> Self {
        let (lo, hi) = match axis {
            Observable::X => cfg.n_range,
            Observable::P => cfg.macro_range,
        };
        Self { axis, lo_index: lo, hi_index: hi }
    }
}

/// Conditions (i) to (iii) for `ρ` and an interval; without an interval the
/// whole position range of the truncation is used.
pub fn validity_conditions(rho: &dyn CellDensity, interval: Option<&IntervalSpec>, thresholds: &Thresholds) -> Result<Vec<Condition>> {
    let cfg = rho.config();
    let interval = match interval {
        Some(i) => {
            i.validate(cfg)?;
            *i
        }
        None => IntervalSpec::full(cfg, Observable::X),
    };
    let (sx, sp) = rho.spreads();
    let (dx, dp) = match interval.axis {
        Observable::X => (interval.width(cfg), 4.0 * sp),
        Observable::P => (4.0 * sx, interval.width(cfg)),
    };
    let volume = (cfg.macro_size() as f64) * 2.0 * PI * cfg.hbar;
    let cell_dp2 = cfg.macro_width().powi(2) / 12.0;
    Ok(vec![
        Condition::at_most("(i) deficit 2^-N", "Eq. 5.7", 0.5f64.powi(cfg.levels as i32), thresholds.deficit),
        Condition::at_most("(ii) slow variation", "Eq. 5.4", slow_variation(rho), thresholds.slow_variation),
        Condition::at_least("(iii) phase volume", "Eq. 7.9", dx * dp / volume, thresholds.much_greater),
        Condition::at_least("(iii) position width", "Eq. 7.9", dx * dx / (cfg.a * cfg.a / 12.0), thresholds.much_greater),
        Condition::at_least("(iii) momentum width", "Eq. 7.9", dp * dp / cell_dp2, thresholds.much_greater),
    ])
}

/// Time after which `2^N`-cell coarse graining is justified,
/// `(ℏ/γkT)^{1/2} 2^{N/2}`.
pub fn decoherence_time_bound(hbar: f64, gamma: f64, kt: f64, levels: u32) -> Result<f64> {
    if !(hbar > 0.0 && gamma > 0.0 && kt > 0.0) {
        return Err(Error::InvalidConfig("hbar, gamma and kT must be positive".into()));
    }
    Ok((hbar / (gamma * kt)).sqrt() * 2f64.powf(levels as f64 / 2.0))
}

/// `t` against [`decoherence_time_bound`].
pub fn time_condition(t: f64, hbar: f64, gamma: f64, kt: f64, levels: u32, thresholds: &Thresholds) -> Result<Condition> {
    let bound = decoherence_time_bound(hbar, gamma, kt, levels)?;
    Ok(Condition::at_least("decoherence time", "Eq. 7.14", t / bound, thresholds.much_greater))
}

/// `kT / (ℏω 2^N)` for an oscillator of frequency `ω`.
pub fn thermal_condition(kt: f64, hbar: f64, omega: f64, levels: u32, thresholds: &Thresholds) -> Result<Condition> {
    if !(kt > 0.0 && hbar > 0.0 && omega > 0.0) {
        return Err(Error::InvalidConfig("kT, hbar and omega must be positive".into()));
    }
    let ratio = kt / (hbar * omega * 2f64.powi(levels as i32));
    Ok(Condition::at_least("thermal", "Eq. 7.15", ratio, thresholds.much_greater))
}

/// Probe for the resolution check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Probe {
    Lattice(LatticeState),
    Gaussian(GaussianState),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionReport {
    /// Per level `K`: sum over the lattice `(a, 2^K b)` against `2^{-K}⟨f|f⟩`.
    pub levels: Vec<AuditReport>,
    /// Sum over levels against `(1 − 2^{-N})⟨f|f⟩`.
    pub total: AuditReport,
    /// `∫∫ dq dk / 2πℏ ⟨f_{qk}|ρ|f_{qk}⟩` against `⟨f|f⟩`, for Gaussian probes.
    pub continuum: Option<AuditReport>,
}

/// 2D normal density of `d` with covariance `[[sxx, sxp], [sxp, spp]]`.
fn normal2(d: (f64, f64), sxx: f64, sxp: f64, spp: f64) -> f64 {
    let det = sxx * spp - sxp * sxp;
    let q = (spp * d.0 * d.0 - 2.0 * sxp * d.0 * d.1 + sxx * d.1 * d.1) / det;
    (-0.5 * q).exp() / (2.0 * PI * det.sqrt())
}

/// Covariance of the overlap of two Gaussian states.
fn overlap_covariance(rho: &GaussianState, f: &GaussianState) -> (f64, f64, f64) {
    (rho.dx.powi(2) + f.dx.powi(2), rho.sigma + f.sigma, rho.dp.powi(2) + f.dp.powi(2))
}

/// `⟨f_{q,k}|ρ|f_{q,k}⟩ = 2πℏ N(μ_ρ − μ_f − (q, k); Σ_ρ + Σ_f)`.
fn gaussian_overlap(rho: &GaussianState, f: &GaussianState, q: f64, k: f64) -> f64 {
    let (sxx, sxp, spp) = overlap_covariance(rho, f);
    2.0 * PI * rho.hbar * normal2((rho.q0 - f.q0 - q, rho.p0 - f.p0 - k), sxx, sxp, spp)
}

fn gaussian_lattice_sum(rho: &GaussianState, f: &GaussianState, dq: f64, dk: f64) -> f64 {
    let (sxx, _, spp) = overlap_covariance(rho, f);
    let (cq, ck) = (rho.q0 - f.q0, rho.p0 - f.p0);
    let rq = (14.0 * sxx.sqrt() / dq).ceil() as i64 + 1;
    let rk = (14.0 * spp.sqrt() / dk).ceil() as i64 + 1;
    let (nq, nk) = ((cq / dq).round() as i64, (ck / dk).round() as i64);
    (nq - rq..=nq + rq)
        .into_par_iter()
        .map(|n| (nk - rk..=nk + rk).map(|m| gaussian_overlap(rho, f, n as f64 * dq, m as f64 * dk)).sum::<f64>())
        .collect::<Vec<f64>>()
        .iter()
        .sum()
}

fn gaussian_continuum(rho: &GaussianState, f: &GaussianState) -> f64 {
    let (sxx, _, spp) = overlap_covariance(rho, f);
    let (cq, ck) = (rho.q0 - f.q0, rho.p0 - f.p0);
    let (hq, hk) = (12.0 * sxx.sqrt(), 12.0 * spp.sqrt());
    let qs = panel_nodes(cq - hq, cq + hq, 8, PANEL);
    let ks = panel_nodes(ck - hk, ck + hk, 8, PANEL);
    qs.iter().map(|&(q, wq)| ks.iter().map(|&(k, wk)| wq * wk * gaussian_overlap(rho, f, q, k)).sum::<f64>()).sum::<f64>()
        / (2.0 * PI * rho.hbar)
}

/// `Σ_m ⟨f_{n, 2^K m}|ρ|f_{n, 2^K m}⟩ = (a/2^K) Σ_l S_n(l a / 2^K)` with the
/// profile `S_n(ξ) = ∫ dū f*(ū + ξ/2) f(ū − ξ/2) ρ(na + ū, ξ)`, summed over
/// the truncated cells.
fn lattice_probe_sum(cfg: &PhysConfig, kernel: &dyn Kernel, f: &LatticeState, k: u32) -> f64 {
    let a = cfg.a;
    let (sx, _) = kernel.scales();
    let eval = |u: f64| -> C64 {
        let z = C64::from_polar(1.0, 2.0 * PI * u / a);
        let mut acc = C64::new(0.0, 0.0);
        for c in f.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc * C64::from_polar(a.sqrt().recip(), 2.0 * PI * f.m_offset as f64 * u / a)
    };
    let steps = 1i64 << k;
    let cells: Vec<i64> = (cfg.n_range.0..=cfg.n_range.1).collect();
    cells
        .par_iter()
        .map(|&n| {
            let base = n as f64 * a;
            let spread = (kernel.local_momentum(base + 0.5 * a) - kernel.local_momentum(base - 0.5 * a)).abs();
            let count = 64.0 + 8.0 * f.coeffs.len() as f64 + 24.0 * a / sx + 2.0 * spread * a / cfg.hbar;
            let panels = (count / PANEL as f64).ceil() as usize;
            let mut acc = 0.0;
            for l in (1 - steps)..steps {
                let xi = l as f64 * a / steps as f64;
                let half = 0.5 * (a - xi.abs());
                let s: C64 = panel_nodes(-half, half, panels, PANEL)
                    .iter()
                    .map(|&(u, w)| eval(u + 0.5 * xi).conj() * eval(u - 0.5 * xi) * kernel.kernel_cs(base + u, xi) * w)
                    .sum();
                acc += s.re;
            }
            acc * a / steps as f64
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum()
}

/// Lattice form of the resolution of the identity: for each level `K` the
/// sum of `⟨f|U†ρU|f⟩` over translations `U` by the lattice `(a, 2^K b)`,
/// compared with `2^{-K}⟨f|f⟩`.
pub fn resolution_identity_check(cfg: &PhysConfig, rho: &GaussianState, probe: &Probe, tolerance: f64) -> Result<ResolutionReport> {
    cfg.validate()?;
    if (rho.hbar - cfg.hbar).abs() > 1e-12 * cfg.hbar {
        return Err(Error::InvalidConfig("state and configuration disagree on hbar".into()));
    }
    let norm2 = match probe {
        Probe::Lattice(s) => s.norm().powi(2),
        Probe::Gaussian(g) => {
            g.validate()?;
            1.0
        }
    };
    let mut levels = Vec::new();
    for k in 1..=cfg.levels {
        let measured = match probe {
            Probe::Lattice(s) => lattice_probe_sum(cfg, rho, s, k),
            Probe::Gaussian(g) => gaussian_lattice_sum(rho, g, cfg.a, (1i64 << k) as f64 * cfg.b()),
        };
        let predicted = 0.5f64.powi(k as i32) * norm2;
        levels.push(AuditReport::new(
            &format!("resolution level {k}"),
            "Eq. 5.11",
            measured,
            predicted,
            tolerance,
            ToleranceMode::Relative,
        ));
    }
    let total = AuditReport::new(
        "resolution total",
        "Eq. 5.12",
        levels.iter().map(|l| l.measured).sum(),
        (1.0 - 0.5f64.powi(cfg.levels as i32)) * norm2,
        tolerance,
        ToleranceMode::Relative,
    );
    let continuum = match probe {
        Probe::Gaussian(g) => {
            Some(AuditReport::new("resolution continuum", "Eq. 5.8", gaussian_continuum(rho, g), 1.0, 1e-4, ToleranceMode::Absolute))
        }
        Probe::Lattice(_) => None,
    };
    Ok(ResolutionReport { levels, total, continuum })
}

/// `p_nM = Tr(E_{nM} ρ)` in the window basis.
pub fn cell_probability(pair: &CommutingPair, rho: &dyn CellDensity, n: i64, big_m: i64) -> Result<f64> {
    let cfg = &pair.config;
    if !cfg.contains_cell(n) || !cfg.contains_macro(big_m) {
        return Err(Error::Truncation(format!("cell ({n}, {big_m}) outside the truncation")));
    }
    let chi = LatticeState::remainder(cfg, n, big_m)?;
    Ok(rho.block_trace(n, big_m) - rho.expect(&chi))
}

/// Wigner function of the cell projector `E_{nM}` at `(p, q)`:
/// `W_E = (2ξ_m / 2πℏa) Σ_s sinc(κ_s ξ_m) w_s(u)` with `u = q − na`,
/// `ξ_m = a − 2|u|`, `κ_s = π(2^{N+1}M + s)/a − p/ℏ` and
/// `w_s = [s even] − (−1)^s G_s(u) / 2^N`, where `G_s(u) = Σ_{i+i'=s}
/// e^{2πi(i−i')u/a}` collects the remainder state.
pub fn projector_wigner(cfg: &PhysConfig, n: i64, big_m: i64, p: f64, q: f64) -> f64 {
    let weights = projector_weights(cfg, q - cfg.cell_center(n));
    match weights {
        Some((xi_m, w)) => projector_wigner_at(cfg, big_m, p, xi_m, &w),
        None => 0.0,
    }
}

fn projector_weights(cfg: &PhysConfig, u: f64) -> Option<(f64, Vec<f64>)> {
    let a = cfg.a;
    let l = cfg.macro_size() as usize;
    let xi_m = a - 2.0 * u.abs();
    if xi_m <= 0.0 {
        return None;
    }
    let theta = 2.0 * PI * u / a;
    let w = (0..2 * l - 1)
        .map(|s| {
            let lo = s.saturating_sub(l - 1);
            let hi = s.min(l - 1);
            let g = C64::from_polar(1.0, theta * (2.0 * lo as f64 - s as f64)) * dirichlet(hi - lo + 1, 2.0 * theta);
            let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
            let even = if s % 2 == 0 { 1.0 } else { 0.0 };
            even - sign * g.re / l as f64
        })
        .collect();
    Some((xi_m, w))
}

fn projector_wigner_at(cfg: &PhysConfig, big_m: i64, p: f64, xi_m: f64, w: &[f64]) -> f64 {
    let a = cfg.a;
    let l = cfg.macro_size();
    let kappa0 = PI * (2 * big_m * l) as f64 / a - p / cfg.hbar;
    let mut acc = 0.0;
    for (s, ws) in w.iter().enumerate() {
        acc += sinc((kappa0 + PI * s as f64 / a) * xi_m) * ws;
    }
    acc * 2.0 * xi_m / (2.0 * PI * cfg.hbar * a)
}

/// `Tr(E_{nM} ρ) = 2πℏ ∫∫ W_E W_ρ dp dq` by quadrature over the cell and the
/// local momentum support of `ρ`.
pub fn cell_probability_wigner(cfg: &PhysConfig, kernel: &dyn Kernel, n: i64, big_m: i64) -> f64 {
    let a = cfg.a;
    let hbar = cfg.hbar;
    let l = cfg.macro_size() as f64;
    let b = cfg.b();
    let (sx, coh) = kernel.scales();
    let sp = hbar / coh;
    let base = cfg.cell_center(n);
    let mu_a = kernel.local_momentum(base - 0.5 * a);
    let mu_b = kernel.local_momentum(base + 0.5 * a);
    let reach = 10.0 * sp;
    let (p_lo, p_hi) = (mu_a.min(mu_b) - reach, mu_a.max(mu_b) + reach);
    let band = 2.0 * PI * big_m as f64 * l / a;
    let kappa_max = (band - p_lo / hbar)
        .abs()
        .max((band + 2.0 * PI * l / a - p_hi / hbar).abs())
        .max((band - p_hi / hbar).abs())
        .max((band + 2.0 * PI * l / a - p_lo / hbar).abs());
    let q_count = 64.0 + 4.0 * l + 8.0 * kappa_max * a / (2.0 * PI) + 12.0 * a / sx + 24.0 * (mu_b - mu_a).abs() / sp;
    let q_panels = (q_count / PANEL as f64).ceil() as usize;
    let p_count = 64.0 + 8.0 * 2.0 * reach / b + 20.0 * 2.0 * reach / sp;
    let p_panels = (p_count / PANEL as f64).ceil() as usize;
    let mut qs = panel_nodes(-0.5 * a, 0.0, q_panels, PANEL);
    qs.extend(panel_nodes(0.0, 0.5 * a, q_panels, PANEL));
    let total: f64 = qs
        .par_iter()
        .map(|&(u, wq)| {
            let Some((xi_m, w)) = projector_weights(cfg, u) else { return 0.0 };
            let q = base + u;
            let mu = kernel.local_momentum(q);
            panel_nodes(mu - reach, mu + reach, p_panels, PANEL)
                .iter()
                .map(|&(p, wp)| wp * projector_wigner_at(cfg, big_m, p, xi_m, &w) * kernel.wigner(p, q))
                .sum::<f64>()
                * wq
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    2.0 * PI * hbar * total
}

/// `p_nM` by both routes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualProbability {
    pub n: i64,
    #[serde(rename = "M")]
    pub big_m: i64,
    pub window: f64,
    pub wigner: f64,
    pub equation: String,
}

impl DualProbability {
    pub fn difference(&self) -> f64 {
        (self.window - self.wigner).abs()
    }
}

pub fn cell_probability_dual(pair: &CommutingPair, rho: &CellTraces, n: i64, big_m: i64) -> Result<DualProbability> {
    let window = cell_probability(pair, rho, n, big_m)?;
    let wigner = cell_probability_wigner(&pair.config, rho.kernel(), n, big_m);
    Ok(DualProbability { n, big_m, window, wigner, equation: "Eq. 7.5".into() })
}

/// One row of the cell probability table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellProbabilityRow {
    pub n: i64,
    #[serde(rename = "M")]
    pub big_m: i64,
    pub x: f64,
    pub p: f64,
    pub probability: f64,
}

/// `p_nM` over the whole truncation, ordered by `n` then `M`.
pub fn probability_table(pair: &CommutingPair, rho: &dyn CellDensity) -> Result<Vec<CellProbabilityRow>> {
    let cfg = &pair.config;
    let cells: Vec<(i64, i64)> =
        (cfg.n_range.0..=cfg.n_range.1).flat_map(|n| (cfg.macro_range.0..=cfg.macro_range.1).map(move |m| (n, m))).collect();
    cells
        .par_iter()
        .map(|&(n, m)| {
            Ok(CellProbabilityRow { n, big_m: m, x: pair.x_value(n), p: pair.p_value(m), probability: cell_probability(pair, rho, n, m)? })
        })
        .collect()
}

pub fn write_probability_csv(rows: &[CellProbabilityRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalReport {
    pub interval: IntervalSpec,
    pub bounds: (f64, f64),
    pub audit: AuditReport,
    /// `Tr((1 − E_Δ) ρ)`.
    pub complement: f64,
}

/// `∫ dp` of the momentum density over `[lo, hi]`.
fn momentum_marginal(kernel: &dyn Kernel, lo: f64, hi: f64, hbar: f64) -> f64 {
    let (sx, coh) = kernel.scales();
    let scale = (hbar / coh).max(0.5 * hbar / sx);
    let panels = ((64.0 + 24.0 * (hi - lo) / scale) / PANEL as f64).ceil() as usize;
    panel_nodes(lo, hi, panels, PANEL).iter().map(|&(p, w)| w * kernel.momentum_density(p)).sum()
}

fn position_marginal(kernel: &dyn Kernel, lo: f64, hi: f64) -> f64 {
    let (sx, _) = kernel.scales();
    let panels = ((64.0 + 24.0 * (hi - lo) / sx) / PANEL as f64).ceil() as usize;
    panel_nodes(lo, hi, panels, PANEL).iter().map(|&(x, w)| w * kernel.density(x)).sum()
}

/// `Tr(E_Δ ρ)` for an interval of `X̂` or `P̂` values against the canonical
/// marginal of `ρ` over the same range.
pub fn interval_probability(
    pair: &CommutingPair,
    rho: &CellTraces,
    interval: &IntervalSpec,
    tolerance: f64,
    thresholds: &Thresholds,
) -> Result<IntervalReport> {
    let cfg = &pair.config;
    if rho.config() != cfg {
        return Err(Error::InvalidConfig("density and pair use different configurations".into()));
    }
    interval.validate(cfg)?;
    check_tail(rho)?;
    let (ns, ms) = match interval.axis {
        Observable::X => ((interval.lo_index, interval.hi_index), cfg.macro_range),
        Observable::P => (cfg.n_range, (interval.lo_index, interval.hi_index)),
    };
    let cells: Vec<(i64, i64)> = (ns.0..=ns.1).flat_map(|n| (ms.0..=ms.1).map(move |m| (n, m))).collect();
    let measured: f64 = cells.par_iter().map(|&(n, m)| cell_probability(pair, rho, n, m)).collect::<Result<Vec<f64>>>()?.iter().sum();
    let bounds = interval.bounds(cfg);
    let (predicted, name, eq) = match interval.axis {
        Observable::X => (position_marginal(rho.kernel(), bounds.0, bounds.1), "position interval", "Eq. 7.11"),
        Observable::P => (momentum_marginal(rho.kernel(), bounds.0, bounds.1, cfg.hbar), "momentum interval", "Eq. 7.13"),
    };
    let mut audit = AuditReport::new(name, eq, measured, predicted, tolerance, ToleranceMode::Relative);
    audit.conditions = validity_conditions(rho, Some(interval), thresholds)?;
    Ok(IntervalReport { interval: *interval, bounds, audit, complement: rho.total_trace() - measured })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell_traces::TraceOptions;
    use crate::density::WindowDensity;

    /// Gaussian with spreads of `l` cells and `l` macro cells, truncated at
    /// six standard deviations.
    fn broad(levels: u32, l: f64) -> (PhysConfig, GaussianState) {
        let reach = (6.0 * l).ceil() as i64 + 1;
        let cfg = PhysConfig::code_units(levels, reach, reach);
        let w = cfg.macro_width();
        let g = GaussianState::new((0.3, 0.4 * w), (l, l * w), 0.0, 1.0).unwrap();
        (cfg, g)
    }

    #[test]
    fn completeness_of_broad_state() {
        let (cfg, g) = broad(3, 8.0);
        let t = CellTraces::new(&cfg, &g, TraceOptions { levels: true, momentum_kernel: false }).unwrap();
        let r = completeness_audit(&t, 0.005, &Thresholds::default()).unwrap();
        assert!(r.audit.within_tolerance, "{:?}", r.audit);
        assert!((r.levels[1].measured - 0.25).abs() < 0.01);
        // Levels plus remainders partition the window blocks exactly.
        assert!((r.audit.measured + r.deficit.deficit - t.truncated_trace()).abs() < 1e-10);
        assert!(r.tail_mass < TAIL_BUDGET);
        let slow = r.audit.conditions.iter().find(|c| c.name.starts_with("(ii)")).unwrap();
        assert!(slow.satisfied, "{slow:?}");
        // 2^-3 exceeds the default deficit tolerance.
        assert!(!r.audit.conditions[0].satisfied);
    }

    #[test]
    fn completeness_of_lattice_states() {
        let cfg = PhysConfig::code_units(3, 2, 2);
        // A window state has overlap 2^-N with the remainder of its cell.
        let rho = WindowDensity::pure(&cfg, &LatticeState::window(&cfg, 0, 3).unwrap()).unwrap();
        let r = completeness_audit(&rho, 0.005, &Thresholds::default()).unwrap();
        assert!((r.audit.measured - 0.875).abs() < 1e-12);
        assert!(!r.audit.conditions[1].satisfied);
        // The remainder state itself is invisible to the levels.
        let rho = WindowDensity::pure(&cfg, &LatticeState::remainder(&cfg, 1, 0).unwrap()).unwrap();
        let r = completeness_audit(&rho, 0.005, &Thresholds::default()).unwrap();
        assert!(r.audit.measured.abs() < 1e-12);
        assert!(!r.audit.within_tolerance);
        assert!(!r.audit.conditions[1].satisfied);
    }

    #[test]
    fn leak_beyond_truncation_rejected() {
        let cfg = PhysConfig::code_units(2, 3, 3);
        let w = cfg.macro_width();
        let g = GaussianState::new((0.0, 0.0), (2.0, 1.5 * w), 0.0, 1.0).unwrap();
        let t = CellTraces::new(&cfg, &g, TraceOptions::default()).unwrap();
        assert!(matches!(completeness_audit(&t, 0.005, &Thresholds::default()), Err(Error::TruncationLeak { .. })));
    }

    /// Poisson dual of the Gaussian lattice sum: `Σ_{n,m} N(c − (n dq, m dk); S)
    /// = (1/dq dk) Σ_{j,l} exp(−½ kᵀ S k) cos(k·c)`, `k = (2πj/dq, 2πl/dk)`.
    fn poisson_dual(c: (f64, f64), s: (f64, f64, f64), dq: f64, dk: f64) -> f64 {
        let mut acc = 0.0;
        let jr = (2.0 * dq / s.0.sqrt()) as i32 + 2;
        let lr = (2.0 * dk / s.2.sqrt()) as i32 + 2;
        for j in -jr..=jr {
            for l in -lr..=lr {
                let k = (2.0 * PI * j as f64 / dq, 2.0 * PI * l as f64 / dk);
                let quad = s.0 * k.0 * k.0 + 2.0 * s.1 * k.0 * k.1 + s.2 * k.1 * k.1;
                acc += (-0.5 * quad).exp() * (k.0 * c.0 + k.1 * c.1).cos();
            }
        }
        acc / (dq * dk)
    }

    #[test]
    fn gaussian_probe_lattice_sums() {
        let cfg = PhysConfig::code_units(4, 4, 4);
        let b = cfg.b();
        // Narrow enough that the lattice sum differs visibly from 2^-K.
        let rho = GaussianState::new((0.1, 0.3), (0.35, 1.9), 0.2, 1.0).unwrap();
        let probe = GaussianState::new((0.05, -0.2), (0.5, 1.0), 0.0, 1.0).unwrap();
        let r = resolution_identity_check(&cfg, &rho, &Probe::Gaussian(probe), 0.01).unwrap();
        let s = overlap_covariance(&rho, &probe);
        for (k, level) in (1..=cfg.levels).zip(&r.levels) {
            let dk = (1i64 << k) as f64 * b;
            let oracle = 2.0 * PI * poisson_dual((rho.q0 - probe.q0, rho.p0 - probe.p0), s, cfg.a, dk);
            assert!((level.measured - oracle).abs() < 1e-12, "{k} {} {oracle}", level.measured);
        }
        let c = r.continuum.unwrap();
        assert!(c.within_tolerance && (c.measured - 1.0).abs() < 1e-10, "{c:?}");
    }

    #[test]
    fn broad_state_resolves_identity() {
        let (cfg, g) = broad(4, 3.0);
        let probe = GaussianState::new((0.0, 0.0), (0.5, 1.0), 0.0, 1.0).unwrap();
        let r = resolution_identity_check(&cfg, &g, &Probe::Gaussian(probe), 0.01).unwrap();
        assert!(r.total.within_tolerance && r.levels.iter().all(|l| l.within_tolerance), "{r:?}");
        assert!((r.total.measured - 15.0 / 16.0).abs() < 1e-9);
        let window = LatticeState::window(&cfg, 0, 0).unwrap();
        let r = resolution_identity_check(&cfg, &g, &Probe::Lattice(window), 0.01).unwrap();
        assert!(r.total.within_tolerance && r.levels.iter().all(|l| l.within_tolerance), "{r:?}");
        assert!(r.continuum.is_none());
    }

    #[test]
    fn lattice_probe_matches_level_traces() {
        // Translating φ_{K,0} by multiples of 2^K windows gives the level
        // states φ_{K,m}, so the lattice sum is the sum of their weights.
        let mut cfg = PhysConfig::code_units(3, 5, 8);
        let w = cfg.macro_width();
        let g = GaussianState::new((0.2, 1.5), (1.1, 0.45 * w), 0.3, 1.0).unwrap();
        for k in 1..=cfg.levels {
            let probe = LatticeState::level(&cfg, k, 0, 0).unwrap();
            let r = resolution_identity_check(&cfg, &g, &Probe::Lattice(probe), 0.01).unwrap();
            let mut sums = Vec::new();
            for mr in [8, 16] {
                cfg.macro_range = (-mr, mr);
                let t = CellTraces::new(&cfg, &g, TraceOptions { levels: true, momentum_kernel: false }).unwrap();
                let per = 1i64 << (cfg.levels - k);
                let (lo, hi) = (cfg.macro_range.0 * per, (cfg.macro_range.1 + 1) * per - 1);
                let s: f64 = (cfg.n_range.0..=cfg.n_range.1)
                    .flat_map(|n| (lo..=hi).map(move |m| (n, m)))
                    .map(|(n, m)| t.level_value(n, k, m).unwrap())
                    .sum();
                sums.push(s);
            }
            cfg.macro_range = (-8, 8);
            let extrapolated = sums[1] + (sums[1] - sums[0]) / 7.0;
            let measured = r.levels[(k - 1) as usize].measured;
            assert!((measured - extrapolated).abs() < 5e-9, "{k} {measured} {extrapolated}");
        }
    }

    #[test]
    fn window_and_wigner_routes_agree() {
        let cfg = PhysConfig::code_units(3, 10, 6);
        let w = cfg.macro_width();
        let g = GaussianState::new((0.2, 0.3 * w), (1.5, 0.8 * w), 0.3, 1.0).unwrap();
        let t = CellTraces::new(&cfg, &g, TraceOptions { levels: false, momentum_kernel: false }).unwrap();
        let pair = CommutingPair::build(&cfg).unwrap();
        for &(n, m) in &[(0, 0), (1, -1), (-2, 1), (0, 2)] {
            let d = cell_probability_dual(&pair, &t, n, m).unwrap();
            assert!(d.window > -1e-10);
            assert!(d.difference() < 1e-7, "{d:?}");
        }
    }

    #[test]
    fn probabilities_partition_the_trace() {
        let (cfg, g) = broad(2, 2.0);
        let t = CellTraces::new(&cfg, &g, TraceOptions { levels: false, momentum_kernel: false }).unwrap();
        let pair = CommutingPair::build(&cfg).unwrap();
        let rows = probability_table(&pair, &t).unwrap();
        assert!(rows.iter().all(|r| r.probability > -1e-10));
        let total: f64 = rows.iter().map(|r| r.probability).sum();
        let d = exhaustivity_deficit(&t).unwrap();
        assert!((total + d.deficit + d.leakage - 1.0).abs() < 1e-12);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        write_probability_csv(&rows, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next(), Some("n,M,x,p,probability"));
        assert_eq!(text.lines().count(), rows.len() + 1);
    }

    #[test]
    fn level_state_mixture_fills_one_cell() {
        let cfg = PhysConfig::code_units(3, 2, 2);
        let states = LatticeState::macro_cell_states(&cfg, 1, -1).unwrap();
        let terms: Vec<(f64, LatticeState)> = states[..7].iter().map(|s| (1.0 / 7.0, s.clone())).collect();
        let rho = WindowDensity::mixture(&cfg, &terms).unwrap();
        let pair = CommutingPair::build(&cfg).unwrap();
        for r in probability_table(&pair, &rho).unwrap() {
            let want = if (r.n, r.big_m) == (1, -1) { 1.0 } else { 0.0 };
            assert!((r.probability - want).abs() < 1e-12, "{r:?}");
        }
    }

    #[test]
    fn broad_state_probability_tracks_coarse_wigner_mass() {
        let (cfg, g) = broad(3, 8.0);
        let t = CellTraces::new(&cfg, &g, TraceOptions { levels: false, momentum_kernel: false }).unwrap();
        let pair = CommutingPair::build(&cfg).unwrap();
        let (a, b, l) = (cfg.a, cfg.b(), cfg.macro_size());
        for &(n, m) in &[(0, 0), (3, -2), (-5, 6)] {
            let (q0, p0) = (n as f64 * a - 0.5 * a, (m * l) as f64 * b - 0.5 * b);
            let qs = panel_nodes(q0, q0 + a, 2, PANEL);
            let ps = panel_nodes(p0, p0 + l as f64 * b, 2, PANEL);
            let mass: f64 = qs.iter().map(|&(q, wq)| ps.iter().map(|&(p, wp)| wq * wp * g.wigner(p, q)).sum::<f64>()).sum();
            let prob = cell_probability(&pair, &t, n, m).unwrap();
            let ratio = prob / ((1.0 - 0.125) * mass);
            assert!((ratio - 1.0).abs() < 0.02, "{n} {m} {ratio}");
        }
    }

    #[test]
    fn negative_control_narrow_interval() {
        // Pure state far narrower than a cell, centred on a cell boundary;
        // the one-cell interval violates condition (iii) by more than 10x.
        let cfg = PhysConfig::code_units(4, 3, 2);
        let dx = cfg.a / 32.0;
        let g = GaussianState::new((0.5 * cfg.a, 0.0), (dx, 0.5 / dx), 0.0, 1.0).unwrap();
        let t = CellTraces::new(&cfg, &g, TraceOptions { levels: false, momentum_kernel: false }).unwrap();
        let pair = CommutingPair::build(&cfg).unwrap();
        let iv = IntervalSpec { axis: Observable::X, lo_index: 0, hi_index: 0 };
        let r = interval_probability(&pair, &t, &iv, 0.01, &Thresholds::default()).unwrap();
        assert!((r.audit.predicted - 0.5).abs() < 1e-9);
        let gap = (r.audit.measured - r.audit.predicted).abs() / r.audit.predicted;
        assert!(gap > 0.05, "{r:?}");
        let volume = &r.audit.conditions[2];
        assert!(volume.margin < 0.1, "{volume:?}");
        assert_eq!(r.audit.measured + r.complement, 1.0);
    }

    #[test]
    fn full_interval_misses_only_the_deficit() {
        let (cfg, g) = broad(3, 6.0);
        let t = CellTraces::new(&cfg, &g, TraceOptions { levels: false, momentum_kernel: false }).unwrap();
        let pair = CommutingPair::build(&cfg).unwrap();
        let d = exhaustivity_deficit(&t).unwrap();
        assert!((d.deficit - 0.125).abs() < 0.005, "{d:?}");
        for axis in [Observable::X, Observable::P] {
            let r = interval_probability(&pair, &t, &IntervalSpec::full(&cfg, axis), 0.01, &Thresholds::default()).unwrap();
            assert!((r.audit.measured - (1.0 - d.deficit - d.leakage)).abs() < 1e-12);
            assert_eq!(r.audit.measured + r.complement, 1.0);
        }
        let bad = IntervalSpec { axis: Observable::P, lo_index: 0, hi_index: cfg.macro_range.1 + 1 };
        assert!(matches!(interval_probability(&pair, &t, &bad, 0.01, &Thresholds::default()), Err(Error::Truncation(_))));
        let reversed = IntervalSpec { axis: Observable::X, lo_index: 2, hi_index: 1 };
        assert!(reversed.validate(&cfg).is_err());
    }

    #[test]
    fn interval_end_points() {
        let cfg = PhysConfig::code_units(2, 5, 5);
        let b = cfg.b();
        let x = IntervalSpec { axis: Observable::X, lo_index: -1, hi_index: 2 };
        assert_eq!(x.bounds(&cfg), (-1.5, 2.5));
        let p = IntervalSpec { axis: Observable::P, lo_index: -1, hi_index: 0 };
        let (lo, hi) = p.bounds(&cfg);
        assert!((lo + 4.5 * b).abs() < 1e-12 && (hi - 3.5 * b).abs() < 1e-12);
    }

    #[test]
    fn bath_bounds() {
        let hbar = 1.054_571_817e-34;
        let t = decoherence_time_bound(hbar, 1.0, 1e10 * hbar, 20).unwrap();
        assert!((t / (1e-5 * 1024.0) - 1.0).abs() < 1e-12);
        let thr = Thresholds::default();
        assert!(time_condition(10.0 * t, hbar, 1.0, 1e10 * hbar, 20, &thr).unwrap().satisfied);
        assert!(!time_condition(t, hbar, 1.0, 1e10 * hbar, 20, &thr).unwrap().satisfied);
        let c = thermal_condition(1e4, 1.0, 1.0, 3, &thr).unwrap();
        assert!(c.satisfied && (c.value - 1250.0).abs() < 1e-9);
        assert!(!thermal_condition(50.0, 1.0, 1.0, 3, &thr).unwrap().satisfied);
        assert!(decoherence_time_bound(hbar, 0.0, 1.0, 3).is_err());
    }

    #[test]
    fn coarse_spreads_of_a_window_state() {
        let cfg = PhysConfig::code_units(2, 2, 2);
        let rho = WindowDensity::pure(&cfg, &LatticeState::window(&cfg, 1, 0).unwrap()).unwrap();
        let (sx, sp) = rho.spreads();
        assert!((sx - cfg.a / 12f64.sqrt()).abs() < 1e-12);
        assert!((sp - cfg.macro_width() / 12f64.sqrt()).abs() < 1e-12);
        assert_eq!(slow_variation(&rho), 1.0);
    }
}
