//! Window states, the halving hierarchy of finite-dispersion states and the
//! remainder states, all stored as exact coefficient vectors over the
//! orthonormal window basis `ψ_{nm}`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::config::{LatticeIndex, PhysConfig};
use crate::error::{Error, Result};
use crate::quad::panel_nodes;

/// Which member of the hierarchy a state is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateLabel {
    Window { m: i64 },
    Level { k: u32, m: i64 },
    Remainder { levels: u32, m: i64 },
    Combination,
}

/// A state living in a single position cell, expanded over consecutive
/// window momentum indices starting at `m_offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeState {
    pub cell_n: i64,
    pub m_offset: i64,
    pub coeffs: Vec<C64>,
    pub label: StateLabel,
}

/// `sin(z)/z` with the removable point filled in.
pub(crate) fn sinc(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        let z2 = z * z;
        1.0 - z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sin() / z
    }
}

/// Position amplitude of the window state `ψ_{nm}`; endpoints take half weight.
pub fn eval_window_position(cfg: &PhysConfig, idx: LatticeIndex, x: f64) -> C64 {
    let u = x - cfg.cell_center(idx.n);
    let half = 0.5 * cfg.a;
    let h = if u.abs() < half {
        1.0
    } else if u.abs() == half {
        0.5
    } else {
        return C64::new(0.0, 0.0);
    };
    let phase = 2.0 * PI * idx.m as f64 * x / cfg.a;
    C64::from_polar(h / cfg.a.sqrt(), phase)
}

/// Momentum amplitude of `ψ_{nm}`, normalised so that `∫|ψ̃|² dp = 1`.
pub fn eval_window_momentum(cfg: &PhysConfig, idx: LatticeIndex, p: f64) -> C64 {
    let s = p * cfg.a / cfg.hbar;
    let amp = (2.0 * cfg.a / (PI * cfg.hbar)).sqrt() * 0.5 * sinc(0.5 * (s - 2.0 * PI * idx.m as f64));
    C64::from_polar(amp, -(idx.n as f64) * s)
}

/// Unnormalised halving signs `c_j` for level `k` (length `2^k`).
pub fn halving_coefficients(k: u32, levels: u32) -> Result<Vec<i8>> {
    if k < 1 || k > levels {
        return Err(Error::LevelOutOfRange { level: k, max: levels });
    }
    let len = 1usize << k;
    let half = len / 2;
    Ok((0..len)
        .map(|j| {
            let alt = if j % 2 == 0 { 1 } else { -1 };
            if j < half {
                alt
            } else {
                -alt
            }
        })
        .collect())
}

fn check_support(cfg: &PhysConfig, n: i64, lo: i64, len: usize) -> Result<()> {
    let hi = lo + len as i64 - 1;
    if !cfg.contains_cell(n) {
        return Err(Error::Truncation(format!("cell {n} outside {:?}", cfg.n_range)));
    }
    if !cfg.contains_window(lo) || !cfg.contains_window(hi) {
        return Err(Error::Truncation(format!("window indices {lo}..={hi} outside {:?}", cfg.window_range())));
    }
    Ok(())
}

/// Window-basis matrix element `⟨m|u|m'⟩` of the in-cell coordinate
/// `u = x − na`, as a function of `k = m' − m`.
pub fn window_u(a: f64, k: i64) -> C64 {
    if k == 0 {
        C64::new(0.0, 0.0)
    } else {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        C64::new(0.0, -a * sign / (2.0 * PI * k as f64))
    }
}

/// Window-basis matrix element `⟨m|u²|m'⟩` with `k = m' − m`.
pub fn window_u2(a: f64, k: i64) -> f64 {
    if k == 0 {
        a * a / 12.0
    } else {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        a * a * sign / (2.0 * PI * PI * (k * k) as f64)
    }
}

impl LatticeState {
    pub fn window(cfg: &PhysConfig, n: i64, m: i64) -> Result<Self> {
        check_support(cfg, n, m, 1)?;
        Ok(Self { cell_n: n, m_offset: m, coeffs: vec![C64::new(1.0, 0.0)], label: StateLabel::Window { m } })
    }

    /// Level-`k` finite-dispersion state on windows `2^k m … 2^k m + 2^k − 1`.
    pub fn level(cfg: &PhysConfig, k: u32, n: i64, m: i64) -> Result<Self> {
        let signs = halving_coefficients(k, cfg.levels)?;
        let len = signs.len();
        let lo = m * len as i64;
        check_support(cfg, n, lo, len)?;
        let scale = (len as f64).sqrt().recip();
        Ok(Self {
            cell_n: n,
            m_offset: lo,
            coeffs: signs.iter().map(|&c| C64::new(c as f64 * scale, 0.0)).collect(),
            label: StateLabel::Level { k, m },
        })
    }

    /// Remainder state `χ` spanning the whole macro cell `m`.
    pub fn remainder(cfg: &PhysConfig, n: i64, m: i64) -> Result<Self> {
        let len = cfg.macro_size() as usize;
        let lo = m * len as i64;
        check_support(cfg, n, lo, len)?;
        let scale = (len as f64).sqrt().recip();
        Ok(Self {
            cell_n: n,
            m_offset: lo,
            coeffs: (0..len).map(|j| C64::new(if j % 2 == 0 { scale } else { -scale }, 0.0)).collect(),
            label: StateLabel::Remainder { levels: cfg.levels, m },
        })
    }

    /// All `2^N` orthonormal states of one macro cell: levels `1..=N` in
    /// increasing `k`, then the remainder.
    pub fn macro_cell_states(cfg: &PhysConfig, n: i64, big_m: i64) -> Result<Vec<Self>> {
        let mut out = Vec::with_capacity(cfg.macro_size() as usize);
        for k in 1..=cfg.levels {
            let per = 1i64 << (cfg.levels - k);
            for j in 0..per {
                out.push(Self::level(cfg, k, n, big_m * per + j)?);
            }
        }
        out.push(Self::remainder(cfg, n, big_m)?);
        Ok(out)
    }

    pub fn m_range(&self) -> (i64, i64) {
        (self.m_offset, self.m_offset + self.coeffs.len() as i64 - 1)
    }

    pub fn coeff(&self, m: i64) -> C64 {
        let i = m - self.m_offset;
        if i < 0 || i >= self.coeffs.len() as i64 {
            C64::new(0.0, 0.0)
        } else {
            self.coeffs[i as usize]
        }
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `⟨self|other⟩`, exact in the orthonormal window basis.
    pub fn inner(&self, other: &Self) -> C64 {
        if self.cell_n != other.cell_n {
            return C64::new(0.0, 0.0);
        }
        let lo = self.m_offset.max(other.m_offset);
        let hi = self.m_range().1.min(other.m_range().1);
        (lo..=hi).map(|m| self.coeff(m).conj() * other.coeff(m)).sum()
    }

    /// Linear combination `Σ w_i s_i` of states in the same cell.
    pub fn combine(terms: &[(C64, &LatticeState)]) -> Result<Self> {
        let first = terms.first().ok_or_else(|| Error::InvalidConfig("empty combination".into()))?;
        let n = first.1.cell_n;
        if terms.iter().any(|(_, s)| s.cell_n != n) {
            return Err(Error::InvalidConfig("combination mixes position cells".into()));
        }
        let lo = terms.iter().map(|(_, s)| s.m_offset).min().unwrap_or(0);
        let hi = terms.iter().map(|(_, s)| s.m_range().1).max().unwrap_or(lo);
        let coeffs = (lo..=hi).map(|m| terms.iter().map(|(w, s)| w * s.coeff(m)).sum()).collect();
        Ok(Self { cell_n: n, m_offset: lo, coeffs, label: StateLabel::Combination })
    }

    pub fn eval_position(&self, cfg: &PhysConfig, x: f64) -> C64 {
        let base = eval_window_position(cfg, LatticeIndex::new(self.cell_n, 0), x);
        if base.norm_sqr() == 0.0 {
            return base;
        }
        let step = C64::from_polar(1.0, 2.0 * PI * x / cfg.a);
        let mut ph = base * C64::from_polar(1.0, 2.0 * PI * self.m_offset as f64 * x / cfg.a);
        let mut acc = C64::new(0.0, 0.0);
        for c in &self.coeffs {
            acc += c * ph;
            ph *= step;
        }
        acc
    }

    pub fn eval_momentum(&self, cfg: &PhysConfig, p: f64) -> C64 {
        let s = p * cfg.a / cfg.hbar;
        let pref = (2.0 * cfg.a / (PI * cfg.hbar)).sqrt() * 0.5;
        let mut acc = C64::new(0.0, 0.0);
        for (i, c) in self.coeffs.iter().enumerate() {
            let m = (self.m_offset + i as i64) as f64;
            acc += c * sinc(0.5 * (s - 2.0 * PI * m));
        }
        acc * C64::from_polar(pref, -(self.cell_n as f64) * s)
    }

    /// `⟨x^order⟩` for `order` in {1, 2}, from closed-form window-basis
    /// matrix elements.
    pub fn position_moment(&self, cfg: &PhysConfig, order: u32) -> Result<f64> {
        let norm2 = self.norm().powi(2);
        let mut u1 = C64::new(0.0, 0.0);
        let mut u2 = 0.0;
        let len = self.coeffs.len();
        for i in 0..len {
            for j in 0..len {
                let k = j as i64 - i as i64;
                let w = self.coeffs[i].conj() * self.coeffs[j];
                u1 += w * window_u(cfg.a, k);
                u2 += (w * window_u2(cfg.a, k)).re;
            }
        }
        let x0 = cfg.cell_center(self.cell_n);
        match order {
            1 => Ok(x0 + u1.re / norm2),
            2 => Ok(x0 * x0 + 2.0 * x0 * u1.re / norm2 + u2 / norm2),
            _ => Err(Error::InvalidConfig(format!("moment order {order} not supported"))),
        }
    }

    /// `⟨p^order⟩` (order 0, 1 or 2) by panel quadrature over the momentum
    /// representation with an asymptotic tail correction.
    pub fn momentum_moment(&self, cfg: &PhysConfig, order: u32) -> Result<f64> {
        if order > 2 {
            return Err(Error::InvalidConfig(format!("moment order {order} not supported")));
        }
        let d = self.tail_coefficients();
        let decay = d.iter().position(|v| v.norm() > 1e-9 * self.norm());
        if order == 2 && decay == Some(0) {
            return Err(Error::DivergentMoment { decay: 1 });
        }
        // Work in s = pa/ℏ about an integer lattice centre.
        let (lo, hi) = self.m_range();
        let centre = 2.0 * PI * ((lo + hi).div_euclid(2)) as f64;
        let span = (hi - lo + 1) as f64;
        let half_panels = (64.0 * span).max(400.0) as usize;
        let cutoff = 2.0 * PI * half_panels as f64;
        let nodes = panel_nodes(centre - cutoff, centre + cutoff, 2 * half_panels * 16, 6);
        let body: f64 = nodes
            .iter()
            .map(|&(s, w)| {
                let mut g = C64::new(0.0, 0.0);
                for (i, c) in self.coeffs.iter().enumerate() {
                    let m = (self.m_offset + i as i64) as f64;
                    g += c * sinc(0.5 * (s - 2.0 * PI * m));
                }
                w * g.norm_sqr() * s.powi(order as i32)
            })
            .sum();
        let tail = self.tail_integral(&d, order, centre, cutoff);
        let scale = (cfg.hbar / cfg.a).powi(order as i32) / (2.0 * PI);
        Ok(scale * (body + tail))
    }

    /// Exact `⟨p^order⟩` for states that vanish at the cell endpoints, where
    /// `p̂` acts diagonally on the window coefficients.
    pub fn momentum_moment_exact(&self, cfg: &PhysConfig, order: u32) -> Result<f64> {
        let d = self.tail_coefficients();
        if order >= 2 && d[0].norm() > 1e-9 * self.norm() {
            return Err(Error::DivergentMoment { decay: 1 });
        }
        let b = cfg.b();
        let norm2 = self.norm().powi(2);
        let sum: f64 =
            self.coeffs.iter().enumerate().map(|(i, c)| c.norm_sqr() * (b * (self.m_offset + i as i64) as f64).powi(order as i32)).sum();
        Ok(sum / norm2)
    }

    /// Moments `D_k = Σ_m c_m (2πm − centre)^k` of the large-|s| expansion,
    /// taken about the integer lattice centre of the support. `D_0 = 0` iff
    /// the state vanishes at the cell endpoints.
    fn tail_coefficients(&self) -> Vec<C64> {
        let (lo, hi) = self.m_range();
        let centre = (lo + hi).div_euclid(2);
        (0..4)
            .map(|k| {
                self.coeffs
                    .iter()
                    .enumerate()
                    .map(|(i, c)| {
                        let mu = 2.0 * PI * (self.m_offset + i as i64 - centre) as f64;
                        let sign = if (self.m_offset + i as i64) % 2 == 0 { 1.0 } else { -1.0 };
                        c * sign * mu.powi(k)
                    })
                    .sum()
            })
            .collect()
    }

    /// Integral over `|s − centre| > cutoff` of `s^r |g(s)|²`, with
    /// `g ≈ 2 sin(s/2) Σ_k D_k / (s − centre)^{k+1}` and `sin²` replaced by
    /// its mean.
    fn tail_integral(&self, d: &[C64], order: u32, centre: f64, cutoff: f64) -> f64 {
        let r = order as i32;
        let mut total = 0.0;
        for (k, dk) in d.iter().enumerate() {
            for (l, dl) in d.iter().enumerate() {
                let w = (dk * dl.conj()).re;
                if w == 0.0 {
                    continue;
                }
                for t in 0..=r {
                    let binom = match (r, t) {
                        (2, 1) => 2.0,
                        _ => 1.0,
                    };
                    let e = t - k as i32 - l as i32 - 2;
                    if e % 2 != 0 || e > -2 {
                        continue;
                    }
                    let piece = 2.0 * cutoff.powi(e + 1) / (-(e + 1)) as f64;
                    total += 2.0 * w * binom * centre.powi(r - t) * piece;
                }
            }
        }
        total
    }

    /// Translate by `dn` cells and `dm` window momentum steps, applying the
    /// Weyl phase `(−1)^{dn·dm}`.
    pub fn shift_window(&self, cfg: &PhysConfig, dn: i64, dm: i64) -> Result<Self> {
        let n = self.cell_n + dn;
        let lo = self.m_offset + dm;
        check_support(cfg, n, lo, self.coeffs.len())?;
        let phase = if (dn * dm).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let label = match self.label {
            StateLabel::Window { m } => StateLabel::Window { m: m + dm },
            StateLabel::Level { k, m } if dm % (1i64 << k) == 0 => StateLabel::Level { k, m: m + dm / (1i64 << k) },
            StateLabel::Remainder { levels, m } if dm % (1i64 << levels) == 0 => {
                StateLabel::Remainder { levels, m: m + dm / (1i64 << levels) }
            }
            _ => StateLabel::Combination,
        };
        Ok(Self { cell_n: n, m_offset: lo, coeffs: self.coeffs.iter().map(|c| c * phase).collect(), label })
    }

    /// Translate by `dn` cells and `dM` macro momentum cells.
    pub fn shift(&self, cfg: &PhysConfig, dn: i64, d_macro: i64) -> Result<Self> {
        self.shift_window(cfg, dn, d_macro * cfg.macro_size())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::GaussLegendre;

    fn cfg(levels: u32) -> PhysConfig {
        PhysConfig::code_units(levels, 4, 2)
    }

    #[test]
    fn window_position_values() {
        let c = cfg(3);
        assert!((eval_window_position(&c, LatticeIndex::new(0, 0), 0.0) - 1.0).norm() < 1e-15);
        assert_eq!(eval_window_position(&c, LatticeIndex::new(0, 0), 0.6).norm(), 0.0);
        assert!((eval_window_position(&c, LatticeIndex::new(1, 2), 1.0) - 1.0).norm() < 1e-12);
        assert!((eval_window_position(&c, LatticeIndex::new(0, 0), 0.5).norm() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn halving_signs() {
        assert_eq!(halving_coefficients(1, 3).unwrap(), vec![1, 1]);
        assert_eq!(halving_coefficients(2, 3).unwrap(), vec![1, -1, -1, 1]);
        assert_eq!(halving_coefficients(3, 3).unwrap(), vec![1, -1, 1, -1, -1, 1, -1, 1]);
        assert!(halving_coefficients(4, 3).is_err());
        assert!(halving_coefficients(0, 3).is_err());
    }

    #[test]
    fn level_support() {
        let s = LatticeState::level(&cfg(3), 2, 1, 1).unwrap();
        assert_eq!(s.m_range(), (4, 7));
        assert!((s.coeff(5).re + 0.5).abs() < 1e-15);
        assert!((s.norm() - 1.0).abs() < 1e-14);
        assert!(LatticeState::level(&cfg(3), 2, 9, 0).is_err());
        assert!(LatticeState::level(&cfg(3), 3, 0, 3).is_err());
    }

    #[test]
    fn macro_cell_is_orthonormal() {
        let c = cfg(4);
        let states = LatticeState::macro_cell_states(&c, 0, 1).unwrap();
        assert_eq!(states.len(), 16);
        for (i, s) in states.iter().enumerate() {
            for (j, t) in states.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((s.inner(t) - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn window_u_matches_quadrature() {
        let rule = GaussLegendre::new(400);
        for k in -3i64..=3 {
            let f = |u: f64| C64::from_polar(1.0, 2.0 * PI * k as f64 * u);
            let mut m1 = C64::new(0.0, 0.0);
            let mut m2 = C64::new(0.0, 0.0);
            for (u, w) in rule.mapped(-0.5, 0.5) {
                m1 += w * u * f(u);
                m2 += w * u * u * f(u);
            }
            assert!((m1 - window_u(1.0, k)).norm() < 1e-12, "k={k}");
            assert!((m2.re - window_u2(1.0, k)).abs() < 1e-12 && m2.im.abs() < 1e-12);
        }
    }

    #[test]
    fn momentum_moments_of_fiducials() {
        let c = cfg(5);
        for k in 1..=5u32 {
            let s = LatticeState::level(&c, k, 0, 0).unwrap();
            let exact_mean = 2.0 * PI * (2f64.powi(k as i32 - 1) - 0.5);
            let q = s.momentum_moment(&c, 1).unwrap();
            assert!((q - exact_mean).abs() < 1e-6 * exact_mean, "k={k} {q}");
            let p2 = s.momentum_moment(&c, 2).unwrap();
            let var = p2 - q * q;
            let want = (2.0 * PI).powi(2) * (4f64.powi(k as i32) - 1.0) / 12.0;
            assert!((var - want).abs() < 1e-6 * want, "k={k} {var} {want}");
            let ex = s.momentum_moment_exact(&c, 2).unwrap();
            assert!((ex - p2).abs() < 1e-6 * p2);
        }
    }

    #[test]
    fn window_momentum_norm_and_divergence() {
        let c = cfg(3);
        let w = LatticeState::window(&c, 0, 0).unwrap();
        let n0 = w.momentum_moment(&c, 0).unwrap();
        assert!((n0 - 1.0).abs() < 1e-8, "{n0}");
        assert!(matches!(w.momentum_moment(&c, 2), Err(Error::DivergentMoment { .. })));
        let r = LatticeState::remainder(&c, 0, 0).unwrap();
        assert!(matches!(r.momentum_moment(&c, 2), Err(Error::DivergentMoment { .. })));
        assert!(matches!(r.momentum_moment_exact(&c, 2), Err(Error::DivergentMoment { .. })));
    }

    #[test]
    fn shift_updates_labels_and_preserves_inner_products() {
        let c = cfg(3);
        let s = LatticeState::level(&c, 2, 0, 0).unwrap();
        let t = s.shift(&c, 3, 0).unwrap();
        assert_eq!(t, LatticeState::level(&c, 2, 3, 0).unwrap());
        let u = s.shift(&c, 1, 1).unwrap();
        assert_eq!(u.label, StateLabel::Level { k: 2, m: 2 });
        let odd = LatticeState::window(&c, 0, 0).unwrap().shift_window(&c, 1, 1).unwrap();
        assert!((odd.coeffs[0] + 1.0).norm() < 1e-15);
        assert!(s.shift(&c, 9, 0).is_err());
    }
}
