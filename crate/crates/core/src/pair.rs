//! Commuting position and momentum operators `X̂ = Σ X_n E_{nM}`,
//! `P̂ = Σ P_M E_{nM}` built on the cell projectors, their distance to the
//! canonical pair and the density operator they can see.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::cell_traces::CellTraces;
use crate::config::PhysConfig;
use crate::density::{CellDensity, WindowDensity};
use crate::error::{Error, Result};
use crate::lattice_states::{window_u, LatticeState};
use crate::projectors::CellProjector;

/// Largest truncated basis for which dense operator matrices are built.
pub const DENSE_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum Observable {
    X,
    P,
}

/// Spectral data of the commuting pair. `p_offset` is the momentum label of
/// the lowest window of a macro cell's recentring, in units of `2πℏ/a`,
/// relative to the start of the cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommutingPair {
    pub config: PhysConfig,
    pub p_offset: f64,
}

/// Pieces of `Tr((Â − â)² ρ)` for one axis.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AxisDistance {
    /// `Σ Tr(E (â − A_cell) ρ (â − A_cell))` over truncated cells.
    pub restricted: f64,
    /// `Σ ⟨âχ|ρ|âχ⟩` over the remainder states.
    pub remainder: f64,
    /// Weight of `â ρ â` on windows outside the truncation.
    pub outside: f64,
    /// `restricted + remainder + outside`: the full `Tr((Â − â)² ρ)`, which
    /// equals `Tr((Â − â) ρ (Â − â))`.
    pub literal: f64,
    /// `Tr(Â[â, ρ]) / i`. Subtracting `i` times this from `literal` gives
    /// the ordering with `Â` moved to the left.
    pub commutator: f64,
}

impl AxisDistance {
    /// `√restricted`.
    pub fn norm(&self) -> f64 {
        self.restricted.max(0.0).sqrt()
    }

    /// `d² = remainder + outside`.
    pub fn d2(&self) -> f64 {
        self.remainder + self.outside
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairDistance {
    pub x: AxisDistance,
    pub p: AxisDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Closeness {
    /// `‖P̂ − p̂‖ ‖X̂ − x̂‖` from the restricted norms.
    pub product: f64,
    pub c_measured: f64,
    pub c_predicted: f64,
    /// Same from the literal norms.
    pub literal_product: f64,
    pub c_literal: f64,
}

/// `2^{N/2} π / (3√2)`.
pub fn closeness_predicted(levels: u32) -> f64 {
    2f64.powf(levels as f64 / 2.0) * PI / (3.0 * 2f64.sqrt())
}

pub fn closeness_product(cfg: &PhysConfig, d: &PairDistance) -> Closeness {
    let product = d.p.norm() * d.x.norm();
    let literal_product = d.p.literal.max(0.0).sqrt() * d.x.literal.max(0.0).sqrt();
    Closeness {
        product,
        c_measured: product / cfg.hbar,
        c_predicted: closeness_predicted(cfg.levels),
        literal_product,
        c_literal: literal_product / cfg.hbar,
    }
}

/// Number of phase-space cells `m Δv Δx / ℏ` resolved by a measurement.
pub fn regime_estimate(dx: f64, dv: f64, mass: f64, hbar: f64) -> Result<f64> {
    if !(dx > 0.0 && dv > 0.0 && mass > 0.0 && hbar > 0.0) {
        return Err(Error::InvalidConfig("regime estimate needs positive inputs".into()));
    }
    Ok(mass * dv * dx / hbar)
}

/// `ρ′` and its trace distance to `ρ`.
#[derive(Debug, Clone)]
pub struct Pseudoclassical {
    pub rho_prime: WindowDensity,
    pub trace_distance: f64,
}

impl CommutingPair {
    /// Pair with `P_M` at the mean momentum of `E_{0M}`.
    pub fn build(cfg: &PhysConfig) -> Result<Self> {
        let offset = CellProjector::build(cfg, cfg.n_range.0, cfg.macro_range.0)?.recenter(cfg)?.p_offset;
        let rel = offset - (cfg.macro_range.0 * cfg.macro_size()) as f64;
        Self::with_offset(cfg, rel)
    }

    pub fn with_offset(cfg: &PhysConfig, p_offset: f64) -> Result<Self> {
        cfg.validate()?;
        if cfg.cell_count() < 3 || cfg.macro_count() < 3 {
            return Err(Error::Truncation(format!(
                "the pair needs at least 3 cells per axis, got {} x {}",
                cfg.cell_count(),
                cfg.macro_count()
            )));
        }
        Ok(Self { config: cfg.clone(), p_offset })
    }

    pub fn x_value(&self, n: i64) -> f64 {
        n as f64 * self.config.a
    }

    pub fn p_value(&self, big_m: i64) -> f64 {
        ((big_m * self.config.macro_size()) as f64 + self.p_offset) * self.config.b()
    }

    pub fn x_spectrum(&self) -> Vec<(i64, f64)> {
        (self.config.n_range.0..=self.config.n_range.1).map(|n| (n, self.x_value(n))).collect()
    }

    pub fn p_spectrum(&self) -> Vec<(i64, f64)> {
        (self.config.macro_range.0..=self.config.macro_range.1).map(|m| (m, self.p_value(m))).collect()
    }

    fn dense(&self, which: Observable) -> Result<DMatrix<C64>> {
        let cfg = &self.config;
        let d = cfg.basis_size();
        if d > DENSE_LIMIT {
            return Err(Error::InvalidConfig(format!("dense operators limited to {DENSE_LIMIT} basis states, truncation has {d}")));
        }
        let mut out = DMatrix::<C64>::zeros(d, d);
        let size = cfg.macro_size() as usize;
        for n in cfg.n_range.0..=cfg.n_range.1 {
            for big_m in cfg.macro_range.0..=cfg.macro_range.1 {
                let e = CellProjector::build(cfg, n, big_m)?;
                let value = match which {
                    Observable::X => self.x_value(n),
                    Observable::P => self.p_value(big_m),
                };
                let base = cfg.flat_index(n, e.m_lo()).expect("projector inside truncation");
                out.view_mut((base, base), (size, size)).copy_from(&(e.matrix() * C64::new(value, 0.0)));
            }
        }
        Ok(out)
    }

    pub fn dense_x(&self) -> Result<DMatrix<C64>> {
        self.dense(Observable::X)
    }

    pub fn dense_p(&self) -> Result<DMatrix<C64>> {
        self.dense(Observable::P)
    }

    /// Frobenius norm of `[X̂, P̂]` from the dense matrices.
    pub fn commutator_norm(&self) -> Result<f64> {
        let x = self.dense_x()?;
        let p = self.dense_p()?;
        Ok((&x * &p - &p * &x).norm())
    }

    /// Both distances for a continuous density.
    pub fn distances(&self, rho: &CellTraces) -> Result<PairDistance> {
        let cfg = &self.config;
        if !rho.options().momentum_kernel {
            return Err(Error::InvalidConfig("distances need the momentum kernel traces".into()));
        }
        if rho.config() != cfg {
            return Err(Error::InvalidConfig("density and pair use different configurations".into()));
        }
        let b = cfg.b();
        let r = self.p_offset;
        let mut x = AxisDistance::default();
        let mut p = AxisDistance::default();
        let (mut x2_cells, mut p2_cells) = (0.0, 0.0);
        let (mut x2_windows, mut p2_windows) = (0.0, 0.0);
        for n in cfg.n_range.0..=cfg.n_range.1 {
            let c = self.x_value(n);
            let mom = rho.cell_moments(n);
            x2_cells += mom.x2;
            p2_cells += mom.p2;
            for big_m in cfg.macro_range.0..=cfg.macro_range.1 {
                let rec = rho.record(n, big_m);
                x.restricted += rec.u2_block - rec.chi_uu;
                p.restricted +=
                    b * b * ((rec.q2 - 2.0 * r * rec.q1 + r * r * rec.block) - (rec.chi_ii - 2.0 * r * rec.chi_i0.re + r * r * rec.chi));
                x.remainder += c * c * rec.chi + 2.0 * c * rec.chi_u0.re + rec.chi_uu;
                p.remainder += rec.chi_pp;
                x2_windows += c * c * rec.block + 2.0 * c * rec.u1_block.re + rec.u2_block;
                p2_windows += rec.pp_block;
                x.commutator += 2.0 * c * rec.trace_x_rho(c).im;
                p.commutator += 2.0 * self.p_value(big_m) * rec.trace_p_rho().im;
            }
        }
        x.outside = x2_cells - x2_windows;
        p.outside = p2_cells - p2_windows;
        for axis in [&mut x, &mut p] {
            axis.literal = axis.restricted + axis.remainder + axis.outside;
        }
        Ok(PairDistance { x, p })
    }

    /// Restricted distance `Σ Tr(E (â − A) ρ (â − A))` for a density given
    /// in the window basis, from exact window matrix elements. Exact when
    /// `ρ` is supported inside the truncation.
    pub fn window_restricted_norm(&self, which: Observable, rho: &WindowDensity) -> Result<f64> {
        let cfg = &self.config;
        let w = cfg.windows_per_cell();
        let (m_lo, _) = cfg.window_range();
        let size = cfg.macro_size() as usize;
        let b = cfg.b();
        let u = DMatrix::from_fn(w, w, |t, m| window_u(cfg.a, m as i64 - t as i64));
        let mut total = 0.0;
        for n in cfg.n_range.0..=cfg.n_range.1 {
            let base = cfg.flat_index(n, m_lo).expect("cell inside truncation");
            let block = rho.mat.view((base, base), (w, w)).clone_owned();
            let sandwiched = match which {
                Observable::X => &u * &block * &u,
                Observable::P => {
                    let a = DMatrix::from_fn(w, 1, |j, _| {
                        let local = (j % size) as f64;
                        C64::new(b * (local - self.p_offset), 0.0)
                    });
                    DMatrix::from_fn(w, w, |t, s| a[(t, 0)] * block[(t, s)] * a[(s, 0)])
                }
            };
            for big_m in cfg.macro_range.0..=cfg.macro_range.1 {
                let e = CellProjector::build(cfg, n, big_m)?.matrix();
                let off = (big_m - cfg.macro_range.0) as usize * size;
                let sub = sandwiched.view((off, off), (size, size));
                total += (0..size).flat_map(|s| (0..size).map(move |t| (s, t))).map(|(s, t)| (e[(s, t)] * sub[(t, s)]).re).sum::<f64>();
            }
        }
        Ok(total)
    }

    /// `ρ′ = Σ Tr(Eρ) E / Tr E + Σ ⟨χ|ρ|χ⟩ |χ⟩⟨χ|` and `½‖ρ − ρ′‖₁`.
    pub fn pseudoclassical(&self, rho: &WindowDensity) -> Result<Pseudoclassical> {
        let rho_prime = conditional_expectation(&self.config, rho)?;
        let diff = &rho.mat - &rho_prime.mat;
        let eig = SymmetricEigen::new(diff);
        let trace_distance = 0.5 * eig.eigenvalues.iter().map(|v| v.abs()).sum::<f64>();
        Ok(Pseudoclassical { rho_prime, trace_distance })
    }
}

/// The map `ρ ↦ ρ′`: a projection onto operators diagonal in the cells.
pub fn conditional_expectation(cfg: &PhysConfig, rho: &WindowDensity) -> Result<WindowDensity> {
    let d = cfg.basis_size();
    if d > DENSE_LIMIT {
        return Err(Error::InvalidConfig(format!("dense operators limited to {DENSE_LIMIT} basis states, truncation has {d}")));
    }
    let size = cfg.macro_size() as usize;
    let mut out = DMatrix::<C64>::zeros(d, d);
    for n in cfg.n_range.0..=cfg.n_range.1 {
        for big_m in cfg.macro_range.0..=cfg.macro_range.1 {
            let e = CellProjector::build(cfg, n, big_m)?;
            let chi = LatticeState::remainder(cfg, n, big_m)?;
            let weight = e.expectation(rho) / e.rank() as f64;
            let chi_weight = rho.expect(&chi);
            let v = DMatrix::from_iterator(size, 1, chi.coeffs.iter().copied());
            let block = e.matrix() * C64::new(weight, 0.0) + (&v * v.adjoint()) * C64::new(chi_weight, 0.0);
            let base = cfg.flat_index(n, e.m_lo()).expect("projector inside truncation");
            out.view_mut((base, base), (size, size)).copy_from(&block);
        }
    }
    WindowDensity::from_matrix(cfg, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell_traces::TraceOptions;
    use crate::dense::window_density;
    use crate::quad::panel_nodes;
    use crate::wigner::GaussianState;

    #[test]
    fn dense_operators_commute() {
        for levels in [2, 3, 6] {
            let cfg = PhysConfig::code_units(levels, 1, 1);
            let pair = CommutingPair::build(&cfg).unwrap();
            assert!(pair.commutator_norm().unwrap() < 1e-10);
            let xs = pair.x_spectrum();
            let ps = pair.p_spectrum();
            assert!(xs.windows(2).all(|w| w[1].1 > w[0].1));
            let spacing = ps[1].1 - ps[0].1;
            assert!((spacing - cfg.macro_width()).abs() < 1e-12);
        }
    }

    #[test]
    fn recentred_labels_sit_at_cell_means() {
        let cfg = PhysConfig::code_units(3, 1, 1);
        let pair = CommutingPair::build(&cfg).unwrap();
        assert!((pair.p_offset - 3.5).abs() < 1e-12);
        assert!((pair.p_value(0) - 3.5 * cfg.b()).abs() < 1e-12);
    }

    #[test]
    fn too_small_truncation_rejected() {
        let cfg = PhysConfig { n_range: (0, 1), ..PhysConfig::code_units(2, 1, 1) };
        assert!(matches!(CommutingPair::build(&cfg), Err(Error::Truncation(_))));
    }

    #[test]
    fn x_eigenvalue_on_cell_states() {
        let cfg = PhysConfig::code_units(2, 1, 1);
        let pair = CommutingPair::build(&cfg).unwrap();
        let x = pair.dense_x().unwrap();
        let s = LatticeState::level(&cfg, 1, 1, 1).unwrap();
        let v = crate::density::embed(&cfg, &s).unwrap();
        assert!((&x * &v - &v * C64::new(cfg.a, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn momentum_distance_agrees_between_engines() {
        let cfg = PhysConfig::code_units(3, 4, 2);
        let g = GaussianState::new((0.2, 1.0), (1.0, 0.4 * cfg.macro_width()), 0.3, 1.0).unwrap();
        let pair = CommutingPair::build(&cfg).unwrap();
        let traces = CellTraces::new(&cfg, &g, TraceOptions::default()).unwrap();
        let dense = window_density(&cfg, &g).unwrap();
        let d = pair.distances(&traces).unwrap();
        let oracle = pair.window_restricted_norm(Observable::P, &dense).unwrap();
        assert!((d.p.restricted - oracle).abs() < 1e-9 * oracle, "{} {oracle}", d.p.restricted);
    }

    #[test]
    fn position_distance_of_window_state_matches_quadrature() {
        // ρ = |s⟩⟨s| for a level state s: Σ_M ‖E_M u s‖² with the inner
        // products ⟨ψ_j|u s⟩ and ⟨χ_M|u s⟩ done by quadrature.
        let cfg = PhysConfig::code_units(2, 1, 3);
        let pair = CommutingPair::build(&cfg).unwrap();
        let s = LatticeState::level(&cfg, 2, 0, 0).unwrap();
        let rho = WindowDensity::pure(&cfg, &s).unwrap();
        let algebra = pair.window_restricted_norm(Observable::X, &rho).unwrap();
        let nodes = panel_nodes(-0.5, 0.5, 16, 16);
        let proj = |t: &LatticeState| -> C64 {
            nodes.iter().map(|&(x, w)| t.eval_position(&cfg, x).conj() * s.eval_position(&cfg, x) * (x * w)).sum()
        };
        let mut oracle = 0.0;
        for big_m in cfg.macro_range.0..=cfg.macro_range.1 {
            for j in 0..cfg.macro_size() {
                let w = LatticeState::window(&cfg, 0, big_m * cfg.macro_size() + j).unwrap();
                oracle += proj(&w).norm_sqr();
            }
            oracle -= proj(&LatticeState::remainder(&cfg, 0, big_m).unwrap()).norm_sqr();
        }
        assert!((algebra - oracle).abs() < 1e-12, "{algebra} {oracle}");
    }

    #[test]
    fn narrow_state_at_cell_centre_stays_inside_bound() {
        let cfg = PhysConfig::code_units(3, 3, 3);
        let g = GaussianState::new((0.0, 0.0), (0.08, 0.3 * cfg.macro_width()), 0.0, 1.0).unwrap();
        let traces = CellTraces::new(&cfg, &g, TraceOptions::default()).unwrap();
        let d = CommutingPair::build(&cfg).unwrap().distances(&traces).unwrap();
        assert!(d.x.restricted < 1.0 / 12.0, "{:?}", d.x);
    }

    #[test]
    fn literal_norm_matches_direct_moments() {
        // Tr((X̂ − x̂)²ρ) = Tr(X̂²ρ) − 2 Re Tr(X̂ x̂ ρ) + Tr(x̂²ρ); with
        // Tr(X̂ x̂ ρ) = Σ X_n Tr(E x̂ ρ) and Tr(X̂²ρ) = Σ X_n² Tr(Eρ).
        let cfg = PhysConfig::code_units(3, 5, 3);
        let g = GaussianState::new((0.3, 2.0), (1.1, 0.45 * cfg.macro_width()), 0.2, 1.0).unwrap();
        let traces = CellTraces::new(&cfg, &g, TraceOptions::default()).unwrap();
        let pair = CommutingPair::build(&cfg).unwrap();
        let d = pair.distances(&traces).unwrap();
        let (mut xx, mut xbig, mut pp, mut pbig) = (0.0, 0.0, 0.0, 0.0);
        for n in cfg.n_range.0..=cfg.n_range.1 {
            let c = pair.x_value(n);
            for big_m in cfg.macro_range.0..=cfg.macro_range.1 {
                let r = traces.record(n, big_m);
                let e = r.block - r.chi;
                let pm = pair.p_value(big_m);
                xbig += c * c * e - 2.0 * c * r.trace_x_rho(c).re;
                pbig += pm * pm * e - 2.0 * pm * r.trace_p_rho().re;
            }
            xx += traces.cell_moments(n).x2;
            pp += traces.cell_moments(n).p2;
        }
        let lit_x = xbig + xx;
        let lit_p = pbig + pp;
        assert!((d.x.literal - lit_x).abs() < 1e-9 * lit_x, "{} {lit_x}", d.x.literal);
        assert!((d.p.literal - lit_p).abs() < 1e-9 * lit_p, "{} {lit_p}", d.p.literal);
    }

    #[test]
    fn pseudoclassical_map_properties() {
        let cfg = PhysConfig::code_units(2, 2, 2);
        let pair = CommutingPair::build(&cfg).unwrap();
        let g = GaussianState::new((0.1, 0.5), (0.9, 0.5 * cfg.macro_width()), 0.1, 1.0).unwrap();
        let rho = window_density(&cfg, &g).unwrap();
        let out = pair.pseudoclassical(&rho).unwrap();
        let rp = &out.rho_prime;
        assert!((rp.total_trace() - rho.total_trace()).abs() < 1e-12);
        let x = pair.dense_x().unwrap();
        let p = pair.dense_p().unwrap();
        assert!((&x * &rp.mat - &rp.mat * &x).norm() < 1e-10);
        assert!((&p * &rp.mat - &rp.mat * &p).norm() < 1e-10);
        let again = pair.pseudoclassical(rp).unwrap();
        assert!(again.trace_distance < 1e-12);
        assert!((&again.rho_prime.mat - &rp.mat).norm() < 1e-12);
    }

    #[test]
    fn pure_cell_state_is_maximally_far() {
        let cfg = PhysConfig::code_units(3, 1, 1);
        let pair = CommutingPair::build(&cfg).unwrap();
        let s = LatticeState::level(&cfg, 3, 0, 0).unwrap();
        let rho = WindowDensity::pure(&cfg, &s).unwrap();
        let l = cfg.macro_size() as f64;
        let td = pair.pseudoclassical(&rho).unwrap().trace_distance;
        assert!((td - (l - 2.0) / (l - 1.0)).abs() < 1e-12, "{td}");
    }

    #[test]
    fn regime_and_prediction() {
        let r = regime_estimate(1e-8, 1e-8, 1e-6, 1.0546e-34).unwrap();
        assert!((r.log10() - 12.0).abs() < 0.1);
        assert!((regime_estimate(2.0, 1.0, 0.5, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((regime_estimate(4.0, 1.0, 0.5, 1.0).unwrap() - 2.0).abs() < 1e-15);
        let c20 = closeness_predicted(20);
        assert!((c20 - 758.3).abs() < 1.0, "{c20}");
    }
}
