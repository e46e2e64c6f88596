//! Randomized algebra checks and closed-form oracles for the Gaussian
//! marginals.

use approx::assert_relative_eq;
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use phasecell::audits::{interval_probability, IntervalSpec, Thresholds};
use phasecell::cell_traces::{CellTraces, TraceOptions};
use phasecell::config::PhysConfig;
use phasecell::lattice_states::LatticeState;
use phasecell::pair::{CommutingPair, Observable};
use phasecell::projectors::CellProjector;
use phasecell::wigner::GaussianState;

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn macro_cell_family_is_orthonormal(levels in 1u32..=6, n in -2i64..=2, big_m in -2i64..=2) {
        let cfg = PhysConfig::code_units(levels, 2, 2);
        let family = LatticeState::macro_cell_states(&cfg, n, big_m).unwrap();
        prop_assert_eq!(family.len(), 1usize << levels);
        for (i, s) in family.iter().enumerate() {
            for (j, t) in family.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                prop_assert!((s.inner(t) - target).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn shifted_level_states_are_orthogonal(levels in 1u32..=5, k in 1u32..=5, dn in -1i64..=1, dm in -1i64..=1) {
        prop_assume!(k <= levels && (dn, dm) != (0, 0));
        let cfg = PhysConfig::code_units(levels, 2, 2);
        let s = LatticeState::level(&cfg, k, 0, 0).unwrap();
        let t = s.shift(&cfg, dn, dm).unwrap();
        prop_assert!(s.inner(&t).norm() < 1e-12);
        prop_assert!((t.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cell_projector_is_a_rank_deficient_projection(levels in 1u32..=6, n in -1i64..=1, big_m in -1i64..=1) {
        let cfg = PhysConfig::code_units(levels, 1, 1);
        let e = CellProjector::build(&cfg, n, big_m).unwrap();
        let m = e.matrix();
        let trace: f64 = (0..m.nrows()).map(|i| m[(i, i)].re).sum();
        prop_assert!((trace - ((1u64 << levels) - 1) as f64).abs() < 1e-12);
        let idem = (&m * &m - &m).iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(idem < 1e-12);
        let chi = LatticeState::remainder(&cfg, n, big_m).unwrap();
        prop_assert!(e.apply(&chi).norm() < 1e-12);
    }
}

fn broad_state(cfg: &PhysConfig) -> (GaussianState, f64, f64, f64, f64) {
    let (q0, p0) = (0.3 * cfg.a, 0.4 * cfg.macro_width());
    let (dx, dp) = (4.0 * cfg.a, 4.0 * cfg.macro_width());
    (GaussianState::new((q0, p0), (dx, dp), 0.0, cfg.hbar).unwrap(), q0, p0, dx, dp)
}

#[test]
fn canonical_marginals_match_the_normal_cdf() {
    let cfg = PhysConfig::code_units(3, 30, 30);
    let (g, q0, p0, dx, dp) = broad_state(&cfg);
    let rho = CellTraces::new(&cfg, &g, TraceOptions::default()).unwrap();
    let pair = CommutingPair::build(&cfg).unwrap();
    let x = Normal::new(q0, dx).unwrap();
    let p = Normal::new(p0, dp).unwrap();
    for (axis, lo, hi) in [(Observable::X, -3, 5), (Observable::X, 0, 0), (Observable::P, -2, 2), (Observable::P, 1, 6)] {
        let interval = IntervalSpec { axis, lo_index: lo, hi_index: hi };
        let r = interval_probability(&pair, &rho, &interval, 0.05, &Thresholds::default()).unwrap();
        let (a, b) = r.bounds;
        let oracle = match axis {
            Observable::X => x.cdf(b) - x.cdf(a),
            Observable::P => p.cdf(b) - p.cdf(a),
        };
        assert_relative_eq!(r.audit.predicted, oracle, max_relative = 1e-9);
        assert_relative_eq!(r.audit.measured + r.complement, 1.0, epsilon = 1e-9);
    }
}

#[test]
fn interval_bounds_follow_the_lattice_spectra() {
    let cfg = PhysConfig::code_units(3, 30, 30);
    let x = IntervalSpec { axis: Observable::X, lo_index: -2, hi_index: 4 };
    assert_eq!(x.bounds(&cfg), (-2.5 * cfg.a, 4.5 * cfg.a));
    let p = IntervalSpec { axis: Observable::P, lo_index: -1, hi_index: 1 };
    let (lo, hi) = p.bounds(&cfg);
    assert_relative_eq!(hi - lo, 3.0 * cfg.macro_width(), max_relative = 1e-14);
    assert_relative_eq!(lo, -cfg.macro_width() - 0.5 * cfg.b(), max_relative = 1e-14);
}
