//! The experiments behind each scenario verb. Each returns a [`Report`]
//! whose rows pair a measured value with the prediction it checks.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde_json::json;

use crate::audits::{
    cell_probability_dual, completeness_audit, decoherence_time_bound, interval_probability, probability_table, resolution_identity_check,
    slow_variation, thermal_condition, time_condition, AuditReport, IntervalSpec, Probe, ToleranceMode,
};
use crate::cell_traces::{CellTraces, TraceOptions};
use crate::config::PhysConfig;
use crate::dense::window_density;
use crate::density::{CellDensity, WindowDensity};
use crate::dynamics::{edge_fraction, evolve_master, log_log_slope, moment_law, BathParams};
use crate::error::{Error, Result};
use crate::lattice_states::LatticeState;
use crate::pair::{
    closeness_predicted, closeness_product, conditional_expectation, regime_estimate, Closeness, CommutingPair, Observable, PairDistance,
    DENSE_LIMIT,
};
use crate::projectors::{exhaustivity_deficit, CellProjector};
use crate::report::{Report, Table};
use crate::scenario::{
    AuditParams, ClosenessParams, EvolveParams, GridSpec, ProbabilitiesParams, ProbeSpec, ProjectorParams, RegimeParams, ResolvedState,
    ScalingParams, StatesParams,
};
use crate::wigner::{
    anticommutator_correspondence_check, pairing_identity_check, random_density, Axis, GaussianState, GridDensity, PhaseMoments, WignerGrid,
};

use ToleranceMode::{Absolute, Factor, Relative};

/// Single-cell configuration sharing the constants of `cfg`.
fn single_cell(cfg: &PhysConfig, levels: u32, n: i64, big_m: i64) -> PhysConfig {
    PhysConfig { levels, n_range: (n, n), macro_range: (big_m, big_m), ..cfg.clone() }
}

/// Largest entry of `|A − I|`.
fn identity_error(m: &DMatrix<C64>) -> f64 {
    let mut err = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            err = err.max((m[(i, j)] - C64::new(target, 0.0)).norm());
        }
    }
    err
}

pub fn states(cfg: &PhysConfig, params: &StatesParams) -> Result<Report> {
    let mut report = Report::new("states");
    let (n, big_m) = params.cell;
    let local = single_cell(cfg, cfg.levels, n, big_m);
    let family = LatticeState::macro_cell_states(&local, n, big_m)?;
    let size = family.len();
    let gram = DMatrix::from_fn(size, size, |i, j| family[i].inner(&family[j]));
    let lo = big_m * size as i64;
    let frame = DMatrix::from_fn(size, size, |i, j| family[j].coeff(lo + i as i64));
    let resolution = &frame * frame.adjoint();
    let tol = params.algebra_tolerance;
    report.row(AuditReport::new("orthonormality max |G - I|", "Eq. 4.9", identity_error(&gram), 0.0, tol, Absolute));
    report.row(AuditReport::new(
        "macro-cell completeness max |sum |s><s| - I|",
        "Eq. 4.9",
        identity_error(&resolution),
        0.0,
        tol,
        Absolute,
    ));

    let levels: Vec<u32> = params.levels.clone().unwrap_or_else(|| (1..=cfg.levels).collect());
    let top = levels.iter().copied().max().unwrap_or(1).max(1);
    let fid_cfg = single_cell(cfg, top, 0, 0);
    let b = cfg.b();
    let a = cfg.a;
    let mut moments = Table::new(
        "fiducial_moments",
        &["K", "mean_x", "var_x", "mean_p", "var_p", "var_p_exact", "mean_p_predicted", "var_p_predicted", "var_x_predicted"],
    );
    let mut x_profile = Table::new("fiducial_position_profiles", &["K", "x", "density"]);
    let mut p_profile = Table::new("fiducial_momentum_profiles", &["K", "p", "density"]);
    let tol = params.tolerance;
    let points = params.profile_points.max(2);
    for &k in &levels {
        let s = LatticeState::level(&fid_cfg, k, 0, 0)?;
        let mean_x = s.position_moment(&fid_cfg, 1)?;
        let var_x = s.position_moment(&fid_cfg, 2)? - mean_x * mean_x;
        let mean_p = s.momentum_moment(&fid_cfg, 1)?;
        let var_p = s.momentum_moment(&fid_cfg, 2)? - mean_p * mean_p;
        let exact_mean = s.momentum_moment_exact(&fid_cfg, 1)?;
        let var_p_exact = s.momentum_moment_exact(&fid_cfg, 2)? - exact_mean * exact_mean;
        let pk = 2f64.powi(k as i32);
        let want_mean_p = b * (0.5 * pk - 0.5);
        let want_var_p = b * b * (pk * pk - 1.0) / 12.0;
        let want_var_x = a * a / 12.0;
        report.row(AuditReport::new(&format!("<p>_K, K={k}"), "Eq. 4.18", mean_p, want_mean_p, tol, Relative));
        report.row(AuditReport::new(&format!("<x>_K, K={k}"), "Eq. 4.19", mean_x, 0.0, tol * a, Absolute));
        report.row(AuditReport::new(&format!("(dp)^2_K, K={k}"), "Eq. 4.20", var_p, want_var_p, tol, Relative));
        report.row(AuditReport::new(&format!("(dx)^2_K, K={k}"), "Eq. 4.21", var_x, want_var_x, tol, Relative));
        moments.push(vec![k as f64, mean_x, var_x, mean_p, var_p, var_p_exact, want_mean_p, want_var_p, want_var_x]);
        for i in 0..points {
            let x = -0.5 * a + a * i as f64 / (points - 1) as f64;
            x_profile.push(vec![k as f64, x, s.eval_position(&fid_cfg, x).norm_sqr()]);
        }
        let half = 3.0 * pk * b;
        for i in 0..points {
            let p = want_mean_p - half + 2.0 * half * i as f64 / (points - 1) as f64;
            p_profile.push(vec![k as f64, p, s.eval_momentum(&fid_cfg, p).norm_sqr()]);
        }
    }

    let window = LatticeState::window(&fid_cfg, 0, 0)?;
    let (flagged, decay) = match window.momentum_moment(&fid_cfg, 2) {
        Err(Error::DivergentMoment { decay }) => (true, Some(decay)),
        Ok(_) => (false, None),
        Err(e) => return Err(e),
    };
    report.row(AuditReport::new("window state (dp)^2 flagged divergent", "Eq. 4.2", if flagged { 1.0 } else { 0.0 }, 1.0, 0.0, Absolute));
    report.detail("cell", &params.cell)?;
    report.detail("family_size", &size)?;
    report.detail("window_second_moment", &json!({ "divergent": flagged, "amplitude_decay_power": decay }))?;
    report.tables.extend([moments, x_profile, p_profile]);
    Ok(report)
}

pub fn projector(cfg: &PhysConfig, params: &ProjectorParams) -> Result<Report> {
    let mut report = Report::new("projector");
    let (n, big_m) = params.cell;
    let local = PhysConfig { n_range: (n - 1, n + 1), macro_range: (big_m - 1, big_m + 1), ..cfg.clone() };
    let e = CellProjector::build(&local, n, big_m)?;
    let l = e.size();
    let mat = e.matrix();
    let tol = params.algebra_tolerance;
    let trace: f64 = (0..l).map(|i| mat[(i, i)].re).sum();
    report.row(AuditReport::new("Tr E", "Eq. 4.33", trace, (l - 1) as f64, tol, Absolute));
    let square = &mat * &mat;
    let idem = (&square - &mat).iter().map(|c| c.norm()).fold(0.0, f64::max);
    report.row(AuditReport::new("max |E^2 - E|", "Eq. 4.27", idem, 0.0, tol, Absolute));

    // E_a E_b on the range of E_b, for every neighbouring cell b.
    let mut excl = 0.0f64;
    for dn in -1..=1 {
        for dm in -1..=1 {
            if dn == 0 && dm == 0 {
                continue;
            }
            let other = CellProjector::build(&local, n + dn, big_m + dm)?;
            for w in 0..l as i64 {
                let col = other.apply(&LatticeState::window(&local, n + dn, other.m_lo() + w)?);
                let image = e.apply(&col);
                excl = image.coeffs.iter().fold(excl, |acc, c| acc.max(c.norm()));
            }
        }
    }
    report.row(AuditReport::new("max |E_a E_b| over neighbours", "Eq. 1.17", excl, 0.0, tol, Absolute));

    let m = e.moments(&local)?;
    let b = cfg.b();
    let a = cfg.a;
    let lf = l as f64;
    let mtol = params.moment_tolerance;
    let cell_p = (big_m as f64) * lf * b;
    let centre_x = local.cell_center(n);
    report.row(AuditReport::new("<p>_E", "Eq. 4.35", m.mean_p, cell_p + b * (0.5 * lf - 0.5), mtol, Relative));
    report.row(AuditReport::new("<x>_E", "Eq. 4.38", m.mean_x, centre_x, mtol * a, Absolute));
    report.row(AuditReport::new("(dx)^2_E", "Eq. 4.39", m.var_x, a * a / 12.0, mtol, Relative));
    let level_sum: f64 = (1..=cfg.levels)
        .map(|k| {
            let pk = 2f64.powi(k as i32);
            b * b * (pk * pk - 1.0) / 12.0 / pk
        })
        .sum();
    let leading = 2f64.powi(cfg.levels as i32 + 1) * PI * PI * cfg.hbar * cfg.hbar / (3.0 * a * a);
    let exact_var = b * b * (lf * lf - 1.0) / 12.0;
    report.row(AuditReport::new("(dp)^2_E against the level sum", "Eq. 4.36", m.var_p, level_sum, params.leading_tolerance, Relative));
    report.row(AuditReport::new("(dp)^2_E against the leading form", "Eq. 4.37", m.var_p, leading, params.leading_tolerance, Relative));
    report.row(AuditReport::new("(dp)^2_E mixture closed form", "derived", m.var_p, exact_var, mtol, Relative));

    let bl = e.balian_low_diagnostic(&local)?;
    report.row(AuditReport::new("Im Tr(E[x,p]) against hbar Tr E", "Eq. 3.2", bl.trace_commutator.im, bl.expected.im, mtol, Relative));
    report.detail("cell", &params.cell)?;
    report.detail("moments", &m)?;
    report.detail("balian_low", &bl)?;
    report
        .detail("momentum_variance", &json!({ "exact": m.var_p, "level_sum": level_sum, "leading": leading, "closed_form": exact_var }))?;

    let pts = params.heatmap_points.max(2);
    let mut heat = Table::new("projector_wigner", &["q", "p", "W"]);
    let width = local.macro_width();
    let (q_lo, q_hi) = (centre_x - a, centre_x + a);
    let (p_lo, p_hi) = (cell_p - 0.5 * width - 0.5 * b, cell_p + 1.5 * width - 0.5 * b);
    for iq in 0..pts {
        let q = q_lo + (q_hi - q_lo) * iq as f64 / (pts - 1) as f64;
        for ip in 0..pts {
            let p = p_lo + (p_hi - p_lo) * ip as f64 / (pts - 1) as f64;
            heat.push(vec![q, p, crate::audits::projector_wigner(&local, n, big_m, p, q)]);
        }
    }
    report.tables.push(heat);
    Ok(report)
}

pub fn regime(params: &RegimeParams) -> Result<Report> {
    let mut report = Report::new("regime");
    let ratio = regime_estimate(params.dx, params.dv, params.mass, params.hbar)?;
    report.row(AuditReport::new("dp dx / hbar", "Eq. 1.3", ratio, params.predicted, params.factor, Factor));
    report.detail("inputs", params)?;
    report.detail("log10_ratio", &ratio.log10())?;
    Ok(report)
}

/// Conditional widths `(√(det/var_p), √(det/var_q))` of a Gaussian with
/// these moments: the narrowest features of its Wigner function along each
/// axis.
fn conditional_widths(m: &PhaseMoments) -> (f64, f64) {
    let det = m.var_q * m.var_p - m.cov_qp * m.cov_qp;
    ((det / m.var_p).sqrt(), (det / m.var_q).sqrt())
}

const MAX_AXIS_POINTS: usize = 4096;

/// Smallest even `n' ≥ n` whose only prime factors are 2, 3 and 5.
fn fft_size(n: usize) -> usize {
    let smooth = |mut m: usize| {
        for f in [2, 3, 5] {
            while m.is_multiple_of(f) {
                m /= f;
            }
        }
        m == 1
    };
    (n.max(2)..).find(|&m| m % 2 == 0 && smooth(m)).expect("smooth sizes are unbounded")
}

/// Grid holding the state over the whole run, eight standard deviations
/// each way, with two points per standard deviation of its narrowest
/// feature.
fn auto_grid(g: &GaussianState, bath: &BathParams, t_final: f64, times: &[f64]) -> Result<GridSpec> {
    let initial = g.phase_moments();
    let end = moment_law(&initial, bath, t_final);
    let (mut fq, mut fp) = conditional_widths(&initial);
    for &t in times {
        let (wq, wp) = conditional_widths(&moment_law(&initial, bath, t));
        fq = fq.min(wq);
        fp = fp.min(wp);
    }
    let drift = (g.p0 * t_final / bath.mass).abs();
    let q_half = 8.0 * end.var_q.sqrt() + 0.5 * drift;
    let p_half = 8.0 * end.var_p.sqrt();
    let q_count = (2.0 * q_half / (0.5 * fq)).ceil() as usize;
    let p_count = (2.0 * p_half / (0.5 * fp)).ceil() as usize;
    if q_count > MAX_AXIS_POINTS || p_count > MAX_AXIS_POINTS {
        return Err(Error::GridTooCoarse(format!(
            "automatic grid needs {q_count} x {p_count} points; give an explicit grid or a shorter t_final"
        )));
    }
    Ok(GridSpec { q_count: fft_size(q_count), p_count: fft_size(p_count), q_half_width: q_half, p_half_width: p_half })
}

/// Every `stride`-th point along each axis, so heatmaps stay small.
fn heatmap(name: &str, w: &WignerGrid, max_points: usize) -> Table {
    let sq = w.q_axis.count.div_ceil(max_points).max(1);
    let sp = w.p_axis.count.div_ceil(max_points).max(1);
    let mut t = Table::new(name, &["q", "p", "W"]);
    for iq in (0..w.q_axis.count).step_by(sq) {
        for ip in (0..w.p_axis.count).step_by(sp) {
            t.push(vec![w.q_axis.at(iq), w.p_axis.at(ip), w.get(iq, ip)]);
        }
    }
    t
}

pub fn evolve(g: &GaussianState, bath: &BathParams, params: &EvolveParams, thermal_ratio: Option<f64>, seed: u64) -> Result<Report> {
    let mut report = Report::new("evolve");
    let hbar = g.hbar;
    let dt = params.t_final / params.snapshots as f64;
    let times: Vec<f64> = (1..=params.snapshots).map(|i| dt * i as f64).collect();
    let grid = match params.grid {
        Some(grid) => grid,
        None => auto_grid(g, bath, params.t_final, &times)?,
    };
    if grid.q_count < 8 || grid.p_count < 8 || !(grid.q_half_width > 0.0 && grid.p_half_width > 0.0) {
        return Err(Error::InvalidConfig("grid needs at least 8 points and positive widths per axis".into()));
    }
    let q_centre = g.q0 + 0.5 * g.p0 * params.t_final / bath.mass;
    let q_axis = Axis::centered(q_centre, 2.0 * grid.q_half_width / grid.q_count as f64, grid.q_count);
    let p_axis = Axis::centered(g.p0, 2.0 * grid.p_half_width / grid.p_count as f64, grid.p_count);
    let mut w = WignerGrid::from_fn(q_axis, p_axis, |p, q| g.wigner(p, q));
    let initial = w.moments();
    let analytic = g.phase_moments();

    let mut table = Table::new("moments", &["t", "var_q", "var_p", "cov_qp", "var_q_law", "var_p_law", "var_q_printed", "spread_product"]);
    let printed = |t: f64| {
        let m = bath.mass;
        initial.var_q + 2.0 / m * initial.cov_qp + initial.var_p * t * t / (m * m) + 2.0 / 3.0 * bath.diffusion() * t.powi(3) / (m * m)
    };
    let record = |t: f64, m: &PhaseMoments, table: &mut Table| {
        let law = moment_law(&initial, bath, t);
        table.push(vec![t, m.var_q, m.var_p, m.cov_qp, law.var_q, law.var_p, printed(t), (m.var_q * m.var_p).sqrt() / hbar]);
    };
    record(0.0, &initial, &mut table);
    let mut last = initial;
    for &t in &times {
        w = evolve_master(&w, bath, dt, params.steps_per_snapshot)?;
        last = w.moments();
        record(t, &last, &mut table);
    }
    let t_end = params.t_final;
    let law = moment_law(&initial, bath, t_end);
    report.row(AuditReport::new("(dp)^2 at t_final", "Eq. 2.6", last.var_p, law.var_p, 1e-3, Relative));
    report.row(AuditReport::new("(dx)^2 at t_final, covariance term with factor t", "Eq. 2.7", last.var_q, law.var_q, 1e-2, Relative));
    let fit: Vec<(f64, f64)> = times
        .iter()
        .zip(table.column("spread_product").expect("column exists").iter().skip(1))
        .filter(|(t, _)| **t >= params.fit_from * t_end)
        .map(|(t, y)| (*t, *y))
        .collect();
    if fit.len() < 2 {
        return Err(Error::InvalidConfig("fewer than two snapshots fall inside the growth fit".into()));
    }
    let (ft, fy): (Vec<f64>, Vec<f64>) = fit.into_iter().unzip();
    let exponent = log_log_slope(&ft, &fy);
    report.row(AuditReport::new("growth exponent of dp dx / hbar", "Eq. 2.9", exponent, 2.0, 0.02, Absolute));

    let pair_axis = Axis::centered(0.0, 0.2 * hbar.sqrt(), 64);
    let ra = random_density(pair_axis, hbar, params.pairing_rank, seed);
    let rb = random_density(pair_axis, hbar, params.pairing_rank, seed.wrapping_add(1));
    let pairing = pairing_identity_check(&ra, &rb)?;
    let rel = pairing.error / pairing.trace_product.norm();
    report.row(AuditReport::new("Tr(AB) against 2 pi hbar int W_A W_B, relative", "Eq. 2.3", rel, 0.0, 1e-8, Absolute));

    // Pure reference state with the aspect ratio of the initial state.
    let aspect = g.dx / g.dp;
    let reference = GaussianState::new((0.0, 0.0), ((0.5 * hbar * aspect).sqrt(), (0.5 * hbar / aspect).sqrt()), 0.0, hbar)?;
    let sampled = GridDensity::sample(&reference, Axis::centered(0.0, reference.dx / 5.0, 128), hbar);
    let anti = anticommutator_correspondence_check(&sampled)?;
    report.row(AuditReport::new("(x rho + rho x)/2 against q W", "Eq. 2.11", anti.x_error, 0.0, 1e-6, Absolute));
    report.row(AuditReport::new("(p rho + rho p)/2 against p W", "Eq. 2.12", anti.p_error, 0.0, 1e-6, Absolute));
    if let Some(ratio) = thermal_ratio {
        report.row(AuditReport::new("dx dp / hbar against kT / hbar omega", "Eq. 2.10", g.dx * g.dp / hbar, ratio, 1e-3, Relative));
    }

    report.detail("grid", &grid)?;
    report.detail("initial_moments", &initial)?;
    report.detail("analytic_initial_moments", &analytic)?;
    report.detail("final_moments", &last)?;
    report.detail("law_final_moments", &law)?;
    report.detail(
        "printed_position_variance",
        &json!({ "value": printed(t_end), "relative_difference": printed(t_end) / law.var_q - 1.0 }),
    )?;
    report.detail("edge_fraction", &edge_fraction(&w))?;
    report.detail("pairing", &pairing)?;
    report.detail("seed", &seed)?;
    report.detail("anticommutator_reference_state", &reference)?;
    report.detail("anticommutators", &anti)?;
    report.tables.push(table);
    report.tables.push(heatmap("wigner_final", &w, 128));
    report.grids.push(("wigner_final".into(), w));
    Ok(report)
}

/// Restricted distances, closeness constant and projector moments for `g`.
struct ClosenessData {
    distances: PairDistance,
    closeness: Closeness,
    var_p_e: f64,
    leading: f64,
    tail_mass: f64,
    pair: CommutingPair,
}

fn closeness_data(cfg: &PhysConfig, g: &GaussianState) -> Result<ClosenessData> {
    let traces = CellTraces::new(cfg, g, TraceOptions { levels: false, momentum_kernel: true })?;
    let pair = CommutingPair::build(cfg)?;
    let distances = pair.distances(&traces)?;
    let closeness = closeness_product(cfg, &distances);
    let local = single_cell(cfg, cfg.levels, 0, 0);
    let var_p_e = CellProjector::build(&local, 0, 0)?.recenter(&local)?.moments(&local)?.var_p;
    let leading = 2f64.powi(cfg.levels as i32 + 1) * PI * PI * cfg.hbar * cfg.hbar / (3.0 * cfg.a * cfg.a);
    Ok(ClosenessData { distances, closeness, var_p_e, leading, tail_mass: traces.tail_mass(), pair })
}

pub fn closeness(cfg: &PhysConfig, g: &GaussianState, params: &ClosenessParams) -> Result<Report> {
    let mut report = Report::new("closeness");
    let data = closeness_data(cfg, g)?;
    let d = &data.distances;
    let a2 = cfg.a * cfg.a / 12.0;
    report.row(AuditReport::new("||X - x||^2", "Eq. 6.16", d.x.restricted, a2, params.x_tolerance, Relative));
    report.row(AuditReport::new("||P - p||^2 against (dp)^2_E", "Eq. 6.13", d.p.restricted, data.var_p_e, params.p_tolerance, Relative));
    report.row(AuditReport::new(
        "||P - p||^2 against the leading form",
        "Eq. 6.14",
        d.p.restricted,
        data.leading,
        params.p_tolerance,
        Relative,
    ));
    report.row(AuditReport::new("C", "Eq. 6.18", data.closeness.c_measured, data.closeness.c_predicted, params.c_tolerance, Relative));
    report.row(AuditReport::new("Tr(P[p, rho]) / i", "Eq. 6.8", d.p.commutator, 0.0, 1e-6 * d.p.restricted, Absolute));
    report.row(AuditReport::new("Tr(X[x, rho]) / i", "Eq. 6.8", d.x.commutator, 0.0, 1e-6 * d.x.restricted, Absolute));
    if cfg.basis_size() <= DENSE_LIMIT {
        report.row(AuditReport::new("||[X, P]||", "Eq. 6.3", data.pair.commutator_norm()?, 0.0, 1e-10, Absolute));
    }
    report.detail("distances", d)?;
    report.detail("closeness", &data.closeness)?;
    report.detail("projector_momentum_variance", &data.var_p_e)?;
    report.detail("tail_mass", &data.tail_mass)?;
    report.detail("state", g)?;

    if let Some(ladder) = &params.pseudoclassical {
        if cfg.basis_size() > DENSE_LIMIT {
            return Err(Error::InvalidConfig(format!(
                "the pseudo-classical ladder needs at most {DENSE_LIMIT} basis states, truncation has {}",
                cfg.basis_size()
            )));
        }
        let x = data.pair.dense_x()?;
        let p = data.pair.dense_p()?;
        let mut table = Table::new("pseudoclassical_ladder", &["broadness", "trace_distance", "commutator", "fixed_point_error"]);
        let mut distances = Vec::new();
        for &beta in &ladder.broadness {
            let gb = GaussianState::new((g.q0, g.p0), (beta * g.dx, beta * g.dp), beta * beta * g.sigma, g.hbar)?;
            let rho = window_density(cfg, &gb)?;
            let out = data.pair.pseudoclassical(&rho)?;
            let rp = &out.rho_prime.mat;
            let comm = (&x * rp - rp * &x).norm().max((&p * rp - rp * &p).norm());
            let again = conditional_expectation(cfg, &out.rho_prime)?;
            let fixed = (&again.mat - rp).norm();
            report.row(AuditReport::new(&format!("||[X or P, rho']||, broadness {beta}"), "Eq. 1.5", comm, 0.0, 1e-10, Absolute));
            report.row(AuditReport::new(&format!("||rho'' - rho'||, broadness {beta}"), "Eq. 1.5", fixed, 0.0, 1e-12, Absolute));
            table.push(vec![beta, out.trace_distance, comm, fixed]);
            distances.push(out.trace_distance);
        }
        let rises = distances.windows(2).filter(|w| w[1] >= w[0]).count();
        report.row(AuditReport::new("trace-distance increases along the ladder", "Eq. 1.5", rises as f64, 0.0, 0.0, Absolute));
        report.tables.push(table);
    }
    Ok(report)
}

pub fn scaling(base: &PhysConfig, params: &ScalingParams) -> Result<Report> {
    let mut report = Report::new("scaling");
    let mut table = Table::new(
        "c_vs_n",
        &["N", "c_measured", "c_predicted", "c_literal", "x_distance", "x_predicted", "p_distance", "p_predicted", "p_leading"],
    );
    let a2 = base.a * base.a / 12.0;
    for &levels in &params.levels {
        let cfg = PhysConfig {
            levels,
            n_range: (-((params.span * params.spread_cells).ceil() as i64), (params.span * params.spread_cells).ceil() as i64),
            macro_range: (-((params.span * params.spread_macros).ceil() as i64), (params.span * params.spread_macros).ceil() as i64),
            ..base.clone()
        };
        let w = cfg.macro_width();
        let g = GaussianState::new((0.0, 0.0), (params.spread_cells * cfg.a, params.spread_macros * w), 0.0, cfg.hbar)?;
        let data = closeness_data(&cfg, &g)?;
        let d = &data.distances;
        report.row(AuditReport::new(&format!("||X - x||^2, N={levels}"), "Eq. 6.16", d.x.restricted, a2, params.x_tolerance, Relative));
        report.row(AuditReport::new(
            &format!("||P - p||^2, N={levels}"),
            "Eq. 6.13",
            d.p.restricted,
            data.var_p_e,
            params.p_tolerance,
            Relative,
        ));
        report.row(AuditReport::new(
            &format!("C, N={levels}"),
            "Eq. 6.18",
            data.closeness.c_measured,
            data.closeness.c_predicted,
            params.c_tolerance,
            Relative,
        ));
        table.push(vec![
            levels as f64,
            data.closeness.c_measured,
            data.closeness.c_predicted,
            data.closeness.c_literal,
            d.x.restricted,
            a2,
            d.p.restricted,
            data.var_p_e,
            data.leading,
        ]);
    }
    let ns: Vec<f64> = table.column("N").expect("column exists").iter().map(|n| 2f64.powf(*n)).collect();
    let slope = log_log_slope(&ns, &table.column("c_measured").expect("column exists"));
    let literal_slope = log_log_slope(&ns, &table.column("c_literal").expect("column exists"));
    report.row(AuditReport::new("slope of log2 C against N", "Eq. 6.18", slope, 0.5, params.slope_tolerance, Absolute));
    let c_ref = closeness_predicted(params.c_reference_levels);
    report.row(AuditReport::new(
        &format!("closed-form C at N={}", params.c_reference_levels),
        "Eq. 6.18",
        c_ref,
        params.c_reference,
        10f64.sqrt(),
        Factor,
    ));
    report.detail("literal_slope", &literal_slope)?;
    report.detail("closed_form_c", &json!({ "levels": params.c_reference_levels, "value": c_ref }))?;
    report.tables.push(table);
    Ok(report)
}

/// Density behind a resolved test state: cell traces of a Gaussian or the
/// window-basis matrix of a basis state.
enum Density<'g> {
    Traces(CellTraces<'g>),
    Window(WindowDensity),
}

impl<'g> Density<'g> {
    fn new(cfg: &PhysConfig, state: &'g ResolvedState, levels: bool) -> Result<Self> {
        match state {
            ResolvedState::Gaussian(g) => Ok(Density::Traces(CellTraces::new(cfg, g, TraceOptions { levels, momentum_kernel: false })?)),
            ResolvedState::Basis(s) => Ok(Density::Window(WindowDensity::pure(cfg, s)?)),
        }
    }

    fn as_dyn(&self) -> &dyn CellDensity {
        match self {
            Density::Traces(t) => t,
            Density::Window(w) => w,
        }
    }

    fn traces(&self, what: &str) -> Result<&CellTraces<'g>> {
        match self {
            Density::Traces(t) => Ok(t),
            Density::Window(_) => Err(Error::InvalidConfig(format!("{what} needs a Gaussian state"))),
        }
    }
}

/// One standard deviation either side of the mean, in whole cells.
fn default_intervals(cfg: &PhysConfig, g: &GaussianState) -> Vec<IntervalSpec> {
    let w = cfg.macro_width();
    let x = IntervalSpec {
        axis: Observable::X,
        lo_index: ((g.q0 - g.dx) / cfg.a).round() as i64,
        hi_index: ((g.q0 + g.dx) / cfg.a).round() as i64,
    };
    let lo = ((g.p0 - g.dp) / w).round() as i64;
    let p = IntervalSpec { axis: Observable::P, lo_index: lo, hi_index: (((g.p0 + g.dp) / w).round() as i64 - 1).max(lo) };
    vec![x, p]
}

pub fn probabilities(cfg: &PhysConfig, state: &ResolvedState, params: &ProbabilitiesParams) -> Result<Report> {
    let mut report = Report::new("probabilities");
    let density = Density::new(cfg, state, false)?;
    let rho = density.as_dyn();
    let pair = CommutingPair::build(cfg)?;
    let cells = probability_table(&pair, rho)?;
    let mut table = Table::new("cell_probabilities", &["n", "M", "x", "p", "probability"]);
    for c in &cells {
        table.push(vec![c.n as f64, c.big_m as f64, c.x, c.p, c.probability]);
    }
    let negativity = cells.iter().map(|c| -c.probability).fold(0.0, f64::max);
    report.row(AuditReport::new("largest negative cell probability", "Eq. 7.4", negativity, 0.0, 1e-10, Absolute));
    let deficit = exhaustivity_deficit(rho)?;
    let cell_sum: f64 = cells.iter().map(|c| c.probability).sum();

    let intervals = match (&params.intervals, state) {
        (Some(list), _) => list.clone(),
        (None, ResolvedState::Gaussian(g)) => default_intervals(cfg, g),
        (None, ResolvedState::Basis(_)) => Vec::new(),
    };
    let mut comparison =
        Table::new("interval_comparison", &["axis", "lo_index", "hi_index", "lo", "hi", "measured", "canonical", "complement", "passed"]);
    let mut interval_reports = Vec::new();
    for iv in &intervals {
        let traces = density.traces("an interval comparison")?;
        let r = interval_probability(&pair, traces, iv, params.tolerance, &params.thresholds)?;
        let inside: f64 = cells
            .iter()
            .filter(|c| match iv.axis {
                Observable::X => c.n >= iv.lo_index && c.n <= iv.hi_index,
                Observable::P => c.big_m >= iv.lo_index && c.big_m <= iv.hi_index,
            })
            .map(|c| c.probability)
            .sum();
        let outside = cell_sum - inside;
        let partition = r.audit.measured + outside + deficit.deficit + deficit.leakage;
        report.row(r.audit.clone());
        report.row(AuditReport::new(
            &format!("interval, complementary cells, remainders and leakage, {:?} [{}, {}]", iv.axis, iv.lo_index, iv.hi_index),
            "Eq. 7.4",
            partition,
            rho.total_trace(),
            1e-10,
            Absolute,
        ));
        comparison.push(vec![
            match iv.axis {
                Observable::X => 0.0,
                Observable::P => 1.0,
            },
            iv.lo_index as f64,
            iv.hi_index as f64,
            r.bounds.0,
            r.bounds.1,
            r.audit.measured,
            r.audit.predicted,
            r.complement,
            if r.audit.passed() { 1.0 } else { 0.0 },
        ]);
        interval_reports.push(r);
    }
    let mut duals = Vec::new();
    for &(n, big_m) in &params.dual_cells {
        let traces = density.traces("the Wigner route")?;
        let d = cell_probability_dual(&pair, traces, n, big_m)?;
        report.row(AuditReport::new(
            &format!("p_nM window against Wigner route, cell ({n}, {big_m})"),
            &d.equation,
            d.window,
            d.wigner,
            params.dual_tolerance,
            Absolute,
        ));
        duals.push(d);
    }
    report.detail("deficit", &deficit)?;
    report.detail("intervals", &interval_reports)?;
    report.detail("dual", &duals)?;
    report.detail("thresholds", &params.thresholds)?;
    report.tables.push(table);
    report.tables.push(comparison);
    Ok(report)
}

pub fn audit(cfg: &PhysConfig, state: &ResolvedState, bath: Option<&BathParams>, params: &AuditParams) -> Result<Report> {
    let mut report = Report::new("audit");
    let density = Density::new(cfg, state, true)?;
    let rho = density.as_dyn();
    let c = completeness_audit(rho, params.tolerance, &params.thresholds)?;
    let mut row = c.audit.clone();
    let conditions = std::mem::take(&mut row.conditions);
    report.row(row);
    let mut shares = Table::new("level_shares", &["K", "measured", "predicted"]);
    for s in &c.levels {
        report.row(AuditReport::new(
            &format!("level share K={}", s.k),
            &c.level_equation,
            s.measured,
            s.predicted,
            params.level_tolerance,
            Absolute,
        ));
        shares.push(vec![s.k as f64, s.measured, s.predicted]);
    }
    report.tables.push(shares);
    report.detail("deficit", &c.deficit)?;
    report.detail("tail_mass", &c.tail_mass)?;
    report.detail("slow_variation", &slow_variation(rho))?;
    let mut all_conditions = conditions;

    if let Some(spec) = &params.probe {
        let g = match state {
            ResolvedState::Gaussian(g) => g,
            ResolvedState::Basis(_) => return Err(Error::InvalidConfig("the resolution check needs a Gaussian state".into())),
        };
        let probe = match *spec {
            ProbeSpec::Gaussian { q0, p0, dx, dp, sigma } => Probe::Gaussian(GaussianState::new((q0, p0), (dx, dp), sigma, cfg.hbar)?),
            ProbeSpec::Level { k, n, m } => Probe::Lattice(LatticeState::level(cfg, k, n, m)?),
        };
        let r = resolution_identity_check(cfg, g, &probe, params.resolution_tolerance)?;
        for row in r.levels.iter().chain(std::iter::once(&r.total)).chain(r.continuum.iter()) {
            report.row(row.clone());
        }
    }
    if let Some(bath) = bath {
        if let Some(t) = params.time {
            let bound = decoherence_time_bound(cfg.hbar, bath.gamma, bath.kt, cfg.levels)?;
            report.detail("decoherence_time_bound", &json!({ "value": bound, "equation": "Eq. 7.14" }))?;
            all_conditions.push(time_condition(t, cfg.hbar, bath.gamma, bath.kt, cfg.levels, &params.thresholds)?);
        }
        if let Some(omega) = params.omega {
            all_conditions.push(thermal_condition(bath.kt, cfg.hbar, omega, cfg.levels, &params.thresholds)?);
        }
    }
    report.detail("conditions", &all_conditions)?;
    Ok(report)
}
