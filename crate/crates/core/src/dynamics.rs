//! High-temperature master equation for a free particle,
//! `∂_t W = −(p/m) ∂_q W + D ∂²_p W` with `D = 2mγkT`, solved by Strang
//! splitting on a periodic phase-space grid. Both substeps are exact in
//! Fourier space: a shear in `q` and a Gaussian convolution in `p`.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::wigner::{PhaseMoments, WignerGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct BathParams {
    pub mass: f64,
    pub gamma: f64,
    pub kt: f64,
}

impl BathParams {
    pub fn new(mass: f64, gamma: f64, kt: f64) -> Result<Self> {
        let b = Self { mass, gamma, kt };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.gamma > 0.0 && self.kt > 0.0) {
            return Err(Error::InvalidConfig("mass, gamma and kT must all be positive".into()));
        }
        Ok(())
    }

    /// Momentum diffusion constant `2mγkT`.
    pub fn diffusion(&self) -> f64 {
        2.0 * self.mass * self.gamma * self.kt
    }
}

/// Second moments predicted by the moment equations of the master equation:
/// `(Δp)²_t = (Δp)²_0 + 2Dt` and
/// `(Δx)²_t = (Δx)²_0 + (2t/m)σ_0 + (Δp)²_0 t²/m² + (2/3)Dt³/m²`.
pub fn moment_law(initial: &PhaseMoments, bath: &BathParams, t: f64) -> PhaseMoments {
    let m = bath.mass;
    let d = bath.diffusion();
    PhaseMoments {
        norm: initial.norm,
        mean_q: initial.mean_q + initial.mean_p * t / m,
        mean_p: initial.mean_p,
        var_q: initial.var_q + 2.0 * t / m * initial.cov_qp + initial.var_p * t * t / (m * m) + 2.0 / 3.0 * d * t.powi(3) / (m * m),
        var_p: initial.var_p + 2.0 * d * t,
        cov_qp: initial.cov_qp + initial.var_p * t / m + d * t * t / m,
    }
}

/// Fraction of `∫|W|` allowed in the outer sixteenth of either axis before
/// the evolution is declared to have left the domain.
pub const EDGE_BUDGET: f64 = 1e-7;

/// Weight of `|W|` in the outer sixteenth of each axis, relative to the total.
pub fn edge_fraction(w: &WignerGrid) -> f64 {
    let nq = w.q_axis.count;
    let np = w.p_axis.count;
    let bq = (nq / 16).max(1);
    let bp = (np / 16).max(1);
    let mut edge = 0.0;
    let mut total = 0.0;
    for iq in 0..nq {
        for ip in 0..np {
            let v = w.get(iq, ip).abs();
            total += v;
            if iq < bq || iq >= nq - bq || ip < bp || ip >= np - bp {
                edge += v;
            }
        }
    }
    edge / total.max(1e-300)
}

fn wavenumbers(n: usize, step: f64) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let s = if i < n / 2 { i as f64 } else { i as f64 - n as f64 };
            2.0 * PI * s / (n as f64 * step)
        })
        .collect()
}

/// Evolve `W` for time `t` in `steps` Strang steps. The grid is periodic;
/// `DomainOverflow` is raised when the distribution reaches the edges.
pub fn evolve_master(w: &WignerGrid, bath: &BathParams, t: f64, steps: usize) -> Result<WignerGrid> {
    bath.validate()?;
    if steps == 0 {
        return Err(Error::InvalidConfig("steps must be positive".into()));
    }
    if w.imag.is_some() {
        return Err(Error::InvalidConfig("evolution needs a real Wigner function".into()));
    }
    let nq = w.q_axis.count;
    let np = w.p_axis.count;
    let dt = t / steps as f64;
    let kq = wavenumbers(nq, w.q_axis.step);
    let kp = wavenumbers(np, w.p_axis.step);
    let mut planner = FftPlanner::<f64>::new();
    let fq = planner.plan_fft_forward(nq);
    let iq_fft = planner.plan_fft_inverse(nq);
    let fp = planner.plan_fft_forward(np);
    let ip_fft = planner.plan_fft_inverse(np);
    let diffusion: Vec<f64> = kp.iter().map(|k| (-bath.diffusion() * k * k * dt).exp()).collect();

    // Column-major over p: cols[ip][iq].
    let mut cols: Vec<Vec<C64>> = (0..np).map(|ip| (0..nq).map(|iq| C64::new(w.get(iq, ip), 0.0)).collect()).collect();
    let shear = |cols: &mut Vec<Vec<C64>>, tau: f64| {
        cols.par_iter_mut().enumerate().for_each(|(ip, col)| {
            let v = w.p_axis.at(ip) / bath.mass;
            fq.process(col);
            for (c, k) in col.iter_mut().zip(&kq) {
                *c *= C64::from_polar(1.0 / nq as f64, -k * v * tau);
            }
            iq_fft.process(col);
        });
    };
    let diffuse = |cols: &mut Vec<Vec<C64>>| {
        let mut rows: Vec<Vec<C64>> = (0..nq).map(|iq| cols.iter().map(|c| c[iq]).collect()).collect();
        rows.par_iter_mut().for_each(|row| {
            fp.process(row);
            for (c, g) in row.iter_mut().zip(&diffusion) {
                *c *= g / np as f64;
            }
            ip_fft.process(row);
        });
        for (ip, col) in cols.iter_mut().enumerate() {
            for (iq, c) in col.iter_mut().enumerate() {
                *c = rows[iq][ip];
            }
        }
    };

    shear(&mut cols, 0.5 * dt);
    for s in 0..steps {
        diffuse(&mut cols);
        shear(&mut cols, if s + 1 == steps { 0.5 * dt } else { dt });
    }
    let mut out = WignerGrid::zeros(w.q_axis, w.p_axis);
    for (ip, col) in cols.iter().enumerate() {
        for (iq, c) in col.iter().enumerate() {
            out.values[iq * np + ip] = c.re;
        }
    }
    let edge = edge_fraction(&out);
    if edge > EDGE_BUDGET {
        return Err(Error::DomainOverflow(format!("{edge:.2e} of the distribution reached the grid edge (budget {EDGE_BUDGET:.0e})")));
    }
    Ok(out)
}

/// Least-squares slope of `ln y` against `ln t`.
pub fn log_log_slope(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len() as f64;
    let lx: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
