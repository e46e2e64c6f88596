//! Density kernels, the discrete Wigner transform and its inverse.
//!
//! A density operator sampled on a uniform position grid `x_i = x_0 + i h`
//! maps exactly onto a Wigner grid with `q_c = x_0 + c h / 2`
//! (`c = 0 … 2n − 2`) and `p_l = π ℏ l / (n h)` (`l = −n/2 … n/2 − 1`):
//!
//! `W(p_l, q_c) = (h / πℏ) Σ_d e^{−i p_l d h / ℏ} ρ((c + d)/2, (c − d)/2)`.
//!
//! The map is invertible, preserves `Tr(AB) = 2πℏ Σ W_A W_B Δq Δp`, and its
//! momentum marginal is the discrete momentum distribution of the grid state.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Position-space kernel `ρ(x, y)` of a density operator.
pub trait Kernel: Sync {
    /// `ρ(x̄ + ξ/2, x̄ − ξ/2)`.
    fn kernel_cs(&self, xbar: f64, xi: f64) -> C64;

    fn kernel(&self, x: f64, y: f64) -> C64 {
        self.kernel_cs(0.5 * (x + y), x - y)
    }

    fn density(&self, x: f64) -> f64 {
        self.kernel_cs(x, 0.0).re
    }

    fn hbar(&self) -> f64;

    /// `Tr ρ`.
    fn trace(&self) -> f64 {
        1.0
    }

    /// Smallest length over which `ρ(x̄, ·)` changes with `x̄`, and the decay
    /// length of `ρ(·, ξ)` in `ξ`. Used to size quadratures.
    fn scales(&self) -> (f64, f64);

    /// Wigner function `W(p, q)`.
    fn wigner(&self, p: f64, q: f64) -> f64;

    /// Momentum-space probability density `⟨p|ρ|p⟩`.
    fn momentum_density(&self, p: f64) -> f64;

    /// Mean momentum of the phase `ρ(x̄, ξ) ∝ e^{i μ(x̄) ξ / ℏ}`; removing it
    /// makes `ξ`-profiles slowly varying.
    fn local_momentum(&self, _xbar: f64) -> f64 {
        0.0
    }

    /// Kernel of `p̂ ρ`, `−iℏ ∂_x ρ(x, y)`, by central differences.
    fn kernel_p_cs(&self, xbar: f64, xi: f64) -> C64 {
        let h = 1e-4 * self.scales().0.min(self.scales().1);
        let (x, y) = (xbar + 0.5 * xi, xbar - 0.5 * xi);
        let d = self.kernel(x + h, y) - self.kernel(x - h, y);
        d * C64::new(0.0, -self.hbar() / (2.0 * h))
    }

    /// Kernel of `p̂ ρ p̂`, `ℏ² ∂_x ∂_y ρ(x, y)`, by central differences.
    fn kernel_pp_cs(&self, xbar: f64, xi: f64) -> C64 {
        let h = 1e-4 * self.scales().0.min(self.scales().1);
        let (x, y) = (xbar + 0.5 * xi, xbar - 0.5 * xi);
        let d = self.kernel(x + h, y + h) - self.kernel(x + h, y - h) - self.kernel(x - h, y + h) + self.kernel(x - h, y - h);
        d * (self.hbar() * self.hbar() / (4.0 * h * h))
    }
}

/// Gaussian state with means `(q0, p0)`, variances `(Δx², Δp²)` and
/// covariance `σ(x,p)`; pure when `Δx² Δp² − σ² = ℏ²/4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianState {
    pub q0: f64,
    pub p0: f64,
    pub dx: f64,
    pub dp: f64,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default = "unit")]
    pub hbar: f64,
}

fn unit() -> f64 {
    1.0
}

impl GaussianState {
    /// Validated constructor; rejects states violating the Robertson-Schrödinger
    /// bound `Δx² Δp² − σ² ≥ ℏ²/4`.
    pub fn new(center: (f64, f64), spreads: (f64, f64), sigma: f64, hbar: f64) -> Result<Self> {
        let s = Self { q0: center.0, p0: center.1, dx: spreads.0, dp: spreads.1, sigma, hbar };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dx > 0.0 && self.dp > 0.0 && self.hbar > 0.0) {
            return Err(Error::InvalidConfig("Gaussian spreads and hbar must be positive".into()));
        }
        let det = self.dx.powi(2) * self.dp.powi(2) - self.sigma.powi(2);
        let bound = 0.25 * self.hbar * self.hbar;
        if det < bound * (1.0 - 1e-12) {
            return Err(Error::UncertaintyViolation { product: det.max(0.0).sqrt(), bound: 0.5 * self.hbar });
        }
        Ok(())
    }

    /// Thermal state of an oscillator of mass `m`, frequency `ω` at
    /// temperature `kT`, centred on `(q0, p0)`.
    pub fn thermal_oscillator(mass: f64, omega: f64, kt: f64, center: (f64, f64), hbar: f64) -> Result<Self> {
        if !(mass > 0.0 && omega > 0.0 && kt > 0.0) {
            return Err(Error::InvalidConfig("mass, omega and kT must be positive".into()));
        }
        let coth = 1.0 / (hbar * omega / (2.0 * kt)).tanh();
        let dx = (hbar / (2.0 * mass * omega) * coth).sqrt();
        let dp = (mass * hbar * omega / 2.0 * coth).sqrt();
        Self::new(center, (dx, dp), 0.0, hbar)
    }

    /// Conditional momentum variance at fixed position.
    /// `(∂_x̄ ln ρ, ∂_ξ ln ρ)` of the density kernel.
    fn log_gradient(&self, xbar: f64, xi: f64) -> (C64, C64) {
        let hb = self.hbar;
        let kappa = self.sigma / self.dx.powi(2);
        let f_bar = C64::new(-(xbar - self.q0) / self.dx.powi(2), kappa * xi / hb);
        let f_xi = C64::new(-self.conditional_var_p() * xi / (hb * hb), self.local_momentum(xbar) / hb);
        (f_bar, f_xi)
    }

    pub fn conditional_var_p(&self) -> f64 {
        self.dp.powi(2) - self.sigma.powi(2) / self.dx.powi(2)
    }

    /// Analytic Wigner function.
    pub fn wigner(&self, p: f64, q: f64) -> f64 {
        let det = self.dx.powi(2) * self.dp.powi(2) - self.sigma.powi(2);
        let dq = q - self.q0;
        let dpp = p - self.p0;
        let quad = (self.dp.powi(2) * dq * dq - 2.0 * self.sigma * dq * dpp + self.dx.powi(2) * dpp * dpp) / det;
        (-0.5 * quad).exp() / (2.0 * PI * det.sqrt())
    }

    /// Exact phase-space moments.
    pub fn phase_moments(&self) -> PhaseMoments {
        PhaseMoments { norm: 1.0, mean_q: self.q0, mean_p: self.p0, var_q: self.dx * self.dx, var_p: self.dp * self.dp, cov_qp: self.sigma }
    }

    /// Momentum-space probability density.
    pub fn momentum_density(&self, p: f64) -> f64 {
        let z = (p - self.p0) / self.dp;
        (-0.5 * z * z).exp() / ((2.0 * PI).sqrt() * self.dp)
    }
}

impl Kernel for GaussianState {
    fn kernel_cs(&self, xbar: f64, xi: f64) -> C64 {
        let z = (xbar - self.q0) / self.dx;
        let g = (-0.5 * z * z).exp() / ((2.0 * PI).sqrt() * self.dx);
        let v = self.conditional_var_p();
        let amp = g * (-v * xi * xi / (2.0 * self.hbar * self.hbar)).exp();
        C64::from_polar(amp, self.local_momentum(xbar) * xi / self.hbar)
    }

    fn hbar(&self) -> f64 {
        self.hbar
    }

    fn scales(&self) -> (f64, f64) {
        (self.dx, self.hbar / self.conditional_var_p().sqrt())
    }

    fn wigner(&self, p: f64, q: f64) -> f64 {
        GaussianState::wigner(self, p, q)
    }

    fn momentum_density(&self, p: f64) -> f64 {
        GaussianState::momentum_density(self, p)
    }

    fn local_momentum(&self, xbar: f64) -> f64 {
        self.p0 + self.sigma * (xbar - self.q0) / self.dx.powi(2)
    }

    /// `∂_x = ∂_x̄/2 + ∂_ξ` applied to `ρ = e^f`.
    fn kernel_p_cs(&self, xbar: f64, xi: f64) -> C64 {
        let (f_bar, f_xi) = self.log_gradient(xbar, xi);
        self.kernel_cs(xbar, xi) * (f_bar * 0.5 + f_xi) * C64::new(0.0, -self.hbar)
    }

    /// With `f = ln ρ` in centre/separation coordinates,
    /// `∂_x ∂_y ρ = ρ (f_x̄²/4 − f_ξ² + f_x̄x̄/4 − f_ξξ)`.
    fn kernel_pp_cs(&self, xbar: f64, xi: f64) -> C64 {
        let hb = self.hbar;
        let v = self.conditional_var_p();
        let (f_bar, f_xi) = self.log_gradient(xbar, xi);
        let f_barbar = -1.0 / self.dx.powi(2);
        let f_xixi = -v / (hb * hb);
        let factor = f_bar * f_bar * 0.25 - f_xi * f_xi + 0.25 * f_barbar - f_xixi;
        self.kernel_cs(xbar, xi) * factor * (hb * hb)
    }
}

/// Uniform axis `min + i · step`, `i = 0 … count − 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub min: f64,
    pub step: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(min: f64, step: f64, count: usize) -> Self {
        Self { min, step, count }
    }

    /// `count` points centred on `center` with spacing `step`.
    pub fn centered(center: f64, step: f64, count: usize) -> Self {
        Self { min: center - step * (count as f64 / 2.0), step, count }
    }

    pub fn at(&self, i: usize) -> f64 {
        self.min + i as f64 * self.step
    }

    pub fn max(&self) -> f64 {
        self.at(self.count - 1)
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(|i| self.at(i))
    }
}

/// Density kernel sampled on a uniform position grid, `mat[(i, j)] = ρ(x_i, x_j)`.
#[derive(Debug, Clone)]
pub struct GridDensity {
    pub axis: Axis,
    pub hbar: f64,
    pub mat: DMatrix<C64>,
}

impl GridDensity {
    pub fn sample<K: Kernel + ?Sized>(kernel: &K, axis: Axis, hbar: f64) -> Self {
        let n = axis.count;
        let cols: Vec<Vec<C64>> = (0..n).into_par_iter().map(|j| (0..n).map(|i| kernel.kernel(axis.at(i), axis.at(j))).collect()).collect();
        let mat = DMatrix::from_fn(n, n, |i, j| cols[j][i]);
        Self { axis, hbar, mat }
    }

    /// Mixture `Σ w_k |φ_k⟩⟨φ_k|` of grid wavefunctions.
    pub fn from_wavefunctions(axis: Axis, hbar: f64, terms: &[(f64, Vec<C64>)]) -> Self {
        let n = axis.count;
        let mut mat = DMatrix::<C64>::zeros(n, n);
        for (w, psi) in terms {
            let v = DMatrix::from_column_slice(n, 1, psi);
            mat += (&v * v.adjoint()) * C64::new(*w, 0.0);
        }
        Self { axis, hbar, mat }
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace() * self.axis.step
    }

    /// `Tr(A B)` as the grid quadrature `h² Σ A_ij B_ji`.
    pub fn trace_product(&self, other: &GridDensity) -> C64 {
        let h = self.axis.step;
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..self.axis.count {
            for j in 0..self.axis.count {
                acc += self.mat[(i, j)] * other.mat[(j, i)];
            }
        }
        acc * h * h
    }

    /// Symbol of `(x̂ρ + ρx̂)/2`.
    pub fn anticommute_x(&self) -> GridDensity {
        let ax = self.axis;
        let mat = DMatrix::from_fn(ax.count, ax.count, |i, j| self.mat[(i, j)] * (0.5 * (ax.at(i) + ax.at(j))));
        GridDensity { axis: ax, hbar: self.hbar, mat }
    }

    /// Spectral momentum operator on the periodic grid.
    pub fn momentum_matrix(&self) -> DMatrix<C64> {
        let n = self.axis.count;
        let h = self.axis.step;
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let k: Vec<f64> = (0..n)
            .map(|i| {
                let s = if i < n / 2 { i as f64 } else { i as f64 - n as f64 };
                2.0 * PI * s / (n as f64 * h)
            })
            .collect();
        let mut out = DMatrix::<C64>::zeros(n, n);
        for j in 0..n {
            let mut col = vec![C64::new(0.0, 0.0); n];
            col[j] = C64::new(1.0, 0.0);
            fwd.process(&mut col);
            for (c, kk) in col.iter_mut().zip(&k) {
                *c *= kk * self.hbar / n as f64;
            }
            inv.process(&mut col);
            for i in 0..n {
                out[(i, j)] = col[i];
            }
        }
        out
    }

    /// Symbol of `(p̂ρ + ρp̂)/2` with the spectral momentum operator.
    pub fn anticommute_p(&self, pmat: &DMatrix<C64>) -> GridDensity {
        let mat = (pmat * &self.mat + &self.mat * pmat) * C64::new(0.5, 0.0);
        GridDensity { axis: self.axis, hbar: self.hbar, mat }
    }
}

/// Phase-space grid of Wigner values, stored q-major:
/// `values[iq * p_axis.count + ip]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub q_axis: Axis,
    pub p_axis: Axis,
    pub values: Vec<f64>,
    /// Imaginary part for the symbol of a non-Hermitian operator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub imag: Option<Vec<f64>>,
}

/// Integrated moments of a Wigner grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseMoments {
    pub norm: f64,
    pub mean_q: f64,
    pub mean_p: f64,
    pub var_q: f64,
    pub var_p: f64,
    pub cov_qp: f64,
}

impl WignerGrid {
    pub fn zeros(q_axis: Axis, p_axis: Axis) -> Self {
        Self { q_axis, p_axis, values: vec![0.0; q_axis.count * p_axis.count], imag: None }
    }

    pub fn from_fn<F: Fn(f64, f64) -> f64 + Sync>(q_axis: Axis, p_axis: Axis, f: F) -> Self {
        let values =
            (0..q_axis.count * p_axis.count).into_par_iter().map(|k| f(p_axis.at(k % p_axis.count), q_axis.at(k / p_axis.count))).collect();
        Self { q_axis, p_axis, values, imag: None }
    }

    pub fn get(&self, iq: usize, ip: usize) -> f64 {
        self.values[iq * self.p_axis.count + ip]
    }

    pub fn cell_area(&self) -> f64 {
        self.q_axis.step * self.p_axis.step
    }

    pub fn moments(&self) -> PhaseMoments {
        let (mut n, mut q1, mut p1, mut q2, mut p2, mut qp) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for iq in 0..self.q_axis.count {
            let q = self.q_axis.at(iq);
            for ip in 0..self.p_axis.count {
                let p = self.p_axis.at(ip);
                let w = self.get(iq, ip);
                n += w;
                q1 += w * q;
                p1 += w * p;
                q2 += w * q * q;
                p2 += w * p * p;
                qp += w * q * p;
            }
        }
        let da = self.cell_area();
        let norm = n * da;
        let mq = q1 / n;
        let mp = p1 / n;
        PhaseMoments { norm, mean_q: mq, mean_p: mp, var_q: q2 / n - mq * mq, var_p: p2 / n - mp * mp, cov_qp: qp / n - mq * mp }
    }

    /// `2πℏ ∫∫ W²`.
    pub fn purity(&self, hbar: f64) -> f64 {
        2.0 * PI * hbar * self.values.iter().map(|w| w * w).sum::<f64>() * self.cell_area()
    }

    /// `2πℏ ∫∫ W_A W_B` (complex symbols allowed).
    pub fn pairing(&self, other: &WignerGrid, hbar: f64) -> C64 {
        let zero = vec![0.0; self.values.len()];
        let ai = self.imag.as_ref().unwrap_or(&zero);
        let bi = other.imag.as_ref().unwrap_or(&zero);
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..self.values.len() {
            acc += C64::new(self.values[k], ai[k]) * C64::new(other.values[k], bi[k]);
        }
        acc * (2.0 * PI * hbar * self.cell_area())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        match &self.imag {
            None => writeln!(f, "q,p,W")?,
            Some(_) => writeln!(f, "q,p,W,W_im")?,
        }
        for iq in 0..self.q_axis.count {
            for ip in 0..self.p_axis.count {
                let k = iq * self.p_axis.count + ip;
                let (q, p) = (self.q_axis.at(iq), self.p_axis.at(ip));
                match &self.imag {
                    None => writeln!(f, "{q:.17e},{p:.17e},{:.17e}", self.values[k])?,
                    Some(im) => writeln!(f, "{q:.17e},{p:.17e},{:.17e},{:.17e}", self.values[k], im[k])?,
                }
            }
        }
        Ok(())
    }

    /// One JSON header line, then little-endian `f64` values: the real block,
    /// followed by the imaginary block when `complex` is true.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let header = serde_json::json!({
            "format": "phasecell-wigner-f64le",
            "layout": "q-major",
            "q_axis": self.q_axis,
            "p_axis": self.p_axis,
            "complex": self.imag.is_some(),
        });
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "{header}")?;
        for v in self.values.iter().chain(self.imag.iter().flatten()) {
            f.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| Error::InvalidConfig("missing binary header".into()))?;
        let header: serde_json::Value = serde_json::from_slice(&bytes[..nl])?;
        let q_axis: Axis = serde_json::from_value(header["q_axis"].clone())?;
        let p_axis: Axis = serde_json::from_value(header["p_axis"].clone())?;
        let complex = header["complex"].as_bool().unwrap_or(false);
        let n = q_axis.count * p_axis.count;
        let body = &bytes[nl + 1..];
        let want = n * 8 * if complex { 2 } else { 1 };
        if body.len() != want {
            return Err(Error::InvalidConfig(format!("binary body has {} bytes, expected {want}", body.len())));
        }
        let vals: Vec<f64> = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect();
        let (re, im) = vals.split_at(n);
        Ok(Self { q_axis, p_axis, values: re.to_vec(), imag: complex.then(|| im.to_vec()) })
    }
}

/// Highest momentum representable on a position grid of spacing `h`.
pub fn nyquist_momentum(h: f64, hbar: f64) -> f64 {
    PI * hbar / (2.0 * h)
}

/// Discrete Wigner transform of a grid kernel. `p_max`, when given, is the
/// momentum range the caller needs resolved.
pub fn wigner_transform(rho: &GridDensity, p_max: Option<f64>) -> Result<WignerGrid> {
    let n = rho.axis.count;
    let h = rho.axis.step;
    let hbar = rho.hbar;
    let nyq = nyquist_momentum(h, hbar);
    if let Some(pm) = p_max {
        if pm > nyq {
            return Err(Error::GridTooCoarse(format!("requested |p| up to {pm:.4e} but grid resolves only {nyq:.4e}")));
        }
    }
    let q_axis = Axis::new(rho.axis.min, 0.5 * h, 2 * n - 1);
    let p_step = PI * hbar / (n as f64 * h);
    let p_axis = Axis::new(-(n as f64 / 2.0).floor() * p_step, p_step, n);
    let l0 = (n / 2) as i64;
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let rows: Vec<Vec<C64>> = (0..2 * n - 1)
        .into_par_iter()
        .map(|c| {
            let d0 = (c % 2) as i64;
            let mut buf = vec![C64::new(0.0, 0.0); n];
            let reach = c.min(2 * n - 2 - c) as i64;
            let mut d = -reach;
            while d <= reach {
                let i = ((c as i64 + d) / 2) as usize;
                let j = ((c as i64 - d) / 2) as usize;
                let k = ((d - d0) / 2).rem_euclid(n as i64) as usize;
                buf[k] = rho.mat[(i, j)];
                d += 2;
            }
            fft.process(&mut buf);
            (0..n)
                .map(|ip| {
                    let l = ip as i64 - l0;
                    let idx = l.rem_euclid(n as i64) as usize;
                    let phase = C64::from_polar(1.0, -PI * (l * d0) as f64 / n as f64);
                    buf[idx] * phase * (h / (PI * hbar))
                })
                .collect()
        })
        .collect();
    let values = rows.iter().flatten().map(|c| c.re).collect();
    let imag_max = rows.iter().flatten().map(|c| c.im.abs()).fold(0.0, f64::max);
    let real_max = rows.iter().flatten().map(|c| c.re.abs()).fold(0.0, f64::max);
    let imag = (imag_max > 1e-12 * real_max.max(1e-300)).then(|| rows.iter().flatten().map(|c| c.im).collect());
    Ok(WignerGrid { q_axis, p_axis, values, imag })
}

/// Inverse of [`wigner_transform`]. Fails with `GridTooCoarse` when the
/// input carries weight that no position-grid kernel can produce (aliasing).
pub fn inverse_wigner(w: &WignerGrid, hbar: f64) -> Result<GridDensity> {
    let n = w.p_axis.count;
    if w.q_axis.count != 2 * n - 1 {
        return Err(Error::GridTooCoarse(format!("q axis has {} points; a transform grid needs {}", w.q_axis.count, 2 * n - 1)));
    }
    let h = 2.0 * w.q_axis.step;
    let l0 = (n / 2) as i64;
    let mut planner = FftPlanner::<f64>::new();
    let ifft = planner.plan_fft_inverse(n);
    let mut mat = DMatrix::<C64>::zeros(n, n);
    let mut alias = 0.0f64;
    let mut scale = 0.0f64;
    for c in 0..2 * n - 1 {
        let d0 = (c % 2) as i64;
        let mut buf = vec![C64::new(0.0, 0.0); n];
        for ip in 0..n {
            let l = ip as i64 - l0;
            let idx = l.rem_euclid(n as i64) as usize;
            let k = c * n + ip;
            let val = C64::new(w.values[k], w.imag.as_ref().map_or(0.0, |im| im[k]));
            buf[idx] = val * C64::from_polar(1.0, PI * (l * d0) as f64 / n as f64);
        }
        ifft.process(&mut buf);
        let reach = c.min(2 * n - 2 - c) as i64;
        let mut used = vec![false; n];
        let mut d = -reach;
        while d <= reach {
            let k = ((d - d0) / 2).rem_euclid(n as i64) as usize;
            used[k] = true;
            let i = ((c as i64 + d) / 2) as usize;
            let j = ((c as i64 - d) / 2) as usize;
            mat[(i, j)] = buf[k] * (PI * hbar / (h * n as f64));
            scale = scale.max(mat[(i, j)].norm());
            d += 2;
        }
        for (k, u) in used.iter().enumerate() {
            if !u {
                alias = alias.max(buf[k].norm() * PI * hbar / (h * n as f64));
            }
        }
    }
    if alias > 1e-8 * scale.max(1e-300) {
        return Err(Error::GridTooCoarse(format!(
            "Wigner data aliases outside the position grid (relative {:.2e})",
            alias / scale.max(1e-300)
        )));
    }
    let axis = Axis::new(w.q_axis.min, h, n);
    Ok(GridDensity { axis, hbar, mat })
}

/// Random mixed state of the given rank on `axis`: Gaussian-enveloped
/// wavefunctions with uniformly random complex amplitudes and random weights.
pub fn random_density(axis: Axis, hbar: f64, rank: usize, seed: u64) -> GridDensity {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centre = axis.at(axis.count / 2);
    let width = 0.2 * axis.step * axis.count as f64;
    let mut weights: Vec<f64> = (0..rank).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let terms: Vec<(f64, Vec<C64>)> = weights
        .into_iter()
        .map(|w| {
            let mut psi: Vec<C64> = axis
                .points()
                .map(|x| {
                    let env = (-0.5 * ((x - centre) / width).powi(2)).exp();
                    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * env
                })
                .collect();
            let norm = (psi.iter().map(|c| c.norm_sqr()).sum::<f64>() * axis.step).sqrt();
            psi.iter_mut().for_each(|c| *c /= norm);
            (w, psi)
        })
        .collect();
    GridDensity::from_wavefunctions(axis, hbar, &terms)
}

/// `Tr(AB)` against `2πℏ ∫∫ W_A W_B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairingReport {
    pub trace_product: C64,
    pub pairing: C64,
    pub error: f64,
}

pub fn pairing_identity_check(a: &GridDensity, b: &GridDensity) -> Result<PairingReport> {
    let wa = wigner_transform(a, None)?;
    let wb = wigner_transform(b, None)?;
    let trace_product = a.trace_product(b);
    let pairing = wa.pairing(&wb, a.hbar);
    Ok(PairingReport { trace_product, pairing, error: (trace_product - pairing).norm() })
}

/// Result of checking `(x̂ρ + ρx̂)/2 ↔ qW` and `(p̂ρ + ρp̂)/2 ↔ pW`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnticommutatorReport {
    /// Max deviation relative to `max |qW|`.
    pub x_error: f64,
    /// Max deviation relative to `max |pW|`, over the momentum window the
    /// spectral derivative resolves.
    pub p_error: f64,
    /// Relative Frobenius norm of the commutator of the two maps.
    pub commute_error: f64,
}

pub fn anticommutator_correspondence_check(rho: &GridDensity) -> Result<AnticommutatorReport> {
    let w = wigner_transform(rho, None)?;
    let wx = wigner_transform(&rho.anticommute_x(), None)?;
    let pmat = rho.momentum_matrix();
    let wp = wigner_transform(&rho.anticommute_p(&pmat), None)?;
    let np = w.p_axis.count;
    let (mut ex, mut sx, mut ep, mut sp) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for iq in 0..w.q_axis.count {
        let q = w.q_axis.at(iq);
        for ip in 0..np {
            let p = w.p_axis.at(ip);
            let k = iq * np + ip;
            let target_x = q * w.values[k];
            let target_p = p * w.values[k];
            ex = ex.max((wx.values[k] - target_x).abs());
            sx = sx.max(target_x.abs());
            ep = ep.max((wp.values[k] - target_p).abs());
            sp = sp.max(target_p.abs());
        }
    }
    let xp = rho.anticommute_p(&pmat).anticommute_x();
    let px = rho.anticommute_x().anticommute_p(&pmat);
    let diff = (&xp.mat - &px.mat).norm();
    let base = xp.mat.norm().max(1e-300);
    Ok(AnticommutatorReport { x_error: ex / sx.max(1e-300), p_error: ep / sp.max(1e-300), commute_error: diff / base })
}
