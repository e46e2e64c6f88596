//! Scenario documents: one JSON object describing an experiment.
//!
//! Every object rejects unknown keys. A scenario may carry the parameter
//! section of its own experiment only; sections belonging to other
//! experiments are rejected as well.

use std::fmt;
use std::path::{Path, PathBuf};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::audits::{IntervalSpec, Thresholds};
use crate::config::PhysConfig;
use crate::dynamics::BathParams;
use crate::error::{Error, Result};
use crate::experiments;
use crate::lattice_states::LatticeState;
use crate::report::{Format, Report};
use crate::wigner::GaussianState;

/// The experiments a scenario can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    States,
    Projector,
    Evolve,
    Closeness,
    Probabilities,
    Audit,
    Regime,
    Scaling,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::States,
        Experiment::Projector,
        Experiment::Evolve,
        Experiment::Closeness,
        Experiment::Probabilities,
        Experiment::Audit,
        Experiment::Regime,
        Experiment::Scaling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::States => "states",
            Experiment::Projector => "projector",
            Experiment::Evolve => "evolve",
            Experiment::Closeness => "closeness",
            Experiment::Probabilities => "probabilities",
            Experiment::Audit => "audit",
            Experiment::Regime => "regime",
            Experiment::Scaling => "scaling",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which member of the cell hierarchy a basis test state is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    /// Window state `ψ_{nm}`; `m` is the window index.
    Window,
    /// Level state `ψ^{(K)}_{nm}`; needs `k`.
    Level,
    /// Remainder state `χ_{nM}`; `m` is the macro-cell index.
    Remainder,
}

/// Test state. Gaussian momenta and spreads use the physical units of
/// `physics`; `broad` states are sized in cells instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum StateSpec {
    Gaussian {
        q0: f64,
        p0: f64,
        dx: f64,
        dp: f64,
        #[serde(default)]
        sigma: f64,
    },
    /// Gaussian with `Δx = spread_cells · a` and
    /// `Δp = spread_macros · 2^N · 2πℏ/a`, centred on
    /// `(center_cells · a, center_macros · 2^N · 2πℏ/a)`.
    Broad {
        spread_cells: f64,
        spread_macros: f64,
        #[serde(default)]
        center_cells: f64,
        #[serde(default)]
        center_macros: f64,
    },
    /// Thermal oscillator state.
    Thermal {
        mass: f64,
        omega: f64,
        kt: f64,
        #[serde(default)]
        q0: f64,
        #[serde(default)]
        p0: f64,
    },
    /// A single state of the cell hierarchy.
    Basis {
        basis: BasisKind,
        n: i64,
        m: i64,
        #[serde(default)]
        k: Option<u32>,
    },
}

/// A test state resolved against a configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum ResolvedState {
    Gaussian(GaussianState),
    Basis(LatticeState),
}

impl StateSpec {
    pub fn resolve(&self, cfg: &PhysConfig) -> Result<ResolvedState> {
        match *self {
            StateSpec::Gaussian { q0, p0, dx, dp, sigma } => {
                Ok(ResolvedState::Gaussian(GaussianState::new((q0, p0), (dx, dp), sigma, cfg.hbar)?))
            }
            StateSpec::Broad { spread_cells, spread_macros, center_cells, center_macros } => {
                let w = cfg.macro_width();
                Ok(ResolvedState::Gaussian(GaussianState::new(
                    (center_cells * cfg.a, center_macros * w),
                    (spread_cells * cfg.a, spread_macros * w),
                    0.0,
                    cfg.hbar,
                )?))
            }
            StateSpec::Thermal { mass, omega, kt, q0, p0 } => {
                Ok(ResolvedState::Gaussian(GaussianState::thermal_oscillator(mass, omega, kt, (q0, p0), cfg.hbar)?))
            }
            StateSpec::Basis { basis, n, m, k } => {
                let s = match (basis, k) {
                    (BasisKind::Window, None) => LatticeState::window(cfg, n, m)?,
                    (BasisKind::Level, Some(k)) => LatticeState::level(cfg, k, n, m)?,
                    (BasisKind::Remainder, None) => LatticeState::remainder(cfg, n, m)?,
                    (BasisKind::Level, None) => {
                        return Err(Error::InvalidConfig("a level basis state needs k".into()));
                    }
                    (_, Some(_)) => {
                        return Err(Error::InvalidConfig("k only applies to level basis states".into()));
                    }
                };
                Ok(ResolvedState::Basis(s))
            }
        }
    }

    /// The Gaussian this spec describes, or a validation error naming the
    /// experiment that needs one.
    pub fn gaussian(&self, cfg: &PhysConfig, experiment: Experiment) -> Result<GaussianState> {
        match self.resolve(cfg)? {
            ResolvedState::Gaussian(g) => Ok(g),
            ResolvedState::Basis(_) => Err(Error::InvalidConfig(format!("experiment {experiment} needs a Gaussian state"))),
        }
    }
}

/// Output location and format; command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub format: Option<Format>,
}

fn one_in_a_million() -> f64 {
    1e-6
}

fn exact() -> f64 {
    1e-12
}

fn one_percent() -> f64 {
    0.01
}

fn profile_points() -> usize {
    201
}

/// Parameters of the `states` experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct StatesParams {
    /// Levels whose fiducial states are measured; defaults to `1..=N`.
    #[serde(default)]
    pub levels: Option<Vec<u32>>,
    /// Macro cell `(n, M)` used for the orthonormality and completeness check.
    #[serde(default)]
    pub cell: (i64, i64),
    /// Relative tolerance for the fiducial moments.
    #[serde(default = "one_in_a_million")]
    pub tolerance: f64,
    /// Absolute tolerance for the algebraic identities.
    #[serde(default = "exact")]
    pub algebra_tolerance: f64,
    /// Samples per fiducial profile.
    #[serde(default = "profile_points")]
    pub profile_points: usize,
}

impl Default for StatesParams {
    fn default() -> Self {
        Self { levels: None, cell: (0, 0), tolerance: one_in_a_million(), algebra_tolerance: exact(), profile_points: profile_points() }
    }
}

fn heatmap_points() -> usize {
    64
}

/// Parameters of the `projector` experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ProjectorParams {
    /// Macro cell `(n, M)`.
    #[serde(default)]
    pub cell: (i64, i64),
    /// Absolute tolerance for the algebraic identities.
    #[serde(default = "exact")]
    pub algebra_tolerance: f64,
    /// Relative tolerance for moments stated as equalities.
    #[serde(default = "one_in_a_million")]
    pub moment_tolerance: f64,
    /// Relative tolerance for the leading large-`N` momentum variance.
    #[serde(default = "fifteen_percent")]
    pub leading_tolerance: f64,
    /// Points per axis of the projector's Wigner function heatmap.
    #[serde(default = "heatmap_points")]
    pub heatmap_points: usize,
}

impl Default for ProjectorParams {
    fn default() -> Self {
        Self {
            cell: (0, 0),
            algebra_tolerance: exact(),
            moment_tolerance: one_in_a_million(),
            leading_tolerance: fifteen_percent(),
            heatmap_points: heatmap_points(),
        }
    }
}

fn snapshots() -> usize {
    8
}

fn steps_per_snapshot() -> usize {
    16
}

fn pairing_rank() -> usize {
    3
}

fn fit_from() -> f64 {
    0.5
}

/// Phase-space grid of the Wigner evolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub q_count: usize,
    pub p_count: usize,
    /// Half widths of the grid about the initial centre.
    pub q_half_width: f64,
    pub p_half_width: f64,
}

/// Parameters of the `evolve` experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct EvolveParams {
    pub t_final: f64,
    #[serde(default = "snapshots")]
    pub snapshots: usize,
    #[serde(default = "steps_per_snapshot")]
    pub steps_per_snapshot: usize,
    /// Grid; sized from the predicted final spreads when absent.
    #[serde(default)]
    pub grid: Option<GridSpec>,
    /// Snapshots with `t ≥ fit_from · t_final` enter the growth fit.
    #[serde(default = "fit_from")]
    pub fit_from: f64,
    /// Rank of the random operators in the pairing check.
    #[serde(default = "pairing_rank")]
    pub pairing_rank: usize,
}

fn fifteen_percent() -> f64 {
    0.15
}

fn ten_percent() -> f64 {
    0.1
}

fn twenty_percent() -> f64 {
    0.2
}

/// Broadness ladder for the pseudo-classical map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct LadderSpec {
    /// Factors applied to both spreads of the scenario state.
    pub broadness: Vec<f64>,
}

/// Parameters of the `closeness` experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ClosenessParams {
    #[serde(default = "ten_percent")]
    pub x_tolerance: f64,
    #[serde(default = "fifteen_percent")]
    pub p_tolerance: f64,
    #[serde(default = "twenty_percent")]
    pub c_tolerance: f64,
    #[serde(default)]
    pub pseudoclassical: Option<LadderSpec>,
}

impl Default for ClosenessParams {
    fn default() -> Self {
        Self { x_tolerance: ten_percent(), p_tolerance: fifteen_percent(), c_tolerance: twenty_percent(), pseudoclassical: None }
    }
}

/// Parameters of the `probabilities` experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ProbabilitiesParams {
    /// Intervals to compare; defaults to one standard deviation either side
    /// of the mean on each axis.
    #[serde(default)]
    pub intervals: Option<Vec<IntervalSpec>>,
    /// Cells `(n, M)` evaluated both in the window basis and through the
    /// Wigner pairing.
    #[serde(default)]
    pub dual_cells: Vec<(i64, i64)>,
    #[serde(default = "one_percent")]
    pub tolerance: f64,
    #[serde(default = "one_in_a_million")]
    pub dual_tolerance: f64,
    #[serde(default)]
    pub thresholds: Thresholds,
}

impl Default for ProbabilitiesParams {
    fn default() -> Self {
        Self {
            intervals: None,
            dual_cells: Vec::new(),
            tolerance: one_percent(),
            dual_tolerance: one_in_a_million(),
            thresholds: Thresholds::default(),
        }
    }
}

/// Probe for the resolution-of-identity check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProbeSpec {
    Gaussian {
        q0: f64,
        p0: f64,
        dx: f64,
        dp: f64,
        #[serde(default)]
        sigma: f64,
    },
    Level {
        k: u32,
        n: i64,
        m: i64,
    },
}

fn half_percent() -> f64 {
    0.005
}

/// Parameters of the `audit` experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct AuditParams {
    /// Absolute tolerance of the completeness sum.
    #[serde(default = "half_percent")]
    pub tolerance: f64,
    /// Absolute tolerance of each level share.
    #[serde(default = "one_percent")]
    pub level_tolerance: f64,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub probe: Option<ProbeSpec>,
    /// Relative tolerance of the resolution check.
    #[serde(default = "one_percent")]
    pub resolution_tolerance: f64,
    /// Elapsed time for the decoherence bound; needs `bath`.
    #[serde(default)]
    pub time: Option<f64>,
    /// Oscillator frequency for the thermal bound; needs `bath`.
    #[serde(default)]
    pub omega: Option<f64>,
}

impl Default for AuditParams {
    fn default() -> Self {
        Self {
            tolerance: half_percent(),
            level_tolerance: one_percent(),
            thresholds: Thresholds::default(),
            probe: None,
            resolution_tolerance: one_percent(),
            time: None,
            omega: None,
        }
    }
}

fn order_factor() -> f64 {
    2.0
}

fn hbar_si() -> f64 {
    1.054_571_817e-34
}

fn regime_prediction() -> f64 {
    1e12
}

/// Parameters of the `regime` experiment, in SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RegimeParams {
    pub dx: f64,
    pub dv: f64,
    pub mass: f64,
    /// Reduced Planck constant in J·s.
    #[serde(default = "hbar_si")]
    pub hbar: f64,
    /// Order of magnitude the ratio is compared with.
    #[serde(default = "regime_prediction")]
    pub predicted: f64,
    /// Accepted factor either side of the prediction.
    #[serde(default = "order_factor")]
    pub factor: f64,
}

fn scaling_levels() -> Vec<u32> {
    (2..=8).collect()
}

fn three() -> f64 {
    3.0
}

fn unit() -> f64 {
    1.0
}

fn six() -> f64 {
    6.0
}

fn slope_tolerance() -> f64 {
    0.05
}

fn c_reference_levels() -> u32 {
    20
}

fn c_reference() -> f64 {
    1e3
}

/// Parameters of the `scaling` experiment. The truncation of `physics` is
/// replaced, for every `N`, by `span` standard deviations of a broad state
/// with the given spreads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ScalingParams {
    #[serde(default = "scaling_levels")]
    pub levels: Vec<u32>,
    #[serde(default = "three")]
    pub spread_cells: f64,
    #[serde(default = "unit")]
    pub spread_macros: f64,
    #[serde(default = "six")]
    pub span: f64,
    #[serde(default = "slope_tolerance")]
    pub slope_tolerance: f64,
    #[serde(default = "ten_percent")]
    pub x_tolerance: f64,
    #[serde(default = "fifteen_percent")]
    pub p_tolerance: f64,
    #[serde(default = "twenty_percent")]
    pub c_tolerance: f64,
    /// `N` at which the closed-form constant is compared with `c_reference`.
    #[serde(default = "c_reference_levels")]
    pub c_reference_levels: u32,
    #[serde(default = "c_reference")]
    pub c_reference: f64,
}

impl Default for ScalingParams {
    fn default() -> Self {
        Self {
            levels: scaling_levels(),
            spread_cells: three(),
            spread_macros: unit(),
            span: six(),
            slope_tolerance: slope_tolerance(),
            x_tolerance: ten_percent(),
            p_tolerance: fifteen_percent(),
            c_tolerance: twenty_percent(),
            c_reference_levels: c_reference_levels(),
            c_reference: c_reference(),
        }
    }
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Experiment to run; the command-line verb must agree when both are set.
    #[serde(default)]
    pub experiment: Option<Experiment>,
    pub physics: PhysConfig,
    #[serde(default)]
    pub state: Option<StateSpec>,
    #[serde(default)]
    pub bath: Option<BathParams>,
    /// Seed for randomized test operators.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub states: Option<StatesParams>,
    #[serde(default)]
    pub projector: Option<ProjectorParams>,
    #[serde(default)]
    pub evolve: Option<EvolveParams>,
    #[serde(default)]
    pub closeness: Option<ClosenessParams>,
    #[serde(default)]
    pub probabilities: Option<ProbabilitiesParams>,
    #[serde(default)]
    pub audit: Option<AuditParams>,
    #[serde(default)]
    pub regime: Option<RegimeParams>,
    #[serde(default)]
    pub scaling: Option<ScalingParams>,
}

/// JSON schema of [`Scenario`], pretty printed with a trailing newline.
pub fn schema_json() -> String {
    let schema = schemars::schema_for!(Scenario);
    let mut text = serde_json::to_string_pretty(&schema).expect("schema serializes");
    text.push('\n');
    text
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// Experiment selected by `verb` and the document together.
    pub fn resolve_experiment(&self, verb: Option<Experiment>) -> Result<Experiment> {
        match (verb, self.experiment) {
            (Some(v), Some(e)) if v != e => Err(Error::InvalidConfig(format!("command asks for {v} but the scenario describes {e}"))),
            (Some(v), _) => Ok(v),
            (None, Some(e)) => Ok(e),
            (None, None) => Err(Error::InvalidConfig("no experiment selected".into())),
        }
    }

    fn sections(&self) -> [(Experiment, bool); 8] {
        [
            (Experiment::States, self.states.is_some()),
            (Experiment::Projector, self.projector.is_some()),
            (Experiment::Evolve, self.evolve.is_some()),
            (Experiment::Closeness, self.closeness.is_some()),
            (Experiment::Probabilities, self.probabilities.is_some()),
            (Experiment::Audit, self.audit.is_some()),
            (Experiment::Regime, self.regime.is_some()),
            (Experiment::Scaling, self.scaling.is_some()),
        ]
    }

    /// Checks the fields `experiment` needs and the preconditions of the
    /// modules it calls.
    pub fn validate(&self, experiment: Experiment) -> Result<()> {
        self.physics.validate()?;
        for (e, present) in self.sections() {
            if present && e != experiment {
                return Err(Error::InvalidConfig(format!("section {e:?} does not belong to experiment {experiment}", e = e.name())));
            }
        }
        if let Some(b) = &self.bath {
            b.validate()?;
        }
        let needs_state = matches!(experiment, Experiment::Evolve | Experiment::Closeness | Experiment::Probabilities | Experiment::Audit);
        let needs_gaussian = matches!(experiment, Experiment::Evolve | Experiment::Closeness);
        match (&self.state, needs_state) {
            (None, true) => {
                return Err(Error::InvalidConfig(format!("experiment {experiment} needs a state")));
            }
            (Some(_), false) => {
                return Err(Error::InvalidConfig(format!("experiment {experiment} takes no state")));
            }
            (Some(s), true) if needs_gaussian => {
                s.gaussian(&self.physics, experiment)?;
            }
            (Some(s), true) => {
                s.resolve(&self.physics)?;
            }
            (None, false) => {}
        }
        match experiment {
            Experiment::Evolve => {
                if self.bath.is_none() {
                    return Err(Error::InvalidConfig("experiment evolve needs a bath".into()));
                }
                let p = self.evolve.as_ref().ok_or_else(|| Error::InvalidConfig("experiment evolve needs an evolve section".into()))?;
                if !(p.t_final > 0.0 && p.snapshots >= 3 && p.steps_per_snapshot >= 1) {
                    return Err(Error::InvalidConfig("evolve needs t_final > 0, at least 3 snapshots and one step per snapshot".into()));
                }
                if !(p.fit_from > 0.0 && p.fit_from < 1.0) || p.pairing_rank == 0 {
                    return Err(Error::InvalidConfig("fit_from must lie in (0, 1) and pairing_rank be positive".into()));
                }
            }
            Experiment::Regime => {
                let r = self.regime.as_ref().ok_or_else(|| Error::InvalidConfig("experiment regime needs a regime section".into()))?;
                if !(r.predicted > 0.0 && r.factor > 1.0) {
                    return Err(Error::InvalidConfig("regime needs a positive prediction and a factor above 1".into()));
                }
            }
            Experiment::Scaling => {
                let s = self.scaling.clone().unwrap_or_default();
                if s.levels.len() < 2 || s.levels.contains(&0) {
                    return Err(Error::InvalidConfig("scaling needs at least two positive levels".into()));
                }
                if !(s.spread_cells > 0.0 && s.spread_macros > 0.0 && s.span > 0.0) {
                    return Err(Error::InvalidConfig("scaling spreads and span must be positive".into()));
                }
            }
            Experiment::Closeness => {
                if let Some(l) = self.closeness.as_ref().and_then(|c| c.pseudoclassical.as_ref()) {
                    if l.broadness.len() < 2 || l.broadness.iter().any(|&b| b <= 0.0) {
                        return Err(Error::InvalidConfig("ladder needs at least two positive broadness factors".into()));
                    }
                }
            }
            Experiment::Probabilities => {
                if let Some(list) = self.probabilities.as_ref().and_then(|p| p.intervals.as_ref()) {
                    for iv in list {
                        iv.validate(&self.physics)?;
                    }
                }
            }
            Experiment::Audit => {
                let p = self.audit.clone().unwrap_or_default();
                if (p.time.is_some() || p.omega.is_some()) && self.bath.is_none() {
                    return Err(Error::InvalidConfig("time and thermal bounds need a bath".into()));
                }
            }
            Experiment::States | Experiment::Projector => {}
        }
        Ok(())
    }

    /// Validates and runs `experiment`. `seed` overrides the document's seed.
    pub fn run(&self, experiment: Experiment, seed: Option<u64>) -> Result<Report> {
        self.validate(experiment)?;
        let seed = seed.or(self.seed).unwrap_or(0);
        let cfg = &self.physics;
        match experiment {
            Experiment::States => experiments::states(cfg, &self.states.clone().unwrap_or_default()),
            Experiment::Projector => experiments::projector(cfg, &self.projector.clone().unwrap_or_default()),
            Experiment::Evolve => {
                let g = self.state.as_ref().expect("validated").gaussian(cfg, experiment)?;
                let bath = self.bath.expect("validated");
                let thermal = match self.state {
                    Some(StateSpec::Thermal { omega, kt, .. }) => Some(kt / (cfg.hbar * omega)),
                    _ => None,
                };
                experiments::evolve(&g, &bath, self.evolve.as_ref().expect("validated"), thermal, seed)
            }
            Experiment::Closeness => {
                let g = self.state.as_ref().expect("validated").gaussian(cfg, experiment)?;
                experiments::closeness(cfg, &g, &self.closeness.clone().unwrap_or_default())
            }
            Experiment::Probabilities => {
                let state = self.state.as_ref().expect("validated").resolve(cfg)?;
                experiments::probabilities(cfg, &state, &self.probabilities.clone().unwrap_or_default())
            }
            Experiment::Audit => {
                let state = self.state.as_ref().expect("validated").resolve(cfg)?;
                experiments::audit(cfg, &state, self.bath.as_ref(), &self.audit.clone().unwrap_or_default())
            }
            Experiment::Regime => experiments::regime(self.regime.as_ref().expect("validated")),
            Experiment::Scaling => experiments::scaling(cfg, &self.scaling.clone().unwrap_or_default()),
        }
    }
}
