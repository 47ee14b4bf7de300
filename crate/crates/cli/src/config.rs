//! TOML scenario configuration. Every table rejects unknown keys.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use morphic_core::{Axis, DoubleSlitParams, Grid, PhysicalConstants, QMode};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Fisher,
    Qpotential,
    EnergyConservation,
    Trajectories,
    DoubleSlit,
    Relativistic,
    Validate,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Fisher => "fisher",
            Self::Qpotential => "qpotential",
            Self::EnergyConservation => "energy-conservation",
            Self::Trajectories => "trajectories",
            Self::DoubleSlit => "double-slit",
            Self::Relativistic => "relativistic",
            Self::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub constants: PhysicalConstants,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    /// Tolerance overrides keyed by check name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fisher: Option<FisherConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qpotential: Option<QPotentialConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<EnergyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<TrajectoryConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub double_slit: Option<DoubleSlitConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relativistic: Option<RelativisticConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validate: Option<ValidateConfig>,
}

fn default_seed() -> u64 {
    42
}

/// Uniform grid over `[lower, upper]` per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub spacing: Vec<f64>,
}

impl GridConfig {
    pub fn line(lower: f64, upper: f64, spacing: f64) -> Self {
        Self { lower: vec![lower], upper: vec![upper], spacing: vec![spacing] }
    }

    pub fn build(&self) -> Result<Grid, CliError> {
        let n = self.lower.len();
        if n == 0 || n > 2 || self.upper.len() != n || self.spacing.len() != n {
            return Err(CliError::Config(
                "grid.lower, grid.upper and grid.spacing must all have 1 or 2 entries".into(),
            ));
        }
        let axes = (0..n)
            .map(|a| Axis::from_range(self.lower[a], self.upper[a], self.spacing[a]))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Config(format!("grid: {e}")))?;
        Grid::new(axes).map_err(|e| CliError::Config(format!("grid: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FisherConfig {
    /// gaussian | exponential | uniform | tabulated
    pub distribution: String,
    pub theta: Vec<f64>,
    /// Observer positions `x_j` of the family `W_j(θ) = 1/ρ(x_j; θ)`.
    pub observers: Vec<f64>,
    pub n_samples: usize,
    pub n_trials: usize,
    /// One-parameter microstate counts, used when `distribution = "tabulated"`.
    pub tabulated: Vec<TabulatedMember>,
}

/// `W(θ)` at increasing nodes, interpolated log-linearly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabulatedMember {
    pub label: String,
    pub nodes: Vec<f64>,
    pub counts: Vec<f64>,
}

impl Default for FisherConfig {
    fn default() -> Self {
        Self {
            distribution: "gaussian".into(),
            theta: vec![0.0, 1.0],
            observers: vec![-1.5, -0.5, 0.0, 0.5, 1.5],
            n_samples: 10_000,
            n_trials: 1_000,
            tabulated: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WSource {
    Gaussian,
    Exponential,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QPotentialConfig {
    pub w: WSource,
    /// Width of `W = exp(−|x|²/2σ²)`.
    pub sigma: f64,
    /// Rate of `W = exp(a·x₀)`.
    pub a: f64,
    /// Field CSV (with JSON sidecar) when `w = "file"`.
    pub file: Option<PathBuf>,
    pub mode: QMode,
    pub gauge_factors: Vec<f64>,
}

impl Default for QPotentialConfig {
    fn default() -> Self {
        Self {
            w: WSource::Gaussian,
            sigma: 1.0,
            a: 1.0,
            file: None,
            mode: QMode::Microstate,
            gauge_factors: vec![1e-3, 0.37, 3.7, 1e3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnergyState {
    HarmonicGround,
    PlaneWave,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyConfig {
    pub state: EnergyState,
    pub omega: f64,
    pub momentum: f64,
    /// Added to the state's energy in the phase `S = −(E + offset)t`.
    pub energy_offset: f64,
    pub dt: f64,
    pub mode: QMode,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            state: EnergyState::HarmonicGround,
            omega: 1.0,
            momentum: 1.0,
            energy_offset: 0.0,
            dt: 1e-2,
            mode: QMode::Standard,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GuidanceKind {
    Analytic,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectoryConfig {
    pub x0: f64,
    pub sigma: f64,
    pub k0: f64,
    pub n_particles: usize,
    pub dt: f64,
    pub t_final: f64,
    pub guidance: GuidanceKind,
    pub bins: usize,
    pub export_paths: usize,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            x0: 0.0,
            sigma: 0.5,
            k0: 0.0,
            n_particles: 10_000,
            dt: 1e-3,
            t_final: 1.0,
            guidance: GuidanceKind::Analytic,
            bins: 40,
            export_paths: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DoubleSlitConfig {
    #[serde(flatten)]
    pub params: DoubleSlitParamsConfig,
    pub export_paths: usize,
}

impl Default for DoubleSlitConfig {
    fn default() -> Self {
        Self { params: DoubleSlitParamsConfig::default(), export_paths: 100 }
    }
}

/// Mirrors [`DoubleSlitParams`] without the seed, which comes from the top level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DoubleSlitParamsConfig {
    pub separation: f64,
    pub slit_width: f64,
    pub momentum: f64,
    pub screen_distance: f64,
    pub n_particles: usize,
    pub half_width: f64,
    pub spacing: f64,
    pub time_steps: usize,
    pub bins: usize,
    pub q_slices: usize,
}

impl Default for DoubleSlitParamsConfig {
    fn default() -> Self {
        let d = DoubleSlitParams::default();
        Self {
            separation: d.separation,
            slit_width: d.slit_width,
            momentum: d.momentum,
            screen_distance: d.screen_distance,
            n_particles: d.n_particles,
            half_width: d.half_width,
            spacing: d.spacing,
            time_steps: d.time_steps,
            bins: d.bins,
            q_slices: d.q_slices,
        }
    }
}

impl DoubleSlitParamsConfig {
    pub fn with_seed(&self, seed: u64) -> DoubleSlitParams {
        DoubleSlitParams {
            separation: self.separation,
            slit_width: self.slit_width,
            momentum: self.momentum,
            screen_distance: self.screen_distance,
            n_particles: self.n_particles,
            seed,
            half_width: self.half_width,
            spacing: self.spacing,
            time_steps: self.time_steps,
            bins: self.bins,
            q_slices: self.q_slices,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PsiShape {
    /// `|ψ| = exp(−x²/2σ²)`
    StaticGaussian,
    /// `|ψ| = exp(−t²/2σ²)`
    TemporalGaussian,
    /// `|ψ| = exp(−(t² + x²)/2σ²)`
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QSource {
    /// d'Alembertian form on `(t, x)`.
    Relativistic,
    /// Microstate form with `W = |ψ|²` on each time slice.
    Microstate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RelativisticConfig {
    pub psi: PsiShape,
    pub sigma: f64,
    pub q_source: QSource,
    /// Metric JSON file; flat metric of `dim` dimensions when absent.
    pub metric: Option<PathBuf>,
    pub dim: usize,
    /// Spatial momentum of `S = p₀x⁰ + p₁x¹`; `p₀` puts `S` on the classical mass shell.
    pub momentum: f64,
}

impl Default for RelativisticConfig {
    fn default() -> Self {
        Self {
            psi: PsiShape::StaticGaussian,
            sigma: 1.0,
            q_source: QSource::Relativistic,
            metric: None,
            dim: 2,
            momentum: 0.5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateConfig {
    pub filter: Vec<String>,
}

fn check_positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

fn check_count(name: &str, v: usize) -> Result<(), CliError> {
    if v == 0 {
        Err(CliError::Config(format!("{name} must be at least 1")))
    } else {
        Ok(())
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        // Relative input paths are resolved against the config file.
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(q) = cfg.qpotential.as_mut() {
            if let Some(f) = q.file.as_mut() {
                *f = base.join(&*f);
            }
        }
        if let Some(r) = cfg.relativistic.as_mut() {
            if let Some(m) = r.metric.as_mut() {
                *m = base.join(&*m);
            }
        }
        Ok(cfg)
    }

    pub fn minimal(scenario: ScenarioKind) -> Self {
        Self {
            scenario,
            seed: default_seed(),
            out_dir: None,
            constants: PhysicalConstants::default(),
            grid: None,
            tolerances: BTreeMap::new(),
            fisher: None,
            qpotential: None,
            energy: None,
            trajectories: None,
            double_slit: None,
            relativistic: None,
            validate: None,
        }
    }

    /// Grid from the config or the scenario default.
    pub fn grid(&self) -> Result<Grid, CliError> {
        self.grid.clone().unwrap_or_else(|| default_grid(self.scenario)).build()
    }

    /// Checks every documented range. Runs before anything is written.
    pub fn validate(&self) -> Result<(), CliError> {
        self.constants.validate().map_err(|e| CliError::Config(format!("constants: {e}")))?;
        self.grid()?;
        for (name, tol) in &self.tolerances {
            if !tol.is_finite() || *tol < 0.0 {
                return Err(CliError::Config(format!("tolerance {name} must be a finite non-negative number")));
            }
        }
        let sections = [
            ("fisher", self.fisher.is_some(), ScenarioKind::Fisher),
            ("qpotential", self.qpotential.is_some(), ScenarioKind::Qpotential),
            ("energy", self.energy.is_some(), ScenarioKind::EnergyConservation),
            ("trajectories", self.trajectories.is_some(), ScenarioKind::Trajectories),
            ("double_slit", self.double_slit.is_some(), ScenarioKind::DoubleSlit),
            ("relativistic", self.relativistic.is_some(), ScenarioKind::Relativistic),
            ("validate", self.validate.is_some(), ScenarioKind::Validate),
        ];
        for (section, present, kind) in sections {
            if present && kind != self.scenario {
                return Err(CliError::Config(format!(
                    "[{section}] does not apply to scenario {}",
                    self.scenario.name()
                )));
            }
        }
        match self.scenario {
            ScenarioKind::Fisher => {
                let f = self.fisher.clone().unwrap_or_default();
                if f.distribution == "tabulated" {
                    if f.tabulated.is_empty() || f.theta.len() != 1 {
                        return Err(CliError::Config(
                            "tabulated families need [[fisher.tabulated]] entries and a single theta".into(),
                        ));
                    }
                    let mut fam = morphic_core::MicrostateFamily::new(1);
                    for m in &f.tabulated {
                        fam = fam
                            .with_tabulated(m.label.clone(), m.nodes.clone(), m.counts.clone())
                            .map_err(|e| CliError::Config(format!("fisher.tabulated {}: {e}", m.label)))?;
                    }
                } else {
                    let dist = morphic_core::ParametricDistribution::from_name(&f.distribution)
                        .map_err(|e| CliError::Config(e.to_string()))?;
                    if dist == morphic_core::ParametricDistribution::PointMass {
                        return Err(CliError::Config("fisher scenario needs a distribution with a density".into()));
                    }
                    if !f.tabulated.is_empty() {
                        return Err(CliError::Config("fisher.tabulated needs distribution = \"tabulated\"".into()));
                    }
                    dist.validate(&f.theta).map_err(|e| CliError::Config(format!("fisher.theta: {e}")))?;
                    if f.observers.len() < dist.n_params() {
                        return Err(CliError::Config("fisher.observers needs at least one point per parameter".into()));
                    }
                    if f.observers.iter().any(|x| !(dist.density(*x, &f.theta) > 0.0)) {
                        return Err(CliError::Config("fisher.observers must lie where the density is positive".into()));
                    }
                }
                check_count("fisher.n_samples", f.n_samples)?;
                check_count("fisher.n_trials", f.n_trials)?;
                if f.n_trials < 2 {
                    return Err(CliError::Config("fisher.n_trials must be at least 2".into()));
                }
            }
            ScenarioKind::Qpotential => {
                let q = self.qpotential.clone().unwrap_or_default();
                check_positive("qpotential.sigma", q.sigma)?;
                if !q.a.is_finite() {
                    return Err(CliError::Config("qpotential.a must be finite".into()));
                }
                if q.w == WSource::File && q.file.is_none() {
                    return Err(CliError::Config("qpotential.file is required when w = \"file\"".into()));
                }
                if q.gauge_factors.is_empty() {
                    return Err(CliError::Config("qpotential.gauge_factors must not be empty".into()));
                }
                for c in &q.gauge_factors {
                    check_positive("qpotential.gauge_factors", *c)?;
                }
            }
            ScenarioKind::EnergyConservation => {
                let e = self.energy.clone().unwrap_or_default();
                check_positive("energy.omega", e.omega)?;
                check_positive("energy.dt", e.dt)?;
                if !e.momentum.is_finite() || !e.energy_offset.is_finite() {
                    return Err(CliError::Config("energy.momentum and energy.energy_offset must be finite".into()));
                }
                if self.grid()?.ndim() != 1 {
                    return Err(CliError::Config("energy-conservation uses a 1D grid".into()));
                }
            }
            ScenarioKind::Trajectories => {
                let t = self.trajectories.clone().unwrap_or_default();
                check_positive("trajectories.sigma", t.sigma)?;
                check_positive("trajectories.dt", t.dt)?;
                check_positive("trajectories.t_final", t.t_final)?;
                check_count("trajectories.n_particles", t.n_particles)?;
                check_count("trajectories.bins", t.bins)?;
                if !t.x0.is_finite() || !t.k0.is_finite() {
                    return Err(CliError::Config("trajectories.x0 and trajectories.k0 must be finite".into()));
                }
                if self.grid()?.ndim() != 1 {
                    return Err(CliError::Config("trajectories use a 1D grid".into()));
                }
            }
            ScenarioKind::DoubleSlit => {
                let d = self.double_slit.clone().unwrap_or_default();
                d.params.with_seed(self.seed).validate().map_err(|e| CliError::Config(format!("double_slit: {e}")))?;
            }
            ScenarioKind::Relativistic => {
                let r = self.relativistic.clone().unwrap_or_default();
                check_positive("relativistic.sigma", r.sigma)?;
                if r.dim != 2 && r.dim != 4 {
                    return Err(CliError::Config("relativistic.dim must be 2 or 4".into()));
                }
                if !r.momentum.is_finite() {
                    return Err(CliError::Config("relativistic.momentum must be finite".into()));
                }
                if self.grid()?.ndim() != 2 {
                    return Err(CliError::Config("relativistic uses a 2-axis (t, x) grid".into()));
                }
            }
            ScenarioKind::Validate => {
                let v = self.validate.clone().unwrap_or_default();
                for m in &v.filter {
                    if !crate::suite::MODULES.contains(&m.as_str()) {
                        return Err(CliError::Config(format!("unknown module filter `{m}`")));
                    }
                }
            }
        }
        Ok(())
    }
}

pub fn default_grid(kind: ScenarioKind) -> GridConfig {
    match kind {
        ScenarioKind::Qpotential => GridConfig::line(-5.0, 5.0, 0.01),
        ScenarioKind::EnergyConservation => GridConfig::line(-2.0, 2.0, 0.01),
        ScenarioKind::Trajectories => GridConfig::line(-10.0, 10.0, 0.01),
        ScenarioKind::Relativistic => GridConfig { lower: vec![-2.0, -3.0], upper: vec![2.0, 3.0], spacing: vec![0.02, 0.02] },
        _ => GridConfig::line(-5.0, 5.0, 0.05),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_config() {
        let cfg = ScenarioConfig::from_toml("scenario = \"qpotential\"\n").unwrap();
        assert_eq!(cfg.scenario, ScenarioKind::Qpotential);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.grid().unwrap().len(), 1001);
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(ScenarioConfig::from_toml("scenario = \"qpotential\"\nbogus = 1\n").is_err());
        assert!(ScenarioConfig::from_toml("scenario = \"qpotential\"\n[qpotential]\nsgima = 1.0\n").is_err());
        assert!(ScenarioConfig::from_toml("scenario = \"double-slit\"\n[double_slit]\nslits = 3\n").is_err());
        assert!(ScenarioConfig::from_toml("scenario = \"teleport\"\n").is_err());
    }

    #[test]
    fn rejects_out_of_range_values() {
        let neg = "scenario = \"qpotential\"\n[grid]\nlower = [-1.0]\nupper = [1.0]\nspacing = [-0.1]\n";
        assert!(matches!(ScenarioConfig::from_toml(neg), Err(CliError::Config(_))));
        let mass = "scenario = \"qpotential\"\n[constants]\nmass = 0.0\n";
        assert!(ScenarioConfig::from_toml(mass).is_err());
        let wrong_section = "scenario = \"fisher\"\n[qpotential]\nsigma = 1.0\n";
        assert!(ScenarioConfig::from_toml(wrong_section).is_err());
        let theta = "scenario = \"fisher\"\n[fisher]\ntheta = [0.0, -1.0]\n";
        assert!(ScenarioConfig::from_toml(theta).is_err());
        let filter = "scenario = \"validate\"\n[validate]\nfilter = [\"astrology\"]\n";
        assert!(ScenarioConfig::from_toml(filter).is_err());
    }

    #[test]
    fn double_slit_section_round_trips() {
        let cfg = ScenarioConfig::from_toml(
            "scenario = \"double-slit\"\nseed = 7\n[double_slit]\nn_particles = 100\nexport_paths = 3\n",
        )
        .unwrap();
        let d = cfg.double_slit.unwrap();
        assert_eq!(d.export_paths, 3);
        assert_eq!(d.params.with_seed(7).n_particles, 100);
    }
}
