//! TOML experiment configuration.

use std::path::PathBuf;

use illiquid_core::{IntensityProfile, JumpSpec, MarketModel, SimConfig, SizeLaw, SolverConfig, UtilitySpec};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root seed; subsystem seeds are derived from it.
    #[serde(default)]
    pub seed: u64,
    pub model: ModelBlock,
    pub intensity: IntensityBlock,
    pub utility: UtilityBlock,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub simulation: SimulationBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

/// A per-piece quantity: either one value for every piece or one per piece.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Pieces {
    Constant(f64),
    PerPiece(Vec<f64>),
}

impl Pieces {
    fn expand(&self, pieces: usize) -> Vec<f64> {
        match self {
            Pieces::Constant(v) => vec![*v; pieces],
            Pieces::PerPiece(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub horizon_years: f64,
    /// Breakpoints `0 = t₀ < … < t_n = T`; defaults to `[0, T]`.
    pub mesh_years: Option<Vec<f64>>,
    pub drift_per_year: Pieces,
    pub volatility_per_sqrt_year: Pieces,
    pub jumps: Option<JumpBlock>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeLawKind {
    Lognormal,
    Uniform,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpBlock {
    pub rate_per_year: Pieces,
    pub size_law: SizeLawKind,
    pub log_mean: Option<f64>,
    pub log_std: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub upper_moment_order: f64,
    pub lower_moment_order: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntensityKind {
    /// `λ(t) = scale · κ / (T − t)^β`.
    PowerBlowup,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntensityBlock {
    pub kind: IntensityKind,
    #[serde(default = "one")]
    pub kappa: f64,
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UtilityKind {
    Power,
    Log,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilityBlock {
    pub kind: UtilityKind,
    pub gamma: Option<f64>,
}

/// Simulation settings; the seed comes from the top level and the initial
/// wealth from `solver.initial_wealth`.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationBlock {
    pub n_paths: usize,
    pub horizon_cutoff_years: f64,
    pub max_arrivals: usize,
}

impl Default for SimulationBlock {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            n_paths: d.n_paths,
            horizon_cutoff_years: d.horizon_cutoff_years,
            max_arrivals: d.max_arrivals,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub directory: Option<PathBuf>,
}

/// A parsed config together with the hash of its source text.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub sha256: String,
}

impl LoadedConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let digest = Sha256::digest(text.as_bytes());
        let sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
        Ok(Self { config, sha256 })
    }

    pub fn read(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

/// Everything a subcommand needs, validated.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub model: MarketModel,
    pub profile: IntensityProfile,
    pub utility: UtilitySpec,
    pub solver: SolverConfig,
    pub simulation: SimConfig,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn build(&self) -> Result<Experiment, CliError> {
        let utility = self.build_utility()?;
        let model = self.build_model(&utility)?;
        let i = &self.intensity;
        let base = match i.kind {
            IntensityKind::PowerBlowup => IntensityProfile::power_blowup(self.model.horizon_years, i.kappa, i.beta)?,
        };
        let profile = if i.scale == 1.0 { base } else { base.scaled(i.scale)? };
        self.solver.validate()?;
        let simulation = SimConfig {
            n_paths: self.simulation.n_paths,
            seed: self.seed,
            initial_wealth: self.solver.initial_wealth,
            horizon_cutoff_years: self.simulation.horizon_cutoff_years,
            max_arrivals: self.simulation.max_arrivals,
        };
        simulation.validate()?;
        Ok(Experiment {
            model,
            profile,
            utility,
            solver: self.solver.clone(),
            simulation,
            seed: self.seed,
        })
    }

    fn build_utility(&self) -> Result<UtilitySpec, CliError> {
        match (self.utility.kind, self.utility.gamma) {
            (UtilityKind::Power, Some(g)) => Ok(UtilitySpec::power(g)?),
            (UtilityKind::Power, None) => Err(CliError::field("utility.gamma", "required for power utility")),
            (UtilityKind::Log, None) => Ok(UtilitySpec::log()),
            (UtilityKind::Log, Some(_)) => Err(CliError::field("utility.gamma", "not allowed for log utility")),
        }
    }

    fn build_model(&self, utility: &UtilitySpec) -> Result<MarketModel, CliError> {
        let m = &self.model;
        if !(m.horizon_years > 0.0 && m.horizon_years.is_finite()) {
            return Err(CliError::field("model.horizon_years", "must be positive and finite"));
        }
        let mesh = m.mesh_years.clone().unwrap_or_else(|| vec![0.0, m.horizon_years]);
        if mesh.last() != Some(&m.horizon_years) {
            return Err(CliError::field("model.mesh_years", "must end at horizon_years"));
        }
        let pieces = mesh.len().saturating_sub(1);
        let model = MarketModel::piecewise(
            mesh,
            m.drift_per_year.expand(pieces),
            m.volatility_per_sqrt_year.expand(pieces),
        )?;
        let Some(j) = &m.jumps else { return Ok(model) };
        let size_law = match j.size_law {
            SizeLawKind::Lognormal => SizeLaw::LogNormal {
                log_mean: j.log_mean.ok_or_else(|| CliError::field("model.jumps.log_mean", "required for lognormal jumps"))?,
                log_std: j.log_std.ok_or_else(|| CliError::field("model.jumps.log_std", "required for lognormal jumps"))?,
            },
            SizeLawKind::Uniform => SizeLaw::Uniform {
                lower: j.lower.ok_or_else(|| CliError::field("model.jumps.lower", "required for uniform jumps"))?,
                upper: j.upper.ok_or_else(|| CliError::field("model.jumps.upper", "required for uniform jumps"))?,
            },
        };
        if utility.unbounded_below() && j.lower_moment_order.is_none() {
            return Err(CliError::field(
                "model.jumps.lower_moment_order",
                "required when the utility is unbounded below",
            ));
        }
        let spec = JumpSpec {
            rate: j.rate_per_year.expand(pieces),
            size_law,
            q: j.upper_moment_order,
            r: j.lower_moment_order,
        };
        Ok(model.with_jumps(spec)?)
    }
}
