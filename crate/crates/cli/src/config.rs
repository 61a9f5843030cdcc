//! Configuration resolution: defaults, then TOML file values, then flags.

use crate::args::CommonArgs;
use crate::CliError;
use bribemine_core::{
    AnalysisOptions, Composition, Decision, MiningModel, ModelError, RewardMethod,
    StrategyParams, Strategy,
};
use serde::Deserialize;
use std::path::Path;

/// TOML configuration file. Every field is optional; sections mirror the
/// subcommands and `[params]` holds the shared attack parameters.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub params: ParamsSection,
    #[serde(default)]
    pub analyze: CommandSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub dilemma: DilemmaSection,
    #[serde(default)]
    pub growth: CommandSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub alpha: Option<f64>,
    pub rho: Option<f64>,
    pub gamma: Option<f64>,
    pub epsilon: Option<f64>,
    pub betas: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandSection {
    pub model: Option<String>,
    pub method: Option<String>,
    pub depth: Option<usize>,
    pub tol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub model: Option<String>,
    pub method: Option<String>,
    pub depth: Option<usize>,
    pub tol: Option<f64>,
    pub axes: Option<Vec<String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub strategy: Option<String>,
    pub rounds: Option<u64>,
    pub seed: Option<u64>,
    pub accept: Option<Vec<String>>,
    pub model: Option<String>,
    pub method: Option<String>,
    pub depth: Option<usize>,
    pub tol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DilemmaSection {
    pub model: Option<String>,
    pub method: Option<String>,
    pub depth: Option<usize>,
    pub tol: Option<f64>,
    pub composition: Option<String>,
}

pub fn load_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("bad config file: {e}")))
}

/// Fully resolved run configuration for one command invocation.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub params: StrategyParams,
    pub model: MiningModel,
    pub options: AnalysisOptions,
    pub accept: Vec<Decision>,
    pub rounds: u64,
    pub seed: u64,
    /// Which parameters were pinned explicitly on the command line.
    pub fixed_by_flag: Vec<&'static str>,
}

fn parse_model_str(s: &str) -> Result<MiningModel, CliError> {
    match s.to_ascii_lowercase().as_str() {
        "bssm" => Ok(MiningModel::Bssm),
        "bsm" => Ok(MiningModel::Bsm),
        other => Err(CliError::Config(format!("unknown model '{other}'"))),
    }
}

fn parse_method_str(s: &str) -> Result<RewardMethod, CliError> {
    match s.to_ascii_lowercase().as_str() {
        "reference" => Ok(RewardMethod::Reference),
        "exact" => Ok(RewardMethod::Exact),
        other => Err(CliError::Config(format!("unknown method '{other}'"))),
    }
}

pub fn parse_strategy_str(s: &str) -> Result<Strategy, CliError> {
    match s.to_ascii_lowercase().as_str() {
        "honest" | "hm" => Ok(Strategy::Honest),
        "selfish" | "sm" => Ok(Strategy::Selfish),
        "semiselfish" | "ssm" => Ok(Strategy::SemiSelfish),
        "leadstubborn" | "stubborn" => Ok(Strategy::LeadStubborn),
        "bssm" => Ok(Strategy::Bssm),
        "bsm" => Ok(Strategy::Bsm),
        other => Err(CliError::Config(format!("unknown strategy '{other}'"))),
    }
}

pub fn parse_composition_str(s: &str) -> Result<Composition, CliError> {
    match s.to_ascii_lowercase().as_str() {
        "folded" => Ok(Composition::Folded),
        "pooled" => Ok(Composition::Pooled),
        other => Err(CliError::Config(format!("unknown composition '{other}'"))),
    }
}

fn parse_decision_str(s: &str) -> Result<Decision, CliError> {
    crate::args::parse_decision(s).map_err(CliError::Config)
}

/// Parameters shared by the command sections.
pub struct SectionView<'a> {
    pub model: Option<&'a str>,
    pub method: Option<&'a str>,
    pub depth: Option<usize>,
    pub tol: Option<f64>,
}

/// Merges defaults, config-file values, and flags; flags win.
pub fn resolve(
    common: &CommonArgs,
    file: &FileConfig,
    section: SectionView<'_>,
    sim_section: Option<&SimulateSection>,
) -> Result<Resolved, CliError> {
    let mut fixed = Vec::new();
    macro_rules! track {
        ($flag:expr, $name:literal) => {
            if $flag.is_some() {
                fixed.push($name);
            }
        };
    }
    track!(common.alpha, "alpha");
    track!(common.rho, "rho");
    track!(common.gamma, "gamma");
    track!(common.epsilon, "epsilon");
    track!(common.beta, "beta");

    let alpha = common
        .alpha
        .or(file.params.alpha)
        .ok_or_else(|| CliError::Config("alpha is required (flag --alpha or [params] alpha)".into()))?;
    let rho = common.rho.or(file.params.rho).unwrap_or(0.0);
    let gamma = common.gamma.or(file.params.gamma).unwrap_or(0.0);
    let epsilon = common.epsilon.or(file.params.epsilon).unwrap_or(0.0);
    let betas = common
        .beta
        .clone()
        .or_else(|| file.params.betas.clone())
        .unwrap_or_default();

    let params = StrategyParams::new(alpha, rho, gamma, epsilon, betas).map_err(model_err)?;

    let model = match (&common.model, section.model) {
        (Some(m), _) => *m,
        (None, Some(s)) => parse_model_str(s)?,
        (None, None) => MiningModel::Bssm,
    };
    let method = match (&common.method, section.method) {
        (Some(m), _) => *m,
        (None, Some(s)) => parse_method_str(s)?,
        (None, None) => RewardMethod::Exact,
    };
    let depth = common.depth.or(section.depth).unwrap_or(64);
    let tol = common.tol.or(section.tol).unwrap_or(1e-12);
    if tol.is_nan() || tol <= 0.0 {
        return Err(CliError::Config(format!("tolerance must be > 0, got {tol}")));
    }

    let accept: Vec<Decision> = match (&common.accept, sim_section.and_then(|s| s.accept.as_ref()))
    {
        (Some(v), _) => v.clone(),
        (None, Some(v)) => v
            .iter()
            .map(|s| parse_decision_str(s))
            .collect::<Result<_, _>>()?,
        (None, None) => vec![Decision::Accept; params.n_targets()],
    };

    let rounds = common
        .rounds
        .or(sim_section.and_then(|s| s.rounds))
        .unwrap_or(1_000_000);
    let seed = common.seed.or(sim_section.and_then(|s| s.seed)).unwrap_or(0);

    Ok(Resolved {
        params,
        model,
        options: AnalysisOptions { depth, tol, method },
        accept,
        rounds,
        seed,
        fixed_by_flag: fixed,
    })
}

pub fn model_err(e: ModelError) -> CliError {
    match e {
        ModelError::InvalidParam { .. } | ModelError::Incompatible(_) => {
            CliError::Config(e.to_string())
        }
        ModelError::NoConvergence { .. } | ModelError::Structure(_) | ModelError::Domain(_) => {
            CliError::Numerical(e.to_string())
        }
    }
}
