//! Argument handling: clap definitions, the flat key=value config file,
//! and the merge of both into resolved run plans.
//!
//! Precedence is flag over file over built-in default. A config file may
//! supply any key that the active subcommand accepts as a flag, spelled
//! exactly like the flag without the leading dashes. Keys the subcommand
//! does not know are rejected rather than ignored, so a typo cannot
//! silently fall back to a default.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{ArgAction, Args, Parser, Subcommand};
use dualfilt::oracle::SimulationConfig;
use dualfilt::{Error, FilterOptions, ModelSpec};

/// Exact optimal filtering for CIR, OU, and Wright-Fisher hidden signals.
#[derive(Debug, Parser)]
#[command(name = "dualfilt", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic signal path and observation sequence.
    Simulate(SimulateArgs),
    /// Run the exact filter over an observation file.
    Filter(FilterArgs),
    /// Cross-check the exact filter against a particle filter.
    Validate(ValidateArgs),
}

/// Flags every subcommand shares: the model description and the optional
/// config file.
#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Signal family: cir, ou, or wf.
    #[arg(long)]
    pub model: Option<String>,

    /// CIR shape parameter.
    #[arg(long)]
    pub delta: Option<f64>,

    /// CIR mean-reversion rate, or OU stationary mean.
    #[arg(long)]
    pub gamma: Option<f64>,

    /// Diffusion scale (CIR and OU).
    #[arg(long)]
    pub sigma2: Option<f64>,

    /// CIR emission intensity multiplier, or OU observation noise variance.
    #[arg(long = "lambda-em")]
    pub lambda_em: Option<f64>,

    /// OU stationary variance, or comma-separated Wright-Fisher mutation
    /// rates (one per type, at least two).
    #[arg(long)]
    pub alpha: Option<String>,

    /// Flat key=value file; explicit flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    /// Number of observations to draw; the first lands at time zero.
    #[arg(long = "num-obs")]
    pub num_obs: Option<usize>,

    /// Time between consecutive observations.
    #[arg(long)]
    pub gap: Option<f64>,

    /// RNG seed.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Multinomial trials per Wright-Fisher observation.
    #[arg(long)]
    pub total: Option<u64>,

    /// Euler substep bound for Wright-Fisher signal paths.
    #[arg(long = "euler-step")]
    pub euler_step: Option<f64>,

    /// Observation CSV destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Hidden state CSV destination; states are discarded when omitted.
    #[arg(long = "state-out")]
    pub state_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    /// Observation CSV to filter.
    #[arg(long)]
    pub obs: Option<PathBuf>,

    /// Record CSV destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Drop mixture components below this weight after each update.
    #[arg(long = "prune-eps")]
    pub prune_eps: Option<f64>,

    /// Append the full mixture, as multi-index=weight pairs, to each record.
    #[arg(long = "full-mixture", action = ArgAction::SetTrue)]
    pub full_mixture: Option<bool>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    /// Observation CSV to cross-check on.
    #[arg(long)]
    pub obs: Option<PathBuf>,

    /// Particles per filter replicate.
    #[arg(long)]
    pub particles: Option<usize>,

    /// Independent particle filter replicates; standard errors need at
    /// least 20.
    #[arg(long)]
    pub replicates: Option<usize>,

    /// Particle filter RNG seed.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Pruning threshold for the exact filter side.
    #[arg(long = "prune-eps")]
    pub prune_eps: Option<f64>,

    /// Euler substep bound for Wright-Fisher particle propagation.
    #[arg(long = "euler-step")]
    pub euler_step: Option<f64>,

    /// Test hook: run the exact filter with a deliberately corrupted
    /// parameter flow, so the verdict must come out fail.
    #[arg(long = "corrupt-theta", action = ArgAction::SetTrue, hide = true)]
    pub corrupt_theta: Option<bool>,
}

/// Top-level failure classes, one exit code each.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config file, or observation data. Exit 1.
    Input(String),
    /// The engine reported a numerical failure. Exit 2.
    Numerical(String),
    /// An internal invariant escaped; a bug, not a usage problem. Exit 3.
    Internal(String),
    /// The validate verdict came out fail. Exit 4.
    VerdictFail,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Internal(_) => 3,
            CliError::VerdictFail => 4,
        }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Numerical(m) | CliError::Internal(m) => {
                f.write_str(m)
            }
            CliError::VerdictFail => f.write_str("validation verdict failed"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match &e {
            Error::InvalidParameter(_)
            | Error::InvalidObservation(_)
            | Error::DimensionMismatch { .. }
            | Error::NonMonotoneTime { .. } => CliError::Input(e.to_string()),
            Error::Numerical(_)
            | Error::ImpossibleObservation
            | Error::AllComponentsPruned(_)
            | Error::ParticleDegeneracy(_)
            | Error::DegenerateRates(_)
            | Error::StateSpaceTooLarge(_) => CliError::Numerical(e.to_string()),
            // Index-set misuse escaping the library means a bug in this
            // front end, not a user problem.
            Error::NotDominated { .. } | Error::EmptyIndexSet | Error::OutOfStateSpace(_) => {
                CliError::Internal(e.to_string())
            }
        }
    }
}

/// Everything `simulate` needs after merging flags, file, and defaults.
#[derive(Debug)]
pub struct SimulatePlan {
    pub sim: SimulationConfig,
    pub out: Option<PathBuf>,
    pub state_out: Option<PathBuf>,
}

/// Everything `filter` needs after merging flags, file, and defaults.
#[derive(Debug)]
pub struct FilterPlan {
    pub model: ModelSpec,
    pub obs: PathBuf,
    pub out: Option<PathBuf>,
    pub prune_eps: f64,
    pub full_mixture: bool,
}

/// Everything `validate` needs after merging flags, file, and defaults.
/// `exact_model` differs from `model` only under the corruption test hook;
/// the particle reference always keeps the true model.
#[derive(Debug)]
pub struct ValidatePlan {
    pub model: ModelSpec,
    pub exact_model: ModelSpec,
    pub obs: PathBuf,
    pub particles: usize,
    pub replicates: usize,
    pub seed: u64,
    pub prune_eps: f64,
    pub euler_step: f64,
}

pub fn resolve_simulate(args: SimulateArgs) -> Result<SimulatePlan, CliError> {
    let mut file = FileValues::load(args.model.config.as_deref())?;
    let model = build_model(&args.model, &mut file)?;
    let num_obs = args
        .num_obs
        .or(file.take("num-obs")?)
        .ok_or_else(|| CliError::input("missing required flag --num-obs"))?;
    let gap = args
        .gap
        .or(file.take("gap")?)
        .ok_or_else(|| CliError::input("missing required flag --gap"))?;
    let seed = args.seed.or(file.take("seed")?).unwrap_or(0);
    let wf_total = args.total.or(file.take("total")?).unwrap_or(10);
    let euler_step = args
        .euler_step
        .or(file.take("euler-step")?)
        .unwrap_or(1e-3);
    let out = args.out.or(file.take("out")?);
    let state_out = args.state_out.or(file.take("state-out")?);
    file.finish()?;

    let sim = SimulationConfig {
        model,
        num_obs,
        gap,
        seed,
        euler_step,
        wf_total,
    };
    sim.validate()?;
    Ok(SimulatePlan {
        sim,
        out,
        state_out,
    })
}

pub fn resolve_filter(args: FilterArgs) -> Result<FilterPlan, CliError> {
    let mut file = FileValues::load(args.model.config.as_deref())?;
    let model = build_model(&args.model, &mut file)?;
    let obs = args
        .obs
        .or(file.take("obs")?)
        .ok_or_else(|| CliError::input("missing required flag --obs"))?;
    let out = args.out.or(file.take("out")?);
    let prune_eps = args
        .prune_eps
        .or(file.take("prune-eps")?)
        .unwrap_or(1e-10);
    let full_mixture = args
        .full_mixture
        .or(file.take("full-mixture")?)
        .unwrap_or(false);
    file.finish()?;

    FilterOptions { prune_eps }.validate()?;
    require_readable(&obs)?;
    Ok(FilterPlan {
        model,
        obs,
        out,
        prune_eps,
        full_mixture,
    })
}

pub fn resolve_validate(args: ValidateArgs) -> Result<ValidatePlan, CliError> {
    let mut file = FileValues::load(args.model.config.as_deref())?;
    let model = build_model(&args.model, &mut file)?;
    let obs = args
        .obs
        .or(file.take("obs")?)
        .ok_or_else(|| CliError::input("missing required flag --obs"))?;
    let particles = args.particles.or(file.take("particles")?).unwrap_or(10_000);
    let replicates = args.replicates.or(file.take("replicates")?).unwrap_or(20);
    let seed = args.seed.or(file.take("seed")?).unwrap_or(0);
    let prune_eps = args
        .prune_eps
        .or(file.take("prune-eps")?)
        .unwrap_or(1e-10);
    let euler_step = args
        .euler_step
        .or(file.take("euler-step")?)
        .unwrap_or(1e-3);
    let corrupt = args
        .corrupt_theta
        .or(file.take("corrupt-theta")?)
        .unwrap_or(false);
    file.finish()?;

    FilterOptions { prune_eps }.validate()?;
    if !euler_step.is_finite() || euler_step <= 0.0 {
        return Err(CliError::input(format!(
            "Euler step must be positive, got {euler_step}"
        )));
    }
    require_readable(&obs)?;
    let exact_model = if corrupt {
        corrupted_flow(&model)?
    } else {
        model.clone()
    };
    Ok(ValidatePlan {
        model,
        exact_model,
        obs,
        particles,
        replicates,
        seed,
        prune_eps,
        euler_step,
    })
}

/// Scales the diffusion (or mutation) parameters by half again, so the
/// exact filter evolves its dual parameter under a wrong flow while the
/// particle reference keeps the true model.
fn corrupted_flow(model: &ModelSpec) -> Result<ModelSpec, CliError> {
    let corrupted = match model {
        ModelSpec::Cir(p) => ModelSpec::cir(p.delta, p.gamma, 1.5 * p.sigma2, p.lambda_em)?,
        ModelSpec::Ou(p) => ModelSpec::ou(p.gamma, p.alpha, 1.5 * p.sigma2, p.lambda_em)?,
        ModelSpec::WrightFisher(p) => {
            ModelSpec::wright_fisher(p.a.iter().map(|v| 1.5 * v).collect())?
        }
    };
    Ok(corrupted)
}

fn require_readable(path: &Path) -> Result<(), CliError> {
    if !path.is_file() {
        return Err(CliError::input(format!(
            "observation file {} does not exist or is not a regular file",
            path.display()
        )));
    }
    Ok(())
}

/// Builds the model from flags plus file entries, rejecting parameters that
/// do not belong to the chosen family so a stray flag cannot be ignored.
fn build_model(args: &ModelArgs, file: &mut FileValues) -> Result<ModelSpec, CliError> {
    let family = args
        .model
        .clone()
        .or(file.take("model")?)
        .ok_or_else(|| CliError::input("missing required flag --model (cir, ou, or wf)"))?;

    let delta = args.delta.or(file.take("delta")?);
    let gamma = args.gamma.or(file.take("gamma")?);
    let sigma2 = args.sigma2.or(file.take("sigma2")?);
    let lambda_em = args.lambda_em.or(file.take("lambda-em")?);
    let alpha = args.alpha.clone().or(file.take("alpha")?);

    match family.as_str() {
        "cir" => {
            reject_param(&family, "alpha", alpha.is_some())?;
            let model = ModelSpec::cir(
                require_param(&family, "delta", delta)?,
                require_param(&family, "gamma", gamma)?,
                require_param(&family, "sigma2", sigma2)?,
                require_param(&family, "lambda-em", lambda_em)?,
            )?;
            Ok(model)
        }
        "ou" => {
            reject_param(&family, "delta", delta.is_some())?;
            let rates = parse_rates(&require_param(&family, "alpha", alpha)?)?;
            if rates.len() != 1 {
                return Err(CliError::input(format!(
                    "model ou takes a single --alpha value, got {}",
                    rates.len()
                )));
            }
            let model = ModelSpec::ou(
                require_param(&family, "gamma", gamma)?,
                rates[0],
                require_param(&family, "sigma2", sigma2)?,
                require_param(&family, "lambda-em", lambda_em)?,
            )?;
            Ok(model)
        }
        "wf" => {
            reject_param(&family, "delta", delta.is_some())?;
            reject_param(&family, "gamma", gamma.is_some())?;
            reject_param(&family, "sigma2", sigma2.is_some())?;
            reject_param(&family, "lambda-em", lambda_em.is_some())?;
            let rates = parse_rates(&require_param(&family, "alpha", alpha)?)?;
            let model = ModelSpec::wright_fisher(rates)?;
            Ok(model)
        }
        other => Err(CliError::input(format!(
            "unknown model '{other}', expected cir, ou, or wf"
        ))),
    }
}

fn require_param<T>(family: &str, flag: &str, value: Option<T>) -> Result<T, CliError> {
    value.ok_or_else(|| {
        CliError::input(format!(
            "missing required model parameter --{flag} for model {family}"
        ))
    })
}

fn reject_param(family: &str, flag: &str, present: bool) -> Result<(), CliError> {
    if present {
        return Err(CliError::input(format!(
            "parameter --{flag} does not apply to model {family}"
        )));
    }
    Ok(())
}

fn parse_rates(raw: &str) -> Result<Vec<f64>, CliError> {
    raw.split(',')
        .map(|tok| {
            let tok = tok.trim();
            tok.parse::<f64>().map_err(|e| {
                CliError::input(format!("invalid --alpha entry '{tok}': {e}"))
            })
        })
        .collect()
}

/// Config file entries, consumed key by key so leftovers can be rejected.
struct FileValues {
    path: Option<PathBuf>,
    entries: BTreeMap<String, String>,
}

impl FileValues {
    fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self {
                path: None,
                entries: BTreeMap::new(),
            });
        };
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::input(format!("cannot read config file {}: {e}", path.display()))
        })?;
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::input(format!(
                    "config file {} line {}: expected key=value, got '{}'",
                    path.display(),
                    idx + 1,
                    raw.trim()
                )));
            };
            let key = key.trim().to_string();
            if entries
                .insert(key.clone(), value.trim().to_string())
                .is_some()
            {
                return Err(CliError::input(format!(
                    "config file {} line {}: duplicate key '{key}'",
                    path.display(),
                    idx + 1
                )));
            }
        }
        Ok(Self {
            path: Some(path.to_path_buf()),
            entries,
        })
    }

    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: fmt::Display,
    {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|e| {
                CliError::input(format!("config key '{key}': invalid value '{raw}': {e}"))
            }),
        }
    }

    /// Rejects whatever the active subcommand did not consume.
    fn finish(self) -> Result<(), CliError> {
        if let Some(key) = self.entries.keys().next() {
            let shown = self
                .path
                .as_deref()
                .map_or_else(String::new, |p| p.display().to_string());
            return Err(CliError::input(format!(
                "config file {shown}: unknown key '{key}'"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model_args(family: &str) -> ModelArgs {
        ModelArgs {
            model: Some(family.into()),
            delta: None,
            gamma: None,
            sigma2: None,
            lambda_em: None,
            alpha: None,
            config: None,
        }
    }

    #[test]
    fn cir_model_builds_from_flags() {
        let mut args = model_args("cir");
        args.delta = Some(2.0);
        args.gamma = Some(1.0);
        args.sigma2 = Some(1.0);
        args.lambda_em = Some(1.0);
        let mut file = FileValues::load(None).unwrap();
        let model = build_model(&args, &mut file).unwrap();
        assert!(matches!(model, ModelSpec::Cir(_)));
    }

    #[test]
    fn missing_parameter_names_the_field() {
        let mut args = model_args("cir");
        args.gamma = Some(1.0);
        args.sigma2 = Some(1.0);
        args.lambda_em = Some(1.0);
        let mut file = FileValues::load(None).unwrap();
        let err = build_model(&args, &mut file).unwrap_err();
        assert!(err.to_string().contains("--delta"));
    }

    #[test]
    fn foreign_parameter_is_rejected() {
        let mut args = model_args("ou");
        args.delta = Some(2.0);
        args.gamma = Some(0.0);
        args.sigma2 = Some(1.0);
        args.lambda_em = Some(1.0);
        args.alpha = Some("1.0".into());
        let mut file = FileValues::load(None).unwrap();
        let err = build_model(&args, &mut file).unwrap_err();
        assert!(err.to_string().contains("--delta"));
        assert!(err.to_string().contains("does not apply"));
    }

    #[test]
    fn wf_alpha_list_parses() {
        let mut args = model_args("wf");
        args.alpha = Some("1.1, 0.7, 0.9".into());
        let mut file = FileValues::load(None).unwrap();
        let model = build_model(&args, &mut file).unwrap();
        assert_eq!(model.signal_dim(), 3);
    }

    #[test]
    fn exit_codes_partition_the_error_space() {
        assert_eq!(CliError::from(Error::InvalidParameter("x".into())).exit_code(), 1);
        assert_eq!(CliError::from(Error::Numerical("x".into())).exit_code(), 2);
        assert_eq!(CliError::from(Error::EmptyIndexSet).exit_code(), 3);
        assert_eq!(CliError::VerdictFail.exit_code(), 4);
    }
}
