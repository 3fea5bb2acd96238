use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use smoothlab_core::dynamics::LnMode;
use smoothlab_core::reparam::ReparamMode;
use smoothlab_core::Tolerances;

use crate::error::CliError;

pub const TOL_SCALE_VAR: &str = "SMOOTHLAB_TOL_SCALE";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Spectrum,
    Simulate,
    Classify,
    VerifyCampaign,
    LnImpact,
    ReparamDemo,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Spectrum => "spectrum",
            CommandKind::Simulate => "simulate",
            CommandKind::Classify => "classify",
            CommandKind::VerifyCampaign => "verify",
            CommandKind::LnImpact => "ln-impact",
            CommandKind::ReparamDemo => "reparam-demo",
        }
    }

    fn default_depth(self) -> usize {
        match self {
            CommandKind::LnImpact => 128,
            _ => 2000,
        }
    }

    fn default_record_every(self) -> usize {
        match self {
            CommandKind::LnImpact => 1,
            _ => 10,
        }
    }

    fn default_trials(self) -> usize {
        match self {
            CommandKind::Spectrum | CommandKind::VerifyCampaign => 100,
            _ => 1,
        }
    }
}

/// How `H` is drawn by `simulate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum HKind {
    /// Entries `N(0, 1/d)`.
    #[default]
    Raw,
    /// Eigenvalue-clipped reparameterization in the configured `mode`.
    Reparam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LnModeArg {
    None,
    PreLn,
    PostLn,
}

impl From<LnModeArg> for LnMode {
    fn from(m: LnModeArg) -> Self {
        match m {
            LnModeArg::None => LnMode::None,
            LnModeArg::PreLn => LnMode::PreLn,
            LnModeArg::PostLn => LnMode::PostLn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Sharpen,
    Smooth,
}

impl From<ModeArg> for ReparamMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Sharpen => ReparamMode::Sharpen,
            ModeArg::Smooth => ReparamMode::Smooth,
        }
    }
}

/// Campaign pass/fail thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Largest matched distance between the combined spectrum and the explicit Kronecker eigenvalues.
    pub spectrum_match: f64,
    /// Sign-aligned distance between the final iterate and the predicted direction.
    pub direction: f64,
    /// Metric agreement; `hfc_lfc` is compared relative to `max(1, |predicted|)`.
    pub metric: f64,
    /// `|frobenius_log / depth − ln max|μ||`.
    pub growth_rate: f64,
    pub collapse_hfc_lfc: f64,
    pub collapse_cosine: f64,
    pub collapse_effective_rank: f64,
    /// Smallest gap ratio for which `verify` compares against the prediction.
    pub min_gap_ratio: f64,
    /// Smallest gap ratio for which `reparam-demo` checks the limits.
    pub reparam_min_gap_ratio: f64,
    /// Clipped eigenvalues closer than this to 0 are redrawn in reparam campaigns.
    pub eigenvalue_margin: f64,
    /// Required distance of the sharpened cosine from 1 when `v^A_1` has mixed signs.
    pub cosine_margin: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            spectrum_match: 1e-8,
            direction: 1e-6,
            metric: 1e-6,
            growth_rate: 1e-4,
            collapse_hfc_lfc: 1e-8,
            collapse_cosine: 1e-8,
            collapse_effective_rank: 1e-6,
            min_gap_ratio: 1.05,
            reparam_min_gap_ratio: 1.02,
            eigenvalue_margin: 1e-3,
            cosine_margin: 1e-3,
        }
    }
}

impl Thresholds {
    /// Scales the agreement tolerances; gap and margin requirements are kept.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            spectrum_match: self.spectrum_match * factor,
            direction: self.direction * factor,
            metric: self.metric * factor,
            growth_rate: self.growth_rate * factor,
            collapse_hfc_lfc: self.collapse_hfc_lfc * factor,
            collapse_cosine: self.collapse_cosine * factor,
            collapse_effective_rank: self.collapse_effective_rank * factor,
            ..*self
        }
    }
}

/// Experiment configuration as read from JSON. Unset optional fields take
/// command-specific defaults in [`ExperimentConfig::resolve`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Option<CommandKind>,
    pub seed: Option<u64>,
    pub n: Option<usize>,
    pub d: Option<usize>,
    /// Draw each spectrum trial's sizes uniformly from `2..=n` and `2..=d`.
    pub vary_size: Option<bool>,
    pub depth: Option<usize>,
    pub record_every: Option<usize>,
    pub residual: Option<bool>,
    pub ln_mode: Option<LnMode>,
    pub renormalize: Option<bool>,
    pub mode: Option<ReparamMode>,
    pub h_kind: Option<HKind>,
    pub trials: Option<usize>,
    /// Stop a verify campaign once this many trials were eligible.
    pub eligible_target: Option<usize>,
    pub output_path: Option<PathBuf>,
    pub a_path: Option<PathBuf>,
    pub h_path: Option<PathBuf>,
    pub x0_path: Option<PathBuf>,
    /// Overrides for [`Tolerances`] and [`Thresholds`] fields, by name.
    pub tolerances: Map<String, Value>,
}

/// Command-line flags; each mirrors a config key and overrides it.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub vary_size: Option<bool>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub record_every: Option<usize>,
    #[arg(long)]
    pub residual: Option<bool>,
    #[arg(long, value_enum)]
    pub ln_mode: Option<LnModeArg>,
    #[arg(long)]
    pub renormalize: Option<bool>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    pub h_kind: Option<HKind>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub eligible_target: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Attention matrix file (`{"rows", "cols", "data"}`).
    #[arg(long = "a")]
    pub a_path: Option<PathBuf>,
    /// Value/projection matrix file.
    #[arg(long = "h")]
    pub h_path: Option<PathBuf>,
    /// Initial token matrix file.
    #[arg(long = "x0")]
    pub x0_path: Option<PathBuf>,
}

/// Fully resolved settings for one command run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub kind: CommandKind,
    pub seed: u64,
    pub n: usize,
    pub d: usize,
    pub vary_size: bool,
    pub depth: usize,
    pub record_every: usize,
    pub residual: bool,
    pub ln_mode: LnMode,
    pub renormalize: bool,
    pub mode: ReparamMode,
    pub h_kind: HKind,
    pub trials: usize,
    pub eligible_target: Option<usize>,
    #[serde(skip)]
    pub output_path: Option<PathBuf>,
    #[serde(skip)]
    pub a_path: Option<PathBuf>,
    #[serde(skip)]
    pub h_path: Option<PathBuf>,
    #[serde(skip)]
    pub x0_path: Option<PathBuf>,
    pub tolerances: Tolerances,
    pub thresholds: Thresholds,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn apply_args(mut self, args: &ConfigArgs) -> Self {
        macro_rules! over {
            ($($field:ident),*) => { $( if args.$field.is_some() { self.$field = args.$field.clone(); } )* };
        }
        over!(
            seed,
            n,
            d,
            vary_size,
            depth,
            record_every,
            residual,
            renormalize,
            h_kind,
            trials,
            eligible_target,
            a_path,
            h_path,
            x0_path
        );
        if let Some(m) = args.ln_mode {
            self.ln_mode = Some(m.into());
        }
        if let Some(m) = args.mode {
            self.mode = Some(m.into());
        }
        if args.out.is_some() {
            self.output_path = args.out.clone();
        }
        self
    }

    /// Applies command defaults, the tolerance scale and the tolerance
    /// overrides, then validates.
    pub fn resolve(&self, kind: CommandKind, tol_scale: f64) -> Result<Settings, CliError> {
        if let Some(k) = self.kind {
            if k != kind {
                return Err(CliError::Config(format!(
                    "config is for `{}` but the command is `{}`",
                    k.name(),
                    kind.name()
                )));
            }
        }
        let (tolerances, thresholds) = resolve_tolerances(&self.tolerances, tol_scale)?;
        let ln_mode = self.ln_mode.unwrap_or_default();
        let s = Settings {
            kind,
            seed: self.seed.unwrap_or(0),
            n: self.n.unwrap_or(6),
            d: self.d.unwrap_or(4),
            vary_size: self.vary_size.unwrap_or(false),
            depth: self.depth.unwrap_or(kind.default_depth()),
            record_every: self.record_every.unwrap_or(kind.default_record_every()),
            residual: self.residual.unwrap_or(true),
            ln_mode,
            renormalize: self.renormalize.unwrap_or(ln_mode == LnMode::None),
            mode: self.mode.unwrap_or_default(),
            h_kind: self.h_kind.unwrap_or_default(),
            trials: self.trials.unwrap_or(kind.default_trials()),
            eligible_target: self.eligible_target,
            output_path: self.output_path.clone(),
            a_path: self.a_path.clone(),
            h_path: self.h_path.clone(),
            x0_path: self.x0_path.clone(),
            tolerances,
            thresholds,
        };
        s.validate()?;
        Ok(s)
    }
}

impl Settings {
    fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.n == 0 || self.d == 0 {
            return bad(format!("n and d must be at least 1 (got n={}, d={})", self.n, self.d));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.depth == 0 || self.record_every == 0 {
            return bad("depth and record_every must be at least 1".into());
        }
        if self.eligible_target == Some(0) {
            return bad("eligible_target must be at least 1".into());
        }
        if self.kind == CommandKind::Classify && (self.a_path.is_none() || self.h_path.is_none()) {
            return bad("classify needs both --a and --h matrix files".into());
        }
        if self.ln_mode != LnMode::None && self.renormalize {
            return bad("renormalize cannot be combined with pre_ln or post_ln".into());
        }
        Ok(())
    }
}

/// Reads the tolerance multiplier from the environment (default 1).
pub fn tol_scale_from_env() -> Result<f64, CliError> {
    match std::env::var(TOL_SCALE_VAR) {
        Err(_) => Ok(1.0),
        Ok(raw) => match raw.trim().parse::<f64>() {
            Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
            _ => Err(CliError::Config(format!(
                "{TOL_SCALE_VAR} must be a positive number, got {raw:?}"
            ))),
        },
    }
}

fn resolve_tolerances(overrides: &Map<String, Value>, scale: f64) -> Result<(Tolerances, Thresholds), CliError> {
    let to_map = |v: Value| match v {
        Value::Object(m) => m,
        _ => unreachable!("structs serialize to objects"),
    };
    let mut core = to_map(serde_json::to_value(Tolerances::default().scaled(scale)).expect("serializable"));
    let mut campaign = to_map(serde_json::to_value(Thresholds::default().scaled(scale)).expect("serializable"));
    for (key, value) in overrides {
        let target = if core.contains_key(key) {
            &mut core
        } else if campaign.contains_key(key) {
            &mut campaign
        } else {
            return Err(CliError::Config(format!("unknown tolerance `{key}`")));
        };
        target.insert(key.clone(), value.clone());
    }
    let parse_err = |e: serde_json::Error| CliError::Config(format!("tolerances: {e}"));
    Ok((
        serde_json::from_value(Value::Object(core)).map_err(parse_err)?,
        serde_json::from_value(Value::Object(campaign)).map_err(parse_err)?,
    ))
}
