//! The experiment configuration: one JSON document naming the model, prior,
//! architecture, training settings and output paths.
//!
//! Flags override config fields, and the merged result is validated in full
//! before any command does work.  Every run echoes the merged config into
//! its output directory so an experiment can be replayed from its artifacts
//! alone.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use nbes_core::models::{
    CondExtremes, DataModel, GaussianProcess, LinearRegression, Marginal, NormalVariance, Prior,
    Schlather, SpatialDomain, UniformTheta,
};
use nbes_core::network::ExpertStats;
use nbes_core::training::{LossSpec, Refresh, ReplicateDist, TrainConfig};

use crate::{CliError, Global};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    /// Prior marginals, one per parameter; omit to use the model's default.
    #[serde(default)]
    pub prior: Option<Vec<Marginal>>,
    #[serde(default)]
    pub architecture: ArchitectureSpec,
    #[serde(default)]
    pub training: TrainSpec,
    /// Stage replicate counts and routing changepoints; omit to train a
    /// single estimator instead of a pre-trained chain.
    #[serde(default)]
    pub piecewise: Option<PiecewiseSpec>,
    #[serde(default)]
    pub paths: PathsSpec,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    /// One of: uniform_theta, normal_variance, linear_regression, gp,
    /// gp_known_smoothness, schlather, cond_extremes.
    pub id: String,
    /// Grid dimensions for the spatial models; defaults to 8 by 8.
    #[serde(default)]
    pub grid: Option<[usize; 2]>,
    /// Fixed smoothness for gp_known_smoothness.
    #[serde(default)]
    pub nu: Option<f64>,
    /// Exceedance threshold for cond_extremes.
    #[serde(default)]
    pub threshold: Option<f64>,
    /// Design points for linear_regression.
    #[serde(default)]
    pub covariates: Option<usize>,
    /// Noise standard deviation for linear_regression.
    #[serde(default)]
    pub noise_sd: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArchitectureSpec {
    /// Learned summary dimension.
    pub q: usize,
    pub psi_hidden: Vec<usize>,
    pub phi_hidden: Vec<usize>,
    pub expert: ExpertStats,
}

impl Default for ArchitectureSpec {
    fn default() -> ArchitectureSpec {
        ArchitectureSpec {
            q: 64,
            psi_hidden: vec![128, 128],
            phi_hidden: vec![128],
            expert: ExpertStats::None,
        }
    }
}

impl ArchitectureSpec {
    fn validate(&self) -> Result<(), String> {
        if self.q == 0 {
            return Err("architecture: summary dimension q must be at least 1".into());
        }
        for &w in self.psi_hidden.iter().chain(&self.phi_hidden) {
            if w == 0 {
                return Err("architecture: hidden widths must be at least 1".into());
            }
        }
        self.expert.validate().map_err(|e| format!("architecture: {e}"))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSpec {
    pub train_draws: usize,
    pub val_draws: usize,
    pub sets_per_draw: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub patience: usize,
    pub refresh: RefreshSpec,
    pub replicates: ReplicateSpec,
    pub max_epochs: usize,
    pub loss: LossSpecConfig,
}

impl Default for TrainSpec {
    fn default() -> TrainSpec {
        TrainSpec {
            train_draws: 10_000,
            val_draws: 2_000,
            sets_per_draw: 10,
            batch_size: 32,
            learning_rate: 1e-3,
            patience: 5,
            refresh: RefreshSpec::OnTheFly,
            replicates: ReplicateSpec::Fixed { m: 10 },
            max_epochs: 200,
            loss: LossSpecConfig::Absolute,
        }
    }
}

impl TrainSpec {
    pub fn to_train_config(&self, seed: u64) -> Result<TrainConfig, String> {
        let refresh = match self.refresh {
            RefreshSpec::OnTheFly => Refresh::OnTheFly,
            RefreshSpec::Every { epochs } => Refresh::Every(epochs),
            RefreshSpec::Fixed => Refresh::Fixed,
        };
        let replicate_dist = match self.replicates {
            ReplicateSpec::Fixed { m } => ReplicateDist::Fixed(m),
            ReplicateSpec::Uniform { lo, hi } => ReplicateDist::Uniform { lo, hi },
        };
        let mut config = TrainConfig::new(replicate_dist, seed);
        config.train_draws = self.train_draws;
        config.val_draws = self.val_draws;
        config.sets_per_draw = self.sets_per_draw;
        config.batch_size = self.batch_size;
        config.learning_rate = self.learning_rate;
        config.patience = self.patience;
        config.refresh = refresh;
        config.max_epochs = self.max_epochs;
        config.loss = self.loss.to_loss()?;
        config.validate().map_err(|e| e.to_string())?;
        Ok(config)
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RefreshSpec {
    OnTheFly,
    Every { epochs: usize },
    Fixed,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReplicateSpec {
    Fixed { m: usize },
    Uniform { lo: usize, hi: usize },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossSpecConfig {
    Absolute,
    Squared,
    ZeroOne,
    Quantile { prob: f64 },
}

impl LossSpecConfig {
    pub fn to_loss(self) -> Result<LossSpec, String> {
        match self {
            LossSpecConfig::Absolute => Ok(LossSpec::absolute()),
            LossSpecConfig::Squared => Ok(LossSpec::squared()),
            LossSpecConfig::ZeroOne => Ok(LossSpec::zero_one_default()),
            LossSpecConfig::Quantile { prob } => {
                LossSpec::quantile(prob).map_err(|e| e.to_string())
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiecewiseSpec {
    /// Replicate count each stage trains at, strictly increasing.
    pub sizes: Vec<usize>,
    /// Routing boundaries: sets with m <= changepoints[k] go to stage k.
    pub changepoints: Vec<usize>,
}

impl PiecewiseSpec {
    fn validate(&self) -> Result<(), String> {
        if self.sizes.is_empty() {
            return Err("piecewise: at least one stage size is required".into());
        }
        if self.changepoints.len() + 1 != self.sizes.len() {
            return Err(format!(
                "piecewise: {} sizes need {} changepoints, got {}",
                self.sizes.len(),
                self.sizes.len() - 1,
                self.changepoints.len()
            ));
        }
        for seq in [&self.sizes, &self.changepoints] {
            if seq.first().is_some_and(|&v| v == 0) {
                return Err("piecewise: replicate counts start at one".into());
            }
            if seq.windows(2).any(|w| w[0] >= w[1]) {
                return Err("piecewise: sizes and changepoints must increase strictly".into());
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSpec {
    pub checkpoint: PathBuf,
    pub data: PathBuf,
    pub reports: PathBuf,
}

impl Default for PathsSpec {
    fn default() -> PathsSpec {
        PathsSpec {
            checkpoint: PathBuf::from("checkpoint"),
            data: PathBuf::from("data.bin"),
            reports: PathBuf::from("reports"),
        }
    }
}

impl ExperimentConfig {
    /// Rejects any spec a module would refuse, before any compute.
    fn validate(&self) -> Result<(), String> {
        build_model(self).map(|_| ())?;
        self.architecture.validate()?;
        self.training.to_train_config(self.seed).map(|_| ())?;
        if let Some(pw) = &self.piecewise {
            pw.validate()?;
        }
        for (name, path) in [
            ("checkpoint", &self.paths.checkpoint),
            ("data", &self.paths.data),
            ("reports", &self.paths.reports),
        ] {
            if path.as_os_str().is_empty() {
                return Err(format!("paths: {name} must not be empty"));
            }
        }
        Ok(())
    }
}

/// The config after flag overrides, plus the resolved output directory.
pub struct Effective {
    pub config: ExperimentConfig,
    pub out_dir: PathBuf,
}

impl Effective {
    pub fn load(global: &Global) -> Result<Effective, CliError> {
        let path = global
            .config
            .as_ref()
            .ok_or_else(|| CliError::Config("--config is required".into()))?;
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("reading {}: {e}", path.display())))?;
        let mut config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("parsing {}: {e}", path.display())))?;
        if let Some(seed) = global.seed {
            config.seed = seed;
        }
        if global.threads == Some(0) {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        config.validate().map_err(CliError::Config)?;
        let out_dir = global.out.clone().unwrap_or_else(|| PathBuf::from("."));
        let eff = Effective { config, out_dir };
        for dir in [eff.out_dir.clone(), eff.reports_dir()] {
            fs::create_dir_all(&dir)
                .map_err(|e| CliError::Config(format!("creating {}: {e}", dir.display())))?;
        }
        Ok(eff)
    }

    /// Relative paths resolve against the output directory.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.out_dir.join(p)
        }
    }

    pub fn checkpoint_dir(&self) -> PathBuf {
        self.resolve(&self.config.paths.checkpoint)
    }

    pub fn data_path(&self) -> PathBuf {
        self.resolve(&self.config.paths.data)
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.resolve(&self.config.paths.reports)
    }

    /// Writes the merged config next to the run's other outputs.
    pub fn echo(&self) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(&self.config)
            .map_err(|e| CliError::Config(format!("serialising config: {e}")))?;
        let path = self.out_dir.join("effective_config.json");
        fs::write(&path, text + "\n")
            .map_err(|e| CliError::Config(format!("writing {}: {e}", path.display())))
    }
}

fn config_err<E: std::fmt::Display>(e: E) -> String {
    format!("model: {e}")
}

/// Fields of `ModelSpec` that only some models read; naming one for the
/// wrong model is a config error rather than a silent ignore.
fn reject_unused(spec: &ModelSpec, allowed: &[&str]) -> Result<(), String> {
    let given = [
        ("grid", spec.grid.is_some()),
        ("nu", spec.nu.is_some()),
        ("threshold", spec.threshold.is_some()),
        ("covariates", spec.covariates.is_some()),
        ("noise_sd", spec.noise_sd.is_some()),
    ];
    for (name, set) in given {
        if set && !allowed.contains(&name) {
            return Err(format!(
                "model: field {name} does not apply to {}",
                spec.id
            ));
        }
    }
    Ok(())
}

fn grid_domain(grid: Option<[usize; 2]>, centre: bool) -> Result<SpatialDomain, String> {
    let [nx, ny] = grid.unwrap_or([8, 8]);
    if nx == 0 || ny == 0 {
        return Err(format!("model: grid dimensions must be at least 1, got {nx} by {ny}"));
    }
    let domain = SpatialDomain::unit_grid(nx, ny);
    Ok(if centre { domain.with_centre_site() } else { domain })
}

fn prior_override(config: &ExperimentConfig, default: Prior) -> Result<Prior, String> {
    match &config.prior {
        None => Ok(default),
        Some(marginals) => Prior::new(marginals.clone()).map_err(|e| format!("prior: {e}")),
    }
}

pub fn build_model(config: &ExperimentConfig) -> Result<Box<dyn DataModel>, String> {
    let spec = &config.model;
    match spec.id.as_str() {
        "uniform_theta" => {
            reject_unused(spec, &[])?;
            let prior = prior_override(config, UniformTheta::default_model().prior().clone())?;
            Ok(Box::new(UniformTheta::new(prior).map_err(config_err)?))
        }
        "normal_variance" => {
            reject_unused(spec, &[])?;
            let prior = prior_override(config, NormalVariance::default_model().prior().clone())?;
            Ok(Box::new(NormalVariance::new(prior).map_err(config_err)?))
        }
        "linear_regression" => {
            reject_unused(spec, &["covariates", "noise_sd"])?;
            if config.prior.is_some() {
                return Err("prior: linear_regression fixes standard normal coefficients".into());
            }
            let n = spec.covariates.unwrap_or(100);
            let sigma = spec.noise_sd.unwrap_or(0.05);
            Ok(Box::new(LinearRegression::new(n, sigma).map_err(config_err)?))
        }
        "gp" => {
            reject_unused(spec, &["grid"])?;
            let domain = grid_domain(spec.grid, false)?;
            let prior = prior_override(config, GaussianProcess::default_model().prior().clone())?;
            Ok(Box::new(GaussianProcess::new(domain, prior).map_err(config_err)?))
        }
        "gp_known_smoothness" => {
            reject_unused(spec, &["grid", "nu"])?;
            let domain = grid_domain(spec.grid, false)?;
            let prior = prior_override(
                config,
                GaussianProcess::known_smoothness_default().prior().clone(),
            )?;
            let nu = spec.nu.unwrap_or(1.0);
            Ok(Box::new(
                GaussianProcess::with_known_smoothness(domain, prior, nu).map_err(config_err)?,
            ))
        }
        "schlather" => {
            reject_unused(spec, &["grid"])?;
            let domain = grid_domain(spec.grid, false)?;
            let prior = prior_override(config, Schlather::default_model().prior().clone())?;
            Ok(Box::new(Schlather::new(domain, prior).map_err(config_err)?))
        }
        "cond_extremes" => {
            reject_unused(spec, &["grid", "threshold"])?;
            let domain = grid_domain(spec.grid, true)?;
            let prior = prior_override(config, CondExtremes::default_model().prior().clone())?;
            let threshold = spec.threshold.unwrap_or_else(CondExtremes::default_threshold);
            Ok(Box::new(
                CondExtremes::new(domain, prior, threshold).map_err(config_err)?,
            ))
        }
        other => Err(format!("model: unknown id {other:?}")),
    }
}
