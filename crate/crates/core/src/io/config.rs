//! Run configuration (JSON).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bayes::{ConstraintMode, PriorSpec, SamplerConfig};
use crate::compositions::LogBase;
use crate::design::{BlockReduction, ModelSpec, ModeratorKind, ResponseTransform};
use crate::error::{Error, Result};
use crate::glm::{GlmConstraint, ZinbOptions};
use crate::interpret::ReportOptions;
use crate::io::data::ColumnMapping;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Freq,
    BayesSoft,
    BayesHard,
    Zinb,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Freq => "freq",
            Backend::BayesSoft => "bayes_soft",
            Backend::BayesHard => "bayes_hard",
            Backend::Zinb => "zinb",
        }
    }

    pub fn parse(s: &str) -> Result<Backend> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| {
            Error::Config(format!(
                "unknown backend {s:?}; expected freq, bayes_soft, bayes_hard or zinb"
            ))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub log_base: LogBase,
    pub include_total: bool,
    pub moderator: ModeratorKind,
    pub center_covariates: bool,
    pub response_transform: ResponseTransform,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            log_base: LogBase::TWO,
            include_total: false,
            moderator: ModeratorKind::None,
            center_covariates: true,
            response_transform: ResponseTransform::Identity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorSection {
    pub coef_prior_precision: f64,
    pub intercept_precision: f64,
    /// `null` means `0.001 · D` per block.
    pub soft_variance: Option<f64>,
    pub noise_shape: f64,
    pub noise_rate: f64,
}

impl Default for PriorSection {
    fn default() -> Self {
        let p = PriorSpec::default();
        PriorSection {
            coef_prior_precision: p.coef_prior_precision,
            intercept_precision: p.intercept_precision,
            soft_variance: p.soft_variance,
            noise_shape: p.noise_shape,
            noise_rate: p.noise_rate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSection {
    pub chains: usize,
    pub draws: usize,
    pub burn_in: usize,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let s = SamplerConfig::default();
        SamplerSection {
            chains: s.chains,
            draws: s.draws,
            burn_in: s.burn_in,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GlmConstraintMode {
    #[default]
    Soft,
    Hard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZinbSection {
    pub constraint: GlmConstraintMode,
    /// Soft mode penalty variance; `null` means `0.001 · D` per block.
    pub soft_variance: Option<f64>,
    /// Hard mode block coordinates.
    pub reduction: BlockReduction,
    pub restarts: usize,
    pub perturbation_sd: f64,
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for ZinbSection {
    fn default() -> Self {
        let o = ZinbOptions::default();
        ZinbSection {
            constraint: GlmConstraintMode::Soft,
            soft_variance: None,
            reduction: BlockReduction::Orthonormal,
            restarts: o.restarts,
            perturbation_sd: o.perturbation_sd,
            grad_tol: o.grad_tol,
            max_iter: o.max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportSection {
    pub support_threshold: f64,
}

impl Default for ReportSection {
    fn default() -> Self {
        ReportSection {
            support_threshold: ReportOptions::default().support_threshold,
        }
    }
}

/// Everything a `fit` run needs. Relative paths resolve against the
/// directory of the configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub input: Option<PathBuf>,
    pub columns: ColumnMapping,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub backend: Backend,
    #[serde(default)]
    pub prior: PriorSection,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub zinb: ZinbSection,
    #[serde(default)]
    pub lag: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub report: ReportSection,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<(RunConfig, Vec<u8>)> {
        let bytes = std::fs::read(path)?;
        let text = std::str::from_utf8(&bytes).map_err(|e| Error::Config(e.to_string()))?;
        Ok((RunConfig::from_json(text)?, bytes))
    }

    pub fn validate(&self) -> Result<()> {
        self.columns.validate()?;
        let has_moderator = self.model.moderator != ModeratorKind::None;
        if has_moderator && self.columns.moderator.is_none() {
            return Err(Error::Config(
                "model.moderator is set but columns.moderator is missing".into(),
            ));
        }
        if !has_moderator && self.columns.moderator.is_some() {
            return Err(Error::Config(
                "columns.moderator is given but model.moderator is none".into(),
            ));
        }
        if self.lag > 0 && self.columns.time.is_none() {
            return Err(Error::Config("lag needs columns.time".into()));
        }
        if self.backend == Backend::Zinb {
            if !self.model.log_base.is_natural() {
                return Err(Error::Config("the zinb backend needs model.log_base = \"e\"".into()));
            }
            if self.model.response_transform != ResponseTransform::Identity {
                return Err(Error::Config(
                    "the zinb backend models raw counts; use response_transform = identity".into(),
                ));
            }
            if self.zinb.restarts == 0 {
                return Err(Error::Config("zinb.restarts must be at least 1".into()));
            }
        }
        if matches!(self.backend, Backend::BayesSoft | Backend::BayesHard)
            && (self.sampler.chains == 0 || self.sampler.draws == 0)
        {
            return Err(Error::Config(
                "sampler.chains and sampler.draws must be positive".into(),
            ));
        }
        if !(0.5..1.0).contains(&self.report.support_threshold) {
            return Err(Error::Config("report.support_threshold must lie in [0.5, 1)".into()));
        }
        Ok(())
    }

    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec {
            log_base: self.model.log_base,
            include_total: self.model.include_total,
            moderator: self.model.moderator,
            center_covariates: self.model.center_covariates,
            response_transform: self.model.response_transform,
            offset_column: self.columns.offset.clone(),
            part_names: self.columns.parts.clone(),
        }
    }

    pub fn prior_spec(&self) -> PriorSpec {
        PriorSpec {
            coef_prior_precision: self.prior.coef_prior_precision,
            intercept_precision: self.prior.intercept_precision,
            constraint_mode: if self.backend == Backend::BayesHard {
                ConstraintMode::Hard
            } else {
                ConstraintMode::Soft
            },
            soft_variance: self.prior.soft_variance,
            noise_shape: self.prior.noise_shape,
            noise_rate: self.prior.noise_rate,
        }
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            chains: self.sampler.chains,
            draws: self.sampler.draws,
            burn_in: self.sampler.burn_in,
            seed: self.seed,
            keep_samples: false,
        }
    }

    pub fn zinb_options(&self) -> ZinbOptions {
        ZinbOptions {
            constraint: match self.zinb.constraint {
                GlmConstraintMode::Soft => GlmConstraint::Soft {
                    variance: self.zinb.soft_variance,
                },
                GlmConstraintMode::Hard => GlmConstraint::Hard {
                    reduction: self.zinb.reduction,
                },
            },
            restarts: self.zinb.restarts,
            perturbation_sd: self.zinb.perturbation_sd,
            grad_tol: self.zinb.grad_tol,
            max_iter: self.zinb.max_iter,
            seed: self.seed,
        }
    }

    pub fn report_options(&self) -> ReportOptions {
        ReportOptions {
            support_threshold: self.report.support_threshold,
        }
    }
}
