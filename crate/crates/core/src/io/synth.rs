//! Synthetic data from the model's own generative law.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::compositions::{validate_composition, LogBase};
use crate::design::{build_design, ColumnRole, Dataset, ModelSpec, ModeratorKind, Observation, ResponseTransform};
use crate::error::{Error, Result};
use crate::glm::sample_nb;
use crate::io::data::ColumnMapping;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family", deny_unknown_fields)]
pub enum ResponseLaw {
    /// `g(y) = η + ε`, `ε ~ N(0, σ²)`, with `g` the identity or `log_b`.
    Gaussian {
        sigma2: f64,
        #[serde(default)]
        response_transform: ResponseTransform,
    },
    /// Zero-inflated negative binomial counts with `log μ = η + log(offset)`.
    Zinb {
        theta: f64,
        pi: f64,
        #[serde(default)]
        offset_log_mean: f64,
        #[serde(default = "default_offset_sd")]
        offset_log_sd: f64,
    },
}

fn default_offset_sd() -> f64 {
    0.3
}

fn default_rate() -> f64 {
    0.16
}

fn default_log_sd() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

/// Generating parameters. Coefficients act on the sample-centered design
/// built from the generated covariates, so fitting the same model to the
/// output recovers them exactly when there is no noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub n: usize,
    pub part_names: Vec<String>,
    #[serde(default = "natural")]
    pub log_base: LogBase,
    #[serde(default = "default_true")]
    pub include_total: bool,
    #[serde(default)]
    pub moderator: ModeratorKind,
    /// Success probability of a binary moderator.
    #[serde(default = "default_rate")]
    pub moderator_rate: f64,
    #[serde(default)]
    pub intercept: f64,
    pub beta: Vec<f64>,
    #[serde(default)]
    pub beta_interaction: Vec<f64>,
    #[serde(default)]
    pub beta_total: f64,
    #[serde(default)]
    pub beta_moderator: f64,
    #[serde(default)]
    pub beta_total_interaction: f64,
    pub law: ResponseLaw,
    /// Mean of each part's log (natural); one value for all parts or one per part.
    #[serde(default)]
    pub part_log_mean: Vec<f64>,
    #[serde(default = "default_log_sd")]
    pub part_log_sd: f64,
    #[serde(default)]
    pub seed: u64,
}

fn natural() -> LogBase {
    LogBase::E
}

/// Everything used to generate a dataset, after recentering.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Truth {
    pub spec: SynthSpec,
    pub model: ModelSpec,
    /// `(label, value)` in design column order.
    pub coefficients: Vec<(String, f64)>,
    pub warnings: Vec<String>,
}

impl Truth {
    pub fn vector(&self) -> DVector<f64> {
        DVector::from_iterator(self.coefficients.len(), self.coefficients.iter().map(|(_, v)| *v))
    }
}

impl SynthSpec {
    pub fn parts(&self) -> usize {
        self.part_names.len()
    }

    pub fn model_spec(&self) -> ModelSpec {
        let transform = match self.law {
            ResponseLaw::Gaussian { response_transform, .. } => response_transform,
            ResponseLaw::Zinb { .. } => ResponseTransform::Identity,
        };
        ModelSpec {
            log_base: self.log_base,
            include_total: self.include_total,
            moderator: self.moderator,
            center_covariates: true,
            response_transform: transform,
            offset_column: matches!(self.law, ResponseLaw::Zinb { .. }).then(|| "offset".to_string()),
            part_names: self.part_names.clone(),
        }
    }

    /// Column names used when the dataset is written out.
    pub fn column_mapping(&self) -> ColumnMapping {
        let spec = self.model_spec();
        ColumnMapping {
            parts: self.part_names.clone(),
            response: "y".into(),
            moderator: spec.has_moderator().then(|| "z".to_string()),
            offset: spec.offset_column.clone(),
            group: None,
            time: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let d = self.parts();
        if d < 2 {
            return Err(Error::TooFewParts { found: d });
        }
        if self.n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        if self.beta.len() != d {
            return Err(Error::DimensionMismatch {
                what: "beta",
                expected: d,
                found: self.beta.len(),
            });
        }
        if !self.beta_interaction.is_empty() && self.beta_interaction.len() != d {
            return Err(Error::DimensionMismatch {
                what: "beta_interaction",
                expected: d,
                found: self.beta_interaction.len(),
            });
        }
        if !self.part_log_mean.is_empty() && self.part_log_mean.len() != 1 && self.part_log_mean.len() != d {
            return Err(Error::DimensionMismatch {
                what: "part_log_mean",
                expected: d,
                found: self.part_log_mean.len(),
            });
        }
        if !(0.0..=1.0).contains(&self.moderator_rate) {
            return Err(Error::Config("moderator_rate must lie in [0, 1]".into()));
        }
        if !(self.part_log_sd >= 0.0) {
            return Err(Error::Config("part_log_sd must be non-negative".into()));
        }
        match self.law {
            ResponseLaw::Gaussian { sigma2, .. } if !(sigma2 >= 0.0) => {
                Err(Error::Config("sigma2 must be non-negative".into()))
            }
            ResponseLaw::Zinb {
                theta,
                pi,
                offset_log_sd,
                ..
            } if !(theta > 0.0) || !(0.0..1.0).contains(&pi) || !(offset_log_sd >= 0.0) => Err(Error::Config(
                "zinb law needs theta > 0, 0 <= pi < 1, offset_log_sd >= 0".into(),
            )),
            ResponseLaw::Zinb { .. } if !self.log_base.is_natural() => Err(Error::BaseMismatch(self.log_base.value())),
            _ => Ok(()),
        }
    }
}

fn recenter(name: &str, values: &[f64], warnings: &mut Vec<String>) -> Vec<f64> {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if mean.abs() * values.len() as f64 > 1e-12 {
        warnings.push(format!(
            "{name} summed to {:e}; recentered to zero sum",
            mean * values.len() as f64
        ));
        values.iter().map(|v| v - mean).collect()
    } else {
        values.to_vec()
    }
}

/// Draws a dataset. Identical specs (including the seed) give bit-identical
/// output.
pub fn synth_generate(spec: &SynthSpec) -> Result<(Dataset, Truth)> {
    spec.validate()?;
    let d = spec.parts();
    let mut warnings = Vec::new();
    let beta = recenter("beta", &spec.beta, &mut warnings);
    let beta_i = if spec.beta_interaction.is_empty() {
        vec![0.0; d]
    } else {
        recenter("beta_interaction", &spec.beta_interaction, &mut warnings)
    };
    let mut resolved = spec.clone();
    resolved.beta = beta.clone();
    if spec.moderator != ModeratorKind::None {
        resolved.beta_interaction = beta_i.clone();
    }
    let model = spec.model_spec();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let part_sd = Normal::new(0.0, spec.part_log_sd).map_err(|e| Error::Config(e.to_string()))?;
    let log_mean = |j: usize| match spec.part_log_mean.len() {
        0 => 0.0,
        1 => spec.part_log_mean[0],
        _ => spec.part_log_mean[j],
    };
    let mut rows = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let parts: Vec<f64> = (0..d).map(|j| (log_mean(j) + part_sd.sample(&mut rng)).exp()).collect();
        let mut obs = Observation::new(validate_composition(parts)?, 0.0);
        obs.moderator = match spec.moderator {
            ModeratorKind::None => None,
            ModeratorKind::Binary => Some(if rng.random::<f64>() < spec.moderator_rate {
                1.0
            } else {
                0.0
            }),
            ModeratorKind::Numeric => Some(rng.sample(rand_distr::StandardNormal)),
        };
        if let ResponseLaw::Zinb {
            offset_log_mean,
            offset_log_sd,
            ..
        } = spec.law
        {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            obs.offset = Some((offset_log_mean + offset_log_sd * z).exp());
        }
        rows.push(obs);
    }
    let mut data = Dataset::new(rows)?;

    let x = build_design(&data, &model)?;
    let coefficients: Vec<(String, f64)> = x
        .column_roles
        .iter()
        .map(|role| {
            let v = match *role {
                ColumnRole::Intercept => spec.intercept,
                ColumnRole::Comp(j) => beta[j],
                ColumnRole::Moderator => spec.beta_moderator,
                ColumnRole::Interaction(j) => beta_i[j],
                ColumnRole::Total => spec.beta_total,
                ColumnRole::TotalInteraction => spec.beta_total_interaction,
            };
            (role.label(&spec.part_names), v)
        })
        .collect();
    let truth_vec = DVector::from_iterator(coefficients.len(), coefficients.iter().map(|(_, v)| *v));
    let mut eta = &x.values * &truth_vec;
    if let Some(o) = &x.offset {
        eta += o;
    }

    for (row, e) in data.rows.iter_mut().zip(eta.iter()) {
        row.response = match spec.law {
            ResponseLaw::Gaussian {
                sigma2,
                response_transform,
            } => {
                let noise = if sigma2 > 0.0 {
                    sigma2.sqrt() * rng.sample::<f64, _>(rand_distr::StandardNormal)
                } else {
                    0.0
                };
                match response_transform {
                    ResponseTransform::Identity => e + noise,
                    ResponseTransform::Log => spec.log_base.pow(e + noise),
                }
            }
            ResponseLaw::Zinb { theta, pi, .. } => {
                if rng.random::<f64>() < pi {
                    0.0
                } else {
                    sample_nb(&mut rng, e.exp(), theta)
                }
            }
        };
    }

    Ok((
        data,
        Truth {
            spec: resolved,
            model,
            coefficients,
            warnings,
        },
    ))
}
