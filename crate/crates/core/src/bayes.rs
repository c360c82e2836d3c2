//! Bayesian Gaussian linear model with zero-sum coefficient blocks.
//!
//! Soft mode treats each block sum as a pseudo-observation `0 = c_Bᵀβ + e`
//! with fixed variance and runs a two-block Gibbs sampler over `(β, σ²)`.
//! Hard mode works in an orthonormal basis of the constrained subspace, where
//! the conjugate Normal–Inverse-Gamma posterior is available in closed form.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::design::{constraint_basis, BlockReduction, ColumnRole, DesignMatrix};
use crate::error::{Error, Result};
use crate::freq::{DesignMeta, RANK_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMode {
    #[default]
    Soft,
    Hard,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorSpec {
    /// Precision of the zero-mean prior on every non-intercept coefficient.
    pub coef_prior_precision: f64,
    pub intercept_precision: f64,
    pub constraint_mode: ConstraintMode,
    /// Variance of each block-sum pseudo-observation; `None` means
    /// `0.001 · D` for a block of `D` coefficients.
    pub soft_variance: Option<f64>,
    /// Inverse-gamma shape and rate of the noise variance prior.
    pub noise_shape: f64,
    pub noise_rate: f64,
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec {
            coef_prior_precision: 1e-4,
            intercept_precision: 0.0,
            constraint_mode: ConstraintMode::Soft,
            soft_variance: None,
            noise_shape: 1e-3,
            noise_rate: 1e-3,
        }
    }
}

impl PriorSpec {
    pub fn soft_variance_for(&self, block_len: usize) -> f64 {
        self.soft_variance.unwrap_or(0.001 * block_len as f64)
    }

    fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::InvalidPrior(format!("{what} = {v}")));
        if !(self.coef_prior_precision >= 0.0) {
            return bad("coef_prior_precision", self.coef_prior_precision);
        }
        if !(self.intercept_precision >= 0.0) {
            return bad("intercept_precision", self.intercept_precision);
        }
        if !(self.noise_shape >= 0.0) {
            return bad("noise_shape", self.noise_shape);
        }
        if !(self.noise_rate >= 0.0) {
            return bad("noise_rate", self.noise_rate);
        }
        if let Some(v) = self.soft_variance {
            if !(v > 0.0 && v.is_finite()) {
                return bad("soft_variance", v);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub chains: usize,
    pub draws: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Keep the pooled draws in the summary.
    pub keep_samples: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            chains: 4,
            draws: 5000,
            burn_in: 1000,
            seed: 0,
            keep_samples: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PosteriorMode {
    Analytic,
    Sampled,
}

#[derive(Debug, Clone)]
pub struct PosteriorSummary {
    pub mean: DVector<f64>,
    pub sd: DVector<f64>,
    /// `max(P(β > 0), P(β < 0))` per coefficient.
    pub sign_prob: DVector<f64>,
    /// Pooled draws, one row per draw, chains in order.
    pub samples: Option<DMatrix<f64>>,
    pub mode: PosteriorMode,
    /// Split potential scale reduction per coefficient (sampled mode).
    pub rhat: Option<DVector<f64>>,
    pub sigma2_mean: f64,
    pub design_meta: DesignMeta,
}

impl PosteriorSummary {
    pub fn coefficient(&self, role: ColumnRole) -> Option<f64> {
        self.design_meta.column_index(role).map(|i| self.mean[i])
    }
}

pub fn sign_probability(post: &PosteriorSummary, column: ColumnRole) -> Result<f64> {
    let i = post
        .design_meta
        .column_index(column)
        .ok_or_else(|| Error::UnknownColumn(column.label(&post.design_meta.spec.part_names)))?;
    Ok(post.sign_prob[i])
}

/// Fraction of stored draws on the majority side of zero.
pub fn draw_sign_fraction(post: &PosteriorSummary, column: ColumnRole) -> Result<f64> {
    let i = post
        .design_meta
        .column_index(column)
        .ok_or_else(|| Error::UnknownColumn(column.label(&post.design_meta.spec.part_names)))?;
    let samples = post
        .samples
        .as_ref()
        .ok_or_else(|| Error::Config("posterior has no stored draws".into()))?;
    let col = samples.column(i);
    let positive = col.iter().filter(|v| **v > 0.0).count() as f64 / col.len() as f64;
    Ok(positive.max(1.0 - positive))
}

/// Dispatches on `prior.constraint_mode`.
pub fn fit_bayes(
    x: &DesignMatrix,
    y: &DVector<f64>,
    prior: &PriorSpec,
    sampler: &SamplerConfig,
) -> Result<PosteriorSummary> {
    match prior.constraint_mode {
        ConstraintMode::Hard => fit_bayes_hard(x, y, prior, sampler),
        ConstraintMode::Soft | ConstraintMode::None => {
            let blocks = if prior.constraint_mode == ConstraintMode::Soft {
                x.constraint_blocks.clone()
            } else {
                Vec::new()
            };
            prior.validate()?;
            let (y, intercept) = prepare(x, y)?;
            let mut post = gibbs_soft(&x.values, &y, &blocks, intercept, prior, sampler)?;
            post.design_meta = DesignMeta::of(x);
            Ok(post)
        }
    }
}

pub fn fit_bayes_soft(
    x: &DesignMatrix,
    y: &DVector<f64>,
    prior: &PriorSpec,
    sampler: &SamplerConfig,
) -> Result<PosteriorSummary> {
    if prior.constraint_mode != ConstraintMode::Soft {
        return Err(Error::NotSoftMode);
    }
    fit_bayes(x, y, prior, sampler)
}

/// Closed-form posterior under the hard constraint. Draws are exact and are
/// produced only when `sampler.keep_samples` is set.
pub fn fit_bayes_hard(
    x: &DesignMatrix,
    y: &DVector<f64>,
    prior: &PriorSpec,
    sampler: &SamplerConfig,
) -> Result<PosteriorSummary> {
    if prior.constraint_mode != ConstraintMode::Hard {
        return Err(Error::NotHardMode);
    }
    prior.validate()?;
    let (y, intercept) = prepare(x, y)?;
    let mut post = hard_analytic(&x.values, &y, &x.constraint_blocks, intercept, prior, sampler)?;
    post.design_meta = DesignMeta::of(x);
    Ok(post)
}

/// Gibbs sampler for the hard-constraint model, in the same reduced
/// coordinates as [`fit_bayes_hard`]. Used to check the sampler machinery
/// against the closed form.
pub fn fit_bayes_hard_gibbs(
    x: &DesignMatrix,
    y: &DVector<f64>,
    prior: &PriorSpec,
    sampler: &SamplerConfig,
) -> Result<PosteriorSummary> {
    if prior.constraint_mode != ConstraintMode::Hard {
        return Err(Error::NotHardMode);
    }
    prior.validate()?;
    let (y, intercept) = prepare(x, y)?;
    let mut post = hard_gibbs(&x.values, &y, &x.constraint_blocks, intercept, prior, sampler)?;
    post.design_meta = DesignMeta::of(x);
    Ok(post)
}

fn prepare(x: &DesignMatrix, y: &DVector<f64>) -> Result<(DVector<f64>, Option<usize>)> {
    if y.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            what: "response",
            expected: x.nrows(),
            found: y.len(),
        });
    }
    let y = match &x.offset {
        Some(o) => y - o,
        None => y.clone(),
    };
    Ok((y, x.column_index(ColumnRole::Intercept)))
}

fn placeholder_meta() -> DesignMeta {
    DesignMeta {
        column_roles: Vec::new(),
        constraint_blocks: Vec::new(),
        spec: crate::design::ModelSpec::log_contrast(Vec::new()),
    }
}

fn prior_precisions(p: usize, intercept: Option<usize>, prior: &PriorSpec) -> DVector<f64> {
    DVector::from_fn(p, |j, _| {
        if Some(j) == intercept {
            prior.intercept_precision
        } else {
            prior.coef_prior_precision
        }
    })
}

fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

fn standard_normals<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

fn inv_gamma<R: Rng>(rng: &mut R, shape: f64, rate: f64) -> Option<f64> {
    let g = Gamma::new(shape, 1.0 / rate).ok()?.sample(rng);
    let v = 1.0 / g;
    (v.is_finite() && v > 0.0).then_some(v)
}

/// Residual variance of the minimum-norm least-squares fit, used to start
/// the chains.
fn initial_sigma2(x: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let n = x.nrows();
    let fit = x.clone().svd(true, true).solve(y, RANK_TOL).ok();
    let rss = match fit {
        Some(b) => (y - x * b).norm_squared(),
        None => y.norm_squared(),
    };
    let df = n.saturating_sub(x.ncols()).max(1) as f64;
    (rss / df).max(1e-12 * (1.0 + y.norm_squared() / n as f64))
}

/// Per-chain output: raw draws (row-major, `draws × p`), Rao-Blackwell
/// conditional means and variances accumulated over draws, and σ² draws.
struct ChainOut {
    draws: Vec<f64>,
    cond_mean_sum: DVector<f64>,
    cond_mean_sq_sum: DVector<f64>,
    cond_var_sum: DVector<f64>,
    pos_prob_sum: DVector<f64>,
    sigma2_sum: f64,
}

impl ChainOut {
    fn new(p: usize, draws: usize) -> ChainOut {
        ChainOut {
            draws: Vec::with_capacity(draws * p),
            cond_mean_sum: DVector::zeros(p),
            cond_mean_sq_sum: DVector::zeros(p),
            cond_var_sum: DVector::zeros(p),
            pos_prob_sum: DVector::zeros(p),
            sigma2_sum: 0.0,
        }
    }

    fn record(&mut self, beta: &DVector<f64>, mean: &DVector<f64>, var: &DVector<f64>, sigma2: f64) {
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        self.draws.extend(beta.iter());
        for j in 0..mean.len() {
            self.cond_mean_sum[j] += mean[j];
            self.cond_mean_sq_sum[j] += mean[j] * mean[j];
            self.cond_var_sum[j] += var[j];
            let sd = var[j].max(0.0).sqrt();
            self.pos_prob_sum[j] += if sd > 0.0 {
                normal.cdf(mean[j] / sd)
            } else if mean[j] > 0.0 {
                1.0
            } else if mean[j] < 0.0 {
                0.0
            } else {
                0.5
            };
        }
        self.sigma2_sum += sigma2;
    }
}

/// Pools chains into a summary. Means, sds and sign probabilities are
/// Rao-Blackwellized: averages over draws of the Gaussian conditional
/// moments of β given σ², with sd from the law of total variance.
fn pool(chains: Vec<ChainOut>, p: usize, sampler: &SamplerConfig) -> PosteriorSummary {
    let total = (chains.len() * sampler.draws) as f64;
    let mut mean_sum = DVector::zeros(p);
    let mut mean_sq_sum = DVector::zeros(p);
    let mut var_sum = DVector::zeros(p);
    let mut pos_sum = DVector::zeros(p);
    let mut sigma2_sum = 0.0;
    for c in &chains {
        mean_sum += &c.cond_mean_sum;
        mean_sq_sum += &c.cond_mean_sq_sum;
        var_sum += &c.cond_var_sum;
        pos_sum += &c.pos_prob_sum;
        sigma2_sum += c.sigma2_sum;
    }
    let mean = mean_sum / total;
    let sd = DVector::from_fn(p, |j, _| {
        let between = (mean_sq_sum[j] / total - mean[j] * mean[j]).max(0.0);
        (var_sum[j] / total + between).sqrt()
    });
    let sign_prob = (pos_sum / total).map(|q: f64| q.max(1.0 - q).clamp(0.5, 1.0));
    let rhat = split_rhat(&chains, p, sampler.draws);
    let samples = sampler.keep_samples.then(|| {
        let mut all = Vec::with_capacity(total as usize * p);
        for c in &chains {
            all.extend_from_slice(&c.draws);
        }
        DMatrix::from_row_slice(total as usize, p, &all)
    });
    PosteriorSummary {
        mean,
        sd,
        sign_prob,
        samples,
        mode: PosteriorMode::Sampled,
        rhat,
        sigma2_mean: sigma2_sum / total,
        design_meta: placeholder_meta(),
    }
}

/// Split-R̂ over the raw draws; `None` with fewer than four draws per chain.
fn split_rhat(chains: &[ChainOut], p: usize, draws: usize) -> Option<DVector<f64>> {
    let half = draws / 2;
    if half < 2 {
        return None;
    }
    Some(DVector::from_fn(p, |j, _| {
        let mut means = Vec::new();
        let mut vars = Vec::new();
        for c in chains {
            for h in 0..2 {
                let seq: Vec<f64> = (h * half..(h + 1) * half).map(|t| c.draws[t * p + j]).collect();
                let m = seq.iter().sum::<f64>() / half as f64;
                let v = seq.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (half - 1) as f64;
                means.push(m);
                vars.push(v);
            }
        }
        let k = means.len() as f64;
        let w = vars.iter().sum::<f64>() / k;
        if w <= 0.0 {
            return 1.0;
        }
        let grand = means.iter().sum::<f64>() / k;
        let b_over_n = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (k - 1.0);
        let n = half as f64;
        (((n - 1.0) / n * w + b_over_n) / w).sqrt()
    }))
}

/// Mean, covariance diagonal and a draw from `N(Q⁻¹ r, Q⁻¹)`.
fn gaussian_conditional<R: Rng>(
    q: DMatrix<f64>,
    r: &DVector<f64>,
    rng: &mut R,
) -> Option<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    let chol: Cholesky<f64, Dyn> = q.cholesky()?;
    let mean = chol.solve(r);
    let var = chol.inverse().diagonal();
    let z = standard_normals(rng, r.len());
    // Q = L Lᵀ, so L⁻ᵀ z has covariance Q⁻¹.
    let dev = chol.l().transpose().solve_upper_triangular(&z)?;
    Some((mean.clone(), var, mean + dev))
}

fn check_draw(v: &DVector<f64>, sigma2: f64, chain: usize, iteration: usize) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) && sigma2.is_finite() {
        Ok(())
    } else {
        Err(Error::SamplerDivergence { chain, iteration })
    }
}

fn gibbs_soft(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    blocks: &[Vec<usize>],
    intercept: Option<usize>,
    prior: &PriorSpec,
    sampler: &SamplerConfig,
) -> Result<PosteriorSummary> {
    let (n, p) = x.shape();
    let xtx = x.tr_mul(x);
    let xty = x.tr_mul(y);
    let mut fixed = DMatrix::from_diagonal(&prior_precisions(p, intercept, prior));
    for block in blocks {
        let w = 1.0 / prior.soft_variance_for(block.len());
        for &a in block {
            for &b in block {
                fixed[(a, b)] += w;
            }
        }
    }
    let shape = prior.noise_shape + 0.5 * n as f64;
    let start = initial_sigma2(x, y);

    let chains = (0..sampler.chains)
        .into_par_iter()
        .map(|chain| -> Result<ChainOut> {
            let mut rng = chain_rng(sampler.seed, chain);
            let mut sigma2 = start * 2f64.powf(chain as f64 - 1.5);
            let mut out = ChainOut::new(p, sampler.draws);
            for it in 0..sampler.burn_in + sampler.draws {
                let q = &fixed + &xtx / sigma2;
                let r = &xty / sigma2;
                let (mean, var, beta) =
                    gaussian_conditional(q, &r, &mut rng).ok_or(Error::SamplerDivergence { chain, iteration: it })?;
                check_draw(&beta, sigma2, chain, it)?;
                if it >= sampler.burn_in {
                    out.record(&beta, &mean, &var, sigma2);
                }
                let rss = (y - x * &beta).norm_squared();
                sigma2 = inv_gamma(&mut rng, shape, prior.noise_rate + 0.5 * rss)
                    .ok_or(Error::SamplerDivergence { chain, iteration: it })?;
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pool(chains, p, sampler))
}

/// Reduced design `X M` with `M` an orthonormal basis of the constrained
/// subspace, and the prior precisions of the reduced coordinates.
fn reduce(
    x: &DMatrix<f64>,
    blocks: &[Vec<usize>],
    intercept: Option<usize>,
    prior: &PriorSpec,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DVector<f64>)> {
    let p = x.ncols();
    let m = constraint_basis(p, blocks, BlockReduction::Orthonormal)?;
    let xr = x * &m;
    let full = prior_precisions(p, intercept, prior);
    // The basis is orthonormal and maps unconstrained columns through the
    // identity, so a reduced coordinate inherits the precision of the
    // original coefficients it spans.
    let reduced = DVector::from_fn(m.ncols(), |k, _| {
        (0..p)
            .find(|&j| m[(j, k)] != 0.0)
            .map(|j| full[j])
            .unwrap_or(prior.coef_prior_precision)
    });
    Ok((m, xr, reduced))
}

struct NigPosterior {
    mean: DVector<f64>,
    precision_chol: Cholesky<f64, Dyn>,
    shape: f64,
    rate: f64,
}

fn nig_posterior(
    xr: &DMatrix<f64>,
    y: &DVector<f64>,
    precisions: &DVector<f64>,
    prior: &PriorSpec,
) -> Result<NigPosterior> {
    let lambda = xr.tr_mul(xr) + DMatrix::from_diagonal(precisions);
    let chol = lambda.clone().cholesky().ok_or(Error::RankDeficient { ratio: 0.0 })?;
    let xty = xr.tr_mul(y);
    let mean = chol.solve(&xty);
    let resid = y - xr * &mean;
    // yᵀy − μᵀΛμ written as a sum of non-negative terms.
    let quad = resid.norm_squared() + mean.component_mul(precisions).dot(&mean);
    let shape = prior.noise_shape + 0.5 * y.len() as f64;
    let rate = prior.noise_rate + 0.5 * quad;
    if !(shape > 0.0 && rate > 0.0) {
        return Err(Error::InvalidPrior("improper noise posterior".into()));
    }
    Ok(NigPosterior {
        mean,
        precision_chol: chol,
        shape,
        rate,
    })
}

fn hard_analytic(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    blocks: &[Vec<usize>],
    intercept: Option<usize>,
    prior: &PriorSpec,
    sampler: &SamplerConfig,
) -> Result<PosteriorSummary> {
    let (m, xr, precisions) = reduce(x, blocks, intercept, prior)?;
    let sv = xr.clone().svd(false, false).singular_values;
    if sv.max() <= 0.0 || sv.min() / sv.max() < RANK_TOL && precisions.min() == 0.0 {
        return Err(Error::RankDeficient {
            ratio: if sv.max() > 0.0 { sv.min() / sv.max() } else { 0.0 },
        });
    }
    let post = nig_posterior(&xr, y, &precisions, prior)?;
    let p = x.ncols();
    let mean = &m * &post.mean;
    let cov_unit = &m * post.precision_chol.inverse() * m.transpose();
    let df = 2.0 * post.shape;
    let scale2 = post.rate / post.shape;
    // Marginal of each coefficient: Student-t with `df` degrees of freedom,
    // location `mean`, squared scale `scale2 · cov_unit_jj`.
    let var_factor = if df > 2.0 {
        scale2 * df / (df - 2.0)
    } else {
        f64::INFINITY
    };
    let sd = DVector::from_fn(p, |j, _| (var_factor * cov_unit[(j, j)].max(0.0)).sqrt());
    let t = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::InvalidPrior(e.to_string()))?;
    let sign_prob = DVector::from_fn(p, |j, _| {
        let s = (scale2 * cov_unit[(j, j)].max(0.0)).sqrt();
        if s > 0.0 {
            let q = t.cdf(mean[j] / s);
            q.max(1.0 - q)
        } else if mean[j] != 0.0 {
            1.0
        } else {
            0.5
        }
    });

    let samples = if sampler.keep_samples {
        let total = sampler.chains * sampler.draws;
        let rows = (0..sampler.chains)
            .into_par_iter()
            .map(|chain| {
                let mut rng = chain_rng(sampler.seed, chain);
                let mut rows = Vec::with_capacity(sampler.draws * p);
                for it in 0..sampler.draws {
                    let sigma2 = inv_gamma(&mut rng, post.shape, post.rate)
                        .ok_or(Error::SamplerDivergence { chain, iteration: it })?;
                    let z = standard_normals(&mut rng, post.mean.len());
                    let dev = post
                        .precision_chol
                        .l()
                        .transpose()
                        .solve_upper_triangular(&z)
                        .ok_or(Error::SamplerDivergence { chain, iteration: it })?;
                    let gamma = &post.mean + dev * sigma2.sqrt();
                    rows.extend((&m * gamma).iter());
                }
                Ok(rows)
            })
            .collect::<Result<Vec<_>>>()?;
        Some(DMatrix::from_row_slice(total, p, &rows.concat()))
    } else {
        None
    };

    Ok(PosteriorSummary {
        mean,
        sd,
        sign_prob,
        samples,
        mode: PosteriorMode::Analytic,
        rhat: None,
        sigma2_mean: if post.shape > 1.0 {
            post.rate / (post.shape - 1.0)
        } else {
            f64::INFINITY
        },
        design_meta: placeholder_meta(),
    })
}

fn hard_gibbs(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    blocks: &[Vec<usize>],
    intercept: Option<usize>,
    prior: &PriorSpec,
    sampler: &SamplerConfig,
) -> Result<PosteriorSummary> {
    let (m, xr, precisions) = reduce(x, blocks, intercept, prior)?;
    let (n, k) = xr.shape();
    let p = x.ncols();
    let xtx = xr.tr_mul(&xr);
    let xty = xr.tr_mul(y);
    let prior_prec = DMatrix::from_diagonal(&precisions);
    let unit_cov = (&prior_prec + &xtx)
        .try_inverse()
        .ok_or(Error::RankDeficient { ratio: 0.0 })?;
    // Conditional variances of β = Mγ given σ² are σ² · diag(M (Λ₀ + XᵀX)⁻¹ Mᵀ).
    let unit_var = (&m * unit_cov * m.transpose()).diagonal();
    // γ | σ² ~ N(0, σ² Λ₀⁻¹) contributes k/2 to the σ² shape.
    let shape = prior.noise_shape + 0.5 * (n + k) as f64;
    let start = initial_sigma2(x, y);

    let chains = (0..sampler.chains)
        .into_par_iter()
        .map(|chain| -> Result<ChainOut> {
            let mut rng = chain_rng(sampler.seed, chain);
            let mut sigma2 = start * 2f64.powf(chain as f64 - 1.5);
            let mut out = ChainOut::new(p, sampler.draws);
            for it in 0..sampler.burn_in + sampler.draws {
                let q = (&prior_prec + &xtx) / sigma2;
                let r = &xty / sigma2;
                let (mean, _, gamma) =
                    gaussian_conditional(q, &r, &mut rng).ok_or(Error::SamplerDivergence { chain, iteration: it })?;
                check_draw(&gamma, sigma2, chain, it)?;
                if it >= sampler.burn_in {
                    out.record(&(&m * &gamma), &(&m * &mean), &(&unit_var * sigma2), sigma2);
                }
                let rss = (y - &xr * &gamma).norm_squared();
                let prior_quad = gamma.component_mul(&precisions).dot(&gamma);
                sigma2 = inv_gamma(&mut rng, shape, prior.noise_rate + 0.5 * (rss + prior_quad))
                    .ok_or(Error::SamplerDivergence { chain, iteration: it })?;
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut post = pool(chains, p, sampler);
    // The check against the closed form uses plain draw moments, so report
    // those rather than the conditional-moment averages.
    if let Some(s) = &post.samples {
        let total = s.nrows() as f64;
        post.mean = DVector::from_fn(p, |j, _| s.column(j).sum() / total);
        post.sd = DVector::from_fn(p, |j, _| {
            let mu = post.mean[j];
            (s.column(j).iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (total - 1.0)).sqrt()
        });
    }
    Ok(post)
}
