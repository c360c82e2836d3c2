//! Zero-inflated negative binomial regression with a log link.
//!
//! Counts follow `0` with probability `π + (1 − π) f(0)` and `y > 0` with
//! probability `(1 − π) f(y)`, where `f` is the negative binomial pmf with
//! mean `μ = exp(xᵀβ + offset)` and variance `μ + μ²/θ`. The zero-inflation
//! probability `π` is a single scalar. Fixed effects only.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::bayes::{PosteriorMode, PosteriorSummary};
use crate::design::{
    build_design, constraint_basis, BlockReduction, Dataset, DesignMatrix, ModelSpec, ResponseTransform,
};
use crate::error::{Error, Result};
use crate::freq::{fit_constrained_ols, DesignMeta};
use crate::optim::{minimize, BfgsOptions, Minimum};

/// Gradient ∞-norm above which the best restart is reported as failed.
pub const CONVERGENCE_LIMIT: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct ZinbParams {
    pub beta: DVector<f64>,
    pub log_theta: f64,
    pub logit_pi: f64,
}

impl ZinbParams {
    pub fn theta(&self) -> f64 {
        self.log_theta.exp()
    }

    pub fn pi(&self) -> f64 {
        1.0 / (1.0 + (-self.logit_pi).exp())
    }

    /// `(β, log θ, logit π)` stacked.
    pub fn to_vector(&self) -> DVector<f64> {
        let p = self.beta.len();
        let mut v = DVector::zeros(p + 2);
        v.rows_mut(0, p).copy_from(&self.beta);
        v[p] = self.log_theta;
        v[p + 1] = self.logit_pi;
        v
    }

    pub fn from_vector(v: &DVector<f64>) -> ZinbParams {
        let p = v.len() - 2;
        ZinbParams {
            beta: v.rows(0, p).into_owned(),
            log_theta: v[p],
            logit_pi: v[p + 1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum GlmConstraint {
    /// Gaussian penalty `−(Σ_B β)² / (2v)` per block; `v = 0.001 · D` unless
    /// given.
    Soft { variance: Option<f64> },
    /// Optimization in reduced block coordinates.
    Hard { reduction: BlockReduction },
}

impl Default for GlmConstraint {
    fn default() -> Self {
        GlmConstraint::Soft { variance: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZinbOptions {
    pub constraint: GlmConstraint,
    /// Total optimizer runs; the first starts from the moment-based start,
    /// the rest from seeded perturbations of it.
    pub restarts: usize,
    pub perturbation_sd: f64,
    pub grad_tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for ZinbOptions {
    fn default() -> Self {
        ZinbOptions {
            constraint: GlmConstraint::default(),
            restarts: 5,
            perturbation_sd: 0.1,
            grad_tol: 1e-6,
            max_iter: 500,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GlmFit {
    pub params: ZinbParams,
    /// Unpenalized log-likelihood at the optimum.
    pub loglik: f64,
    /// Objective actually maximized (log-likelihood minus soft penalty).
    pub objective: f64,
    /// Hessian of the objective in `(β, log θ, logit π)` coordinates.
    pub hessian: DMatrix<f64>,
    /// Laplace covariance; under the hard constraint it is supported on the
    /// constrained subspace.
    pub approx_cov: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Gradient ∞-norm of the objective in optimization coordinates.
    pub grad_norm: f64,
    pub restart_objectives: Vec<f64>,
    pub design_meta: DesignMeta,
}

impl GlmFit {
    pub fn std_errors(&self) -> DVector<f64> {
        self.approx_cov.diagonal().map(|v| v.max(0.0).sqrt())
    }

    /// Gaussian summary of the coefficients `β` for sign probabilities.
    pub fn posterior_summary(&self) -> PosteriorSummary {
        let p = self.params.beta.len();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        let sd = self.std_errors().rows(0, p).into_owned();
        let mean = self.params.beta.clone();
        let sign_prob = DVector::from_fn(p, |j, _| {
            if sd[j] > 0.0 {
                normal.cdf(mean[j].abs() / sd[j])
            } else if mean[j] != 0.0 {
                1.0
            } else {
                0.5
            }
        });
        PosteriorSummary {
            mean,
            sd,
            sign_prob,
            samples: None,
            mode: PosteriorMode::Analytic,
            rhat: None,
            sigma2_mean: f64::NAN,
            design_meta: self.design_meta.clone(),
        }
    }
}

/// Checks that every response is a non-negative integer.
pub fn validate_counts(y: &DVector<f64>) -> Result<()> {
    for (index, &value) in y.iter().enumerate() {
        if !(value >= 0.0) {
            return Err(Error::NegativeCount { index, value });
        }
        if value.fract() != 0.0 || !value.is_finite() {
            return Err(Error::NonIntegerCount { index, value });
        }
    }
    Ok(())
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Counts below this use exact finite sums for the gamma-function ratios.
const SMALL_COUNT: f64 = 64.0;

/// `ln Γ(y + θ) − ln Γ(θ)`.
fn ln_gamma_ratio(y: f64, theta: f64) -> f64 {
    if y < SMALL_COUNT {
        (0..y as usize).map(|k| (theta + k as f64).ln()).sum()
    } else {
        ln_gamma(y + theta) - ln_gamma(theta)
    }
}

/// `ψ(y + θ) − ψ(θ)`.
fn digamma_diff(y: f64, theta: f64) -> f64 {
    if y < SMALL_COUNT {
        (0..y as usize).map(|k| 1.0 / (theta + k as f64)).sum()
    } else {
        digamma(y + theta) - digamma(theta)
    }
}

/// Log-likelihood and its gradient in `(β, log θ, logit π)` on raw arrays.
fn loglik_raw(
    x: &DMatrix<f64>,
    offset: Option<&DVector<f64>>,
    y: &DVector<f64>,
    v: &DVector<f64>,
) -> (f64, DVector<f64>) {
    let p = x.ncols();
    let beta = v.rows(0, p);
    let log_theta = v[p];
    let rho = v[p + 1];
    let theta = log_theta.exp();
    let log_pi = -softplus(-rho);
    let log_1m_pi = -softplus(rho);
    let pi = log_pi.exp();

    let mut eta = x * beta;
    if let Some(o) = offset {
        eta += o;
    }

    let mut total = 0.0;
    let mut d_eta = DVector::zeros(y.len());
    let mut d_log_theta = 0.0;
    let mut d_rho = 0.0;
    for i in 0..y.len() {
        let yi = y[i];
        let e = eta[i];
        let mu = e.exp();
        // log(θ + μ) and log(θ/(θ+μ)) without overflow.
        let log_tm = log_add_exp(log_theta, e);
        let log_ratio = log_theta - log_tm;
        let mu_frac = (e - log_tm).exp(); // μ / (θ + μ)
        let theta_frac = log_ratio.exp(); // θ / (θ + μ)
        let log_p0 = theta * log_ratio;
        if yi == 0.0 {
            let log_nb0 = log_1m_pi + log_p0;
            let l = log_add_exp(log_pi, log_nb0);
            total += l;
            let w = (log_nb0 - l).exp();
            d_eta[i] = -w * theta * mu_frac;
            d_log_theta += w * theta * (log_ratio + mu_frac);
            // π(1 − π)(1 − f(0)) / (π + (1 − π) f(0))
            d_rho += (log_pi + log_1m_pi - l).exp() * -log_p0.exp_m1();
        } else {
            let log_f = ln_gamma_ratio(yi, theta) - ln_gamma(yi + 1.0) + theta * log_ratio + yi * (e - log_tm);
            total += log_1m_pi + log_f;
            d_eta[i] = theta_frac * (yi - mu);
            d_log_theta += theta * (digamma_diff(yi, theta) + log_ratio + (mu - yi) / (theta + mu));
            d_rho -= pi;
        }
    }
    let mut grad = DVector::zeros(p + 2);
    grad.rows_mut(0, p).copy_from(&x.tr_mul(&d_eta));
    grad[p] = d_log_theta;
    grad[p + 1] = d_rho;
    (total, grad)
}

fn check_inputs(params: &ZinbParams, x: &DesignMatrix, y: &DVector<f64>) -> Result<()> {
    if params.beta.len() != x.ncols() {
        return Err(Error::DimensionMismatch {
            what: "coefficients",
            expected: x.ncols(),
            found: params.beta.len(),
        });
    }
    if y.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            what: "response",
            expected: x.nrows(),
            found: y.len(),
        });
    }
    validate_counts(y)
}

pub fn zinb_loglik(params: &ZinbParams, x: &DesignMatrix, y: &DVector<f64>) -> Result<f64> {
    check_inputs(params, x, y)?;
    Ok(loglik_raw(&x.values, x.offset.as_ref(), y, &params.to_vector()).0)
}

/// Analytic gradient in `(β, log θ, logit π)`.
pub fn zinb_loglik_grad(params: &ZinbParams, x: &DesignMatrix, y: &DVector<f64>) -> Result<DVector<f64>> {
    check_inputs(params, x, y)?;
    Ok(loglik_raw(&x.values, x.offset.as_ref(), y, &params.to_vector()).1)
}

/// The maximized objective in full coordinates, with its gradient.
struct Objective<'a> {
    x: &'a DMatrix<f64>,
    offset: Option<&'a DVector<f64>>,
    y: &'a DVector<f64>,
    /// `(block, 1/v)` soft penalties.
    penalties: Vec<(Vec<usize>, f64)>,
}

impl Objective<'_> {
    fn eval(&self, v: &DVector<f64>) -> (f64, DVector<f64>) {
        let (mut value, mut grad) = loglik_raw(self.x, self.offset, self.y, v);
        for (block, w) in &self.penalties {
            let s: f64 = block.iter().map(|&j| v[j]).sum();
            value -= 0.5 * w * s * s;
            for &j in block {
                grad[j] -= w * s;
            }
        }
        (value, grad)
    }

    /// Central differences of the analytic gradient, symmetrized.
    fn hessian(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let k = v.len();
        let mut h = DMatrix::zeros(k, k);
        for j in 0..k {
            let step = 1e-5 * v[j].abs().max(1.0);
            let mut up = v.clone();
            up[j] += step;
            let mut down = v.clone();
            down[j] -= step;
            let col = (self.eval(&up).1 - self.eval(&down).1) / (2.0 * step);
            h.set_column(j, &col);
        }
        (&h + h.transpose()) * 0.5
    }
}

/// Moment-based start: constrained least squares on `log(y + 0.5)` minus the
/// offset for β, method-of-moments θ and the excess-zero fraction for π.
fn moment_start(x: &DesignMatrix, y: &DVector<f64>) -> Result<DVector<f64>> {
    let p = x.ncols();
    let ly = y.map(|c| (c + 0.5).ln());
    let beta = fit_constrained_ols(x, &ly)?.coefficients;
    let n = y.len() as f64;
    let mean = y.sum() / n;
    let var = y.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let theta = if var > mean && mean > 0.0 {
        (mean * mean / (var - mean)).clamp(0.1, 100.0)
    } else {
        100.0
    };
    let zero_frac = y.iter().filter(|c| **c == 0.0).count() as f64 / n;
    let p0 = (theta / (theta + mean)).powf(theta);
    let pi = if p0 < 1.0 {
        ((zero_frac - p0) / (1.0 - p0)).clamp(0.01, 0.9)
    } else {
        0.01
    };
    let mut v = DVector::zeros(p + 2);
    v.rows_mut(0, p).copy_from(&beta);
    v[p] = theta.ln();
    v[p + 1] = (pi / (1.0 - pi)).ln();
    Ok(v)
}

/// Fits the model to the counts in `data`. The log base of `spec` must be
/// natural so that coefficients carry log-link elasticity semantics.
pub fn fit_zinb(data: &Dataset, spec: &ModelSpec, opts: &ZinbOptions) -> Result<GlmFit> {
    if !spec.log_base.is_natural() {
        return Err(Error::BaseMismatch(spec.log_base.value()));
    }
    if spec.response_transform != ResponseTransform::Identity {
        return Err(Error::Config("count models take the response untransformed".into()));
    }
    let x = build_design(data, spec)?;
    let y = DVector::from_iterator(data.len(), data.rows.iter().map(|r| r.response));
    fit_zinb_design(&x, &y, opts)
}

pub fn fit_zinb_design(x: &DesignMatrix, y: &DVector<f64>, opts: &ZinbOptions) -> Result<GlmFit> {
    if y.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            what: "response",
            expected: x.nrows(),
            found: y.len(),
        });
    }
    validate_counts(y)?;
    let p = x.ncols();
    let penalties = match opts.constraint {
        GlmConstraint::Soft { variance } => {
            if let Some(v) = variance {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::InvalidPrior(format!("soft variance = {v}")));
                }
            }
            x.constraint_blocks
                .iter()
                .map(|b| (b.clone(), 1.0 / variance.unwrap_or(0.001 * b.len() as f64)))
                .collect()
        }
        GlmConstraint::Hard { .. } => Vec::new(),
    };
    let objective = Objective {
        x: &x.values,
        offset: x.offset.as_ref(),
        y,
        penalties,
    };

    // Optimization coordinates u map to full coordinates through `basis`.
    let basis = match opts.constraint {
        GlmConstraint::Soft { .. } => DMatrix::identity(p + 2, p + 2),
        GlmConstraint::Hard { reduction } => {
            let m = constraint_basis(p, &x.constraint_blocks, reduction)?;
            let k = m.ncols();
            let mut b = DMatrix::zeros(p + 2, k + 2);
            b.view_mut((0, 0), (p, k)).copy_from(&m);
            b[(p, k)] = 1.0;
            b[(p + 1, k + 1)] = 1.0;
            b
        }
    };
    let start_full = moment_start(x, y)?;
    // Least-squares projection of the start onto the optimization space.
    let start = (basis.tr_mul(&basis))
        .cholesky()
        .ok_or(Error::RankDeficient { ratio: 0.0 })?
        .solve(&basis.tr_mul(&start_full));

    let bfgs = BfgsOptions {
        grad_tol: opts.grad_tol,
        max_iter: opts.max_iter,
        ..BfgsOptions::default()
    };
    let runs: Vec<Minimum> = (0..opts.restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut u0 = start.clone();
            if r > 0 {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                rng.set_stream(r as u64);
                for v in u0.iter_mut() {
                    *v += opts.perturbation_sd * rng.sample::<f64, _>(StandardNormal);
                }
            }
            let f = |u: &DVector<f64>| {
                let (value, grad) = objective.eval(&(&basis * u));
                if !value.is_finite() {
                    return (f64::INFINITY, DVector::from_element(u.len(), f64::NAN));
                }
                (-value, -basis.tr_mul(&grad))
            };
            minimize(f, u0, &bfgs)
        })
        .collect();

    let restart_objectives: Vec<f64> = runs.iter().map(|m| -m.value).collect();
    // Best objective wins; ties go to the lower restart index.
    let (_, best) = runs
        .iter()
        .enumerate()
        .filter(|(_, m)| m.value.is_finite())
        .min_by(|(i, a), (j, b)| a.value.total_cmp(&b.value).then(i.cmp(j)))
        .ok_or(Error::NonConvergence {
            grad_norm: f64::INFINITY,
            iterations: 0,
        })?;
    let grad_norm = best.grad_norm();
    if grad_norm > CONVERGENCE_LIMIT {
        return Err(Error::NonConvergence {
            grad_norm,
            iterations: best.iterations,
        });
    }

    let full = &basis * &best.x;
    let (objective_value, _) = objective.eval(&full);
    let loglik = loglik_raw(&x.values, x.offset.as_ref(), y, &full).0;
    let hessian = objective.hessian(&full);
    let reduced = -(basis.tr_mul(&hessian) * &basis);
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let approx_cov = match reduced.clone().cholesky() {
        Some(c) => &basis * c.inverse() * basis.transpose(),
        None => return Err(Error::RankDeficient { ratio: 0.0 }),
    };

    Ok(GlmFit {
        params: ZinbParams::from_vector(&full),
        loglik,
        objective: objective_value,
        hessian,
        approx_cov,
        converged: best.converged,
        iterations: best.iterations,
        grad_norm,
        restart_objectives,
        design_meta: DesignMeta::of(x),
    })
}

/// Draws one negative binomial count with mean `mu` and dispersion `theta`
/// as a gamma–Poisson mixture.
pub fn sample_nb<R: Rng>(rng: &mut R, mu: f64, theta: f64) -> f64 {
    use rand_distr::{Distribution, Gamma, Poisson};
    let lambda = Gamma::new(theta, mu / theta)
        .expect("positive gamma parameters")
        .sample(rng);
    if lambda <= 0.0 {
        return 0.0;
    }
    Poisson::new(lambda).map(|d| d.sample(rng)).unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compositions::validate_composition;
    use crate::compositions::LogBase;
    use crate::design::{ModeratorKind, Observation};

    fn simulate(n: usize, d: usize, pi: f64, theta: f64, seed: u64) -> (Dataset, ModelSpec) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let beta: Vec<f64> = (0..d).map(|j| 0.3 * (j as f64 - (d - 1) as f64 / 2.0)).collect();
        let rows = (0..n)
            .map(|_| {
                let parts: Vec<f64> = (0..d)
                    .map(|_| (0.5 * rng.sample::<f64, _>(StandardNormal)).exp())
                    .collect();
                let z = if rng.random::<f64>() < 0.16 { 1.0 } else { 0.0 };
                let pop: f64 = 1000.0 * (1.0 + rng.random::<f64>());
                let eta =
                    (pop / 1000.0).ln() + 0.5 + parts.iter().zip(&beta).map(|(x, b)| b * x.ln()).sum::<f64>() + 0.2 * z;
                let y = if rng.random::<f64>() < pi {
                    0.0
                } else {
                    sample_nb(&mut rng, eta.exp(), theta)
                };
                let mut obs = Observation::new(validate_composition(parts).unwrap(), y);
                obs.moderator = Some(z);
                obs.offset = Some(pop / 1000.0);
                obs
            })
            .collect();
        let mut spec = ModelSpec::log_contrast((0..d).map(|j| format!("x{j}")).collect());
        spec.log_base = LogBase::E;
        spec.moderator = ModeratorKind::Binary;
        spec.offset_column = Some("pop".into());
        (Dataset::new(rows).unwrap(), spec)
    }

    /// Direct evaluation of the likelihood from the pmf, term by term.
    fn oracle_loglik(eta: &DVector<f64>, y: &DVector<f64>, theta: f64, pi: f64) -> f64 {
        let mut total = 0.0;
        for i in 0..y.len() {
            let mu = eta[i].exp();
            let k = y[i];
            let pmf = (ln_gamma(k + theta) - ln_gamma(theta) - ln_gamma(k + 1.0)
                + theta * (theta / (theta + mu)).ln()
                + k * (mu / (theta + mu)).ln())
            .exp();
            total += if k == 0.0 {
                (pi + (1.0 - pi) * pmf).ln()
            } else {
                ((1.0 - pi) * pmf).ln()
            };
        }
        total
    }

    #[test]
    fn matches_pmf_oracle() {
        let (data, spec) = simulate(20, 3, 0.3, 2.0, 1);
        let x = build_design(&data, &spec).unwrap();
        let y = DVector::from_iterator(20, data.rows.iter().map(|r| r.response));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let params = ZinbParams {
                beta: DVector::from_fn(x.ncols(), |_, _| 0.3 * rng.sample::<f64, _>(StandardNormal)),
                log_theta: rng.sample::<f64, _>(StandardNormal),
                logit_pi: rng.sample::<f64, _>(StandardNormal),
            };
            let eta = &x.values * &params.beta + x.offset.as_ref().unwrap();
            let want = oracle_loglik(&eta, &y, params.theta(), params.pi());
            let got = zinb_loglik(&params, &x, &y).unwrap();
            assert!((got - want).abs() < 1e-9 * want.abs().max(1.0), "{got} vs {want}");
        }
    }

    #[test]
    fn poisson_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (data, spec) = simulate(50, 3, 0.0, 1e6, 2);
        let x = build_design(&data, &spec).unwrap();
        let y = DVector::from_iterator(50, data.rows.iter().map(|r| r.response));
        let beta = DVector::from_fn(x.ncols(), |_, _| 0.2 * rng.sample::<f64, _>(StandardNormal));
        let params = ZinbParams {
            beta: beta.clone(),
            log_theta: 1e6f64.ln(),
            logit_pi: -40.0,
        };
        let eta = &x.values * &beta + x.offset.as_ref().unwrap();
        let poisson: f64 = (0..50)
            .map(|i| y[i] * eta[i] - eta[i].exp() - ln_gamma(y[i] + 1.0))
            .sum();
        let got = zinb_loglik(&params, &x, &y).unwrap();
        assert!((got - poisson).abs() / 50.0 < 1e-3);
    }

    #[test]
    fn structural_zero_dominates() {
        let (data, spec) = simulate(1, 3, 0.0, 1.0, 3);
        let x = build_design(&data, &spec).unwrap();
        let y = DVector::from_element(1, 0.0);
        let mut beta = DVector::zeros(x.ncols());
        beta[0] = 60.0;
        let params = ZinbParams {
            beta,
            log_theta: 0.0,
            logit_pi: 0.0,
        };
        let l = zinb_loglik(&params, &x, &y).unwrap();
        assert!((l - 0.5f64.ln()).abs() < 1e-12, "{l}");
    }

    #[test]
    fn count_validation() {
        let (data, spec) = simulate(3, 3, 0.0, 1.0, 4);
        let x = build_design(&data, &spec).unwrap();
        let params = ZinbParams {
            beta: DVector::zeros(x.ncols()),
            log_theta: 0.0,
            logit_pi: 0.0,
        };
        let y = DVector::from_vec(vec![1.0, 2.5, 0.0]);
        assert!(matches!(
            zinb_loglik(&params, &x, &y),
            Err(Error::NonIntegerCount { index: 1, .. })
        ));
        let y = DVector::from_vec(vec![1.0, 2.0, -1.0]);
        assert!(matches!(
            zinb_loglik_grad(&params, &x, &y),
            Err(Error::NegativeCount { index: 2, .. })
        ));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (data, spec) = simulate(40, 4, 0.2, 1.5, 5);
        let x = build_design(&data, &spec).unwrap();
        let y = DVector::from_iterator(40, data.rows.iter().map(|r| r.response));
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let v = DVector::from_fn(x.ncols() + 2, |_, _| 0.5 * rng.sample::<f64, _>(StandardNormal));
            let params = ZinbParams::from_vector(&v);
            let g = zinb_loglik_grad(&params, &x, &y).unwrap();
            for j in 0..v.len() {
                let h = 1e-5;
                let mut up = v.clone();
                up[j] += h;
                let mut down = v.clone();
                down[j] -= h;
                let fd = (zinb_loglik(&ZinbParams::from_vector(&up), &x, &y).unwrap()
                    - zinb_loglik(&ZinbParams::from_vector(&down), &x, &y).unwrap())
                    / (2.0 * h);
                assert!(
                    (fd - g[j]).abs() <= 1e-5 * g[j].abs().max(fd.abs()).max(1.0),
                    "{j}: {fd} vs {}",
                    g[j]
                );
            }
        }
    }

    #[test]
    fn pi_gradient_vanishes_without_zeros() {
        let (data, spec) = simulate(30, 3, 0.0, 5.0, 7);
        let x = build_design(&data, &spec).unwrap();
        let y = DVector::from_iterator(30, data.rows.iter().map(|r| r.response.max(1.0)));
        let params = ZinbParams {
            beta: DVector::zeros(x.ncols()),
            log_theta: 1.0,
            logit_pi: -50.0,
        };
        let g = zinb_loglik_grad(&params, &x, &y).unwrap();
        let last = g[x.ncols() + 1];
        assert!(last.is_finite() && last.abs() < 1e-15, "{last}");
    }

    #[test]
    fn hard_fit_has_exact_block_sums_and_stationary_gradient() {
        let (data, spec) = simulate(600, 4, 0.2, 1.5, 8);
        let opts = ZinbOptions {
            constraint: GlmConstraint::Hard {
                reduction: BlockReduction::Orthonormal,
            },
            ..Default::default()
        };
        let fit = fit_zinb(&data, &spec, &opts).unwrap();
        for block in &fit.design_meta.constraint_blocks {
            let s: f64 = block.iter().map(|&j| fit.params.beta[j]).sum();
            assert!(s.abs() < 1e-10, "{s}");
        }
        assert!(fit.grad_norm < 1e-6, "{}", fit.grad_norm);
        let eig = fit.hessian.clone().symmetric_eigen().eigenvalues;
        assert!(eig.max() < 1e-8 * fit.hessian.norm(), "{eig}");
    }

    #[test]
    fn soft_fit_recovers_zero_inflation_and_dispersion() {
        let (data, spec) = simulate(2000, 3, 0.2, 1.5, 9);
        let fit = fit_zinb(&data, &spec, &ZinbOptions::default()).unwrap();
        let se = fit.std_errors();
        let p = fit.params.beta.len();
        assert!((fit.params.log_theta - 1.5f64.ln()).abs() < 4.0 * se[p]);
        assert!((fit.params.logit_pi - (0.2f64 / 0.8).ln()).abs() < 4.0 * se[p + 1]);
    }

    #[test]
    fn no_inflation_gives_small_pi() {
        let (data, spec) = simulate(2000, 3, 0.0, 1.5, 10);
        let fit = fit_zinb(&data, &spec, &ZinbOptions::default()).unwrap();
        assert!(fit.params.pi() < 0.02, "{}", fit.params.pi());
    }

    #[test]
    fn non_natural_base_is_refused() {
        let (data, mut spec) = simulate(10, 3, 0.0, 1.5, 11);
        spec.log_base = LogBase::TWO;
        assert!(matches!(
            fit_zinb(&data, &spec, &ZinbOptions::default()),
            Err(Error::BaseMismatch(_))
        ));
    }
}
