//! Shared generators and invariance measurements for the integration tests.
//! Each `*_gap` function returns the worst absolute discrepancy it saw.

#![allow(dead_code)]

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use compreg::bayes::{fit_bayes_hard, ConstraintMode, PriorSpec, SamplerConfig};
use compreg::compositions::{validate_composition, LogBase};
use compreg::design::{
    build_design, response_vector, BlockReduction, ColumnRole, Dataset, ModelSpec, ModeratorKind, ResponseTransform,
};
use compreg::freq::{fit_alr_ols, fit_constrained_ols, FreqFit};
use compreg::glm::{fit_zinb, GlmConstraint, GlmFit, ZinbOptions};
use compreg::interpret::{elasticity_report, ReportOptions};
use compreg::io::synth::{synth_generate, ResponseLaw, SynthSpec};

pub const FREQ_TOL: f64 = 1e-8;
pub const ANALYTIC_TOL: f64 = 1e-10;
pub const ZINB_TOL: f64 = 1e-6;
pub const LOGLIK_TOL: f64 = 1e-8;
pub const SLOPE_TOL: f64 = 1e-6;
pub const BUMP: f64 = 1e-4;

pub fn names(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("x{j}")).collect()
}

fn zero_sum(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| rng.random_range(-scale..scale)).collect();
    let mean = v.iter().sum::<f64>() / d as f64;
    v.into_iter().map(|b| b - mean).collect()
}

/// Gaussian synthetic spec with random zero-sum truth drawn from `seed`.
pub fn gaussian_spec(
    seed: u64,
    n: usize,
    d: usize,
    moderator: ModeratorKind,
    transform: ResponseTransform,
) -> SynthSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    SynthSpec {
        n,
        part_names: names(d),
        log_base: LogBase::TWO,
        include_total: true,
        moderator,
        moderator_rate: 0.3,
        intercept: 1.0,
        beta: zero_sum(&mut rng, d, 0.5),
        beta_interaction: if moderator == ModeratorKind::None {
            vec![]
        } else {
            zero_sum(&mut rng, d, 0.3)
        },
        beta_total: rng.random_range(-0.2..0.2),
        beta_moderator: rng.random_range(-0.3..0.3),
        beta_total_interaction: if moderator == ModeratorKind::None {
            0.0
        } else {
            rng.random_range(-0.1..0.1)
        },
        law: ResponseLaw::Gaussian {
            sigma2: 0.25,
            response_transform: transform,
        },
        part_log_mean: vec![1.0],
        part_log_sd: 0.8,
        seed,
    }
}

/// Count spec on the natural-log scale with a population-like offset.
pub fn zinb_spec(seed: u64, n: usize, d: usize) -> SynthSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x85eb_ca6b);
    SynthSpec {
        n,
        part_names: names(d),
        log_base: LogBase::E,
        include_total: true,
        moderator: ModeratorKind::Binary,
        moderator_rate: 0.16,
        intercept: -6.0,
        beta: zero_sum(&mut rng, d, 0.3),
        beta_interaction: zero_sum(&mut rng, d, 0.2),
        beta_total: rng.random_range(-0.1..0.1),
        beta_moderator: 0.1,
        beta_total_interaction: 0.0,
        law: ResponseLaw::Zinb {
            theta: 1.5,
            pi: 0.2,
            offset_log_mean: 9.0,
            offset_log_sd: 0.3,
        },
        part_log_mean: vec![2.0],
        part_log_sd: 0.5,
        seed,
    }
}

pub fn generate(spec: &SynthSpec) -> (Dataset, ModelSpec) {
    let (data, _) = synth_generate(spec).expect("synthetic data");
    (data, spec.model_spec())
}

pub fn freq(data: &Dataset, spec: &ModelSpec) -> FreqFit {
    let x = build_design(data, spec).unwrap();
    let y = response_vector(data, spec).unwrap();
    fit_constrained_ols(&x, &y).unwrap()
}

fn coef(roles: &[ColumnRole], est: &DVector<f64>, role: ColumnRole) -> f64 {
    est[roles.iter().position(|r| *r == role).expect("role present")]
}

/// Largest difference over every role except the intercept.
fn gap_except_intercept(roles: &[ColumnRole], a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    roles
        .iter()
        .enumerate()
        .filter(|(_, r)| **r != ColumnRole::Intercept)
        .map(|(i, _)| (a[i] - b[i]).abs())
        .fold(0.0, f64::max)
}

/// Rescaling every part by `k` leaves every slope and every prediction
/// unchanged; only the intercept may move.
pub fn freq_scale_gap(data: &Dataset, spec: &ModelSpec, k: f64) -> f64 {
    let scaled = data.scale_parts(k).unwrap();
    let a = freq(data, spec);
    let b = freq(&scaled, spec);
    let roles = &a.design_meta.column_roles;
    let xa = build_design(data, spec).unwrap();
    let xb = build_design(&scaled, spec).unwrap();
    let pa = xa.predict_linear(data, &a.coefficients).unwrap();
    let pb = xb.predict_linear(&scaled, &b.coefficients).unwrap();
    gap_except_intercept(roles, &a.coefficients, &b.coefficients).max((pa - pb).amax())
}

pub fn permuted_spec(spec: &ModelSpec, perm: &[usize]) -> ModelSpec {
    let mut s = spec.clone();
    s.part_names = perm.iter().map(|&i| spec.part_names[i].clone()).collect();
    s
}

/// Compares `Comp(j)` / `Interaction(j)` of the permuted fit with
/// `Comp(perm[j])` / `Interaction(perm[j])` of the original, and every other
/// role directly.
pub fn permutation_gap(roles: &[ColumnRole], original: &DVector<f64>, permuted: &DVector<f64>, perm: &[usize]) -> f64 {
    roles
        .iter()
        .map(|role| {
            let source = match *role {
                ColumnRole::Comp(j) => ColumnRole::Comp(perm[j]),
                ColumnRole::Interaction(j) => ColumnRole::Interaction(perm[j]),
                other => other,
            };
            (coef(roles, permuted, *role) - coef(roles, original, source)).abs()
        })
        .fold(0.0, f64::max)
}

pub fn freq_permutation_gap(data: &Dataset, spec: &ModelSpec, perm: &[usize]) -> f64 {
    let a = freq(data, spec);
    let b = freq(&data.permute_parts(perm), &permuted_spec(spec, perm));
    permutation_gap(&a.design_meta.column_roles, &a.coefficients, &b.coefficients, perm)
}

/// Design columns permute with the parts; all other columns stay bit-identical.
pub fn design_permutation_gap(data: &Dataset, spec: &ModelSpec, perm: &[usize]) -> f64 {
    let a = build_design(data, spec).unwrap();
    let b = build_design(&data.permute_parts(perm), &permuted_spec(spec, perm)).unwrap();
    let mut worst: f64 = 0.0;
    for (c, role) in b.column_roles.iter().enumerate() {
        let source = match *role {
            ColumnRole::Comp(j) => ColumnRole::Comp(perm[j]),
            ColumnRole::Interaction(j) => ColumnRole::Interaction(perm[j]),
            other => other,
        };
        let s = a.column_index(source).unwrap();
        let diff = (b.values.column(c) - a.values.column(s)).amax();
        let permutes = matches!(role, ColumnRole::Comp(_) | ColumnRole::Interaction(_));
        if !permutes && diff != 0.0 {
            return f64::INFINITY;
        }
        worst = worst.max(diff);
    }
    worst
}

pub fn bayes_hard_permutation_gap(data: &Dataset, spec: &ModelSpec, perm: &[usize]) -> f64 {
    let prior = PriorSpec {
        constraint_mode: ConstraintMode::Hard,
        ..PriorSpec::default()
    };
    let sampler = SamplerConfig::default();
    let fit = |d: &Dataset, s: &ModelSpec| {
        let x = build_design(d, s).unwrap();
        let y = response_vector(d, s).unwrap();
        fit_bayes_hard(&x, &y, &prior, &sampler).unwrap()
    };
    let a = fit(data, spec);
    let b = fit(&data.permute_parts(perm), &permuted_spec(spec, perm));
    let roles = &a.design_meta.column_roles;
    permutation_gap(roles, &a.mean, &b.mean, perm).max(permutation_gap(roles, &a.sd, &b.sd, perm))
}

/// alr regressions for every reference part against the KKT fit.
pub fn alr_reference_gap(data: &Dataset, spec: &ModelSpec) -> f64 {
    let kkt = freq(data, spec);
    (0..spec.parts())
        .map(|r| (fit_alr_ols(data, spec, r).unwrap().coefficients - &kkt.coefficients).amax())
        .fold(0.0, f64::max)
}

pub fn zinb(data: &Dataset, spec: &ModelSpec, constraint: GlmConstraint) -> GlmFit {
    let opts = ZinbOptions {
        constraint,
        ..ZinbOptions::default()
    };
    fit_zinb(data, spec, &opts).unwrap()
}

const HARD: GlmConstraint = GlmConstraint::Hard {
    reduction: BlockReduction::Orthonormal,
};

/// Doubling every offset moves the intercept by `−ln 2` and nothing else.
pub fn offset_gap(data: &Dataset, spec: &ModelSpec) -> f64 {
    let mut doubled = data.clone();
    for row in &mut doubled.rows {
        row.offset = row.offset.map(|o| 2.0 * o);
    }
    let a = zinb(data, spec, HARD);
    let b = zinb(&doubled, spec, HARD);
    let roles = &a.design_meta.column_roles;
    let shift = coef(roles, &b.params.beta, ColumnRole::Intercept) - coef(roles, &a.params.beta, ColumnRole::Intercept);
    let others = gap_except_intercept(roles, &a.params.beta, &b.params.beta)
        .max((a.params.log_theta - b.params.log_theta).abs())
        .max((a.params.logit_pi - b.params.logit_pi).abs());
    (shift + std::f64::consts::LN_2).abs().max(others)
}

pub fn zinb_scale_gap(data: &Dataset, spec: &ModelSpec, k: f64) -> f64 {
    let scaled = data.scale_parts(k).unwrap();
    let a = zinb(data, spec, HARD);
    let b = zinb(&scaled, spec, HARD);
    let xa = build_design(data, spec).unwrap();
    let xb = build_design(&scaled, spec).unwrap();
    let pa = xa.predict_linear(data, &a.params.beta).unwrap();
    let pb = xb.predict_linear(&scaled, &b.params.beta).unwrap();
    gap_except_intercept(&a.design_meta.column_roles, &a.params.beta, &b.params.beta).max((pa - pb).amax())
}

pub fn zinb_permutation_gap(data: &Dataset, spec: &ModelSpec, perm: &[usize]) -> f64 {
    let a = zinb(data, spec, HARD);
    let b = zinb(&data.permute_parts(perm), &permuted_spec(spec, perm), HARD);
    permutation_gap(&a.design_meta.column_roles, &a.params.beta, &b.params.beta, perm)
}

/// Maximized log-likelihood across reduced coordinates: orthonormal and
/// every reference part.
pub fn zinb_reparam_gap(data: &Dataset, spec: &ModelSpec) -> f64 {
    let base = zinb(data, spec, HARD).loglik;
    (0..spec.parts())
        .map(|r| {
            let fit = zinb(
                data,
                spec,
                GlmConstraint::Hard {
                    reduction: BlockReduction::Reference(r),
                },
            );
            (fit.loglik - base).abs()
        })
        .fold(0.0, f64::max)
}

fn max_numeric_gap(a: &serde_json::Value, b: &serde_json::Value) -> f64 {
    use serde_json::Value;
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => (x.as_f64().unwrap() - y.as_f64().unwrap()).abs(),
        (Value::Array(x), Value::Array(y)) if x.len() == y.len() => {
            x.iter().zip(y).map(|(p, q)| max_numeric_gap(p, q)).fold(0.0, f64::max)
        }
        (Value::Object(x), Value::Object(y)) if x.len() == y.len() => x
            .iter()
            .map(|(k, v)| y.get(k).map_or(f64::INFINITY, |w| max_numeric_gap(v, w)))
            .fold(0.0, f64::max),
        (x, y) if x == y => 0.0,
        _ => f64::INFINITY,
    }
}

/// Refits a log-response model in `bases` (covariates and response in the
/// same base) and compares the elasticity reports. The base itself and the
/// raw moderator coefficient (whose factor is compared instead) are excluded.
pub fn base_change_gap(data: &Dataset, spec: &ModelSpec, bases: &[LogBase]) -> f64 {
    let report = |base: LogBase| {
        let mut s = spec.clone();
        s.log_base = base;
        let r = elasticity_report(&freq(data, &s), &ReportOptions::default()).unwrap();
        let mut v = serde_json::to_value(r).unwrap();
        v.as_object_mut().unwrap().remove("log_base");
        if let Some(m) = v.get_mut("moderator").and_then(|m| m.as_object_mut()) {
            m.remove("beta_moderator");
        }
        v
    };
    let first = report(bases[0]);
    bases[1..]
        .iter()
        .map(|b| max_numeric_gap(&first, &report(*b)))
        .fold(0.0, f64::max)
}

/// Every elasticity the report states is re-derived from model predictions:
/// bump one part (or all parts) by `BUMP` and read the log-response slope;
/// flip a binary moderator at the sample-mean composition and read the ratio.
pub fn prediction_consistency_gap(data: &Dataset, spec: &ModelSpec) -> f64 {
    let fit = freq(data, spec);
    let x = build_design(data, spec).unwrap();
    let report = elasticity_report(&fit, &ReportOptions::default()).unwrap();
    let b = spec.log_base.value();
    let ln_ratio = |from: &Dataset, to: &Dataset| -> DVector<f64> {
        let p0 = x.predict_linear(from, &fit.coefficients).unwrap();
        let p1 = x.predict_linear(to, &fit.coefficients).unwrap();
        (p1 - p0) * b.ln()
    };
    let slope = (1.0 + BUMP).ln();
    let mut worst: f64 = 0.0;

    for (j, part) in report.parts.iter().enumerate() {
        let mut bumped = data.clone();
        for row in &mut bumped.rows {
            row.composition = row.composition.with_part_scaled(j, 1.0 + BUMP).unwrap();
        }
        let r = ln_ratio(data, &bumped);
        for (i, row) in data.rows.iter().enumerate() {
            let z = row.moderator.unwrap_or(0.0);
            let expected = if z == 1.0 {
                part.moderated_elasticity.unwrap()
            } else if z == 0.0 {
                part.elasticity
            } else {
                continue;
            };
            worst = worst.max((r[i] / slope - expected).abs());
        }
    }
    if let Some(total) = &report.total {
        let scaled = data.scale_parts(1.0 + BUMP).unwrap();
        let r = ln_ratio(data, &scaled);
        for (i, row) in data.rows.iter().enumerate() {
            if row.moderator.unwrap_or(0.0) == 0.0 {
                worst = worst.max((r[i] / slope - total.scaled_total).abs());
            }
        }
    }
    if let Some(m) = &report.moderator {
        let d = spec.parts();
        let mut centre = data.clone();
        centre.rows.truncate(1);
        let mean_logs: Vec<f64> = (0..d)
            .map(|j| data.rows.iter().map(|r| r.composition.parts()[j].ln()).sum::<f64>() / data.len() as f64)
            .collect();
        centre.rows[0].composition = validate_composition(mean_logs.iter().map(|l| l.exp()).collect()).unwrap();
        centre.rows[0].moderator = Some(0.0);
        let mut flipped = centre.clone();
        flipped.rows[0].moderator = Some(1.0);
        let r = ln_ratio(&centre, &flipped)[0].exp();
        worst = worst.max((r - m.factor).abs());
    }
    worst
}

pub fn random_perm(seed: u64, d: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..d).collect();
    for i in (1..d).rev() {
        perm.swap(i, rng.random_range(0..=i));
    }
    perm
}
