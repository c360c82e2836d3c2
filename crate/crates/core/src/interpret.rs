//! Elasticity reports and interpretation statements for fitted models.
//!
//! With a log response (or a log link on natural-log covariates) the slope of
//! log y on log x_j is `e_j = β_j + β^(t)`, because the multiplicative total
//! also moves when x_j does. Moderation adds `β_j^(i) + β^(t,i)` per unit of
//! the moderator.

use std::fmt::Write as _;

use nalgebra::DVector;
use serde::Serialize;

use crate::bayes::PosteriorSummary;
use crate::design::{ColumnRole, ModelSpec, ResponseTransform};
use crate::error::{Error, Result};
use crate::freq::{DesignMeta, FreqFit};
use crate::glm::GlmFit;

/// Anything that carries coefficient estimates on a known design layout.
pub trait CoefficientSource {
    fn meta(&self) -> &DesignMeta;
    fn estimates(&self) -> DVector<f64>;
    fn sd(&self) -> Option<DVector<f64>> {
        None
    }
    fn sign_prob(&self) -> Option<DVector<f64>> {
        None
    }
    /// True when coefficients act on a natural-log mean through a link.
    fn is_log_link(&self) -> bool {
        false
    }
}

impl CoefficientSource for FreqFit {
    fn meta(&self) -> &DesignMeta {
        &self.design_meta
    }
    fn estimates(&self) -> DVector<f64> {
        self.coefficients.clone()
    }
    fn sd(&self) -> Option<DVector<f64>> {
        Some(self.std_errors())
    }
}

impl CoefficientSource for PosteriorSummary {
    fn meta(&self) -> &DesignMeta {
        &self.design_meta
    }
    fn estimates(&self) -> DVector<f64> {
        self.mean.clone()
    }
    fn sd(&self) -> Option<DVector<f64>> {
        Some(self.sd.clone())
    }
    fn sign_prob(&self) -> Option<DVector<f64>> {
        Some(self.sign_prob.clone())
    }
}

impl CoefficientSource for GlmFit {
    fn meta(&self) -> &DesignMeta {
        &self.design_meta
    }
    fn estimates(&self) -> DVector<f64> {
        self.params.beta.clone()
    }
    fn sd(&self) -> Option<DVector<f64>> {
        Some(self.posterior_summary().sd)
    }
    fn sign_prob(&self) -> Option<DVector<f64>> {
        Some(self.posterior_summary().sign_prob)
    }
    fn is_log_link(&self) -> bool {
        true
    }
}

/// Coefficients supplied directly, e.g. copied from a reported table.
#[derive(Debug, Clone)]
pub struct CoefficientTable {
    pub meta: DesignMeta,
    pub estimates: DVector<f64>,
    pub sign_prob: Option<DVector<f64>>,
    pub sd: Option<DVector<f64>>,
    pub log_link: bool,
}

impl CoefficientTable {
    /// Builds a table from `(role, estimate)` pairs. Roles absent from the
    /// list default to zero; roles absent from `spec` are rejected.
    pub fn new(spec: &ModelSpec, entries: &[(ColumnRole, f64)]) -> Result<CoefficientTable> {
        let roles = spec.column_roles();
        let mut estimates = DVector::zeros(roles.len());
        for (role, value) in entries {
            let i = position(&roles, *role, spec)?;
            estimates[i] = *value;
        }
        Ok(CoefficientTable {
            meta: meta_for(spec),
            estimates,
            sign_prob: None,
            sd: None,
            log_link: false,
        })
    }

    pub fn with_sign_prob(mut self, entries: &[(ColumnRole, f64)]) -> Result<CoefficientTable> {
        let roles = &self.meta.column_roles;
        let mut probs = DVector::from_element(roles.len(), 0.5);
        for (role, value) in entries {
            let i = position(roles, *role, &self.meta.spec)?;
            probs[i] = *value;
        }
        self.sign_prob = Some(probs);
        Ok(self)
    }
}

fn position(roles: &[ColumnRole], role: ColumnRole, spec: &ModelSpec) -> Result<usize> {
    roles
        .iter()
        .position(|r| *r == role)
        .ok_or_else(|| Error::UnknownColumn(role.label(&spec.part_names)))
}

fn meta_for(spec: &ModelSpec) -> DesignMeta {
    let roles = spec.column_roles();
    let block = |f: fn(&ColumnRole) -> bool| -> Vec<usize> {
        roles.iter().enumerate().filter(|(_, r)| f(r)).map(|(i, _)| i).collect()
    };
    let mut blocks = vec![block(|r| matches!(r, ColumnRole::Comp(_)))];
    if spec.has_moderator() {
        blocks.push(block(|r| matches!(r, ColumnRole::Interaction(_))));
    }
    DesignMeta {
        column_roles: roles,
        constraint_blocks: blocks,
        spec: spec.clone(),
    }
}

impl CoefficientSource for CoefficientTable {
    fn meta(&self) -> &DesignMeta {
        &self.meta
    }
    fn estimates(&self) -> DVector<f64> {
        self.estimates.clone()
    }
    fn sd(&self) -> Option<DVector<f64>> {
        self.sd.clone()
    }
    fn sign_prob(&self) -> Option<DVector<f64>> {
        self.sign_prob.clone()
    }
    fn is_log_link(&self) -> bool {
        self.log_link
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReportOptions {
    /// Effects with sign probability above this are flagged as supported.
    pub support_threshold: f64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            support_threshold: 0.90,
        }
    }
}

/// A single coefficient with whatever uncertainty the source provides.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub sd: Option<f64>,
    pub sign_prob: Option<f64>,
    pub supported: Option<bool>,
}

/// Response change for a 1% increase: first-order percent and exact
/// percent `(1.01^e − 1) · 100`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PercentChange {
    pub first_order_pct: f64,
    pub exact_pct: f64,
}

impl PercentChange {
    fn of(elasticity: f64) -> PercentChange {
        PercentChange {
            first_order_pct: elasticity,
            exact_pct: (1.01f64.powf(elasticity) - 1.0) * 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartElasticity {
    pub part: String,
    pub beta: Estimate,
    pub beta_interaction: Option<Estimate>,
    /// `β_j + β_j^(i)`: compositional effect (total held fixed) when the
    /// moderator is one unit up.
    pub moderated_compositional: Option<f64>,
    /// `β_j + β^(t)`.
    pub elasticity: f64,
    pub elasticity_change: PercentChange,
    /// `β_j + β^(t) + β_j^(i) + β^(t,i)`.
    pub moderated_elasticity: Option<f64>,
    pub moderated_change: Option<PercentChange>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TotalEffect {
    pub beta_total: Estimate,
    /// `D · β^(t)`: percent response change when every part rises by 1%.
    pub scaled_total: f64,
    pub scaled_change: PercentChange,
    pub beta_total_interaction: Option<Estimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeratorEffect {
    pub beta_moderator: Estimate,
    /// `b^{β^(z)}`: response multiplier per unit moderator.
    pub factor: f64,
    pub percent_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElasticityReport {
    pub log_base: f64,
    pub scale: &'static str,
    pub support_threshold: f64,
    pub parts: Vec<PartElasticity>,
    pub total: Option<TotalEffect>,
    pub moderator: Option<ModeratorEffect>,
}

struct Lookup<'a> {
    meta: &'a DesignMeta,
    est: DVector<f64>,
    sd: Option<DVector<f64>>,
    prob: Option<DVector<f64>>,
    threshold: f64,
}

impl Lookup<'_> {
    fn value(&self, role: ColumnRole) -> Option<f64> {
        self.meta.column_index(role).map(|i| self.est[i])
    }

    fn estimate(&self, role: ColumnRole) -> Option<Estimate> {
        let i = self.meta.column_index(role)?;
        let sign_prob = self.prob.as_ref().map(|p| p[i]);
        Some(Estimate {
            value: self.est[i],
            sd: self.sd.as_ref().map(|s| s[i]),
            sign_prob,
            supported: sign_prob.map(|p| p > self.threshold),
        })
    }
}

fn check_log_scale(source: &dyn CoefficientSource) -> Result<()> {
    let spec = &source.meta().spec;
    if spec.response_transform == ResponseTransform::Log || source.is_log_link() {
        Ok(())
    } else {
        Err(Error::NotLogScale)
    }
}

/// Builds the elasticity report. Fails with `NotLogScale` for identity
/// responses, whose coefficients are level effects.
pub fn elasticity_report(source: &dyn CoefficientSource, opts: &ReportOptions) -> Result<ElasticityReport> {
    check_log_scale(source)?;
    let meta = source.meta();
    let spec = &meta.spec;
    if source.is_log_link() && !spec.log_base.is_natural() {
        return Err(Error::BaseMismatch(spec.log_base.value()));
    }
    let look = Lookup {
        meta,
        est: source.estimates(),
        sd: source.sd(),
        prob: source.sign_prob(),
        threshold: opts.support_threshold,
    };
    let d = spec.parts();
    let bt = look.value(ColumnRole::Total).unwrap_or(0.0);
    let bti = look.value(ColumnRole::TotalInteraction).unwrap_or(0.0);

    let mut parts = Vec::with_capacity(d);
    for j in 0..d {
        let beta = look
            .estimate(ColumnRole::Comp(j))
            .ok_or(Error::UnknownColumn(format!("comp:{j}")))?;
        let beta_interaction = look.estimate(ColumnRole::Interaction(j));
        let elasticity = beta.value + bt;
        let moderated = beta_interaction.as_ref().map(|bi| elasticity + bi.value + bti);
        let moderated_compositional = beta_interaction.as_ref().map(|bi| beta.value + bi.value);
        parts.push(PartElasticity {
            part: spec.part_names.get(j).cloned().unwrap_or_else(|| (j + 1).to_string()),
            beta,
            beta_interaction,
            moderated_compositional,
            elasticity,
            elasticity_change: PercentChange::of(elasticity),
            moderated_elasticity: moderated,
            moderated_change: moderated.map(PercentChange::of),
        });
    }

    let total = look.estimate(ColumnRole::Total).map(|beta_total| {
        let scaled = d as f64 * beta_total.value;
        TotalEffect {
            beta_total,
            scaled_total: scaled,
            scaled_change: PercentChange::of(scaled),
            beta_total_interaction: look.estimate(ColumnRole::TotalInteraction),
        }
    });
    let base = if source.is_log_link() {
        std::f64::consts::E
    } else {
        spec.log_base.value()
    };
    let moderator = look.estimate(ColumnRole::Moderator).map(|bz| {
        let factor = base.powf(bz.value);
        ModeratorEffect {
            beta_moderator: bz,
            factor,
            percent_change: (factor - 1.0) * 100.0,
        }
    });

    Ok(ElasticityReport {
        log_base: base,
        scale: if source.is_log_link() {
            "log_link"
        } else {
            "log_response"
        },
        support_threshold: opts.support_threshold,
        parts,
        total,
        moderator,
    })
}

/// Coefficients at a given moderator value on the design scale (0/1 for a
/// binary moderator, deviation from the sample mean for a numeric one).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeratedCoefficients {
    /// `β_j + z · β_j^(i)`.
    pub compositional: Vec<f64>,
    /// `β^(t) + z · β^(t,i)` when the model has a total.
    pub total: Option<f64>,
}

pub fn moderated_coefficients(source: &dyn CoefficientSource, z: f64) -> Result<ModeratedCoefficients> {
    let meta = source.meta();
    if !meta.spec.has_moderator() {
        return Err(Error::NoModerator);
    }
    let est = source.estimates();
    let get = |role| meta.column_index(role).map(|i| est[i]);
    let compositional = (0..meta.spec.parts())
        .map(|j| {
            let b = get(ColumnRole::Comp(j)).ok_or(Error::UnknownColumn(format!("comp:{j}")))?;
            let bi = get(ColumnRole::Interaction(j)).ok_or(Error::UnknownColumn(format!("interaction:{j}")))?;
            Ok(b + z * bi)
        })
        .collect::<Result<Vec<_>>>()?;
    let total = get(ColumnRole::Total).map(|bt| bt + z * get(ColumnRole::TotalInteraction).unwrap_or(0.0));
    Ok(ModeratedCoefficients { compositional, total })
}

/// Effect of doubling one part with the others held fixed, at moderator 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DoublingEffect {
    /// `β_j + β^(t)`.
    pub coefficient_sum: f64,
    /// Change of the modelled quantity (response, log_b response or linear
    /// predictor): `(β_j + β^(t)) · log_b 2`.
    pub change: f64,
    /// `2^{β_j + β^(t)}` for log responses and log links.
    pub factor: Option<f64>,
}

pub fn doubling_effect(source: &dyn CoefficientSource, part_index: usize) -> Result<DoublingEffect> {
    let meta = source.meta();
    let spec = &meta.spec;
    if part_index >= spec.parts() {
        return Err(Error::RefIndexOutOfRange {
            index: part_index,
            parts: spec.parts(),
        });
    }
    let est = source.estimates();
    let get = |role| meta.column_index(role).map(|i| est[i]);
    let sum = get(ColumnRole::Comp(part_index)).unwrap_or(0.0) + get(ColumnRole::Total).unwrap_or(0.0);
    let log_scale = spec.response_transform == ResponseTransform::Log || source.is_log_link();
    Ok(DoublingEffect {
        coefficient_sum: sum,
        change: sum * spec.log_base.log(2.0),
        factor: log_scale.then(|| 2f64.powf(sum)),
    })
}

fn fmt3(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

fn prob_text(e: &Estimate) -> String {
    match e.sign_prob {
        Some(p) if p > 0.9995 => ">0.999".into(),
        Some(p) => format!("{p:.3}"),
        None => String::new(),
    }
}

fn mark(e: &Estimate) -> &'static str {
    match e.supported {
        Some(true) => " *",
        _ => "",
    }
}

/// Plain-text rendering with three decimals.
pub fn render_text(report: &ElasticityReport) -> String {
    let mut out = String::new();
    let scale = if report.scale == "log_link" {
        "log link"
    } else {
        "log response"
    };
    let _ = writeln!(
        out,
        "Elasticity report ({scale}, log base {})",
        trim_base(report.log_base)
    );
    let _ = writeln!(
        out,
        "Percent response change per 1% increase in a part, other parts fixed."
    );
    if report.parts.iter().any(|p| p.moderated_compositional.is_some()) {
        let _ = writeln!(
            out,
            "beta+int: compositional effect (total fixed) with the moderator one unit up."
        );
    }
    if report.parts.iter().any(|p| p.beta.sign_prob.is_some()) {
        let _ = writeln!(out, "* sign probability above {:.2}", report.support_threshold);
    }
    let _ = writeln!(out);
    let moderated = report.parts.iter().any(|p| p.moderated_elasticity.is_some());
    let mut header = format!(
        "{:<12} {:>9}   {:>8} {:>11} {:>9}",
        "part", "beta", "prob", "elasticity", "exact %"
    );
    if moderated {
        header += &format!(
            " {:>9}   {:>8} {:>9} {:>10} {:>9}",
            "beta_int", "prob", "beta+int", "moderated", "exact %"
        );
    }
    let _ = writeln!(out, "{header}");
    for p in &report.parts {
        let mut line = format!(
            "{:<12} {:>9}{:<2} {:>8} {:>11} {:>9}",
            p.part,
            fmt3(p.beta.value),
            mark(&p.beta).trim_start(),
            prob_text(&p.beta),
            fmt3(p.elasticity),
            fmt3(p.elasticity_change.exact_pct)
        );
        if let (Some(bi), Some(c), Some(m), Some(mc)) = (
            &p.beta_interaction,
            p.moderated_compositional,
            p.moderated_elasticity,
            p.moderated_change,
        ) {
            line += &format!(
                " {:>9}{:<2} {:>8} {:>9} {:>10} {:>9}",
                fmt3(bi.value),
                mark(bi).trim_start(),
                prob_text(bi),
                fmt3(c),
                fmt3(m),
                fmt3(mc.exact_pct)
            );
        }
        let _ = writeln!(out, "{}", line.trim_end());
    }
    if let Some(t) = &report.total {
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "total: beta {}{} (prob {}); all parts +1% -> {}% (exact {}%)",
            fmt3(t.beta_total.value),
            mark(&t.beta_total),
            or_dash(prob_text(&t.beta_total)),
            fmt3(t.scaled_total),
            fmt3(t.scaled_change.exact_pct)
        );
        if let Some(ti) = &t.beta_total_interaction {
            let _ = writeln!(
                out,
                "total x moderator: beta {}{} (prob {})",
                fmt3(ti.value),
                mark(ti),
                or_dash(prob_text(ti))
            );
        }
    }
    if let Some(m) = &report.moderator {
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "moderator: beta {}{} (prob {}); factor {} ({}%)",
            fmt3(m.beta_moderator.value),
            mark(&m.beta_moderator),
            or_dash(prob_text(&m.beta_moderator)),
            fmt3(m.factor),
            fmt3(m.percent_change)
        );
    }
    out
}

fn or_dash(s: String) -> String {
    if s.is_empty() {
        "-".into()
    } else {
        s
    }
}

fn trim_base(b: f64) -> String {
    if (b - std::f64::consts::E).abs() < 1e-15 {
        "e".into()
    } else {
        format!("{b}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compositions::{validate_composition, LogBase};
    use crate::design::{build_design, Dataset, ModeratorKind, Observation};

    fn case_spec() -> ModelSpec {
        let names = ["PM10", "NO2", "O3", "CO", "SO2"].map(String::from).to_vec();
        let mut spec = ModelSpec::log_contrast(names);
        spec.log_base = LogBase::E;
        spec.include_total = true;
        spec.moderator = ModeratorKind::Binary;
        spec.response_transform = ResponseTransform::Log;
        spec
    }

    fn reported() -> CoefficientTable {
        let beta = [-0.002, 0.010, -0.001, -0.006, -0.001];
        let beta_i = [0.025, 0.005, -0.011, 0.003, -0.022];
        let mut entries = vec![
            (ColumnRole::Total, 0.006),
            (ColumnRole::Moderator, 0.071),
            (ColumnRole::TotalInteraction, 0.002),
        ];
        for j in 0..5 {
            entries.push((ColumnRole::Comp(j), beta[j]));
            entries.push((ColumnRole::Interaction(j), beta_i[j]));
        }
        let p_beta = [0.623, 0.914, 0.558, 0.856, 0.561];
        let p_int = [0.937, 0.613, 0.766, 0.580, 0.922];
        let mut probs = vec![
            (ColumnRole::Total, 0.983),
            (ColumnRole::Moderator, 0.9999),
            (ColumnRole::TotalInteraction, 0.629),
        ];
        for j in 0..5 {
            probs.push((ColumnRole::Comp(j), p_beta[j]));
            probs.push((ColumnRole::Interaction(j), p_int[j]));
        }
        CoefficientTable::new(&case_spec(), &entries)
            .unwrap()
            .with_sign_prob(&probs)
            .unwrap()
    }

    #[test]
    fn reported_arithmetic() {
        let table = reported();
        let r = elasticity_report(&table, &ReportOptions::default()).unwrap();
        assert_eq!(fmt3(r.parts[1].elasticity), "0.016");
        let t = r.total.as_ref().unwrap();
        assert_eq!(fmt3(t.scaled_total), "0.030");
        assert!((t.scaled_total - 0.030).abs() < 1e-12);
        let m = r.moderator.as_ref().unwrap();
        assert_eq!(fmt3(m.factor), "1.074");
        assert!((m.factor - 0.071f64.exp()).abs() < 1e-15);
        let z1 = moderated_coefficients(&table, 1.0).unwrap();
        assert_eq!(fmt3(z1.compositional[0]), "0.023");
        assert_eq!(fmt3(r.parts[0].moderated_compositional.unwrap()), "0.023");
        assert!(t.beta_total.supported.unwrap());
        assert!(!r.parts[0].beta.supported.unwrap());
        assert!(r.parts[1].beta.supported.unwrap());
    }

    #[test]
    fn report_invariants() {
        let table = reported();
        let r = elasticity_report(&table, &ReportOptions::default()).unwrap();
        let bt = r.total.as_ref().unwrap().beta_total.value;
        let bti = r.total.as_ref().unwrap().beta_total_interaction.as_ref().unwrap().value;
        let s: f64 = r.parts.iter().map(|p| p.elasticity - bt).sum();
        assert!(s.abs() < 1e-12);
        for p in &r.parts {
            let diff = p.moderated_elasticity.unwrap() - p.elasticity;
            assert!((diff - (p.beta_interaction.as_ref().unwrap().value + bti)).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_coefficients() {
        let table = CoefficientTable::new(&case_spec(), &[]).unwrap();
        let r = elasticity_report(&table, &ReportOptions::default()).unwrap();
        assert!(r
            .parts
            .iter()
            .all(|p| p.elasticity == 0.0 && p.moderated_elasticity == Some(0.0)));
        assert_eq!(r.moderator.unwrap().factor, 1.0);
        let d = doubling_effect(&table, 2).unwrap();
        assert_eq!(d.factor, Some(1.0));
    }

    #[test]
    fn moderated_at_zero_and_zero_sum() {
        let table = reported();
        let z0 = moderated_coefficients(&table, 0.0).unwrap();
        assert_eq!(z0.compositional, vec![-0.002, 0.010, -0.001, -0.006, -0.001]);
        assert_eq!(z0.total, Some(0.006));
        for z in [0.3, 1.0, -2.5] {
            let m = moderated_coefficients(&table, z).unwrap();
            assert!(m.compositional.iter().sum::<f64>().abs() < 1e-15);
        }
        let mut spec = case_spec();
        spec.moderator = ModeratorKind::None;
        let plain = CoefficientTable::new(&spec, &[]).unwrap();
        assert!(matches!(moderated_coefficients(&plain, 1.0), Err(Error::NoModerator)));
    }

    #[test]
    fn identity_response_is_refused() {
        let mut spec = case_spec();
        spec.response_transform = ResponseTransform::Identity;
        let table = CoefficientTable::new(&spec, &[]).unwrap();
        assert!(matches!(
            elasticity_report(&table, &ReportOptions::default()),
            Err(Error::NotLogScale)
        ));
    }

    #[test]
    fn doubling_matches_prediction() {
        let mut spec = ModelSpec::log_contrast(vec!["a".into(), "b".into(), "c".into()]);
        spec.include_total = true;
        spec.response_transform = ResponseTransform::Log;
        let rows: Vec<Observation> = (0..6)
            .map(|i| {
                let parts = vec![1.0 + i as f64, 2.0 + (i * i) as f64, 0.5 + 0.3 * i as f64];
                Observation::new(validate_composition(parts).unwrap(), 1.0)
            })
            .collect();
        let data = Dataset::new(rows).unwrap();
        let x = build_design(&data, &spec).unwrap();
        let table = CoefficientTable::new(
            &spec,
            &[
                (ColumnRole::Intercept, 0.4),
                (ColumnRole::Comp(0), 0.3),
                (ColumnRole::Comp(1), -0.1),
                (ColumnRole::Comp(2), -0.2),
                (ColumnRole::Total, 0.15),
            ],
        )
        .unwrap();
        let one = Dataset::new(vec![data.rows[2].clone()]).unwrap();
        let mut doubled_row = data.rows[2].clone();
        doubled_row.composition = doubled_row.composition.with_part_scaled(1, 2.0).unwrap();
        let doubled = Dataset::new(vec![doubled_row]).unwrap();
        let eta0 = x.predict_linear(&one, &table.estimates).unwrap()[0];
        let eta1 = x.predict_linear(&doubled, &table.estimates).unwrap()[0];
        // log2 response: ratio of responses = 2^(η1 − η0).
        let ratio = 2f64.powf(eta1 - eta0);
        let d = doubling_effect(&table, 1).unwrap();
        assert!((ratio - d.factor.unwrap()).abs() < 1e-10);
        assert!((d.coefficient_sum - 0.05).abs() < 1e-15);
        assert!((d.change - (eta1 - eta0)).abs() < 1e-12);
    }

    #[test]
    fn text_rendering() {
        let r = elasticity_report(&reported(), &ReportOptions::default()).unwrap();
        let text = render_text(&r);
        assert!(text.contains("all parts +1% -> 0.030%"));
        assert!(text.contains("factor 1.074"));
        assert!(text.contains(">0.999"));
    }
}
