//! Frequentist estimation of the log-contrast family.
//!
//! Two independent routes produce the same estimates: a direct solve of the
//! equality-constrained normal equations (KKT system) and ordinary least
//! squares on alr-transformed blocks mapped back to the zero-sum scale.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use crate::compositions::alr_coords;
use crate::design::{
    build_design, constraint_basis, constraint_matrix, response_vector, BlockKind, BlockReduction, ColumnRole, Dataset,
    DesignMatrix, ModelSpec,
};
use crate::error::{Error, Result};

/// Singular values below this fraction of the largest one mean rank deficiency.
pub const RANK_TOL: f64 = 1e-10;

/// Column metadata carried by fitted models.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMeta {
    pub column_roles: Vec<ColumnRole>,
    pub constraint_blocks: Vec<Vec<usize>>,
    pub spec: ModelSpec,
}

impl DesignMeta {
    pub fn of(x: &DesignMatrix) -> DesignMeta {
        DesignMeta {
            column_roles: x.column_roles.clone(),
            constraint_blocks: x.constraint_blocks.clone(),
            spec: x.spec.clone(),
        }
    }

    pub fn column_index(&self, role: ColumnRole) -> Option<usize> {
        self.column_roles.iter().position(|r| *r == role)
    }

    pub fn labels(&self) -> Vec<String> {
        self.column_roles
            .iter()
            .map(|r| r.label(&self.spec.part_names))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct FreqFit {
    pub coefficients: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub sigma2_hat: f64,
    pub df_resid: usize,
    pub rss: f64,
    pub design_meta: DesignMeta,
}

impl FreqFit {
    pub fn std_errors(&self) -> DVector<f64> {
        self.covariance.diagonal().map(|v| v.max(0.0).sqrt())
    }

    pub fn coefficient(&self, role: ColumnRole) -> Option<f64> {
        self.design_meta.column_index(role).map(|i| self.coefficients[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum TestDf {
    Single(f64),
    Pair(f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    pub df: TestDf,
    pub p_value: f64,
    pub hypothesis: String,
}

fn check_rows(x: &DesignMatrix, y: &DVector<f64>) -> Result<()> {
    if y.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            what: "response",
            expected: x.nrows(),
            found: y.len(),
        });
    }
    if x.nrows() <= x.free_parameters() {
        return Err(Error::DimensionMismatch {
            what: "observations (need more rows than free parameters)",
            expected: x.free_parameters() + 1,
            found: x.nrows(),
        });
    }
    Ok(())
}

fn check_rank(a: &DMatrix<f64>) -> Result<()> {
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    let ratio = if max > 0.0 { min / max } else { 0.0 };
    if ratio < RANK_TOL {
        return Err(Error::RankDeficient { ratio });
    }
    Ok(())
}

fn offset_adjusted(x: &DesignMatrix, y: &DVector<f64>) -> DVector<f64> {
    match &x.offset {
        Some(o) => y - o,
        None => y.clone(),
    }
}

/// Least squares subject to every constraint block summing to zero, solved
/// through the KKT system `[[XᵀX, Cᵀ], [C, 0]]`.
pub fn fit_constrained_ols(x: &DesignMatrix, y: &DVector<f64>) -> Result<FreqFit> {
    check_rows(x, y)?;
    let p = x.ncols();
    let m = x.constraint_blocks.len();
    let z = constraint_basis(p, &x.constraint_blocks, BlockReduction::Orthonormal)?;
    check_rank(&(&x.values * &z))?;

    let y = offset_adjusted(x, y);
    let xtx = x.values.tr_mul(&x.values);
    let xty = x.values.tr_mul(&y);
    // Constraint rows are rescaled to the magnitude of XᵀX; the constrained
    // solution and the primal block of the inverse are unaffected.
    let scale = xtx.amax().max(1.0);
    let c = constraint_matrix(p, &x.constraint_blocks) * scale;

    let mut kkt = DMatrix::zeros(p + m, p + m);
    kkt.view_mut((0, 0), (p, p)).copy_from(&xtx);
    kkt.view_mut((p, 0), (m, p)).copy_from(&c);
    kkt.view_mut((0, p), (p, m)).copy_from(&c.transpose());
    let mut rhs = DVector::zeros(p + m);
    rhs.rows_mut(0, p).copy_from(&xty);

    let lu = kkt.lu();
    let solution = lu.solve(&rhs).ok_or(Error::RankDeficient { ratio: 0.0 })?;
    let inverse = lu.try_inverse().ok_or(Error::RankDeficient { ratio: 0.0 })?;
    let coefficients = solution.rows(0, p).into_owned();

    let resid = &y - &x.values * &coefficients;
    let rss = resid.norm_squared();
    let df_resid = x.nrows() - (p - m);
    let sigma2_hat = rss / df_resid as f64;
    let primal = inverse.view((0, 0), (p, p));
    let covariance = (primal + primal.transpose()) * (0.5 * sigma2_hat);

    Ok(FreqFit {
        coefficients,
        covariance,
        sigma2_hat,
        df_resid,
        rss,
        design_meta: DesignMeta::of(x),
    })
}

/// Ordinary least squares after replacing each zero-sum block by its alr
/// coordinates with reference part `ref_index`, mapped back so the result is
/// on the same constrained scale as [`fit_constrained_ols`].
pub fn fit_alr_ols(data: &Dataset, spec: &ModelSpec, ref_index: usize) -> Result<FreqFit> {
    let d = data.parts();
    if ref_index >= d {
        return Err(Error::RefIndexOutOfRange {
            index: ref_index,
            parts: d,
        });
    }
    let x = build_design(data, spec)?;
    let y = response_vector(data, spec)?;
    check_rows(&x, &y)?;
    let n = x.nrows();

    // alr columns, centered like the log-part columns they replace.
    let mut alr = DMatrix::zeros(n, d - 1);
    for (i, row) in data.rows.iter().enumerate() {
        let coords = alr_coords(&row.composition, ref_index, spec.log_base)?;
        for (k, v) in coords.into_iter().enumerate() {
            alr[(i, k)] = v;
        }
    }
    if spec.center_covariates {
        for mut col in alr.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
        }
    }
    let moderator = x
        .column_index(ColumnRole::Moderator)
        .map(|c| x.values.column(c).into_owned());

    let mut columns: Vec<DVector<f64>> = Vec::new();
    for (c, role) in x.column_roles.iter().enumerate() {
        match role {
            ColumnRole::Comp(0) => columns.extend(alr.column_iter().map(|v| v.into_owned())),
            ColumnRole::Interaction(0) => {
                let z = moderator.as_ref().expect("interaction implies moderator");
                columns.extend(alr.column_iter().map(|v| v.component_mul(z)));
            }
            ColumnRole::Comp(_) | ColumnRole::Interaction(_) => {}
            _ => columns.push(x.values.column(c).into_owned()),
        }
    }
    let a = DMatrix::from_columns(&columns);
    check_rank(&a)?;

    let y = offset_adjusted(&x, &y);
    let qr = a.clone().qr();
    let r = qr.r();
    let qty = qr.q().tr_mul(&y);
    let gamma = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::RankDeficient { ratio: 0.0 })?;
    let resid = &y - &a * &gamma;
    let rss = resid.norm_squared();
    let df_resid = n - a.ncols();
    let sigma2_hat = rss / df_resid as f64;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(a.ncols(), a.ncols()))
        .ok_or(Error::RankDeficient { ratio: 0.0 })?;
    let cov_gamma = &r_inv * r_inv.transpose() * sigma2_hat;

    let map = constraint_basis(x.ncols(), &x.constraint_blocks, BlockReduction::Reference(ref_index))?;
    let coefficients = &map * gamma;
    let covariance = &map * cov_gamma * map.transpose();

    Ok(FreqFit {
        coefficients,
        covariance,
        sigma2_hat,
        df_resid,
        rss,
        design_meta: DesignMeta::of(&x),
    })
}

/// Joint F test that a coefficient block is zero, by refitting without it.
pub fn f_test_block(fit: &FreqFit, y: &DVector<f64>, x: &DesignMatrix, block: BlockKind) -> Result<TestResult> {
    let cols = x
        .block_columns(block)
        .ok_or_else(|| Error::UnknownBlock(format!("{block:?}")))?;
    let removed_blocks = x
        .constraint_blocks
        .iter()
        .filter(|b| b.iter().all(|c| cols.contains(c)))
        .count();
    let q = cols.len() - removed_blocks;
    let restricted = fit_constrained_ols(&x.without_columns(&cols)?, y)?;

    let df_f = fit.df_resid as f64;
    let numerator = (restricted.rss - fit.rss).max(0.0) / q as f64;
    let denominator = fit.rss / df_f;
    let statistic = if denominator > 0.0 {
        numerator / denominator
    } else if numerator > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    let p_value = if statistic.is_infinite() {
        0.0
    } else {
        let dist = FisherSnedecor::new(q as f64, df_f).expect("positive df");
        dist.sf(statistic).clamp(0.0, 1.0)
    };
    Ok(TestResult {
        statistic,
        df: TestDf::Pair(q as f64, df_f),
        p_value,
        hypothesis: format!(
            "all {} coefficients are zero",
            match block {
                BlockKind::Comp => "compositional",
                BlockKind::Interaction => "interaction",
                BlockKind::AllInteractions => "interaction and total-interaction",
            }
        ),
    })
}

/// Wald t test of a single coefficient against zero, two-sided, using the
/// constrained covariance for zero-sum block members.
pub fn t_test_coef(fit: &FreqFit, column: ColumnRole) -> Result<TestResult> {
    let i = fit
        .design_meta
        .column_index(column)
        .ok_or_else(|| Error::UnknownColumn(column.label(&fit.design_meta.spec.part_names)))?;
    let beta = fit.coefficients[i];
    let se = fit.covariance[(i, i)].max(0.0).sqrt();
    let df = fit.df_resid as f64;
    let (statistic, p_value) = if se > 0.0 {
        let t = beta / se;
        let dist = StudentsT::new(0.0, 1.0, df).expect("positive df");
        (t, (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0))
    } else if beta != 0.0 {
        (beta.signum() * f64::INFINITY, 0.0)
    } else {
        (0.0, 1.0)
    };
    Ok(TestResult {
        statistic,
        df: TestDf::Single(df),
        p_value,
        hypothesis: format!("{} = 0", column.label(&fit.design_meta.spec.part_names)),
    })
}
