//! Design matrices for the log-contrast model family.
//!
//! Column order is fixed and part of the public contract:
//!
//! ```text
//! intercept | comp(1..D) | moderator | interaction(1..D) | total | total_interaction
//! ```
//!
//! Optional columns are omitted when the corresponding term is disabled. With
//! centering on, every non-intercept base column (log-parts, total, numeric
//! moderator) is mean-centered first and interaction columns are products of
//! the centered base columns. Binary moderators stay coded 0/1.

mod lag;
mod reparam;

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::compositions::{log_parts, multiplicative_total, Composition, LogBase};
use crate::error::{Error, Result};

pub use lag::apply_lag;
pub use reparam::{block_sums, constraint_basis, constraint_matrix, decompose_total, recompose_total, BlockReduction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModeratorKind {
    #[default]
    None,
    Numeric,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ResponseTransform {
    #[default]
    Identity,
    Log,
}

fn default_true() -> bool {
    true
}

/// Declarative choice of model family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default)]
    pub log_base: LogBase,
    #[serde(default)]
    pub include_total: bool,
    #[serde(default)]
    pub moderator: ModeratorKind,
    #[serde(default = "default_true")]
    pub center_covariates: bool,
    #[serde(default)]
    pub response_transform: ResponseTransform,
    #[serde(default)]
    pub offset_column: Option<String>,
    #[serde(default)]
    pub part_names: Vec<String>,
}

impl ModelSpec {
    /// Plain log-contrast model on `parts` with base-2 logs and centering.
    pub fn log_contrast(part_names: Vec<String>) -> ModelSpec {
        ModelSpec {
            log_base: LogBase::TWO,
            include_total: false,
            moderator: ModeratorKind::None,
            center_covariates: true,
            response_transform: ResponseTransform::Identity,
            offset_column: None,
            part_names,
        }
    }

    pub fn parts(&self) -> usize {
        self.part_names.len()
    }

    pub fn has_moderator(&self) -> bool {
        self.moderator != ModeratorKind::None
    }

    pub fn uses_offset(&self) -> bool {
        self.offset_column.is_some()
    }

    /// Column roles in contract order.
    pub fn column_roles(&self) -> Vec<ColumnRole> {
        let d = self.parts();
        let mut roles = vec![ColumnRole::Intercept];
        roles.extend((0..d).map(ColumnRole::Comp));
        if self.has_moderator() {
            roles.push(ColumnRole::Moderator);
            roles.extend((0..d).map(ColumnRole::Interaction));
        }
        if self.include_total {
            roles.push(ColumnRole::Total);
            if self.has_moderator() {
                roles.push(ColumnRole::TotalInteraction);
            }
        }
        roles
    }
}

/// What a design column represents. Part indices are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ColumnRole {
    Intercept,
    Comp(usize),
    Moderator,
    Interaction(usize),
    Total,
    TotalInteraction,
}

impl ColumnRole {
    /// Human label such as `comp:PM10`, falling back to `comp:3` without names.
    pub fn label(&self, part_names: &[String]) -> String {
        let part = |j: usize| part_names.get(j).cloned().unwrap_or_else(|| (j + 1).to_string());
        match self {
            ColumnRole::Intercept => "intercept".into(),
            ColumnRole::Comp(j) => format!("comp:{}", part(*j)),
            ColumnRole::Moderator => "moderator".into(),
            ColumnRole::Interaction(j) => format!("interaction:{}", part(*j)),
            ColumnRole::Total => "total".into(),
            ColumnRole::TotalInteraction => "total_interaction".into(),
        }
    }

    /// Inverse of [`ColumnRole::label`].
    pub fn parse_label(label: &str, part_names: &[String]) -> Option<ColumnRole> {
        let part = |name: &str| {
            part_names
                .iter()
                .position(|p| p == name)
                .or_else(|| name.parse::<usize>().ok().and_then(|k| k.checked_sub(1)))
        };
        match label {
            "intercept" => Some(ColumnRole::Intercept),
            "moderator" => Some(ColumnRole::Moderator),
            "total" => Some(ColumnRole::Total),
            "total_interaction" => Some(ColumnRole::TotalInteraction),
            other => {
                if let Some(name) = other.strip_prefix("comp:") {
                    part(name).map(ColumnRole::Comp)
                } else if let Some(name) = other.strip_prefix("interaction:") {
                    part(name).map(ColumnRole::Interaction)
                } else {
                    None
                }
            }
        }
    }
}

impl fmt::Display for ColumnRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label(&[]))
    }
}

/// Zero-sum coefficient blocks of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Comp,
    Interaction,
    /// Interaction block together with the total interaction column.
    AllInteractions,
}

/// One observational unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub composition: Composition,
    pub response: f64,
    pub moderator: Option<f64>,
    pub offset: Option<f64>,
    pub group: Option<String>,
    pub time: Option<i64>,
}

impl Observation {
    pub fn new(composition: Composition, response: f64) -> Observation {
        Observation {
            composition,
            response,
            moderator: None,
            offset: None,
            group: None,
            time: None,
        }
    }
}

/// Rows sharing a common part count, with a running count of rows removed by
/// listwise deletion or lagging.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub rows: Vec<Observation>,
    pub dropped_rows: usize,
}

impl Dataset {
    pub fn new(rows: Vec<Observation>) -> Result<Dataset> {
        if let Some(first) = rows.first() {
            let d = first.composition.len();
            for (row, obs) in rows.iter().enumerate() {
                if obs.composition.len() != d {
                    return Err(Error::InconsistentD {
                        row,
                        expected: d,
                        found: obs.composition.len(),
                    });
                }
            }
        }
        Ok(Dataset { rows, dropped_rows: 0 })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn parts(&self) -> usize {
        self.rows.first().map_or(0, |r| r.composition.len())
    }

    /// Applies a part permutation to every composition (see [`Composition::permuted`]).
    pub fn permute_parts(&self, perm: &[usize]) -> Dataset {
        let mut out = self.clone();
        for row in &mut out.rows {
            row.composition = row.composition.permuted(perm);
        }
        out
    }

    /// Multiplies every part of every composition by `k`.
    pub fn scale_parts(&self, k: f64) -> Result<Dataset> {
        let mut out = self.clone();
        for row in &mut out.rows {
            row.composition = row.composition.scaled(k)?;
        }
        Ok(out)
    }
}

/// Means subtracted from the base columns before products are formed.
#[derive(Debug, Clone, PartialEq)]
struct BaseCenters {
    parts: Vec<f64>,
    moderator: f64,
    total: f64,
}

/// Numeric design plus the metadata needed to interpret coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub values: DMatrix<f64>,
    pub column_roles: Vec<ColumnRole>,
    /// Column index sets whose coefficients must sum to zero.
    pub constraint_blocks: Vec<Vec<usize>>,
    /// Per-column subtracted mean; 0 for uncentered columns.
    pub centers: Vec<f64>,
    /// Natural-log offsets, when the model has one.
    pub offset: Option<DVector<f64>>,
    pub spec: ModelSpec,
    base: BaseCenters,
}

impl DesignMatrix {
    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
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

    /// Column indices of a named block; `None` when the model lacks it.
    pub fn block_columns(&self, kind: BlockKind) -> Option<Vec<usize>> {
        let cols: Vec<usize> = self
            .column_roles
            .iter()
            .enumerate()
            .filter(|(_, r)| match kind {
                BlockKind::Comp => matches!(r, ColumnRole::Comp(_)),
                BlockKind::Interaction => matches!(r, ColumnRole::Interaction(_)),
                BlockKind::AllInteractions => {
                    matches!(r, ColumnRole::Interaction(_) | ColumnRole::TotalInteraction)
                }
            })
            .map(|(i, _)| i)
            .collect();
        (!cols.is_empty()).then_some(cols)
    }

    /// Number of free coefficients: columns minus one per zero-sum block.
    pub fn free_parameters(&self) -> usize {
        self.ncols() - self.constraint_blocks.len()
    }

    /// Copy without the given columns. Constraint blocks touched by the
    /// removal must be removed whole; they are then dropped.
    pub fn without_columns(&self, remove: &[usize]) -> Result<DesignMatrix> {
        let keep: Vec<usize> = (0..self.ncols()).filter(|c| !remove.contains(c)).collect();
        let new_index = |old: usize| keep.iter().position(|&k| k == old);
        let mut blocks = Vec::new();
        for block in &self.constraint_blocks {
            let kept: Vec<usize> = block.iter().filter_map(|&c| new_index(c)).collect();
            if kept.len() == block.len() {
                blocks.push(kept);
            } else if !kept.is_empty() {
                return Err(Error::UnknownBlock("cannot remove part of a zero-sum block".into()));
            }
        }
        Ok(DesignMatrix {
            values: self.values.select_columns(&keep),
            column_roles: keep.iter().map(|&c| self.column_roles[c]).collect(),
            constraint_blocks: blocks,
            centers: keep.iter().map(|&c| self.centers[c]).collect(),
            offset: self.offset.clone(),
            spec: self.spec.clone(),
            base: self.base.clone(),
        })
    }

    /// Builds rows for new data using this design's centers, so that
    /// `apply(data) * coefficients` is a prediction on the fitted scale.
    pub fn apply(&self, data: &Dataset) -> Result<DMatrix<f64>> {
        let full = assemble(data, &self.spec, Some(&self.base))?;
        let all_roles = self.spec.column_roles();
        let cols: Vec<usize> = self
            .column_roles
            .iter()
            .map(|r| all_roles.iter().position(|a| a == r).expect("role in spec"))
            .collect();
        Ok(full.values.select_columns(&cols))
    }

    /// Linear predictor `Xβ (+ offset)` on new data.
    pub fn predict_linear(&self, data: &Dataset, coefficients: &DVector<f64>) -> Result<DVector<f64>> {
        let x = self.apply(data)?;
        if x.ncols() != coefficients.len() {
            return Err(Error::DimensionMismatch {
                what: "coefficients",
                expected: x.ncols(),
                found: coefficients.len(),
            });
        }
        let mut eta = x * coefficients;
        if self.spec.uses_offset() {
            eta += offsets(data)?;
        }
        Ok(eta)
    }
}

/// Builds the design matrix for `spec` on `data`.
pub fn build_design(data: &Dataset, spec: &ModelSpec) -> Result<DesignMatrix> {
    if data.is_empty() {
        return Err(Error::DimensionMismatch {
            what: "rows",
            expected: 1,
            found: 0,
        });
    }
    if spec.parts() != 0 && spec.parts() != data.parts() {
        return Err(Error::InconsistentD {
            row: 0,
            expected: spec.parts(),
            found: data.parts(),
        });
    }
    assemble(data, spec, None)
}

fn offsets(data: &Dataset) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(data.len());
    for (i, row) in data.rows.iter().enumerate() {
        let value = row.offset.ok_or(Error::MissingOffset { row: i })?;
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::InvalidValue {
                row: i,
                what: "offset",
                value,
            });
        }
        out[i] = value.ln();
    }
    Ok(out)
}

fn moderator_values(data: &Dataset, kind: ModeratorKind) -> Result<Vec<f64>> {
    data.rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let z = row.moderator.ok_or(Error::MissingModerator { row: i })?;
            let valid = match kind {
                ModeratorKind::Binary => z == 0.0 || z == 1.0,
                _ => z.is_finite(),
            };
            if valid {
                Ok(z)
            } else {
                Err(Error::InvalidValue {
                    row: i,
                    what: "moderator",
                    value: z,
                })
            }
        })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn assemble(data: &Dataset, spec: &ModelSpec, fixed: Option<&BaseCenters>) -> Result<DesignMatrix> {
    let n = data.len();
    let d = data.parts();
    for (row, obs) in data.rows.iter().enumerate() {
        if obs.composition.len() != d {
            return Err(Error::InconsistentD {
                row,
                expected: d,
                found: obs.composition.len(),
            });
        }
    }
    let base = spec.log_base;

    // Raw base columns.
    let mut logs: Vec<Vec<f64>> = vec![Vec::with_capacity(n); d];
    let mut total = Vec::with_capacity(n);
    for obs in &data.rows {
        for (j, l) in log_parts(&obs.composition, base).into_iter().enumerate() {
            logs[j].push(l);
        }
        total.push(multiplicative_total(&obs.composition, base));
    }
    let z = if spec.has_moderator() {
        Some(moderator_values(data, spec.moderator)?)
    } else {
        None
    };

    let centers = match fixed {
        Some(c) => c.clone(),
        None if spec.center_covariates => BaseCenters {
            parts: logs.iter().map(|c| mean(c)).collect(),
            moderator: match (&z, spec.moderator) {
                (Some(z), ModeratorKind::Numeric) => mean(z),
                _ => 0.0,
            },
            total: if spec.include_total { mean(&total) } else { 0.0 },
        },
        None => BaseCenters {
            parts: vec![0.0; d],
            moderator: 0.0,
            total: 0.0,
        },
    };

    for (col, c) in logs.iter_mut().zip(&centers.parts) {
        col.iter_mut().for_each(|v| *v -= c);
    }
    total.iter_mut().for_each(|v| *v -= centers.total);
    let z = z.map(|mut z| {
        z.iter_mut().for_each(|v| *v -= centers.moderator);
        z
    });

    let roles = spec.column_roles();
    let mut values = DMatrix::zeros(n, roles.len());
    let mut col_centers = vec![0.0; roles.len()];
    for (c, role) in roles.iter().enumerate() {
        match *role {
            ColumnRole::Intercept => values.column_mut(c).fill(1.0),
            ColumnRole::Comp(j) => {
                col_centers[c] = centers.parts[j];
                values.column_mut(c).copy_from_slice(&logs[j]);
            }
            ColumnRole::Moderator => {
                col_centers[c] = centers.moderator;
                values.column_mut(c).copy_from_slice(z.as_ref().expect("moderator"));
            }
            ColumnRole::Interaction(j) => {
                let z = z.as_ref().expect("moderator");
                for i in 0..n {
                    values[(i, c)] = z[i] * logs[j][i];
                }
            }
            ColumnRole::Total => {
                col_centers[c] = centers.total;
                values.column_mut(c).copy_from_slice(&total);
            }
            ColumnRole::TotalInteraction => {
                let z = z.as_ref().expect("moderator");
                for i in 0..n {
                    values[(i, c)] = z[i] * total[i];
                }
            }
        }
    }

    let mut constraint_blocks = vec![(1..=d).collect::<Vec<_>>()];
    if spec.has_moderator() {
        let start = d + 2;
        constraint_blocks.push((start..start + d).collect());
    }

    let offset = if spec.uses_offset() { Some(offsets(data)?) } else { None };

    Ok(DesignMatrix {
        values,
        column_roles: roles,
        constraint_blocks,
        centers: col_centers,
        offset,
        spec: spec.clone(),
        base: centers,
    })
}

/// Response on the fitted scale: `y` or `log_b(y)`.
pub fn response_vector(data: &Dataset, spec: &ModelSpec) -> Result<DVector<f64>> {
    let mut y = DVector::zeros(data.len());
    for (i, row) in data.rows.iter().enumerate() {
        let v = row.response;
        y[i] = match spec.response_transform {
            ResponseTransform::Identity if v.is_finite() => v,
            ResponseTransform::Log if v.is_finite() && v > 0.0 => spec.log_base.log(v),
            _ => {
                return Err(Error::InvalidValue {
                    row: i,
                    what: "response",
                    value: v,
                })
            }
        };
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compositions::validate_composition;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn names(d: usize) -> Vec<String> {
        (1..=d).map(|j| format!("x{j}")).collect()
    }

    fn toy(n: usize, d: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..n)
            .map(|i| {
                let parts = (0..d).map(|_| rng.random_range(0.1..50.0)).collect();
                let mut obs = Observation::new(validate_composition(parts).unwrap(), rng.random());
                obs.moderator = Some((i % 3 == 0) as u8 as f64);
                obs.offset = Some(rng.random_range(100.0..1000.0));
                obs
            })
            .collect();
        Dataset::new(rows).unwrap()
    }

    #[test]
    fn full_case_study_layout() {
        let mut spec = ModelSpec::log_contrast(names(5));
        spec.include_total = true;
        spec.moderator = ModeratorKind::Binary;
        let x = build_design(&toy(40, 5, 1), &spec).unwrap();
        assert_eq!(x.ncols(), 14);
        assert_eq!(x.constraint_blocks.len(), 2);
        assert_eq!(x.constraint_blocks[0], vec![1, 2, 3, 4, 5]);
        assert_eq!(x.constraint_blocks[1], vec![7, 8, 9, 10, 11]);
        assert_eq!(x.column_roles[6], ColumnRole::Moderator);
        assert_eq!(x.column_roles[12], ColumnRole::Total);
        assert_eq!(x.column_roles[13], ColumnRole::TotalInteraction);
        assert_eq!(x.centers.len(), 14);
        // Binary moderator kept as 0/1.
        assert!(x.values.column(6).iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn minimal_layout() {
        let spec = ModelSpec::log_contrast(names(2));
        let x = build_design(&toy(10, 2, 2), &spec).unwrap();
        assert_eq!(x.ncols(), 3);
        assert_eq!(x.constraint_blocks, vec![vec![1, 2]]);
        assert_eq!(
            x.column_roles.iter().filter(|r| **r == ColumnRole::Intercept).count(),
            1
        );
    }

    #[test]
    fn centered_columns_have_zero_mean() {
        let mut spec = ModelSpec::log_contrast(names(4));
        spec.include_total = true;
        spec.moderator = ModeratorKind::Numeric;
        let mut data = toy(57, 4, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for row in &mut data.rows {
            row.moderator = Some(rng.random_range(-3.0..10.0));
        }
        let x = build_design(&data, &spec).unwrap();
        for (c, role) in x.column_roles.iter().enumerate() {
            if matches!(role, ColumnRole::Comp(_) | ColumnRole::Total | ColumnRole::Moderator) {
                assert!(x.values.column(c).mean().abs() < 1e-10, "{role}");
                assert!(x.centers[c] != 0.0);
            }
        }
        // Interaction is the product of centered columns.
        let zc = x.column_index(ColumnRole::Moderator).unwrap();
        let c1 = x.column_index(ColumnRole::Comp(1)).unwrap();
        let i1 = x.column_index(ColumnRole::Interaction(1)).unwrap();
        for i in 0..x.nrows() {
            assert_eq!(x.values[(i, i1)], x.values[(i, zc)] * x.values[(i, c1)]);
        }
    }

    #[test]
    fn missing_fields_are_errors() {
        let mut spec = ModelSpec::log_contrast(names(3));
        spec.moderator = ModeratorKind::Binary;
        let mut data = toy(5, 3, 4);
        data.rows[2].moderator = None;
        assert!(matches!(
            build_design(&data, &spec),
            Err(Error::MissingModerator { row: 2 })
        ));

        let mut spec = ModelSpec::log_contrast(names(3));
        spec.offset_column = Some("pop".into());
        let mut data = toy(5, 3, 4);
        data.rows[4].offset = None;
        assert!(matches!(
            build_design(&data, &spec),
            Err(Error::MissingOffset { row: 4 })
        ));

        let mut data = toy(5, 3, 4);
        data.rows[1].composition = validate_composition(vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            build_design(&data, &ModelSpec::log_contrast(names(3))),
            Err(Error::InconsistentD { row: 1, .. })
        ));
        let rows = toy(3, 3, 1).rows.into_iter().chain(toy(1, 4, 1).rows).collect();
        assert!(matches!(Dataset::new(rows), Err(Error::InconsistentD { row: 3, .. })));
    }

    #[test]
    fn permutation_equivariance() {
        let mut spec = ModelSpec::log_contrast(names(5));
        spec.include_total = true;
        spec.moderator = ModeratorKind::Binary;
        let data = toy(30, 5, 5);
        let perm = [3, 0, 4, 1, 2];
        let x = build_design(&data, &spec).unwrap();
        let xp = build_design(&data.permute_parts(&perm), &spec).unwrap();
        for (c, role) in x.column_roles.iter().enumerate() {
            match role {
                ColumnRole::Comp(_) | ColumnRole::Interaction(_) => {
                    let permuted_col = xp.column_index(*role).unwrap();
                    let original_col = x.column_index(source_role(role, &perm)).unwrap();
                    assert_eq!(xp.values.column(permuted_col), x.values.column(original_col));
                }
                _ => assert_eq!(x.values.column(c), xp.values.column(c), "{role}"),
            }
        }
        assert_eq!(x.constraint_blocks, xp.constraint_blocks);
    }

    fn source_role(role: &ColumnRole, perm: &[usize]) -> ColumnRole {
        match *role {
            ColumnRole::Comp(j) => ColumnRole::Comp(perm[j]),
            ColumnRole::Interaction(j) => ColumnRole::Interaction(perm[j]),
            r => r,
        }
    }

    #[test]
    fn blocks_do_not_depend_on_centering() {
        let mut spec = ModelSpec::log_contrast(names(3));
        spec.moderator = ModeratorKind::Numeric;
        spec.include_total = true;
        let data = toy(12, 3, 6);
        let a = build_design(&data, &spec).unwrap();
        spec.center_covariates = false;
        let b = build_design(&data, &spec).unwrap();
        assert_eq!(a.constraint_blocks, b.constraint_blocks);
        assert!(b.centers.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn apply_reproduces_training_rows() {
        let mut spec = ModelSpec::log_contrast(names(4));
        spec.include_total = true;
        spec.moderator = ModeratorKind::Binary;
        let data = toy(20, 4, 7);
        let x = build_design(&data, &spec).unwrap();
        assert_eq!(x.apply(&data).unwrap(), x.values);
        let reduced = x.without_columns(&[x.ncols() - 1]).unwrap();
        assert_eq!(reduced.apply(&data).unwrap(), reduced.values);
        assert!(x.without_columns(&[2]).is_err());
    }

    #[test]
    fn labels_round_trip() {
        let n = names(3);
        let spec = ModelSpec {
            include_total: true,
            moderator: ModeratorKind::Numeric,
            ..ModelSpec::log_contrast(n.clone())
        };
        for role in spec.column_roles() {
            assert_eq!(ColumnRole::parse_label(&role.label(&n), &n), Some(role));
        }
    }

    #[test]
    fn log_response() {
        let mut spec = ModelSpec::log_contrast(names(2));
        spec.response_transform = ResponseTransform::Log;
        let mut data = toy(3, 2, 8);
        data.rows[0].response = 8.0;
        assert_eq!(response_vector(&data, &spec).unwrap()[0], 3.0);
        data.rows[1].response = 0.0;
        assert!(matches!(
            response_vector(&data, &spec),
            Err(Error::InvalidValue { row: 1, .. })
        ));
    }
}
