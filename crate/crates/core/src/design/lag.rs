use std::collections::HashMap;

use crate::design::Dataset;
use crate::error::{Error, Result};

/// Replaces each row's covariates (composition and moderator) by those of the
/// row `lag` time steps earlier in the same group. Response and offset stay at
/// the current time. Rows whose lagged source is absent are dropped and
/// counted in `dropped_rows`.
///
/// Rows without a group key form a single group. Time keys are required for
/// any positive lag.
pub fn apply_lag(data: &Dataset, lag: u32) -> Result<Dataset> {
    if lag == 0 {
        return Ok(data.clone());
    }
    let mut index: HashMap<(Option<&str>, i64), usize> = HashMap::with_capacity(data.len());
    for (i, row) in data.rows.iter().enumerate() {
        let time = row.time.ok_or(Error::MissingTimeKeys { row: i })?;
        index.insert((row.group.as_deref(), time), i);
    }

    let mut rows = Vec::with_capacity(data.len());
    for row in &data.rows {
        let time = row.time.expect("checked above");
        let source = time
            .checked_sub(i64::from(lag))
            .and_then(|t| index.get(&(row.group.as_deref(), t)));
        if let Some(&s) = source {
            let mut out = row.clone();
            out.composition = data.rows[s].composition.clone();
            out.moderator = data.rows[s].moderator;
            rows.push(out);
        }
    }
    let dropped = data.len() - rows.len();
    Ok(Dataset {
        rows,
        dropped_rows: data.dropped_rows + dropped,
    })
}
