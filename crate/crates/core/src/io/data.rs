//! CSV ingestion and export of datasets.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::compositions::validate_composition;
use crate::design::{Dataset, Observation};
use crate::error::{Error, Result};

/// Which CSV columns feed which model inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnMapping {
    pub parts: Vec<String>,
    pub response: String,
    #[serde(default)]
    pub moderator: Option<String>,
    #[serde(default)]
    pub offset: Option<String>,
    #[serde(default)]
    pub group: Option<String>,
    #[serde(default)]
    pub time: Option<String>,
}

impl ColumnMapping {
    pub fn validate(&self) -> Result<()> {
        if self.parts.len() < 2 {
            return Err(Error::Config(format!(
                "at least 2 parts are needed, got {}",
                self.parts.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &self.parts {
            if !seen.insert(name.as_str()) {
                return Err(Error::Config(format!("part {name:?} is listed twice")));
            }
        }
        Ok(())
    }
}

/// Rows read from a file, before and after listwise deletion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LoadCounts {
    pub rows_read: usize,
    pub rows_dropped_missing: usize,
}

/// Reads a header-first CSV. Rows with an empty mapped field are dropped and
/// counted in `Dataset::dropped_rows`; rows are numbered from 1 after the
/// header in error messages.
pub fn load_csv(path: &Path, mapping: &ColumnMapping) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_csv(file, mapping)
}

pub fn read_csv<R: std::io::Read>(reader: R, mapping: &ColumnMapping) -> Result<Dataset> {
    mapping.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let response_col = find(&mapping.response)?;
    let part_cols = mapping.parts.iter().map(|p| find(p)).collect::<Result<Vec<_>>>()?;
    let optional = |name: &Option<String>| name.as_deref().map(find).transpose();
    let moderator_col = optional(&mapping.moderator)?;
    let offset_col = optional(&mapping.offset)?;
    let group_col = optional(&mapping.group)?;
    let time_col = optional(&mapping.time)?;

    let mut rows = Vec::new();
    let mut dropped = 0;
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let mut used: Vec<usize> = vec![response_col];
        used.extend(&part_cols);
        used.extend([moderator_col, offset_col, group_col, time_col].into_iter().flatten());
        if used.iter().any(|&c| record.get(c).is_none_or(str::is_empty)) {
            dropped += 1;
            continue;
        }
        let number = |c: usize| -> Result<f64> {
            let raw = &record[c];
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Parse {
                    row,
                    column: headers[c].to_string(),
                    value: raw.to_string(),
                }),
            }
        };
        let mut parts = Vec::with_capacity(part_cols.len());
        for (k, &c) in part_cols.iter().enumerate() {
            let v = number(c)?;
            if v <= 0.0 {
                return Err(Error::NonPositivePartInRow {
                    row,
                    part: mapping.parts[k].clone(),
                    value: v,
                });
            }
            parts.push(v);
        }
        let mut obs = Observation::new(validate_composition(parts)?, number(response_col)?);
        obs.moderator = moderator_col.map(number).transpose()?;
        obs.offset = offset_col.map(number).transpose()?;
        obs.group = group_col.map(|c| record[c].to_string());
        obs.time = time_col
            .map(|c| {
                record[c].parse::<i64>().map_err(|_| Error::Parse {
                    row,
                    column: headers[c].to_string(),
                    value: record[c].to_string(),
                })
            })
            .transpose()?;
        rows.push(obs);
    }
    let mut data = Dataset::new(rows)?;
    data.dropped_rows = dropped;
    Ok(data)
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_full(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a dataset as CSV with the given column names.
pub fn write_csv(path: &Path, data: &Dataset, mapping: &ColumnMapping, integer_response: bool) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<&str> = mapping.parts.iter().map(String::as_str).collect();
    header.extend(mapping.moderator.as_deref());
    header.extend(mapping.offset.as_deref());
    header.push(&mapping.response);
    w.write_record(&header)?;
    for row in &data.rows {
        let mut rec: Vec<String> = row.composition.parts().iter().map(|v| fmt_full(*v)).collect();
        if mapping.moderator.is_some() {
            rec.push(row.moderator.map(fmt_full).unwrap_or_default());
        }
        if mapping.offset.is_some() {
            rec.push(row.offset.map(fmt_full).unwrap_or_default());
        }
        rec.push(if integer_response {
            format!("{}", row.response as i64)
        } else {
            fmt_full(row.response)
        });
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mapping() -> ColumnMapping {
        ColumnMapping {
            parts: ["PM10", "PM25", "NO2", "O3", "SO2"].map(String::from).to_vec(),
            response: "deaths".into(),
            moderator: Some("extreme".into()),
            offset: Some("population".into()),
            group: None,
            time: None,
        }
    }

    const GOLDEN: &str = "\
PM10,PM25,NO2,O3,SO2,extreme,population,deaths
21.5,11.2,18.0,95.1,1.9,0,12000,1
30.1,15.8,25.3,80.4,2.4,1,8500,0
18.7,9.9,14.2,102.6,1.1,0,15000,3
";

    #[test]
    fn golden_three_rows() {
        let data = read_csv(GOLDEN.as_bytes(), &mapping()).unwrap();
        assert_eq!(data.len(), 3);
        assert_eq!(data.parts(), 5);
        assert_eq!(data.rows[1].moderator, Some(1.0));
        assert_eq!(data.rows[2].response, 3.0);
        assert_eq!(data.dropped_rows, 0);
    }

    #[test]
    fn column_order_does_not_matter() {
        let shuffled = "\
deaths,SO2,population,O3,extreme,NO2,PM25,PM10
1,1.9,12000,95.1,0,18.0,11.2,21.5
0,2.4,8500,80.4,1,25.3,15.8,30.1
3,1.1,15000,102.6,0,14.2,9.9,18.7
";
        let a = read_csv(GOLDEN.as_bytes(), &mapping()).unwrap();
        let b = read_csv(shuffled.as_bytes(), &mapping()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_part_names_row_and_column() {
        let bad = GOLDEN.replace("30.1,15.8,25.3", "30.1,15.8,0");
        match read_csv(bad.as_bytes(), &mapping()) {
            Err(Error::NonPositivePartInRow { row, part, value }) => {
                assert_eq!((row, part.as_str(), value), (2, "NO2", 0.0));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_column_and_parse_errors() {
        let mut m = mapping();
        m.response = "mortality".into();
        assert!(matches!(read_csv(GOLDEN.as_bytes(), &m), Err(Error::MissingColumn(c)) if c == "mortality"));
        let bad = GOLDEN.replace("95.1", "high");
        assert!(matches!(
            read_csv(bad.as_bytes(), &mapping()),
            Err(Error::Parse { row: 1, ref column, .. }) if column == "O3"
        ));
    }

    #[test]
    fn listwise_deletion_is_counted() {
        let gappy = GOLDEN.replace("30.1,15.8,25.3,80.4,2.4,1,8500,0", "30.1,15.8,25.3,80.4,2.4,,8500,0");
        let data = read_csv(gappy.as_bytes(), &mapping()).unwrap();
        assert_eq!(data.len(), 2);
        assert_eq!(data.dropped_rows, 1);
    }

    #[test]
    fn duplicate_parts_rejected() {
        let mut m = mapping();
        m.parts[1] = "PM10".into();
        assert!(matches!(read_csv(GOLDEN.as_bytes(), &m), Err(Error::Config(_))));
    }
}
