//! Output files: coefficient tables, JSON with full-precision numbers, and
//! the run manifest.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::design::{ColumnRole, ModelSpec};
use crate::error::Result;
use crate::io::data::fmt_full;

/// One coefficient as written to the tables.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientRow {
    pub term: String,
    #[serde(skip)]
    pub role: ColumnRole,
    pub estimate: f64,
    pub sd: Option<f64>,
    pub sign_prob: Option<f64>,
    pub p_value: Option<f64>,
}

/// Serializes `value` as indented JSON, printing every float with 17
/// significant digits.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&mut out, &v, 0);
    out.push('\n');
    Ok(out)
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                let f = n.as_f64().expect("f64 number");
                out.push_str(&fmt_full(f));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string")),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_value(out, item, indent + 1);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (i, (k, item)) in map.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&serde_json::to_string(k).expect("key"));
                out.push_str(": ");
                write_value(out, item, indent + 1);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Machine-readable table: `term,estimate,sd,sign_prob,p_value`, empty
/// fields where the backend has no such quantity.
pub fn coefficients_csv(rows: &[CoefficientRow]) -> String {
    let opt = |v: Option<f64>| v.map(fmt_full).unwrap_or_default();
    let mut out = String::from("term,estimate,sd,sign_prob,p_value\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            csv_field(&r.term),
            fmt_full(r.estimate),
            opt(r.sd),
            opt(r.sign_prob),
            opt(r.p_value)
        );
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn fmt3(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

fn fmt_prob(p: f64) -> String {
    if p > 0.9995 {
        ">0.999".into()
    } else {
        format!("{p:.3}")
    }
}

/// Human-readable table in two column groups, main effects and their
/// interaction with the moderator, each as estimate plus a second column
/// (sign probability, or p-value when no sign probability exists).
pub fn coefficients_text(title: &str, rows: &[CoefficientRow], spec: &ModelSpec, footer: &[String]) -> String {
    let second = |r: &CoefficientRow| match (r.sign_prob, r.p_value) {
        (Some(p), _) => fmt_prob(p),
        (None, Some(p)) => format!("{p:.3}"),
        (None, None) => String::new(),
    };
    let uses_prob = rows.iter().any(|r| r.sign_prob.is_some());
    let (est_head, second_head) = if uses_prob { ("Mean", "Prob.") } else { ("Est.", "p") };
    let find = |role: ColumnRole| rows.iter().find(|r| r.role == role);
    let names: Vec<String> = (0..spec.parts())
        .map(|j| spec.part_names.get(j).cloned().unwrap_or_else(|| (j + 1).to_string()))
        .collect();
    let width = names
        .iter()
        .map(String::len)
        .chain(["total x moderator".len()])
        .max()
        .unwrap_or(8);

    let mut out = String::new();
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out);
    let moderated = spec.has_moderator();
    if moderated {
        let groups = format!("{:<width$}  {:^17}  {:^17}", "", "main effect", "x moderator");
        let _ = writeln!(out, "{}", groups.trim_end());
        let _ = writeln!(
            out,
            "{:<width$}  {:>8} {:>8}  {:>8} {:>8}",
            "", est_head, second_head, est_head, second_head
        );
    } else {
        let _ = writeln!(out, "{:<width$}  {:>8} {:>8}", "", est_head, second_head);
    }
    let cell = |r: Option<&CoefficientRow>| match r {
        Some(r) => format!("{:>8} {:>8}", fmt3(r.estimate), second(r)),
        None => format!("{:>8} {:>8}", "", ""),
    };
    let line = |out: &mut String, name: &str, main: Option<&CoefficientRow>, int: Option<&CoefficientRow>| {
        let mut l = format!("{name:<width$}  {}", cell(main));
        if moderated && int.is_some() {
            l += &format!("  {}", cell(int));
        }
        let _ = writeln!(out, "{}", l.trim_end());
    };
    for (j, name) in names.iter().enumerate() {
        line(
            &mut out,
            name,
            find(ColumnRole::Comp(j)),
            find(ColumnRole::Interaction(j)),
        );
    }
    if let Some(t) = find(ColumnRole::Total) {
        line(&mut out, "total", Some(t), find(ColumnRole::TotalInteraction));
    }
    if let Some(m) = find(ColumnRole::Moderator) {
        line(&mut out, "moderator", Some(m), None);
    }
    if let Some(i) = find(ColumnRole::Intercept) {
        line(&mut out, "intercept", Some(i), None);
    }
    if !footer.is_empty() {
        let _ = writeln!(out);
        for f in footer {
            let _ = writeln!(out, "{f}");
        }
    }
    out
}
