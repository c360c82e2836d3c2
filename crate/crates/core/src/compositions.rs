//! Composition primitives: validation, logarithms of parts, the multiplicative
//! total and additive log-ratio coordinates.
//!
//! Compositions are kept non-closed. Nothing here rescales parts to a constant
//! sum, since the absolute magnitude carries the total effect.

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

/// A strictly positive vector of `D >= 2` parts in an arbitrary common unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Composition {
    parts: Vec<f64>,
}

impl Composition {
    pub fn parts(&self) -> &[f64] {
        &self.parts
    }

    /// Number of parts `D`.
    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Multiplies every part by `k > 0`.
    pub fn scaled(&self, k: f64) -> Result<Composition> {
        validate_composition(self.parts.iter().map(|x| x * k).collect())
    }

    /// Reorders parts so that part `i` of the result is part `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Composition {
        assert_eq!(perm.len(), self.parts.len(), "permutation length");
        Composition {
            parts: perm.iter().map(|&i| self.parts[i]).collect(),
        }
    }

    /// Returns a copy with part `index` multiplied by `factor`.
    pub fn with_part_scaled(&self, index: usize, factor: f64) -> Result<Composition> {
        let mut parts = self.parts.clone();
        parts[index] *= factor;
        validate_composition(parts)
    }
}

/// Checks positivity and part count.
pub fn validate_composition(raw: Vec<f64>) -> Result<Composition> {
    if raw.len() < 2 {
        return Err(Error::TooFewParts { found: raw.len() });
    }
    if let Some((index, &value)) = raw.iter().enumerate().find(|(_, x)| !(x.is_finite() && **x > 0.0)) {
        return Err(Error::NonPositivePart { index, value });
    }
    Ok(Composition { parts: raw })
}

/// Logarithm base shared by covariates, total and (optionally) the response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogBase(f64);

impl LogBase {
    pub const TWO: LogBase = LogBase(2.0);
    pub const E: LogBase = LogBase(std::f64::consts::E);
    pub const TEN: LogBase = LogBase(10.0);

    pub fn new(base: f64) -> Result<LogBase> {
        if base.is_finite() && base > 1.0 {
            Ok(LogBase(base))
        } else {
            Err(Error::InvalidLogBase(base))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_natural(self) -> bool {
        self.0 == std::f64::consts::E
    }

    /// `log_b(x)`. Bases 2, e and 10 use the dedicated libm routines so that
    /// exact powers map to exact integers.
    pub fn log(self, x: f64) -> f64 {
        if self.0 == 2.0 {
            x.log2()
        } else if self.0 == 10.0 {
            x.log10()
        } else if self.is_natural() {
            x.ln()
        } else {
            x.ln() / self.0.ln()
        }
    }

    /// `b^x`.
    pub fn pow(self, x: f64) -> f64 {
        if self.0 == 2.0 {
            x.exp2()
        } else if self.is_natural() {
            x.exp()
        } else {
            self.0.powf(x)
        }
    }
}

impl Default for LogBase {
    fn default() -> Self {
        LogBase::TWO
    }
}

impl fmt::Display for LogBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_natural() {
            write!(f, "e")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for LogBase {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_natural() {
            serializer.serialize_str("e")
        } else {
            serializer.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for LogBase {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct BaseVisitor;

        impl Visitor<'_> for BaseVisitor {
            type Value = LogBase;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "a number > 1 or the string \"e\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<LogBase, E> {
                LogBase::new(v).map_err(E::custom)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<LogBase, E> {
                self.visit_f64(v as f64)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<LogBase, E> {
                self.visit_f64(v as f64)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<LogBase, E> {
                match v {
                    "e" | "ln" | "natural" => Ok(LogBase::E),
                    other => other
                        .parse::<f64>()
                        .map_err(|_| E::invalid_value(de::Unexpected::Str(other), &self))
                        .and_then(|b| self.visit_f64(b)),
                }
            }
        }

        deserializer.deserialize_any(BaseVisitor)
    }
}

/// `Σ_j log_b(x_j)`, i.e. `log_b` of the product of the parts.
///
/// Terms are summed in sorted order so the result is bit-identical under any
/// permutation of the parts.
pub fn multiplicative_total(c: &Composition, base: LogBase) -> f64 {
    let mut logs = log_parts(c, base);
    logs.sort_by(f64::total_cmp);
    logs.iter().sum()
}

pub fn log_parts(c: &Composition, base: LogBase) -> Vec<f64> {
    c.parts.iter().map(|&x| base.log(x)).collect()
}

/// Additive log-ratio coordinates `log_b(x_j / x_ref)` for `j != ref_index`,
/// in the original part order.
pub fn alr_coords(c: &Composition, ref_index: usize, base: LogBase) -> Result<Vec<f64>> {
    if ref_index >= c.len() {
        return Err(Error::RefIndexOutOfRange {
            index: ref_index,
            parts: c.len(),
        });
    }
    let reference = c.parts[ref_index];
    Ok(c.parts
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != ref_index)
        .map(|(_, &x)| base.log(x / reference))
        .collect())
}
