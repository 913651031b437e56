//! Value constraints for table columns.

use std::fmt;

use crate::error::{Error, Result};
use crate::value::{Dtype, Value};

/// Where a scheme's permitted labels come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Labels {
    /// An inline list of permitted values.
    Inline(Vec<Value>),
    /// The index values of a misc table serve as labels.
    MiscTable(String),
}

/// A constraint on the values of a column: data type, optional label set,
/// optional numeric/time bounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scheme {
    pub dtype: Dtype,
    pub labels: Option<Labels>,
    pub min: Option<Value>,
    pub max: Option<Value>,
}

impl Scheme {
    pub fn plain(dtype: Dtype) -> Scheme {
        Scheme {
            dtype,
            labels: None,
            min: None,
            max: None,
        }
    }

    pub fn with_labels(dtype: Dtype, labels: Vec<Value>) -> Scheme {
        Scheme {
            dtype,
            labels: Some(Labels::Inline(labels)),
            min: None,
            max: None,
        }
    }

    pub fn from_misc_table(dtype: Dtype, table_id: impl Into<String>) -> Scheme {
        Scheme {
            dtype,
            labels: Some(Labels::MiscTable(table_id.into())),
            min: None,
            max: None,
        }
    }

    pub fn with_range(dtype: Dtype, min: Option<Value>, max: Option<Value>) -> Scheme {
        Scheme {
            dtype,
            labels: None,
            min,
            max,
        }
    }

    /// Structural checks that do not need other tables: dtype consistency of
    /// labels and bounds, min <= max.
    pub fn validate(&self, id: &str) -> Result<()> {
        if let Some(Labels::Inline(labels)) = &self.labels {
            for label in labels {
                if label.dtype() != self.dtype {
                    return Err(Error::Header(format!(
                        "scheme '{id}': label '{label}' is not of dtype {}",
                        self.dtype
                    )));
                }
            }
        }
        if (self.min.is_some() || self.max.is_some()) && !self.dtype.supports_bounds() {
            return Err(Error::Header(format!(
                "scheme '{id}': bounds are only allowed on numeric or time dtypes"
            )));
        }
        for bound in [&self.min, &self.max].into_iter().flatten() {
            if bound.dtype() != self.dtype {
                return Err(Error::Header(format!(
                    "scheme '{id}': bound '{bound}' is not of dtype {}",
                    self.dtype
                )));
            }
        }
        if let (Some(min), Some(max)) = (&self.min, &self.max) {
            if min.partial_cmp_same_dtype(max) == Some(std::cmp::Ordering::Greater) {
                return Err(Error::Header(format!("scheme '{id}': min > max")));
            }
        }
        Ok(())
    }

    /// Id of the misc table backing this scheme's labels, if any.
    pub fn labels_table(&self) -> Option<&str> {
        match &self.labels {
            Some(Labels::MiscTable(id)) => Some(id),
            _ => None,
        }
    }
}

/// Why a value does not satisfy a scheme.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation(pub String);

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Checks one value against a scheme. For misc-backed label sets the caller
/// supplies the resolved labels via `misc_labels`.
pub fn validate_value(
    value: &Value,
    scheme: &Scheme,
    misc_labels: Option<&[Value]>,
) -> std::result::Result<(), Violation> {
    if value.dtype() != scheme.dtype {
        return Err(Violation(format!(
            "value '{value}' has dtype {}, scheme expects {}",
            value.dtype(),
            scheme.dtype
        )));
    }
    if let Some(min) = &scheme.min {
        if value.partial_cmp_same_dtype(min) == Some(std::cmp::Ordering::Less) {
            return Err(Violation(format!(
                "value '{value}' is below minimum '{min}'"
            )));
        }
    }
    if let Some(max) = &scheme.max {
        if value.partial_cmp_same_dtype(max) == Some(std::cmp::Ordering::Greater) {
            return Err(Violation(format!(
                "value '{value}' is above maximum '{max}'"
            )));
        }
    }
    match &scheme.labels {
        None => Ok(()),
        Some(Labels::Inline(labels)) => {
            if labels.contains(value) {
                Ok(())
            } else {
                Err(Violation(format!(
                    "value '{value}' is not a permitted label"
                )))
            }
        }
        Some(Labels::MiscTable(table_id)) => match misc_labels {
            Some(labels) if labels.contains(value) => Ok(()),
            Some(_) => Err(Violation(format!(
                "value '{value}' is not listed in misc table '{table_id}'"
            ))),
            None => Err(Violation(format!(
                "labels of misc table '{table_id}' are not available"
            ))),
        },
    }
}
