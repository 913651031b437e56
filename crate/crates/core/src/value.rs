//! Typed cell values and the data types a scheme can declare.

use std::fmt;

use chrono::NaiveDate;

use crate::duration::Duration;
use crate::error::{Error, Result};

/// Data types available for scheme-constrained columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dtype {
    Bool,
    Date,
    Float,
    Integer,
    Object,
    String,
    Time,
}

impl Dtype {
    pub const ALL: [Dtype; 7] = [
        Dtype::Bool,
        Dtype::Date,
        Dtype::Float,
        Dtype::Integer,
        Dtype::Object,
        Dtype::String,
        Dtype::Time,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Dtype::Bool => "bool",
            Dtype::Date => "date",
            Dtype::Float => "float",
            Dtype::Integer => "integer",
            Dtype::Object => "object",
            Dtype::String => "string",
            Dtype::Time => "time",
        }
    }

    pub fn parse(text: &str) -> Result<Dtype> {
        Dtype::ALL
            .into_iter()
            .find(|d| d.as_str() == text)
            .ok_or_else(|| Error::BadDtype(text.to_string()))
    }

    /// Numeric and time dtypes admit min/max bounds.
    pub fn supports_bounds(self) -> bool {
        matches!(self, Dtype::Float | Dtype::Integer | Dtype::Time)
    }
}

impl fmt::Display for Dtype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A single typed cell value.
///
/// String-like values must be non-empty: the CSV form encodes a missing
/// value as the empty cell, so an empty string is not representable.
#[derive(Debug, Clone)]
pub enum Value {
    Bool(bool),
    Date(NaiveDate),
    Float(f64),
    Integer(i64),
    Object(String),
    Str(String),
    Time(Duration),
}

impl Value {
    pub fn dtype(&self) -> Dtype {
        match self {
            Value::Bool(_) => Dtype::Bool,
            Value::Date(_) => Dtype::Date,
            Value::Float(_) => Dtype::Float,
            Value::Integer(_) => Dtype::Integer,
            Value::Object(_) => Dtype::Object,
            Value::Str(_) => Dtype::String,
            Value::Time(_) => Dtype::Time,
        }
    }

    /// Parses the CSV cell text of a non-missing value under `dtype`.
    pub fn parse(text: &str, dtype: Dtype) -> Result<Value> {
        match dtype {
            Dtype::Bool => match text {
                "true" => Ok(Value::Bool(true)),
                "false" => Ok(Value::Bool(false)),
                _ => Err(Error::TableCsv(format!("invalid bool '{text}'"))),
            },
            Dtype::Date => NaiveDate::parse_from_str(text, "%Y-%m-%d")
                .map(Value::Date)
                .map_err(|_| Error::BadDate(text.to_string())),
            Dtype::Float => text
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(Value::Float)
                .ok_or_else(|| Error::TableCsv(format!("invalid float '{text}'"))),
            Dtype::Integer => text
                .parse::<i64>()
                .map(Value::Integer)
                .map_err(|_| Error::TableCsv(format!("invalid integer '{text}'"))),
            Dtype::Object => Ok(Value::Object(text.to_string())),
            Dtype::String => Ok(Value::Str(text.to_string())),
            Dtype::Time => Duration::parse(text).map(Value::Time),
        }
    }

    /// The CSV cell text of this value.
    pub fn to_cell(&self) -> String {
        match self {
            Value::Bool(v) => v.to_string(),
            Value::Date(v) => v.format("%Y-%m-%d").to_string(),
            Value::Float(v) => v.to_string(),
            Value::Integer(v) => v.to_string(),
            Value::Object(v) | Value::Str(v) => v.clone(),
            Value::Time(v) => v.to_string(),
        }
    }

    /// Total order within one dtype, used for bound checks.
    pub fn partial_cmp_same_dtype(&self, other: &Value) -> Option<std::cmp::Ordering> {
        match (self, other) {
            (Value::Float(a), Value::Float(b)) => a.partial_cmp(b),
            (Value::Integer(a), Value::Integer(b)) => Some(a.cmp(b)),
            (Value::Time(a), Value::Time(b)) => Some(a.cmp(b)),
            _ => None,
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Date(a), Value::Date(b)) => a == b,
            // Bitwise comparison keeps equality reflexive for floats.
            (Value::Float(a), Value::Float(b)) => a.to_bits() == b.to_bits(),
            (Value::Integer(a), Value::Integer(b)) => a == b,
            (Value::Object(a), Value::Object(b)) => a == b,
            (Value::Str(a), Value::Str(b)) => a == b,
            (Value::Time(a), Value::Time(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Value {}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_cell())
    }
}
