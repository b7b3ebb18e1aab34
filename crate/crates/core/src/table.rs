//! The typed table that every service returns.
//!
//! Wire form: `{"columns":[{"name","type","unit","description"}...],"rows":[[...]...]}`
//! with numbers as JSON numbers. Floats print in shortest round-trip form.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Int64,
    Float64,
    String,
}

impl ColumnType {
    pub fn parse(s: &str) -> Option<ColumnType> {
        match s.to_ascii_lowercase().as_str() {
            "int64" => Some(ColumnType::Int64),
            "float64" => Some(ColumnType::Float64),
            "string" => Some(ColumnType::String),
            _ => None,
        }
    }
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnType::Int64 => "int64",
            ColumnType::Float64 => "float64",
            ColumnType::String => "string",
        })
    }
}

/// A single cell. Booleans only appear as intermediate expression results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Float(f64),
    Str(String),
    Bool(bool),
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "int64",
            Value::Float(_) => "float64",
            Value::Str(_) => "string",
            Value::Bool(_) => "bool",
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(f) => Some(*f),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    /// Coerces a deserialized cell to the declared column type.
    fn coerce(self, ty: ColumnType) -> Option<Value> {
        match (ty, self) {
            (ColumnType::Int64, Value::Int(i)) => Some(Value::Int(i)),
            (ColumnType::Float64, Value::Float(f)) => Some(Value::Float(f)),
            (ColumnType::Float64, Value::Int(i)) => Some(Value::Float(i as f64)),
            (ColumnType::String, Value::Str(s)) => Some(Value::Str(s)),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x}"),
            Value::Str(s) => f.write_str(s),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnInfo {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ColumnType,
    #[serde(default)]
    pub unit: String,
    #[serde(default)]
    pub description: String,
}

impl ColumnInfo {
    pub fn new(name: impl Into<String>, ty: ColumnType) -> Self {
        Self { name: name.into(), ty, unit: String::new(), description: String::new() }
    }

    pub fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.unit = unit.into();
        self
    }

    pub fn with_description(mut self, d: impl Into<String>) -> Self {
        self.description = d.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TableError {
    #[error("row {row} has {got} cells, expected {expected}")]
    RowWidth { row: usize, got: usize, expected: usize },
    #[error("row {row}, column '{column}': expected {expected}, got {got}")]
    CellType { row: usize, column: String, expected: ColumnType, got: &'static str },
    #[error("non-finite float in row {row}, column '{column}'")]
    NonFinite { row: usize, column: String },
    #[error("malformed table document: {0}")]
    Json(String),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ResultTable {
    pub columns: Vec<ColumnInfo>,
    pub rows: Vec<Vec<Value>>,
}

#[derive(Deserialize)]
struct RawTable {
    columns: Vec<ColumnInfo>,
    #[serde(default)]
    rows: Vec<Vec<Value>>,
}

impl<'de> Deserialize<'de> for ResultTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawTable::deserialize(d)?;
        ResultTable::new(raw.columns, raw.rows).map_err(serde::de::Error::custom)
    }
}

impl ResultTable {
    /// Builds a table, checking row widths and coercing cells to column types.
    pub fn new(columns: Vec<ColumnInfo>, rows: Vec<Vec<Value>>) -> Result<Self, TableError> {
        let mut checked = Vec::with_capacity(rows.len());
        for (r, row) in rows.into_iter().enumerate() {
            if row.len() != columns.len() {
                return Err(TableError::RowWidth { row: r, got: row.len(), expected: columns.len() });
            }
            let mut out = Vec::with_capacity(row.len());
            for (cell, col) in row.into_iter().zip(&columns) {
                let got = cell.type_name();
                let v = cell.coerce(col.ty).ok_or_else(|| TableError::CellType {
                    row: r,
                    column: col.name.clone(),
                    expected: col.ty,
                    got,
                })?;
                if let Value::Float(f) = v {
                    if !f.is_finite() {
                        return Err(TableError::NonFinite { row: r, column: col.name.clone() });
                    }
                }
                out.push(v);
            }
            checked.push(out);
        }
        Ok(Self { columns, rows: checked })
    }

    pub fn empty(columns: Vec<ColumnInfo>) -> Self {
        Self { columns, rows: Vec::new() }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .or_else(|| self.columns.iter().position(|c| c.name.eq_ignore_ascii_case(name)))
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("tables hold only finite values")
    }

    pub fn from_json(s: &str) -> Result<Self, TableError> {
        serde_json::from_str(s).map_err(|e| TableError::Json(e.to_string()))
    }

    /// Comma-separated rendering with a header row.
    pub fn to_csv(&self) -> String {
        let mut s = self.columns.iter().map(|c| c.name.as_str()).collect::<Vec<_>>().join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Value::to_string).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    /// Fixed-width text rendering for terminals.
    pub fn to_text(&self) -> String {
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(Value::to_string).collect())
            .collect();
        let widths: Vec<usize> = self
            .columns
            .iter()
            .enumerate()
            .map(|(i, c)| cells.iter().map(|r| r[i].len()).chain([c.name.len()]).max().unwrap_or(0))
            .collect();
        let line = |vals: Vec<&str>| {
            vals.iter()
                .zip(&widths)
                .map(|(v, w)| format!("{v:>w$}"))
                .collect::<Vec<_>>()
                .join("  ")
        };
        let mut out = line(self.columns.iter().map(|c| c.name.as_str()).collect());
        out.push('\n');
        out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
        out.push('\n');
        for r in &cells {
            out.push_str(&line(r.iter().map(String::as_str).collect()));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> ResultTable {
        ResultTable::new(
            vec![
                ColumnInfo::new("o.objId", ColumnType::Int64),
                ColumnInfo::new("o.r", ColumnType::Float64).with_unit("mag"),
                ColumnInfo::new("o.name", ColumnType::String),
            ],
            vec![
                vec![Value::Int(1), Value::Float(20.5), Value::Str("a".into())],
                vec![Value::Int(2), Value::Float(3.0), Value::Str("b".into())],
            ],
        )
        .unwrap()
    }

    #[test]
    fn wire_shape() {
        let json = sample().to_json();
        assert!(json.starts_with(r#"{"columns":[{"name":"o.objId","type":"int64","unit":"","description":""}"#));
        assert!(json.contains(r#""rows":[[1,20.5,"a"],[2,3.0,"b"]]"#));
        assert_eq!(ResultTable::from_json(&json).unwrap(), sample());
    }

    #[test]
    fn bad_documents() {
        let err = ResultTable::from_json(r#"{"columns":[{"name":"a","type":"int64"}],"rows":[["x"]]}"#);
        assert!(matches!(err, Err(TableError::Json(_))));
        let err = ResultTable::new(vec![ColumnInfo::new("a", ColumnType::Int64)], vec![vec![]]);
        assert!(matches!(err, Err(TableError::RowWidth { .. })));
        let err = ResultTable::new(
            vec![ColumnInfo::new("a", ColumnType::Float64)],
            vec![vec![Value::Float(f64::NAN)]],
        );
        assert!(matches!(err, Err(TableError::NonFinite { .. })));
    }

    #[test]
    fn integral_floats_stay_floats() {
        let t = ResultTable::from_json(r#"{"columns":[{"name":"a","type":"float64"}],"rows":[[3]]}"#).unwrap();
        assert_eq!(t.rows[0][0], Value::Float(3.0));
    }

    proptest! {
        #[test]
        fn floats_round_trip_exactly(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO,
                                     i in any::<i64>()) {
            let t = ResultTable::new(
                vec![ColumnInfo::new("f", ColumnType::Float64), ColumnInfo::new("i", ColumnType::Int64)],
                vec![vec![Value::Float(x), Value::Int(i)]],
            ).unwrap();
            let back = ResultTable::from_json(&t.to_json()).unwrap();
            let Value::Float(y) = back.rows[0][0] else { panic!() };
            prop_assert_eq!(y.to_bits(), x.to_bits());
            prop_assert_eq!(&back.rows[0][1], &Value::Int(i));
        }
    }
}
