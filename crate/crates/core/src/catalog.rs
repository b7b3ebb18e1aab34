//! Node-side catalog storage: schema-described tables loaded from CSV, an
//! HTM index over row positions, local query evaluation and the metadata
//! documents served by a node.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::htm::{trixel_of_point, HtmError, PointIndex, TrixelId, DEFAULT_INDEX_LEVEL, MAX_LEVEL};
use crate::query::{
    eval_predicate, parse, AreaSpec, ColumnRef, EvalError, Expr, Projection, QueryAst, QueryError, RowContext,
};
use crate::sphere::{angular_separation, SkyPos, UnitVec3};
use crate::table::{ColumnInfo, ColumnType, ResultTable, Value};
use crate::xmatch::ArchiveSigma;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("data row {row}, column '{column}': {message}")]
    Data { row: usize, column: String, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("unknown table '{0}'")]
    UnknownTable(String),
    #[error("unknown column '{0}'")]
    UnknownColumn(String),
    #[error("{0}")]
    Query(#[from] QueryError),
    #[error("evaluation error: {0}")]
    Eval(#[from] EvalError),
    #[error("unsupported query: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Htm(#[from] HtmError),
}

impl CatalogError {
    /// Stable machine-readable code for service error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            CatalogError::Schema(_) => "schema_error",
            CatalogError::Data { .. } => "data_error",
            CatalogError::Io { .. } => "io_error",
            CatalogError::UnknownTable(_) => "unknown_table",
            CatalogError::UnknownColumn(_) => "unknown_column",
            CatalogError::Query(_) => "parse_error",
            CatalogError::Eval(EvalError::UnknownColumn(_)) => "unknown_column",
            CatalogError::Eval(_) => "type_error",
            CatalogError::Unsupported(_) => "unsupported",
            CatalogError::Htm(_) => "internal",
        }
    }
}

fn io_err(path: &Path, e: impl ToString) -> CatalogError {
    CatalogError::Io { path: path.display().to_string(), message: e.to_string() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSchema {
    pub table_name: String,
    #[serde(default)]
    pub description: String,
    pub key_column: String,
    pub ra_column: String,
    pub dec_column: String,
    pub columns: Vec<ColumnInfo>,
}

impl TableSchema {
    pub fn from_toml(text: &str) -> Result<Self, CatalogError> {
        let s: TableSchema = toml::from_str(text).map_err(|e| CatalogError::Schema(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("schema serializes")
    }

    pub fn load(path: &Path) -> Result<Self, CatalogError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            CatalogError::Schema(m) => CatalogError::Schema(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        let mut seen = std::collections::HashSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.to_ascii_lowercase()) {
                return Err(CatalogError::Schema(format!("duplicate column '{}'", c.name)));
            }
            if c.name.is_empty() || !c.name.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_') {
                return Err(CatalogError::Schema(format!("column name '{}' is not an identifier", c.name)));
            }
        }
        for (role, name, ty) in [
            ("key", &self.key_column, ColumnType::Int64),
            ("ra", &self.ra_column, ColumnType::Float64),
            ("dec", &self.dec_column, ColumnType::Float64),
        ] {
            match self.column(name) {
                None => return Err(CatalogError::Schema(format!("{role} column '{name}' is not declared"))),
                Some((_, c)) if c.ty != ty => {
                    return Err(CatalogError::Schema(format!("{role} column '{name}' must be {ty}, not {}", c.ty)))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    /// Case-insensitive column lookup.
    pub fn column(&self, name: &str) -> Option<(usize, &ColumnInfo)> {
        self.columns.iter().enumerate().find(|(_, c)| c.name.eq_ignore_ascii_case(name))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Int(Vec<i64>),
    Float(Vec<f64>),
    Str(Vec<String>),
}

impl ColumnData {
    fn with_type(ty: ColumnType, cap: usize) -> Self {
        match ty {
            ColumnType::Int64 => ColumnData::Int(Vec::with_capacity(cap)),
            ColumnType::Float64 => ColumnData::Float(Vec::with_capacity(cap)),
            ColumnType::String => ColumnData::Str(Vec::with_capacity(cap)),
        }
    }

    pub fn get(&self, row: usize) -> Value {
        match self {
            ColumnData::Int(v) => Value::Int(v[row]),
            ColumnData::Float(v) => Value::Float(v[row]),
            ColumnData::Str(v) => Value::Str(v[row].clone()),
        }
    }

    fn push(&mut self, v: Value) -> Result<(), String> {
        match (self, v) {
            (ColumnData::Int(c), Value::Int(i)) => c.push(i),
            (ColumnData::Float(c), Value::Float(f)) if f.is_finite() => c.push(f),
            (ColumnData::Float(c), Value::Int(i)) => c.push(i as f64),
            (ColumnData::Str(c), Value::Str(s)) if !s.contains(',') && !s.contains('\n') => c.push(s),
            (_, v) => return Err(format!("value {v} ({}) does not fit the column", v.type_name())),
        }
        Ok(())
    }

    fn parse_push(&mut self, text: &str) -> Result<(), String> {
        match self {
            ColumnData::Int(c) => c.push(text.parse().map_err(|_| format!("'{text}' is not an int64"))?),
            ColumnData::Float(c) => {
                let f: f64 = text.parse().map_err(|_| format!("'{text}' is not a float64"))?;
                if !f.is_finite() {
                    return Err(format!("'{text}' is not finite"));
                }
                c.push(f)
            }
            ColumnData::Str(c) => c.push(text.to_string()),
        }
        Ok(())
    }
}

/// One immutable table with positions indexed by HTM trixel.
#[derive(Debug, Clone)]
pub struct CatalogTable {
    schema: TableSchema,
    columns: Vec<ColumnData>,
    positions: Vec<UnitVec3>,
    htm_ids: Vec<TrixelId>,
    index: PointIndex,
    lookup: HashMap<String, usize>,
}

impl CatalogTable {
    fn build(schema: TableSchema, columns: Vec<ColumnData>, level: u8) -> Result<Self, CatalogError> {
        if level > MAX_LEVEL {
            return Err(CatalogError::Schema(format!("index level {level} exceeds {MAX_LEVEL}")));
        }
        let (ra_i, _) = schema.column(&schema.ra_column).expect("validated");
        let (dec_i, _) = schema.column(&schema.dec_column).expect("validated");
        let (ColumnData::Float(ra), ColumnData::Float(dec)) = (&columns[ra_i], &columns[dec_i]) else {
            unreachable!("position columns are float64 after validation")
        };
        let mut positions = Vec::with_capacity(ra.len());
        for (row, (&r, &d)) in ra.iter().zip(dec).enumerate() {
            let p = SkyPos::new(r, d).map_err(|e| CatalogError::Data {
                row: row + 1,
                column: schema.dec_column.clone(),
                message: e.to_string(),
            })?;
            positions.push(p.to_unitvec());
        }
        let htm_ids = positions.iter().map(|p| trixel_of_point(p, level)).collect::<Result<Vec<_>, _>>()?;
        let index = PointIndex::build(&positions, level)?;
        let lookup = schema.columns.iter().enumerate().map(|(i, c)| (c.name.to_ascii_lowercase(), i)).collect();
        Ok(Self { schema, columns, positions, htm_ids, index, lookup })
    }

    /// Parses CSV text whose header must equal the schema's column names.
    /// Rows are numbered from 1, the header being row 0.
    pub fn from_csv(schema: TableSchema, text: &str, level: u8) -> Result<Self, CatalogError> {
        schema.validate()?;
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| CatalogError::Data {
            row: 0,
            column: String::new(),
            message: "missing header row".into(),
        })?;
        let names: Vec<&str> = header.split(',').map(str::trim).collect();
        let expected: Vec<&str> = schema.columns.iter().map(|c| c.name.as_str()).collect();
        if names != expected {
            return Err(CatalogError::Data {
                row: 0,
                column: String::new(),
                message: format!("header {names:?} does not match schema columns {expected:?}"),
            });
        }
        let mut columns: Vec<ColumnData> = schema.columns.iter().map(|c| ColumnData::with_type(c.ty, 0)).collect();
        for (lineno, line) in lines {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != columns.len() {
                return Err(CatalogError::Data {
                    row: lineno,
                    column: String::new(),
                    message: format!("{} cells, expected {}", cells.len(), columns.len()),
                });
            }
            for ((cell, col), info) in cells.iter().zip(columns.iter_mut()).zip(&schema.columns) {
                col.parse_push(cell.trim()).map_err(|message| CatalogError::Data {
                    row: lineno,
                    column: info.name.clone(),
                    message,
                })?;
            }
        }
        Self::build(schema, columns, level)
    }

    pub fn from_rows(schema: TableSchema, rows: Vec<Vec<Value>>, level: u8) -> Result<Self, CatalogError> {
        schema.validate()?;
        let mut columns: Vec<ColumnData> =
            schema.columns.iter().map(|c| ColumnData::with_type(c.ty, rows.len())).collect();
        for (r, row) in rows.into_iter().enumerate() {
            if row.len() != columns.len() {
                return Err(CatalogError::Data {
                    row: r + 1,
                    column: String::new(),
                    message: format!("{} cells, expected {}", row.len(), columns.len()),
                });
            }
            for ((v, col), info) in row.into_iter().zip(columns.iter_mut()).zip(&schema.columns) {
                col.push(v).map_err(|message| CatalogError::Data { row: r + 1, column: info.name.clone(), message })?;
            }
        }
        Self::build(schema, columns, level)
    }

    pub fn load(schema_path: &Path, data_path: &Path, level: u8) -> Result<Self, CatalogError> {
        let schema = TableSchema::load(schema_path)?;
        let text = std::fs::read_to_string(data_path).map_err(|e| io_err(data_path, e))?;
        Self::from_csv(schema, &text, level).map_err(|e| match e {
            CatalogError::Data { row, column, message } => CatalogError::Data {
                row,
                column,
                message: format!("{message} (in {})", data_path.display()),
            },
            e => e,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.schema.columns.iter().map(|c| c.name.as_str()).collect::<Vec<_>>().join(",");
        out.push('\n');
        for r in 0..self.len() {
            let cells: Vec<String> = self.columns.iter().map(|c| c.get(r).to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn schema(&self) -> &TableSchema {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn index_level(&self) -> u8 {
        self.index.level()
    }

    pub fn position(&self, row: usize) -> UnitVec3 {
        self.positions[row]
    }

    pub fn htm_id(&self, row: usize) -> TrixelId {
        self.htm_ids[row]
    }

    /// Row permutation sorted by trixel id.
    pub fn htm_order(&self) -> Vec<usize> {
        self.index.order().collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.lookup.get(&name.to_ascii_lowercase()).copied()
    }

    pub fn value(&self, row: usize, col: usize) -> Value {
        self.columns[col].get(row)
    }

    pub fn key(&self, row: usize) -> i64 {
        let i = self.column_index(&self.schema.key_column).expect("validated");
        match &self.columns[i] {
            ColumnData::Int(v) => v[row],
            _ => unreachable!("key column is int64"),
        }
    }

    /// Rows inside `area` (all rows if absent), in row order.
    pub fn rows_in_area(&self, area: Option<&AreaSpec>) -> Result<Vec<usize>, CatalogError> {
        let Some(area) = area else {
            return Ok((0..self.len()).collect());
        };
        let center = area.center.to_unitvec();
        let radius = area.radius_rad();
        let mut rows: Vec<usize> = self
            .index
            .cone_candidates(&center, radius)?
            .into_iter()
            .filter(|&r| angular_separation(&center, &self.positions[r]) <= radius)
            .collect();
        rows.sort_unstable();
        Ok(rows)
    }

    fn check_columns<'a>(&self, cols: impl IntoIterator<Item = &'a ColumnRef>) -> Result<(), CatalogError> {
        for c in cols {
            if self.column_index(&c.column).is_none() {
                return Err(CatalogError::UnknownColumn(c.qualified()));
            }
        }
        Ok(())
    }

    /// Rows inside `area` satisfying every predicate.
    pub fn select_rows(&self, predicates: &[Expr], area: Option<&AreaSpec>) -> Result<Vec<usize>, CatalogError> {
        for p in predicates {
            self.check_columns(p.columns())?;
        }
        let mut out = Vec::new();
        for row in self.rows_in_area(area)? {
            let ctx = RowRef { table: self, row };
            let mut keep = true;
            for p in predicates {
                keep &= eval_predicate(p, &ctx)?;
            }
            if keep {
                out.push(row);
            }
        }
        Ok(out)
    }

    /// Projects `rows` onto `columns`; result columns are named `alias.column`
    /// when `qualify` is set and by the schema name otherwise.
    pub fn project(&self, rows: &[usize], columns: &[ColumnRef], qualify: bool) -> Result<ResultTable, CatalogError> {
        let mut idx = Vec::with_capacity(columns.len());
        let mut infos = Vec::with_capacity(columns.len());
        for c in columns {
            let i = self.column_index(&c.column).ok_or_else(|| CatalogError::UnknownColumn(c.qualified()))?;
            let mut info = self.schema.columns[i].clone();
            if qualify {
                info.name = format!("{}.{}", c.alias, c.column);
            }
            idx.push(i);
            infos.push(info);
        }
        let data = rows.iter().map(|&r| idx.iter().map(|&i| self.columns[i].get(r)).collect()).collect();
        Ok(ResultTable { columns: infos, rows: data })
    }
}

struct RowRef<'a> {
    table: &'a CatalogTable,
    row: usize,
}

impl RowContext for RowRef<'_> {
    fn value(&self, col: &ColumnRef) -> Option<Value> {
        self.table.column_index(&col.column).map(|i| self.table.columns[i].get(self.row))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LocalResult {
    Rows(ResultTable),
    Count(u64),
}

impl LocalResult {
    pub fn into_table(self) -> ResultTable {
        match self {
            LocalResult::Rows(t) => t,
            LocalResult::Count(n) => ResultTable {
                columns: vec![ColumnInfo::new("count", ColumnType::Int64).with_description("number of matching rows")],
                rows: vec![vec![Value::Int(n as i64)]],
            },
        }
    }
}

/// Runs a single-table query: cone narrowing through the index, exact
/// separation test, predicates, then projection or count.
pub fn local_query(table: &CatalogTable, ast: &QueryAst) -> Result<LocalResult, CatalogError> {
    if ast.xmatch.is_some() {
        return Err(CatalogError::Unsupported("XMATCH is evaluated by the federation, not by Query".into()));
    }
    let select_cols = ast.select_columns().to_vec();
    table.check_columns(&select_cols)?;
    let rows = table.select_rows(&ast.predicates, ast.area.as_ref())?;
    match ast.select {
        Projection::CountStar => Ok(LocalResult::Count(rows.len() as u64)),
        Projection::Columns(_) => Ok(LocalResult::Rows(table.project(&rows, &select_cols, false)?)),
    }
}

/// Sky region covered by an archive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub ra: f64,
    pub dec: f64,
    pub radius_arcmin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionInfo {
    pub name: String,
    pub params: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveMeta {
    pub archive_name: String,
    #[serde(default)]
    pub sky_coverage: Vec<Coverage>,
    #[serde(default)]
    pub wavelength_coverage: String,
    pub sigma: ArchiveSigma,
    #[serde(default = "default_functions")]
    pub functions: Vec<FunctionInfo>,
}

pub fn default_functions() -> Vec<FunctionInfo> {
    let f = |name: &str, params: &str, description: &str| FunctionInfo {
        name: name.into(),
        params: params.into(),
        description: description.into(),
    };
    vec![
        f("Info", "", "archive-level key/value description: coverage, wavelength, positional accuracy"),
        f("Schema", "", "full schema document of every table"),
        f("Tables", "", "table names and descriptions"),
        f("Columns", "table", "column names, types, units and descriptions of one table"),
        f("Functions", "", "callable functions of this node"),
        f("DocSearch", "key", "tables, columns and functions whose name, unit or description contains key"),
        f("Query", "sql", "single-table query with optional AREA cone restriction"),
        f("XMatch", "plan", "probabilistic cross-match step of a federated query chain"),
        f("AREA", "ra, dec, radius_arcmin", "cone restriction on the table's position columns"),
    ]
}

/// The full schema document returned by `/schema`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaDocument {
    pub archive: String,
    pub tables: Vec<TableSchema>,
}

/// All tables of one archive together with its metadata.
#[derive(Debug, Clone)]
pub struct Catalog {
    pub meta: ArchiveMeta,
    tables: Vec<CatalogTable>,
}

impl Catalog {
    pub fn new(meta: ArchiveMeta, tables: Vec<CatalogTable>) -> Result<Self, CatalogError> {
        let mut seen = std::collections::HashSet::new();
        for t in &tables {
            if !seen.insert(t.schema.table_name.to_ascii_lowercase()) {
                return Err(CatalogError::Schema(format!("table '{}' defined twice", t.schema.table_name)));
            }
        }
        Ok(Self { meta, tables })
    }

    pub fn tables(&self) -> &[CatalogTable] {
        &self.tables
    }

    pub fn table(&self, name: &str) -> Result<&CatalogTable, CatalogError> {
        self.tables
            .iter()
            .find(|t| t.schema.table_name.eq_ignore_ascii_case(name))
            .ok_or_else(|| CatalogError::UnknownTable(name.to_string()))
    }

    /// Resolves the single table of a node-local query, checking the
    /// archive prefix if one is given.
    pub fn resolve(&self, ast: &QueryAst) -> Result<&CatalogTable, CatalogError> {
        let [t] = ast.tables.as_slice() else {
            return Err(CatalogError::Unsupported("a node query names exactly one table".into()));
        };
        if let Some(a) = &t.archive {
            if !a.eq_ignore_ascii_case(&self.meta.archive_name) {
                return Err(CatalogError::UnknownTable(format!("{a}:{}", t.table)));
            }
        }
        self.table(&t.table)
    }

    pub fn query_sql(&self, sql: &str) -> Result<ResultTable, CatalogError> {
        let ast = parse(sql)?;
        let table = self.resolve(&ast)?;
        Ok(local_query(table, &ast)?.into_table())
    }

    pub fn info(&self) -> ResultTable {
        let m = &self.meta;
        let coverage: Vec<String> =
            m.sky_coverage.iter().map(|c| format!("AREA({},{},{})", c.ra, c.dec, c.radius_arcmin)).collect();
        let rows_total: usize = self.tables.iter().map(CatalogTable::len).sum();
        let pairs = [
            ("archive", m.archive_name.clone()),
            ("positional_accuracy_arcsec", m.sigma.arcsec().to_string()),
            ("wavelength_coverage", m.wavelength_coverage.clone()),
            ("sky_coverage", coverage.join(" ")),
            ("tables", self.tables.len().to_string()),
            ("rows", rows_total.to_string()),
            ("index_level", self.tables.first().map_or(DEFAULT_INDEX_LEVEL, |t| t.index_level()).to_string()),
        ];
        ResultTable {
            columns: vec![ColumnInfo::new("key", ColumnType::String), ColumnInfo::new("value", ColumnType::String)],
            rows: pairs.into_iter().map(|(k, v)| vec![Value::Str(k.into()), Value::Str(v)]).collect(),
        }
    }

    pub fn schema_document(&self) -> SchemaDocument {
        SchemaDocument {
            archive: self.meta.archive_name.clone(),
            tables: self.tables.iter().map(|t| t.schema.clone()).collect(),
        }
    }

    pub fn tables_doc(&self) -> ResultTable {
        let s = |name: &str| ColumnInfo::new(name, ColumnType::String);
        ResultTable {
            columns: vec![
                s("name"),
                s("description"),
                s("key_column"),
                s("ra_column"),
                s("dec_column"),
                ColumnInfo::new("rows", ColumnType::Int64),
            ],
            rows: self
                .tables
                .iter()
                .map(|t| {
                    let sc = &t.schema;
                    vec![
                        Value::Str(sc.table_name.clone()),
                        Value::Str(sc.description.clone()),
                        Value::Str(sc.key_column.clone()),
                        Value::Str(sc.ra_column.clone()),
                        Value::Str(sc.dec_column.clone()),
                        Value::Int(t.len() as i64),
                    ]
                })
                .collect(),
        }
    }

    pub fn columns_doc(&self, table: &str) -> Result<ResultTable, CatalogError> {
        let t = self.table(table)?;
        Ok(ResultTable {
            columns: columns_header(),
            rows: t.schema.columns.iter().map(column_row).collect(),
        })
    }

    pub fn functions_doc(&self) -> ResultTable {
        let s = |name: &str| ColumnInfo::new(name, ColumnType::String);
        ResultTable {
            columns: vec![s("name"), s("params"), s("description")],
            rows: self
                .meta
                .functions
                .iter()
                .map(|f| vec![Value::Str(f.name.clone()), Value::Str(f.params.clone()), Value::Str(f.description.clone())])
                .collect(),
        }
    }

    /// Every table, column and function whose name, unit or description
    /// contains `key`, ignoring case.
    pub fn docsearch(&self, key: &str) -> ResultTable {
        let needle = key.to_lowercase();
        let hit = |fields: &[&str]| fields.iter().any(|f| f.to_lowercase().contains(&needle));
        let mut rows = Vec::new();
        let mut push = |kind: &str, table: &str, name: &str, unit: &str, desc: &str| {
            rows.push(vec![kind, table, name, unit, desc].into_iter().map(|s| Value::Str(s.to_string())).collect());
        };
        for t in &self.tables {
            let sc = &t.schema;
            if hit(&[&sc.table_name, &sc.description]) {
                push("table", &sc.table_name, &sc.table_name, "", &sc.description);
            }
            for c in &sc.columns {
                if hit(&[&c.name, &c.unit, &c.description]) {
                    push("column", &sc.table_name, &c.name, &c.unit, &c.description);
                }
            }
        }
        for f in &self.meta.functions {
            if hit(&[&f.name, &f.description]) {
                push("function", "", &f.name, "", &f.description);
            }
        }
        let s = |name: &str| ColumnInfo::new(name, ColumnType::String);
        ResultTable {
            columns: vec![s("kind"), s("table"), s("name"), s("unit"), s("description")],
            rows,
        }
    }
}

fn columns_header() -> Vec<ColumnInfo> {
    ["name", "type", "unit", "description"].iter().map(|n| ColumnInfo::new(*n, ColumnType::String)).collect()
}

fn column_row(c: &ColumnInfo) -> Vec<Value> {
    vec![
        Value::Str(c.name.clone()),
        Value::Str(c.ty.to_string()),
        Value::Str(c.unit.clone()),
        Value::Str(c.description.clone()),
    ]
}

/// Column roles of a table as published by `/tables`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableRoles {
    pub name: String,
    pub key_column: String,
    pub ra_column: String,
    pub dec_column: String,
}

/// Reads the roles back out of a `/tables` document.
pub fn table_roles(doc: &ResultTable) -> Result<BTreeMap<String, TableRoles>, String> {
    let col = |n: &str| doc.column_index(n).ok_or_else(|| format!("tables document lacks '{n}'"));
    let (n, k, r, d) = (col("name")?, col("key_column")?, col("ra_column")?, col("dec_column")?);
    let s = |v: &Value| v.as_str().map(str::to_string).ok_or_else(|| "non-string cell in tables document".to_string());
    let mut out = BTreeMap::new();
    for row in &doc.rows {
        let roles = TableRoles { name: s(&row[n])?, key_column: s(&row[k])?, ra_column: s(&row[r])?, dec_column: s(&row[d])? };
        out.insert(roles.name.to_ascii_lowercase(), roles);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::ARCMIN;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) const SCHEMA: &str = r#"
table_name = "PhotoPrimary"
description = "Primary photometric objects"
key_column = "objId"
ra_column = "ra"
dec_column = "dec"

[[columns]]
name = "objId"
type = "int64"
description = "unique object id"

[[columns]]
name = "ra"
type = "float64"
unit = "deg"
description = "right ascension"

[[columns]]
name = "dec"
type = "float64"
unit = "deg"
description = "declination"

[[columns]]
name = "r"
type = "float64"
unit = "mag"
description = "r-band magnitude"

[[columns]]
name = "type"
type = "int64"
description = "morphological class, 3 = galaxy, 6 = star"

[[columns]]
name = "note"
type = "string"
description = "free text"
"#;

    fn schema() -> TableSchema {
        TableSchema::from_toml(SCHEMA).unwrap()
    }

    const THREE: &str = "objId,ra,dec,r,type,note
1,181.3,-0.76,20.5,3,a
2,181.31,-0.75,18.0,6,b
3,10.0,45.0,21.0,3,c
";

    #[test]
    fn loads_three_rows() {
        let t = CatalogTable::from_csv(schema(), THREE, 14).unwrap();
        assert_eq!(t.len(), 3);
        let order = t.htm_order();
        let mut sorted = order.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2]);
        assert!(order.windows(2).all(|w| t.htm_id(w[0]) <= t.htm_id(w[1])));
        for r in 0..3 {
            assert_eq!(t.htm_id(r), trixel_of_point(&t.position(r), 14).unwrap());
        }
        assert_eq!(t.key(2), 3);
    }

    #[test]
    fn load_errors_name_row_and_column() {
        let bad = THREE.replace("18.0", "bright");
        match CatalogTable::from_csv(schema(), &bad, 14) {
            Err(CatalogError::Data { row, column, .. }) => assert_eq!((row, column.as_str()), (2, "r")),
            other => panic!("{other:?}"),
        }
        let short = THREE.replace(",b\n", "\n");
        assert!(matches!(CatalogTable::from_csv(schema(), &short, 14), Err(CatalogError::Data { row: 2, .. })));
        let header = THREE.replace("objId,ra", "id,ra");
        assert!(matches!(CatalogTable::from_csv(schema(), &header, 14), Err(CatalogError::Data { row: 0, .. })));
        let dec = THREE.replace("45.0", "95.0");
        assert!(matches!(CatalogTable::from_csv(schema(), &dec, 14), Err(CatalogError::Data { row: 3, .. })));
    }

    #[test]
    fn schema_validation() {
        let dup = SCHEMA.replacen("name = \"r\"", "name = \"ra\"", 1);
        assert!(TableSchema::from_toml(&dup).is_err());
        let no_key = SCHEMA.replace("key_column = \"objId\"", "key_column = \"id\"");
        assert!(TableSchema::from_toml(&no_key).is_err());
        let bad_type = SCHEMA.replace("key_column = \"objId\"", "key_column = \"r\"");
        assert!(TableSchema::from_toml(&bad_type).is_err());
        let s = schema();
        assert_eq!(TableSchema::from_toml(&s.to_toml()).unwrap(), s);
    }

    #[test]
    fn csv_round_trip_is_identical() {
        let t = CatalogTable::from_csv(schema(), THREE, 14).unwrap();
        let again = CatalogTable::from_csv(schema(), &t.to_csv(), 14).unwrap();
        assert_eq!(again.to_csv(), t.to_csv());
        assert_eq!(again.columns, t.columns);
    }

    fn meta() -> ArchiveMeta {
        ArchiveMeta {
            archive_name: "SDSS".into(),
            sky_coverage: vec![Coverage { ra: 181.3, dec: -0.76, radius_arcmin: 40.0 }],
            wavelength_coverage: "optical ugriz".into(),
            sigma: ArchiveSigma::new(0.1).unwrap(),
            functions: default_functions(),
        }
    }

    fn catalog() -> Catalog {
        Catalog::new(meta(), vec![CatalogTable::from_csv(schema(), THREE, 14).unwrap()]).unwrap()
    }

    #[test]
    fn sql_queries() {
        let c = catalog();
        let t = c.query_sql("SELECT COUNT(*) FROM PhotoPrimary o WHERE AREA(181.3,-0.76,6.5)").unwrap();
        assert_eq!(t.rows, vec![vec![Value::Int(2)]]);
        let t = c.query_sql("SELECT COUNT(*) FROM PhotoPrimary o WHERE o.type=3 AND AREA(181.3,-0.76,6.5)").unwrap();
        assert_eq!(t.rows, vec![vec![Value::Int(1)]]);
        let t = c.query_sql("SELECT o.objId, o.note FROM SDSS:photoprimary o WHERE o.note='c'").unwrap();
        assert_eq!(t.rows, vec![vec![Value::Int(3), Value::Str("c".into())]]);
        assert_eq!(t.columns[0].name, "objId");
        let whole = c.query_sql("SELECT COUNT(*) FROM PhotoPrimary o WHERE AREA(0,0,10800)").unwrap();
        assert_eq!(whole.rows, vec![vec![Value::Int(3)]]);

        assert!(matches!(c.query_sql("SELECT o.zz FROM PhotoPrimary o"), Err(CatalogError::UnknownColumn(_))));
        // unknown columns are reported even when no row reaches evaluation
        assert!(matches!(
            c.query_sql("SELECT o.objId FROM PhotoPrimary o WHERE o.zz=1 AND AREA(0,-80,1)"),
            Err(CatalogError::UnknownColumn(_))
        ));
        assert!(matches!(c.query_sql("SELECT o.objId FROM Nope o"), Err(CatalogError::UnknownTable(_))));
        assert!(matches!(c.query_sql("SELECT o.objId FROM TWOMASS:PhotoPrimary o"), Err(CatalogError::UnknownTable(_))));
        let e = c.query_sql("SELECT o.objId FROM PhotoPrimary o WHERE o.note<1").unwrap_err();
        assert_eq!(e.code(), "type_error");
        let e = c.query_sql("SELEC o.objId").unwrap_err();
        assert_eq!(e.code(), "parse_error");
    }

    #[test]
    fn metadata_documents() {
        let c = catalog();
        let info = c.info();
        let sigma = info.rows.iter().find(|r| r[0] == Value::Str("positional_accuracy_arcsec".into())).unwrap();
        assert_eq!(sigma[1], Value::Str("0.1".into()));

        let cols = c.columns_doc("PhotoPrimary").unwrap();
        let names: Vec<&str> = cols.rows.iter().map(|r| r[0].as_str().unwrap()).collect();
        assert_eq!(names, vec!["objId", "ra", "dec", "r", "type", "note"]);
        assert_eq!(cols.rows[3][2], Value::Str("mag".into()));
        assert!(matches!(c.columns_doc("Nope"), Err(CatalogError::UnknownTable(_))));

        let hits = c.docsearch("MAGNITUDE");
        assert!(hits.rows.iter().any(|r| r[0] == Value::Str("column".into()) && r[2] == Value::Str("r".into())));
        assert!(c.docsearch("deg").rows.len() >= 2);
        assert!(c.docsearch("zzzz").rows.is_empty());

        let roles = table_roles(&c.tables_doc()).unwrap();
        assert_eq!(roles["photoprimary"].key_column, "objId");
        assert_eq!(c.schema_document().tables[0], schema());
        assert_eq!(c.functions_doc().num_rows(), default_functions().len());
    }

    #[test]
    fn indexed_cones_equal_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<Value>> = (0..10_000)
            .map(|i| {
                vec![
                    Value::Int(i),
                    Value::Float(rng.random_range(170.0..190.0)),
                    Value::Float(rng.random_range(-10.0..10.0)),
                    Value::Float(rng.random_range(14.0..24.0)),
                    Value::Int(if rng.random_bool(0.5) { 3 } else { 6 }),
                    Value::Str(format!("n{i}")),
                ]
            })
            .collect();
        let t = CatalogTable::from_rows(schema(), rows, 14).unwrap();
        for _ in 0..100 {
            let area = AreaSpec {
                center: SkyPos::new(rng.random_range(170.0..190.0), rng.random_range(-10.0..10.0)).unwrap(),
                radius_arcmin: rng.random_range(0.5..120.0),
            };
            let got = t.rows_in_area(Some(&area)).unwrap();
            let c = area.center.to_unitvec();
            let want: Vec<usize> = (0..t.len())
                .filter(|&r| angular_separation(&c, &t.position(r)) <= area.radius_arcmin * ARCMIN)
                .collect();
            assert_eq!(got, want);
        }
    }
}
