use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::sphere::SkyPos;

/// `alias.column`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ColumnRef {
    pub alias: String,
    pub column: String,
}

impl ColumnRef {
    pub fn new(alias: impl Into<String>, column: impl Into<String>) -> Self {
        Self { alias: alias.into(), column: column.into() }
    }

    /// The `alias.column` text, also used as the carried attribute name.
    pub fn qualified(&self) -> String {
        format!("{}.{}", self.alias, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    Columns(Vec<ColumnRef>),
    CountStar,
}

/// `ARCHIVE:table alias`, or `table alias` in node-local queries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRef {
    pub archive: Option<String>,
    pub table: String,
    pub alias: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaSpec {
    pub center: SkyPos,
    pub radius_arcmin: f64,
}

impl AreaSpec {
    pub fn radius_rad(&self) -> f64 {
        self.radius_arcmin * crate::sphere::ARCMIN
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XMatchSpec {
    pub mandatory: Vec<String>,
    pub dropouts: Vec<String>,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Literal {
    Int(i64),
    Float(f64),
    Str(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    NotEq,
    Lt,
    LtEq,
    Gt,
    GtEq,
    And,
    Or,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Eq => "=",
            BinaryOp::NotEq => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::LtEq => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::GtEq => ">=",
            BinaryOp::And => "AND",
            BinaryOp::Or => "OR",
        }
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Eq
            | BinaryOp::NotEq
            | BinaryOp::Lt
            | BinaryOp::LtEq
            | BinaryOp::Gt
            | BinaryOp::GtEq => 4,
            BinaryOp::Add | BinaryOp::Sub => 5,
            BinaryOp::Mul | BinaryOp::Div => 6,
        }
    }

    pub fn is_comparison(self) -> bool {
        self.precedence() == 4
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnaryOp {
    Neg,
    Not,
}

/// Precedence of `NOT`, between AND and the comparisons.
pub const NOT_PRECEDENCE: u8 = 3;
/// Precedence of unary minus, above every binary operator.
pub const NEG_PRECEDENCE: u8 = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expr {
    Column(ColumnRef),
    Literal(Literal),
    Unary { op: UnaryOp, expr: Box<Expr> },
    Binary { left: Box<Expr>, op: BinaryOp, right: Box<Expr> },
    /// A parenthesized sub-expression, kept so printing reproduces the tree.
    Nested(Box<Expr>),
}

impl Expr {
    pub fn column(alias: &str, column: &str) -> Expr {
        Expr::Column(ColumnRef::new(alias, column))
    }

    pub fn binary(left: Expr, op: BinaryOp, right: Expr) -> Expr {
        Expr::Binary { left: Box::new(left), op, right: Box::new(right) }
    }

    pub fn int(v: i64) -> Expr {
        Expr::Literal(Literal::Int(v))
    }

    pub fn float(v: f64) -> Expr {
        Expr::Literal(Literal::Float(v))
    }

    pub fn nested(e: Expr) -> Expr {
        Expr::Nested(Box::new(e))
    }

    pub fn visit_columns<'a>(&'a self, f: &mut impl FnMut(&'a ColumnRef)) {
        match self {
            Expr::Column(c) => f(c),
            Expr::Literal(_) => {}
            Expr::Unary { expr, .. } | Expr::Nested(expr) => expr.visit_columns(f),
            Expr::Binary { left, right, .. } => {
                left.visit_columns(f);
                right.visit_columns(f);
            }
        }
    }

    pub fn columns(&self) -> Vec<&ColumnRef> {
        let mut out = Vec::new();
        self.visit_columns(&mut |c| out.push(c));
        out
    }

    /// Aliases syntactically present in the tree.
    pub fn referenced_aliases(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit_columns(&mut |c| {
            out.insert(c.alias.clone());
        });
        out
    }
}

/// A parsed query. `predicates` is the implicit conjunction left in the
/// WHERE clause once AREA and XMATCH are extracted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryAst {
    pub select: Projection,
    pub tables: Vec<TableRef>,
    pub area: Option<AreaSpec>,
    pub xmatch: Option<XMatchSpec>,
    pub predicates: Vec<Expr>,
}

impl QueryAst {
    pub fn table(&self, alias: &str) -> Option<&TableRef> {
        self.tables.iter().find(|t| t.alias == alias)
    }

    pub fn select_columns(&self) -> &[ColumnRef] {
        match &self.select {
            Projection::Columns(c) => c,
            Projection::CountStar => &[],
        }
    }

    pub fn is_dropout(&self, alias: &str) -> bool {
        self.xmatch.as_ref().is_some_and(|x| x.dropouts.iter().any(|d| d == alias))
    }
}
