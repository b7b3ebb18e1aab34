//! Printing of queries in the same dialect. `parse(ast.to_string()) == ast`
//! holds for every AST the parser can produce.
//!
//! Comparisons print without spaces (`o.type=3`), arithmetic with spaces
//! (`o.i - t.m_j`). The WHERE clause lists XMATCH, the predicates, then AREA.

use std::fmt::{self, Display, Formatter, Write};

use super::ast::*;

impl Display for ColumnRef {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.alias, self.column)
    }
}

impl Display for Literal {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Int(i) => write!(f, "{i}"),
            // Debug keeps a '.' or exponent so the literal re-lexes as a float
            Literal::Float(x) => write!(f, "{x:?}"),
            Literal::Str(s) => {
                f.write_char('\'')?;
                f.write_str(&s.replace('\'', "''"))?;
                f.write_char('\'')
            }
        }
    }
}

impl Display for Expr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Column(c) => write!(f, "{c}"),
            Expr::Literal(l) => write!(f, "{l}"),
            Expr::Nested(e) => write!(f, "({e})"),
            Expr::Unary { op: UnaryOp::Neg, expr } => write!(f, "-{expr}"),
            Expr::Unary { op: UnaryOp::Not, expr } => write!(f, "NOT {expr}"),
            Expr::Binary { left, op, right } => {
                if op.is_comparison() {
                    write!(f, "{left}{}{right}", op.symbol())
                } else {
                    write!(f, "{left} {} {right}", op.symbol())
                }
            }
        }
    }
}

impl Display for TableRef {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match &self.archive {
            Some(a) => write!(f, "{a}:{} {}", self.table, self.alias),
            None => write!(f, "{} {}", self.table, self.alias),
        }
    }
}

impl Display for AreaSpec {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "AREA({},{},{})", self.center.ra(), self.center.dec(), self.radius_arcmin)
    }
}

impl Display for XMatchSpec {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        let args: Vec<String> = self
            .mandatory
            .iter()
            .cloned()
            .chain(self.dropouts.iter().map(|d| format!("!{d}")))
            .collect();
        write!(f, "XMATCH({})<{}", args.join(","), self.threshold)
    }
}

impl Display for QueryAst {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        f.write_str("SELECT ")?;
        match &self.select {
            Projection::CountStar => f.write_str("COUNT(*)")?,
            Projection::Columns(cols) => {
                let cols: Vec<String> = cols.iter().map(ToString::to_string).collect();
                f.write_str(&cols.join(", "))?;
            }
        }
        let tables: Vec<String> = self.tables.iter().map(ToString::to_string).collect();
        write!(f, " FROM {}", tables.join(", "))?;
        let mut conjuncts: Vec<String> = Vec::new();
        if let Some(x) = &self.xmatch {
            conjuncts.push(x.to_string());
        }
        let several = self.predicates.len() + usize::from(self.area.is_some()) + usize::from(self.xmatch.is_some()) > 1;
        for p in &self.predicates {
            // an AND/OR root only appears in hand-built trees; keep it one conjunct
            match p {
                Expr::Binary { op: BinaryOp::And | BinaryOp::Or, .. } if several => conjuncts.push(format!("({p})")),
                _ => conjuncts.push(p.to_string()),
            }
        }
        if let Some(a) = &self.area {
            conjuncts.push(a.to_string());
        }
        if !conjuncts.is_empty() {
            write!(f, " WHERE {}", conjuncts.join(" AND "))?;
        }
        Ok(())
    }
}
