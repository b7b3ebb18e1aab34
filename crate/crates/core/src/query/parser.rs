//! Recursive-descent parser for the extended SQL dialect.
//!
//! ```text
//! query      := SELECT projection FROM table_list [WHERE expr]
//! projection := COUNT '(' '*' ')' | colref (',' colref)*
//! table_list := tableref (',' tableref)* ;  tableref := [ident ':'] ident ident
//! expr       := or ;  or := and (OR and)* ;  and := not (AND not)*
//! not        := NOT not | cmp ;  cmp := add [cmpop add]
//! add        := mul (('+'|'-') mul)* ;  mul := unary (('*'|'/') unary)*
//! unary      := '-' unary | primary
//! primary    := number | string | colref | '(' expr ')' | area | xmatch
//! area       := AREA '(' num ',' num ',' num ')'
//! xmatch     := XMATCH '(' xarg (',' xarg)* ')' '<' num ;  xarg := ['!'] alias
//! ```
//!
//! AREA and XMATCH are only accepted as top-level conjuncts of WHERE.

use std::collections::HashSet;

use super::ast::*;
use super::error::QueryError;
use super::lexer::{tokenize, Tok, Token};
use crate::sphere::SkyPos;

const RESERVED: [&str; 9] = ["SELECT", "FROM", "WHERE", "AND", "OR", "NOT", "AREA", "XMATCH", "COUNT"];

/// Largest AREA radius, half the sky, in arcminutes.
pub const MAX_AREA_RADIUS_ARCMIN: f64 = 10_800.0;

pub fn parse(src: &str) -> Result<QueryAst, QueryError> {
    let tokens = tokenize(src)?;
    let mut p = Parser { tokens, idx: 0, colrefs: Vec::new() };
    p.query()
}

/// Parses a standalone predicate expression such as `(o.i - t.m_j)>2`.
/// Aliases are not resolved.
pub fn parse_predicate(src: &str) -> Result<Expr, QueryError> {
    let tokens = tokenize(src)?;
    let mut p = Parser { tokens, idx: 0, colrefs: Vec::new() };
    let e = p.or_expr()?;
    if *p.peek() != Tok::Eof {
        return Err(p.unexpected("end of expression"));
    }
    Ok(e)
}

/// A WHERE term before AREA / XMATCH extraction.
enum Term {
    Expr(Expr),
    Area(AreaSpec, usize),
    XMatch(Vec<(String, bool, usize)>, f64, usize),
}

impl Term {
    fn position(&self) -> Option<usize> {
        match self {
            Term::Expr(_) => None,
            Term::Area(_, p) | Term::XMatch(_, _, p) => Some(*p),
        }
    }
}

struct Parser {
    tokens: Vec<Token>,
    idx: usize,
    colrefs: Vec<(ColumnRef, usize)>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.idx].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.tokens[(self.idx + n).min(self.tokens.len() - 1)].tok
    }

    fn pos(&self) -> usize {
        self.tokens[self.idx].pos
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.idx].clone();
        if self.idx < self.tokens.len() - 1 {
            self.idx += 1;
        }
        t
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), QueryError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.unexpected(kw))
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), QueryError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&tok.describe()))
        }
    }

    fn unexpected(&self, expected: &str) -> QueryError {
        QueryError::syntax(self.pos(), expected, self.peek().describe())
    }

    /// A plain identifier that is not a reserved word.
    fn ident(&mut self, what: &str) -> Result<(String, usize), QueryError> {
        match self.peek().clone() {
            Tok::Ident(s) if !RESERVED.iter().any(|r| s.eq_ignore_ascii_case(r)) => {
                let pos = self.pos();
                self.bump();
                Ok((s, pos))
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn query(&mut self) -> Result<QueryAst, QueryError> {
        self.expect_kw("SELECT")?;
        let select = self.projection()?;
        self.expect_kw("FROM")?;
        let tables = self.table_list()?;
        let mut conjuncts = Vec::new();
        if self.eat_kw("WHERE") {
            conjuncts = self.where_clause()?;
        }
        if *self.peek() != Tok::Eof {
            let expected = if conjuncts.is_empty() { "WHERE or end of query" } else { "AND, OR or end of query" };
            return Err(self.unexpected(expected));
        }
        self.assemble(select, tables, conjuncts)
    }

    fn projection(&mut self) -> Result<Projection, QueryError> {
        if self.is_kw("COUNT") && *self.peek_at(1) == Tok::LParen {
            self.bump();
            self.expect(Tok::LParen)?;
            self.expect(Tok::Star)?;
            self.expect(Tok::RParen)?;
            return Ok(Projection::CountStar);
        }
        let mut cols = vec![self.colref()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            cols.push(self.colref()?);
        }
        Ok(Projection::Columns(cols))
    }

    fn colref(&mut self) -> Result<ColumnRef, QueryError> {
        let (alias, pos) = self.ident("column reference alias.column")?;
        self.expect(Tok::Dot)?;
        let column = match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                s
            }
            _ => return Err(self.unexpected("column name")),
        };
        let c = ColumnRef { alias, column };
        self.colrefs.push((c.clone(), pos));
        Ok(c)
    }

    fn table_list(&mut self) -> Result<Vec<(TableRef, usize)>, QueryError> {
        let mut out = vec![self.table_ref()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            out.push(self.table_ref()?);
        }
        Ok(out)
    }

    fn table_ref(&mut self) -> Result<(TableRef, usize), QueryError> {
        let (first, pos) = self.ident("table reference")?;
        let (archive, table) = if *self.peek() == Tok::Colon {
            self.bump();
            let (t, _) = self.ident("table name")?;
            (Some(first), t)
        } else {
            (None, first)
        };
        let (alias, _) = self.ident("table alias")?;
        Ok((TableRef { archive, table, alias }, pos))
    }

    fn where_clause(&mut self) -> Result<Vec<Term>, QueryError> {
        let mut terms = vec![self.not_term()?];
        while self.eat_kw("AND") {
            terms.push(self.not_term()?);
        }
        if !self.is_kw("OR") {
            return Ok(terms);
        }
        // a top-level OR turns the whole clause into a single conjunct
        let mut acc = None;
        for t in terms {
            let e = into_expr(t, "AND ... OR")?;
            acc = Some(match acc {
                None => e,
                Some(l) => Expr::binary(l, BinaryOp::And, e),
            });
        }
        let mut left = acc.expect("at least one term");
        while self.eat_kw("OR") {
            let right = self.and_expr("OR")?;
            left = Expr::binary(left, BinaryOp::Or, right);
        }
        Ok(vec![Term::Expr(left)])
    }

    fn or_expr(&mut self) -> Result<Expr, QueryError> {
        let mut left = self.and_expr("parentheses")?;
        while self.eat_kw("OR") {
            let right = self.and_expr("parentheses")?;
            left = Expr::binary(left, BinaryOp::Or, right);
        }
        Ok(left)
    }

    fn and_expr(&mut self, context: &str) -> Result<Expr, QueryError> {
        let mut left = into_expr(self.not_term()?, context)?;
        while self.eat_kw("AND") {
            let right = into_expr(self.not_term()?, context)?;
            left = Expr::binary(left, BinaryOp::And, right);
        }
        Ok(left)
    }

    fn not_term(&mut self) -> Result<Term, QueryError> {
        if self.eat_kw("NOT") {
            let inner = into_expr(self.not_term()?, "NOT")?;
            return Ok(Term::Expr(Expr::Unary { op: UnaryOp::Not, expr: Box::new(inner) }));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Term, QueryError> {
        let left = self.additive()?;
        let op = match self.peek() {
            Tok::Eq => BinaryOp::Eq,
            Tok::NotEq => BinaryOp::NotEq,
            Tok::Lt => BinaryOp::Lt,
            Tok::LtEq => BinaryOp::LtEq,
            Tok::Gt => BinaryOp::Gt,
            Tok::GtEq => BinaryOp::GtEq,
            _ => return Ok(left),
        };
        self.bump();
        let left = into_expr(left, "a comparison")?;
        let right = into_expr(self.additive()?, "a comparison")?;
        Ok(Term::Expr(Expr::binary(left, op, right)))
    }

    fn additive(&mut self) -> Result<Term, QueryError> {
        let mut left = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinaryOp::Add,
                Tok::Minus => BinaryOp::Sub,
                _ => return Ok(left),
            };
            self.bump();
            let l = into_expr(left, "arithmetic")?;
            let r = into_expr(self.multiplicative()?, "arithmetic")?;
            left = Term::Expr(Expr::binary(l, op, r));
        }
    }

    fn multiplicative(&mut self) -> Result<Term, QueryError> {
        let mut left = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinaryOp::Mul,
                Tok::Slash => BinaryOp::Div,
                _ => return Ok(left),
            };
            self.bump();
            let l = into_expr(left, "arithmetic")?;
            let r = into_expr(self.unary()?, "arithmetic")?;
            left = Term::Expr(Expr::binary(l, op, r));
        }
    }

    fn unary(&mut self) -> Result<Term, QueryError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            // a minus directly before a numeric literal is part of the literal
            match self.peek().clone() {
                Tok::Int(i) => {
                    self.bump();
                    return Ok(Term::Expr(Expr::Literal(Literal::Int(-i))));
                }
                Tok::Float(f) => {
                    self.bump();
                    return Ok(Term::Expr(Expr::Literal(Literal::Float(-f))));
                }
                _ => {}
            }
            let inner = into_expr(self.unary()?, "arithmetic")?;
            return Ok(Term::Expr(Expr::Unary { op: UnaryOp::Neg, expr: Box::new(inner) }));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Term, QueryError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(Term::Expr(Expr::Literal(Literal::Int(i))))
            }
            Tok::Float(f) => {
                self.bump();
                Ok(Term::Expr(Expr::Literal(Literal::Float(f))))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Term::Expr(Expr::Literal(Literal::Str(s))))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.or_expr()?;
                self.expect(Tok::RParen)?;
                Ok(Term::Expr(Expr::Nested(Box::new(inner))))
            }
            Tok::Ident(_) if self.is_kw("AREA") && *self.peek_at(1) == Tok::LParen => self.area(pos),
            Tok::Ident(_) if self.is_kw("XMATCH") && *self.peek_at(1) == Tok::LParen => self.xmatch(pos),
            Tok::Ident(_) => Ok(Term::Expr(Expr::Column(self.colref()?))),
            _ => Err(self.unexpected("expression")),
        }
    }

    fn signed_number(&mut self) -> Result<f64, QueryError> {
        let neg = match self.peek() {
            Tok::Minus => {
                self.bump();
                true
            }
            Tok::Plus => {
                self.bump();
                false
            }
            _ => false,
        };
        let v = match self.peek() {
            Tok::Int(i) => *i as f64,
            Tok::Float(f) => *f,
            _ => return Err(self.unexpected("number")),
        };
        self.bump();
        Ok(if neg { -v } else { v })
    }

    fn area(&mut self, pos: usize) -> Result<Term, QueryError> {
        self.bump();
        self.expect(Tok::LParen)?;
        let ra = self.signed_number()?;
        self.expect(Tok::Comma)?;
        let dec = self.signed_number()?;
        self.expect(Tok::Comma)?;
        let radius_pos = self.pos();
        let radius = self.signed_number()?;
        self.expect(Tok::RParen)?;
        let center = SkyPos::new(ra, dec)
            .map_err(|e| QueryError::semantic(Some(pos), format!("invalid AREA center: {e}")))?;
        if !(radius > 0.0 && radius <= MAX_AREA_RADIUS_ARCMIN) {
            return Err(QueryError::semantic(
                Some(radius_pos),
                format!("AREA radius {radius} arcmin outside (0, {MAX_AREA_RADIUS_ARCMIN}]"),
            ));
        }
        Ok(Term::Area(AreaSpec { center, radius_arcmin: radius }, pos))
    }

    fn xmatch(&mut self, pos: usize) -> Result<Term, QueryError> {
        self.bump();
        self.expect(Tok::LParen)?;
        let mut args = Vec::new();
        loop {
            let dropout = *self.peek() == Tok::Bang;
            if dropout {
                self.bump();
            }
            let (alias, apos) = self.ident("XMATCH archive alias")?;
            args.push((alias, dropout, apos));
            if *self.peek() == Tok::Comma {
                self.bump();
            } else {
                break;
            }
        }
        self.expect(Tok::RParen)?;
        self.expect(Tok::Lt)?;
        let tpos = self.pos();
        let threshold = self.signed_number()?;
        if !(threshold > 0.0) {
            return Err(QueryError::semantic(Some(tpos), "XMATCH threshold must be positive"));
        }
        Ok(Term::XMatch(args, threshold, pos))
    }

    fn assemble(
        &mut self,
        select: Projection,
        tables: Vec<(TableRef, usize)>,
        conjuncts: Vec<Term>,
    ) -> Result<QueryAst, QueryError> {
        let mut aliases = HashSet::new();
        let mut archives = HashSet::new();
        for (t, pos) in &tables {
            if !aliases.insert(t.alias.clone()) {
                return Err(QueryError::semantic(Some(*pos), format!("duplicate alias '{}'", t.alias)));
            }
            if let Some(a) = &t.archive {
                if !archives.insert(a.to_ascii_lowercase()) {
                    return Err(QueryError::semantic(
                        Some(*pos),
                        format!("archive '{a}' referenced more than once"),
                    ));
                }
            }
        }
        for (c, pos) in &self.colrefs {
            if !aliases.contains(&c.alias) {
                return Err(QueryError::semantic(Some(*pos), format!("unknown alias '{}'", c.alias)));
            }
        }
        let mut area = None;
        let mut xmatch = None;
        let mut predicates = Vec::new();
        for term in conjuncts {
            match term {
                Term::Expr(e) => predicates.push(e),
                Term::Area(a, pos) => {
                    if area.replace(a).is_some() {
                        return Err(QueryError::semantic(Some(pos), "AREA specified more than once"));
                    }
                }
                Term::XMatch(args, threshold, pos) => {
                    if xmatch.is_some() {
                        return Err(QueryError::semantic(Some(pos), "XMATCH specified more than once"));
                    }
                    let mut seen = HashSet::new();
                    let mut spec = XMatchSpec { mandatory: Vec::new(), dropouts: Vec::new(), threshold };
                    for (alias, dropout, apos) in args {
                        if !aliases.contains(&alias) {
                            return Err(QueryError::semantic(Some(apos), format!("unknown alias '{alias}'")));
                        }
                        if !seen.insert(alias.clone()) {
                            return Err(QueryError::semantic(
                                Some(apos),
                                format!("alias '{alias}' appears twice in XMATCH"),
                            ));
                        }
                        if dropout {
                            spec.dropouts.push(alias);
                        } else {
                            spec.mandatory.push(alias);
                        }
                    }
                    if spec.mandatory.len() < 2 {
                        return Err(QueryError::semantic(
                            Some(pos),
                            "XMATCH needs at least 2 mandatory archives",
                        ));
                    }
                    xmatch = Some(spec);
                }
            }
        }
        Ok(QueryAst {
            select,
            tables: tables.into_iter().map(|(t, _)| t).collect(),
            area,
            xmatch,
            predicates,
        })
    }
}

fn into_expr(t: Term, context: &str) -> Result<Expr, QueryError> {
    let pos = t.position();
    match t {
        Term::Expr(e) => Ok(e),
        Term::Area(..) => Err(QueryError::semantic(
            pos,
            format!("AREA must be a top-level conjunct of WHERE, not used in {context}"),
        )),
        Term::XMatch(..) => Err(QueryError::semantic(
            pos,
            format!("XMATCH must be a top-level conjunct of WHERE, not used in {context}"),
        )),
    }
}
