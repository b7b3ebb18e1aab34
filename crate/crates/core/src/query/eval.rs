//! Row-at-a-time evaluation of predicate expressions.
//!
//! Both operands are always evaluated, so a type error anywhere in a
//! predicate surfaces regardless of row values. Integer arithmetic is
//! checked; `/` always yields a float.

use std::cmp::Ordering;

use thiserror::Error;

use super::ast::{BinaryOp, ColumnRef, Expr, Literal, UnaryOp};
use crate::table::Value;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unknown column '{0}'")]
    UnknownColumn(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("integer overflow in {0}")]
    Overflow(&'static str),
}

/// Column values of the row being evaluated.
pub trait RowContext {
    fn value(&self, col: &ColumnRef) -> Option<Value>;
}

pub fn eval(expr: &Expr, row: &dyn RowContext) -> Result<Value, EvalError> {
    match expr {
        Expr::Column(c) => row.value(c).ok_or_else(|| EvalError::UnknownColumn(c.qualified())),
        Expr::Literal(Literal::Int(i)) => Ok(Value::Int(*i)),
        Expr::Literal(Literal::Float(f)) => Ok(Value::Float(*f)),
        Expr::Literal(Literal::Str(s)) => Ok(Value::Str(s.clone())),
        Expr::Nested(e) => eval(e, row),
        Expr::Unary { op, expr } => match (op, eval(expr, row)?) {
            (UnaryOp::Neg, Value::Int(i)) => i.checked_neg().map(Value::Int).ok_or(EvalError::Overflow("negation")),
            (UnaryOp::Neg, Value::Float(f)) => Ok(Value::Float(-f)),
            (UnaryOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
            (op, v) => Err(EvalError::TypeMismatch(format!("cannot apply {op:?} to {}", v.type_name()))),
        },
        Expr::Binary { left, op, right } => {
            let l = eval(left, row)?;
            let r = eval(right, row)?;
            binary(*op, l, r)
        }
    }
}

/// Evaluates a predicate that must produce a boolean.
pub fn eval_predicate(expr: &Expr, row: &dyn RowContext) -> Result<bool, EvalError> {
    match eval(expr, row)? {
        Value::Bool(b) => Ok(b),
        v => Err(EvalError::TypeMismatch(format!("predicate evaluates to {}, not bool", v.type_name()))),
    }
}

fn mismatch(op: BinaryOp, l: &Value, r: &Value) -> EvalError {
    EvalError::TypeMismatch(format!("{} {} {}", l.type_name(), op.symbol(), r.type_name()))
}

fn binary(op: BinaryOp, l: Value, r: Value) -> Result<Value, EvalError> {
    use BinaryOp::*;
    match op {
        And | Or => match (&l, &r) {
            (Value::Bool(a), Value::Bool(b)) => Ok(Value::Bool(if op == And { *a && *b } else { *a || *b })),
            _ => Err(mismatch(op, &l, &r)),
        },
        Add | Sub | Mul => match (&l, &r) {
            (Value::Int(a), Value::Int(b)) => {
                let v = match op {
                    Add => a.checked_add(*b),
                    Sub => a.checked_sub(*b),
                    _ => a.checked_mul(*b),
                };
                v.map(Value::Int).ok_or(EvalError::Overflow(op.symbol()))
            }
            _ => {
                let (a, b) = numeric_pair(op, &l, &r)?;
                Ok(Value::Float(match op {
                    Add => a + b,
                    Sub => a - b,
                    _ => a * b,
                }))
            }
        },
        Div => {
            let (a, b) = numeric_pair(op, &l, &r)?;
            if b == 0.0 {
                return Err(EvalError::DivisionByZero);
            }
            Ok(Value::Float(a / b))
        }
        Eq | NotEq | Lt | LtEq | Gt | GtEq => {
            let ord = compare(op, &l, &r)?;
            let res = match op {
                Eq => ord == Some(Ordering::Equal),
                NotEq => ord != Some(Ordering::Equal),
                Lt => ord == Some(Ordering::Less),
                LtEq => matches!(ord, Some(Ordering::Less | Ordering::Equal)),
                Gt => ord == Some(Ordering::Greater),
                _ => matches!(ord, Some(Ordering::Greater | Ordering::Equal)),
            };
            Ok(Value::Bool(res))
        }
    }
}

fn numeric_pair(op: BinaryOp, l: &Value, r: &Value) -> Result<(f64, f64), EvalError> {
    match (l, r) {
        (Value::Int(_) | Value::Float(_), Value::Int(_) | Value::Float(_)) => {
            Ok((l.as_f64().expect("numeric"), r.as_f64().expect("numeric")))
        }
        _ => Err(mismatch(op, l, r)),
    }
}

fn compare(op: BinaryOp, l: &Value, r: &Value) -> Result<Option<Ordering>, EvalError> {
    match (l, r) {
        (Value::Int(a), Value::Int(b)) => Ok(Some(a.cmp(b))),
        (Value::Str(a), Value::Str(b)) if matches!(op, BinaryOp::Eq | BinaryOp::NotEq) => Ok(Some(a.cmp(b))),
        (Value::Bool(a), Value::Bool(b)) if matches!(op, BinaryOp::Eq | BinaryOp::NotEq) => Ok(Some(a.cmp(b))),
        _ => {
            let (a, b) = numeric_pair(op, l, r)?;
            Ok(a.partial_cmp(&b))
        }
    }
}
