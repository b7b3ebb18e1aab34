use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryErrorKind {
    Lexical,
    Syntax,
    Semantic,
}

/// A parse failure with the byte offset where it was detected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryError {
    pub kind: QueryErrorKind,
    pub position: Option<usize>,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub found: Option<String>,
}

impl QueryError {
    pub fn lexical(pos: usize, message: &str, found: &str) -> Self {
        Self {
            kind: QueryErrorKind::Lexical,
            position: Some(pos),
            message: message.to_string(),
            expected: None,
            found: Some(found.to_string()),
        }
    }

    pub fn syntax(pos: usize, expected: impl Into<String>, found: impl Into<String>) -> Self {
        let (expected, found) = (expected.into(), found.into());
        Self {
            kind: QueryErrorKind::Syntax,
            position: Some(pos),
            message: format!("expected {expected}, found {found}"),
            expected: Some(expected),
            found: Some(found),
        }
    }

    pub fn semantic(pos: Option<usize>, message: impl Into<String>) -> Self {
        Self {
            kind: QueryErrorKind::Semantic,
            position: pos,
            message: message.into(),
            expected: None,
            found: None,
        }
    }
}

impl fmt::Display for QueryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            QueryErrorKind::Lexical => "lexical error",
            QueryErrorKind::Syntax => "syntax error",
            QueryErrorKind::Semantic => "semantic error",
        };
        match self.position {
            Some(p) => write!(f, "{kind} at position {p}: {}", self.message),
            None => write!(f, "{kind}: {}", self.message),
        }?;
        if self.kind == QueryErrorKind::Lexical {
            if let Some(found) = &self.found {
                write!(f, " ({found:?})")?;
            }
        }
        Ok(())
    }
}

impl std::error::Error for QueryError {}
