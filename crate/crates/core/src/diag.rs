//! Diagnostics in the line-oriented format printed by `lolaviz check`:
//! `ERROR <code> <stream> <line>:<col> <message>`.

use std::fmt;

use crate::lang::ast::{line_col, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: &'static str,
    /// Stream the diagnostic is about, `-` when there is none.
    pub stream: String,
    pub span: Span,
    pub message: String,
}

impl Diagnostic {
    pub fn error(code: &'static str, stream: impl Into<String>, span: Span, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Error, code, stream: stream.into(), span, message: message.into() }
    }

    pub fn warning(code: &'static str, stream: impl Into<String>, span: Span, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Warning, ..Diagnostic::error(code, stream, span, message) }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }

    pub fn render(&self, source: &str) -> String {
        let (line, col) = line_col(source, self.span.start);
        let level = match self.severity {
            Severity::Error => "ERROR",
            Severity::Warning => "WARN",
        };
        let stream = if self.stream.is_empty() { "-" } else { &self.stream };
        format!("{level} {} {stream} {line}:{col} {}", self.code, self.message)
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} @{}: {}", self.code, self.stream, self.span.start, self.message)
    }
}

/// Stable ordering by source position, then code.
pub fn sort_diagnostics(diags: &mut [Diagnostic]) {
    diags.sort_by(|a, b| {
        (a.span.start, a.span.end, a.code, &a.stream).cmp(&(b.span.start, b.span.end, b.code, &b.stream))
    });
}
