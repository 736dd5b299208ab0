//! The specification language: lexer, parser, pretty-printer, the delta
//! rewrite and value-type checking.

pub mod ast;
mod desugar;
mod lexer;
mod parser;
pub(crate) mod pretty;
mod types;

use std::collections::HashMap;

use thiserror::Error;

pub use ast::*;
pub use desugar::desugar;
pub use parser::parse_rational;
pub use pretty::{pretty_expr, pretty_spec, rational_decimal};
pub use types::{check_types, TypeTable};

use crate::diag::Diagnostic;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{column}: syntax error: expected {}, found {found}", expected.join(" or "))]
    Syntax { line: usize, column: usize, offset: usize, expected: Vec<String>, found: String },
    #[error("{line}:{column}: unknown stream `{name}`")]
    UnknownStream { name: String, line: usize, column: usize, span: Span },
    #[error("{line}:{column}: duplicate stream `{name}`")]
    DuplicateStream { name: String, line: usize, column: usize, span: Span },
}

impl ParseError {
    pub(crate) fn syntax(src: &str, offset: usize, expected: Vec<String>, found: &str) -> Self {
        let (line, column) = line_col(src, offset);
        ParseError::Syntax { line, column, offset, expected, found: found.to_string() }
    }

    pub fn to_diagnostic(&self) -> Diagnostic {
        match self {
            ParseError::Syntax { offset, expected, found, .. } => Diagnostic::error(
                "syntax",
                "-",
                Span::new(*offset, *offset),
                format!("expected {}, found {found}", expected.join(" or ")),
            ),
            ParseError::UnknownStream { name, span, .. } => {
                Diagnostic::error("unknown-stream", name.clone(), *span, format!("unknown stream `{name}`"))
            }
            ParseError::DuplicateStream { name, span, .. } => {
                Diagnostic::error("duplicate-stream", name.clone(), *span, format!("stream `{name}` declared twice"))
            }
        }
    }
}

/// Parses and name-resolves a specification.
pub fn parse_spec(source: &str) -> Result<Spec, ParseError> {
    let spec = parser::Parser::new(source)?.parse_spec()?;
    resolve_names(source, &spec)?;
    Ok(spec)
}

/// Parses a standalone expression (used by configuration files that carry
/// user-supplied conditions).
pub fn parse_expr(source: &str) -> Result<Expr, ParseError> {
    let mut p = parser::Parser::new(source)?;
    p.parse_standalone_expr()
}

fn resolve_names(src: &str, spec: &Spec) -> Result<(), ParseError> {
    let mut seen: HashMap<&str, Span> = HashMap::new();
    let mut errors = Vec::new();
    for id in spec.stream_names() {
        if seen.insert(&id.name, id.span).is_some() {
            let (line, column) = line_col(src, id.span.start);
            errors.push(ParseError::DuplicateStream { name: id.name.clone(), line, column, span: id.span });
        }
    }
    let mut check = |id: &Ident| {
        if !seen.contains_key(id.name.as_str()) {
            let (line, column) = line_col(src, id.span.start);
            errors.push(ParseError::UnknownStream { name: id.name.clone(), line, column, span: id.span });
        }
    };
    let check_expr = |e: &Expr, check: &mut dyn FnMut(&Ident)| {
        for a in e.accesses() {
            check(a.stream);
        }
    };
    for o in &spec.outputs {
        if let Some(p) = &o.pacing {
            if let PacingAnnotationKind::Event(pe) = &p.kind {
                pe.streams().into_iter().for_each(&mut check);
            }
        }
        if let Some(f) = &o.filter {
            check_expr(f, &mut check);
        }
        check_expr(&o.expr, &mut check);
    }
    for t in &spec.triggers {
        if let Some(p) = &t.pacing {
            if let PacingAnnotationKind::Event(pe) = &p.kind {
                pe.streams().into_iter().for_each(&mut check);
            }
        }
        check_expr(&t.condition, &mut check);
    }
    errors.sort_by_key(|e| match e {
        ParseError::UnknownStream { span, .. } | ParseError::DuplicateStream { span, .. } => span.start,
        ParseError::Syntax { offset, .. } => *offset,
    });
    match errors.into_iter().next() {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::ValueType;

    pub(crate) const SECTION2: &str = "\
input gps: (Float64, Float64), charge: Float64, time: Float64
output charge_time @charge := time.hold(or: 0.0)
output filtered_gps filter gps != (0.0,0.0) := gps
trigger δ(charge) / δ(charge_time) > 2.0
trigger filtered_gps.0 > 6.0 ∧ filtered_gps.1 > 6.0
";

    #[test]
    fn parses_the_battery_spec() {
        let spec = parse_spec(SECTION2).unwrap();
        assert_eq!(spec.inputs.len(), 3);
        assert_eq!(spec.outputs.len(), 2);
        assert_eq!(spec.triggers.len(), 2);
        assert_eq!(spec.inputs[0].value_type, ValueType::Tuple(2));
        assert!(spec.outputs[1].filter.is_some());
        assert!(matches!(
            spec.outputs[0].pacing.as_ref().unwrap().kind,
            PacingAnnotationKind::Event(PacingExpr::Stream(ref i)) if i.name == "charge"
        ));
    }

    #[test]
    fn empty_source_is_an_empty_spec() {
        let spec = parse_spec("").unwrap();
        assert!(spec.inputs.is_empty() && spec.outputs.is_empty() && spec.triggers.is_empty());
        assert_eq!(parse_spec("  // only a comment\n").unwrap(), Spec::default());
    }

    #[test]
    fn unresolved_name() {
        match parse_spec("output x := y") {
            Err(ParseError::UnknownStream { name, line, column, .. }) => {
                assert_eq!(name, "y");
                assert_eq!((line, column), (1, 13));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_declaration() {
        let err = parse_spec("input a: Float64\noutput a := 1.0").unwrap_err();
        assert!(matches!(err, ParseError::DuplicateStream { ref name, line: 2, .. } if name == "a"), "{err:?}");
    }

    #[test]
    fn syntax_error_reports_position_and_expected() {
        let err = parse_spec("input a: Float64\noutput b @a a + 1.0").unwrap_err();
        match err {
            ParseError::Syntax { line, column, expected, .. } => {
                assert_eq!((line, column), (2, 13));
                assert!(expected.contains(&"`:=`".to_string()));
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn offset_must_be_strictly_past() {
        assert!(parse_spec("input a: Float64\noutput b := a.offset(by: 0, or: 0.0)").is_err());
        assert!(parse_spec("input a: Float64\noutput b := a.offset(by: 1, or: 0.0)").is_err());
        assert!(parse_spec("input a: Float64\noutput b := a.offset(by: -2, or: 0.0)").is_ok());
        assert!(parse_spec("input a: Float64\noutput b := a.offset(or: 0.0, by: -2)").is_ok());
    }

    #[test]
    fn aggregate_requires_positive_duration() {
        assert!(parse_spec("input a: Float64\noutput b @1Hz := a.aggregate(over: 0s, using: min)").is_err());
        let s = parse_spec("input a: Float64\noutput b @1Hz := a.aggregate(over: 500ms, using: avg)").unwrap();
        match &s.outputs[0].expr.kind {
            ExprKind::Aggregate { over, using, .. } => {
                assert_eq!(*over, Rational::new(1, 2));
                assert_eq!(*using, AggrFn::Avg);
            }
            k => panic!("{k:?}"),
        }
    }

    #[test]
    fn tuple_arity_capped_at_four() {
        assert!(parse_spec("input a: (Float64, Float64, Float64, Float64, Float64)").is_err());
        assert!(parse_spec("input a: (Float64, Float64, Float64, Float64)").is_ok());
        assert!(parse_spec("input a: Float64\noutput b := a.4").is_err());
    }

    #[test]
    fn delta_rejects_hold_operand() {
        assert!(parse_spec("input a: Float64\noutput b := δ(a.hold(or: 0.0))").is_err());
        assert!(parse_spec("input a: Float64\noutput b := δ(δ(a))").is_ok());
    }

    #[test]
    fn periodic_annotation_is_exact() {
        let s = parse_spec("input a: Float64\noutput b @0.1Hz := a.hold(or: 0.0)").unwrap();
        assert_eq!(s.outputs[0].pacing.as_ref().unwrap().kind, PacingAnnotationKind::Periodic(Rational::new(1, 10)));
    }

    #[test]
    fn every_span_lies_inside_the_source() {
        let spec = parse_spec(SECTION2).unwrap();
        let n = SECTION2.len();
        let mut check = |e: &Expr| assert!(e.span.start <= e.span.end && e.span.end <= n, "{e:?}");
        for o in &spec.outputs {
            o.expr.walk(&mut check);
        }
        for t in &spec.triggers {
            t.condition.walk(&mut check);
            assert!(t.span.end <= n);
        }
    }

    #[test]
    fn trigger_message_is_optional() {
        let s = parse_spec("input a: Float64\ntrigger a > 1.0 \"too high\"\ntrigger a < 0.0").unwrap();
        assert_eq!(s.triggers[0].message.as_deref(), Some("too high"));
        assert_eq!(s.triggers[1].message, None);
    }
}
