use std::fmt::Write;

use super::ast::*;

const PREC_ITE: u8 = 0;
const PREC_OR: u8 = 1;
const PREC_AND: u8 = 2;
const PREC_CMP: u8 = 3;
const PREC_ADD: u8 = 4;
const PREC_MUL: u8 = 5;
const PREC_UNARY: u8 = 6;
const PREC_POW: u8 = 7;
const PREC_ATOM: u8 = 8;

fn binop_prec(op: BinOp) -> u8 {
    match op {
        BinOp::Or => PREC_OR,
        BinOp::And => PREC_AND,
        BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => PREC_CMP,
        BinOp::Add | BinOp::Sub => PREC_ADD,
        BinOp::Mul | BinOp::Div => PREC_MUL,
        BinOp::Pow => PREC_POW,
    }
}

fn prec(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Ite(..) => PREC_ITE,
        ExprKind::Binary(op, ..) => binop_prec(*op),
        ExprKind::Unary(..) => PREC_UNARY,
        _ => PREC_ATOM,
    }
}

/// Renders an exact decimal for rationals whose denominator has only the
/// prime factors 2 and 5 (everything the parser produces).
pub fn rational_decimal(r: Rational) -> String {
    let (n, d) = (*r.numer(), *r.denom());
    let mut s = (n / d).to_string();
    let mut rem = n % d;
    if rem == 0 {
        return s;
    }
    s.push('.');
    for _ in 0..40 {
        if rem == 0 {
            break;
        }
        rem *= 10;
        s.push(char::from(b'0' + (rem / d) as u8));
        rem %= d;
    }
    s
}

pub(crate) fn float_lit(v: f64) -> String {
    let s = format!("{v:?}");
    if s.contains(['.', 'e', 'E']) || !v.is_finite() {
        s
    } else {
        format!("{s}.0")
    }
}

fn stream_path(p: &StreamPath) -> String {
    let mut s = p.stream.name.clone();
    for k in &p.path {
        let _ = write!(s, ".{k}");
    }
    s
}

fn go(e: &Expr, ctx: u8, out: &mut String) {
    let wrap = prec(e) < ctx;
    if wrap {
        out.push('(');
    }
    match &e.kind {
        ExprKind::Float(v) => out.push_str(&float_lit(*v)),
        ExprKind::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        ExprKind::Now => out.push_str("now()"),
        ExprKind::Stream(id) => out.push_str(&id.name),
        ExprKind::Tuple(items) => {
            out.push('(');
            for (i, x) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                go(x, PREC_ITE, out);
            }
            out.push(')');
        }
        ExprKind::Hold { target, default } => {
            let _ = write!(out, "{}.hold(or: ", stream_path(target));
            go(default, PREC_ITE, out);
            out.push(')');
        }
        ExprKind::Offset { target, by, default } => {
            let _ = write!(out, "{}.offset(by: -{by}, or: ", stream_path(target));
            go(default, PREC_ITE, out);
            out.push(')');
        }
        ExprKind::Aggregate { target, over, using } => {
            let _ = write!(
                out,
                "{}.aggregate(over: {}s, using: {})",
                stream_path(target),
                rational_decimal(*over),
                using.name()
            );
        }
        ExprKind::Project(inner, k) => {
            go(inner, PREC_ATOM, out);
            let _ = write!(out, ".{k}");
        }
        ExprKind::Delta(inner) => {
            out.push_str("δ(");
            go(inner, PREC_ITE, out);
            out.push(')');
        }
        ExprKind::Unary(op, inner) => {
            out.push(match op {
                UnOp::Neg => '-',
                UnOp::Not => '!',
            });
            go(inner, PREC_UNARY, out);
        }
        ExprKind::Binary(op, a, b) => {
            let p = binop_prec(*op);
            let (lctx, rctx) = match op {
                BinOp::Pow => (PREC_ATOM, PREC_UNARY),
                o if o.is_comparison() => (p + 1, p + 1),
                _ => (p, p + 1),
            };
            go(a, lctx, out);
            let _ = write!(out, " {} ", op.symbol());
            go(b, rctx, out);
        }
        ExprKind::Call(b, args) => {
            let _ = write!(out, "{}(", b.name());
            for (i, x) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                go(x, PREC_ITE, out);
            }
            out.push(')');
        }
        ExprKind::Ite(c, t, f) => {
            out.push_str("if ");
            go(c, PREC_ITE, out);
            out.push_str(" then ");
            go(t, PREC_ITE, out);
            out.push_str(" else ");
            go(f, PREC_ITE, out);
        }
    }
    if wrap {
        out.push(')');
    }
}

pub fn pretty_expr(e: &Expr) -> String {
    let mut s = String::new();
    go(e, PREC_ITE, &mut s);
    s
}

fn pacing_expr(p: &PacingExpr, parent_and: bool, out: &mut String) {
    match p {
        PacingExpr::Stream(i) => out.push_str(&i.name),
        PacingExpr::And(a, b) => {
            pacing_expr(a, true, out);
            out.push_str(" ∧ ");
            pacing_expr(b, true, out);
        }
        PacingExpr::Or(a, b) => {
            if parent_and {
                out.push('(');
            }
            pacing_expr(a, false, out);
            out.push_str(" ∨ ");
            pacing_expr(b, false, out);
            if parent_and {
                out.push(')');
            }
        }
    }
}

pub(crate) fn pretty_pacing(p: &PacingAnnotation) -> String {
    match &p.kind {
        PacingAnnotationKind::Periodic(hz) => format!("@{}Hz", rational_decimal(*hz)),
        PacingAnnotationKind::Event(e) => {
            let mut s = String::from("@");
            pacing_expr(e, false, &mut s);
            s
        }
    }
}

fn quote(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Canonical text form; parsing it yields the same AST up to spans.
pub fn pretty_spec(spec: &Spec) -> String {
    let mut out = String::new();
    for i in &spec.inputs {
        let _ = writeln!(out, "input {}: {}", i.name, i.value_type);
    }
    for o in &spec.outputs {
        let _ = write!(out, "output {}", o.name);
        if let Some(t) = o.value_type {
            let _ = write!(out, ": {t}");
        }
        if let Some(p) = &o.pacing {
            let _ = write!(out, " {}", pretty_pacing(p));
        }
        if let Some(f) = &o.filter {
            let _ = write!(out, " filter {}", pretty_expr(f));
        }
        let _ = writeln!(out, " := {}", pretty_expr(&o.expr));
    }
    for t in &spec.triggers {
        out.push_str("trigger ");
        if let Some(p) = &t.pacing {
            let _ = write!(out, "{} ", pretty_pacing(p));
        }
        out.push_str(&pretty_expr(&t.condition));
        if let Some(m) = &t.message {
            let _ = write!(out, " {}", quote(m));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_spec;

    fn round_trip(src: &str) {
        let a = parse_spec(src).unwrap();
        let printed = pretty_spec(&a);
        let b = parse_spec(&printed).unwrap_or_else(|e| panic!("{e}\n{printed}"));
        assert_eq!(a.without_spans(), b.without_spans(), "{printed}");
    }

    #[test]
    fn precedence_survives_printing() {
        round_trip("input a: Float64, b: Float64\noutput c := (a + b) * a - -b ** 2.0 / (a - b)");
        round_trip("input a: Float64\noutput c := -(a ** 2.0) + (-a) ** 2.0 + 2.0 ** -a ** 3.0");
        round_trip("input a: Bool, b: Bool\noutput c := (a ∨ b) ∧ !(a ∧ b) ∨ a == b");
        round_trip("input a: Float64\noutput c := 1.0 + (if a > 0.0 then a else -a) * 2.0");
        round_trip("input a: Float64\noutput c := (1.0 < a) == (a < 2.0)");
    }

    #[test]
    fn stream_operations_round_trip() {
        round_trip(
            "input g: (Float64, Float64)\noutput l: (Float64, Float64) @g := (min(g.0, l.0.offset(by: -1, or: g.0)), max(g.0, l.1.offset(by: -1, or: g.0)))\noutput w @0.25Hz := g.1.aggregate(over: 2.5s, using: avg)",
        );
        round_trip(
            "input a: Float64, b: Float64\noutput c @(a ∨ b) ∧ a := δ(δ(a)) + now()\ntrigger @a c > 1.0 \"q\\\"uote\"",
        );
    }

    #[test]
    fn decimal_rendering_is_exact() {
        assert_eq!(rational_decimal(Rational::new(1, 8)), "0.125");
        assert_eq!(rational_decimal(Rational::new(5, 1)), "5");
        assert_eq!(float_lit(2.0), "2.0");
        assert_eq!(float_lit(1e-9), "1e-9");
    }
}
