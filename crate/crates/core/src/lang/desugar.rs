use super::ast::*;

/// Replaces every `δ(e)` by `e - shift(e)`, innermost first.
///
/// `shift` moves every stream access one accepted instant into the past:
/// `s` becomes `s.offset(by: -1, or: s)` and `s.offset(by: -n, or: d)` becomes
/// `s.offset(by: -(n+1), or: shift(d))`. Defaulting to the current value makes
/// the first difference 0.
pub fn desugar(spec: &Spec) -> Spec {
    let mut out = spec.clone();
    for o in &mut out.outputs {
        if let Some(f) = &mut o.filter {
            *f = desugar_expr(f);
        }
        o.expr = desugar_expr(&o.expr);
    }
    for t in &mut out.triggers {
        t.condition = desugar_expr(&t.condition);
    }
    out
}

pub(crate) fn desugar_expr(e: &Expr) -> Expr {
    let span = e.span;
    let kind = match &e.kind {
        ExprKind::Delta(inner) => {
            let inner = desugar_expr(inner);
            let past = shift(&inner);
            ExprKind::Binary(BinOp::Sub, Box::new(inner), Box::new(past))
        }
        _ => return map_children(e, desugar_expr),
    };
    Expr::new(kind, span)
}

fn shift(e: &Expr) -> Expr {
    let span = e.span;
    match &e.kind {
        ExprKind::Stream(id) => Expr::new(
            ExprKind::Offset {
                target: StreamPath { stream: id.clone(), path: vec![] },
                by: 1,
                default: Box::new(e.clone()),
            },
            span,
        ),
        ExprKind::Offset { target, by, default } => {
            Expr::new(ExprKind::Offset { target: target.clone(), by: by + 1, default: Box::new(shift(default)) }, span)
        }
        _ => map_children(e, shift),
    }
}

fn map_children(e: &Expr, f: fn(&Expr) -> Expr) -> Expr {
    let b = |x: &Expr| Box::new(f(x));
    let kind = match &e.kind {
        ExprKind::Float(_) | ExprKind::Bool(_) | ExprKind::Stream(_) | ExprKind::Now | ExprKind::Aggregate { .. } => {
            e.kind.clone()
        }
        ExprKind::Tuple(xs) => ExprKind::Tuple(xs.iter().map(f).collect()),
        ExprKind::Call(c, xs) => ExprKind::Call(*c, xs.iter().map(f).collect()),
        ExprKind::Hold { target, default } => ExprKind::Hold { target: target.clone(), default: b(default) },
        ExprKind::Offset { target, by, default } => {
            ExprKind::Offset { target: target.clone(), by: *by, default: b(default) }
        }
        ExprKind::Project(x, k) => ExprKind::Project(b(x), *k),
        ExprKind::Delta(x) => ExprKind::Delta(b(x)),
        ExprKind::Unary(op, x) => ExprKind::Unary(*op, b(x)),
        ExprKind::Binary(op, x, y) => ExprKind::Binary(*op, b(x), b(y)),
        ExprKind::Ite(c, t, el) => ExprKind::Ite(b(c), b(t), b(el)),
    };
    Expr::new(kind, e.span)
}
