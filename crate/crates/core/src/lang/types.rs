use std::collections::HashMap;

use super::ast::*;
use crate::diag::Diagnostic;
use crate::value::ValueType;

/// Value type of every stream.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TypeTable {
    pub streams: HashMap<String, ValueType>,
}

impl TypeTable {
    pub fn get(&self, name: &str) -> Option<ValueType> {
        self.streams.get(name).copied()
    }
}

fn project(ty: ValueType, k: u8) -> Option<ValueType> {
    match ty {
        ValueType::Tuple(n) if k < n => Some(ValueType::Float),
        _ => None,
    }
}

fn path_type(env: &HashMap<String, ValueType>, p: &StreamPath) -> Option<ValueType> {
    let mut ty = *env.get(&p.stream.name)?;
    for k in &p.path {
        ty = project(ty, *k)?;
    }
    Some(ty)
}

/// Optimistic inference used to fill in unannotated output types. Returns
/// `None` when a needed type is not known yet.
fn guess(e: &Expr, env: &HashMap<String, ValueType>) -> Option<ValueType> {
    match &e.kind {
        ExprKind::Float(_) | ExprKind::Now | ExprKind::Aggregate { .. } | ExprKind::Delta(_) | ExprKind::Call(..) => {
            Some(ValueType::Float)
        }
        ExprKind::Bool(_) => Some(ValueType::Bool),
        ExprKind::Tuple(xs) => Some(ValueType::Tuple(xs.len() as u8)),
        ExprKind::Stream(id) => env.get(&id.name).copied(),
        ExprKind::Hold { target, default } | ExprKind::Offset { target, default, .. } => {
            guess(default, env).or_else(|| path_type(env, target))
        }
        ExprKind::Project(..) => Some(ValueType::Float),
        ExprKind::Unary(UnOp::Neg, _) => Some(ValueType::Float),
        ExprKind::Unary(UnOp::Not, _) => Some(ValueType::Bool),
        ExprKind::Binary(op, ..) if op.is_arithmetic() => Some(ValueType::Float),
        ExprKind::Binary(..) => Some(ValueType::Bool),
        ExprKind::Ite(_, t, f) => guess(t, env).or_else(|| guess(f, env)),
    }
}

struct Checker<'a> {
    env: &'a HashMap<String, ValueType>,
    stream: &'a str,
    diags: Vec<Diagnostic>,
}

impl Checker<'_> {
    fn err(&mut self, span: Span, msg: String) -> Option<ValueType> {
        self.diags.push(Diagnostic::error("type-mismatch", self.stream, span, msg));
        None
    }

    fn expect(&mut self, e: &Expr, want: ValueType, what: &str) -> Option<()> {
        let got = self.check(e)?;
        if got != want {
            self.err(e.span, format!("{what} must be {want}, found {got}"));
            return None;
        }
        Some(())
    }

    fn check(&mut self, e: &Expr) -> Option<ValueType> {
        match &e.kind {
            ExprKind::Float(_) | ExprKind::Now => Some(ValueType::Float),
            ExprKind::Bool(_) => Some(ValueType::Bool),
            ExprKind::Tuple(xs) => {
                for x in xs {
                    self.expect(x, ValueType::Float, "tuple component")?;
                }
                if xs.len() < 2 {
                    return self.err(e.span, "tuples have 2 to 4 components".into());
                }
                Some(ValueType::Tuple(xs.len() as u8))
            }
            ExprKind::Stream(id) => self.env.get(&id.name).copied(),
            ExprKind::Hold { target, default } | ExprKind::Offset { target, default, .. } => {
                let Some(tt) = path_type(self.env, target) else {
                    return self.err(target.stream.span, format!("invalid projection on `{}`", target.stream));
                };
                let dt = self.check(default)?;
                if dt != tt {
                    return self.err(default.span, format!("default must be {tt}, found {dt}"));
                }
                Some(tt)
            }
            ExprKind::Aggregate { target, using, .. } => {
                let Some(tt) = path_type(self.env, target) else {
                    return self.err(target.stream.span, format!("invalid projection on `{}`", target.stream));
                };
                if *using != AggrFn::Count && tt != ValueType::Float {
                    return self.err(e.span, format!("`{}` aggregates Float64 values, found {tt}", using.name()));
                }
                Some(ValueType::Float)
            }
            ExprKind::Project(inner, k) => {
                let t = self.check(inner)?;
                match project(t, *k) {
                    Some(t) => Some(t),
                    None => self.err(e.span, format!("cannot project .{k} out of {t}")),
                }
            }
            ExprKind::Delta(inner) => {
                self.expect(inner, ValueType::Float, "delta operand")?;
                Some(ValueType::Float)
            }
            ExprKind::Unary(UnOp::Neg, x) => {
                self.expect(x, ValueType::Float, "operand of `-`")?;
                Some(ValueType::Float)
            }
            ExprKind::Unary(UnOp::Not, x) => {
                self.expect(x, ValueType::Bool, "operand of `!`")?;
                Some(ValueType::Bool)
            }
            ExprKind::Binary(op, a, b) => {
                let sym = op.symbol();
                match op {
                    o if o.is_arithmetic() => {
                        self.expect(a, ValueType::Float, &format!("left operand of `{sym}`"))?;
                        self.expect(b, ValueType::Float, &format!("right operand of `{sym}`"))?;
                        Some(ValueType::Float)
                    }
                    BinOp::And | BinOp::Or => {
                        self.expect(a, ValueType::Bool, &format!("left operand of `{sym}`"))?;
                        self.expect(b, ValueType::Bool, &format!("right operand of `{sym}`"))?;
                        Some(ValueType::Bool)
                    }
                    BinOp::Eq | BinOp::Ne => {
                        let ta = self.check(a)?;
                        let tb = self.check(b)?;
                        if ta != tb {
                            return self.err(e.span, format!("cannot compare {ta} with {tb}"));
                        }
                        Some(ValueType::Bool)
                    }
                    _ => {
                        self.expect(a, ValueType::Float, &format!("left operand of `{sym}`"))?;
                        self.expect(b, ValueType::Float, &format!("right operand of `{sym}`"))?;
                        Some(ValueType::Bool)
                    }
                }
            }
            ExprKind::Call(_, args) => {
                for x in args {
                    self.expect(x, ValueType::Float, "argument")?;
                }
                Some(ValueType::Float)
            }
            ExprKind::Ite(c, t, f) => {
                self.expect(c, ValueType::Bool, "condition")?;
                let tt = self.check(t)?;
                let tf = self.check(f)?;
                if tt != tf {
                    return self.err(e.span, format!("branches differ: {tt} and {tf}"));
                }
                Some(tt)
            }
        }
    }
}

/// Infers unannotated output types and checks every expression.
pub fn check_types(spec: &Spec) -> Result<TypeTable, Vec<Diagnostic>> {
    let mut env: HashMap<String, ValueType> = HashMap::new();
    for i in &spec.inputs {
        env.insert(i.name.name.clone(), i.value_type);
    }
    for o in &spec.outputs {
        if let Some(t) = o.value_type {
            env.insert(o.name.name.clone(), t);
        }
    }
    loop {
        let mut progress = false;
        for o in &spec.outputs {
            if env.contains_key(&o.name.name) {
                continue;
            }
            if let Some(t) = guess(&o.expr, &env) {
                env.insert(o.name.name.clone(), t);
                progress = true;
            }
        }
        if !progress {
            break;
        }
    }

    let mut diags = Vec::new();
    for o in &spec.outputs {
        let Some(declared) = env.get(&o.name.name).copied() else {
            diags.push(Diagnostic::error(
                "type-unknown",
                o.name.name.clone(),
                o.name.span,
                "cannot infer the value type; add an annotation",
            ));
            continue;
        };
        let mut c = Checker { env: &env, stream: &o.name.name, diags: Vec::new() };
        if let Some(f) = &o.filter {
            c.expect(f, ValueType::Bool, "filter");
        }
        if let Some(t) = c.check(&o.expr) {
            if t != declared {
                c.err(o.expr.span, format!("expression has type {t}, stream is declared {declared}"));
            }
        }
        diags.extend(c.diags);
    }
    for (i, t) in spec.triggers.iter().enumerate() {
        let name = format!("trigger#{i}");
        let mut c = Checker { env: &env, stream: &name, diags: Vec::new() };
        c.expect(&t.condition, ValueType::Bool, "trigger condition");
        diags.extend(c.diags);
    }
    if diags.is_empty() {
        Ok(TypeTable { streams: env })
    } else {
        crate::diag::sort_diagnostics(&mut diags);
        Err(diags)
    }
}
