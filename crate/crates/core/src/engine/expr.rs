use std::collections::HashMap;

use crate::lang::{AggrFn, BinOp, Builtin, Expr, ExprKind, StreamPath, UnOp};
use crate::value::{float_ne, nan_max, nan_min, Scalar, StreamValue};

/// Expression with stream names resolved to indices.
#[derive(Debug, Clone)]
pub(crate) enum CExpr<F> {
    Const(StreamValue<F>),
    Tuple(Vec<CExpr<F>>),
    Sync(usize),
    Hold { stream: usize, path: Vec<u8>, default: Box<CExpr<F>> },
    Offset { stream: usize, path: Vec<u8>, by: u32, default: Box<CExpr<F>> },
    Window { window: usize, using: AggrFn },
    Project(Box<CExpr<F>>, u8),
    Neg(Box<CExpr<F>>),
    Not(Box<CExpr<F>>),
    Bin(BinOp, Box<CExpr<F>>, Box<CExpr<F>>),
    Call(Builtin, Vec<CExpr<F>>),
    Ite(Box<CExpr<F>>, Box<CExpr<F>>, Box<CExpr<F>>),
    Now,
}

pub(crate) struct Resolver<'a> {
    pub ids: &'a HashMap<String, usize>,
    /// Maps (stream, path, duration) to a window index.
    pub window: &'a dyn Fn(&StreamPath, crate::lang::Rational) -> usize,
}

impl<'a> Resolver<'a> {
    pub fn compile<F: Scalar>(&self, e: &Expr) -> CExpr<F> {
        let b = |x: &Expr| Box::new(self.compile(x));
        match &e.kind {
            ExprKind::Float(v) => CExpr::Const(StreamValue::Float(F::from_f64_lossy(*v))),
            ExprKind::Bool(v) => CExpr::Const(StreamValue::Bool(*v)),
            ExprKind::Tuple(xs) => CExpr::Tuple(xs.iter().map(|x| self.compile(x)).collect()),
            ExprKind::Stream(id) => CExpr::Sync(self.ids[&id.name]),
            ExprKind::Hold { target, default } => {
                CExpr::Hold { stream: self.ids[&target.stream.name], path: target.path.clone(), default: b(default) }
            }
            ExprKind::Offset { target, by, default } => CExpr::Offset {
                stream: self.ids[&target.stream.name],
                path: target.path.clone(),
                by: *by,
                default: b(default),
            },
            ExprKind::Aggregate { target, over, using } => {
                CExpr::Window { window: (self.window)(target, *over), using: *using }
            }
            ExprKind::Project(x, k) => CExpr::Project(b(x), *k),
            ExprKind::Delta(_) => unreachable!("delta is rewritten before compilation"),
            ExprKind::Unary(UnOp::Neg, x) => CExpr::Neg(b(x)),
            ExprKind::Unary(UnOp::Not, x) => CExpr::Not(b(x)),
            ExprKind::Binary(op, x, y) => CExpr::Bin(*op, b(x), b(y)),
            ExprKind::Call(f, xs) => CExpr::Call(*f, xs.iter().map(|x| self.compile(x)).collect()),
            ExprKind::Ite(c, t, f) => CExpr::Ite(b(c), b(t), b(f)),
            ExprKind::Now => CExpr::Now,
        }
    }
}

/// A synchronous access hit a stream that did not produce a value in this
/// instant (its filter was false or it was itself skipped).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Absent;

/// Read access to the monitor state during one instant.
pub(crate) trait Env<F> {
    fn now(&self) -> f64;
    fn current(&self, stream: usize) -> Result<&StreamValue<F>, Absent>;
    fn latest(&self, stream: usize) -> Option<&StreamValue<F>>;
    fn past(&self, stream: usize, by: u32) -> Option<&StreamValue<F>>;
    fn window(&self, window: usize, using: AggrFn) -> F;
}

pub(crate) fn project<F: Scalar>(v: &StreamValue<F>, path: &[u8]) -> StreamValue<F> {
    match path.split_first() {
        None => v.clone(),
        Some((k, rest)) => match v {
            StreamValue::Tuple(xs) if rest.is_empty() => StreamValue::Float(xs[*k as usize]),
            _ => panic!("projection .{k} on {v:?}"),
        },
    }
}

fn float<F: Scalar>(v: StreamValue<F>) -> F {
    v.as_float().expect("type-checked float")
}

fn boolean<F: Scalar>(v: StreamValue<F>) -> bool {
    v.as_bool().expect("type-checked bool")
}

fn arith<F: Scalar>(op: BinOp, a: F, b: F) -> F {
    let r = match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div if b.is_zero() => F::nan(),
        BinOp::Div => a / b,
        BinOp::Pow => a.powf(b),
        _ => unreachable!(),
    };
    r.normalize()
}

fn equal<F: Scalar>(a: &StreamValue<F>, b: &StreamValue<F>) -> bool {
    match (a, b) {
        (StreamValue::Float(x), StreamValue::Float(y)) => x == y,
        (StreamValue::Bool(x), StreamValue::Bool(y)) => x == y,
        (StreamValue::Tuple(x), StreamValue::Tuple(y)) => x.len() == y.len() && x.iter().zip(y).all(|(p, q)| p == q),
        _ => false,
    }
}

fn not_equal<F: Scalar>(a: &StreamValue<F>, b: &StreamValue<F>) -> bool {
    match (a, b) {
        (StreamValue::Float(x), StreamValue::Float(y)) => float_ne(*x, *y),
        (StreamValue::Bool(x), StreamValue::Bool(y)) => x != y,
        (StreamValue::Tuple(x), StreamValue::Tuple(y)) => {
            let nan = x.iter().chain(y).any(|v| v.is_nan());
            !nan && x.iter().zip(y).any(|(p, q)| p != q)
        }
        _ => false,
    }
}

/// Evaluates with short-circuit `∧`/`∨` and lazy `if`.
pub(crate) fn eval<F: Scalar, E: Env<F>>(e: &CExpr<F>, env: &E) -> Result<StreamValue<F>, Absent> {
    Ok(match e {
        CExpr::Const(v) => v.clone(),
        CExpr::Tuple(xs) => {
            let mut out = Vec::with_capacity(xs.len());
            for x in xs {
                out.push(float(eval(x, env)?));
            }
            StreamValue::Tuple(out)
        }
        CExpr::Sync(s) => env.current(*s)?.clone(),
        CExpr::Hold { stream, path, default } => match env.latest(*stream) {
            Some(v) => project(v, path),
            None => eval(default, env)?,
        },
        CExpr::Offset { stream, path, by, default } => match env.past(*stream, *by) {
            Some(v) => project(v, path),
            None => eval(default, env)?,
        },
        CExpr::Window { window, using } => StreamValue::Float(env.window(*window, *using)),
        CExpr::Project(x, k) => project(&eval(x, env)?, &[*k]),
        CExpr::Neg(x) => StreamValue::Float(-float(eval(x, env)?)),
        CExpr::Not(x) => StreamValue::Bool(!boolean(eval(x, env)?)),
        CExpr::Bin(BinOp::And, a, b) => StreamValue::Bool(boolean(eval(a, env)?) && boolean(eval(b, env)?)),
        CExpr::Bin(BinOp::Or, a, b) => StreamValue::Bool(boolean(eval(a, env)?) || boolean(eval(b, env)?)),
        CExpr::Bin(op, a, b) => {
            let x = eval(a, env)?;
            let y = eval(b, env)?;
            match op {
                BinOp::Eq => StreamValue::Bool(equal(&x, &y)),
                BinOp::Ne => StreamValue::Bool(not_equal(&x, &y)),
                BinOp::Lt => StreamValue::Bool(float(x) < float(y)),
                BinOp::Le => StreamValue::Bool(float(x) <= float(y)),
                BinOp::Gt => StreamValue::Bool(float(x) > float(y)),
                BinOp::Ge => StreamValue::Bool(float(x) >= float(y)),
                _ => StreamValue::Float(arith(*op, float(x), float(y))),
            }
        }
        CExpr::Call(f, xs) => {
            let mut a = Vec::with_capacity(xs.len());
            for x in xs {
                a.push(float(eval(x, env)?));
            }
            StreamValue::Float(match f {
                Builtin::Sqrt => a[0].sqrt().normalize(),
                Builtin::Abs => a[0].abs(),
                Builtin::Min => nan_min(a[0], a[1]),
                Builtin::Max => nan_max(a[0], a[1]),
            })
        }
        CExpr::Ite(c, t, f) => {
            if boolean(eval(c, env)?) {
                eval(t, env)?
            } else {
                eval(f, env)?
            }
        }
        CExpr::Now => StreamValue::Float(F::from_f64_lossy(env.now())),
    })
}
