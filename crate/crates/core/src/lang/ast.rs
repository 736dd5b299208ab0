use std::fmt;

use num_rational::Ratio;

use crate::value::ValueType;

/// Byte range into the specification source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn to(self, other: Span) -> Span {
        Span::new(self.start.min(other.start), self.end.max(other.end))
    }
}

/// Rational quantity used for frequencies (Hz) and window durations (s).
pub type Rational = Ratio<u64>;

pub fn rational_to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ident {
    pub name: String,
    pub span: Span,
}

impl Ident {
    pub fn new(name: impl Into<String>, span: Span) -> Self {
        Ident { name: name.into(), span }
    }
}

impl fmt::Display for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Spec {
    pub inputs: Vec<InputDecl>,
    pub outputs: Vec<OutputDecl>,
    pub triggers: Vec<TriggerDecl>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputDecl {
    pub name: Ident,
    pub value_type: ValueType,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputDecl {
    pub name: Ident,
    pub value_type: Option<ValueType>,
    pub pacing: Option<PacingAnnotation>,
    pub filter: Option<Expr>,
    pub expr: Expr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriggerDecl {
    pub pacing: Option<PacingAnnotation>,
    pub condition: Expr,
    pub message: Option<String>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PacingAnnotation {
    pub kind: PacingAnnotationKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PacingAnnotationKind {
    Event(PacingExpr),
    /// Frequency in Hz.
    Periodic(Rational),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PacingExpr {
    Stream(Ident),
    And(Box<PacingExpr>, Box<PacingExpr>),
    Or(Box<PacingExpr>, Box<PacingExpr>),
}

impl PacingExpr {
    pub fn streams(&self) -> Vec<&Ident> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect<'a>(&'a self, out: &mut Vec<&'a Ident>) {
        match self {
            PacingExpr::Stream(i) => out.push(i),
            PacingExpr::And(a, b) | PacingExpr::Or(a, b) => {
                a.collect(out);
                b.collect(out);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

/// A stream name followed by zero or more tuple projections, the receiver of
/// `hold`, `offset` and `aggregate`.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamPath {
    pub stream: Ident,
    pub path: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AggrFn {
    Min,
    Max,
    Sum,
    Avg,
    Count,
}

impl AggrFn {
    pub fn name(self) -> &'static str {
        match self {
            AggrFn::Min => "min",
            AggrFn::Max => "max",
            AggrFn::Sum => "sum",
            AggrFn::Avg => "avg",
            AggrFn::Count => "count",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "min" => AggrFn::Min,
            "max" => AggrFn::Max,
            "sum" => AggrFn::Sum,
            "avg" => AggrFn::Avg,
            "count" => AggrFn::Count,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "**",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "∧",
            BinOp::Or => "∨",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge)
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Pow)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Sqrt,
    Abs,
    Min,
    Max,
}

impl Builtin {
    pub fn name(self) -> &'static str {
        match self {
            Builtin::Sqrt => "sqrt",
            Builtin::Abs => "abs",
            Builtin::Min => "min",
            Builtin::Max => "max",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Builtin::Sqrt | Builtin::Abs => 1,
            Builtin::Min | Builtin::Max => 2,
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "sqrt" => Builtin::Sqrt,
            "abs" => Builtin::Abs,
            "min" => Builtin::Min,
            "max" => Builtin::Max,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Float(f64),
    Bool(bool),
    Tuple(Vec<Expr>),
    /// Synchronous access to the current value of a stream.
    Stream(Ident),
    Hold {
        target: StreamPath,
        default: Box<Expr>,
    },
    /// `offset(by: -by, or: default)`; `by` is at least 1.
    Offset {
        target: StreamPath,
        by: u32,
        default: Box<Expr>,
    },
    Aggregate {
        target: StreamPath,
        /// Window length in seconds.
        over: Rational,
        using: AggrFn,
    },
    Project(Box<Expr>, u8),
    Delta(Box<Expr>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Builtin, Vec<Expr>),
    Ite(Box<Expr>, Box<Expr>, Box<Expr>),
    /// Timestamp of the current evaluation instant.
    Now,
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }

    /// Direct sub-expressions, in source order.
    pub fn children(&self) -> Vec<&Expr> {
        match &self.kind {
            ExprKind::Float(_) | ExprKind::Bool(_) | ExprKind::Stream(_) | ExprKind::Now => vec![],
            ExprKind::Aggregate { .. } => vec![],
            ExprKind::Tuple(es) | ExprKind::Call(_, es) => es.iter().collect(),
            ExprKind::Hold { default, .. } | ExprKind::Offset { default, .. } => vec![default],
            ExprKind::Project(e, _) | ExprKind::Delta(e) | ExprKind::Unary(_, e) => vec![e],
            ExprKind::Binary(_, a, b) => vec![a, b],
            ExprKind::Ite(c, t, e) => vec![c, t, e],
        }
    }

    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        for c in self.children() {
            c.walk(f);
        }
    }

    pub fn contains_delta(&self) -> bool {
        let mut found = false;
        self.walk(&mut |e| found |= matches!(e.kind, ExprKind::Delta(_)));
        found
    }

    /// Every stream access in the expression with its kind.
    pub fn accesses(&self) -> Vec<Access<'_>> {
        let mut out = Vec::new();
        self.walk(&mut |e| match &e.kind {
            ExprKind::Stream(id) => out.push(Access { stream: id, kind: AccessKind::Sync, span: e.span }),
            ExprKind::Hold { target, .. } => {
                out.push(Access { stream: &target.stream, kind: AccessKind::Hold, span: e.span })
            }
            ExprKind::Offset { target, by, .. } => {
                out.push(Access { stream: &target.stream, kind: AccessKind::Offset(*by), span: e.span })
            }
            ExprKind::Aggregate { target, over, using } => {
                out.push(Access { stream: &target.stream, kind: AccessKind::Window(*over, *using), span: e.span })
            }
            _ => {}
        });
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AccessKind {
    Sync,
    Hold,
    Offset(u32),
    Window(Rational, AggrFn),
}

#[derive(Debug, Clone, Copy)]
pub struct Access<'a> {
    pub stream: &'a Ident,
    pub kind: AccessKind,
    pub span: Span,
}

impl Spec {
    pub fn stream_names(&self) -> impl Iterator<Item = &Ident> {
        self.inputs.iter().map(|i| &i.name).chain(self.outputs.iter().map(|o| &o.name))
    }

    pub fn input(&self, name: &str) -> Option<&InputDecl> {
        self.inputs.iter().find(|i| i.name.name == name)
    }

    pub fn output(&self, name: &str) -> Option<&OutputDecl> {
        self.outputs.iter().find(|o| o.name.name == name)
    }

    pub fn is_input(&self, name: &str) -> bool {
        self.input(name).is_some()
    }

    /// Copy with every span zeroed, for structural comparison.
    pub fn without_spans(&self) -> Spec {
        let mut s = self.clone();
        for i in &mut s.inputs {
            i.span = Span::default();
            i.name.span = Span::default();
        }
        for o in &mut s.outputs {
            o.span = Span::default();
            o.name.span = Span::default();
            if let Some(p) = &mut o.pacing {
                clear_pacing(p);
            }
            if let Some(f) = &mut o.filter {
                clear_expr(f);
            }
            clear_expr(&mut o.expr);
        }
        for t in &mut s.triggers {
            t.span = Span::default();
            if let Some(p) = &mut t.pacing {
                clear_pacing(p);
            }
            clear_expr(&mut t.condition);
        }
        s
    }
}

fn clear_pacing(p: &mut PacingAnnotation) {
    p.span = Span::default();
    fn go(e: &mut PacingExpr) {
        match e {
            PacingExpr::Stream(i) => i.span = Span::default(),
            PacingExpr::And(a, b) | PacingExpr::Or(a, b) => {
                go(a);
                go(b);
            }
        }
    }
    if let PacingAnnotationKind::Event(e) = &mut p.kind {
        go(e);
    }
}

pub(crate) fn clear_expr(e: &mut Expr) {
    e.span = Span::default();
    match &mut e.kind {
        ExprKind::Float(_) | ExprKind::Bool(_) | ExprKind::Now => {}
        ExprKind::Stream(id) => id.span = Span::default(),
        ExprKind::Aggregate { target, .. } => target.stream.span = Span::default(),
        ExprKind::Hold { target, default } | ExprKind::Offset { target, default, .. } => {
            target.stream.span = Span::default();
            clear_expr(default);
        }
        ExprKind::Tuple(es) | ExprKind::Call(_, es) => es.iter_mut().for_each(clear_expr),
        ExprKind::Project(x, _) | ExprKind::Delta(x) | ExprKind::Unary(_, x) => clear_expr(x),
        ExprKind::Binary(_, a, b) => {
            clear_expr(a);
            clear_expr(b);
        }
        ExprKind::Ite(c, t, f) => {
            clear_expr(c);
            clear_expr(t);
            clear_expr(f);
        }
    }
}

/// Maps byte offsets to 1-based line and column (columns count chars).
pub fn line_col(source: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(source.len());
    let before = &source[..offset];
    let line = before.matches('\n').count() + 1;
    let line_start = before.rfind('\n').map(|i| i + 1).unwrap_or(0);
    let col = source[line_start..offset].chars().count() + 1;
    (line, col)
}
