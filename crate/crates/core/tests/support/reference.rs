//! Naive evaluator keeping the full history of every stream. Streams are
//! evaluated on demand per instant, so it needs no evaluation order, and
//! windows are recomputed from history at every access.

use std::collections::{BTreeMap, HashMap};

use lolaviz::lang::{AggrFn, BinOp, Builtin, Expr, ExprKind, PacingAnnotationKind, PacingExpr, Spec, UnOp};
use lolaviz::StreamValue;
use num_rational::Ratio;

pub type Time = Ratio<i64>;

#[derive(Debug, Clone, PartialEq)]
pub struct RefVerdict {
    pub time: f64,
    pub periodic: bool,
    pub outputs: BTreeMap<String, StreamValue>,
    pub triggers: Vec<usize>,
}

#[derive(Clone)]
enum Pacing {
    Event(PacingExpr),
    Periodic(Time),
}

impl Pacing {
    fn of(p: &PacingAnnotationKind) -> Pacing {
        match p {
            PacingAnnotationKind::Event(e) => Pacing::Event(e.clone()),
            PacingAnnotationKind::Periodic(hz) => Pacing::Periodic(Ratio::new(*hz.numer() as i64, *hz.denom() as i64)),
        }
    }

    fn active(&self, t: Time, inputs: Option<&BTreeMap<String, StreamValue>>) -> bool {
        match (self, inputs) {
            (Pacing::Event(e), Some(present)) => holds(e, present),
            (Pacing::Periodic(f), None) => (t * f).is_integer(),
            _ => false,
        }
    }
}

fn holds(e: &PacingExpr, present: &BTreeMap<String, StreamValue>) -> bool {
    match e {
        PacingExpr::Stream(i) => present.contains_key(&i.name),
        PacingExpr::And(a, b) => holds(a, present) && holds(b, present),
        PacingExpr::Or(a, b) => holds(a, present) || holds(b, present),
    }
}

struct Absent;

pub struct Reference<'s> {
    spec: &'s Spec,
    pacing: HashMap<String, Pacing>,
    triggers: Vec<Pacing>,
    /// (instant, time, value), oldest first.
    history: HashMap<String, Vec<(usize, Time, StreamValue)>>,
    instant: usize,
}

struct Instant<'a> {
    t: Time,
    inputs: Option<&'a BTreeMap<String, StreamValue>>,
    memo: HashMap<String, Option<StreamValue>>,
}

impl<'s> Reference<'s> {
    /// Every output and trigger must carry a pacing annotation.
    pub fn new(spec: &'s Spec) -> Self {
        let pacing = spec
            .outputs
            .iter()
            .map(|o| (o.name.name.clone(), Pacing::of(&o.pacing.as_ref().expect("annotated").kind)))
            .collect();
        let triggers = spec.triggers.iter().map(|t| Pacing::of(&t.pacing.as_ref().expect("annotated").kind)).collect();
        Reference { spec, pacing, triggers, history: HashMap::new(), instant: 0 }
    }

    fn frequencies(&self) -> Vec<Time> {
        self.pacing
            .values()
            .chain(&self.triggers)
            .filter_map(|p| match p {
                Pacing::Periodic(f) => Some(*f),
                _ => None,
            })
            .collect()
    }

    /// Runs a whole trace starting at time 0.
    pub fn run(spec: &'s Spec, events: &[(Time, BTreeMap<String, StreamValue>)]) -> Vec<RefVerdict> {
        let mut r = Reference::new(spec);
        let mut out = Vec::new();
        let mut done = Ratio::from_integer(0);
        for (t, values) in events {
            let mut due: Vec<Time> = Vec::new();
            for f in r.frequencies() {
                let mut n = (done * f).floor() + 1;
                while n / f <= *t {
                    due.push(n / f);
                    n += 1;
                }
            }
            due.sort();
            due.dedup();
            for d in due {
                out.push(r.instant(d, None));
            }
            done = *t;
            out.push(r.instant(*t, Some(values)));
        }
        out
    }

    fn instant(&mut self, t: Time, inputs: Option<&BTreeMap<String, StreamValue>>) -> RefVerdict {
        self.instant += 1;
        let mut inst = Instant { t, inputs, memo: HashMap::new() };
        let mut outputs = BTreeMap::new();
        for o in &self.spec.outputs {
            if let Some(v) = self.value(&o.name.name, &mut inst) {
                outputs.insert(o.name.name.clone(), v);
            }
        }
        let mut triggers = Vec::new();
        for (i, tr) in self.spec.triggers.iter().enumerate() {
            if self.triggers[i].active(t, inputs)
                && matches!(self.eval(&tr.condition, &mut inst), Ok(StreamValue::Bool(true)))
            {
                triggers.push(i);
            }
        }
        let produced: Vec<(String, StreamValue)> =
            inst.memo.into_iter().filter_map(|(k, v)| v.map(|v| (k, v))).collect();
        for (k, v) in produced {
            self.history.entry(k).or_default().push((self.instant, t, v));
        }
        if let Some(ins) = inputs {
            for (k, v) in ins {
                self.history.entry(k.clone()).or_default().push((self.instant, t, v.clone()));
            }
        }
        RefVerdict { time: *t.numer() as f64 / *t.denom() as f64, periodic: inputs.is_none(), outputs, triggers }
    }

    /// The value `name` produces in this instant, if any.
    fn value(&self, name: &str, inst: &mut Instant) -> Option<StreamValue> {
        if self.spec.input(name).is_some() {
            return inst.inputs.and_then(|i| i.get(name)).cloned();
        }
        if let Some(v) = inst.memo.get(name) {
            return v.clone();
        }
        let decl = self.spec.outputs.iter().find(|o| o.name.name == name).expect("declared");
        let v = if !self.pacing[name].active(inst.t, inst.inputs) {
            None
        } else {
            let pass = match &decl.filter {
                None => true,
                Some(f) => matches!(self.eval(f, inst), Ok(StreamValue::Bool(true))),
            };
            if pass {
                self.eval(&decl.expr, inst).ok()
            } else {
                None
            }
        };
        inst.memo.insert(name.to_string(), v.clone());
        v
    }

    fn past(&self, name: &str) -> &[(usize, Time, StreamValue)] {
        self.history.get(name).map_or(&[], |v| v.as_slice())
    }

    fn eval(&self, e: &Expr, inst: &mut Instant) -> Result<StreamValue, Absent> {
        use lolaviz::value::StreamValue::{Bool, Float};
        let f = |v: StreamValue| v.as_float().expect("float");
        let b = |v: StreamValue| v.as_bool().expect("bool");
        Ok(match &e.kind {
            ExprKind::Float(x) => Float(*x),
            ExprKind::Bool(x) => Bool(*x),
            ExprKind::Tuple(xs) => {
                let mut out = Vec::new();
                for x in xs {
                    out.push(f(self.eval(x, inst)?));
                }
                StreamValue::Tuple(out)
            }
            ExprKind::Stream(id) => self.value(&id.name, inst).ok_or(Absent)?,
            ExprKind::Hold { target, default } => {
                let now = self.value(&target.stream.name, inst);
                match now.or_else(|| self.past(&target.stream.name).last().map(|h| h.2.clone())) {
                    Some(v) => project(v, &target.path),
                    None => self.eval(default, inst)?,
                }
            }
            ExprKind::Offset { target, by, default } => {
                let h = self.past(&target.stream.name);
                match h.len().checked_sub(*by as usize) {
                    Some(i) => project(h[i].2.clone(), &target.path),
                    None => self.eval(default, inst)?,
                }
            }
            ExprKind::Aggregate { target, over, using } => {
                let over = Ratio::new(*over.numer() as i64, *over.denom() as i64);
                let from = inst.t - over;
                let mut xs: Vec<f64> = self
                    .past(&target.stream.name)
                    .iter()
                    .filter(|h| h.1 > from)
                    .map(|h| f(project(h.2.clone(), &target.path)))
                    .collect();
                if let Some(v) = self.value(&target.stream.name, inst) {
                    xs.push(f(project(v, &target.path)));
                }
                Float(aggregate(&xs, *using))
            }
            ExprKind::Project(x, k) => project(self.eval(x, inst)?, &[*k]),
            ExprKind::Delta(_) => panic!("reference evaluator expects δ to be desugared"),
            ExprKind::Unary(UnOp::Neg, x) => Float(-f(self.eval(x, inst)?)),
            ExprKind::Unary(UnOp::Not, x) => Bool(!b(self.eval(x, inst)?)),
            ExprKind::Binary(BinOp::And, x, y) => Bool(b(self.eval(x, inst)?) && b(self.eval(y, inst)?)),
            ExprKind::Binary(BinOp::Or, x, y) => Bool(b(self.eval(x, inst)?) || b(self.eval(y, inst)?)),
            ExprKind::Binary(op, x, y) => {
                let x = self.eval(x, inst)?;
                let y = self.eval(y, inst)?;
                match (op, x, y) {
                    (BinOp::Eq, Bool(p), Bool(q)) => Bool(p == q),
                    (BinOp::Ne, Bool(p), Bool(q)) => Bool(p != q),
                    (op, x, y) => {
                        let (p, q) = (f(x), f(y));
                        match op {
                            BinOp::Eq => Bool(p == q),
                            BinOp::Ne => Bool(!p.is_nan() && !q.is_nan() && p != q),
                            BinOp::Lt => Bool(p < q),
                            BinOp::Le => Bool(p <= q),
                            BinOp::Gt => Bool(p > q),
                            BinOp::Ge => Bool(p >= q),
                            BinOp::Add => Float(finite(p + q)),
                            BinOp::Sub => Float(finite(p - q)),
                            BinOp::Mul => Float(finite(p * q)),
                            BinOp::Div => Float(if q == 0.0 { f64::NAN } else { finite(p / q) }),
                            BinOp::Pow => Float(finite(p.powf(q))),
                            BinOp::And | BinOp::Or => unreachable!(),
                        }
                    }
                }
            }
            ExprKind::Call(g, args) => {
                let mut a = Vec::new();
                for x in args {
                    a.push(f(self.eval(x, inst)?));
                }
                let nan = a.iter().any(|v| v.is_nan());
                Float(match g {
                    Builtin::Sqrt => finite(a[0].sqrt()),
                    Builtin::Abs => a[0].abs(),
                    Builtin::Min if nan => f64::NAN,
                    Builtin::Max if nan => f64::NAN,
                    Builtin::Min => a[0].min(a[1]),
                    Builtin::Max => a[0].max(a[1]),
                })
            }
            ExprKind::Ite(c, x, y) => {
                if b(self.eval(c, inst)?) {
                    self.eval(x, inst)?
                } else {
                    self.eval(y, inst)?
                }
            }
            ExprKind::Now => Float(*inst.t.numer() as f64 / *inst.t.denom() as f64),
        })
    }
}

fn finite(x: f64) -> f64 {
    if x.is_finite() {
        x
    } else {
        f64::NAN
    }
}

fn project(v: StreamValue, path: &[u8]) -> StreamValue {
    path.iter().fold(v, |v, k| match v {
        StreamValue::Tuple(xs) => StreamValue::Float(xs[*k as usize]),
        other => panic!("projection of {other:?}"),
    })
}

fn aggregate(xs: &[f64], using: AggrFn) -> f64 {
    match using {
        AggrFn::Count => xs.len() as f64,
        AggrFn::Sum => xs.iter().sum(),
        _ if xs.is_empty() => f64::NAN,
        AggrFn::Avg => xs.iter().sum::<f64>() / xs.len() as f64,
        AggrFn::Min => xs.iter().copied().fold(f64::INFINITY, f64::min),
        AggrFn::Max => xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Same value up to `rel` relative error on floats; NaN matches NaN.
pub fn close(a: &StreamValue, b: &StreamValue, rel: f64) -> bool {
    let fc = |x: f64, y: f64| (x.is_nan() && y.is_nan()) || x == y || (x - y).abs() <= rel * x.abs().max(y.abs());
    match (a, b) {
        (StreamValue::Float(x), StreamValue::Float(y)) => fc(*x, *y),
        (StreamValue::Bool(x), StreamValue::Bool(y)) => x == y,
        (StreamValue::Tuple(x), StreamValue::Tuple(y)) => {
            x.len() == y.len() && x.iter().zip(y).all(|(p, q)| fc(*p, *q))
        }
        _ => false,
    }
}

/// Compares engine verdicts with reference verdicts; returns the first
/// difference.
pub fn compare(engine: &[lolaviz::Verdict], reference: &[RefVerdict], rel: f64) -> Result<(), String> {
    if engine.len() != reference.len() {
        return Err(format!("{} engine instants vs {} reference instants", engine.len(), reference.len()));
    }
    for (e, r) in engine.iter().zip(reference) {
        let periodic = e.kind == lolaviz::engine::InstantKind::Periodic;
        if e.time != r.time || periodic != r.periodic {
            return Err(format!("instant {} ({periodic}) vs {} ({})", e.time, r.time, r.periodic));
        }
        let names: Vec<&String> = e.outputs.iter().map(|(n, _)| n).collect();
        if names.len() != r.outputs.len() || names.iter().any(|n| !r.outputs.contains_key(*n)) {
            return Err(format!(
                "t={}: engine produced {names:?}, reference {:?}",
                e.time,
                r.outputs.keys().collect::<Vec<_>>()
            ));
        }
        for (n, v) in &e.outputs {
            if !close(v, &r.outputs[n], rel) {
                return Err(format!("t={}: {n} = {v:?} vs reference {:?}", e.time, r.outputs[n]));
            }
        }
        let fired: Vec<usize> = e.triggers.iter().map(|t| t.index).collect();
        if fired != r.triggers {
            return Err(format!("t={}: triggers {fired:?} vs reference {:?}", e.time, r.triggers));
        }
    }
    Ok(())
}
