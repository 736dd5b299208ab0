//! The evaluation engine: consumes timestamped input events and produces
//! verdicts, one per evaluation instant.

mod expr;
mod window;

use std::collections::{BTreeMap, HashMap, VecDeque};

use petgraph::algo::toposort;
use petgraph::graph::DiGraph;
use thiserror::Error;

use crate::diag::Diagnostic;
use crate::lang::{rational_to_f64, AccessKind, AggrFn, Rational, Spec, StreamPath};
use crate::pacing::{check_source, trigger_name, CheckedSpec, PacingType, WindowBound};
use crate::value::{Scalar, StreamValue, ValueType};

use expr::{eval, project, Absent, CExpr, Env, Resolver};
pub use window::{Bucket, SlidingWindow};

/// One input event: a timestamp and the inputs that received a value.
#[derive(Debug, Clone, PartialEq)]
pub struct Event<F> {
    pub time: f64,
    pub values: BTreeMap<String, StreamValue<F>>,
}

impl<F> Event<F> {
    pub fn new(time: f64) -> Self {
        Event { time, values: BTreeMap::new() }
    }

    pub fn with(mut self, stream: impl Into<String>, v: StreamValue<F>) -> Self {
        self.values.insert(stream.into(), v);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstantKind {
    Event,
    Periodic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiredTrigger {
    pub index: usize,
    pub message: Option<String>,
}

/// Everything produced in one evaluation instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict<F> {
    pub time: f64,
    pub kind: InstantKind,
    /// Outputs that produced a value, in declaration order.
    pub outputs: Vec<(String, StreamValue<F>)>,
    pub triggers: Vec<FiredTrigger>,
}

impl<F> Verdict<F> {
    pub fn get(&self, stream: &str) -> Option<&StreamValue<F>> {
        self.outputs.iter().find(|(n, _)| n == stream).map(|(_, v)| v)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonitorError {
    #[error("timestamp {got} is earlier than {last}")]
    NonMonotoneTime { last: f64, got: f64 },
    #[error("timestamp {0} is not a finite number")]
    InvalidTime(f64),
    #[error("unknown input stream `{0}`")]
    UnknownInput(String),
    #[error("input `{stream}` expects {expected}, got {found}")]
    TypeMismatch { stream: String, expected: ValueType, found: ValueType },
    #[error("input `{0}` received a non-finite value")]
    NonFinite(String),
    #[error("event activates no input")]
    EmptyEvent,
}

/// Output indices in an order where every same-instant dependency (bare,
/// hold and aggregate access) comes first. On a cycle, returns a stream on it.
pub fn evaluation_order(spec: &Spec) -> Result<Vec<usize>, String> {
    let index: HashMap<&str, usize> = spec.outputs.iter().enumerate().map(|(i, o)| (o.name.name.as_str(), i)).collect();
    let mut g = DiGraph::<usize, ()>::new();
    let nodes: Vec<_> = (0..spec.outputs.len()).map(|i| g.add_node(i)).collect();
    for (i, o) in spec.outputs.iter().enumerate() {
        for e in o.filter.iter().chain(std::iter::once(&o.expr)) {
            for a in e.accesses() {
                if matches!(a.kind, AccessKind::Offset(_)) {
                    continue;
                }
                if let Some(&j) = index.get(a.stream.name.as_str()) {
                    g.update_edge(nodes[j], nodes[i], ());
                }
            }
        }
    }
    match toposort(&g, None) {
        Ok(order) => Ok(order.into_iter().map(|n| g[n]).collect()),
        Err(c) => Err(spec.outputs[g[c.node_id()]].name.name.clone()),
    }
}

#[derive(Debug, Clone)]
enum Activation {
    /// DNF over input indices.
    Event(Vec<Vec<usize>>),
    Periodic(usize),
}

impl Activation {
    fn active(&self, kind: InstantKind, present: &[bool], due: &[bool]) -> bool {
        match (self, kind) {
            (Activation::Event(dnf), InstantKind::Event) => dnf.iter().any(|c| c.iter().all(|i| present[*i])),
            (Activation::Periodic(s), InstantKind::Periodic) => due[*s],
            _ => false,
        }
    }
}

#[derive(Debug, Clone)]
struct Compiled<F> {
    stream: Option<usize>,
    activation: Activation,
    filter: Option<CExpr<F>>,
    expr: CExpr<F>,
    message: Option<String>,
}

#[derive(Debug, Clone)]
struct Buffer<F> {
    entries: VecDeque<(u64, StreamValue<F>)>,
    capacity: usize,
    high_water: usize,
}

impl<F> Buffer<F> {
    fn push(&mut self, instant: u64, v: StreamValue<F>) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back((instant, v));
        self.high_water = self.high_water.max(self.entries.len());
        assert!(self.entries.len() <= self.capacity);
    }
}

#[derive(Debug, Clone)]
struct Window<F> {
    path: Vec<u8>,
    window: SlidingWindow<F>,
}

#[derive(Debug, Clone)]
struct Schedule {
    hz: Rational,
    next: u64,
}

impl Schedule {
    fn due(&self, start: f64) -> f64 {
        let n = self.next as u128 * *self.hz.denom() as u128;
        start + n as f64 / *self.hz.numer() as f64
    }
}

/// Runtime monitor over scalar type `F`.
#[derive(Debug, Clone)]
pub struct Monitor<F: Scalar> {
    checked: CheckedSpec,
    names: Vec<String>,
    ids: HashMap<String, usize>,
    types: Vec<ValueType>,
    n_inputs: usize,
    outputs: Vec<Compiled<F>>,
    order: Vec<usize>,
    triggers: Vec<Compiled<F>>,
    buffers: Vec<Buffer<F>>,
    windows: Vec<Window<F>>,
    feeds: Vec<Vec<usize>>,
    schedules: Vec<Schedule>,
    start: f64,
    last_time: f64,
    instant: u64,
    now: f64,
    active: Vec<bool>,
}

impl<F: Scalar> Monitor<F> {
    pub fn new(checked: &CheckedSpec) -> Self {
        Self::with_start(checked, 0.0)
    }

    /// Parses, checks and builds a monitor in one go.
    pub fn from_source(source: &str) -> Result<Self, Vec<Diagnostic>> {
        Ok(Self::new(&check_source(source)?))
    }

    /// Periodic streams fire at `start + k/f` for `k = 1, 2, ...`.
    pub fn with_start(checked: &CheckedSpec, start: f64) -> Self {
        let spec = &checked.spec;
        let names: Vec<String> = spec.stream_names().map(|i| i.name.clone()).collect();
        let ids: HashMap<String, usize> = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        let types = names.iter().map(|n| checked.types.get(n).expect("typed stream")).collect();
        let n_inputs = spec.inputs.len();

        let mut hz: Vec<Rational> = checked
            .pacings
            .streams
            .values()
            .chain(&checked.pacings.triggers)
            .filter_map(|p| match p {
                PacingType::Periodic(f) => Some(*f),
                _ => None,
            })
            .collect();
        hz.sort();
        hz.dedup();
        let schedules = hz.iter().map(|&hz| Schedule { hz, next: 1 }).collect();

        let mut buffers = Vec::new();
        let mut windows = Vec::new();
        let mut feeds = vec![Vec::new(); names.len()];
        let mut window_ids: HashMap<(usize, WindowBound), usize> = HashMap::new();
        for (i, n) in names.iter().enumerate() {
            let m = checked.memory_of(n).expect("memory bound per stream");
            buffers.push(Buffer {
                entries: VecDeque::with_capacity(m.buffer_len),
                capacity: m.buffer_len,
                high_water: 0,
            });
            for w in &m.windows {
                window_ids.insert((i, w.clone()), windows.len());
                feeds[i].push(windows.len());
                windows.push(Window {
                    path: w.path.clone(),
                    window: SlidingWindow::new(start, rational_to_f64(w.duration), w.buckets),
                });
            }
        }

        let activation = |p: &PacingType| match p {
            PacingType::Event(f) => {
                Activation::Event(f.conjunctions().map(|c| c.iter().map(|v| ids[v]).collect()).collect())
            }
            PacingType::Periodic(f) => Activation::Periodic(hz.binary_search(f).expect("scheduled frequency")),
        };
        let compile = |pacing: &PacingType, e: &crate::lang::Expr| {
            let window = |t: &StreamPath, over: Rational| {
                let key = WindowBound {
                    path: t.path.clone(),
                    duration: over,
                    buckets: WindowBound::layout(over, Some(pacing)),
                };
                window_ids[&(ids[&t.stream.name], key)]
            };
            Resolver { ids: &ids, window: &window }.compile::<F>(e)
        };

        let mut outputs = Vec::new();
        for o in &spec.outputs {
            let p = checked.pacings.of(&o.name.name).expect("paced output");
            outputs.push(Compiled {
                stream: Some(ids[&o.name.name]),
                activation: activation(p),
                filter: o.filter.as_ref().map(|f| compile(p, f)),
                expr: compile(p, &o.expr),
                message: None,
            });
        }
        let mut triggers = Vec::new();
        for (t, p) in spec.triggers.iter().zip(&checked.pacings.triggers) {
            triggers.push(Compiled {
                stream: None,
                activation: activation(p),
                filter: None,
                expr: compile(p, &t.condition),
                message: t.message.clone(),
            });
        }
        let order = evaluation_order(spec).expect("checked spec is acyclic");

        Monitor {
            checked: checked.clone(),
            active: vec![false; names.len()],
            names,
            ids,
            types,
            n_inputs,
            outputs,
            order,
            triggers,
            buffers,
            windows,
            feeds,
            schedules,
            start,
            last_time: start,
            instant: 0,
            now: start,
        }
    }

    pub fn checked(&self) -> &CheckedSpec {
        &self.checked
    }

    pub fn stream_names(&self) -> &[String] {
        &self.names
    }

    pub fn input_names(&self) -> &[String] {
        &self.names[..self.n_inputs]
    }

    pub fn stream_type(&self, name: &str) -> Option<ValueType> {
        self.ids.get(name).map(|i| self.types[*i])
    }

    /// Time of the last processed instant or event.
    pub fn time(&self) -> f64 {
        self.last_time
    }

    /// Largest number of entries the stream's history buffer ever held.
    pub fn high_water(&self, stream: &str) -> Option<usize> {
        self.ids.get(stream).map(|i| self.buffers[*i].high_water)
    }

    pub fn buffer_capacity(&self, stream: &str) -> Option<usize> {
        self.ids.get(stream).map(|i| self.buffers[*i].capacity)
    }

    /// Most recent value of a stream.
    pub fn last_value(&self, stream: &str) -> Option<&StreamValue<F>> {
        self.ids.get(stream).and_then(|i| self.buffers[*i].entries.back()).map(|(_, v)| v)
    }

    /// Buckets currently occupied across every window.
    pub fn window_occupancy(&self) -> Vec<(usize, usize)> {
        self.windows.iter().map(|w| (w.window.occupied(), w.window.capacity())).collect()
    }

    fn check_time(&self, t: f64) -> Result<(), MonitorError> {
        if !t.is_finite() {
            return Err(MonitorError::InvalidTime(t));
        }
        if t < self.last_time {
            return Err(MonitorError::NonMonotoneTime { last: self.last_time, got: t });
        }
        Ok(())
    }

    /// Runs every periodic instant due at or before `t`.
    pub fn advance_time(&mut self, t: f64) -> Result<Vec<Verdict<F>>, MonitorError> {
        self.check_time(t)?;
        let mut out = Vec::new();
        while let Some(next) =
            self.schedules.iter().map(|s| s.due(self.start)).min_by(f64::total_cmp).filter(|n| *n <= t)
        {
            let due: Vec<bool> = self.schedules.iter().map(|s| s.due(self.start) == next).collect();
            for (s, d) in self.schedules.iter_mut().zip(&due) {
                if *d {
                    s.next += 1;
                }
            }
            out.push(self.run_instant(next, InstantKind::Periodic, Vec::new(), &due));
        }
        self.last_time = t;
        Ok(out)
    }

    /// Processes one event: first the periodic instants due at or before its
    /// timestamp, then the event instant itself (last in the returned list).
    pub fn accept_event(&mut self, event: &Event<F>) -> Result<Vec<Verdict<F>>, MonitorError> {
        self.check_time(event.time)?;
        if event.values.is_empty() {
            return Err(MonitorError::EmptyEvent);
        }
        let mut inputs = Vec::with_capacity(event.values.len());
        for (name, v) in &event.values {
            let id = match self.ids.get(name) {
                Some(&i) if i < self.n_inputs => i,
                _ => return Err(MonitorError::UnknownInput(name.clone())),
            };
            if v.value_type() != self.types[id] {
                return Err(MonitorError::TypeMismatch {
                    stream: name.clone(),
                    expected: self.types[id],
                    found: v.value_type(),
                });
            }
            if !v.is_finite() {
                return Err(MonitorError::NonFinite(name.clone()));
            }
            inputs.push((id, v.clone()));
        }
        let mut out = self.advance_time(event.time)?;
        out.push(self.run_instant(event.time, InstantKind::Event, inputs, &[]));
        Ok(out)
    }

    fn push(&mut self, stream: usize, v: StreamValue<F>) {
        for &w in &self.feeds[stream] {
            let w = &mut self.windows[w];
            let x = project(&v, &w.path).as_float().unwrap_or_else(F::zero);
            w.window.push(self.now, x);
        }
        self.buffers[stream].push(self.instant, v);
    }

    fn produced_now(&self, stream: usize) -> bool {
        self.buffers[stream].entries.back().is_some_and(|(i, _)| *i == self.instant)
    }

    fn run(&self, c: &Compiled<F>) -> Option<StreamValue<F>> {
        let view = View(self);
        if let Some(f) = &c.filter {
            if eval(f, &view).ok()?.as_bool() != Some(true) {
                return None;
            }
        }
        eval(&c.expr, &view).ok()
    }

    fn run_instant(
        &mut self,
        t: f64,
        kind: InstantKind,
        inputs: Vec<(usize, StreamValue<F>)>,
        due: &[bool],
    ) -> Verdict<F> {
        self.instant += 1;
        self.now = t;
        self.active.fill(false);
        for (id, v) in inputs {
            self.active[id] = true;
            self.push(id, v);
        }
        let present = self.active[..self.n_inputs].to_vec();
        for o in &self.outputs {
            self.active[o.stream.expect("output stream")] = o.activation.active(kind, &present, due);
        }
        for k in 0..self.order.len() {
            let o = self.order[k];
            let s = self.outputs[o].stream.expect("output stream");
            if !self.active[s] {
                continue;
            }
            if let Some(v) = self.run(&self.outputs[o]) {
                self.push(s, v);
            }
        }
        let mut fired = Vec::new();
        for (i, tr) in self.triggers.iter().enumerate() {
            if tr.activation.active(kind, &present, due) && self.run(tr).and_then(|v| v.as_bool()) == Some(true) {
                fired.push(FiredTrigger { index: i, message: tr.message.clone() });
            }
        }
        let outputs = self
            .outputs
            .iter()
            .filter_map(|o| {
                let s = o.stream?;
                self.produced_now(s).then(|| (self.names[s].clone(), self.buffers[s].entries.back().unwrap().1.clone()))
            })
            .collect();
        Verdict { time: t, kind, outputs, triggers: fired }
    }

    /// Name used for trigger `i` in diagnostics.
    pub fn trigger_name(i: usize) -> String {
        trigger_name(i)
    }
}

struct View<'a, F: Scalar>(&'a Monitor<F>);

impl<F: Scalar> Env<F> for View<'_, F> {
    fn now(&self) -> f64 {
        self.0.now
    }

    fn current(&self, stream: usize) -> Result<&StreamValue<F>, Absent> {
        let m = self.0;
        match m.buffers[stream].entries.back() {
            Some((i, v)) if *i == m.instant => Ok(v),
            _ => {
                debug_assert!(m.active[stream], "synchronous access to inactive stream `{}`", m.names[stream]);
                Err(Absent)
            }
        }
    }

    fn latest(&self, stream: usize) -> Option<&StreamValue<F>> {
        self.0.buffers[stream].entries.back().map(|(_, v)| v)
    }

    fn past(&self, stream: usize, by: u32) -> Option<&StreamValue<F>> {
        let m = self.0;
        let e = &m.buffers[stream].entries;
        let skip = usize::from(e.back().is_some_and(|(i, _)| *i == m.instant));
        let k = skip + by as usize;
        (k <= e.len()).then(|| &e[e.len() - k].1)
    }

    fn window(&self, window: usize, using: AggrFn) -> F {
        self.0.windows[window].window.query(self.0.now, using)
    }
}
