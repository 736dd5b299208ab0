//! Pacing (timing) types: inference, the synchronous-access check, and the
//! static memory analysis.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use num_integer::Integer;
use num_rational::Ratio;

use crate::diag::{sort_diagnostics, Diagnostic};
use crate::lang::{
    rational_decimal, AccessKind, Expr, ExprKind, PacingAnnotation, PacingAnnotationKind, PacingExpr, Rational, Span,
    Spec,
};

/// Positive boolean formula over input activations, in disjunctive normal form
/// with absorbed (subsumed) conjunctions removed. For monotone formulas that
/// form is unique, so equality is syntactic.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Formula(BTreeSet<BTreeSet<String>>);

impl Formula {
    pub fn var(name: impl Into<String>) -> Self {
        Formula(BTreeSet::from([BTreeSet::from([name.into()])]))
    }

    pub fn or(&self, other: &Formula) -> Formula {
        let mut s = self.0.clone();
        s.extend(other.0.iter().cloned());
        Formula(s).absorbed()
    }

    pub fn and(&self, other: &Formula) -> Formula {
        let mut s = BTreeSet::new();
        for a in &self.0 {
            for b in &other.0 {
                s.insert(a.union(b).cloned().collect());
            }
        }
        Formula(s).absorbed()
    }

    fn absorbed(self) -> Formula {
        let keep = self.0.iter().filter(|c| !self.0.iter().any(|d| d != *c && d.is_subset(c))).cloned().collect();
        Formula(keep)
    }

    pub fn from_expr(e: &PacingExpr) -> Formula {
        match e {
            PacingExpr::Stream(i) => Formula::var(i.name.clone()),
            PacingExpr::And(a, b) => Formula::from_expr(a).and(&Formula::from_expr(b)),
            PacingExpr::Or(a, b) => Formula::from_expr(a).or(&Formula::from_expr(b)),
        }
    }

    pub fn variables(&self) -> BTreeSet<&str> {
        self.0.iter().flatten().map(String::as_str).collect()
    }

    pub fn conjunctions(&self) -> impl Iterator<Item = &BTreeSet<String>> {
        self.0.iter()
    }

    /// Truth value under the set of activated inputs.
    pub fn eval(&self, active: &dyn Fn(&str) -> bool) -> bool {
        self.0.iter().any(|c| c.iter().all(|v| active(v)))
    }

    /// `self ⇒ other`, decided by enumerating every assignment of the
    /// variables mentioned in either formula.
    pub fn entails(&self, other: &Formula) -> bool {
        let mut vars: Vec<&str> = self.variables().into_iter().collect();
        vars.extend(other.variables());
        vars.sort_unstable();
        vars.dedup();
        assert!(vars.len() < 24, "pacing formula over {} inputs", vars.len());
        (0u32..1 << vars.len()).all(|bits| {
            let active = |v: &str| {
                let i = vars.binary_search(&v).expect("variable listed");
                bits & (1 << i) != 0
            };
            !self.eval(&active) || other.eval(&active)
        })
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ∨ ")?;
            }
            for (j, v) in c.iter().enumerate() {
                if j > 0 {
                    write!(f, " ∧ ")?;
                }
                write!(f, "{v}")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PacingType {
    Event(Formula),
    /// Frequency in Hz.
    Periodic(Rational),
}

impl PacingType {
    pub fn is_periodic(&self) -> bool {
        matches!(self, PacingType::Periodic(_))
    }

    pub fn from_annotation(a: &PacingAnnotation) -> PacingType {
        match &a.kind {
            PacingAnnotationKind::Event(e) => PacingType::Event(Formula::from_expr(e)),
            PacingAnnotationKind::Periodic(hz) => PacingType::Periodic(*hz),
        }
    }
}

impl fmt::Display for PacingType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PacingType::Event(x) => write!(f, "{x}"),
            PacingType::Periodic(hz) => write!(f, "{}Hz", rational_decimal(*hz)),
        }
    }
}

/// Pacing of every stream and trigger.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Pacings {
    pub streams: BTreeMap<String, PacingType>,
    pub triggers: Vec<PacingType>,
}

impl Pacings {
    pub fn of(&self, stream: &str) -> Option<&PacingType> {
        self.streams.get(stream)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PacingError {
    PacingConflict { stream: String, inferred: PacingType, annotated: PacingType, span: Span },
    MixedPacing { stream: String, span: Span },
    AnnotationRequired { stream: String, span: Span },
    NotAnInput { stream: String, name: String, span: Span },
    Cycle { stream: String, span: Span },
}

impl PacingError {
    pub fn to_diagnostic(&self) -> Diagnostic {
        match self {
            PacingError::PacingConflict { stream, inferred, annotated, span } => Diagnostic::error(
                "pacing-conflict",
                stream.clone(),
                *span,
                format!("annotated @{annotated} but synchronous accesses require {inferred}"),
            ),
            PacingError::MixedPacing { stream, span } => Diagnostic::error(
                "mixed-pacing",
                stream.clone(),
                *span,
                "synchronous accesses mix event-based and periodic streams; use hold or aggregate",
            ),
            PacingError::AnnotationRequired { stream, span } => Diagnostic::error(
                "annotation-required",
                stream.clone(),
                *span,
                "no synchronous access to infer a pacing from; add an @ annotation",
            ),
            PacingError::NotAnInput { stream, name, span } => Diagnostic::error(
                "pacing-not-input",
                stream.clone(),
                *span,
                format!("`{name}` in a pacing annotation is not an input stream"),
            ),
            PacingError::Cycle { stream, span } => Diagnostic::error(
                "cycle",
                stream.clone(),
                *span,
                "pacing depends on itself through synchronous accesses",
            ),
        }
    }
}

/// Largest frequency of which every given frequency is an integer multiple.
fn freq_gcd(a: Rational, b: Rational) -> Rational {
    Ratio::new(a.numer().gcd(b.numer()), a.denom().lcm(b.denom()))
}

/// A declaration that carries a pacing: an output or a trigger.
pub(crate) struct Paced<'a> {
    pub name: String,
    pub span: Span,
    pub annotation: Option<&'a PacingAnnotation>,
    pub filter: Option<&'a Expr>,
    pub expr: &'a Expr,
}

pub(crate) fn paced_decls(spec: &Spec) -> Vec<Paced<'_>> {
    let mut v: Vec<Paced<'_>> = spec
        .outputs
        .iter()
        .map(|o| Paced {
            name: o.name.name.clone(),
            span: o.name.span,
            annotation: o.pacing.as_ref(),
            filter: o.filter.as_ref(),
            expr: &o.expr,
        })
        .collect();
    v.extend(spec.triggers.iter().enumerate().map(|(i, t)| Paced {
        name: trigger_name(i),
        span: t.span,
        annotation: t.pacing.as_ref(),
        filter: None,
        expr: &t.condition,
    }));
    v
}

pub fn trigger_name(i: usize) -> String {
    format!("trigger#{i}")
}

impl Paced<'_> {
    pub fn sync_accesses(&self) -> Vec<(&str, Span)> {
        let mut v = Vec::new();
        for e in self.filter.into_iter().chain(std::iter::once(self.expr)) {
            for a in e.accesses() {
                if a.kind == AccessKind::Sync {
                    v.push((a.stream.name.as_str(), a.span));
                }
            }
        }
        v
    }
}

enum Inferred {
    Known(PacingType),
    Pending,
    Mixed,
    Nothing,
}

fn infer_from(accessed: &[(&str, Span)], known: &HashMap<String, PacingType>) -> Inferred {
    let mut event: Option<Formula> = None;
    let mut freq: Option<Rational> = None;
    for (name, _) in accessed {
        match known.get(*name) {
            None => return Inferred::Pending,
            Some(PacingType::Event(f)) => event = Some(event.map_or_else(|| f.clone(), |e| e.and(f))),
            Some(PacingType::Periodic(hz)) => freq = Some(freq.map_or(*hz, |g| freq_gcd(g, *hz))),
        }
    }
    match (event, freq) {
        (Some(e), None) => Inferred::Known(PacingType::Event(e)),
        (None, Some(f)) => Inferred::Known(PacingType::Periodic(f)),
        (Some(_), Some(_)) => Inferred::Mixed,
        (None, None) => Inferred::Nothing,
    }
}

/// Assigns a pacing to every stream and trigger. Inputs pace themselves;
/// annotated outputs keep their annotation; an unannotated output gets the
/// conjunction of the event pacings (or the common divisor frequency of the
/// periodic pacings) of its synchronous accesses.
pub fn infer_pacing(spec: &Spec) -> Result<Pacings, Vec<PacingError>> {
    let mut known: HashMap<String, PacingType> = HashMap::new();
    let mut errors = Vec::new();
    for i in &spec.inputs {
        known.insert(i.name.name.clone(), PacingType::Event(Formula::var(i.name.name.clone())));
    }
    let decls = paced_decls(spec);
    for d in &decls {
        if let Some(a) = d.annotation {
            if let PacingAnnotationKind::Event(e) = &a.kind {
                for id in e.streams() {
                    if !spec.is_input(&id.name) {
                        errors.push(PacingError::NotAnInput {
                            stream: d.name.clone(),
                            name: id.name.clone(),
                            span: id.span,
                        });
                    }
                }
            }
            known.insert(d.name.clone(), PacingType::from_annotation(a));
        }
    }

    let accesses: Vec<Vec<(&str, Span)>> = decls.iter().map(|d| d.sync_accesses()).collect();
    let mut done = vec![false; decls.len()];
    loop {
        let mut progress = false;
        for (i, d) in decls.iter().enumerate() {
            if done[i] {
                continue;
            }
            match infer_from(&accesses[i], &known) {
                Inferred::Pending => continue,
                Inferred::Known(p) => {
                    if let Some(a) = d.annotation {
                        let annotated = PacingType::from_annotation(a);
                        if annotated.is_periodic() != p.is_periodic() {
                            errors.push(PacingError::PacingConflict {
                                stream: d.name.clone(),
                                inferred: p,
                                annotated,
                                span: a.span,
                            });
                        }
                    } else {
                        known.insert(d.name.clone(), p);
                    }
                }
                Inferred::Mixed => {
                    if d.annotation.is_none() {
                        errors.push(PacingError::MixedPacing { stream: d.name.clone(), span: d.span });
                    }
                }
                Inferred::Nothing => {
                    if d.annotation.is_none() {
                        errors.push(PacingError::AnnotationRequired { stream: d.name.clone(), span: d.span });
                    }
                }
            }
            done[i] = true;
            progress = true;
        }
        if !progress {
            break;
        }
    }
    for (i, d) in decls.iter().enumerate() {
        if !done[i] && !known.contains_key(&d.name) {
            errors.push(PacingError::Cycle { stream: d.name.clone(), span: d.span });
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }
    let mut pacings = Pacings::default();
    for name in spec.stream_names() {
        pacings.streams.insert(name.name.clone(), known[&name.name].clone());
    }
    for i in 0..spec.triggers.len() {
        pacings.triggers.push(known[&trigger_name(i)].clone());
    }
    Ok(pacings)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingError {
    pub accessor: String,
    pub accessed: String,
    pub span: Span,
    pub reason: String,
}

impl TimingError {
    pub fn to_diagnostic(&self) -> Diagnostic {
        Diagnostic::error("timing", self.accessor.clone(), self.span, self.reason.clone())
    }
}

fn decl_pacing<'a>(pacings: &'a Pacings, spec: &Spec, name: &str) -> Option<&'a PacingType> {
    match name.strip_prefix("trigger#") {
        Some(i) if spec.output(name).is_none() => pacings.triggers.get(i.parse::<usize>().ok()?),
        _ => pacings.of(name),
    }
}

/// Every bare access inside a stream paced `P` must reach a stream whose
/// pacing is implied by `P`. Hold, offset and aggregate accesses are always
/// legal. Also rejects same-instant dependency cycles.
pub fn check_timing(spec: &Spec, pacings: &Pacings) -> Vec<TimingError> {
    let mut errors = Vec::new();
    for d in paced_decls(spec) {
        let Some(own) = decl_pacing(pacings, spec, &d.name) else { continue };
        for (accessed, span) in d.sync_accesses() {
            let Some(target) = pacings.of(accessed) else { continue };
            let reason = match (own, target) {
                (PacingType::Event(p), PacingType::Event(q)) => {
                    (!p.entails(q)).then(|| format!("`{accessed}` (@{q}) may be absent when @{p} fires; use hold"))
                }
                (PacingType::Periodic(fp), PacingType::Periodic(fq)) => (!(*fq / *fp).is_integer())
                    .then(|| format!("`{accessed}` runs at {target}, not an integer multiple of {own}")),
                _ => Some(format!(
                    "`{accessed}` is @{target} and this stream is @{own}; use hold or aggregate across event and periodic pacing"
                )),
            };
            if let Some(reason) = reason {
                errors.push(TimingError { accessor: d.name.clone(), accessed: accessed.to_string(), span, reason });
            }
        }
    }
    if let Err(cycle) = crate::engine::evaluation_order(spec) {
        errors.push(TimingError {
            accessor: cycle.clone(),
            accessed: cycle.clone(),
            span: spec.output(&cycle).map(|o| o.name.span).unwrap_or_default(),
            reason: format!("`{cycle}` depends on itself within one instant"),
        });
    }
    errors.sort_by_key(|e| (e.span.start, e.span.end));
    errors
}

/// Non-fatal findings.
pub fn timing_warnings(spec: &Spec, pacings: &Pacings) -> Vec<Diagnostic> {
    let mut w = Vec::new();
    for o in &spec.outputs {
        if let (Some(PacingType::Periodic(_)), Some(f)) = (pacings.of(&o.name.name), &o.filter) {
            w.push(Diagnostic::warning(
                "periodic-filter",
                o.name.name.clone(),
                f.span,
                "dynamic filter on a periodic stream",
            ));
        }
    }
    w
}

/// Maximum number of buckets used for a window aligned to its accessor's period.
pub const MAX_ALIGNED_BUCKETS: u64 = 1 << 16;
/// Buckets per window when the accessor is not periodic or not aligned.
pub const DEFAULT_BUCKETS: u64 = 64;

/// One sliding window kept for a stream (or a projection of it). Every
/// aggregation function over the same path, duration and layout shares it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WindowBound {
    pub path: Vec<u8>,
    pub duration: Rational,
    pub buckets: u64,
}

impl WindowBound {
    /// Aligned windows use one bucket per accessor period, which makes them
    /// exact at every periodic instant.
    pub fn layout(duration: Rational, accessor: Option<&PacingType>) -> u64 {
        if let Some(PacingType::Periodic(hz)) = accessor {
            let n = duration * *hz;
            if n.is_integer() && *n.numer() >= 1 && *n.numer() <= MAX_ALIGNED_BUCKETS {
                return *n.numer();
            }
        }
        DEFAULT_BUCKETS
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemoryBound {
    pub stream: String,
    pub buffer_len: usize,
    pub windows: Vec<WindowBound>,
}

/// Per-stream history requirement: `1 + deepest offset`, plus one entry per
/// distinct sliding window.
pub fn analyze_memory(spec: &Spec, pacings: &Pacings) -> Vec<MemoryBound> {
    let mut depth: HashMap<&str, u32> = HashMap::new();
    let mut windows: HashMap<&str, BTreeSet<WindowBound>> = HashMap::new();
    for d in paced_decls(spec) {
        let own = decl_pacing(pacings, spec, &d.name);
        for e in d.filter.into_iter().chain(std::iter::once(d.expr)) {
            e.walk(&mut |x| match &x.kind {
                ExprKind::Offset { target, by, .. } => {
                    let slot = depth.entry(&target.stream.name).or_default();
                    *slot = (*slot).max(*by);
                }
                ExprKind::Aggregate { target, over, .. } => {
                    windows.entry(&target.stream.name).or_default().insert(WindowBound {
                        path: target.path.clone(),
                        duration: *over,
                        buckets: WindowBound::layout(*over, own),
                    });
                }
                _ => {}
            });
        }
    }
    spec.stream_names()
        .map(|id| MemoryBound {
            stream: id.name.clone(),
            buffer_len: 1 + depth.get(id.name.as_str()).copied().unwrap_or(0) as usize,
            windows: windows.get(id.name.as_str()).map(|s| s.iter().cloned().collect()).unwrap_or_default(),
        })
        .collect()
}

/// Result of the whole static pipeline: delta rewrite, value types, pacing
/// inference, timing check and memory analysis.
#[derive(Debug, Clone)]
pub struct CheckedSpec {
    pub spec: Spec,
    pub types: crate::lang::TypeTable,
    pub pacings: Pacings,
    pub memory: Vec<MemoryBound>,
    pub warnings: Vec<Diagnostic>,
}

impl CheckedSpec {
    pub fn memory_of(&self, stream: &str) -> Option<&MemoryBound> {
        self.memory.iter().find(|m| m.stream == stream)
    }
}

pub fn check_spec(spec: &Spec) -> Result<CheckedSpec, Vec<Diagnostic>> {
    let spec = crate::lang::desugar(spec);
    let types = crate::lang::check_types(&spec)?;
    let pacings = infer_pacing(&spec).map_err(|es| {
        let mut d: Vec<Diagnostic> = es.iter().map(PacingError::to_diagnostic).collect();
        sort_diagnostics(&mut d);
        d
    })?;
    let timing = check_timing(&spec, &pacings);
    if !timing.is_empty() {
        return Err(timing.iter().map(TimingError::to_diagnostic).collect());
    }
    let memory = analyze_memory(&spec, &pacings);
    let warnings = timing_warnings(&spec, &pacings);
    Ok(CheckedSpec { spec, types, pacings, memory, warnings })
}

/// Parses and checks in one go; syntax errors become diagnostics.
pub fn check_source(source: &str) -> Result<CheckedSpec, Vec<Diagnostic>> {
    let spec = crate::lang::parse_spec(source).map_err(|e| vec![e.to_diagnostic()])?;
    check_spec(&spec)
}
