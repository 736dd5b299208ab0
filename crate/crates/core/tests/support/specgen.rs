//! Random small specifications over inputs `a`, `b: Float64` and `c: Bool`,
//! with every output and trigger annotated, plus random traces for them.
//! Windows appear only in periodic streams whose frequency times the window
//! length is an integer. All literals and input values are half-integers.

use std::collections::BTreeMap;

use lolaviz::StreamValue;
use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::Rng;

use super::reference::Time;

#[derive(Clone, Copy, PartialEq)]
enum Ty {
    F,
    B,
}

#[derive(Clone, PartialEq)]
enum Pace {
    /// Disjunction of conjunctions of input names.
    Event(Vec<Vec<&'static str>>),
    Periodic(Time),
}

impl Pace {
    fn render(&self) -> String {
        match self {
            Pace::Event(dnf) => dnf.iter().map(|c| c.join(" ∧ ")).collect::<Vec<_>>().join(" ∨ "),
            Pace::Periodic(f) if f.is_integer() => format!("{}Hz", f.numer()),
            Pace::Periodic(f) => format!("{}Hz", *f.numer() as f64 / *f.denom() as f64),
        }
    }

    /// Every instant of `self` is an instant of `other`.
    fn implies(&self, other: &Pace) -> bool {
        match (self, other) {
            (Pace::Event(p), Pace::Event(q)) => p.iter().all(|c| q.iter().any(|d| d.iter().all(|x| c.contains(x)))),
            (Pace::Periodic(f), Pace::Periodic(g)) => (g / f).is_integer(),
            _ => false,
        }
    }
}

struct Stream {
    name: String,
    ty: Ty,
    pace: Pace,
}

const INPUTS: [(&str, Ty); 3] = [("a", Ty::F), ("b", Ty::F), ("c", Ty::B)];

fn event_paces() -> Vec<Pace> {
    let p = |dnf: &[&[&'static str]]| Pace::Event(dnf.iter().map(|c| c.to_vec()).collect());
    vec![
        p(&[&["a"]]),
        p(&[&["b"]]),
        p(&[&["c"]]),
        p(&[&["a", "b"]]),
        p(&[&["a", "c"]]),
        p(&[&["a"], &["b"]]),
        p(&[&["b"], &["c"]]),
        p(&[&["a", "b", "c"]]),
        p(&[&["a"], &["b"], &["c"]]),
    ]
}

fn frequencies() -> Vec<Time> {
    vec![Ratio::new(1, 2), Ratio::from_integer(1), Ratio::from_integer(2), Ratio::from_integer(4)]
}

fn half<R: Rng>(rng: &mut R) -> f64 {
    rng.gen_range(-10i32..=10) as f64 / 2.0
}

fn lit<R: Rng>(rng: &mut R, ty: Ty) -> String {
    match ty {
        Ty::F => format!("{:.1}", half(rng)),
        Ty::B => rng.gen_bool(0.5).to_string(),
    }
}

struct Ctx<'a> {
    me: &'a Stream,
    /// Inputs plus outputs declared before `me`.
    earlier: Vec<(&'a str, Ty, Option<&'a Pace>)>,
    /// Every output, for offsets.
    all: Vec<(&'a str, Ty, &'a Pace)>,
}

impl Ctx<'_> {
    fn bare(&self, ty: Ty) -> Vec<&str> {
        self.earlier
            .iter()
            .filter(|(_, t, p)| {
                *t == ty
                    && match p {
                        None => false,
                        Some(p) => self.me.pace.implies(p),
                    }
            })
            .map(|(n, _, _)| *n)
            .chain(match &self.me.pace {
                Pace::Event(dnf) => INPUTS
                    .iter()
                    .filter(|(n, t)| *t == ty && dnf.iter().all(|c| c.contains(n)))
                    .map(|(n, _)| *n)
                    .collect::<Vec<_>>(),
                Pace::Periodic(_) => vec![],
            })
            .collect()
    }

    fn held(&self, ty: Ty) -> Vec<&str> {
        self.earlier.iter().filter(|(_, t, _)| *t == ty).map(|(n, _, _)| *n).collect()
    }

    fn offsets(&self, ty: Ty) -> Vec<&str> {
        self.all.iter().filter(|(_, t, p)| *t == ty && **p == self.me.pace).map(|(n, _, _)| *n).collect()
    }
}

fn pick<'a, R: Rng>(rng: &mut R, xs: &[&'a str]) -> Option<&'a str> {
    xs.choose(rng).copied()
}

fn float_expr<R: Rng>(rng: &mut R, cx: &Ctx, depth: u32) -> String {
    if depth == 0 || rng.gen_bool(0.35) {
        loop {
            let s = match rng.gen_range(0..7) {
                0 => Some(lit(rng, Ty::F)),
                1 | 2 => pick(rng, &cx.bare(Ty::F)).map(str::to_string),
                3 => pick(rng, &cx.held(Ty::F)).map(|s| format!("{s}.hold(or: {})", lit(rng, Ty::F))),
                4 => pick(rng, &cx.offsets(Ty::F))
                    .map(|s| format!("{s}.offset(by: -{}, or: {})", rng.gen_range(1..=3), lit(rng, Ty::F))),
                5 => match cx.me.pace {
                    Pace::Periodic(f) => {
                        let over: Vec<Time> = [Ratio::new(1, 2), Ratio::from_integer(1), Ratio::from_integer(2)]
                            .into_iter()
                            .filter(|o| (o * f).is_integer())
                            .collect();
                        over.choose(rng).map(|o| {
                            let using = ["min", "max", "sum", "avg", "count"].choose(rng).unwrap();
                            let src = ["a", "b"].choose(rng).unwrap();
                            format!("{src}.aggregate(over: {}s, using: {using})", *o.numer() as f64 / *o.denom() as f64)
                        })
                    }
                    _ => None,
                },
                _ => rng.gen_bool(0.3).then(|| "now()".to_string()),
            };
            if let Some(s) = s {
                return s;
            }
        }
    }
    let d = depth - 1;
    match rng.gen_range(0..8) {
        0..=3 => {
            let op = ["+", "-", "*", "/"].choose(rng).unwrap();
            format!("({} {op} {})", float_expr(rng, cx, d), float_expr(rng, cx, d))
        }
        4 => format!("-({})", float_expr(rng, cx, d)),
        5 => format!("abs({})", float_expr(rng, cx, d)),
        6 => {
            let g = ["min", "max"].choose(rng).unwrap();
            format!("{g}({}, {})", float_expr(rng, cx, d), float_expr(rng, cx, d))
        }
        _ => format!("(if {} then {} else {})", bool_expr(rng, cx, d), float_expr(rng, cx, d), float_expr(rng, cx, d)),
    }
}

fn bool_expr<R: Rng>(rng: &mut R, cx: &Ctx, depth: u32) -> String {
    if depth == 0 || rng.gen_bool(0.3) {
        loop {
            let s = match rng.gen_range(0..6) {
                0 => Some(lit(rng, Ty::B)),
                1 => pick(rng, &cx.bare(Ty::B)).map(str::to_string),
                2 => pick(rng, &cx.held(Ty::B)).map(|s| format!("{s}.hold(or: {})", lit(rng, Ty::B))),
                3 => pick(rng, &cx.offsets(Ty::B))
                    .map(|s| format!("{s}.offset(by: -{}, or: {})", rng.gen_range(1..=2), lit(rng, Ty::B))),
                _ => {
                    let op = ["<", "<=", ">", ">=", "==", "!="].choose(rng).unwrap();
                    let d = depth.min(1);
                    Some(format!("{} {op} {}", float_expr(rng, cx, d), float_expr(rng, cx, d)))
                }
            };
            if let Some(s) = s {
                return s;
            }
        }
    }
    let d = depth - 1;
    match rng.gen_range(0..4) {
        0 => format!("({} ∧ {})", bool_expr(rng, cx, d), bool_expr(rng, cx, d)),
        1 => format!("({} ∨ {})", bool_expr(rng, cx, d), bool_expr(rng, cx, d)),
        2 => format!("¬({})", bool_expr(rng, cx, d)),
        _ => {
            let op = ["<", ">", "==", "!="].choose(rng).unwrap();
            format!("{} {op} {}", float_expr(rng, cx, d), float_expr(rng, cx, d))
        }
    }
}

/// A random specification in concrete syntax.
pub fn random_spec<R: Rng>(rng: &mut R) -> String {
    let n = rng.gen_range(1..=5);
    let mut streams = Vec::new();
    for i in 0..n {
        let pace = if rng.gen_bool(0.35) {
            Pace::Periodic(*frequencies().choose(rng).unwrap())
        } else {
            event_paces().choose(rng).unwrap().clone()
        };
        let ty = if rng.gen_bool(0.7) { Ty::F } else { Ty::B };
        streams.push(Stream { name: format!("o{i}"), ty, pace });
    }
    let mut out = String::from("input a: Float64, b: Float64, c: Bool\n");
    let all: Vec<_> = streams.iter().map(|s| (s.name.as_str(), s.ty, &s.pace)).collect();
    for (i, s) in streams.iter().enumerate() {
        let earlier = INPUTS
            .iter()
            .map(|(n, t)| (*n, *t, None))
            .chain(streams[..i].iter().map(|e| (e.name.as_str(), e.ty, Some(&e.pace))))
            .collect();
        let cx = Ctx { me: s, earlier, all: all.clone() };
        let ty = match (s.ty, rng.gen_bool(0.5)) {
            (Ty::F, true) => ": Float64",
            (Ty::B, true) => ": Bool",
            _ => "",
        };
        let filter = if rng.gen_bool(0.25) { format!(" filter {}", bool_expr(rng, &cx, 1)) } else { String::new() };
        let body = match s.ty {
            Ty::F => float_expr(rng, &cx, 3),
            Ty::B => bool_expr(rng, &cx, 2),
        };
        out.push_str(&format!("output {}{ty} @{}{filter} := {body}\n", s.name, s.pace.render()));
    }
    for _ in 0..rng.gen_range(0..=2) {
        let pace = if rng.gen_bool(0.3) {
            Pace::Periodic(*frequencies().choose(rng).unwrap())
        } else {
            event_paces().choose(rng).unwrap().clone()
        };
        let me = Stream { name: "trigger".into(), ty: Ty::B, pace };
        let earlier = INPUTS
            .iter()
            .map(|(n, t)| (*n, *t, None))
            .chain(streams.iter().map(|e| (e.name.as_str(), e.ty, Some(&e.pace))))
            .collect();
        let cx = Ctx { me: &me, earlier, all: vec![] };
        out.push_str(&format!("trigger @{} {}\n", me.pace.render(), bool_expr(rng, &cx, 2)));
    }
    out
}

pub type Trace = Vec<(Time, BTreeMap<String, StreamValue>)>;

/// Up to `max_len` events at strictly increasing multiples of 1/8 s.
pub fn random_trace<R: Rng>(rng: &mut R, max_len: usize) -> Trace {
    let n = rng.gen_range(1..=max_len);
    let mut t = Ratio::from_integer(0);
    let mut out = Vec::new();
    for i in 0..n {
        if i > 0 || rng.gen_bool(0.5) {
            t += Ratio::new(rng.gen_range(1..=8), 8);
        }
        let mut values = BTreeMap::new();
        while values.is_empty() {
            for (name, ty) in INPUTS {
                if rng.gen_bool(0.6) {
                    let v = match ty {
                        Ty::F => StreamValue::Float(half(rng)),
                        Ty::B => StreamValue::Bool(rng.gen_bool(0.5)),
                    };
                    values.insert(name.to_string(), v);
                }
            }
        }
        out.push((t, values));
    }
    out
}

pub fn to_events(trace: &Trace) -> Vec<lolaviz::Event> {
    trace
        .iter()
        .map(|(t, v)| lolaviz::Event { time: *t.numer() as f64 / *t.denom() as f64, values: v.clone() })
        .collect()
}
