use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diag::Diagnostic;
use crate::lang::{parse_expr, parse_spec, pretty::float_lit, Spec};
use crate::value::ValueType;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitsMode {
    /// Running minimum and maximum over every reading.
    Global,
    /// Minimum and maximum over the trailing `over` seconds, emitted at `hz`.
    Windowed {
        over: f64,
        #[serde(default = "one")]
        hz: f64,
    },
    /// Constant ranges, emitted with every reading.
    Fixed { x: (f64, f64), y: (f64, f64) },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChargeDelta {
    /// New reading minus the last marker's color value.
    #[default]
    Signed,
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HaloConfig {
    pub source: String,
    /// Seconds without a reading after which markers get a halo.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorityConfig {
    /// Bool expression over the host spec, evaluated at the marker pacing.
    pub critical: String,
    pub tau_c: f64,
    /// Default for `marker_lc` before the first critical marker; falls back
    /// to the marker default.
    #[serde(default)]
    pub marker_lc: Option<Vec<f64>>,
}

/// Source value defaults (`gps_s`, `charge_s`, ...) keyed by input stream
/// name, plus the marker and pixel scale defaults. Missing entries are zeros.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Defaults {
    #[serde(default)]
    pub sources: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub marker: Option<Vec<f64>>,
    #[serde(default)]
    pub pixel_scale: Option<(f64, f64)>,
}

/// Compact plot description the scaffold streams are generated from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotScaffoldConfig {
    pub plot_id: String,
    /// Prepended to every generated output name.
    #[serde(default)]
    pub prefix: String,
    /// Stream paths such as `gps.0`.
    pub x: String,
    pub y: String,
    #[serde(default)]
    pub color: Option<String>,
    pub tau_gps: f64,
    #[serde(default)]
    pub tau_charge: Option<f64>,
    #[serde(default = "global")]
    pub limits: LimitsMode,
    #[serde(default)]
    pub charge_delta: ChargeDelta,
    #[serde(default)]
    pub priority: Option<PriorityConfig>,
    #[serde(default)]
    pub halo: Option<HaloConfig>,
    /// Replace the marker position by window averages over this many
    /// seconds and append a reading count.
    #[serde(default)]
    pub aggregate: Option<f64>,
    #[serde(default)]
    pub defaults: Defaults,
}

fn global() -> LimitsMode {
    LimitsMode::Global
}

/// Streams of one plot inside the monitor specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotBinding {
    pub plot_id: String,
    pub x_stream: String,
    pub y_stream: String,
    pub color_stream: Option<String>,
    pub limits_streams: (String, String),
    pub marker_stream: String,
    pub critical_stream: Option<String>,
    pub halo_stream: Option<String>,
    pub pixel_scale_stream: String,
    pub visible_stream: String,
    /// Marker component holding the aggregated reading count.
    pub count_component: Option<u8>,
    /// Pacing of the marker stream, e.g. `gps ∨ charge`.
    pub pacing: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScaffoldError {
    #[error("generated stream `{0}` collides with a stream of the host specification")]
    NameCollision(String),
    #[error("plot source `{0}` is not a Float64 input (or projection of one) of the host specification")]
    BadSource(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("critical expression: {0}")]
    Critical(String),
    #[error("generated specification does not check: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Check(Vec<Diagnostic>),
}

pub fn pixel_scale_input(plot_id: &str) -> String {
    format!("pixel_scale_{plot_id}")
}

pub fn visible_input(plot_id: &str) -> String {
    format!("visible_{plot_id}")
}

struct Source {
    stream: String,
    component: Option<u8>,
    default: String,
}

impl Source {
    fn resolve(path: &str, host: &Spec, defaults: &Defaults) -> Result<Source, ScaffoldError> {
        let bad = || ScaffoldError::BadSource(path.to_string());
        let (stream, component) = match path.split_once('.') {
            Some((s, k)) => (s, Some(k.parse::<u8>().map_err(|_| bad())?)),
            None => (path, None),
        };
        let decl = host.input(stream).ok_or_else(bad)?;
        let ty = decl.value_type;
        match (ty, component) {
            (ValueType::Float, None) => {}
            (ValueType::Tuple(n), Some(k)) if k < n => {}
            _ => return Err(bad()),
        }
        let given = defaults.sources.get(stream);
        let default = match ty {
            ValueType::Float => float_lit(given.and_then(|v| v.first().copied()).unwrap_or(0.0)),
            ValueType::Tuple(n) => tuple_lit(given.map(Vec::as_slice).unwrap_or(&[]), n as usize)?,
            ValueType::Bool => return Err(bad()),
        };
        Ok(Source { stream: stream.to_string(), component, default })
    }

    /// Bare access: `gps.0`.
    fn now(&self) -> String {
        match self.component {
            Some(k) => format!("{}.{k}", self.stream),
            None => self.stream.clone(),
        }
    }

    /// Zero-order hold: `gps.hold(or: (0.0, 0.0)).0`.
    fn held(&self) -> String {
        let mut s = format!("{}.hold(or: {})", self.stream, self.default);
        if let Some(k) = self.component {
            let _ = write!(s, ".{k}");
        }
        s
    }
}

fn tuple_lit(values: &[f64], n: usize) -> Result<String, ScaffoldError> {
    if !values.is_empty() && values.len() != n {
        return Err(ScaffoldError::Invalid(format!("default {values:?} must have {n} components")));
    }
    let parts: Vec<String> = (0..n).map(|i| float_lit(values.get(i).copied().unwrap_or(0.0))).collect();
    Ok(format!("({})", parts.join(", ")))
}

fn tuple_type(n: usize) -> String {
    format!("({})", vec!["Float64"; n].join(", "))
}

/// Appends the visualization streams of one plot to a host specification.
/// Returns the fragment text (backchannel inputs first) and the binding.
pub fn generate_scaffold(cfg: &PlotScaffoldConfig, host: &Spec) -> Result<(String, PlotBinding), ScaffoldError> {
    let invalid = |m: &str| Err(ScaffoldError::Invalid(m.to_string()));
    if cfg.plot_id.is_empty() || !cfg.plot_id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return invalid("plot_id must be a non-empty identifier of letters, digits and `_`");
    }
    let positive = |v: f64| v.is_finite() && v > 0.0;
    if !positive(cfg.tau_gps) {
        return invalid("tau_gps must be > 0");
    }
    if cfg.color.is_some() != cfg.tau_charge.is_some() {
        return invalid("color and tau_charge go together");
    }
    if let Some(t) = cfg.tau_charge {
        if !positive(t) {
            return invalid("tau_charge must be > 0");
        }
    }
    if let LimitsMode::Windowed { over, hz } = cfg.limits {
        if !positive(over) || !positive(hz) {
            return invalid("windowed limits need over > 0 and hz > 0");
        }
    }
    if let LimitsMode::Fixed { x, y } = cfg.limits {
        if !(x.0 < x.1 && y.0 < y.1 && x.1.is_finite() && y.1.is_finite() && x.0.is_finite() && y.0.is_finite()) {
            return invalid("fixed limits need finite lo < hi on both axes");
        }
    }
    if let Some(p) = &cfg.priority {
        if !positive(p.tau_c) {
            return invalid("tau_c must be > 0");
        }
    }
    if let Some(h) = &cfg.halo {
        if !positive(h.bound) {
            return invalid("halo bound must be > 0");
        }
        if host.input(&h.source).is_none() {
            return Err(ScaffoldError::BadSource(h.source.clone()));
        }
    }
    if let Some(a) = cfg.aggregate {
        if !positive(a) {
            return invalid("aggregate window must be > 0");
        }
    }
    if let Some((w, h)) = cfg.defaults.pixel_scale {
        if !positive(w) || !positive(h) {
            return invalid("pixel scale components must be > 0");
        }
    }

    let x = Source::resolve(&cfg.x, host, &cfg.defaults)?;
    let y = Source::resolve(&cfg.y, host, &cfg.defaults)?;
    let color = cfg.color.as_deref().map(|c| Source::resolve(c, host, &cfg.defaults)).transpose()?;

    let p = |n: &str| format!("{}{n}", cfg.prefix);
    let (x_lim, y_lim) = (p("xLim"), p("yLim"));
    let (dx, dy, dc, send, marker) = (p("δx"), p("δy"), p("δc"), p("send"), p("marker"));
    let (critical, marker_lc, dxc, dyc) = (p("critical"), p("marker_lc"), p("δxc"), p("δyc"));
    let (halo_seen, halo) = (p("halo_seen"), p("halo"));
    let ps = pixel_scale_input(&cfg.plot_id);
    let vis = visible_input(&cfg.plot_id);

    let mut pacing_streams: Vec<&str> = vec![&x.stream, &y.stream];
    if let Some(c) = &color {
        pacing_streams.push(&c.stream);
    }
    let mut seen = Vec::new();
    pacing_streams.retain(|s| {
        let fresh = !seen.contains(s);
        seen.push(*s);
        fresh
    });
    let pacing = pacing_streams.join(" ∨ ");

    let arity = 2 + usize::from(color.is_some()) + usize::from(cfg.aggregate.is_some());
    let marker_default = match &cfg.defaults.marker {
        Some(v) => tuple_lit(v, arity)?,
        None => tuple_lit(&[], arity)?,
    };
    let lc_default = match cfg.priority.as_ref().and_then(|p| p.marker_lc.as_ref()) {
        Some(v) => tuple_lit(v, arity)?,
        None => marker_default.clone(),
    };
    let (psw, psh) = cfg.defaults.pixel_scale.unwrap_or((1.0, 1.0));
    let ps_default = format!("({}, {})", float_lit(psw), float_lit(psh));

    let mut generated = vec![
        ps.clone(),
        vis.clone(),
        x_lim.clone(),
        y_lim.clone(),
        dx.clone(),
        dy.clone(),
        send.clone(),
        marker.clone(),
    ];
    if color.is_some() {
        generated.push(dc.clone());
    }
    if cfg.priority.is_some() {
        generated.extend([critical.clone(), marker_lc.clone(), dxc.clone(), dyc.clone()]);
    }
    if cfg.halo.is_some() {
        generated.extend([halo_seen.clone(), halo.clone()]);
    }
    for g in &generated {
        if host.stream_names().any(|n| &n.name == g) {
            return Err(ScaffoldError::NameCollision(g.clone()));
        }
    }

    let mut out = String::new();
    let _ = writeln!(out, "input {ps}: (Float64, Float64), {vis}: Bool");

    let lim = |name: &str, src: &Source, fixed: Option<(f64, f64)>| {
        match cfg.limits {
        LimitsMode::Global => format!(
            "output {name}: (Float64, Float64) @{s}\n  := (min({v}, {name}.0.offset(by: -1, or: {v})), max({v}, {name}.1.offset(by: -1, or: {v})))\n",
            s = src.stream,
            v = src.now(),
        ),
        LimitsMode::Windowed { over, hz } => format!(
            "output {name}: (Float64, Float64) @{hz}Hz\n  := ({v}.aggregate(over: {o}s, using: min), {v}.aggregate(over: {o}s, using: max))\n",
            hz = float_lit(hz),
            o = float_lit(over),
            v = src.now(),
        ),
        LimitsMode::Fixed { .. } => {
            let (lo, hi) = fixed.unwrap_or_default();
            format!("output {name}: (Float64, Float64) @{} := ({}, {})\n", src.stream, float_lit(lo), float_lit(hi))
        }
    }
    };
    let (fx, fy) = match cfg.limits {
        LimitsMode::Fixed { x, y } => (Some(x), Some(y)),
        _ => (None, None),
    };
    out.push_str(&lim(&x_lim, &x, fx));
    out.push_str(&lim(&y_lim, &y, fy));

    let delta = |name: &str, src: &Source, lim: &str, from: &str, from_default: &str, axis: u8| {
        let l = format!("{lim}.hold(or: (1.0, 1.0))");
        format!(
            "output {name} @{pacing}\n  := if {l}.1 > {l}.0 then ({h} - {from}.offset(by: -1, or: {from_default}).{axis}) / ({l}.1 - {l}.0) * {ps}.hold(or: {ps_default}).{axis} else 0.0\n",
            h = src.held(),
        )
    };
    out.push_str(&delta(&dx, &x, &x_lim, &marker, &marker_default, 0));
    out.push_str(&delta(&dy, &y, &y_lim, &marker, &marker_default, 1));
    if let Some(c) = &color {
        let diff = format!("{} - {marker}.offset(by: -1, or: {marker_default}).2", c.held());
        let body = match cfg.charge_delta {
            ChargeDelta::Signed => diff,
            ChargeDelta::Absolute => format!("abs({diff})"),
        };
        let _ = writeln!(out, "output {dc} @{pacing} := {body}");
    }

    let mut base = format!("sqrt({dx} ** 2.0 + {dy} ** 2.0) > {}", float_lit(cfg.tau_gps));
    if let Some(t) = cfg.tau_charge {
        let _ = write!(base, " ∨ {dc} > {}", float_lit(t));
    }
    let mut critical_stream = None;
    match &cfg.priority {
        None => {
            let _ = writeln!(out, "output {send} @{pacing} := {base}");
        }
        Some(pr) => {
            parse_expr(&pr.critical).map_err(|e| ScaffoldError::Critical(e.to_string()))?;
            let _ = writeln!(out, "output {critical}: Bool @{pacing} := {}", pr.critical.trim());
            let _ = writeln!(
                out,
                "output {marker_lc} @{pacing}\n  := if {send} ∧ {critical} then {marker} else {marker_lc}.offset(by: -1, or: {lc_default})"
            );
            out.push_str(&delta(&dxc, &x, &x_lim, &marker_lc, &lc_default, 0));
            out.push_str(&delta(&dyc, &y, &y_lim, &marker_lc, &lc_default, 1));
            let _ = writeln!(
                out,
                "output {send} @{pacing}\n  := ({base}) ∧ (sqrt({dxc} ** 2.0 + {dyc} ** 2.0) > {} ∨ {critical})",
                float_lit(pr.tau_c)
            );
            critical_stream = Some(critical.clone());
        }
    }

    let mut components: Vec<String> = match cfg.aggregate {
        None => vec![x.held(), y.held()],
        Some(over) => vec![
            format!("{}.aggregate(over: {}s, using: avg)", x.now(), float_lit(over)),
            format!("{}.aggregate(over: {}s, using: avg)", y.now(), float_lit(over)),
        ],
    };
    if let Some(c) = &color {
        components.push(match cfg.aggregate {
            None => c.held(),
            Some(over) => format!("{}.aggregate(over: {}s, using: avg)", c.now(), float_lit(over)),
        });
    }
    let mut count_component = None;
    if let Some(over) = cfg.aggregate {
        count_component = Some(components.len() as u8);
        components.push(format!("{}.aggregate(over: {}s, using: count)", x.now(), float_lit(over)));
    }
    let _ = writeln!(
        out,
        "output {marker}: {} @{pacing}\n  filter {send} ∧ {vis}.hold(or: false)\n  := ({})",
        tuple_type(arity),
        components.join(", ")
    );

    let mut halo_stream = None;
    if let Some(h) = &cfg.halo {
        let _ = writeln!(out, "output {halo_seen} @{} := now()", h.source);
        let _ = writeln!(
            out,
            "output {halo}: Bool @{pacing} := now() - {halo_seen}.hold(or: 0.0) > {}",
            float_lit(h.bound)
        );
        halo_stream = Some(halo.clone());
    }

    let binding = PlotBinding {
        plot_id: cfg.plot_id.clone(),
        x_stream: cfg.x.clone(),
        y_stream: cfg.y.clone(),
        color_stream: cfg.color.clone(),
        limits_streams: (x_lim, y_lim),
        marker_stream: marker,
        critical_stream,
        halo_stream,
        pixel_scale_stream: ps,
        visible_stream: vis,
        count_component,
        pacing,
    };
    Ok((out, binding))
}

/// Host text followed by every plot fragment; checks the combined result.
pub fn scaffold_spec(
    host_source: &str,
    plots: &[PlotScaffoldConfig],
) -> Result<(String, Vec<PlotBinding>), ScaffoldError> {
    let mut text = host_source.trim_end().to_string();
    text.push('\n');
    let mut bindings = Vec::new();
    for cfg in plots {
        let host = parse_spec(&text).map_err(|e| ScaffoldError::Check(vec![e.to_diagnostic()]))?;
        if bindings.iter().any(|b: &PlotBinding| b.plot_id == cfg.plot_id) {
            return Err(ScaffoldError::Invalid(format!("duplicate plot id `{}`", cfg.plot_id)));
        }
        let (fragment, binding) = generate_scaffold(cfg, &host)?;
        text.push_str(&fragment);
        bindings.push(binding);
    }
    crate::pacing::check_source(&text).map_err(ScaffoldError::Check)?;
    Ok((text, bindings))
}
