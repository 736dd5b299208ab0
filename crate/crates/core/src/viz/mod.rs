//! Plot bindings: scaffold generation, the pixel-distance rules behind the
//! `send` stream, and backchannel state mirrored as monitor inputs.

mod scaffold;

use std::collections::BTreeMap;

use thiserror::Error;

pub use scaffold::{
    generate_scaffold, pixel_scale_input, scaffold_spec, visible_input, ChargeDelta, Defaults, HaloConfig, LimitsMode,
    PlotBinding, PlotScaffoldConfig, PriorityConfig, ScaffoldError,
};

use crate::engine::{Event, Monitor, Verdict};
use crate::value::{Scalar, StreamValue};

/// `(value - prev) / (hi - lo) * scale`, or 0 when the limits span nothing.
pub fn pixel_delta(value: f64, prev: f64, limits: (f64, f64), scale: f64) -> f64 {
    if limits.1 > limits.0 {
        (value - prev) / (limits.1 - limits.0) * scale
    } else {
        0.0
    }
}

pub fn send_decision(dx: f64, dy: f64, dc: f64, tau_gps: f64, tau_charge: f64) -> bool {
    (dx * dx + dy * dy).sqrt() > tau_gps || dc > tau_charge
}

pub fn send_decision_prioritized(base: bool, dxc: f64, dyc: f64, critical: bool, tau_c: f64) -> bool {
    base && ((dxc * dxc + dyc * dyc).sqrt() > tau_c || critical)
}

/// One emitted plot datum.
#[derive(Debug, Clone, PartialEq)]
pub struct Marker {
    pub plot_id: String,
    pub time: f64,
    pub x: f64,
    pub y: f64,
    pub color: Option<f64>,
    pub count: Option<f64>,
    pub critical: bool,
    pub halo: bool,
}

/// Axis ranges of one plot; either bound may be NaN while a window is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Limits {
    pub plot_id: String,
    pub x: (f64, f64),
    pub y: (f64, f64),
}

fn pair<F: Scalar>(v: Option<&StreamValue<F>>) -> (f64, f64) {
    match v.and_then(|v| v.as_tuple()) {
        Some(t) if t.len() >= 2 => (t[0].to_f64_lossy(), t[1].to_f64_lossy()),
        _ => (f64::NAN, f64::NAN),
    }
}

impl PlotBinding {
    /// The marker produced in this verdict, if any.
    pub fn marker<F: Scalar>(&self, v: &Verdict<F>) -> Option<Marker> {
        let m = v.get(&self.marker_stream)?.as_tuple()?;
        let flag = |s: &Option<String>| s.as_ref().and_then(|s| v.get(s)).and_then(|x| x.as_bool()).unwrap_or(false);
        Some(Marker {
            plot_id: self.plot_id.clone(),
            time: v.time,
            x: m[0].to_f64_lossy(),
            y: m[1].to_f64_lossy(),
            color: self.color_stream.as_ref().map(|_| m[2].to_f64_lossy()),
            count: self.count_component.map(|k| m[k as usize].to_f64_lossy()),
            critical: flag(&self.critical_stream),
            halo: flag(&self.halo_stream),
        })
    }

    /// New axis ranges if either limit stream was updated in this verdict;
    /// the other axis is taken from the monitor's latest value.
    pub fn limits<F: Scalar>(&self, v: &Verdict<F>, monitor: &Monitor<F>) -> Option<Limits> {
        let (xs, ys) = &self.limits_streams;
        if v.get(xs).is_none() && v.get(ys).is_none() {
            return None;
        }
        Some(Limits {
            plot_id: self.plot_id.clone(),
            x: pair(v.get(xs).or_else(|| monitor.last_value(xs))),
            y: pair(v.get(ys).or_else(|| monitor.last_value(ys))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackchannelError {
    #[error("unknown plot `{0}`")]
    UnknownPlot(String),
    #[error("pixel scale must be positive, got ({0}, {1})")]
    InvalidScale(f64, f64),
    #[error("plot `{0}` has no backchannel state yet")]
    Empty(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlotUiState {
    pub pixel_scale: Option<(f64, f64)>,
    pub visible: Option<bool>,
}

/// UI state per plot as last reported over the backchannel.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BackchannelState {
    plots: BTreeMap<String, PlotUiState>,
}

impl BackchannelState {
    pub fn new<'a>(plot_ids: impl IntoIterator<Item = &'a str>) -> Self {
        BackchannelState { plots: plot_ids.into_iter().map(|p| (p.to_string(), PlotUiState::default())).collect() }
    }

    pub fn get(&self, plot_id: &str) -> Option<&PlotUiState> {
        self.plots.get(plot_id)
    }

    fn slot(&mut self, plot_id: &str) -> Result<&mut PlotUiState, BackchannelError> {
        self.plots.get_mut(plot_id).ok_or_else(|| BackchannelError::UnknownPlot(plot_id.to_string()))
    }

    pub fn set_scale(&mut self, plot_id: &str, scale: (f64, f64)) -> Result<(), BackchannelError> {
        if !(scale.0 > 0.0 && scale.1 > 0.0 && scale.0.is_finite() && scale.1.is_finite()) {
            return Err(BackchannelError::InvalidScale(scale.0, scale.1));
        }
        self.slot(plot_id)?.pixel_scale = Some(scale);
        Ok(())
    }

    pub fn set_visible(&mut self, plot_id: &str, visible: bool) -> Result<(), BackchannelError> {
        self.slot(plot_id)?.visible = Some(visible);
        Ok(())
    }
}

/// One event activating the plot's `pixel_scale_<id>` and/or `visible_<id>`
/// inputs with the recorded state.
pub fn backchannel_to_events<F: Scalar>(
    plot_id: &str,
    state: &BackchannelState,
    now: f64,
) -> Result<Event<F>, BackchannelError> {
    let s = state.get(plot_id).ok_or_else(|| BackchannelError::UnknownPlot(plot_id.to_string()))?;
    let mut e = Event::new(now);
    if let Some((w, h)) = s.pixel_scale {
        e = e.with(pixel_scale_input(plot_id), StreamValue::Tuple(vec![F::from_f64_lossy(w), F::from_f64_lossy(h)]));
    }
    if let Some(v) = s.visible {
        e = e.with(visible_input(plot_id), StreamValue::Bool(v));
    }
    if e.values.is_empty() {
        return Err(BackchannelError::Empty(plot_id.to_string()));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pixel_delta_examples() {
        assert_eq!(pixel_delta(7.0, 5.0, (0.0, 10.0), 500.0), 100.0);
        assert_eq!(pixel_delta(5.0, 5.0, (0.0, 10.0), 500.0), 0.0);
        assert_eq!(pixel_delta(7.0, 5.0, (5.0, 5.0), 500.0), 0.0);
    }

    #[test]
    fn send_examples() {
        assert!(send_decision(100.0, 0.0, 0.0, 10.0, 5.0));
        assert!(!send_decision(0.0, 0.0, 0.0, 10.0, 5.0));
        assert!(!send_decision(3.0, 4.0, 0.0, 5.0, 5.0));
        assert!(send_decision(0.0, 0.0, 6.0, 10.0, 5.0));
    }

    #[test]
    fn prioritized_send_examples() {
        assert!(!send_decision_prioritized(true, 2.0, 0.0, false, 20.0));
        assert!(send_decision_prioritized(true, 0.0, 0.0, true, 20.0));
        assert!(!send_decision_prioritized(false, 100.0, 100.0, true, 20.0));
        assert!(send_decision_prioritized(true, 30.0, 0.0, false, 20.0));
    }

    #[test]
    fn backchannel_events() {
        let mut s = BackchannelState::new(["p1"]);
        assert_eq!(backchannel_to_events::<f64>("p1", &s, 0.0), Err(BackchannelError::Empty("p1".into())));
        s.set_visible("p1", false).unwrap();
        let e = backchannel_to_events::<f64>("p1", &s, 1.5).unwrap();
        assert_eq!(e.time, 1.5);
        assert_eq!(e.values.get("visible_p1"), Some(&StreamValue::Bool(false)));
        assert!(!e.values.contains_key("pixel_scale_p1"));
        assert!(matches!(s.set_scale("p1", (0.0, 1.0)), Err(BackchannelError::InvalidScale(..))));
        assert!(matches!(s.set_visible("p2", true), Err(BackchannelError::UnknownPlot(_))));
        assert!(matches!(backchannel_to_events::<f64>("p2", &s, 0.0), Err(BackchannelError::UnknownPlot(_))));
    }
}
