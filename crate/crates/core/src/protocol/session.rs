use std::collections::VecDeque;

use super::messages::*;
use crate::engine::{Event, MonitorError, Verdict};
use crate::lang::{parse_spec, pretty_expr};
use crate::viz::{backchannel_to_events, BackchannelError, BackchannelState, PlotBinding};
use crate::Monitor;

/// Static description of one plot as announced to the UI.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionPlot {
    pub binding: PlotBinding,
    pub color_range: Option<(f64, f64)>,
}

/// Input to the engine-owning consumer, in feed order.
#[derive(Debug, Clone, PartialEq)]
pub enum FeedItem {
    Event(crate::Event),
    AdvanceTime(f64),
    /// Raw inbound lines from one transport frame, applied back to back.
    Client(Vec<String>),
    ClientClosed,
    TraceEnd,
}

/// Synchronous core of a session: owns the monitor, turns feed items into
/// outbound messages. Everything that changes monitor state goes through
/// here, in order.
pub struct Session {
    monitor: Monitor,
    plots: Vec<SessionPlot>,
    backchannel: BackchannelState,
    trigger_labels: Vec<String>,
    hello_seen: bool,
    last_limits: Vec<Option<LimitsMsg>>,
    pending: Vec<MonitorToViz>,
}

impl Session {
    /// `source` is the full specification text the monitor was built from;
    /// trigger labels fall back to the condition as written.
    pub fn new(monitor: Monitor, source: &str, plots: Vec<SessionPlot>) -> Self {
        let written = parse_spec(source).ok();
        let trigger_labels = monitor
            .checked()
            .spec
            .triggers
            .iter()
            .enumerate()
            .map(|(i, t)| {
                t.message.clone().unwrap_or_else(|| match &written {
                    Some(s) => pretty_expr(&s.triggers[i].condition),
                    None => pretty_expr(&t.condition),
                })
            })
            .collect();
        let backchannel = BackchannelState::new(plots.iter().map(|p| p.binding.plot_id.as_str()));
        let last_limits = vec![None; plots.len()];
        Session { monitor, plots, backchannel, trigger_labels, hello_seen: false, last_limits, pending: Vec::new() }
    }

    pub fn monitor(&self) -> &Monitor {
        &self.monitor
    }

    pub fn plots(&self) -> &[SessionPlot] {
        &self.plots
    }

    pub fn hello_seen(&self) -> bool {
        self.hello_seen
    }

    pub fn session_msg(&self) -> MonitorToViz {
        MonitorToViz::Session(SessionMsg {
            protocol_version: PROTOCOL_VERSION,
            plots: self
                .plots
                .iter()
                .zip(&self.last_limits)
                .map(|(p, l)| PlotSummary {
                    plot: p.binding.plot_id.clone(),
                    x: p.binding.x_stream.clone(),
                    y: p.binding.y_stream.clone(),
                    color: p.binding.color_stream.clone(),
                    pacing: p.binding.pacing.clone(),
                    color_range: p.color_range,
                    limits: l.clone(),
                })
                .collect(),
        })
    }

    fn translate(&mut self, verdicts: Vec<Verdict<f64>>, out: &mut Vec<MonitorToViz>) {
        for v in verdicts {
            for (i, p) in self.plots.iter().enumerate() {
                if let Some(l) = p.binding.limits(&v, &self.monitor) {
                    let msg = LimitsMsg::new(l.plot_id, l.x, l.y);
                    let same = self.last_limits[i].as_ref().is_some_and(|o| {
                        o.x.0.total_cmp(&msg.x.0).is_eq()
                            && o.x.1.total_cmp(&msg.x.1).is_eq()
                            && o.y.0.total_cmp(&msg.y.0).is_eq()
                            && o.y.1.total_cmp(&msg.y.1).is_eq()
                    });
                    if !same {
                        self.last_limits[i] = Some(msg.clone());
                        out.push(MonitorToViz::Limits(msg));
                    }
                }
                if let Some(m) = p.binding.marker(&v) {
                    out.push(MonitorToViz::Marker(MarkerMsg {
                        plot: m.plot_id,
                        time: m.time,
                        x: m.x,
                        y: m.y,
                        color: m.color,
                        critical: m.critical,
                        halo: m.halo,
                        count: m.count,
                    }));
                }
            }
            for t in &v.triggers {
                out.push(MonitorToViz::Trigger(TriggerMsg {
                    time: v.time,
                    message: self.trigger_labels[t.index].clone(),
                    severity: Severity::Warning,
                }));
            }
        }
    }

    fn error(&self, message: String) -> MonitorToViz {
        MonitorToViz::Trigger(TriggerMsg { time: self.monitor.time(), message, severity: Severity::Error })
    }

    pub fn accept_event(&mut self, e: &crate::Event) -> Result<Vec<MonitorToViz>, MonitorError> {
        let vs = self.monitor.accept_event(e)?;
        let mut out = Vec::new();
        self.translate(vs, &mut out);
        Ok(out)
    }

    pub fn advance_time(&mut self, t: f64) -> Result<Vec<MonitorToViz>, MonitorError> {
        let vs = self.monitor.advance_time(t)?;
        let mut out = Vec::new();
        self.translate(vs, &mut out);
        Ok(out)
    }

    fn backchannel_event(&mut self, plot: &str) -> Result<Vec<MonitorToViz>, String> {
        let e: Event<f64> =
            backchannel_to_events(plot, &self.backchannel, self.monitor.time()).map_err(|e| e.to_string())?;
        self.accept_event(&e).map_err(|e| e.to_string())
    }

    /// Applies one decoded UI message. Errors are reported to the UI, never
    /// fatal. Returns the replies plus any verdict output.
    pub fn apply(&mut self, msg: VizToMonitor) -> Vec<MonitorToViz> {
        match msg {
            VizToMonitor::Hello { .. } if self.hello_seen => {
                vec![self.error("version mismatch: hello already received on this connection".into())]
            }
            VizToMonitor::Hello { .. } => {
                self.hello_seen = true;
                vec![self.session_msg()]
            }
            _ if !self.hello_seen => vec![self.error("expected hello as the first message".into())],
            VizToMonitor::Scale { plot, pixel_scale } => match self.backchannel.set_scale(&plot, pixel_scale) {
                Ok(()) => self.apply_backchannel(&plot),
                Err(e) => vec![self.error(e.to_string())],
            },
            VizToMonitor::Visibility { plot, visible } => match self.backchannel.set_visible(&plot, visible) {
                Ok(()) => self.apply_backchannel(&plot),
                Err(e) => vec![self.error(e.to_string())],
            },
        }
    }

    fn apply_backchannel(&mut self, plot: &str) -> Vec<MonitorToViz> {
        match self.backchannel_event(plot) {
            Ok(out) => out,
            Err(e) => vec![self.error(e)],
        }
    }

    /// Sets backchannel state before any UI is attached. Output it causes
    /// is delivered with the next handled feed item.
    pub fn preset(
        &mut self,
        plot: &str,
        visible: Option<bool>,
        scale: Option<(f64, f64)>,
    ) -> Result<(), BackchannelError> {
        if let Some(v) = visible {
            self.backchannel.set_visible(plot, v)?;
        }
        if let Some(s) = scale {
            self.backchannel.set_scale(plot, s)?;
        }
        let out = self.backchannel_event(plot).map_err(|_| BackchannelError::Empty(plot.to_string()))?;
        self.pending.extend(out);
        Ok(())
    }

    /// Decodes and applies one inbound line.
    pub fn handle_line(&mut self, line: &str) -> Vec<MonitorToViz> {
        if line.trim().is_empty() {
            return Vec::new();
        }
        match decode_viz(line.as_bytes()) {
            Ok(m) => self.apply(m),
            Err(e) => vec![self.error(e.to_string())],
        }
    }

    pub fn client_closed(&mut self) {
        self.hello_seen = false;
    }

    pub fn handle(&mut self, item: FeedItem) -> Result<Vec<MonitorToViz>, MonitorError> {
        let mut out = std::mem::take(&mut self.pending);
        match self.handle_item(item) {
            Ok(more) => {
                out.extend(more);
                Ok(out)
            }
            Err(e) => {
                self.pending = out;
                Err(e)
            }
        }
    }

    fn handle_item(&mut self, item: FeedItem) -> Result<Vec<MonitorToViz>, MonitorError> {
        match item {
            FeedItem::Event(e) => self.accept_event(&e),
            FeedItem::AdvanceTime(t) => self.advance_time(t),
            FeedItem::Client(lines) => Ok(lines.iter().flat_map(|l| self.handle_line(l)).collect()),
            FeedItem::ClientClosed => {
                self.client_closed();
                Ok(Vec::new())
            }
            FeedItem::TraceEnd => Ok(Vec::new()),
        }
    }
}

/// Bounded client queue. When over the limit, the oldest non-critical
/// marker is dropped; triggers, limits, session and critical markers stay.
#[derive(Debug, Clone)]
pub struct OutboundQueue {
    limit: usize,
    queue: VecDeque<MonitorToViz>,
    dropped: u64,
}

impl OutboundQueue {
    pub fn new(limit: usize) -> Self {
        OutboundQueue { limit: limit.max(1), queue: VecDeque::new(), dropped: 0 }
    }

    pub fn push(&mut self, msg: MonitorToViz) {
        self.queue.push_back(msg);
        while self.queue.len() > self.limit {
            match self.queue.iter().position(MonitorToViz::is_droppable) {
                Some(i) => {
                    self.queue.remove(i);
                    self.dropped += 1;
                }
                None => break,
            }
        }
    }

    pub fn pop(&mut self) -> Option<MonitorToViz> {
        self.queue.pop_front()
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub fn drain(&mut self) -> impl Iterator<Item = MonitorToViz> + '_ {
        self.queue.drain(..)
    }
}
