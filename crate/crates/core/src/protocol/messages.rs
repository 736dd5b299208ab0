use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const PROTOCOL_VERSION: u32 = 1;

/// Floats that may be the non-value travel as `null`.
mod nullable {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

mod nullable_pair {
    use super::*;

    #[derive(Serialize, Deserialize)]
    struct Pair(#[serde(with = "nullable")] f64, #[serde(with = "nullable")] f64);

    pub fn serialize<S: Serializer>(v: &(f64, f64), s: S) -> Result<S::Ok, S::Error> {
        Pair(v.0, v.1).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(f64, f64), D::Error> {
        let Pair(a, b) = Pair::deserialize(d)?;
        Ok((a, b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Info,
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerMsg {
    pub plot: String,
    pub time: f64,
    #[serde(with = "nullable")]
    pub x: f64,
    #[serde(with = "nullable")]
    pub y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<f64>,
    pub critical: bool,
    pub halo: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitsMsg {
    pub plot: String,
    #[serde(with = "nullable_pair")]
    pub x: (f64, f64),
    #[serde(with = "nullable_pair")]
    pub y: (f64, f64),
    /// Set when an axis spans nothing (or is unknown yet).
    pub degenerate: bool,
}

impl LimitsMsg {
    pub fn new(plot: String, x: (f64, f64), y: (f64, f64)) -> Self {
        let degenerate = !(x.0 < x.1 && y.0 < y.1);
        LimitsMsg { plot, x, y, degenerate }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerMsg {
    pub time: f64,
    pub message: String,
    pub severity: Severity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSummary {
    pub plot: String,
    pub x: String,
    pub y: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<String>,
    pub pacing: String,
    /// Value range for the color map.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color_range: Option<(f64, f64)>,
    /// Latest axis limits, so a reconnecting client can restore its view.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limits: Option<LimitsMsg>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMsg {
    pub protocol_version: u32,
    pub plots: Vec<PlotSummary>,
}

/// Monitor to UI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum MonitorToViz {
    Marker(MarkerMsg),
    Limits(LimitsMsg),
    Trigger(TriggerMsg),
    Session(SessionMsg),
}

impl MonitorToViz {
    /// Messages the outbound queue must never drop.
    pub fn is_droppable(&self) -> bool {
        matches!(self, MonitorToViz::Marker(m) if !m.critical)
    }
}

/// UI to monitor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum VizToMonitor {
    Hello { protocol_version: u32 },
    Scale { plot: String, pixel_scale: (f64, f64) },
    Visibility { plot: String, visible: bool },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecodeError {
    #[error("malformed message at byte {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("protocol version {got} is not supported (expected {PROTOCOL_VERSION})")]
    VersionMismatch { got: u32 },
}

/// One JSON object followed by a newline.
pub fn encode<T: Serialize>(msg: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec(msg).expect("messages serialize");
    v.push(b'\n');
    v
}

pub fn encode_line<T: Serialize>(msg: &T) -> String {
    serde_json::to_string(msg).expect("messages serialize")
}

fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    let mut l = 1;
    for (i, b) in bytes.iter().enumerate() {
        if l == line {
            return (i + column.saturating_sub(1)).min(bytes.len());
        }
        if *b == b'\n' {
            l += 1;
        }
    }
    bytes.len()
}

pub fn decode<T: for<'de> Deserialize<'de>>(bytes: &[u8]) -> Result<T, DecodeError> {
    serde_json::from_slice(bytes)
        .map_err(|e| DecodeError::Malformed { offset: byte_offset(bytes, e.line(), e.column()), reason: e.to_string() })
}

/// Decodes an inbound message and enforces the protocol version on `hello`.
pub fn decode_viz(bytes: &[u8]) -> Result<VizToMonitor, DecodeError> {
    let msg: VizToMonitor = decode(bytes)?;
    match msg {
        VizToMonitor::Hello { protocol_version } if protocol_version != PROTOCOL_VERSION => {
            Err(DecodeError::VersionMismatch { got: protocol_version })
        }
        VizToMonitor::Scale { pixel_scale: (w, h), .. } if !(w > 0.0 && h > 0.0) => {
            Err(DecodeError::Malformed { offset: 0, reason: format!("pixel_scale must be positive, got [{w}, {h}]") })
        }
        m => Ok(m),
    }
}
