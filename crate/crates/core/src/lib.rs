//! Stream-based runtime monitor whose specifications prepare plot data:
//! synchronized multi-rate streams, overlap filtering, and prioritized
//! markers, connected to a live plot UI over a newline-delimited JSON
//! protocol.

pub mod diag;
pub mod engine;
pub mod lang;
pub mod manifest;
pub mod pacing;
pub mod protocol;
pub mod trace;
pub mod value;
pub mod viz;

pub use pacing::{check_source, check_spec, CheckedSpec};
pub use value::{Scalar, ValueType};

/// Stream values in double precision.
pub type StreamValue = value::StreamValue<f64>;
/// Monitor evaluating in double precision.
pub type Monitor = engine::Monitor<f64>;
pub type Event = engine::Event<f64>;
pub type Verdict = engine::Verdict<f64>;
