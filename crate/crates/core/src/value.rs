//! Value domain shared by the language, the engine and the plot helpers.
//!
//! Floats are generic over [`Scalar`] so the evaluator can run in `f32` or
//! `f64`. A non-finite float never enters the monitor from outside; inside
//! the evaluator NaN is the non-value produced by division by zero and
//! friends. It propagates through arithmetic and makes every comparison false.

use std::fmt;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::{Deserialize, Serialize};

/// Floating point scalar the evaluator is instantiated with.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + fmt::Debug + fmt::Display + Default + Send + Sync + 'static
{
    fn from_f64_lossy(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).unwrap_or_else(Self::nan)
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Maps infinities to the non-value so they cannot leak into buffers.
    fn normalize(self) -> Self {
        if self.is_finite() {
            self
        } else {
            Self::nan()
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub const MAX_TUPLE_ARITY: usize = 4;

/// Static type of a stream or expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ValueType {
    Float,
    Bool,
    Tuple(u8),
}

impl ValueType {
    pub fn is_float(self) -> bool {
        self == ValueType::Float
    }
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueType::Float => write!(f, "Float64"),
            ValueType::Bool => write!(f, "Bool"),
            ValueType::Tuple(n) => {
                write!(f, "(")?;
                for i in 0..*n {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "Float64")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StreamValue<F> {
    Float(F),
    Bool(bool),
    Tuple(Vec<F>),
}

impl<F: Scalar> StreamValue<F> {
    pub fn value_type(&self) -> ValueType {
        match self {
            StreamValue::Float(_) => ValueType::Float,
            StreamValue::Bool(_) => ValueType::Bool,
            StreamValue::Tuple(v) => ValueType::Tuple(v.len() as u8),
        }
    }

    pub fn as_float(&self) -> Option<F> {
        match self {
            StreamValue::Float(f) => Some(*f),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            StreamValue::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_tuple(&self) -> Option<&[F]> {
        match self {
            StreamValue::Tuple(v) => Some(v),
            _ => None,
        }
    }

    /// True if every float component is finite.
    pub fn is_finite(&self) -> bool {
        match self {
            StreamValue::Float(f) => f.is_finite(),
            StreamValue::Bool(_) => true,
            StreamValue::Tuple(v) => v.iter().all(|f| f.is_finite()),
        }
    }

    /// Default value of a type: zeros and `false`.
    pub fn zero_of(ty: ValueType) -> Self {
        match ty {
            ValueType::Float => StreamValue::Float(F::zero()),
            ValueType::Bool => StreamValue::Bool(false),
            ValueType::Tuple(n) => StreamValue::Tuple(vec![F::zero(); n as usize]),
        }
    }

    pub fn to_f64(&self) -> StreamValue<f64> {
        match self {
            StreamValue::Float(f) => StreamValue::Float(f.to_f64_lossy()),
            StreamValue::Bool(b) => StreamValue::Bool(*b),
            StreamValue::Tuple(v) => StreamValue::Tuple(v.iter().map(|f| f.to_f64_lossy()).collect()),
        }
    }

    pub fn from_f64(v: &StreamValue<f64>) -> Self {
        match v {
            StreamValue::Float(f) => StreamValue::Float(F::from_f64_lossy(*f)),
            StreamValue::Bool(b) => StreamValue::Bool(*b),
            StreamValue::Tuple(v) => StreamValue::Tuple(v.iter().map(|f| F::from_f64_lossy(*f)).collect()),
        }
    }
}

impl<F: Scalar> fmt::Display for StreamValue<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StreamValue::Float(v) => write!(f, "{v}"),
            StreamValue::Bool(b) => write!(f, "{b}"),
            StreamValue::Tuple(vs) => {
                write!(f, "(")?;
                for (i, v) in vs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// IEEE comparisons already return false for NaN except `!=`; the monitor
/// treats every comparison against the non-value as false.
pub fn float_ne<F: Scalar>(a: F, b: F) -> bool {
    !a.is_nan() && !b.is_nan() && a != b
}

/// `min`/`max` that propagate the non-value instead of skipping it.
pub fn nan_min<F: Scalar>(a: F, b: F) -> F {
    if a.is_nan() || b.is_nan() {
        F::nan()
    } else {
        a.min(b)
    }
}

pub fn nan_max<F: Scalar>(a: F, b: F) -> F {
    if a.is_nan() || b.is_nan() {
        F::nan()
    } else {
        a.max(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nan_comparisons_are_false() {
        let nan = f64::NAN;
        assert!(!float_ne(nan, 1.0));
        assert!(!float_ne(1.0, nan));
        assert!(float_ne(1.0, 2.0));
        assert!(nan_min(nan, 1.0).is_nan());
        assert!(nan_max(2.0f32, f32::NAN).is_nan());
        assert_eq!(nan_min(1.0, 2.0), 1.0);
    }

    #[test]
    fn tuple_type_display() {
        assert_eq!(ValueType::Tuple(2).to_string(), "(Float64, Float64)");
        assert_eq!(ValueType::Float.to_string(), "Float64");
    }

    #[test]
    fn normalize_maps_infinity_to_nan() {
        assert!(f64::INFINITY.normalize().is_nan());
        assert_eq!(3.0f32.normalize(), 3.0);
    }

    #[test]
    fn f32_round_trip_through_f64() {
        let v: StreamValue<f32> = StreamValue::Tuple(vec![1.5, -2.25]);
        assert_eq!(StreamValue::<f32>::from_f64(&v.to_f64()), v);
    }
}
