use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar type the measures are computed in.
pub trait Scalar:
    Float
    + FromPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts a literal constant.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable as float")
    }

    fn from_f32_value(x: f32) -> Self {
        Self::from_f32(x).expect("finite embedding component")
    }

    fn to_f64_value(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `base`, widened to what this precision can resolve after summing a row.
    fn tolerance(base: f64) -> Self {
        Self::lit(base).max(Self::epsilon() * Self::lit(256.0))
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Fixed-precision display string, e.g. `display(0.6612, 2) == "0.66"`.
pub fn display<S: Scalar>(x: S, decimals: usize) -> String {
    let v = x.to_f64_value();
    // avoid "-0.00"
    let s = format!("{:.*}", decimals, v);
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}
