//! Ratios with the `0/0 = 0` convention.
//!
//! A [`Dotfraction`] behaves like `a / b` whenever `b != 0`. A zero
//! numerator gives zero regardless of the denominator, and a nonzero
//! numerator over a zero denominator is kept as an explicit
//! [`Dotfraction::Undefined`] value so callers must deal with it.

use std::fmt;
use std::ops::Mul;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Dotfraction {
    Zero,
    Value(f64),
    Undefined,
}

/// Builds `a ./ b`. This is the only constructor.
pub fn dotfrac(a: f64, b: f64) -> Dotfraction {
    if a == 0.0 {
        Dotfraction::Zero
    } else if b == 0.0 {
        Dotfraction::Undefined
    } else {
        Dotfraction::Value(a / b)
    }
}

impl Dotfraction {
    /// Numeric value, `None` when undefined.
    pub fn value(self) -> Option<f64> {
        match self {
            Dotfraction::Zero => Some(0.0),
            Dotfraction::Value(v) => Some(v),
            Dotfraction::Undefined => None,
        }
    }

    pub fn is_defined(self) -> bool {
        !matches!(self, Dotfraction::Undefined)
    }

    /// `c · (a ./ b)`; a zero scalar collapses a defined fraction to zero.
    pub fn scale(self, c: f64) -> Dotfraction {
        match self {
            Dotfraction::Undefined => Dotfraction::Undefined,
            Dotfraction::Zero => Dotfraction::Zero,
            Dotfraction::Value(_) if c == 0.0 => Dotfraction::Zero,
            Dotfraction::Value(v) => Dotfraction::Value(c * v),
        }
    }
}

impl Mul for Dotfraction {
    type Output = Dotfraction;

    fn mul(self, rhs: Dotfraction) -> Dotfraction {
        match (self, rhs) {
            (Dotfraction::Undefined, _) | (_, Dotfraction::Undefined) => Dotfraction::Undefined,
            (Dotfraction::Zero, _) | (_, Dotfraction::Zero) => Dotfraction::Zero,
            (Dotfraction::Value(a), Dotfraction::Value(b)) => Dotfraction::Value(a * b),
        }
    }
}

impl fmt::Display for Dotfraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dotfraction::Zero => write!(f, "0"),
            Dotfraction::Value(v) => write!(f, "{v}"),
            Dotfraction::Undefined => write!(f, "undefined"),
        }
    }
}
