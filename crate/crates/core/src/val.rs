//! Valuations with an explicit precision-limited infinity.
//!
//! Values are integers counted in units of `1/e`; the denominator lives with
//! whichever object produced the value.

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Val {
    /// A resolved value.
    Finite(i64),
    /// Everything visible at this precision vanished; the true value is at least this.
    AtLeast(i64),
}

impl Val {
    pub fn finite(self) -> Option<i64> {
        match self {
            Val::Finite(v) => Some(v),
            Val::AtLeast(_) => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Val::Finite(_))
    }

    /// The number carried by either variant (exact value or lower bound).
    pub fn bound(self) -> i64 {
        match self {
            Val::Finite(v) | Val::AtLeast(v) => v,
        }
    }

    pub fn add(self, other: Val) -> Val {
        match (self, other) {
            (Val::Finite(a), Val::Finite(b)) => Val::Finite(a + b),
            (a, b) => Val::AtLeast(a.bound() + b.bound()),
        }
    }

    pub fn shift(self, k: i64) -> Val {
        match self {
            Val::Finite(a) => Val::Finite(a + k),
            Val::AtLeast(a) => Val::AtLeast(a + k),
        }
    }

    /// Minimum of two values. A resolved value below a bound wins; otherwise the
    /// result is only known as a bound.
    pub fn min(self, other: Val) -> Val {
        match (self, other) {
            (Val::Finite(a), Val::Finite(b)) => Val::Finite(a.min(b)),
            (Val::Finite(a), Val::AtLeast(b)) | (Val::AtLeast(b), Val::Finite(a)) => {
                if a <= b {
                    Val::Finite(a)
                } else {
                    Val::AtLeast(b)
                }
            }
            (Val::AtLeast(a), Val::AtLeast(b)) => Val::AtLeast(a.min(b)),
        }
    }

    /// True when `self >= other` is certainly false given what is known.
    pub fn certainly_below(self, other: Val) -> bool {
        match self {
            Val::Finite(a) => a < other.bound(),
            Val::AtLeast(_) => false,
        }
    }

    /// Render as a reduced rational `a/e`, prefixed by `>=` for bounds.
    pub fn display(self, e: i64) -> String {
        match self {
            Val::Finite(v) => fmt_ratio(v, e),
            Val::AtLeast(v) => format!(">={}", fmt_ratio(v, e)),
        }
    }
}

impl fmt::Display for Val {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display(1))
    }
}

pub fn fmt_ratio(num: i64, den: i64) -> String {
    fn gcd(a: i64, b: i64) -> i64 {
        if b == 0 {
            a.abs()
        } else {
            gcd(b, a % b)
        }
    }
    let g = gcd(num, den).max(1);
    let (n, d) = (num / g, den / g);
    if d == 1 {
        n.to_string()
    } else {
        format!("{n}/{d}")
    }
}
