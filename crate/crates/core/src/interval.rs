use std::fmt;

use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::exact::{format_rational, to_f64};

/// A real interval with exact endpoints and explicit closedness flags.
///
/// Circle arcs use lifted coordinates: `left` lies in `[0,1)` and `right`
/// may exceed 1 when the arc wraps past the origin.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interval {
    pub left: BigRational,
    pub right: BigRational,
    pub left_closed: bool,
    pub right_closed: bool,
}

impl Interval {
    /// The half-open interval `[left, right)`.
    pub fn half_open(left: BigRational, right: BigRational) -> Self {
        Interval { left, right, left_closed: true, right_closed: false }
    }

    pub fn open(left: BigRational, right: BigRational) -> Self {
        Interval { left, right, left_closed: false, right_closed: false }
    }

    pub fn length(&self) -> BigRational {
        &self.right - &self.left
    }

    pub fn contains(&self, x: &BigRational) -> bool {
        let lo = if self.left_closed { x >= &self.left } else { x > &self.left };
        let hi = if self.right_closed { x <= &self.right } else { x < &self.right };
        lo && hi
    }

    pub fn contains_f64(&self, x: f64) -> bool {
        let (l, r) = (to_f64(&self.left), to_f64(&self.right));
        let lo = if self.left_closed { x >= l } else { x > l };
        let hi = if self.right_closed { x <= r } else { x < r };
        lo && hi
    }

    /// `self ⊂ [a, b]` comparing closures, so closedness flags cannot flip
    /// the answer at ties.
    pub fn within_closed(&self, a: &BigRational, b: &BigRational) -> bool {
        &self.left >= a && &self.right <= b
    }

    /// `closure(self) ⊂ interior(other)`.
    pub fn closure_inside_interior_of(&self, other: &Interval) -> bool {
        self.left > other.left && self.right < other.right
    }

    /// `self ⊂ other` as sets, honoring closedness at shared endpoints.
    pub fn subset_of(&self, other: &Interval) -> bool {
        let left_ok = self.left > other.left
            || (self.left == other.left && (other.left_closed || !self.left_closed));
        let right_ok = self.right < other.right
            || (self.right == other.right && (other.right_closed || !self.right_closed));
        left_ok && right_ok
    }

    pub fn is_degenerate(&self) -> bool {
        self.length().is_zero()
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}, {}{}",
            if self.left_closed { '[' } else { '(' },
            format_rational(&self.left),
            format_rational(&self.right),
            if self.right_closed { ']' } else { ')' }
        )
    }
}

/// JSON form: endpoints as `"num/den"` strings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalRecord {
    pub left: String,
    pub right: String,
    pub left_closed: bool,
    pub right_closed: bool,
}

impl From<&Interval> for IntervalRecord {
    fn from(iv: &Interval) -> Self {
        IntervalRecord {
            left: format_rational(&iv.left),
            right: format_rational(&iv.right),
            left_closed: iv.left_closed,
            right_closed: iv.right_closed,
        }
    }
}
