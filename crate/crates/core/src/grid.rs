//! The segment `[A, B]` viewed as the finite set of binary64 values in it.
//!
//! Two spacing models are offered. `RelativeEps` takes `eps_x = |x| * 2^-53`
//! and is the one that reproduces the published point counts for `[A, A+5]`
//! segments. `TrueUlp` uses the actual distance to the next binary64 above
//! `|x|`; its estimate is a guaranteed lower bound on the real count.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// 2^-53, the relative rounding bound of round-to-nearest binary64.
pub const RELATIVE_EPSILON: f64 = 1.0 / 9_007_199_254_740_992.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("segment bounds must be finite with A < B, got [{0}, {1}]")]
    InvalidSegment(f64, f64),
    #[error("value {0} is not finite")]
    NonFinite(f64),
    #[error("relative spacing is undefined at zero")]
    ZeroInRelativeMode,
    #[error("segment [{0}, {1}] straddles zero; split it first")]
    StraddlesZero(f64, f64),
    #[error("segment [{0}, {1}] lies below the smallest positive normal number")]
    BelowNormalRange(f64, f64),
    #[error("grid index {index} out of range for {points} points")]
    IndexOutOfRange { index: u64, points: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridMode {
    #[default]
    #[serde(rename = "relative")]
    RelativeEps,
    #[serde(rename = "ulp")]
    TrueUlp,
}

impl fmt::Display for GridMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GridMode::RelativeEps => "relative",
            GridMode::TrueUlp => "ulp",
        })
    }
}

impl FromStr for GridMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "relative" => Ok(GridMode::RelativeEps),
            "ulp" => Ok(GridMode::TrueUlp),
            other => Err(format!("unknown grid mode {other:?} (expected relative|ulp)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    a: f64,
    b: f64,
}

impl Segment {
    pub fn new(a: f64, b: f64) -> Result<Self, GridError> {
        if a.is_finite() && b.is_finite() && a < b {
            Ok(Segment { a, b })
        } else {
            Err(GridError::InvalidSegment(a, b))
        }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn width(&self) -> f64 {
        self.b - self.a
    }

    pub fn contains(&self, x: f64) -> bool {
        self.a <= x && x <= self.b
    }

    pub fn straddles_zero(&self) -> bool {
        self.a < 0.0 && 0.0 < self.b
    }

    /// Splits at zero when the segment straddles it.
    pub fn split_at_zero(&self) -> Vec<Segment> {
        if self.straddles_zero() {
            vec![
                Segment { a: self.a, b: 0.0 },
                Segment { a: 0.0, b: self.b },
            ]
        } else {
            vec![*self]
        }
    }

    pub fn overlaps(&self, other: &Segment) -> bool {
        self.a <= other.b && other.a <= self.b
    }
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.a, self.b)
    }
}

/// Next binary64 above a finite non-negative `x`.
fn next_up(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x == 0.0 {
        return f64::from_bits(1);
    }
    f64::from_bits(x.to_bits() + 1)
}

pub fn epsilon_for(x: f64, mode: GridMode) -> Result<f64, GridError> {
    if !x.is_finite() {
        return Err(GridError::NonFinite(x));
    }
    let magnitude = x.abs();
    match mode {
        GridMode::RelativeEps if magnitude == 0.0 => Err(GridError::ZeroInRelativeMode),
        GridMode::RelativeEps => Ok(magnitude * RELATIVE_EPSILON),
        GridMode::TrueUlp => {
            let up = next_up(magnitude);
            if up.is_finite() {
                Ok(up - magnitude)
            } else {
                // spacing just below the overflow threshold
                Ok(magnitude - f64::from_bits(magnitude.to_bits() - 1))
            }
        }
    }
}

/// Maps a segment onto the positive half-line.
///
/// `B <= 0` mirrors to `[-B, -A]`; a zero lower bound is replaced by the
/// smallest positive normal number. Segments straddling zero are rejected.
pub fn normalize_segment(s: Segment) -> Result<Segment, GridError> {
    if s.straddles_zero() {
        return Err(GridError::StraddlesZero(s.a, s.b));
    }
    let (a, b) = if s.b <= 0.0 { (-s.b, -s.a) } else { (s.a, s.b) };
    let a = if a == 0.0 { f64::MIN_POSITIVE } else { a };
    if a >= b {
        return Err(GridError::BelowNormalRange(s.a, s.b));
    }
    Ok(Segment { a, b })
}

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite value")
}

/// `floor((B - A) / eps_B)` on the normalized segment, computed exactly.
pub fn estimate_grid_points(s: Segment, mode: GridMode) -> Result<u64, GridError> {
    let s = normalize_segment(s)?;
    let eps = epsilon_for(s.b, mode)?;
    if eps.is_zero() {
        return Err(GridError::BelowNormalRange(s.a, s.b));
    }
    let eps = match mode {
        // b * 2^-53 may round in the subnormal range; use the exact product
        GridMode::RelativeEps => exact(s.b) / BigRational::from_integer(BigInt::from(1u64 << 53)),
        GridMode::TrueUlp => exact(eps),
    };
    let ratio = (exact(s.b) - exact(s.a)) / eps;
    Ok(ratio.floor().to_integer().to_u64().expect("count below 2^53"))
}

/// Discrete view of a normalized segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridModel {
    pub segment: Segment,
    pub mode: GridMode,
    /// Spacing at the upper bound.
    pub epsilon: f64,
    /// Estimated number of grid points.
    pub points: u64,
}

impl GridModel {
    /// Builds the model for `s` after [`normalize_segment`].
    pub fn new(s: Segment, mode: GridMode) -> Result<Self, GridError> {
        let segment = normalize_segment(s)?;
        Ok(GridModel {
            segment,
            mode,
            epsilon: epsilon_for(segment.b, mode)?,
            points: estimate_grid_points(segment, mode)?,
        })
    }

    /// `A + index * eps_B`, rounded, never above `B`. In `TrueUlp` mode `A` is
    /// first rounded up to a multiple of `eps_B`, which keeps points distinct.
    pub fn grid_point(&self, index: u64) -> Result<f64, GridError> {
        if index >= self.points {
            return Err(GridError::IndexOutOfRange {
                index,
                points: self.points,
            });
        }
        let start = match self.mode {
            GridMode::RelativeEps => self.segment.a,
            // a power-of-two spacing: align A to it so every point is exact
            // (otherwise neighbours can round onto the same tie)
            GridMode::TrueUlp => (self.segment.a / self.epsilon).ceil() * self.epsilon,
        };
        let p = start + index as f64 * self.epsilon;
        Ok(p.min(self.segment.b))
    }
}

pub fn grid_point(s: Segment, index: u64, mode: GridMode) -> Result<f64, GridError> {
    GridModel::new(s, mode)?.grid_point(index)
}

/// Exact number of binary64 values in a segment with `0 <= A < B`.
pub fn count_representable(s: Segment) -> u64 {
    assert!(s.a >= 0.0, "count_representable expects a non-negative segment");
    // positive floats are ordered like their bit patterns
    s.b.to_bits() - s.a.to_bits() + 1
}
