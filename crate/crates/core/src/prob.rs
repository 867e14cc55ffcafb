//! Probability that `m` distinct grid points drawn uniformly without
//! replacement from `M` all fall in a zero locus of `k` points:
//!
//! ```text
//! p(M, m, k) = prod_{i=0}^{m-1} (k - i) / (M - i) = C(k, m) / C(M, m)
//! ```
//!
//! and the piecewise error probability of the pointwise check (0 when
//! `k < m`, `p` when `m <= k <= M`, 1 when `k > M`).

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Serialize, Serializer};
use thiserror::Error;

/// Above this grid size the exact rational is only computed on request.
pub const EXACT_AUTO_LIMIT: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProbError {
    #[error("more check points ({checks}) than grid points ({grid_points})")]
    TooManyChecks { checks: u64, grid_points: u64 },
    #[error("zero-locus bound {zeros} exceeds grid size {grid_points}")]
    ZerosExceedGrid { zeros: u64, grid_points: u64 },
    #[error("target probability must lie strictly between 0 and 1, got {0}")]
    InvalidTarget(f64),
    #[error("with k >= M every draw may hit a zero; no m <= M reaches the target")]
    Unreachable,
}

/// The `(M, m, k)` triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct ProbParams {
    /// Grid cardinality `M`.
    pub grid_points: u64,
    /// Number of distinct check points `m`.
    pub checks: u64,
    /// Upper bound `k` on the size of the zero locus.
    pub zeros: u64,
}

impl ProbParams {
    pub fn new(grid_points: u64, checks: u64, zeros: u64) -> Self {
        ProbParams {
            grid_points,
            checks,
            zeros,
        }
    }
}

/// A probability in exact, binary64 and natural-log form.
///
/// `log_value` is `-inf` exactly when the probability is zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbResult {
    #[serde(serialize_with = "serialize_ratio")]
    pub exact: Option<BigRational>,
    pub value: f64,
    #[serde(serialize_with = "serialize_log")]
    pub log_value: f64,
}

fn serialize_ratio<S: Serializer>(r: &Option<BigRational>, s: S) -> Result<S::Ok, S::Error> {
    match r {
        Some(r) => s.serialize_str(&r.to_string()),
        None => s.serialize_none(),
    }
}

fn serialize_log<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    // JSON has no infinities
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str(&v.to_string())
    }
}

impl ProbResult {
    fn zero() -> Self {
        ProbResult {
            exact: Some(BigRational::zero()),
            value: 0.0,
            log_value: f64::NEG_INFINITY,
        }
    }

    fn one() -> Self {
        ProbResult {
            exact: Some(BigRational::one()),
            value: 1.0,
            log_value: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exactness {
    /// Exact when `M <= EXACT_AUTO_LIMIT`.
    #[default]
    Auto,
    Always,
    Never,
}

/// Product of the integers in `(lo, hi]`, by splitting the range in halves.
fn range_product(lo: u64, hi: u64) -> BigUint {
    match hi.saturating_sub(lo) {
        0 => BigUint::one(),
        1 => BigUint::from(hi),
        2 => BigUint::from(hi) * BigUint::from(hi - 1),
        n => {
            let mid = lo + n / 2;
            range_product(lo, mid) * range_product(mid, hi)
        }
    }
}

/// Exact `p(M, m, k)` for `m <= k <= M`.
///
/// Shared factors of `k!/(k-m)!` and `M!/(M-m)!` cancel, leaving
/// `min(m, M - k)` factors on each side.
fn exact_product(p: &ProbParams) -> BigRational {
    let (big_m, m, k) = (p.grid_points, p.checks, p.zeros);
    let (numer, denom) = if big_m - k < m {
        (range_product(k - m, big_m - m), range_product(k, big_m))
    } else {
        (range_product(k - m, k), range_product(big_m - m, big_m))
    };
    BigRational::new(BigInt::from(numer), BigInt::from(denom))
}

/// Natural log of `p(M, m, k)` for `m <= k <= M`.
///
/// Sums `min(m, M - k)` factor logs, using whichever side of the identities
/// has fewer terms:
///
/// ```text
/// ln p = sum_{i<m}      ln((k - i)/(M - i))
///      = sum_{t=1}^{M-k} ln((k + t - m)/(k + t))
/// ```
fn log_product(p: &ProbParams) -> f64 {
    let (big_m, m, k) = (p.grid_points, p.checks, p.zeros);
    let gap = big_m - k;
    if gap == 0 || m == 0 {
        return 0.0;
    }
    if m <= gap {
        (0..m).map(|i| log_ratio(k - i, big_m - i)).sum()
    } else {
        (1..=gap).map(|t| log_ratio(k + t - m, k + t)).sum()
    }
}

/// `ln(a/b)` for `0 < a <= b`, accurate at both ends: `ln` of the quotient
/// when it is small, `ln_1p` of the complement when it is close to one.
fn log_ratio(a: u64, b: u64) -> f64 {
    let q = a as f64 / b as f64;
    if q < 0.5 {
        q.ln()
    } else {
        (-((b - a) as f64 / b as f64)).ln_1p()
    }
}

fn check_params(p: &ProbParams) -> Result<(), ProbError> {
    if p.checks > p.grid_points {
        return Err(ProbError::TooManyChecks {
            checks: p.checks,
            grid_points: p.grid_points,
        });
    }
    if p.zeros > p.grid_points {
        return Err(ProbError::ZerosExceedGrid {
            zeros: p.zeros,
            grid_points: p.grid_points,
        });
    }
    Ok(())
}

pub fn failure_probability(p: ProbParams) -> Result<ProbResult, ProbError> {
    failure_probability_with(p, Exactness::Auto)
}

pub fn failure_probability_with(p: ProbParams, exactness: Exactness) -> Result<ProbResult, ProbError> {
    check_params(&p)?;
    if p.zeros < p.checks {
        return Ok(ProbResult::zero());
    }
    let log_value = log_product(&p);
    let want_exact = match exactness {
        Exactness::Auto => p.grid_points <= EXACT_AUTO_LIMIT,
        Exactness::Always => true,
        Exactness::Never => false,
    };
    if want_exact {
        let exact = exact_product(&p);
        let value = exact.to_f64().expect("ratio of finite integers");
        Ok(ProbResult {
            exact: Some(exact),
            value,
            log_value,
        })
    } else {
        Ok(ProbResult {
            exact: None,
            value: log_value.exp(),
            log_value,
        })
    }
}

/// `ln p(M, m, k)`; `-inf` when `k < m`.
pub fn log_failure_probability(p: ProbParams) -> Result<f64, ProbError> {
    check_params(&p)?;
    if p.zeros < p.checks {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(log_product(&p))
}

/// Piecewise error probability; defined for every triple.
pub fn error_probability(p: ProbParams) -> ProbResult {
    error_probability_with(p, Exactness::Auto)
}

pub fn error_probability_with(p: ProbParams, exactness: Exactness) -> ProbResult {
    if p.zeros < p.checks {
        ProbResult::zero()
    } else if p.zeros > p.grid_points {
        ProbResult::one()
    } else {
        failure_probability_with(p, exactness).expect("m <= k <= M")
    }
}

/// Natural log of the piecewise error probability, without the exact path.
pub fn log_error_probability(p: ProbParams) -> f64 {
    if p.zeros < p.checks {
        f64::NEG_INFINITY
    } else if p.zeros > p.grid_points {
        0.0
    } else {
        log_product(&p)
    }
}

/// Smallest `m` whose error probability is at most `target`.
///
/// `m = k + 1` always works (the locus cannot absorb every draw), so the
/// search runs over `1..=k+1` by bisection on the monotone log-probability.
pub fn min_points_for_target(grid_points: u64, zeros: u64, target: f64) -> Result<u64, ProbError> {
    if !(target > 0.0 && target < 1.0) {
        return Err(ProbError::InvalidTarget(target));
    }
    if zeros >= grid_points {
        return Err(ProbError::Unreachable);
    }
    let log_target = target.ln();
    let meets = |m: u64| log_error_probability(ProbParams::new(grid_points, m, zeros)) <= log_target;
    let (mut lo, mut hi) = (1, zeros + 1);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if meets(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ratio(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn fp(big_m: u64, m: u64, k: u64) -> ProbResult {
        failure_probability(ProbParams::new(big_m, m, k)).unwrap()
    }

    #[test]
    fn small_examples() {
        let r = fp(5, 2, 3);
        assert_eq!(r.exact, Some(ratio(3, 10)));
        assert_eq!(r.value, 0.3);
        assert_eq!(fp(4, 1, 2).value, 0.5);
        assert_eq!(fp(10, 3, 10).exact, Some(ratio(1, 1)));
        assert_eq!(fp(10, 3, 2).exact, Some(ratio(0, 1)));
        assert_eq!(fp(10, 3, 2).log_value, f64::NEG_INFINITY);
    }

    #[test]
    fn rejects_more_checks_than_points() {
        assert!(matches!(
            failure_probability(ProbParams::new(3, 4, 1)),
            Err(ProbError::TooManyChecks { .. })
        ));
        assert!(log_failure_probability(ProbParams::new(3, 4, 1)).is_err());
    }

    #[test]
    fn log_examples() {
        let big = ProbParams::new(1 << 52, 10, 1_000_000);
        let lp = log_failure_probability(big).unwrap();
        assert!(lp < -200.0);
        // 50-digit termwise reference
        assert!((lp - -222.281_473_311_671_3).abs() < 1e-9, "{lp}");
        assert_eq!(
            log_failure_probability(ProbParams::new(10, 1, 5)).unwrap(),
            0.5f64.ln()
        );
        assert_eq!(
            log_failure_probability(ProbParams::new(1_000_000, 2, 1_000_000)).unwrap(),
            0.0
        );
        assert_eq!(
            log_failure_probability(ProbParams::new(10, 3, 2)).unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn piecewise_branches() {
        assert_eq!(error_probability(ProbParams::new(100, 10, 5)).value, 0.0);
        assert_eq!(error_probability(ProbParams::new(100, 10, 200)).value, 1.0);
        assert_eq!(error_probability(ProbParams::new(5, 2, 3)).value, 0.3);
        // m > M with k <= M falls in the k < m branch
        assert_eq!(error_probability(ProbParams::new(5, 9, 3)).value, 0.0);
    }

    #[test]
    fn large_grids_skip_the_exact_path() {
        let r = fp(9_007_199, 10, 1000);
        assert!(r.exact.is_none());
        assert!(r.value > 1e-41 && r.value < 1e-39);
        let forced = failure_probability_with(ProbParams::new(9_007_199, 10, 1000), Exactness::Always).unwrap();
        let exact = forced.exact.unwrap();
        let rel = (exact.to_f64().unwrap() - r.value).abs() / r.value;
        assert!(rel < 1e-12, "{rel}");
    }

    #[test]
    fn intro_deck_constant() {
        // one fixed order of a 36-card deck: hit the single "right" card
        // out of 36, then out of 35, ...
        let exact = (1..=36u64)
            .map(|n| {
                failure_probability_with(ProbParams::new(n, 1, 1), Exactness::Always)
                    .unwrap()
                    .exact
                    .unwrap()
            })
            .fold(BigRational::one(), |acc, p| acc * p);
        assert_eq!(*exact.numer(), BigInt::one());
        assert_eq!(exact.denom().to_string(), "371993326789901217467999448150835200000000");
        let v = exact.to_f64().unwrap();
        assert!((v / 0.27e-41 - 1.0).abs() < 0.01, "{v}");
    }

    #[test]
    fn min_points() {
        assert_eq!(min_points_for_target(1 << 52, 1_000_000, (-200f64).exp()).unwrap(), 9);
        assert_eq!(min_points_for_target(100, 5, 0.5).unwrap(), 1);
        assert_eq!(min_points_for_target(100, 5, 1e-300).unwrap(), 6);
        assert_eq!(min_points_for_target(12345, 0, 1e-9).unwrap(), 1);
        assert!(matches!(min_points_for_target(10, 10, 0.1), Err(ProbError::Unreachable)));
        assert!(min_points_for_target(10, 3, 0.0).is_err());
        assert!(min_points_for_target(10, 3, 1.0).is_err());
    }

    #[test]
    fn near_certain_grid_uses_short_sum() {
        // M - k = 1: one term, ln(1 - m/M)
        let lp = log_failure_probability(ProbParams::new(1 << 40, 1 << 30, (1 << 40) - 1)).unwrap();
        let expected = (-(2f64.powi(-10))).ln_1p();
        assert!((lp - expected).abs() < 1e-15);
    }
}
