//! Independent checks of the failure probability.
//!
//! Brute force enumerates every ordered draw of `m` distinct indices from a
//! tiny grid; simulation draws them at random against a fixed zero set. Both
//! treat the formula in [`crate::prob`] as the thing under test.

use std::collections::HashSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::exec::Execution;

/// Largest grid the brute-force enumerator accepts.
pub const MAX_BRUTE_FORCE_GRID: u64 = 12;

/// Independent RNG streams used by the simulator, whatever the thread count.
pub const SIMULATION_CHUNKS: u64 = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HarnessError {
    #[error("brute force supports grids of at most {MAX_BRUTE_FORCE_GRID} points, got {0}")]
    GridTooLarge(u64),
    #[error("cannot draw {checks} distinct points from a grid of {grid_points}")]
    TooManyChecks { checks: u64, grid_points: u64 },
    #[error("zero set of {zeros} does not fit a grid of {grid_points}")]
    TooManyZeros { zeros: u64, grid_points: u64 },
    #[error("simulation needs at least one trial")]
    NoTrials,
}

/// A grid `0..M` with a marked zero set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZeroUniverse {
    grid_points: u64,
    zeros: HashSet<u64>,
}

impl ZeroUniverse {
    /// Zeros at indices `0..k`. Uniform sampling makes placement irrelevant.
    pub fn first_k(grid_points: u64, zeros: u64) -> Result<Self, HarnessError> {
        if zeros > grid_points {
            return Err(HarnessError::TooManyZeros { zeros, grid_points });
        }
        Ok(ZeroUniverse {
            grid_points,
            zeros: (0..zeros).collect(),
        })
    }

    /// `k` zeros at distinct random indices.
    pub fn random(grid_points: u64, zeros: u64, seed: u64) -> Result<Self, HarnessError> {
        if zeros > grid_points {
            return Err(HarnessError::TooManyZeros { zeros, grid_points });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let set = rand::seq::index::sample(&mut rng, grid_points as usize, zeros as usize)
            .into_iter()
            .map(|i| i as u64)
            .collect();
        Ok(ZeroUniverse {
            grid_points,
            zeros: set,
        })
    }

    pub fn grid_points(&self) -> u64 {
        self.grid_points
    }

    pub fn zero_count(&self) -> u64 {
        self.zeros.len() as u64
    }

    pub fn is_zero(&self, index: u64) -> bool {
        self.zeros.contains(&index)
    }
}

/// Counts ordered draws by their largest index: `hist[j]` draws have max `j`.
///
/// `free` holds the indices not used by the current prefix. The last position
/// is tallied in bulk: completions below the prefix maximum keep it, every
/// other completion becomes the new maximum. Each sequence is still counted
/// exactly once.
fn dfs(remaining: usize, free: u32, current_max: usize, hist: &mut [u64]) {
    if remaining == 1 {
        let below = (1u32 << current_max) - 1;
        hist[current_max] += u64::from((free & below).count_ones());
        let mut above = free & !below;
        while above != 0 {
            hist[above.trailing_zeros() as usize] += 1;
            above &= above - 1;
        }
        return;
    }
    let mut rest = free;
    while rest != 0 {
        let j = rest.trailing_zeros() as usize;
        rest &= rest - 1;
        dfs(remaining - 1, free & !(1 << j), current_max.max(j), hist);
    }
}

/// Exact failure probability for every `k` in `0..=M`, by enumeration.
///
/// Entry `k` is the fraction of ordered draws of `m` distinct indices that
/// land entirely inside a zero set of size `k`.
pub fn brute_force_table(grid_points: u64, checks: u64, execution: Execution) -> Result<Vec<BigRational>, HarnessError> {
    if grid_points > MAX_BRUTE_FORCE_GRID {
        return Err(HarnessError::GridTooLarge(grid_points));
    }
    if checks > grid_points {
        return Err(HarnessError::TooManyChecks {
            checks,
            grid_points,
        });
    }
    let grid = grid_points as usize;
    if checks == 0 {
        // the empty draw lies in every zero set
        return Ok(vec![BigRational::from_integer(1.into()); grid + 1]);
    }
    let m = checks as usize;
    let partial = execution.map_range(grid, |first| {
        let mut hist = vec![0u64; grid];
        if m == 1 {
            hist[first] += 1;
        } else {
            let all = (1u32 << grid) - 1;
            dfs(m - 1, all & !(1 << first), first, &mut hist);
        }
        hist
    });
    let mut hist = vec![0u64; grid];
    for h in partial {
        for (total, n) in hist.iter_mut().zip(h) {
            *total += n;
        }
    }
    let draws: u64 = hist.iter().sum();
    // zeros at 0..k: a draw fails iff its largest index is below k
    let mut inside = 0u64;
    let mut table = Vec::with_capacity(grid + 1);
    for k in 0..=grid {
        if k > 0 {
            inside += hist[k - 1];
        }
        table.push(BigRational::new(BigInt::from(inside), BigInt::from(draws)));
    }
    Ok(table)
}

pub fn brute_force_probability(grid_points: u64, checks: u64, zeros: u64) -> Result<BigRational, HarnessError> {
    if zeros > grid_points {
        return Err(HarnessError::TooManyZeros { zeros, grid_points });
    }
    let table = brute_force_table(grid_points, checks, Execution::default())?;
    Ok(table[zeros as usize].clone())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationResult {
    pub trials: u64,
    /// Trials whose every draw hit a zero.
    pub hits: u64,
    pub rate: f64,
    /// Binomial standard error of `rate`.
    pub stderr: f64,
}

impl SimulationResult {
    /// Distance from `expected` in standard errors. Infinite when the
    /// estimate has no spread but misses `expected`.
    pub fn z_score(&self, expected: f64) -> f64 {
        let diff = self.rate - expected;
        if self.stderr > 0.0 {
            diff / self.stderr
        } else if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        }
    }
}

/// Empirical failure rate of `m` random distinct draws against `universe`.
///
/// Trials are split into [`SIMULATION_CHUNKS`] streams so the result does not
/// depend on the execution mode or thread count.
pub fn simulate_failure_rate(
    universe: &ZeroUniverse,
    checks: u64,
    trials: u64,
    seed: u64,
    execution: Execution,
) -> Result<SimulationResult, HarnessError> {
    let grid_points = universe.grid_points;
    if checks > grid_points {
        return Err(HarnessError::TooManyChecks {
            checks,
            grid_points,
        });
    }
    if trials == 0 {
        return Err(HarnessError::NoTrials);
    }
    let chunks = SIMULATION_CHUNKS.min(trials);
    let per_chunk = execution.map_range(chunks as usize, |c| {
        let c = c as u64;
        let n = trials / chunks + u64::from(c < trials % chunks);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c);
        let mut drawn = HashSet::with_capacity(checks as usize);
        let mut hits = 0u64;
        for _ in 0..n {
            drawn.clear();
            let mut all_zero = true;
            while (drawn.len() as u64) < checks {
                let d = rng.gen_range(0..grid_points);
                if !drawn.insert(d) {
                    continue;
                }
                if !universe.is_zero(d) {
                    all_zero = false;
                    break;
                }
            }
            hits += u64::from(all_zero);
        }
        hits
    });
    let hits: u64 = per_chunk.iter().sum();
    let rate = hits as f64 / trials as f64;
    Ok(SimulationResult {
        trials,
        hits,
        rate,
        stderr: (rate * (1.0 - rate) / trials as f64).sqrt(),
    })
}
