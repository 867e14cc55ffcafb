use num_bigint::BigInt;
use num_integer::binomial;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zerocheck::exec::Execution;
use zerocheck::harness::{brute_force_table, simulate_failure_rate, ZeroUniverse};
use zerocheck::prob::{failure_probability_with, log_failure_probability, Exactness};
use zerocheck::ProbParams;

fn exact(m_big: u64, m: u64, k: u64) -> BigRational {
    failure_probability_with(ProbParams::new(m_big, m, k), Exactness::Always)
        .unwrap()
        .exact
        .unwrap()
}

#[test]
fn product_equals_ratio_of_binomials() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..10_000 {
        let grid = rng.gen_range(1..=2000u64);
        let m = rng.gen_range(0..=grid.min(40));
        let k = rng.gen_range(0..=grid);
        let expected = BigRational::new(
            binomial(BigInt::from(k), BigInt::from(m)),
            binomial(BigInt::from(grid), BigInt::from(m)),
        );
        assert_eq!(exact(grid, m, k), expected, "M={grid} m={m} k={k}");
    }
}

#[test]
fn brute_force_matches_small_cases() {
    for grid in 1..=8u64 {
        for m in 0..=grid {
            let table = brute_force_table(grid, m, Execution::default()).unwrap();
            for (k, p) in table.iter().enumerate() {
                assert_eq!(*p, exact(grid, m, k as u64), "M={grid} m={m} k={k}");
            }
        }
    }
}

#[test]
fn log_form_matches_exact_and_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..2_000 {
        let grid = rng.gen_range(2..=5000u64);
        let m = rng.gen_range(1..grid.min(60));
        let k = rng.gen_range(m..grid);
        let lp = log_failure_probability(ProbParams::new(grid, m, k)).unwrap();
        let e = exact(grid, m, k);
        // ln of a ratio of big integers, without going through f64 underflow
        let ln_exact = ln_big(e.numer()) - ln_big(e.denom());
        assert!((lp - ln_exact).abs() <= 1e-12 * ln_exact.abs().max(1.0), "M={grid} m={m} k={k}");

        let next_k = log_failure_probability(ProbParams::new(grid, m, k + 1)).unwrap();
        let next_m = log_failure_probability(ProbParams::new(grid, m + 1, k)).unwrap();
        assert!(next_k >= lp && next_m <= lp);
    }
}

fn ln_big(n: &BigInt) -> f64 {
    assert!(!n.is_zero());
    let bits = n.bits();
    let shift = bits.saturating_sub(60);
    let top = (n >> shift).to_f64().unwrap();
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

#[test]
fn simulation_agrees_with_formula_on_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let mut checked = 0;
    while checked < 20 {
        let grid = rng.gen_range(10..=100_000u64);
        let m = rng.gen_range(1..=5u64);
        let k = rng.gen_range(m..=grid);
        let p = exact(grid, m, k).to_f64().unwrap();
        if p < 1e-4 {
            continue;
        }
        let u = ZeroUniverse::random(grid, k, checked).unwrap();
        let sim = simulate_failure_rate(&u, m, 1_000_000, 1000 + checked, Execution::default()).unwrap();
        let z = sim.z_score(p);
        assert!(z.abs() < 4.0, "M={grid} m={m} k={k}: rate {} vs {p}, z={z}", sim.rate);
        checked += 1;
    }
}
