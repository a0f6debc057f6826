//! The lazy walk on the integers obtained by projecting the generator walk:
//! `a` moves right, `a^-1` moves left, `b` and `b^-1` stay put, so uniform
//! letters project to hold 1/2, +-1 with probability 1/4 each.
//!
//! Confinement probabilities `P(R_n subset [-m, m])` are computed exactly by
//! iterating the (2m+1)-state killed transition operator, and the asymptotic
//! decay rate comes from the closed-form top eigenvalue of that tridiagonal
//! Toeplitz chain. The two routes are independent and cross-check each other.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::Letter;

/// Hard cap on the killed-chain state space.
pub const STATE_LIMIT: u64 = 1_000_000;

/// Steps and confinement half-width of a query for `P(R_n subset [-m, m])`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfineQuery {
    pub n: u64,
    pub m: u32,
}

impl ConfineQuery {
    pub fn new(n: u64, m: u32) -> Result<Self> {
        if m < 1 {
            return Err(Error::InvalidParameter("confinement needs m >= 1".into()));
        }
        let states = 2 * m as u64 + 1;
        if states > STATE_LIMIT {
            return Err(Error::StateSpaceLimit { states, limit: STATE_LIMIT });
        }
        Ok(ConfineQuery { n, m })
    }
}

/// +1 for `a`, -1 for `a^-1`, 0 for `b` and `b^-1`.
pub fn project_letter(letter: Letter) -> i64 {
    match letter {
        Letter::A => 1,
        Letter::AInv => -1,
        Letter::B | Letter::BInv => 0,
    }
}

/// `log P(R_n subset [-m, m])`, exact up to floating rounding.
///
/// Iterated matrix-vector products against the substochastic operator
/// (hold 1/2, +-1/4, killed outside [-m, m]); the vector is renormalized in
/// log space whenever the surviving mass gets close to underflow, so the
/// result is valid for any `n * rate`, far past where the raw probability
/// would underflow.
pub fn confine_log_prob(q: ConfineQuery) -> f64 {
    let states = 2 * q.m as usize + 1;
    let mut v = vec![0.0f64; states];
    v[q.m as usize] = 1.0; // start at the origin
    let mut next = vec![0.0f64; states];
    let mut log_scale = 0.0f64;
    for _ in 0..q.n {
        for (i, slot) in next.iter_mut().enumerate() {
            let left = if i > 0 { v[i - 1] } else { 0.0 };
            let right = if i + 1 < states { v[i + 1] } else { 0.0 };
            *slot = 0.5 * v[i] + 0.25 * (left + right);
        }
        std::mem::swap(&mut v, &mut next);
        let mass: f64 = v.iter().sum();
        if mass < 1e-280 {
            if mass == 0.0 {
                return f64::NEG_INFINITY;
            }
            log_scale += mass.ln();
            for x in v.iter_mut() {
                *x /= mass;
            }
        }
    }
    let mass: f64 = v.iter().sum();
    log_scale + mass.ln()
}

/// `P(R_n subset [-m, m])` as a plain probability (0 when it underflows;
/// use [`confine_log_prob`] in that regime).
pub fn confine_prob_exact(q: ConfineQuery) -> f64 {
    confine_log_prob(q).exp()
}

/// Asymptotic decay rate per step: `-log lambda_max` where
/// `lambda_max = 1/2 + 1/2 cos(pi / (2m + 2))` is the top eigenvalue of the
/// killed chain. `rate * m^2 -> pi^2 / 16` as `m -> infinity`.
pub fn confine_rate(m: u32) -> f64 {
    assert!(m >= 1);
    let lambda = 0.5 + 0.5 * (std::f64::consts::PI / (2.0 * m as f64 + 2.0)).cos();
    -lambda.ln()
}

/// Extremes `(min, max)` of one simulated lazy trajectory of length `n`,
/// including the origin.
pub fn sample_lazy_range(n: u64, rng: &mut impl Rng) -> (i64, i64) {
    let mut pos = 0i64;
    let (mut lo, mut hi) = (0i64, 0i64);
    for _ in 0..n {
        pos += lazy_step(rng);
        lo = lo.min(pos);
        hi = hi.max(pos);
    }
    (lo, hi)
}

/// One increment of the projected walk: 0 w.p. 1/2, +-1 w.p. 1/4 each.
pub fn lazy_step(rng: &mut impl Rng) -> i64 {
    match rng.gen_range(0u8..4) {
        0 => 1,
        1 => -1,
        _ => 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    #[test]
    fn one_step_cannot_exit() {
        assert_relative_eq!(confine_prob_exact(ConfineQuery::new(1, 1).unwrap()), 1.0);
        assert_relative_eq!(confine_prob_exact(ConfineQuery::new(0, 5).unwrap()), 1.0);
    }

    /// Oracle: exhaustive enumeration of all 4^n letter patterns.
    fn confine_prob_enumerated(n: u32, m: i64) -> f64 {
        let mut surviving = 0u64;
        for pattern in 0..4u64.pow(n) {
            let mut p = pattern;
            let mut pos = 0i64;
            let mut ok = true;
            for _ in 0..n {
                pos += match p % 4 {
                    0 => 1,
                    1 => -1,
                    _ => 0,
                };
                if pos.abs() > m {
                    ok = false;
                    break;
                }
                p /= 4;
            }
            if ok {
                surviving += 1;
            }
        }
        surviving as f64 / 4f64.powi(n as i32)
    }

    #[test]
    fn two_steps_m1_is_seven_eighths() {
        // 16 equally weighted two-step sign patterns; only (+1,+1) and
        // (-1,-1) exit [-1, 1].
        assert_relative_eq!(confine_prob_enumerated(2, 1), 0.875);
        assert_relative_eq!(confine_prob_exact(ConfineQuery::new(2, 1).unwrap()), 0.875);
    }

    #[test]
    fn solver_matches_enumeration() {
        for (n, m) in [(3u32, 1i64), (5, 1), (6, 2), (8, 2), (9, 3)] {
            let oracle = confine_prob_enumerated(n, m);
            let solved = confine_prob_exact(ConfineQuery::new(n as u64, m as u32).unwrap());
            assert_relative_eq!(solved, oracle, max_relative = 1e-12);
        }
    }

    #[test]
    fn monotone_in_n() {
        let mut prev = 1.0;
        for n in 0..200 {
            let p = confine_prob_exact(ConfineQuery::new(n, 3).unwrap());
            assert!(p <= prev + 1e-15);
            prev = p;
        }
    }

    #[test]
    fn rate_matches_eigenvalue_of_three_state_chain() {
        // lambda_max for m = 1 is 1/2 + sqrt(2)/4.
        let expected = -(0.5 + 2f64.sqrt() / 4.0).ln();
        assert_relative_eq!(confine_rate(1), expected, max_relative = 1e-14);
        assert_relative_eq!(confine_rate(1), 0.15834718382037496, max_relative = 1e-12);
    }

    #[test]
    fn rate_agrees_with_iterated_solver() {
        // exp(-rate) is the per-step decay: P(n)^{1/n} -> lambda_max.
        for m in [1u32, 3] {
            let rate = confine_rate(m);
            let n = 4000u64;
            let log_p = confine_log_prob(ConfineQuery::new(n, m).unwrap());
            let per_step = -log_p / n as f64;
            assert_relative_eq!(per_step, rate, max_relative = 2e-3);
        }
    }

    #[test]
    fn rate_scaling_limit() {
        // rate(m) * m^2 -> pi^2/16; within 2% at m = 100.
        let target = std::f64::consts::PI.powi(2) / 16.0;
        let scaled = confine_rate(100) * 100.0f64.powi(2);
        assert!((scaled - target).abs() / target < 0.02, "scaled {scaled} target {target}");
    }

    #[test]
    fn rate_decreasing_in_m() {
        for m in 1..50 {
            assert!(confine_rate(m) > confine_rate(m + 1));
        }
    }

    #[test]
    fn prob_to_eigen_ratio_converges() {
        // P(n, m) / lambda_max^n approaches a positive constant.
        let m = 3u32;
        let lambda_log = -confine_rate(m);
        let at = |n: u64| (confine_log_prob(ConfineQuery::new(n, m).unwrap()) - n as f64 * lambda_log).exp();
        let (a, b, c) = (at(2000), at(5000), at(10000));
        assert!(a > 0.0 && b > 0.0 && c > 0.0);
        assert!((b - c).abs() < 1e-9, "ratio still drifting: {b} vs {c}");
        assert!((a - c).abs() < 1e-6);
    }

    #[test]
    fn deep_underflow_is_handled() {
        // n * rate around 1.6e5: the raw probability underflows but the log
        // stays finite and tracks the rate.
        let q = ConfineQuery::new(1_000_000, 1).unwrap();
        let log_p = confine_log_prob(q);
        assert!(log_p.is_finite());
        assert_relative_eq!(log_p / q.n as f64, -confine_rate(1), max_relative = 1e-4);
    }

    #[test]
    fn monte_carlo_agrees_with_solver() {
        // n = 200, m = 5, 1e5 replicas within 3 binomial standard errors.
        let (n, m, reps) = (200u64, 5i64, 100_000u64);
        let mut hits = 0u64;
        for rep in 0..reps {
            let mut rng = crate::rng::replica_rng(0xBEEF, rep);
            let (lo, hi) = sample_lazy_range(n, &mut rng);
            if lo >= -m && hi <= m {
                hits += 1;
            }
        }
        let p_hat = hits as f64 / reps as f64;
        let p = confine_prob_exact(ConfineQuery::new(n, m as u32).unwrap());
        let se = (p * (1.0 - p) / reps as f64).sqrt();
        assert!((p_hat - p).abs() <= 3.0 * se, "p_hat {p_hat}, p {p}, se {se}");
    }

    #[test]
    fn range_scales_diffusively() {
        // E[max - min] at n = 1e4 within 10% of twice its value at n = 2500.
        let mean_range = |n: u64, seed: u64| {
            let reps = 3000u64;
            let total: i64 = (0..reps)
                .map(|rep| {
                    let mut rng = crate::rng::replica_rng(seed, rep);
                    let (lo, hi) = sample_lazy_range(n, &mut rng);
                    hi - lo
                })
                .sum();
            total as f64 / reps as f64
        };
        let small = mean_range(2500, 11);
        let large = mean_range(10_000, 12);
        assert!((large - 2.0 * small).abs() / (2.0 * small) < 0.10, "{large} vs 2x{small}");
    }

    #[test]
    fn reflection_symmetry_of_extremes() {
        // distribution of max equals distribution of -min (loose tolerance).
        let reps = 20_000u64;
        let n = 400u64;
        let (mut sum_max, mut sum_negmin) = (0i64, 0i64);
        for rep in 0..reps {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(rep.wrapping_mul(0x9E37));
            let (lo, hi) = sample_lazy_range(n, &mut rng);
            sum_max += hi;
            sum_negmin += -lo;
        }
        let (a, b) = (sum_max as f64 / reps as f64, sum_negmin as f64 / reps as f64);
        assert!((a - b).abs() / a.max(b) < 0.05, "max {a} vs -min {b}");
    }

    #[test]
    fn state_space_guard() {
        assert!(matches!(ConfineQuery::new(1, 600_000), Err(Error::StateSpaceLimit { .. })));
    }
}
