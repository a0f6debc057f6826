//! Scaling sequences `alpha_1 <= alpha_2 <= ...` and their partial sums.
//!
//! A scaling rule fixes the half-lengths of the cycles at every level of the
//! bubble graph. `s_k = alpha_1 + ... + alpha_k + k` is the distance from the
//! root to the start of a level-(k+1) cycle, with `s_0 = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Levels are capped so positions (`< 2 alpha_k`) and ball-volume bounds fit
/// comfortably in 64/128 bits. Experiments stay far below this.
pub const LEVEL_CAP: u32 = 62;

/// How a scaling sequence is generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RuleKind {
    /// Running maximum of `ceil(2^k / k^2)`.
    ///
    /// The raw sequence `ceil(2^k/k^2)` = 2, 1, 1, 1, 2, ... is not monotone
    /// at small k, which would break the standing assumption
    /// `1 <= alpha_1 <= alpha_2 <= ...`; the running maximum restores
    /// monotonicity and only changes levels k <= 4.
    Canonical,
    /// `alpha_k = ceil(ratio^k)` for a real ratio > 1.
    Geometric { ratio: f64 },
    /// `alpha_k = c` for every level.
    Constant { c: i64 },
    /// A finite, explicitly listed sequence; levels past the end error out.
    Explicit { alphas: Vec<i64> },
}

/// An immutable scaling sequence with all reachable levels precomputed.
///
/// Values are materialized up to [`LEVEL_CAP`] (or until 64-bit overflow) at
/// construction, so lookups are plain reads and the rule can be shared
/// freely across worker threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRule {
    kind: RuleKind,
    /// `alphas[k-1]` is `alpha_k`.
    alphas: Vec<i64>,
    /// `sums[k]` is `s_k`; `sums[0] = 0`.
    sums: Vec<i64>,
    /// True when the sequence is conceptually infinite but got truncated by
    /// the depth cap or by overflow (as opposed to an explicit finite list).
    truncated_by_overflow: bool,
}

/// Result of scanning the growth assumption `d * s_{k-1} <= alpha_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// `min over 2 <= k <= checked_up_to` of `alpha_k / s_{k-1}`.
    pub max_feasible_d: f64,
    /// Least `k` violating the assumption for the queried `d`, if any.
    pub first_violation_k: Option<u32>,
    pub checked_up_to: u32,
}

impl ScalingRule {
    pub fn canonical() -> Self {
        let mut alphas = Vec::with_capacity(LEVEL_CAP as usize);
        let mut running_max: i64 = 1;
        for k in 1..=LEVEL_CAP as u128 {
            let raw = ((1u128 << k) + k * k - 1) / (k * k); // ceil(2^k / k^2)
            running_max = running_max.max(raw as i64);
            alphas.push(running_max);
        }
        Self::from_alphas(RuleKind::Canonical, alphas, true)
    }

    pub fn geometric(ratio: f64) -> Result<Self> {
        if !(ratio > 1.0) || !ratio.is_finite() {
            return Err(Error::InvalidRule(format!(
                "geometric ratio must be a finite real > 1, got {ratio}"
            )));
        }
        let mut alphas = Vec::new();
        let mut truncated = false;
        for k in 1..=LEVEL_CAP {
            let v = ratio.powi(k as i32).ceil();
            if v >= i64::MAX as f64 {
                truncated = true;
                break;
            }
            alphas.push(v as i64);
        }
        Ok(Self::from_alphas(RuleKind::Geometric { ratio }, alphas, truncated || true))
    }

    pub fn constant(c: i64) -> Result<Self> {
        if c < 1 {
            return Err(Error::InvalidRule(format!("constant alpha must be >= 1, got {c}")));
        }
        let alphas = vec![c; LEVEL_CAP as usize];
        Ok(Self::from_alphas(RuleKind::Constant { c }, alphas, true))
    }

    pub fn explicit(alphas: Vec<i64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::InvalidRule("explicit sequence is empty".into()));
        }
        if alphas.len() > LEVEL_CAP as usize {
            return Err(Error::DepthCapExceeded { level: alphas.len() as u32, cap: LEVEL_CAP });
        }
        if alphas[0] < 1 {
            return Err(Error::InvalidRule(format!("alpha_1 must be >= 1, got {}", alphas[0])));
        }
        if let Some(w) = alphas.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::InvalidRule(format!(
                "sequence must be nondecreasing; alpha_{} = {} > alpha_{} = {}",
                w + 1,
                alphas[w],
                w + 2,
                alphas[w + 1]
            )));
        }
        Ok(Self::from_alphas(RuleKind::Explicit { alphas: alphas.clone() }, alphas, false))
    }

    fn from_alphas(kind: RuleKind, mut alphas: Vec<i64>, infinite: bool) -> Self {
        // Partial sums s_k = alpha_1 + ... + alpha_k + k, dropping levels where
        // they would overflow i64.
        let mut sums = vec![0i64];
        let mut keep = alphas.len();
        for (i, &a) in alphas.iter().enumerate() {
            let prev = sums[i];
            match prev.checked_add(a).and_then(|v| v.checked_add(1)) {
                Some(s) => sums.push(s),
                None => {
                    keep = i;
                    break;
                }
            }
        }
        alphas.truncate(keep);
        sums.truncate(keep + 1);
        ScalingRule { kind, alphas, sums, truncated_by_overflow: infinite }
    }

    pub fn kind(&self) -> &RuleKind {
        &self.kind
    }

    /// Number of levels with materialized values.
    pub fn defined_levels(&self) -> u32 {
        self.alphas.len() as u32
    }

    /// `alpha_k` for `k >= 1`.
    pub fn alpha_at(&self, k: u32) -> Result<i64> {
        if k == 0 {
            return Err(Error::InvalidParameter("alpha_at requires k >= 1".into()));
        }
        if let Some(&a) = self.alphas.get(k as usize - 1) {
            return Ok(a);
        }
        if k > LEVEL_CAP {
            Err(Error::DepthCapExceeded { level: k, cap: LEVEL_CAP })
        } else if self.truncated_by_overflow {
            Err(Error::AlphaOverflow { level: k })
        } else {
            Err(Error::LevelOutOfRange { level: k, defined: self.defined_levels() })
        }
    }

    /// `s_k = alpha_1 + ... + alpha_k + k`, with `s_0 = 0`.
    pub fn s_at(&self, k: u32) -> Result<i64> {
        if let Some(&s) = self.sums.get(k as usize) {
            return Ok(s);
        }
        // Reuse alpha_at's error taxonomy for the first missing level.
        self.alpha_at(self.defined_levels() + 1).map(|_| unreachable!())
    }

    /// Cycle length `2 alpha_k` at level `k`.
    pub fn cycle_len(&self, k: u32) -> Result<i64> {
        Ok(2 * self.alpha_at(k)?)
    }

    /// Largest level whose start lies within distance `r` of the root, i.e.
    /// the `k >= 1` with `s_{k-1} <= r < s_k` (errors if the sequence ends
    /// before `s_k` exceeds `r`).
    pub fn level_of_radius(&self, r: i64) -> Result<u32> {
        debug_assert!(r >= 0);
        for k in 1..=self.defined_levels() {
            if self.sums[k as usize] > r {
                return Ok(k);
            }
        }
        self.alpha_at(self.defined_levels() + 1).map(|_| unreachable!())
    }

    /// Scan `k = 2..=k_max` for the growth assumption `d * s_{k-1} <= alpha_k`.
    ///
    /// `max_feasible_d` is independent of the queried `d`. Both the violation
    /// test and the minimum use the same floating ratio `alpha_k / s_{k-1}`,
    /// so "no violation" is exactly equivalent to `d <= max_feasible_d`.
    pub fn check_assumption(&self, d: f64, k_max: u32) -> Result<AssumptionReport> {
        if k_max < 2 {
            return Err(Error::InvalidParameter("check_assumption requires k_max >= 2".into()));
        }
        if !(d > 0.0) {
            return Err(Error::InvalidParameter(format!("d must be positive, got {d}")));
        }
        let up_to = k_max.min(self.defined_levels());
        if up_to < 2 {
            return Err(Error::LevelOutOfRange { level: 2, defined: self.defined_levels() });
        }
        let mut max_feasible = f64::INFINITY;
        let mut first_violation = None;
        for k in 2..=up_to {
            let ratio = self.alpha_at(k)? as f64 / self.s_at(k - 1)? as f64;
            max_feasible = max_feasible.min(ratio);
            if first_violation.is_none() && d > ratio {
                first_violation = Some(k);
            }
        }
        Ok(AssumptionReport {
            max_feasible_d: max_feasible,
            first_violation_k: first_violation,
            checked_up_to: up_to,
        })
    }
}
