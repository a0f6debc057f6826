//! Inverted orbits of words under the group action on the bubble graph.
//!
//! For a word `w = g_1 ... g_n` the inverted orbit is the point sequence
//! `u_k = o.(g_1 ... g_k)^{-1}`: the sites where the switch-walk-switch walk
//! on the wreath product deposits its lamp toggles. It is not the trajectory
//! of any single walking particle, and unlike the ordinary orbit it extends
//! at the *front* of the word, which is what makes it worth three separate
//! implementations here:
//!
//! - [`inverted_orbit_oracle`]: the definition, one reversed-inverse prefix
//!   per point, Theta(n^2) letter applications; the arbiter for everything.
//! - [`inverted_orbit_tracked`]: forward images of a tracked ball around the
//!   root with a reverse lookup, O(n * |ball|) plus replay on growth.
//! - [`inverted_orbit_scan`]: a prefix-inverse recursion that only ever
//!   queries the inverse action on the unit ball around the root, costing
//!   about n^2/4 letter applications total with O(1) state. This is what the
//!   big simulations use.

use std::collections::HashSet;
use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ball, dist_exact, Letter, VertexAddress, ROOT};
use crate::rng::replica_rng;
use crate::scaling::ScalingRule;
use crate::zline::{confine_log_prob, confine_rate, ConfineQuery};

/// Default cap for the tracked-front point set.
pub const DEFAULT_TRACKING_LIMIT: usize = 20_000_000;

/// Rejection sampling is considered feasible while `n * rate(m)` stays below
/// this (acceptance probability roughly e^-12 ~ 6e-6).
pub const REJECTION_LOG_FEASIBILITY: f64 = 12.0;

/// A finite sequence of generator letters. Free reduction is a separate,
/// explicit operation; words are never reduced implicitly.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Word(pub Vec<Letter>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn push(&mut self, letter: Letter) {
        self.0.push(letter);
    }

    /// `w^{-1}`: reversed letters, each inverted.
    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().map(|l| l.inverse()).collect())
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut letters = self.0.clone();
        letters.extend_from_slice(&other.0);
        Word(letters)
    }

    /// Parses a compact word like `aAbB` (capital = inverse).
    pub fn parse(s: &str) -> Result<Word> {
        s.chars().map(Letter::from_char).collect::<Result<Vec<_>>>().map(Word)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.0 {
            write!(f, "{}", l.to_char())?;
        }
        Ok(())
    }
}

impl std::ops::Deref for Word {
    type Target = [Letter];
    fn deref(&self) -> &[Letter] {
        &self.0
    }
}

/// `n` i.i.d. uniform letters: one step of the simple random walk on the
/// group per letter.
pub fn sample_word(n: usize, rng: &mut impl Rng) -> Word {
    Word((0..n).map(|_| Letter::ALL[rng.gen_range(0..4)]).collect())
}

/// The points `u_0 = o, u_1, ..., u_n` of an inverted orbit with summary
/// statistics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvertedOrbitTrace {
    pub points: Vec<VertexAddress>,
    /// `max_k d(o, u_k)`.
    pub radius: i64,
    pub distinct_count: usize,
}

impl InvertedOrbitTrace {
    fn from_points(rule: &ScalingRule, points: Vec<VertexAddress>) -> Result<Self> {
        let mut radius = 0;
        for p in &points {
            radius = radius.max(p.dist_to_root(rule)?);
        }
        let distinct_count = points.iter().collect::<HashSet<_>>().len();
        Ok(InvertedOrbitTrace { points, radius, distinct_count })
    }

    pub fn point_set(&self) -> HashSet<VertexAddress> {
        self.points.iter().copied().collect()
    }
}

/// Reference implementation straight from the definition: `u_k` is computed
/// independently for each `k` by applying the reversed-inverse prefix to the
/// root. Theta(n^2); authoritative in any discrepancy.
pub fn inverted_orbit_oracle(rule: &ScalingRule, w: &Word) -> Result<InvertedOrbitTrace> {
    let mut points = Vec::with_capacity(w.len() + 1);
    points.push(ROOT);
    for k in 1..=w.len() {
        let mut x = ROOT;
        for g in w.letters()[..k].iter().rev() {
            x = x.apply(rule, g.inverse())?;
        }
        points.push(x);
    }
    InvertedOrbitTrace::from_points(rule, points)
}

/// Extra observability for the tracked-front algorithm.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrackedRun {
    pub trace: InvertedOrbitTrace,
    /// Number of times the tracked ball had to grow.
    pub expansions: u32,
    pub final_radius: i64,
}

/// Tracked-front algorithm: maintains forward images `psi_k(x) = x.(g_1...g_k)`
/// for every `x` in a tracked ball `B_R(o)`, one letter application per
/// tracked point per step. The unique `x` with `psi_k(x) = o` is `u_k`; if no
/// tracked point maps to the root the ball grows and the prefix is replayed
/// on the new points.
pub fn inverted_orbit_tracked(
    rule: &ScalingRule,
    w: &Word,
    r0: i64,
    limit: usize,
) -> Result<TrackedRun> {
    assert!(r0 >= 1);
    let mut radius = r0;
    let mut pts = ball(rule, ROOT, radius, limit)?;
    let mut images = pts.clone();
    let mut known: HashSet<VertexAddress> = pts.iter().copied().collect();
    let mut points = Vec::with_capacity(w.len() + 1);
    points.push(ROOT);
    let mut expansions = 0u32;

    for (k, &g) in w.letters().iter().enumerate() {
        let mut preimage: Option<VertexAddress> = None;
        for (x, img) in pts.iter().zip(images.iter_mut()) {
            *img = img.apply(rule, g)?;
            if *img == ROOT {
                preimage = Some(*x);
            }
        }
        let u_k = match preimage {
            Some(x) => x,
            None => {
                // u_k escaped the tracked ball; grow until it is covered.
                // d(o, u_k) <= k + 1 always bounds the search.
                let mut found = None;
                while found.is_none() {
                    radius = (radius + radius / 2 + 1).min(k as i64 + 1);
                    expansions += 1;
                    let grown = ball(rule, ROOT, radius, limit)?;
                    if grown.len() + pts.len() > limit {
                        return Err(Error::TrackingLimitExceeded { limit });
                    }
                    for x in grown {
                        if known.insert(x) {
                            // replay the whole prefix on the new point
                            let img = x.apply_word(rule, &w.letters()[..=k])?;
                            pts.push(x);
                            images.push(img);
                            if img == ROOT {
                                found = Some(x);
                            }
                        }
                    }
                    if found.is_none() && radius > k as i64 + 1 {
                        // cannot happen on a well-formed rule; defend anyway
                        return Err(Error::TrackingLimitExceeded { limit });
                    }
                }
                found.unwrap()
            }
        };
        points.push(u_k);
    }
    Ok(TrackedRun {
        trace: InvertedOrbitTrace::from_points(rule, points)?,
        expansions,
        final_radius: radius,
    })
}

/// Prefix-inverse scan.
///
/// Write `chi_k(y) = y.(g_1...g_k)^{-1}`, so `u_k = chi_k(o)`. Then
/// `chi_{k+1}(y) = chi_k(y.g_{k+1}^{-1})`, and the only arguments ever needed
/// are the root and its unit-ball neighbours. The map is kept on that tiny
/// domain; when a needed argument falls outside it, `chi_k` is recomputed
/// from scratch in O(k). Only the `a`-letters force a recomputation, so the
/// total work is about n^2/4 letter applications with O(1) state.
pub fn inverted_orbit_scan(rule: &ScalingRule, w: &Word) -> Result<InvertedOrbitTrace> {
    let scan = OrbitScan::trace(rule, w)?;
    InvertedOrbitTrace::from_points(rule, scan)
}

/// Incremental form of the prefix-inverse scan, usable as a streaming
/// iterator by the wreath simulation.
pub struct OrbitScan<'a> {
    rule: &'a ScalingRule,
    /// letters consumed so far
    prefix: Vec<Letter>,
    /// domain points: the root's closed unit ball
    domain: Vec<VertexAddress>,
    /// chi_k evaluated on `domain`
    values: Vec<VertexAddress>,
}

impl<'a> OrbitScan<'a> {
    pub fn new(rule: &'a ScalingRule) -> Result<Self> {
        let mut domain = vec![ROOT];
        for nbr in ROOT.neighbors(rule)? {
            domain.push(nbr);
        }
        let values = domain.clone(); // chi_0 = id
        Ok(OrbitScan { rule, prefix: Vec::new(), domain, values })
    }

    /// Current orbit point `u_k = chi_k(o)`.
    pub fn current(&self) -> VertexAddress {
        self.values[0]
    }

    pub fn steps(&self) -> usize {
        self.prefix.len()
    }

    /// Recompute `chi_k(z)` from scratch: apply the reversed-inverse prefix.
    fn scratch(&self, z: VertexAddress) -> Result<VertexAddress> {
        let mut x = z;
        for g in self.prefix.iter().rev() {
            x = x.apply(self.rule, g.inverse())?;
        }
        Ok(x)
    }

    /// Advance by one letter; returns the new orbit point.
    pub fn step(&mut self, g: Letter) -> Result<VertexAddress> {
        let g_inv = g.inverse();
        let mut new_values = Vec::with_capacity(self.domain.len());
        for &y in &self.domain {
            let z = y.apply(self.rule, g_inv)?;
            let val = match self.domain.iter().position(|&d| d == z) {
                Some(i) => self.values[i],
                None => self.scratch(z)?,
            };
            new_values.push(val);
        }
        self.values = new_values;
        self.prefix.push(g);
        Ok(self.current())
    }

    fn trace(rule: &'a ScalingRule, w: &Word) -> Result<Vec<VertexAddress>> {
        let mut scan = OrbitScan::new(rule)?;
        let mut points = Vec::with_capacity(w.len() + 1);
        points.push(scan.current());
        for &g in w.letters() {
            points.push(scan.step(g)?);
        }
        Ok(points)
    }
}

/// The representative displacement test set `T(r) = B(o, s_j + 4r)` where `j`
/// is the smallest level with `alpha_j > 4r` (clamped to the defined levels
/// for finite explicit rules).
pub fn displacement_test_set(
    rule: &ScalingRule,
    test_radius: i64,
    limit: usize,
) -> Result<Vec<VertexAddress>> {
    let j = level_above(rule, 4 * test_radius);
    ball(rule, ROOT, rule.s_at(j)?.saturating_add(4 * test_radius), limit)
}

/// Smallest level with `alpha_j > threshold`, clamped to the defined levels.
fn level_above(rule: &ScalingRule, threshold: i64) -> u32 {
    for j in 1..=rule.defined_levels() {
        if rule.alpha_at(j).map(|a| a > threshold).unwrap_or(false) {
            return j;
        }
    }
    rule.defined_levels()
}

/// Collapsed displacement set: same coverage of local isomorphism types as
/// [`displacement_test_set`] but with one representative branching window per
/// level above the crossable region.
///
/// A word whose projected trajectory has width at most 2r can carry a
/// particle across a cycle arc only when `alpha_k <= 2r` (the arc crossings
/// may alternate in sign, so arbitrarily many small levels can be crossed).
/// Within those "crossable" levels the particle's route reads the branching
/// orientation bits of every cycle it crosses, so all copies up to
/// `j2 = max{k : alpha_k <= 2r}` must be kept: that is the root ball of
/// radius `s_{j2} + 4r`. At levels above j2 the particle is pinned near a
/// single junction, whose 4r-neighbourhood is label-isomorphic across
/// same-level copies, so one window per level up to the first level with
/// `alpha_j > 4r` suffices (beyond that every junction looks alike).
/// Validated against the full set on the extremal word of every conditioned
/// run and by deep spot checks.
pub fn collapsed_displacement_set(
    rule: &ScalingRule,
    test_radius: i64,
    limit: usize,
) -> Result<Vec<VertexAddress>> {
    let j = level_above(rule, 4 * test_radius);
    let mut j2 = 0u32;
    for k in 1..=rule.defined_levels() {
        if rule.alpha_at(k)? <= 2 * test_radius {
            j2 = k;
        } else {
            break;
        }
    }
    let root_radius = rule.s_at(j2)?.saturating_add(4 * test_radius);
    let mut set: HashSet<VertexAddress> =
        ball(rule, ROOT, root_radius, limit)?.into_iter().collect();
    for k in j2 + 1..=j {
        if rule.alpha_at(k + 1).is_ok() {
            for v in crate::graph::branching_window(rule, k, 4 * test_radius, limit)? {
                set.insert(v);
            }
        }
    }
    let mut out: Vec<_> = set.into_iter().collect();
    out.sort_unstable();
    Ok(out)
}

/// `max_{x in T(test_radius)} d(x, x.w)`, exact on the test set.
pub fn max_displacement(rule: &ScalingRule, w: &Word, test_radius: i64) -> Result<i64> {
    let set = displacement_test_set(rule, test_radius, crate::graph::DEFAULT_BALL_LIMIT)?;
    max_displacement_over(rule, w, &set)
}

/// Maximum displacement of `w` over an explicit vertex set.
///
/// Images are advanced one letter at a time across the whole set, then each
/// point is compared with its image via the exact structural distance.
pub fn max_displacement_over(
    rule: &ScalingRule,
    w: &Word,
    set: &[VertexAddress],
) -> Result<i64> {
    let mut images: Vec<VertexAddress> = set.to_vec();
    for &g in w.letters() {
        for img in images.iter_mut() {
            *img = img.apply(rule, g)?;
        }
    }
    let mut max = 0i64;
    for (&x, &y) in set.iter().zip(images.iter()) {
        if x != y {
            max = max.max(dist_exact(rule, x, y)?);
        }
    }
    Ok(max)
}

/// Running min/max/end of the integer projection of a word.
pub fn projection_extremes(w: &Word) -> (i64, i64, i64) {
    let (mut pos, mut lo, mut hi) = (0i64, 0i64, 0i64);
    for &g in w.letters() {
        pos += crate::zline::project_letter(g);
        lo = lo.min(pos);
        hi = hi.max(pos);
    }
    (lo, hi, pos)
}

/// Exact check that every contiguous subword has projected range within
/// `[-2m, 2m]`. For a trajectory `z_k`, the subword from k to l ranges over
/// `z_j - z_k`, so the condition is exactly `max z - min z <= 2m`.
pub fn subwords_within_double_range(w: &Word, m: i64) -> bool {
    let (lo, hi, _) = projection_extremes(w);
    hi - lo <= 2 * m
}

/// How conditioned samples are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CondMode {
    /// Draw unconditioned words, keep those whose projection stays in
    /// [-m, m]; exact conditional law, feasible while the acceptance
    /// probability is moderate.
    Rejection,
    /// Sample the projected trajectory directly from its exact conditional
    /// law via backward survival probabilities, then dress the zero steps
    /// with fair b/b^-1 letters. Every sample is accepted; same law as
    /// rejection.
    Bridge,
    /// Rejection while `n * rate(m) <= 12`, bridge past that.
    Auto,
}

/// Parameters of a conditioned-orbit run.
#[derive(Debug, Clone)]
pub struct CondConfig {
    pub n: usize,
    pub m: u32,
    /// Attempts in rejection mode; direct samples in bridge mode.
    pub reps: u64,
    pub seed: u64,
    pub mode: CondMode,
    /// Validate the extremal word against the full displacement set.
    pub full_set_validation: bool,
}

impl CondConfig {
    pub fn new(n: usize, m: u32, reps: u64, seed: u64) -> Self {
        CondConfig { n, m, reps, seed, mode: CondMode::Auto, full_set_validation: true }
    }
}

/// Per-accepted-word statistics.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AcceptedSample {
    pub replica: u64,
    pub orbit_radius: i64,
    pub max_displacement: i64,
    pub distinct_count: usize,
}

/// Summary of a conditioned confinement experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfinementReport {
    pub n: usize,
    pub m: u32,
    pub reps: u64,
    pub accepted: u64,
    pub max_orbit_radius_over_m: f64,
    pub max_displacement_over_m: f64,
    /// max of the two ratios above, over accepted samples only.
    pub empirical_k: f64,
    /// Exact `log P(A_{n,m})`, reported alongside regardless of mode.
    pub log_acceptance_prob: f64,
    /// Mode actually used (after Auto resolution).
    pub mode: CondMode,
    /// True when the extremal word's displacement over the full test set
    /// agreed with the collapsed-set value (or validation was skipped).
    pub full_set_check: bool,
}

/// Samples words conditioned on the confinement event `A_{n,m}`, recording
/// orbit radius and displacement statistics for the accepted words.
///
/// Every accepted word is verified exactly: its projection must stay within
/// [-m, m] and (a consequence) all contiguous subwords within [-2m, 2m].
pub fn conditioned_orbit_stats(
    rule: &ScalingRule,
    cfg: &CondConfig,
) -> Result<(ConfinementReport, Vec<AcceptedSample>)> {
    let q = ConfineQuery::new(cfg.n as u64, cfg.m)?;
    let log_p = confine_log_prob(q);
    let mode = match cfg.mode {
        CondMode::Auto => {
            if cfg.n as f64 * confine_rate(cfg.m) <= REJECTION_LOG_FEASIBILITY {
                CondMode::Rejection
            } else {
                CondMode::Bridge
            }
        }
        m => m,
    };

    let m = cfg.m as i64;
    let disp_set = collapsed_displacement_set(rule, m, crate::graph::DEFAULT_BALL_LIMIT)?;
    let bridge = if mode == CondMode::Bridge { Some(BridgeSampler::new(q)) } else { None };

    struct PerWord {
        sample: AcceptedSample,
        word: Word,
    }

    let per_word: Vec<Option<PerWord>> = (0..cfg.reps)
        .into_par_iter()
        .map(|replica| -> Result<Option<PerWord>> {
            let mut rng = replica_rng(cfg.seed, replica);
            let word = match mode {
                CondMode::Rejection => match sample_word_rejected(cfg.n, m, &mut rng) {
                    Some(w) => w,
                    None => return Ok(None),
                },
                CondMode::Bridge => bridge.as_ref().unwrap().sample(&mut rng),
                CondMode::Auto => unreachable!(),
            };
            // exact confinement re-check, independent of the sampler
            let (lo, hi, _) = projection_extremes(&word);
            assert!(lo >= -m && hi <= m, "sampler produced an unconfined word");
            assert!(subwords_within_double_range(&word, m));
            let trace = inverted_orbit_scan(rule, &word)?;
            let disp = max_displacement_over(rule, &word, &disp_set)?;
            Ok(Some(PerWord {
                sample: AcceptedSample {
                    replica,
                    orbit_radius: trace.radius,
                    max_displacement: disp,
                    distinct_count: trace.distinct_count,
                },
                word,
            }))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut samples = Vec::new();
    let mut max_radius = 0i64;
    let mut max_disp = 0i64;
    let mut argmax_word: Option<Word> = None;
    for pw in per_word.into_iter().flatten() {
        max_radius = max_radius.max(pw.sample.orbit_radius);
        if pw.sample.max_displacement >= max_disp {
            max_disp = pw.sample.max_displacement;
            argmax_word = Some(pw.word);
        }
        samples.push(pw.sample);
    }
    let accepted = samples.len() as u64;
    if accepted == 0 {
        return Err(Error::NoAcceptedSamples { log_prob: log_p });
    }

    // Validate the extremal word against the full (uncollapsed) test set.
    let mut full_ok = true;
    if cfg.full_set_validation {
        if let Some(w) = &argmax_word {
            let full = max_displacement(rule, w, m)?;
            if full > max_disp {
                full_ok = false;
                max_disp = full;
            }
        }
    }

    let mf = cfg.m as f64;
    let report = ConfinementReport {
        n: cfg.n,
        m: cfg.m,
        reps: cfg.reps,
        accepted,
        max_orbit_radius_over_m: max_radius as f64 / mf,
        max_displacement_over_m: max_disp as f64 / mf,
        empirical_k: (max_radius as f64 / mf).max(max_disp as f64 / mf),
        log_acceptance_prob: log_p,
        mode,
        full_set_check: full_ok,
    };
    Ok((report, samples))
}

/// One rejection attempt: draw letters, abort as soon as the projection
/// leaves [-m, m].
fn sample_word_rejected(n: usize, m: i64, rng: &mut impl Rng) -> Option<Word> {
    let mut letters = Vec::with_capacity(n);
    let mut pos = 0i64;
    for _ in 0..n {
        let g = Letter::ALL[rng.gen_range(0..4)];
        pos += crate::zline::project_letter(g);
        if pos.abs() > m {
            return None;
        }
        letters.push(g);
    }
    Some(Word(letters))
}

/// Exact conditional sampler for the confined lazy walk (Doob h-transform
/// with the time-dependent survival function).
pub struct BridgeSampler {
    m: i64,
    /// `phi[t][i]`: survival probability for t more steps from state i-m,
    /// renormalized per row (row scaling cancels in the step weights).
    phi: Vec<Vec<f64>>,
}

impl BridgeSampler {
    pub fn new(q: ConfineQuery) -> Self {
        let states = 2 * q.m as usize + 1;
        let mut phi = Vec::with_capacity(q.n as usize + 1);
        phi.push(vec![1.0f64; states]);
        for t in 1..=q.n as usize {
            let prev = &phi[t - 1];
            let mut row = vec![0.0f64; states];
            for (i, slot) in row.iter_mut().enumerate() {
                let left = if i > 0 { prev[i - 1] } else { 0.0 };
                let right = if i + 1 < states { prev[i + 1] } else { 0.0 };
                *slot = 0.5 * prev[i] + 0.25 * (left + right);
            }
            let max = row.iter().cloned().fold(0.0f64, f64::max);
            for x in row.iter_mut() {
                *x /= max;
            }
            phi.push(row);
        }
        BridgeSampler { m: q.m as i64, phi }
    }

    /// Draws one word of length n from the exact conditional law given
    /// `A_{n,m}`. Projected +-1 steps become a / a^-1; holds become b or
    /// b^-1 with equal probability (the conditioning only sees the
    /// projection, so the choice stays uniform).
    pub fn sample(&self, rng: &mut impl Rng) -> Word {
        let n = self.phi.len() - 1;
        let mut letters = Vec::with_capacity(n);
        let mut i = self.m as usize; // state index of the origin
        let states = 2 * self.m as usize + 1;
        for t in (1..=n).rev() {
            let prev = &self.phi[t - 1];
            let w_hold = 0.5 * prev[i];
            let w_right = if i + 1 < states { 0.25 * prev[i + 1] } else { 0.0 };
            let w_left = if i > 0 { 0.25 * prev[i - 1] } else { 0.0 };
            let total = w_hold + w_right + w_left;
            let u: f64 = rng.gen::<f64>() * total;
            if u < w_right {
                i += 1;
                letters.push(Letter::A);
            } else if u < w_right + w_left {
                i -= 1;
                letters.push(Letter::AInv);
            } else if rng.gen::<bool>() {
                letters.push(Letter::B);
            } else {
                letters.push(Letter::BInv);
            }
        }
        Word(letters)
    }
}

/// Maximum displacement of `w` over `count` random vertices drawn from deep
/// levels (beyond the representative test set); a spot check that the
/// type-based test set really attains the maximum.
pub fn deep_displacement_spot_check(
    rule: &ScalingRule,
    w: &Word,
    count: usize,
    rng: &mut impl Rng,
) -> Result<i64> {
    let deepest = rule.defined_levels().min(24);
    let mut max = 0i64;
    for _ in 0..count {
        let level = rng.gen_range(14..=deepest);
        let mut path = crate::graph::BitPath::EMPTY;
        for _ in 1..level {
            path = path.push(rng.gen::<bool>());
        }
        let len = rule.cycle_len(level)?;
        let x = VertexAddress::new(rule, path, rng.gen_range(0..len))?;
        let y = x.apply_word(rule, w)?;
        if x != y {
            max = max.max(dist_exact(rule, x, y)?);
        }
    }
    Ok(max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scaling::ScalingRule;
    use rand::SeedableRng;

    fn fig1() -> ScalingRule {
        ScalingRule::explicit(vec![2, 3, 4]).unwrap()
    }

    fn addr(rule: &ScalingRule, s: &str) -> VertexAddress {
        VertexAddress::parse(rule, s).unwrap()
    }

    #[test]
    fn oracle_definition_examples() {
        let rule = fig1();
        let t = inverted_orbit_oracle(&rule, &Word::empty()).unwrap();
        assert_eq!(t.points, vec![ROOT]);

        // o.g_1^{-1} with g_1 = a
        let t = inverted_orbit_oracle(&rule, &Word::parse("a").unwrap()).unwrap();
        assert_eq!(t.points, vec![ROOT, addr(&rule, ":3")]);

        // b^{-1} fixes o, so u_2 = u_1
        let t = inverted_orbit_oracle(&rule, &Word::parse("ab").unwrap()).unwrap();
        assert_eq!(t.points, vec![ROOT, addr(&rule, ":3"), addr(&rule, ":3")]);
        assert_eq!(t.distinct_count, 2);
    }

    #[test]
    fn scan_and_tracked_match_oracle_on_examples() {
        let rule = fig1();
        for s in ["", "a", "ab", "aabA", "bbbaA"] {
            let w = Word::parse(s).unwrap();
            let oracle = inverted_orbit_oracle(&rule, &w).unwrap();
            assert_eq!(inverted_orbit_scan(&rule, &w).unwrap(), oracle, "scan {s:?}");
            let tracked = inverted_orbit_tracked(&rule, &w, 1, 1_000_000).unwrap();
            assert_eq!(tracked.trace, oracle, "tracked {s:?}");
        }
    }

    #[test]
    fn scan_and_tracked_match_oracle_on_random_words() {
        let rule = ScalingRule::canonical();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(314);
        for i in 0..120 {
            let n = 1 + (i * 7) % 90;
            let w = sample_word(n, &mut rng);
            let oracle = inverted_orbit_oracle(&rule, &w).unwrap();
            assert_eq!(inverted_orbit_scan(&rule, &w).unwrap(), oracle);
            assert_eq!(inverted_orbit_tracked(&rule, &w, 2, 1_000_000).unwrap().trace, oracle);
        }
    }

    #[test]
    fn all_a_word_forces_tracking_expansion() {
        let rule = ScalingRule::canonical();
        let w = Word(vec![Letter::A; 12]);
        let run = inverted_orbit_tracked(&rule, &w, 1, 1_000_000).unwrap();
        assert!(run.expansions >= 1, "orbit reaches distance 2 on the root cycle");
        assert_eq!(run.trace, inverted_orbit_oracle(&rule, &w).unwrap());
    }

    #[test]
    fn inverted_differs_from_ordinary_orbit() {
        // Search the shortest witness; regression-pin it.
        let rule = fig1();
        let mut witness = None;
        'outer: for n in 1..=6usize {
            for code in 0..4u32.pow(n as u32) {
                let mut c = code;
                let mut w = Word::empty();
                for _ in 0..n {
                    w.push(Letter::ALL[(c % 4) as usize]);
                    c /= 4;
                }
                let inverted = inverted_orbit_oracle(&rule, &w).unwrap().point_set();
                let mut ordinary = HashSet::from([ROOT]);
                let mut x = ROOT;
                for &g in w.letters() {
                    x = x.apply(&rule, g).unwrap();
                    ordinary.insert(x);
                }
                if inverted != ordinary {
                    witness = Some(w);
                    break 'outer;
                }
            }
        }
        // "a" already separates them: inverted {o, o.a^-1}, ordinary {o, o.a}.
        assert_eq!(witness, Some(Word::parse("a").unwrap()));
    }

    #[test]
    fn sample_word_statistics() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        assert!(sample_word(0, &mut rng).is_empty());

        let n = 1_000_000usize;
        let w = sample_word(n, &mut rng);
        let mut counts = [0u64; 4];
        for &g in w.letters() {
            counts[Letter::ALL.iter().position(|&l| l == g).unwrap()] += 1;
        }
        let se = (n as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * 0.25).abs() <= 4.0 * se, "count {c}");
        }

        // fixed seed -> identical word
        let mut r1 = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let mut r2 = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        assert_eq!(sample_word(64, &mut r1), sample_word(64, &mut r2));
    }

    #[test]
    fn displacement_examples() {
        let rule = fig1();
        assert_eq!(max_displacement(&rule, &Word::empty(), 1).unwrap(), 0);
        assert_eq!(max_displacement(&rule, &Word::parse("a").unwrap(), 1).unwrap(), 1);
        assert_eq!(max_displacement(&rule, &Word::parse("aA").unwrap(), 1).unwrap(), 0);
    }

    #[test]
    fn collapsed_set_is_subset_of_full() {
        let rule = ScalingRule::canonical();
        let full: HashSet<_> =
            displacement_test_set(&rule, 2, 10_000_000).unwrap().into_iter().collect();
        let collapsed = collapsed_displacement_set(&rule, 2, 10_000_000).unwrap();
        assert!(!collapsed.is_empty());
        for v in &collapsed {
            assert!(full.contains(v), "collapsed point {v} outside the full set");
        }
    }

    #[test]
    fn collapsed_matches_full_on_confined_words() {
        let rule = ScalingRule::canonical();
        let m = 2i64;
        let collapsed = collapsed_displacement_set(&rule, m, 10_000_000).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5150);
        let mut checked = 0;
        while checked < 12 {
            if let Some(w) = sample_word_rejected(60, m, &mut rng) {
                let full = max_displacement(&rule, &w, m).unwrap();
                let coll = max_displacement_over(&rule, &w, &collapsed).unwrap();
                assert_eq!(full, coll, "word {w}");
                checked += 1;
            }
        }
    }

    #[test]
    fn small_m_accepts_everything() {
        // m >= n: every word accepted, orbit radius <= n.
        let rule = ScalingRule::canonical();
        let cfg = CondConfig { full_set_validation: false, ..CondConfig::new(8, 8, 64, 7) };
        let (report, samples) = conditioned_orbit_stats(&rule, &cfg).unwrap();
        assert_eq!(report.accepted, 64);
        assert_eq!(report.mode, CondMode::Rejection);
        for s in samples {
            assert!(s.orbit_radius <= 8);
        }
    }

    #[test]
    fn rejection_acceptance_rate_matches_exact_probability() {
        let rule = ScalingRule::canonical();
        let (n, m, reps) = (100usize, 3u32, 40_000u64);
        let cfg = CondConfig {
            mode: CondMode::Rejection,
            full_set_validation: false,
            ..CondConfig::new(n, m, reps, 21)
        };
        let (report, _) = conditioned_orbit_stats(&rule, &cfg).unwrap();
        let p = confine_log_prob(ConfineQuery::new(n as u64, m).unwrap()).exp();
        let se = (p * (1.0 - p) / reps as f64).sqrt();
        let p_hat = report.accepted as f64 / reps as f64;
        assert!((p_hat - p).abs() <= 3.0 * se, "p_hat {p_hat} vs exact {p}");
    }

    #[test]
    fn bridge_sampler_matches_rejection_law() {
        // Same conditional law: compare letter frequencies and mean orbit
        // radius between the two samplers at a feasible size.
        let rule = ScalingRule::canonical();
        let (n, m) = (60usize, 2u32);
        let reps = 30_000u64;

        let mut rej_radius = 0f64;
        let mut rej_a_count = 0u64;
        let mut rej_samples = 0u64;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(910);
        while rej_samples < 4000 {
            if let Some(w) = sample_word_rejected(n, m as i64, &mut rng) {
                rej_radius += inverted_orbit_scan(&rule, &w).unwrap().radius as f64;
                rej_a_count += w.letters().iter().filter(|&&g| g == Letter::A).count() as u64;
                rej_samples += 1;
            }
        }

        let sampler = BridgeSampler::new(ConfineQuery::new(n as u64, m).unwrap());
        let mut br_radius = 0f64;
        let mut br_a_count = 0u64;
        let br_samples = 4000u64;
        for rep in 0..br_samples {
            let mut rng = replica_rng(911, rep);
            let w = sampler.sample(&mut rng);
            let (lo, hi, _) = projection_extremes(&w);
            assert!(lo >= -(m as i64) && hi <= m as i64);
            br_radius += inverted_orbit_scan(&rule, &w).unwrap().radius as f64;
            br_a_count += w.letters().iter().filter(|&&g| g == Letter::A).count() as u64;
        }
        let _ = reps;

        let rej_mean_r = rej_radius / rej_samples as f64;
        let br_mean_r = br_radius / br_samples as f64;
        assert!(
            (rej_mean_r - br_mean_r).abs() / rej_mean_r < 0.05,
            "orbit radius means differ: {rej_mean_r} vs {br_mean_r}"
        );
        let rej_a = rej_a_count as f64 / (rej_samples as f64 * n as f64);
        let br_a = br_a_count as f64 / (br_samples as f64 * n as f64);
        assert!((rej_a - br_a).abs() < 0.01, "a-frequency {rej_a} vs {br_a}");
    }

    #[test]
    fn zero_accepted_reports_no_data() {
        let rule = ScalingRule::canonical();
        // n * rate(1) ~ 47: rejection will accept nothing in 50 attempts.
        let cfg = CondConfig {
            mode: CondMode::Rejection,
            full_set_validation: false,
            ..CondConfig::new(300, 1, 50, 3)
        };
        match conditioned_orbit_stats(&rule, &cfg) {
            Err(Error::NoAcceptedSamples { log_prob }) => assert!(log_prob < -40.0),
            other => panic!("expected NoAcceptedSamples, got {other:?}"),
        }
    }

    #[test]
    fn deep_spot_check_stays_below_test_set_maximum() {
        let rule = ScalingRule::canonical();
        let m = 2i64;
        let collapsed = collapsed_displacement_set(&rule, m, 10_000_000).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        let mut checked = 0;
        while checked < 5 {
            if let Some(w) = sample_word_rejected(50, m, &mut rng) {
                let on_set = max_displacement_over(&rule, &w, &collapsed).unwrap();
                let deep = deep_displacement_spot_check(&rule, &w, 100, &mut rng).unwrap();
                assert!(deep <= on_set, "deep displacement {deep} exceeds test-set max {on_set}");
                checked += 1;
            }
        }
    }

    #[test]
    fn subword_range_check_is_exact() {
        let w = Word::parse("aaAA").unwrap();
        assert!(subwords_within_double_range(&w, 1));
        let w = Word::parse("aaa").unwrap();
        assert!(!subwords_within_double_range(&w, 1));
    }
}
