//! The permutational wreath product of the two-element lamp group over the
//! bubble graph: element arithmetic, the switch-walk-switch (SWS) random
//! walk, lamp statistics, and the harmonic-function estimator behind the
//! non-Liouville evidence.
//!
//! Elements are pairs `(f, g)` of a finitely supported lamp configuration
//! and a base-group element (stored as a word), multiplied by
//! `(f, g)(f', g') = (f xor f'^{g^-1}, g g')` where `f'^{g^-1}(x) = f'(x.g)`.
//! A switch toggles the lamp at the root; through the multiplication rule
//! the toggle lands at the pulled-back site `o.(base)^{-1}`, which is why
//! the inverted orbit governs the lamp support.

use std::collections::BTreeSet;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::{Letter, VertexAddress, ROOT};
use crate::group::{elements_equal_on, equality_probe, free_reduce};
use crate::orbit::{projection_extremes, OrbitScan, Word};
use crate::rng::replica_rng;
use crate::scaling::ScalingRule;

/// Finitely supported lamp configuration; membership = lamp ON.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LampConfig {
    pub lit: BTreeSet<VertexAddress>,
}

impl LampConfig {
    pub fn empty() -> Self {
        LampConfig::default()
    }

    pub fn single(x: VertexAddress) -> Self {
        LampConfig { lit: BTreeSet::from([x]) }
    }

    pub fn toggle(&mut self, x: VertexAddress) {
        if !self.lit.remove(&x) {
            self.lit.insert(x);
        }
    }

    pub fn is_on(&self, x: VertexAddress) -> bool {
        self.lit.contains(&x)
    }

    pub fn support_size(&self) -> usize {
        self.lit.len()
    }
}

/// `(lamp configuration, base word)` pair.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WreathElement {
    pub lamps: LampConfig,
    pub base: Word,
}

impl WreathElement {
    pub fn identity() -> Self {
        WreathElement::default()
    }

    pub fn new(lamps: LampConfig, base: Word) -> Self {
        WreathElement { lamps, base }
    }

    /// `(f, g)(f', g') = (f xor f'^{g^-1}, g g')`: the second factor's lamps
    /// are pulled back through the first base's action, i.e. lamp `y` lands
    /// at `y.g^{-1}`.
    pub fn multiply(&self, rule: &ScalingRule, other: &WreathElement) -> Result<WreathElement> {
        let mut lamps = self.lamps.clone();
        let base_inv = self.base.inverse();
        for &y in &other.lamps.lit {
            lamps.toggle(y.apply_word(rule, &base_inv)?);
        }
        Ok(WreathElement { lamps, base: self.base.concat(&other.base) })
    }

    /// `(f, g)^{-1} = (f', g^{-1})` with `supp f' = (supp f).g`: lamp sites
    /// are pushed forward through the base action.
    pub fn inverse(&self, rule: &ScalingRule) -> Result<WreathElement> {
        let mut lamps = LampConfig::empty();
        for &x in &self.lamps.lit {
            lamps.toggle(x.apply_word(rule, &self.base)?);
        }
        Ok(WreathElement { lamps, base: self.base.inverse() })
    }

    /// Structural equality of elements: identical lamp sets and bases with
    /// equal group actions (checked on the given probe).
    pub fn equals_on(
        &self,
        rule: &ScalingRule,
        other: &WreathElement,
        probe: &[VertexAddress],
    ) -> Result<bool> {
        if self.lamps != other.lamps {
            return Ok(false);
        }
        elements_equal_on(rule, &self.base, &other.base, probe)
    }
}

/// One switch-walk-switch step: right-multiplication by
/// `(l_{s1}, id) (id, g) (l_{s2}, id)` where the switch lamp lights the root
/// iff its bit is set (uniform switches on a two-element lamp group toggle
/// with probability 1/2).
pub fn sws_step(
    rule: &ScalingRule,
    state: &WreathElement,
    g: Letter,
    s1: bool,
    s2: bool,
) -> Result<WreathElement> {
    let switch = |on: bool| {
        if on {
            WreathElement::new(LampConfig::single(ROOT), Word::empty())
        } else {
            WreathElement::identity()
        }
    };
    state
        .multiply(rule, &switch(s1))?
        .multiply(rule, &WreathElement::new(LampConfig::empty(), Word(vec![g])))?
        .multiply(rule, &switch(s2))
}

/// Summary of one SWS trajectory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwsSummary {
    pub n: usize,
    /// `(k, |supp X_k|)` at sampled checkpoints including 0 and n.
    pub support_size_trace: Vec<(usize, usize)>,
    /// All sites where at least one switch actually toggled.
    pub toggle_sites: BTreeSet<VertexAddress>,
    pub returned_to_identity: bool,
}

/// Simulates `n` SWS steps with i.i.d. uniform letters and fair switch bits.
///
/// Lamp bookkeeping uses the prefix-inverse orbit scan: the toggles of step
/// k land at the pulled-back sites `u_{k-1}` and `u_k` of the accumulated
/// base word, so the lamp support is maintained exactly in O(1) amortized
/// state per step.
pub fn simulate_sws(
    rule: &ScalingRule,
    n: usize,
    start: &WreathElement,
    rng: &mut impl Rng,
) -> Result<(WreathElement, SwsSummary)> {
    let mut scan = OrbitScan::new(rule)?;
    for &g in start.base.letters() {
        scan.step(g)?;
    }
    let mut lamps = start.lamps.clone();
    let mut toggle_sites = BTreeSet::new();
    let mut letters = start.base.0.clone();

    let checkpoint_every = (n / 32).max(1);
    let mut trace = vec![(0usize, lamps.support_size())];

    for k in 1..=n {
        let g = Letter::ALL[rng.gen_range(0..4)];
        let (s1, s2) = (rng.gen::<bool>(), rng.gen::<bool>());
        if s1 {
            let u = scan.current();
            lamps.toggle(u);
            toggle_sites.insert(u);
        }
        let u = scan.step(g)?;
        if s2 {
            lamps.toggle(u);
            toggle_sites.insert(u);
        }
        letters.push(g);
        if k % checkpoint_every == 0 || k == n {
            trace.push((k, lamps.support_size()));
        }
    }

    let element = WreathElement::new(lamps, Word(letters));
    let returned = is_identity(rule, &element, scan.current())?;
    let summary = SwsSummary {
        n,
        support_size_trace: trace,
        toggle_sites,
        returned_to_identity: returned,
    };
    Ok((element, summary))
}

/// Staged identity test: cheap necessary conditions first, action
/// fingerprint on the probe set last.
fn is_identity(rule: &ScalingRule, e: &WreathElement, u_n: VertexAddress) -> Result<bool> {
    if !e.lamps.lit.is_empty() {
        return Ok(false);
    }
    let (_, _, end) = projection_extremes(&e.base);
    if end != 0 || u_n != ROOT {
        return Ok(false);
    }
    if free_reduce(&e.base).is_empty() {
        return Ok(true);
    }
    let probe =
        equality_probe(rule, e.base.len().min(32), crate::graph::DEFAULT_BALL_LIMIT)?;
    elements_equal_on(rule, &e.base, &Word::empty(), &probe)
}

/// Monte Carlo estimate of the harmonic-function proxy with convergence
/// diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicEstimate {
    /// Estimated probability that the lamp at the root is OFF at the horizon.
    pub p_hat: f64,
    pub stderr: f64,
    /// Fraction of runs whose last toggle of the root lamp happened in the
    /// final 10% of the horizon: a truncation-error diagnostic for using a
    /// finite horizon as a proxy for the almost-sure eventual state.
    pub late_toggle_fraction: f64,
    pub reps: u64,
    pub horizon: usize,
}

/// Estimates `P(lamp at o is OFF at time `horizon` | start)`.
///
/// The root lamp toggles at step k exactly when a switch bit is set while
/// the pulled-back site equals the root, i.e. when the forward walk started
/// at `x0 = o.(start base)` sits at the root: `o.(base g_1...g_k)^{-1} = o`
/// iff `x0.(g_1...g_k) = o`. Each replica therefore runs a plain forward
/// walk from `x0` and flips a single bit on root visits with set switch
/// bits, which is exact and O(horizon) per replica.
pub fn harmonic_estimate(
    rule: &ScalingRule,
    start: &WreathElement,
    horizon: usize,
    reps: u64,
    seed: u64,
) -> Result<HarmonicEstimate> {
    let x0 = ROOT.apply_word(rule, &start.base)?;
    let initially_on = start.lamps.is_on(ROOT);

    let per_rep: Vec<(bool, Option<usize>)> = (0..reps)
        .into_par_iter()
        .map(|rep| -> Result<(bool, Option<usize>)> {
            let mut rng = replica_rng(seed, rep);
            let mut on = initially_on;
            let mut w = x0;
            let mut last_toggle = None;
            // Draw order matches simulate_sws (letter, bit, bit), so for an
            // identical stream the root lamp here equals the one there.
            for k in 1..=horizon {
                let g = Letter::ALL[rng.gen_range(0..4)];
                let (s1, s2) = (rng.gen::<bool>(), rng.gen::<bool>());
                if s1 && w == ROOT {
                    on = !on;
                    last_toggle = Some(k);
                }
                w = w.apply(rule, g)?;
                if s2 && w == ROOT {
                    on = !on;
                    last_toggle = Some(k);
                }
            }
            Ok((!on, last_toggle))
        })
        .collect::<Result<Vec<_>>>()?;

    let off_count = per_rep.iter().filter(|(off, _)| *off).count() as f64;
    let late = per_rep
        .iter()
        .filter(|(_, t)| t.is_some_and(|k| k * 10 > horizon * 9))
        .count() as f64;
    let p_hat = if reps == 0 { 0.0 } else { off_count / reps as f64 };
    let stderr =
        if reps == 0 { 0.0 } else { (p_hat * (1.0 - p_hat) / reps as f64).sqrt() };
    Ok(HarmonicEstimate {
        p_hat,
        stderr,
        late_toggle_fraction: if reps == 0 { 0.0 } else { late / reps as f64 },
        reps,
        horizon,
    })
}

/// The staircase word `a^{alpha_1} b a^{alpha_2} b ... a^{alpha_k} b` moving
/// the root to the start of the all-zeros cycle at level k+1; its length is
/// exactly `s_k`.
pub fn staircase_word(rule: &ScalingRule, levels: u32) -> Result<Word> {
    let mut letters = Vec::new();
    for k in 1..=levels {
        letters.extend(std::iter::repeat(Letter::A).take(rule.alpha_at(k)? as usize));
        letters.push(Letter::B);
    }
    Ok(Word(letters))
}
