//! Element-level operations on the bubble group: equality of words as group
//! elements (the elements *are* permutations of the graph, so equality is
//! equality of actions) and exhaustive counting of elements representable by
//! words with small inverted orbits.
//!
//! Equality on an infinite graph is decided on a finite canonical test set:
//! a ball reaching past the first level whose half-length exceeds twice the
//! word length, plus representative vertices of the next two levels. A word
//! of length L moves any vertex at most L, and its action on a vertex
//! depends only on the L-ball around it, so the test set exhausts the local
//! isomorphism types; this is machinery, not a theorem, and it is validated
//! empirically against word algebra in the tests.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ball, branching_window, BitPath, Letter, VertexAddress, ROOT};
use crate::orbit::{collapsed_displacement_set, max_displacement_over, Word};
use crate::scaling::ScalingRule;

/// Images of a test set under a word's action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionFingerprint {
    /// Descriptor of the test set the images were taken on.
    pub test_set_id: String,
    pub images: Vec<VertexAddress>,
}

/// Result of the exhaustive small-orbit element count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmallOrbitCount {
    pub n: u32,
    pub m: u32,
    pub distinct_elements: u64,
    /// Always 4^n: the full enumeration space, before pruning.
    pub words_examined: u64,
}

/// Hard cap on exhaustive enumeration depth (4^n words).
pub const ENUMERATION_CAP: u32 = 12;

/// Start / quarter-point / midpoint of the all-zeros cycle at `level`.
fn level_representatives(rule: &ScalingRule, level: u32) -> Result<Vec<VertexAddress>> {
    let mut path = BitPath::EMPTY;
    for _ in 1..level {
        path = path.push(false);
    }
    let alpha = rule.alpha_at(level)?;
    Ok(vec![
        VertexAddress::new(rule, path, 0)?,
        VertexAddress::new(rule, path, alpha / 2)?,
        VertexAddress::new(rule, path, alpha)?,
    ])
}

/// Smallest level with `alpha_j > threshold`, clamped to defined levels.
fn level_above(rule: &ScalingRule, threshold: i64) -> u32 {
    for j in 1..=rule.defined_levels() {
        if rule.alpha_at(j).map(|a| a > threshold).unwrap_or(false) {
            return j;
        }
    }
    rule.defined_levels()
}

/// The canonical equality test set for words of length up to `len`:
/// `B(o, s_j + 2 len)` with `j` the smallest level with `alpha_j > 2 len`,
/// augmented with start/quarter/midpoint representatives of levels j+1 and
/// j+2.
pub fn equality_test_set(rule: &ScalingRule, len: usize, limit: usize) -> Result<Vec<VertexAddress>> {
    let l2 = 2 * len as i64;
    let j = level_above(rule, l2);
    let mut set = ball(rule, ROOT, rule.s_at(j)?.saturating_add(l2), limit)?;
    for lvl in [j + 1, j + 2] {
        if rule.alpha_at(lvl).is_ok() {
            set.extend(level_representatives(rule, lvl)?);
        }
    }
    set.sort_unstable();
    set.dedup();
    Ok(set)
}

/// Reduced probe set for bulk fingerprinting: one branching window per level
/// instead of all copies, the (capped) root ball, and deep representatives.
/// Same local-type coverage rationale as the full set at a fraction of the
/// size; validated against [`elements_equal`] in tests and usable only as a
/// hash key, never as the arbiter.
pub fn equality_probe(rule: &ScalingRule, len: usize, limit: usize) -> Result<Vec<VertexAddress>> {
    let l2 = (2 * len as i64).max(2);
    let reach = l2.min(64);
    let j = level_above(rule, l2);
    let mut set = ball(rule, ROOT, reach.max(8), limit)?;
    let deepest = (j + 2).min(rule.defined_levels().saturating_sub(1));
    for k in 1..=deepest {
        if rule.alpha_at(k + 1).is_ok() {
            set.extend(branching_window(rule, k, reach, limit)?);
        }
    }
    for lvl in j + 1..=(j + 4).min(rule.defined_levels()) {
        set.extend(level_representatives(rule, lvl)?);
    }
    set.sort_unstable();
    set.dedup();
    Ok(set)
}

/// Images of the probe under the right action of `w`.
pub fn action_fingerprint(
    rule: &ScalingRule,
    w: &Word,
    probe: &[VertexAddress],
    test_set_id: &str,
) -> Result<ActionFingerprint> {
    let mut images = probe.to_vec();
    for &g in w.letters() {
        for img in images.iter_mut() {
            *img = img.apply(rule, g)?;
        }
    }
    Ok(ActionFingerprint { test_set_id: test_set_id.to_string(), images })
}

/// Whether two words act identically on the canonical test set.
///
/// On finite explicit rules the graph is truncated; test vertices whose
/// image computation steps out of the defined region under either word are
/// skipped, so equality is decided on the well-defined part.
pub fn elements_equal(rule: &ScalingRule, w1: &Word, w2: &Word) -> Result<bool> {
    let len = w1.len().max(w2.len());
    let set = equality_test_set(rule, len, crate::graph::DEFAULT_BALL_LIMIT)?;
    elements_equal_on(rule, w1, w2, &set)
}

/// Equality of actions on an explicit vertex set (skip semantics as above).
pub fn elements_equal_on(
    rule: &ScalingRule,
    w1: &Word,
    w2: &Word,
    set: &[VertexAddress],
) -> Result<bool> {
    for &x in set {
        match (x.apply_word(rule, w1), x.apply_word(rule, w2)) {
            (Ok(y1), Ok(y2)) => {
                if y1 != y2 {
                    return Ok(false);
                }
            }
            (Err(Error::LevelOutOfRange { .. }), _)
            | (_, Err(Error::LevelOutOfRange { .. }))
            | (Err(Error::AlphaOverflow { .. }), _)
            | (_, Err(Error::AlphaOverflow { .. }))
            | (Err(Error::DepthCapExceeded { .. }), _)
            | (_, Err(Error::DepthCapExceeded { .. })) => {}
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    }
    Ok(true)
}

/// Cancels adjacent inverse pairs to a fixed point. The result represents
/// the same group element.
pub fn free_reduce(w: &Word) -> Word {
    let mut stack: Vec<Letter> = Vec::with_capacity(w.len());
    for &g in w.letters() {
        if stack.last().is_some_and(|&top| top == g.inverse()) {
            stack.pop();
        } else {
            stack.push(g);
        }
    }
    Word(stack)
}

/// Exact distinct-element store: hashed fingerprints with full image
/// comparison inside each hash bucket.
struct DistinctSet {
    buckets: HashMap<u64, Vec<u32>>,
    images: Vec<Vec<VertexAddress>>,
}

impl DistinctSet {
    fn new() -> Self {
        DistinctSet { buckets: HashMap::new(), images: Vec::new() }
    }

    fn hash_images(imgs: &[VertexAddress]) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        imgs.hash(&mut h);
        h.finish()
    }

    /// Returns true when the fingerprint was new.
    fn insert(&mut self, imgs: Vec<VertexAddress>) -> bool {
        let key = Self::hash_images(&imgs);
        let bucket = self.buckets.entry(key).or_default();
        for &i in bucket.iter() {
            if self.images[i as usize] == imgs {
                return false;
            }
        }
        bucket.push(self.images.len() as u32);
        self.images.push(imgs);
        true
    }

    fn len(&self) -> u64 {
        self.images.len() as u64
    }
}

/// Enumerates all words of length exactly `n`, keeps those whose inverted
/// orbit stays inside `B(o, ceil(k_emp * m))` and whose displacement on the
/// representative set is at most that radius, and counts distinct group
/// elements among them via hashed action fingerprints.
///
/// Subtrees are pruned as soon as the prefix orbit leaves the ball (orbit
/// points only accumulate). Degenerate words like `a a^-1` must stay in the
/// enumeration: they represent elements (the identity among them) that no
/// reduced word of the same length yields.
pub fn count_small_orbit_elements(
    rule: &ScalingRule,
    n: u32,
    m: u32,
    k_emp: f64,
) -> Result<SmallOrbitCount> {
    if n > ENUMERATION_CAP {
        return Err(Error::EnumerationTooLarge { n, cap: ENUMERATION_CAP });
    }
    let words_examined = 4u64.pow(n);
    if n == 0 {
        return Ok(SmallOrbitCount { n, m, distinct_elements: 1, words_examined });
    }
    let radius = (k_emp * m as f64).ceil() as i64;
    let disp_set = collapsed_displacement_set(rule, m as i64, crate::graph::DEFAULT_BALL_LIMIT)?;
    let probe = equality_probe(rule, n as usize, crate::graph::DEFAULT_BALL_LIMIT)?;

    // Parallel over first-letter subtrees; merged exactly afterwards.
    let kept_per_subtree: Vec<Vec<Vec<VertexAddress>>> = Letter::ALL
        .into_par_iter()
        .map(|first| -> Result<Vec<Vec<VertexAddress>>> {
            let mut kept = Vec::new();
            let mut word = Word(vec![first]);
            let u1 = ROOT.apply(rule, first.inverse())?;
            if u1.dist_to_root(rule)? <= radius {
                dfs_count(rule, n, radius, &disp_set, &probe, &mut word, &mut kept)?;
            }
            Ok(kept)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut distinct = DistinctSet::new();
    for kept in kept_per_subtree {
        for imgs in kept {
            distinct.insert(imgs);
        }
    }
    Ok(SmallOrbitCount { n, m, distinct_elements: distinct.len(), words_examined })
}

fn dfs_count(
    rule: &ScalingRule,
    n: u32,
    radius: i64,
    disp_set: &[VertexAddress],
    probe: &[VertexAddress],
    word: &mut Word,
    kept: &mut Vec<Vec<VertexAddress>>,
) -> Result<()> {
    if word.len() == n as usize {
        if max_displacement_over(rule, word, disp_set)? <= radius {
            kept.push(action_fingerprint(rule, word, probe, "probe")?.images);
        }
        return Ok(());
    }
    for g in Letter::ALL {
        word.push(g);
        // new inverted-orbit point u_k = o.(g_1...g_k)^{-1}
        let mut u = ROOT;
        for l in word.letters().iter().rev() {
            u = u.apply(rule, l.inverse())?;
        }
        if u.dist_to_root(rule)? <= radius {
            dfs_count(rule, n, radius, disp_set, probe, word, kept)?;
        }
        word.0.pop();
    }
    Ok(())
}
