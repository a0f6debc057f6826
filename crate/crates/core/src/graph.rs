//! The bubble Schreier graph `S(alpha)`, materialized lazily.
//!
//! Level 1 is a cycle of length `2 alpha_1` through the root `o`. The middle
//! of every level-k cycle carries a branching 3-cycle of `b`-edges whose two
//! remaining vertices start the two level-(k+1) cycles, so the graph is an
//! infinite binary tree of cycles. `a` rotates every cycle by one position;
//! `b` rotates each branching 3-cycle (midpoint -> child "0" -> child "1" ->
//! midpoint) and fixes everything else.
//!
//! A vertex is addressed by the branch-choice path from the root plus its
//! position on its own cycle; every vertex belongs to exactly one cycle (a
//! branching midpoint belongs to the parent cycle, a cycle start to its own).

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scaling::ScalingRule;

/// Default cap on enumerated ball sizes.
pub const DEFAULT_BALL_LIMIT: usize = 50_000_000;

/// One of the four generator letters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Letter {
    A,
    AInv,
    B,
    BInv,
}

impl Letter {
    pub const ALL: [Letter; 4] = [Letter::A, Letter::AInv, Letter::B, Letter::BInv];

    pub fn inverse(self) -> Letter {
        match self {
            Letter::A => Letter::AInv,
            Letter::AInv => Letter::A,
            Letter::B => Letter::BInv,
            Letter::BInv => Letter::B,
        }
    }

    /// Text form: `a`, `A` (= a^-1), `b`, `B` (= b^-1).
    pub fn to_char(self) -> char {
        match self {
            Letter::A => 'a',
            Letter::AInv => 'A',
            Letter::B => 'b',
            Letter::BInv => 'B',
        }
    }

    pub fn from_char(c: char) -> Result<Letter> {
        match c {
            'a' => Ok(Letter::A),
            'A' => Ok(Letter::AInv),
            'b' => Ok(Letter::B),
            'B' => Ok(Letter::BInv),
            _ => Err(Error::InvalidParameter(format!(
                "invalid letter {c:?}; expected one of a, A, b, B"
            ))),
        }
    }
}

/// Packed branch-choice path; bit i is the choice taken from level i+1 to
/// level i+2. Level depth is capped at 62, so 61 bits always suffice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BitPath {
    bits: u64,
    len: u8,
}

impl BitPath {
    pub const EMPTY: BitPath = BitPath { bits: 0, len: 0 };

    pub fn len(&self) -> u32 {
        self.len as u32
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bit(&self, i: u32) -> bool {
        debug_assert!(i < self.len as u32);
        (self.bits >> i) & 1 == 1
    }

    pub fn push(&self, bit: bool) -> BitPath {
        debug_assert!(self.len < 61);
        BitPath { bits: self.bits | ((bit as u64) << self.len), len: self.len + 1 }
    }

    pub fn pop(&self) -> BitPath {
        debug_assert!(self.len > 0);
        let len = self.len - 1;
        let mask = if len == 0 { 0 } else { (1u64 << len) - 1 };
        BitPath { bits: self.bits & mask, len }
    }

    pub fn last(&self) -> bool {
        self.bit(self.len as u32 - 1)
    }

    pub fn with_last(&self, bit: bool) -> BitPath {
        self.pop().push(bit)
    }

    /// Longest common prefix length with another path.
    pub fn common_prefix_len(&self, other: &BitPath) -> u32 {
        let max = self.len().min(other.len());
        for i in 0..max {
            if self.bit(i) != other.bit(i) {
                return i;
            }
        }
        max
    }

    pub fn prefix(&self, len: u32) -> BitPath {
        debug_assert!(len <= self.len());
        BitPath { bits: if len == 0 { 0 } else { self.bits & ((1u64 << len) - 1) }, len: len as u8 }
    }
}

impl fmt::Display for BitPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len() {
            write!(f, "{}", if self.bit(i) { '1' } else { '0' })?;
        }
        Ok(())
    }
}

/// Canonical coordinate of a vertex: branch path plus position on its cycle.
///
/// Canonical form: `0 <= pos < 2 alpha_level` with `level = |path| + 1`. The
/// three vertices of the branching cycle attached to the cycle with path `p`
/// at level n are `(p, alpha_n)` (the midpoint), `(p0, 0)` and `(p1, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VertexAddress {
    pub path: BitPath,
    pub pos: i64,
}

/// The root `o` = (empty path, 0).
pub const ROOT: VertexAddress = VertexAddress { path: BitPath::EMPTY, pos: 0 };

impl VertexAddress {
    /// Validates raw coordinates against the rule; rejects non-canonical ones.
    pub fn new(rule: &ScalingRule, path: BitPath, pos: i64) -> Result<VertexAddress> {
        let level = path.len() + 1;
        let len = rule.cycle_len(level)?;
        if pos < 0 || pos >= len {
            return Err(Error::InvalidAddress(format!(
                "pos {pos} out of range [0, {len}) at level {level}"
            )));
        }
        Ok(VertexAddress { path, pos })
    }

    pub fn root() -> VertexAddress {
        ROOT
    }

    pub fn level(&self) -> u32 {
        self.path.len() + 1
    }

    pub fn is_root(&self) -> bool {
        self.path.is_empty() && self.pos == 0
    }

    /// Start vertex (`pos == 0`) of a non-root cycle; lies on the parent's
    /// branching 3-cycle.
    pub fn is_cycle_start(&self) -> bool {
        self.pos == 0 && !self.path.is_empty()
    }

    /// Midpoint of its own cycle; carries the branching 3-cycle.
    pub fn is_midpoint(&self, rule: &ScalingRule) -> Result<bool> {
        Ok(self.pos == rule.alpha_at(self.level())?)
    }

    /// Image under one generator letter. Total on canonical addresses for
    /// conceptually infinite rules; for explicit finite rules, stepping into
    /// an undefined level reports the scaling error.
    pub fn apply(&self, rule: &ScalingRule, letter: Letter) -> Result<VertexAddress> {
        let level = self.level();
        match letter {
            Letter::A | Letter::AInv => {
                let len = rule.cycle_len(level)?;
                let delta = if letter == Letter::A { 1 } else { -1 };
                Ok(VertexAddress { path: self.path, pos: (self.pos + delta).rem_euclid(len) })
            }
            Letter::B => {
                if self.pos == rule.alpha_at(level)? {
                    // midpoint -> child "0"; the child level must exist
                    rule.alpha_at(level + 1)?;
                    Ok(VertexAddress { path: self.path.push(false), pos: 0 })
                } else if self.is_cycle_start() {
                    if self.path.last() {
                        // child "1" -> parent midpoint
                        let parent = self.path.pop();
                        Ok(VertexAddress { path: parent, pos: rule.alpha_at(level - 1)? })
                    } else {
                        // child "0" -> child "1"
                        Ok(VertexAddress { path: self.path.with_last(true), pos: 0 })
                    }
                } else {
                    Ok(*self)
                }
            }
            Letter::BInv => {
                if self.pos == rule.alpha_at(level)? {
                    // midpoint -> child "1"
                    rule.alpha_at(level + 1)?;
                    Ok(VertexAddress { path: self.path.push(true), pos: 0 })
                } else if self.is_cycle_start() {
                    if self.path.last() {
                        // child "1" -> child "0"
                        Ok(VertexAddress { path: self.path.with_last(false), pos: 0 })
                    } else {
                        // child "0" -> parent midpoint
                        let parent = self.path.pop();
                        Ok(VertexAddress { path: parent, pos: rule.alpha_at(level - 1)? })
                    }
                } else {
                    Ok(*self)
                }
            }
        }
    }

    /// Left-to-right fold of [`apply`](Self::apply): the right action of the
    /// word `w = g_1 ... g_n`.
    pub fn apply_word(&self, rule: &ScalingRule, word: &[Letter]) -> Result<VertexAddress> {
        let mut x = *self;
        for &g in word {
            x = x.apply(rule, g)?;
        }
        Ok(x)
    }

    /// `{x.a, x.a^-1} U ({x.b, x.b^-1} \ {x})`: the b self-loops at
    /// non-branching vertices are excluded here (graph metric); the induced
    /// walk keeps them as holds.
    pub fn neighbors(&self, rule: &ScalingRule) -> Result<Vec<VertexAddress>> {
        let mut out = Vec::with_capacity(4);
        for letter in Letter::ALL {
            match self.apply(rule, letter) {
                Ok(y) => {
                    if y != *self && !out.contains(&y) {
                        out.push(y);
                    }
                }
                // Finite explicit rules truncate the graph: edges into
                // undefined levels are treated as absent.
                Err(Error::LevelOutOfRange { .. }) | Err(Error::AlphaOverflow { .. })
                | Err(Error::DepthCapExceeded { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    }

    /// Exact graph distance to the root: `s_{n-1} + min(pos, 2 alpha_n - pos)`.
    pub fn dist_to_root(&self, rule: &ScalingRule) -> Result<i64> {
        let level = self.level();
        let len = rule.cycle_len(level)?;
        Ok(rule.s_at(level - 1)? + self.pos.min(len - self.pos))
    }

    pub fn to_compact_string(&self) -> String {
        format!("{}:{}", self.path, self.pos)
    }

    /// Parses `path:pos` (e.g. `:0` for the root, `01:4`) and validates it.
    pub fn parse(rule: &ScalingRule, s: &str) -> Result<VertexAddress> {
        let (path_str, pos_str) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidAddress(format!("missing ':' in address {s:?}")))?;
        let mut path = BitPath::EMPTY;
        for c in path_str.chars() {
            match c {
                '0' => path = path.push(false),
                '1' => path = path.push(true),
                _ => {
                    return Err(Error::InvalidAddress(format!(
                        "invalid path character {c:?} in {s:?}"
                    )))
                }
            }
            if path.len() > 61 {
                return Err(Error::DepthCapExceeded { level: path.len() + 1, cap: 62 });
            }
        }
        let pos: i64 = pos_str
            .parse()
            .map_err(|_| Error::InvalidAddress(format!("invalid position in {s:?}")))?;
        VertexAddress::new(rule, path, pos)
    }
}

impl fmt::Display for VertexAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.path, self.pos)
    }
}

/// Outcome of a capped distance query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dist {
    Exact(i64),
    Exceeded { cap: i64 },
}

impl Dist {
    pub fn exact(self) -> Option<i64> {
        match self {
            Dist::Exact(d) => Some(d),
            Dist::Exceeded { .. } => None,
        }
    }
}

/// Exact distance if `<= cap`, else `Exceeded`; bidirectional BFS over lazily
/// generated neighbors, with a closed-form fast path when both vertices lie
/// on one cycle.
pub fn dist(rule: &ScalingRule, x: VertexAddress, y: VertexAddress, cap: i64) -> Result<Dist> {
    debug_assert!(cap >= 0);
    if x == y {
        return Ok(Dist::Exact(0));
    }
    if x.path == y.path {
        // Same cycle: arcs are geodesics (subtrees hanging off the cycle
        // never reconnect).
        let len = rule.cycle_len(x.level())?;
        let diff = (x.pos - y.pos).rem_euclid(len);
        let d = diff.min(len - diff);
        return Ok(if d <= cap { Dist::Exact(d) } else { Dist::Exceeded { cap } });
    }

    let mut from_x: HashMap<VertexAddress, i64> = HashMap::from([(x, 0)]);
    let mut from_y: HashMap<VertexAddress, i64> = HashMap::from([(y, 0)]);
    let mut frontier_x = vec![x];
    let mut frontier_y = vec![y];
    let (mut rx, mut ry) = (0i64, 0i64);
    let mut best: Option<i64> = None;

    loop {
        if let Some(b) = best {
            if b <= rx + ry {
                return Ok(if b <= cap { Dist::Exact(b) } else { Dist::Exceeded { cap } });
            }
        }
        if rx + ry >= cap {
            return Ok(match best {
                Some(b) if b <= cap => Dist::Exact(b),
                _ => Dist::Exceeded { cap },
            });
        }
        // Expand the smaller frontier.
        let expand_x = frontier_x.len() <= frontier_y.len();
        let (frontier, seen, other, radius) = if expand_x {
            (&mut frontier_x, &mut from_x, &from_y, &mut rx)
        } else {
            (&mut frontier_y, &mut from_y, &from_x, &mut ry)
        };
        if frontier.is_empty() {
            // Disconnected (possible only on truncated explicit rules).
            return Ok(Dist::Exceeded { cap });
        }
        let mut next = Vec::new();
        *radius += 1;
        for v in frontier.drain(..) {
            for w in v.neighbors(rule)? {
                if !seen.contains_key(&w) {
                    seen.insert(w, *radius);
                    if let Some(&dw) = other.get(&w) {
                        let total = *radius + dw;
                        best = Some(best.map_or(total, |b: i64| b.min(total)));
                    }
                    next.push(w);
                }
            }
        }
        *frontier = next;
    }
}

/// Exact distance via the cycle-tree structure, with no cap.
///
/// The graph is a tree of cycles, so the geodesic routes through the portal
/// vertices (cycle starts and midpoints) along the unique cycle-tree path
/// between the endpoints; a tiny Dijkstra over those portals is exact.
/// Anchored to the BFS oracle in tests.
pub fn dist_exact(rule: &ScalingRule, x: VertexAddress, y: VertexAddress) -> Result<i64> {
    if x == y {
        return Ok(0);
    }
    let lca_len = x.path.common_prefix_len(&y.path);

    // Collect portal nodes and unit/arc edges.
    let mut nodes: Vec<VertexAddress> = Vec::new();
    let mut index: HashMap<VertexAddress, usize> = HashMap::new();
    let mut edges: Vec<(usize, usize, i64)> = Vec::new();
    let mut add_node = |v: VertexAddress, nodes: &mut Vec<VertexAddress>| -> usize {
        *index.entry(v).or_insert_with(|| {
            nodes.push(v);
            nodes.len() - 1
        })
    };

    let xi = add_node(x, &mut nodes);
    let yi = add_node(y, &mut nodes);

    // Walk each endpoint's chain of cycles up to the LCA cycle, recording
    // per-branching portal triples (parent midpoint, both child starts).
    for (endpoint, _) in [(x, xi), (y, yi)] {
        let mut path = endpoint.path;
        while path.len() > lca_len {
            let parent = path.pop();
            let level = parent.len() + 1;
            let mid = VertexAddress { path: parent, pos: rule.alpha_at(level)? };
            let c0 = VertexAddress { path: parent.push(false), pos: 0 };
            let c1 = VertexAddress { path: parent.push(true), pos: 0 };
            let mi = add_node(mid, &mut nodes);
            let i0 = add_node(c0, &mut nodes);
            let i1 = add_node(c1, &mut nodes);
            edges.push((mi, i0, 1));
            edges.push((mi, i1, 1));
            edges.push((i0, i1, 1));
            path = parent;
        }
    }

    // Arc edges between all node pairs sharing a cycle.
    for i in 0..nodes.len() {
        for j in (i + 1)..nodes.len() {
            if nodes[i].path == nodes[j].path {
                let len = rule.cycle_len(nodes[i].level())?;
                let diff = (nodes[i].pos - nodes[j].pos).rem_euclid(len);
                edges.push((i, j, diff.min(len - diff)));
            }
        }
    }

    // Dijkstra over at most a few hundred nodes.
    let n = nodes.len();
    let mut adj = vec![Vec::new(); n];
    for (i, j, w) in edges {
        adj[i].push((j, w));
        adj[j].push((i, w));
    }
    let mut dist = vec![i64::MAX; n];
    let mut done = vec![false; n];
    dist[xi] = 0;
    for _ in 0..n {
        let mut u = usize::MAX;
        let mut du = i64::MAX;
        for v in 0..n {
            if !done[v] && dist[v] < du {
                du = dist[v];
                u = v;
            }
        }
        if u == usize::MAX {
            break;
        }
        if u == yi {
            return Ok(du);
        }
        done[u] = true;
        for &(v, w) in &adj[u] {
            if du + w < dist[v] {
                dist[v] = du + w;
            }
        }
    }
    Err(Error::InvalidAddress(format!("no route between {x} and {y}")))
}

/// Exact closed ball via BFS. Refuses radii whose volume bound exceeds
/// `limit` vertices.
pub fn ball(
    rule: &ScalingRule,
    center: VertexAddress,
    radius: i64,
    limit: usize,
) -> Result<Vec<VertexAddress>> {
    debug_assert!(radius >= 0);
    let guard_radius = radius.saturating_add(center.dist_to_root(rule)?);
    if let Ok(bound) = ball_size_bound(rule, guard_radius) {
        if bound > limit as u128 {
            return Err(Error::BallLimitExceeded { radius: radius as u64, bound, limit });
        }
    } // truncated rules: the finite graph itself bounds the ball

    let mut seen: HashSet<VertexAddress> = HashSet::from([center]);
    let mut out = vec![center];
    let mut frontier = vec![center];
    for _ in 0..radius {
        let mut next = Vec::new();
        for v in frontier {
            for w in v.neighbors(rule)? {
                if seen.insert(w) {
                    if out.len() >= limit {
                        return Err(Error::BallLimitExceeded {
                            radius: radius as u64,
                            bound: out.len() as u128 + 1,
                            limit,
                        });
                    }
                    out.push(w);
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    Ok(out)
}

/// The displayed volume bound `2 (alpha_1 + 1 + 2(alpha_2 + 1) + ... +
/// 2^{k-1}(alpha_k + 1))` with `k` chosen so `s_{k-1} <= n < s_k`.
pub fn ball_size_bound(rule: &ScalingRule, n: i64) -> Result<u128> {
    debug_assert!(n >= 0);
    let k = rule.level_of_radius(n)?;
    let mut sum: u128 = 0;
    for j in 1..=k {
        let term = (1u128 << (j - 1))
            .checked_mul(rule.alpha_at(j)? as u128 + 1)
            .ok_or(Error::Overflow("ball_size_bound"))?;
        sum = sum.checked_add(term).ok_or(Error::Overflow("ball_size_bound"))?;
    }
    sum.checked_mul(2).ok_or(Error::Overflow("ball_size_bound"))
}

/// Exact `|B_r(o)|` by per-level counting: every level-k cycle starts at
/// distance `s_{k-1}`, and a cycle whose start is at distance `D` contributes
/// `min(2q+1, 2 alpha_k)` vertices for `q = r - D >= 0`.
///
/// For finite explicit rules this counts the truncated graph.
pub fn ball_volume(rule: &ScalingRule, r: i64) -> Result<u128> {
    debug_assert!(r >= 0);
    let mut total: u128 = 0;
    for k in 1..=rule.defined_levels() {
        let start = rule.s_at(k - 1)?;
        if start > r {
            break;
        }
        let q = r - start;
        let alpha = rule.alpha_at(k)?;
        let on_cycle = if q >= alpha { 2 * alpha as u128 } else { 2 * q as u128 + 1 };
        let term =
            (1u128 << (k - 1)).checked_mul(on_cycle).ok_or(Error::Overflow("ball_volume"))?;
        total = total.checked_add(term).ok_or(Error::Overflow("ball_volume"))?;
    }
    Ok(total)
}

/// BFS window of given radius around the branching midpoint of the all-zeros
/// cycle at `level`; used to build representative test sets.
pub fn branching_window(
    rule: &ScalingRule,
    level: u32,
    radius: i64,
    limit: usize,
) -> Result<Vec<VertexAddress>> {
    let mut path = BitPath::EMPTY;
    for _ in 1..level {
        path = path.push(false);
    }
    let mid = VertexAddress::new(rule, path, rule.alpha_at(level)?)?;
    ball(rule, mid, radius, limit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fig1() -> ScalingRule {
        ScalingRule::explicit(vec![2, 3, 4]).unwrap()
    }

    fn addr(rule: &ScalingRule, s: &str) -> VertexAddress {
        VertexAddress::parse(rule, s).unwrap()
    }

    #[test]
    fn apply_letter_examples() {
        let rule = fig1();
        // cyclic rotation on the length-4 root cycle
        assert_eq!(addr(&rule, ":3").apply(&rule, Letter::A).unwrap(), ROOT);
        // b fixes vertices off the branching cycles
        assert_eq!(addr(&rule, ":1").apply(&rule, Letter::B).unwrap(), addr(&rule, ":1"));
        // midpoint -> child "0"
        assert_eq!(addr(&rule, ":2").apply(&rule, Letter::B).unwrap(), addr(&rule, "0:0"));
        // the rest of the 3-cycle
        assert_eq!(addr(&rule, "0:0").apply(&rule, Letter::B).unwrap(), addr(&rule, "1:0"));
        assert_eq!(addr(&rule, "1:0").apply(&rule, Letter::B).unwrap(), addr(&rule, ":2"));
        // and its inverse orientation
        assert_eq!(addr(&rule, ":2").apply(&rule, Letter::BInv).unwrap(), addr(&rule, "1:0"));
    }

    #[test]
    fn apply_word_examples() {
        let rule = fig1();
        let w = |s: &str| -> Vec<Letter> { s.chars().map(|c| Letter::from_char(c).unwrap()).collect() };
        assert_eq!(ROOT.apply_word(&rule, &w("aA")).unwrap(), ROOT);
        assert_eq!(ROOT.apply_word(&rule, &w("aa")).unwrap(), addr(&rule, ":2"));
        assert_eq!(ROOT.apply_word(&rule, &w("")).unwrap(), ROOT);
        // b^3 = id on the branching cycle
        assert_eq!(addr(&rule, ":2").apply_word(&rule, &w("bbb")).unwrap(), addr(&rule, ":2"));
    }

    #[test]
    fn neighbor_examples() {
        let rule = fig1();
        let sorted = |mut v: Vec<VertexAddress>| {
            v.sort();
            v
        };
        assert_eq!(
            sorted(ROOT.neighbors(&rule).unwrap()),
            sorted(vec![addr(&rule, ":1"), addr(&rule, ":3")])
        );
        assert_eq!(
            sorted(addr(&rule, ":2").neighbors(&rule).unwrap()),
            sorted(vec![addr(&rule, ":1"), addr(&rule, ":3"), addr(&rule, "0:0"), addr(&rule, "1:0")])
        );
        // alpha_2 = 3 gives a cycle of length 6
        assert_eq!(
            sorted(addr(&rule, "0:0").neighbors(&rule).unwrap()),
            sorted(vec![
                addr(&rule, "0:1"),
                addr(&rule, "0:5"),
                addr(&rule, ":2"),
                addr(&rule, "1:0")
            ])
        );
    }

    #[test]
    fn dist_to_root_examples() {
        let rule = fig1();
        assert_eq!(ROOT.dist_to_root(&rule).unwrap(), 0);
        // d(o, b_2) = s_1 = alpha_1 + 1
        assert_eq!(addr(&rule, "0:0").dist_to_root(&rule).unwrap(), 3);
        assert_eq!(addr(&rule, ":3").dist_to_root(&rule).unwrap(), 1);
    }

    #[test]
    fn dist_examples() {
        let rule = fig1();
        let x = addr(&rule, "0:0");
        assert_eq!(dist(&rule, x, x, 0).unwrap(), Dist::Exact(0));
        assert_eq!(dist(&rule, addr(&rule, "0:0"), addr(&rule, "1:0"), 5).unwrap(), Dist::Exact(1));
        assert_eq!(dist(&rule, addr(&rule, ":1"), addr(&rule, ":3"), 10).unwrap(), Dist::Exact(2));
        assert!(matches!(
            dist(&rule, ROOT, addr(&rule, "0:3"), 3).unwrap(),
            Dist::Exceeded { cap: 3 }
        ));
    }

    #[test]
    fn ball_examples() {
        let rule = fig1();
        assert_eq!(ball(&rule, ROOT, 0, 1000).unwrap(), vec![ROOT]);
        assert_eq!(ball(&rule, ROOT, 1, 1000).unwrap().len(), 3);
        let b3 = ball(&rule, ROOT, 3, 1000).unwrap();
        let mut got: Vec<_> = b3.iter().map(|v| v.to_compact_string()).collect();
        got.sort();
        assert_eq!(got, vec!["0:0", "1:0", ":0", ":1", ":2", ":3"]);
    }

    #[test]
    fn ball_size_bound_examples() {
        let rule = fig1();
        assert_eq!(ball_size_bound(&rule, 1).unwrap(), 6); // k = 1: 2(alpha_1+1)
        assert_eq!(ball_size_bound(&rule, 3).unwrap(), 22); // k = 2: 2(3 + 2*4)
        assert!(ball_size_bound(&rule, 0).unwrap() >= 1);
    }

    #[test]
    fn ball_volume_matches_bfs() {
        for rule in [fig1(), ScalingRule::canonical()] {
            for r in 0..=40 {
                let counted = ball(&rule, ROOT, r, 1_000_000).unwrap().len() as u128;
                assert_eq!(ball_volume(&rule, r).unwrap(), counted, "radius {r}");
            }
        }
    }

    #[test]
    fn ball_within_bound() {
        let rule = ScalingRule::canonical();
        for n in [0i64, 1, 2, 5, 10, 50, 100, 200] {
            let exact = ball_volume(&rule, n).unwrap();
            let bound = ball_size_bound(&rule, n).unwrap();
            assert!(exact <= bound, "n = {n}: {exact} > {bound}");
        }
    }

    #[test]
    fn closed_form_distance_matches_bfs() {
        // dist_to_root and dist_exact vs the BFS oracle on B_{s_3}(o).
        for rule in [fig1(), ScalingRule::canonical()] {
            let r = rule.s_at(3).unwrap();
            let vertices = ball(&rule, ROOT, r, 100_000).unwrap();
            for &v in &vertices {
                let bfs = dist(&rule, ROOT, v, r + 1).unwrap().exact().unwrap();
                assert_eq!(v.dist_to_root(&rule).unwrap(), bfs, "vertex {v}");
                assert_eq!(dist_exact(&rule, ROOT, v).unwrap(), bfs, "vertex {v}");
            }
        }
    }

    #[test]
    fn dist_exact_matches_bfs_on_random_pairs() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for rule in [fig1(), ScalingRule::canonical()] {
            let verts = ball(&rule, ROOT, rule.s_at(3).unwrap() + 4, 100_000).unwrap();
            for _ in 0..400 {
                let x = verts[rng.gen_range(0..verts.len())];
                let y = verts[rng.gen_range(0..verts.len())];
                let bfs = dist(&rule, x, y, 200).unwrap().exact().unwrap();
                assert_eq!(dist_exact(&rule, x, y).unwrap(), bfs, "{x} {y}");
            }
        }
    }

    #[test]
    fn deep_dist_exact_consistency() {
        // Points on deep canonical levels, unreachable by plain BFS in tests.
        let rule = ScalingRule::canonical();
        let mut path = BitPath::EMPTY;
        for i in 0..12 {
            path = path.push(i % 3 == 0);
        }
        let x = VertexAddress::new(&rule, path, 5).unwrap();
        assert_eq!(dist_exact(&rule, ROOT, x).unwrap(), x.dist_to_root(&rule).unwrap());
        assert_eq!(dist_exact(&rule, x, ROOT).unwrap(), x.dist_to_root(&rule).unwrap());
    }

    #[test]
    fn a_power_fixes_cycle_but_not_children() {
        let rule = fig1();
        // a^{2 alpha_1} = a^4 fixes the root cycle...
        let w: Vec<Letter> = std::iter::repeat(Letter::A).take(4).collect();
        for p in 0..4 {
            let x = VertexAddress::new(&rule, BitPath::EMPTY, p).unwrap();
            assert_eq!(x.apply_word(&rule, &w).unwrap(), x);
        }
        // ...but rotates level-2 cycles (2 alpha_2 = 6 does not divide 4).
        let c = addr(&rule, "0:0");
        assert_ne!(c.apply_word(&rule, &w).unwrap(), c);
    }

    #[test]
    fn truncated_rule_stops_at_undefined_levels() {
        let rule = fig1();
        // Midpoint of a level-3 cycle: b would step into level 4, undefined.
        let mid3 = addr(&rule, "00:4");
        assert!(mid3.apply(&rule, Letter::B).is_err());
        // neighbors() treats the missing edge as absent.
        let nbrs = mid3.neighbors(&rule).unwrap();
        assert_eq!(nbrs.len(), 2);
    }

    #[test]
    fn address_parsing_round_trip_and_rejection() {
        let rule = fig1();
        for s in [":0", ":3", "0:0", "01:7", "1:5"] {
            let v = addr(&rule, s);
            assert_eq!(v.to_compact_string(), s);
        }
        assert!(VertexAddress::parse(&rule, ":4").is_err()); // pos out of range
        assert!(VertexAddress::parse(&rule, "2:0").is_err()); // bad path char
        assert!(VertexAddress::parse(&rule, "0").is_err()); // missing colon
    }

    fn arb_vertex(rule: &ScalingRule, max_level: u32) -> impl Strategy<Value = VertexAddress> {
        let rule = rule.clone();
        (0u32..max_level, any::<u64>(), any::<u64>()).prop_map(move |(depth, bits, posbits)| {
            let mut path = BitPath::EMPTY;
            for i in 0..depth {
                path = path.push((bits >> i) & 1 == 1);
            }
            let len = rule.cycle_len(depth + 1).unwrap();
            VertexAddress::new(&rule, path, (posbits % len as u64) as i64).unwrap()
        })
    }

    proptest! {
        #[test]
        fn letters_are_bijective(v in arb_vertex(&ScalingRule::canonical(), 12)) {
            let rule = ScalingRule::canonical();
            for letter in Letter::ALL {
                let w = v.apply(&rule, letter).unwrap();
                prop_assert_eq!(w.apply(&rule, letter.inverse()).unwrap(), v);
            }
        }

        #[test]
        fn b_cubed_is_identity(v in arb_vertex(&ScalingRule::canonical(), 12)) {
            let rule = ScalingRule::canonical();
            let w = [Letter::B, Letter::B, Letter::B];
            prop_assert_eq!(v.apply_word(&rule, &w).unwrap(), v);
        }

        #[test]
        fn images_stay_canonical(v in arb_vertex(&ScalingRule::canonical(), 12)) {
            let rule = ScalingRule::canonical();
            for letter in Letter::ALL {
                let w = v.apply(&rule, letter).unwrap();
                // reconstructing through the validating constructor must succeed
                prop_assert_eq!(VertexAddress::new(&rule, w.path, w.pos).unwrap(), w);
            }
        }
    }
}
