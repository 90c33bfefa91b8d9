//! Orbit machinery for the two-map interval system `(I, delta1, delta2)`
//! obtained by freezing one argument of `F` at an endpoint:
//! `delta1(t) = F(a, t)` and `delta2(t) = F(t, b)`.
//!
//! `orbit_expand` grows the orbit of a seed breadth-first by word length
//! until the table is an epsilon-net of the interval, `contraction_modulus`
//! estimates the worst stretch factor of a map over pairs at distance at
//! least epsilon, and `mixing_depth` turns that estimate into the word
//! length after which every composed image has diameter below epsilon.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};
use std::ops::Bound;

use serde::Serialize;
use thiserror::Error;

use crate::exprdsl::{eval, ExprAst, ExprError};
use crate::numfmt::sig17;
use crate::parallel::{map_values, try_map_values};

/// Grid used to validate that the slice maps send the interval into itself.
const VALIDATION_GRID_N: usize = 10_000;

/// Absolute tolerance for the construction-time range check.
const TOL_BOX: f64 = 1e-12;

/// Errors from the orbit machinery.
#[derive(Debug, Error)]
pub enum DynError {
    #[error("interval requires finite a < b, got [{a}, {b}]")]
    BadInterval { a: f64, b: f64 },

    #[error("map {map} leaves the interval: value {value} at t = {point} (worst overshoot {overshoot:e})")]
    RangeViolation {
        map: u8,
        point: f64,
        value: f64,
        overshoot: f64,
    },

    #[error("no admissible pair: epsilon {epsilon} exceeds interval diameter {diam}")]
    NoAdmissiblePair { epsilon: f64, diam: f64 },

    #[error("not contracting: modulus estimate {c} is >= 1")]
    NotContracting { c: f64 },

    #[error("node budget exhausted before the epsilon-net was achieved: gap {achieved_gap} > {epsilon} with {nodes} nodes")]
    IncompleteNet {
        achieved_gap: f64,
        epsilon: f64,
        nodes: usize,
    },

    #[error("seed {seed} lies outside [{a}, {b}]")]
    SeedOutsideInterval { seed: f64, a: f64, b: f64 },

    #[error("invalid parameter: {message}")]
    InvalidParameter { message: String },

    #[error(transparent)]
    Eval(#[from] ExprError),
}

/// A closed interval `[a, b]` with `a < b`, both finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self, DynError> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(DynError::BadInterval { a, b });
        }
        Ok(Interval { a, b })
    }

    pub fn width(&self) -> f64 {
        self.b - self.a
    }

    pub fn contains(&self, x: f64) -> bool {
        self.a <= x && x <= self.b
    }

    /// The i-th of `n + 1` uniform grid points; the endpoints are exact.
    pub fn grid_point(&self, i: usize, n: usize) -> f64 {
        if i == 0 {
            self.a
        } else if i >= n {
            self.b
        } else {
            self.a + (i as f64) * self.width() / (n as f64)
        }
    }
}

/// The two-map system on an interval. Immutable and safe to share.
#[derive(Debug, Clone)]
pub struct DynSystem {
    expr: ExprAst,
    interval: Interval,
}

impl DynSystem {
    /// Build the system for `F` over `{x, y}`, checking on a uniform grid of
    /// 10,001 points per slice that both maps stay inside the interval to
    /// within `1e-12`.
    pub fn new(expr: ExprAst, interval: Interval) -> Result<Self, DynError> {
        let sys = DynSystem { expr, interval };
        for map in [1u8, 2u8] {
            let values = try_map_values(VALIDATION_GRID_N + 1, |i| {
                sys.apply_raw(map, interval.grid_point(i, VALIDATION_GRID_N))
            })?;
            for (i, &v) in values.iter().enumerate() {
                let overshoot = (interval.a - v).max(v - interval.b);
                if overshoot > TOL_BOX {
                    return Err(DynError::RangeViolation {
                        map,
                        point: interval.grid_point(i, VALIDATION_GRID_N),
                        value: v,
                        overshoot,
                    });
                }
            }
        }
        Ok(sys)
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn expr(&self) -> &ExprAst {
        &self.expr
    }

    /// `delta1(t) = F(a, t)`, clamped into the interval when the evaluation
    /// strays by no more than a rounding slack.
    pub fn delta1(&self, t: f64) -> Result<f64, DynError> {
        self.apply(1, t)
    }

    /// `delta2(t) = F(t, b)`.
    pub fn delta2(&self, t: f64) -> Result<f64, DynError> {
        self.apply(2, t)
    }

    /// Apply map `1` or `2`.
    pub fn apply(&self, map: u8, t: f64) -> Result<f64, DynError> {
        let v = self.apply_raw(map, t)?;
        let slack = 1e-9 * (1.0 + self.interval.width());
        let overshoot = (self.interval.a - v).max(v - self.interval.b);
        if overshoot <= 0.0 {
            Ok(v)
        } else if overshoot <= slack {
            Ok(v.clamp(self.interval.a, self.interval.b))
        } else {
            Err(DynError::RangeViolation {
                map,
                point: t,
                value: v,
                overshoot,
            })
        }
    }

    fn apply_raw(&self, map: u8, t: f64) -> Result<f64, DynError> {
        let env = match map {
            1 => [("x", self.interval.a), ("y", t)],
            _ => [("x", t), ("y", self.interval.b)],
        };
        Ok(eval(&self.expr, &env)?)
    }
}

/// Grid estimate of the contraction modulus of `map`: the maximum of
/// `|map(x1) - map(x2)| / |x1 - x2|` over grid pairs at distance at least
/// `epsilon`. A lower bound for the true modulus.
pub fn contraction_modulus<F>(
    map: F,
    interval: Interval,
    epsilon: f64,
    grid_n: usize,
) -> Result<f64, DynError>
where
    F: Fn(f64) -> Result<f64, DynError> + Sync,
{
    if epsilon.is_nan() || epsilon <= 0.0 || grid_n < 2 {
        return Err(DynError::InvalidParameter {
            message: format!("contraction_modulus needs epsilon > 0 and grid_n >= 2, got ({epsilon}, {grid_n})"),
        });
    }
    if epsilon > interval.width() {
        return Err(DynError::NoAdmissiblePair {
            epsilon,
            diam: interval.width(),
        });
    }
    let n = grid_n;
    let xs: Vec<f64> = (0..=n).map(|i| interval.grid_point(i, n)).collect();
    let ys = try_map_values(n + 1, |i| map(xs[i]))?;

    // One row per left index; each row scans its admissible partners.
    let row_max = map_values(n + 1, |i| {
        let mut best = f64::NEG_INFINITY;
        for j in (i + 1)..=n {
            let d = xs[j] - xs[i];
            if d >= epsilon {
                let ratio = (ys[j] - ys[i]).abs() / d;
                if ratio > best {
                    best = ratio;
                }
            }
        }
        best
    });
    let c = row_max.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    debug_assert!(c.is_finite());
    Ok(c)
}

/// Smallest `n >= 0` with `c_eps^n * diam < epsilon`, by direct iteration.
pub fn mixing_depth(c_eps: f64, diam: f64, epsilon: f64) -> Result<u32, DynError> {
    if !(diam.is_finite() && epsilon.is_finite()) || diam <= 0.0 || epsilon <= 0.0 {
        return Err(DynError::InvalidParameter {
            message: format!("mixing_depth needs positive diam and epsilon, got ({diam}, {epsilon})"),
        });
    }
    if c_eps.is_nan() || c_eps < 0.0 {
        return Err(DynError::InvalidParameter {
            message: format!("mixing_depth needs c_eps >= 0, got {c_eps}"),
        });
    }
    if c_eps >= 1.0 {
        return Err(DynError::NotContracting { c: c_eps });
    }
    if c_eps > 0.999_999 {
        // Too slow to iterate one step at a time; use logarithms and then
        // trim to the smallest admissible n.
        let mut n = ((epsilon / diam).ln() / c_eps.ln()).ceil().max(0.0) as u32;
        while n > 0 && c_eps.powi((n - 1) as i32) * diam < epsilon {
            n -= 1;
        }
        while c_eps.powi(n as i32) * diam >= epsilon {
            n += 1;
        }
        return Ok(n);
    }
    let mut n = 0u32;
    let mut v = diam;
    while v >= epsilon {
        v *= c_eps;
        n += 1;
    }
    Ok(n)
}

/// Word over `{1, 2}`: map indices applied left to right from the seed.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Word(Vec<u8>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn child(&self, map: u8) -> Self {
        debug_assert!(map == 1 || map == 2);
        let mut next = self.0.clone();
        next.push(map);
        Word(next)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn maps(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for m in &self.0 {
            write!(f, "{m}")?;
        }
        Ok(())
    }
}

impl Serialize for Word {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// An orbit point with the word that produced it.
#[derive(Debug, Clone, Serialize)]
pub struct OrbitNode {
    pub point: f64,
    pub word: Word,
}

impl OrbitNode {
    pub fn depth(&self) -> usize {
        self.word.len()
    }
}

/// Deduplicated orbit points, sorted ascending.
#[derive(Debug, Clone, Serialize)]
pub struct OrbitTable {
    pub seed: f64,
    pub delta_dup: f64,
    pub nodes: Vec<OrbitNode>,
}

impl OrbitTable {
    pub fn points(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.point).collect()
    }

    /// CSV export: header `point,depth,word`, ascending points, 17
    /// significant digits.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "point,depth,word")?;
        for node in &self.nodes {
            writeln!(w, "{},{},{}", sig17(node.point), node.depth(), node.word)?;
        }
        Ok(())
    }
}

/// Largest gap left by `points` in `interval`: consecutive gaps plus the gap
/// from `a` to the first point and from the last point to `b`.
///
/// Returns `(gap <= epsilon, gap)`. `points` must be sorted ascending and
/// lie inside the interval.
pub fn epsilon_net_check(points: &[f64], interval: Interval, epsilon: f64) -> (bool, f64) {
    let gap = largest_gap(points, interval);
    (gap <= epsilon, gap)
}

pub(crate) fn largest_gap(points: &[f64], interval: Interval) -> f64 {
    if points.is_empty() {
        return interval.width();
    }
    let mut gap = (points[0] - interval.a).max(interval.b - points[points.len() - 1]);
    for pair in points.windows(2) {
        gap = gap.max(pair[1] - pair[0]);
    }
    gap
}

/// Monotone map from finite f64 to u64 preserving order; used to keep orbit
/// points in a BTreeMap.
fn point_key(x: f64) -> u64 {
    let bits = x.to_bits();
    if bits & (1 << 63) != 0 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

pub(crate) struct PointSet {
    by_key: BTreeMap<u64, usize>,
}

impl PointSet {
    pub(crate) fn new() -> Self {
        PointSet {
            by_key: BTreeMap::new(),
        }
    }

    /// Index of an existing point within `delta_dup` of `p`, if any. The
    /// table keeps consecutive points more than `delta_dup` apart, so at
    /// most the two key-neighbours can qualify.
    pub(crate) fn near(&self, points: &[f64], p: f64, delta_dup: f64) -> Option<usize> {
        let k = point_key(p);
        if let Some((_, &idx)) = self.by_key.range(..=k).next_back() {
            if (points[idx] - p).abs() <= delta_dup {
                return Some(idx);
            }
        }
        if let Some((_, &idx)) = self
            .by_key
            .range((Bound::Excluded(k), Bound::Unbounded))
            .next()
        {
            if (points[idx] - p).abs() <= delta_dup {
                return Some(idx);
            }
        }
        None
    }

    pub(crate) fn insert(&mut self, p: f64, idx: usize) {
        self.by_key.insert(point_key(p), idx);
    }

    /// Indices of the nearest stored points strictly left of and at-or-right
    /// of `p`.
    pub(crate) fn bracket(&self, p: f64) -> (Option<usize>, Option<usize>) {
        let k = point_key(p);
        let left = self.by_key.range(..k).next_back().map(|(_, &i)| i);
        let right = self.by_key.range(k..).next().map(|(_, &i)| i);
        (left, right)
    }

    pub(crate) fn sorted_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.by_key.values().copied()
    }
}

/// Expand the orbit of `seed` breadth-first by word length until the table
/// is an `epsilon`-net of the interval or `max_nodes` is reached.
///
/// New points within `delta_dup` of an existing one are dropped, keeping the
/// first-discovered (shallowest-word) representative. A point whose
/// bracketing gap is already at most `epsilon` is dropped too: it would
/// refine a region the net already covers, and because the maps contract,
/// its entire subtree stays within that gap of the subtree of a surviving
/// neighbour. Without this pruning the expansion is exponential in depth
/// and lopsided systems exhaust any budget long before the slow corner
/// gap closes. If the seed alone is not already a net, the interval
/// endpoints are inserted as additional depth-0 roots before expansion
/// begins: they anchor the boundary gaps and are the seeds the
/// value-propagation stage uses.
pub fn orbit_expand(
    sys: &DynSystem,
    seed: f64,
    epsilon: f64,
    max_nodes: usize,
    delta_dup: f64,
) -> Result<OrbitTable, DynError> {
    let interval = sys.interval();
    if !interval.contains(seed) {
        return Err(DynError::SeedOutsideInterval {
            seed,
            a: interval.a,
            b: interval.b,
        });
    }
    if epsilon.is_nan() || delta_dup.is_nan() || delta_dup <= 0.0 || epsilon <= delta_dup {
        return Err(DynError::InvalidParameter {
            message: format!("orbit_expand needs epsilon > delta_dup > 0, got ({epsilon}, {delta_dup})"),
        });
    }
    if max_nodes == 0 {
        return Err(DynError::InvalidParameter {
            message: "orbit_expand needs max_nodes >= 1".to_string(),
        });
    }

    let mut nodes: Vec<OrbitNode> = Vec::new();
    let mut points: Vec<f64> = Vec::new();
    let mut set = PointSet::new();
    let insert = |nodes: &mut Vec<OrbitNode>,
                      points: &mut Vec<f64>,
                      set: &mut PointSet,
                      point: f64,
                      word: Word|
     -> Option<usize> {
        if !nodes.is_empty() {
            if set.near(points, point, delta_dup).is_some() {
                return None;
            }
            let (left, right) = set.bracket(point);
            let lo = left.map(|i| points[i]).unwrap_or(interval.a);
            let hi = right.map(|i| points[i]).unwrap_or(interval.b);
            if hi - lo <= epsilon {
                return None;
            }
        }
        let idx = nodes.len();
        nodes.push(OrbitNode { point, word });
        points.push(point);
        set.insert(point, idx);
        Some(idx)
    };

    insert(&mut nodes, &mut points, &mut set, seed, Word::empty());
    let gap_of = |set: &PointSet, points: &[f64]| {
        let sorted: Vec<f64> = set.sorted_indices().map(|i| points[i]).collect();
        largest_gap(&sorted, interval)
    };

    let mut achieved = gap_of(&set, &points) <= epsilon;
    if !achieved {
        // Anchor the endpoints as extra roots.
        insert(&mut nodes, &mut points, &mut set, interval.a, Word::empty());
        insert(&mut nodes, &mut points, &mut set, interval.b, Word::empty());
        achieved = gap_of(&set, &points) <= epsilon;

        let mut frontier: Vec<usize> = (0..nodes.len()).collect();
        'levels: while !achieved && !frontier.is_empty() {
            let mut next = Vec::new();
            for &idx in &frontier {
                let parent_point = nodes[idx].point;
                let parent_word = nodes[idx].word.clone();
                for map in [1u8, 2u8] {
                    if nodes.len() >= max_nodes {
                        break 'levels;
                    }
                    let child = sys.apply(map, parent_point)?;
                    if let Some(new_idx) = insert(
                        &mut nodes,
                        &mut points,
                        &mut set,
                        child,
                        parent_word.child(map),
                    ) {
                        next.push(new_idx);
                    }
                }
            }
            frontier = next;
            achieved = gap_of(&set, &points) <= epsilon;
        }
        achieved = achieved || gap_of(&set, &points) <= epsilon;
    }

    let gap = gap_of(&set, &points);
    if !achieved && gap > epsilon {
        return Err(DynError::IncompleteNet {
            achieved_gap: gap,
            epsilon,
            nodes: nodes.len(),
        });
    }

    let sorted_nodes: Vec<OrbitNode> = set
        .sorted_indices()
        .map(|i| nodes[i].clone())
        .collect();
    Ok(OrbitTable {
        seed,
        delta_dup,
        nodes: sorted_nodes,
    })
}

/// Interval hull `[min, max]` of `map` over a uniform grid. The hull of a
/// continuous map on an interval is exact up to grid resolution; a constant
/// map gives a degenerate hull, so this is not an [`Interval`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Hull {
    pub lo: f64,
    pub hi: f64,
}

impl Hull {
    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }
}

pub fn image_hull<F>(map: F, interval: Interval, grid_n: usize) -> Result<Hull, DynError>
where
    F: Fn(f64) -> Result<f64, DynError> + Sync,
{
    if grid_n < 2 {
        return Err(DynError::InvalidParameter {
            message: format!("image_hull needs grid_n >= 2, got {grid_n}"),
        });
    }
    let ys = try_map_values(grid_n + 1, |i| map(interval.grid_point(i, grid_n)))?;
    let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Hull { lo, hi })
}

/// Numerical version of the quantities in the minimality argument: the two
/// modulus estimates at `epsilon`, their maximum, and the word length after
/// which composed images have diameter below `epsilon`.
#[derive(Debug, Clone, Serialize)]
pub struct DensityCertificate {
    pub epsilon: f64,
    pub c1: f64,
    pub c2: f64,
    pub c_eps: f64,
    pub depth_bound: u32,
    pub achieved_gap: f64,
}

pub fn density_certificate(
    sys: &DynSystem,
    epsilon: f64,
    grid_n: usize,
    achieved_gap: f64,
) -> Result<DensityCertificate, DynError> {
    let interval = sys.interval();
    // Pair separation cannot exceed the diameter; an epsilon beyond it
    // still certifies (the net is trivially achieved).
    let sep = epsilon.min(interval.width());
    let c1 = contraction_modulus(|t| sys.delta1(t), interval, sep, grid_n)?;
    let c2 = contraction_modulus(|t| sys.delta2(t), interval, sep, grid_n)?;
    let c_eps = c1.max(c2);
    let depth_bound = mixing_depth(c_eps, interval.width(), epsilon)?;
    Ok(DensityCertificate {
        epsilon,
        c1,
        c2,
        c_eps,
        depth_bound,
        achieved_gap,
    })
}
