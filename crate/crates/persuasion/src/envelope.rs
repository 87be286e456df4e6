// SPDX-License-Identifier: Apache-2.0

//! Concave envelopes, convex minorants, tangents and crossings of scalar
//! functions on an interval of beliefs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_GRID: usize = 2001;

/// Points closer than this are treated as the same grid knot.
const KNOT_MERGE: f64 = 1e-13;
/// Envelope values within this distance of the input count as contact.
const CONTACT_TOL: f64 = 1e-8;
/// Slope differences below this are ties.
const SLOPE_TIE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvelopeError {
    #[error("function is not finite at {0}")]
    NonFinite(f64),
    #[error("empty interval [{0}, {1}]")]
    EmptyInterval(f64, f64),
    #[error("grid needs at least 3 points, got {0}")]
    GridTooSmall(usize),
}

/// Upper (or lower) hull of a sampled function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeResult {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub input: Vec<f64>,
    /// Hull vertices, ascending.
    pub vertices: Vec<(f64, f64)>,
    pub contact_set: Vec<f64>,
    /// Stretches where the envelope is a chord strictly above the input.
    pub segments: Vec<(f64, f64)>,
}

impl EnvelopeResult {
    /// Envelope at an arbitrary point: linear interpolation between vertices.
    pub fn eval(&self, x: f64) -> f64 {
        interpolate(&self.vertices, x)
    }

    /// The lifted segment containing `x`, if any.
    pub fn segment_containing(&self, x: f64) -> Option<(f64, f64)> {
        self.segments
            .iter()
            .copied()
            .find(|&(l, r)| l <= x && x <= r)
    }

    fn negated(mut self) -> Self {
        for v in self.values.iter_mut().chain(self.input.iter_mut()) {
            *v = -*v;
        }
        for v in self.vertices.iter_mut() {
            v.1 = -v.1;
        }
        self
    }
}

fn interpolate(vertices: &[(f64, f64)], x: f64) -> f64 {
    let n = vertices.len();
    if n == 1 || x <= vertices[0].0 {
        return vertices[0].1;
    }
    if x >= vertices[n - 1].0 {
        return vertices[n - 1].1;
    }
    let i = vertices.partition_point(|v| v.0 <= x) - 1;
    let (x0, y0) = vertices[i];
    let (x1, y1) = vertices[i + 1];
    if x == x0 {
        return y0;
    }
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Uniform grid on `[a, b]` with extra knots merged in.
pub fn grid_with_knots(a: f64, b: f64, n: usize, knots: &[f64]) -> Vec<f64> {
    let mut g: Vec<f64> = (0..n)
        .map(|i| {
            if i + 1 == n {
                b
            } else {
                a + (b - a) * i as f64 / (n - 1) as f64
            }
        })
        .collect();
    g.extend(knots.iter().copied().filter(|k| *k >= a && *k <= b));
    g.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(g.len());
    for x in g {
        match out.last_mut() {
            Some(last) if (x - *last).abs() <= KNOT_MERGE => {
                // Keep forced knots exactly.
                if knots.contains(&x) {
                    *last = x;
                }
            }
            _ => out.push(x),
        }
    }
    out
}

fn sample(f: &impl Fn(f64) -> f64, grid: &[f64], jumps: &[f64]) -> Result<Vec<f64>, EnvelopeError> {
    grid.iter()
        .map(|&x| {
            let mut y = f(x);
            if jumps.iter().any(|j| (j - x).abs() <= KNOT_MERGE) {
                let d = 1e-10;
                y = y
                    .max(f((x - d).max(grid[0])))
                    .max(f((x + d).min(grid[grid.len() - 1])));
            }
            if y.is_finite() {
                Ok(y)
            } else {
                Err(EnvelopeError::NonFinite(x))
            }
        })
        .collect()
}

fn upper_hull(points: &[(f64, f64)]) -> Vec<usize> {
    let mut hull: Vec<usize> = Vec::with_capacity(points.len());
    for i in 0..points.len() {
        while hull.len() >= 2 {
            let (o, a) = (points[hull[hull.len() - 2]], points[hull[hull.len() - 1]]);
            let b = points[i];
            let cross = (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    hull
}

fn build(grid: Vec<f64>, input: Vec<f64>) -> EnvelopeResult {
    let points: Vec<(f64, f64)> = grid.iter().copied().zip(input.iter().copied()).collect();
    let idx = upper_hull(&points);
    let vertices: Vec<(f64, f64)> = idx.iter().map(|&i| points[i]).collect();
    let values: Vec<f64> = grid
        .iter()
        .zip(&input)
        .map(|(&x, &y)| interpolate(&vertices, x).max(y))
        .collect();
    let contact_set = grid
        .iter()
        .zip(values.iter().zip(&input))
        .filter(|(_, (e, f))| *e - *f <= CONTACT_TOL)
        .map(|(&x, _)| x)
        .collect();
    let mut segments = Vec::new();
    for w in idx.windows(2) {
        let (i, j) = (w[0], w[1]);
        if j > i + 1 && (i + 1..j).any(|k| values[k] - input[k] > CONTACT_TOL) {
            segments.push((grid[i], grid[j]));
        }
    }
    EnvelopeResult {
        grid,
        values,
        input,
        vertices,
        contact_set,
        segments,
    }
}

fn check_interval(a: f64, b: f64, n: usize) -> Result<(), EnvelopeError> {
    if !(b > a) {
        return Err(EnvelopeError::EmptyInterval(a, b));
    }
    if n < 3 {
        return Err(EnvelopeError::GridTooSmall(n));
    }
    Ok(())
}

/// Smallest concave function above `f` on a uniform grid over `[a, b]`.
pub fn concave_envelope(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    grid_n: usize,
) -> Result<EnvelopeResult, EnvelopeError> {
    check_interval(a, b, grid_n)?;
    concave_envelope_on(f, grid_with_knots(a, b, grid_n, &[]), &[])
}

/// Concave envelope on a caller-supplied ascending grid. At each point of
/// `jumps` the sample takes the largest of the one-sided limits, which is the
/// upper-semicontinuous completion of a jump.
pub fn concave_envelope_on(
    f: impl Fn(f64) -> f64,
    grid: Vec<f64>,
    jumps: &[f64],
) -> Result<EnvelopeResult, EnvelopeError> {
    if grid.len() < 3 {
        return Err(EnvelopeError::GridTooSmall(grid.len()));
    }
    let input = sample(&f, &grid, jumps)?;
    Ok(build(grid, input))
}

/// Largest convex function below `f`.
pub fn convex_minorant(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    grid_n: usize,
) -> Result<EnvelopeResult, EnvelopeError> {
    check_interval(a, b, grid_n)?;
    convex_minorant_on(f, grid_with_knots(a, b, grid_n, &[]))
}

pub fn convex_minorant_on(
    f: impl Fn(f64) -> f64,
    grid: Vec<f64>,
) -> Result<EnvelopeResult, EnvelopeError> {
    Ok(concave_envelope_on(|x| -f(x), grid, &[])?.negated())
}

/// Convex minorant with a pointwise evaluator that never exceeds `f`.
#[derive(Debug, Clone)]
pub struct ConvexMinorant<F: Fn(f64) -> f64> {
    f: F,
    pub hull: EnvelopeResult,
}

impl<F: Fn(f64) -> f64> ConvexMinorant<F> {
    pub fn new(f: F, grid_n: usize) -> Result<Self, EnvelopeError> {
        let hull = convex_minorant(&f, 0.0, 1.0, grid_n)?;
        Ok(ConvexMinorant { f, hull })
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.hull.eval(x).min((self.f)(x))
    }

    /// Contact points of the minorant bracketing `x`; equal when `x` is itself
    /// a contact point.
    pub fn bracket(&self, x: f64) -> (f64, f64) {
        match self.hull.segment_containing(x) {
            Some((l, r)) if l < x && x < r => (l, r),
            _ => (x, x),
        }
    }
}

/// Concave envelope taken separately on `[0, split]` and `[split, 1]`.
#[derive(Debug, Clone)]
pub struct LocalConcavification<F: Fn(f64) -> f64> {
    f: F,
    pub split: f64,
    pub left: EnvelopeResult,
    pub right: EnvelopeResult,
    /// Lifted stretches with endpoints refined off the grid.
    pub segments: Vec<(f64, f64)>,
}

/// Splits `f` at `mu_e` and concavifies each piece.
pub fn local_concavification<F: Fn(f64) -> f64>(
    f: F,
    mu_e: f64,
    grid_n: usize,
) -> Result<LocalConcavification<F>, EnvelopeError> {
    if !(mu_e > 0.0 && mu_e < 1.0) {
        return Err(EnvelopeError::EmptyInterval(0.0, mu_e));
    }
    let half = (grid_n / 2).max(3);
    let left = concave_envelope(&f, 0.0, mu_e, half)?;
    let right = concave_envelope(&f, mu_e, 1.0, half)?;
    let mut segments = Vec::new();
    for (env, lo, hi) in [(&left, 0.0, mu_e), (&right, mu_e, 1.0)] {
        let h = (hi - lo) / (half - 1) as f64;
        for &(l, r) in &env.segments {
            segments.push(refine_segment(&f, l, r, lo, hi, h));
        }
    }
    Ok(LocalConcavification {
        f,
        split: mu_e,
        left,
        right,
        segments,
    })
}

// Alternating tangent refinement of a grid bitangent. Endpoints sitting on
// the boundary of the piece stay put.
fn refine_segment(
    f: &impl Fn(f64) -> f64,
    mut l: f64,
    mut r: f64,
    lo: f64,
    hi: f64,
    h: f64,
) -> (f64, f64) {
    let (fixed_l, fixed_r) = (l <= lo, r >= hi);
    for _ in 0..30 {
        let (pl, pr) = (l, r);
        if !fixed_r {
            let win = ((r - 2.0 * h).max(l + 0.5 * h), (r + 2.0 * h).min(hi));
            if let Ok(t) = tangent_with(f, (l, f(l)), win, Direction::MaxSlope, 201) {
                r = t.touch_point;
            }
        }
        if !fixed_l {
            let win = ((l - 2.0 * h).max(lo), (l + 2.0 * h).min(r - 0.5 * h));
            if let Ok(t) = tangent_with(f, (r, f(r)), win, Direction::MinSlope, 201) {
                l = t.touch_point;
            }
        }
        if (l - pl).abs() < 1e-15 && (r - pr).abs() < 1e-15 {
            break;
        }
    }
    (l, r)
}

impl<F: Fn(f64) -> f64> LocalConcavification<F> {
    pub fn eval(&self, x: f64) -> f64 {
        let fx = (self.f)(x);
        match self.segment_containing(x) {
            Some((l, r)) => fx.max(chord(&self.f, l, r, x)),
            None => fx,
        }
    }

    pub fn segment_containing(&self, x: f64) -> Option<(f64, f64)> {
        self.segments
            .iter()
            .copied()
            .find(|&(l, r)| l <= x && x <= r)
    }

    pub fn base(&self, x: f64) -> f64 {
        (self.f)(x)
    }
}

fn chord(f: &impl Fn(f64) -> f64, l: f64, r: f64, x: f64) -> f64 {
    let (fl, fr) = (f(l), f(r));
    fl + (fr - fl) * (x - l) / (r - l)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    MaxSlope,
    MinSlope,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangencyResult {
    pub touch_point: f64,
    pub slope: f64,
    pub valid: bool,
}

/// Extremal chord slope from `anchor` to the graph of `f` over `interval`.
/// Ties go to the largest touch point.
pub fn tangent_from_point(
    f: impl Fn(f64) -> f64,
    anchor: (f64, f64),
    interval: (f64, f64),
    direction: Direction,
) -> Result<TangencyResult, EnvelopeError> {
    tangent_with(&f, anchor, interval, direction, DEFAULT_GRID)
}

pub(crate) fn tangent_with(
    f: &impl Fn(f64) -> f64,
    anchor: (f64, f64),
    interval: (f64, f64),
    direction: Direction,
    n: usize,
) -> Result<TangencyResult, EnvelopeError> {
    let (lo, hi) = interval;
    if !(hi >= lo) {
        return Err(EnvelopeError::EmptyInterval(lo, hi));
    }
    let (x0, y0) = anchor;
    let sign = match direction {
        Direction::MaxSlope => 1.0,
        Direction::MinSlope => -1.0,
    };
    // Score is the signed slope; larger is better.
    let score = |t: f64| -> f64 {
        if t == x0 {
            f64::NEG_INFINITY
        } else {
            sign * (f(t) - y0) / (t - x0)
        }
    };
    if hi == lo {
        let s = score(lo);
        return Ok(TangencyResult {
            touch_point: lo,
            slope: sign * s,
            valid: s.is_finite(),
        });
    }
    let n = n.max(3);
    let grid: Vec<f64> = (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect();
    let scores: Vec<f64> = grid.iter().map(|&t| score(t)).collect();
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(EnvelopeError::NonFinite(grid[i]));
    }
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !best.is_finite() {
        return Ok(TangencyResult {
            touch_point: hi,
            slope: f64::NAN,
            valid: false,
        });
    }
    let i = (0..n)
        .rev()
        .find(|&i| scores[i] >= best - SLOPE_TIE)
        .unwrap_or(n - 1);
    let (mut t_best, mut s_best) = (grid[i], scores[i]);
    let (a, b) = (grid[i.saturating_sub(1)], grid[(i + 1).min(n - 1)]);
    let t_r = golden_max(&score, a, b);
    let s_r = score(t_r);
    // On a strict grid peak the refined point is trusted even when its
    // score gain is below the tie tolerance.
    let strict_peak = (i == 0 || scores[i - 1] < best - SLOPE_TIE)
        && (i + 1 == n || scores[i + 1] < best - SLOPE_TIE);
    if s_r > s_best + SLOPE_TIE || (strict_peak && s_r >= s_best - SLOPE_TIE) {
        t_best = t_r;
        s_best = s_r;
    }
    if score(hi) >= s_best - SLOPE_TIE {
        t_best = hi;
        s_best = score(hi);
    }
    Ok(TangencyResult {
        touch_point: t_best,
        slope: sign * s_best,
        valid: true,
    })
}

/// Golden-section search for the maximizer of a unimodal function.
pub fn golden_max(g: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    const R: f64 = 0.618_033_988_749_894_8;
    let mut c = b - R * (b - a);
    let mut d = a + R * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..200 {
        if b - a <= 1e-14 * (1.0 + a.abs()) {
            break;
        }
        if gc < gd {
            a = c;
            c = d;
            gc = gd;
            d = a + R * (b - a);
            gd = g(d);
        } else {
            b = d;
            d = c;
            gd = gc;
            c = b - R * (b - a);
            gc = g(c);
        }
    }
    let m = 0.5 * (a + b);
    [m, c, d]
        .into_iter()
        .fold(m, |acc, t| if g(t) > g(acc) { t } else { acc })
}

/// Root of `f - g` on `[a, b]` by bisection. `None` when the difference does
/// not change sign.
pub fn chord_crossing(
    f: impl Fn(f64) -> f64,
    g: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
) -> Option<f64> {
    bisect_root(|x| f(x) - g(x), a, b)
}

pub fn bisect_root(d: impl Fn(f64) -> f64, a: f64, b: f64) -> Option<f64> {
    let (da, db) = (d(a), d(b));
    if da == 0.0 {
        return Some(a);
    }
    if db == 0.0 {
        return Some(b);
    }
    if !(da.is_finite() && db.is_finite()) || da.signum() == db.signum() {
        return None;
    }
    let (mut lo, mut hi) = (a, b);
    let neg_lo = da < 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo.min(hi) || mid >= lo.max(hi) {
            break;
        }
        let dm = d(mid);
        if dm == 0.0 {
            return Some(mid);
        }
        if (dm < 0.0) == neg_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (dl, dh) = (d(lo).abs(), d(hi).abs());
    Some(if dl <= dh { lo } else { hi })
}

/// Bisection on a predicate: `good` satisfies it, `bad` does not. Returns the
/// last point known to satisfy it.
pub fn boundary(pred: impl Fn(f64) -> bool, mut good: f64, mut bad: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (good + bad);
        if mid == good || mid == bad {
            break;
        }
        if pred(mid) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    good
}

/// First maximal run of `[a, b]` on which `g >= -tol`, located on a grid and
/// refined by bisection at both ends.
pub fn feasible_run(
    g: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    n: usize,
    knots: &[f64],
    tol: f64,
) -> Option<(f64, f64)> {
    let grid = grid_with_knots(a, b, n, knots);
    let ok = |x: f64| g(x) >= -tol;
    let start = grid.iter().position(|&x| ok(x))?;
    let lo = if start == 0 {
        grid[0]
    } else {
        boundary(ok, grid[start], grid[start - 1])
    };
    let end = match grid[start..].iter().position(|&x| !ok(x)) {
        None => grid[grid.len() - 1],
        Some(k) => boundary(ok, grid[start + k - 1], grid[start + k]),
    };
    Some((lo, end))
}
