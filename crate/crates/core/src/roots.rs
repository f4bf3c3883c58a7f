//! Locating the ends of a sublevel set `{m : f(m) < threshold}` around a
//! feasible seed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed range `[low, high]` inside `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub const UNIT: Interval = Interval {
        low: 0.0,
        high: 1.0,
    };

    pub fn new(low: f64, high: f64) -> Self {
        Self { low, high }
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }

    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.low <= other.low && other.high <= self.high
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let low = self.low.max(other.low);
        let high = self.high.min(other.high);
        (low <= high).then_some(Interval { low, high })
    }
}

/// A log-wealth function of the candidate mean.
pub trait LogWealthFn {
    fn value(&mut self, m: f64) -> f64;

    /// Value and derivative, when the derivative is cheap.
    fn value_and_slope(&mut self, m: f64) -> (f64, Option<f64>) {
        (self.value(m), None)
    }
}

/// Adapts a closure to [`LogWealthFn`].
pub struct Plain<F>(pub F);

impl<F: FnMut(f64) -> f64> LogWealthFn for Plain<F> {
    fn value(&mut self, m: f64) -> f64 {
        (self.0)(m)
    }
}

/// How the side searches treat the function between the seed and the
/// bracket ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SearchMode {
    /// `f` is convex: at most one crossing per side.
    Convex,
    /// No shape assumption: a uniform grid of `points` on `[eps, 1-eps]` is
    /// scanned outward from the seed and the first crossing is refined.
    Guarded { points: usize },
}

/// Bracket and accuracy for a sublevel search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSpec {
    pub eps: f64,
    pub tol: f64,
    pub mode: SearchMode,
}

impl SearchSpec {
    pub const fn convex(eps: f64) -> Self {
        Self {
            eps,
            tol: 1e-9,
            mode: SearchMode::Convex,
        }
    }

    pub const fn guarded(eps: f64) -> Self {
        Self {
            eps,
            tol: 1e-9,
            mode: SearchMode::Guarded { points: 64 },
        }
    }
}

const MAX_ITER: usize = 200;

fn excess<F: LogWealthFn>(f: &mut F, m: f64, thr: f64) -> f64 {
    let v = f.value(m) - thr;
    // NaN counts as rejection: conservative for the caller's interval only
    // if it is never inside, so map it to +inf and let the bracket move on.
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Crossing between `inside` (excess < 0) and `outside` (excess >= 0) by
/// the Illinois variant of regula falsi with a bisection safeguard. Returns
/// the final outer end, so the result is never strictly inside the set.
fn bracket_crossing<F: LogWealthFn>(
    f: &mut F,
    mut inside: f64,
    mut g_in: f64,
    mut outside: f64,
    mut g_out: f64,
    thr: f64,
    tol: f64,
) -> f64 {
    let mut last_kept = 0i8;
    let mut width = (outside - inside).abs();
    for _ in 0..MAX_ITER {
        if (outside - inside).abs() <= tol {
            break;
        }
        let mid = 0.5 * (inside + outside);
        let mut x = if g_in.is_finite() && g_out.is_finite() && g_out > g_in {
            (inside * g_out - outside * g_in) / (g_out - g_in)
        } else {
            mid
        };
        // Keep the trial point strictly inside the bracket with some margin.
        let lo = inside.min(outside);
        let hi = inside.max(outside);
        let margin = 0.25 * tol;
        if !(x > lo + margin && x < hi - margin) {
            x = mid;
        }
        let g = excess(f, x, thr);
        if g < 0.0 {
            inside = x;
            g_in = g;
            if last_kept == 1 {
                g_out *= 0.5;
            }
            last_kept = 1;
        } else {
            outside = x;
            g_out = g;
            if last_kept == -1 {
                g_in *= 0.5;
            }
            last_kept = -1;
        }
        let new_width = (outside - inside).abs();
        if new_width > 0.5 * width {
            // Slow progress: force a bisection step.
            let m2 = 0.5 * (inside + outside);
            let g2 = excess(f, m2, thr);
            if g2 < 0.0 {
                inside = m2;
                g_in = g2;
            } else {
                outside = m2;
                g_out = g2;
            }
            last_kept = 0;
        }
        width = (outside - inside).abs();
    }
    outside
}

/// Crossing of a convex `f` by Newton steps taken from the outer end of
/// the bracket; for a convex function these stay outside the set and
/// approach the crossing monotonically.
fn newton_crossing<F: LogWealthFn>(
    f: &mut F,
    inside: f64,
    g_in: f64,
    outside: f64,
    g_out: f64,
    slope_out: f64,
    thr: f64,
    tol: f64,
) -> f64 {
    let dir = if outside > inside { 1.0 } else { -1.0 };
    let (mut a, mut ga) = (inside, g_in);
    let (mut b, mut gb, mut sb) = (outside, g_out, slope_out);
    for _ in 0..MAX_ITER {
        if (b - a).abs() <= tol {
            return b;
        }
        // Moving from b toward a, the slope must point upward away from a.
        let step = if sb.is_finite() && sb * dir > 0.0 && gb.is_finite() {
            gb / sb
        } else {
            f64::NAN
        };
        let mut x = b - step;
        let newton_ok = step.is_finite() && (x - a) * dir > 0.0 && (b - x) * dir >= 0.0;
        if !newton_ok {
            x = 0.5 * (a + b);
        } else if (b - x).abs() < 0.5 * tol {
            // Converged from the outside; confirm the crossing lies within tol.
            let probe = b - dir * tol;
            if (probe - a) * dir <= 0.0 {
                return b;
            }
            let g = excess(f, probe, thr);
            if g < 0.0 {
                return b;
            }
            x = probe;
        }
        let (v, s) = f.value_and_slope(x);
        let g = if v.is_nan() { f64::INFINITY } else { v - thr };
        if g < 0.0 {
            a = x;
            ga = g;
        } else {
            b = x;
            gb = g;
            sb = s.unwrap_or(f64::NAN);
        }
        if s.is_none() {
            return bracket_crossing(f, a, ga, b, gb, thr, tol);
        }
    }
    b
}

/// Grid points of a guarded scan strictly between `from` and `to`, in scan
/// order. Empty for convex searches.
pub(crate) fn scan_points(spec: &SearchSpec, from: f64, to: f64) -> Vec<f64> {
    let SearchMode::Guarded { points } = spec.mode else {
        return Vec::new();
    };
    let n = points.max(2);
    let lo = spec.eps;
    let h = (1.0 - 2.0 * spec.eps) / (n - 1) as f64;
    let dir = if to > from { 1.0 } else { -1.0 };
    let mut pts: Vec<f64> = (0..n)
        .map(|i| lo + i as f64 * h)
        .filter(|&x| (x - from) * dir > 0.0 && (to - x) * dir > 0.0)
        .collect();
    if dir < 0.0 {
        pts.reverse();
    }
    pts
}

/// Searches one side of the seed, up to `stop`. Returns `None` when the
/// function stays below the threshold all the way to `stop`.
fn side<F: LogWealthFn>(
    f: &mut F,
    seed: f64,
    g_seed: f64,
    stop: f64,
    thr: f64,
    spec: &SearchSpec,
) -> Option<f64> {
    if (stop - seed).abs() <= 0.0 {
        return None;
    }
    match spec.mode {
        SearchMode::Convex => {
            let (v, s) = f.value_and_slope(stop);
            let g = if v.is_nan() { f64::INFINITY } else { v - thr };
            if g < 0.0 {
                return None;
            }
            Some(match s {
                Some(slope) => newton_crossing(f, seed, g_seed, stop, g, slope, thr, spec.tol),
                None => bracket_crossing(f, seed, g_seed, stop, g, thr, spec.tol),
            })
        }
        SearchMode::Guarded { .. } => {
            let mut prev = seed;
            let mut g_prev = g_seed;
            let mut pts = scan_points(spec, seed, stop);
            pts.push(stop);
            for x in pts {
                let g = excess(f, x, thr);
                if g >= 0.0 {
                    return Some(bracket_crossing(f, prev, g_prev, x, g, thr, spec.tol));
                }
                prev = x;
                g_prev = g;
            }
            None
        }
    }
}

/// Sublevel interval around `seed`, restricted to `within`.
///
/// Ends of `within` that are not crossed are returned unchanged, except that
/// an end lying beyond the search bracket `[eps, 1 - eps]` is clamped to 0
/// or 1 when the function is still below the threshold at the bracket edge.
pub(crate) fn sublevel_within<F: LogWealthFn>(
    f: &mut F,
    threshold: f64,
    seed: f64,
    within: Interval,
    spec: &SearchSpec,
) -> Result<Interval> {
    let lo_edge = spec.eps;
    let hi_edge = 1.0 - spec.eps;
    let seed = seed.clamp(lo_edge, hi_edge);
    let v = f.value(seed);
    if !(v < threshold) {
        return Err(Error::InfeasibleSeed {
            seed,
            log_wealth: v,
            threshold,
        });
    }
    let g_seed = v - threshold;

    let (left_stop, left_clamp) = if within.low <= lo_edge {
        (lo_edge, 0.0_f64.max(within.low))
    } else {
        (within.low, within.low)
    };
    let (right_stop, right_clamp) = if within.high >= hi_edge {
        (hi_edge, 1.0_f64.min(within.high))
    } else {
        (within.high, within.high)
    };

    let low = if left_stop < seed {
        side(f, seed, g_seed, left_stop, threshold, spec).unwrap_or(left_clamp)
    } else {
        left_clamp.min(seed)
    };
    let high = if right_stop > seed {
        side(f, seed, g_seed, right_stop, threshold, spec).unwrap_or(right_clamp)
    } else {
        right_clamp.max(seed)
    };
    Ok(Interval { low, high })
}

/// Ends of the sublevel set `{m : log_wealth_at(m) < threshold}` around a
/// feasible seed, for a convex log wealth, each located to within `tol`.
/// Sides with no crossing inside `[1e-9, 1 - 1e-9]` are clamped to 0 or 1.
pub fn find_sublevel_interval<F>(
    log_wealth_at: F,
    threshold: f64,
    seed: f64,
    tol: f64,
) -> Result<Interval>
where
    F: FnMut(f64) -> f64,
{
    let spec = SearchSpec {
        tol,
        ..SearchSpec::convex(1e-9)
    };
    sublevel_within(&mut Plain(log_wealth_at), threshold, seed, Interval::UNIT, &spec)
}

/// As [`find_sublevel_interval`], without assuming convexity: returns the
/// largest interval around the seed found by a grid scan on each side.
pub fn find_sublevel_interval_guarded<F>(
    log_wealth_at: F,
    threshold: f64,
    seed: f64,
    spec: &SearchSpec,
) -> Result<Interval>
where
    F: FnMut(f64) -> f64,
{
    sublevel_within(&mut Plain(log_wealth_at), threshold, seed, Interval::UNIT, spec)
}
