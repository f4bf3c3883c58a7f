//! Mixture wealth of the discrete two-horse race and its confidence
//! intervals.

use serde::{Deserialize, Serialize};

use crate::error::{check_delta, closed_unit, domain, open_unit, Result};
use crate::roots::{sublevel_within, Interval, LogWealthFn, SearchSpec};
use crate::special::{binary_entropy, log_beta_unchecked};

/// Round count and outcome total of a race.
///
/// `s` is real so that `[0,1]`-valued outcomes can be fed in directly; the
/// resulting wealth is then the Jensen lower bound of the continuous race.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BinaryCounts {
    t: u64,
    s: f64,
}

impl BinaryCounts {
    pub fn new(t: u64, s: f64) -> Result<Self> {
        if !(s >= 0.0 && s <= t as f64) {
            return Err(domain("S", s, "[0, t]"));
        }
        Ok(Self { t, s })
    }

    pub fn push(&mut self, y: f64) -> Result<()> {
        closed_unit("y", y)?;
        self.t += 1;
        self.s += y;
        // keep s <= t despite rounding in long sums
        self.s = self.s.min(self.t as f64);
        Ok(())
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn mean(&self) -> Option<f64> {
        (self.t > 0).then(|| self.s / self.t as f64)
    }
}

/// `ln φ̃_t(x; o1, o2)`, the log of the Beta(1/2, 1/2) mixture of constant
/// bettors with `x` units of outcome mass on horse 1 over `t` rounds.
pub fn log_phi_tilde(x: f64, t: u64, o1: f64, o2: f64) -> Result<f64> {
    let tf = t as f64;
    if !(x >= 0.0 && x <= tf) {
        return Err(domain("x", x, "[0, t]"));
    }
    if !(o1 > 0.0 && o1.is_finite()) {
        return Err(domain("o1", o1, "(0, inf)"));
    }
    if !(o2 > 0.0 && o2.is_finite()) {
        return Err(domain("o2", o2, "(0, inf)"));
    }
    Ok(x * o1.ln() + (tf - x) * o2.ln() + log_kt_probability(x, tf))
}

/// `ln q̃_t(x) = ln B(x + 1/2, t - x + 1/2) - ln B(1/2, 1/2)`.
fn log_kt_probability(x: f64, t: f64) -> f64 {
    // Subtracting the same rational approximation keeps t = 0 exactly at 0.
    log_beta_unchecked(x + 0.5, t - x + 0.5) - log_beta_unchecked(0.5, 0.5)
}

/// Log wealth of the race at odds `(1/m, 1/(1-m))`.
pub fn hr_log_wealth(c: &BinaryCounts, m: f64) -> Result<f64> {
    open_unit("m", m)?;
    Ok(HrWealth::new(c).eval(m).0)
}

/// `ln φ̃` as a function of the candidate mean, with its derivative.
pub(crate) struct HrWealth {
    s: f64,
    f: f64,
    constant: f64,
}

impl HrWealth {
    pub(crate) fn new(c: &BinaryCounts) -> Self {
        let t = c.t as f64;
        Self {
            s: c.s,
            f: t - c.s,
            constant: log_kt_probability(c.s, t),
        }
    }

    fn eval(&self, m: f64) -> (f64, f64) {
        let mut v = self.constant;
        let mut d = 0.0;
        if self.s > 0.0 {
            v -= self.s * m.ln();
            d -= self.s / m;
        }
        if self.f > 0.0 {
            v -= self.f * (-m).ln_1p();
            d += self.f / (1.0 - m);
        }
        (v, d)
    }
}

impl LogWealthFn for HrWealth {
    fn value(&mut self, m: f64) -> f64 {
        self.eval(m).0
    }

    fn value_and_slope(&mut self, m: f64) -> (f64, Option<f64>) {
        let (v, d) = self.eval(m);
        (v, Some(d))
    }
}

pub(crate) const HR_SEARCH: SearchSpec = SearchSpec::convex(1e-9);

/// The interval `{m : ln φ̃_t(S; 1/m, 1/(1-m)) < ln(1/δ)}`.
///
/// The log wealth is convex in `m` with its minimum at `S/t`, so each side
/// has at most one crossing; sides without one are clamped to 0 or 1.
pub fn hr_interval(c: &BinaryCounts, delta: f64, tol: f64) -> Result<Interval> {
    check_delta(delta)?;
    hr_interval_within(c, delta, tol, Interval::UNIT)
}

pub(crate) fn hr_interval_within(
    c: &BinaryCounts,
    delta: f64,
    tol: f64,
    within: Interval,
) -> Result<Interval> {
    if c.t == 0 {
        return Ok(within);
    }
    let seed = c.s / c.t as f64;
    let spec = SearchSpec { tol, ..HR_SEARCH };
    sublevel_within(&mut HrWealth::new(c), -delta.ln(), seed, within, &spec)
}

/// Outer bound `S/t ± sqrt(g/2)` on [`hr_interval`] from Pinsker's inequality,
/// with `g = (ln(1/δ) + ln(e^{-t h(S/t)} / q̃_t(S))) / t`.
pub fn pinsker_outer(c: &BinaryCounts, delta: f64) -> Result<Interval> {
    check_delta(delta)?;
    if c.t == 0 {
        return Err(domain("t", 0.0, "[1, inf)"));
    }
    let t = c.t as f64;
    let p = c.s / t;
    let g = (-delta.ln() - t * binary_entropy(p)? - log_kt_probability(c.s, t)) / t;
    let r = (0.5 * g.max(0.0)).sqrt();
    Ok(Interval {
        low: (p - r).max(0.0),
        high: (p + r).min(1.0),
    })
}
