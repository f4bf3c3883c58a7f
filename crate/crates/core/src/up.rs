//! Exact Beta-mixture (universal portfolio) wealth for `[0,1]`-valued
//! outcomes through the partition polynomial of the stream.

use serde::{Deserialize, Serialize};

use crate::error::{check_delta, closed_unit, domain, open_unit, Result};
use crate::roots::{sublevel_within, Interval, LogWealthFn, SearchSpec};
use crate::special::{log_beta_unchecked, log_sum_exp};

/// Beta(alpha, beta) mixing distribution over constant bets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaPrior {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaPrior {
    pub const JEFFREYS: BetaPrior = BetaPrior {
        alpha: 0.5,
        beta: 0.5,
    };
    pub const UNIFORM: BetaPrior = BetaPrior {
        alpha: 1.0,
        beta: 1.0,
    };

    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(domain("alpha", alpha, "(0, inf)"));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(domain("beta", beta, "(0, inf)"));
        }
        Ok(Self { alpha, beta })
    }
}

impl Default for BetaPrior {
    fn default() -> Self {
        Self::JEFFREYS
    }
}

/// Coefficients `y^t(k)` of `Π_i (y_i z + (1 - y_i))` in `z`, i.e. the
/// probability that `k` of `t` independent coins with biases `y_i` land
/// heads. Entries are stored scaled by `exp(-log_scale)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionPoly {
    coeffs: Vec<f64>,
    log_scale: f64,
}

impl Default for PartitionPoly {
    fn default() -> Self {
        Self::new()
    }
}

const RESCALE_BELOW: f64 = 1e-300;

impl PartitionPoly {
    pub fn new() -> Self {
        Self {
            coeffs: vec![1.0],
            log_scale: 0.0,
        }
    }

    pub fn from_outcomes(y: &[f64]) -> Result<Self> {
        let mut p = Self::new();
        for &yi in y {
            p.push(yi)?;
        }
        Ok(p)
    }

    pub fn t(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Stored (scaled) coefficients; multiply by `exp(log_scale())` for the
    /// true values.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    /// Appends one outcome: `new[k] = y old[k-1] + (1 - y) old[k]`.
    pub fn push(&mut self, y: f64) -> Result<()> {
        closed_unit("y", y)?;
        let n = self.coeffs.len();
        self.coeffs.push(0.0);
        let q = 1.0 - y;
        let mut max = 0.0_f64;
        for k in (0..=n).rev() {
            let up = if k > 0 { y * self.coeffs[k - 1] } else { 0.0 };
            let stay = if k < n { q * self.coeffs[k] } else { 0.0 };
            let v = up + stay;
            self.coeffs[k] = v;
            max = max.max(v);
        }
        if max > 0.0 && max < RESCALE_BELOW {
            for c in &mut self.coeffs {
                *c /= max;
            }
            self.log_scale += max.ln();
        }
        Ok(())
    }
}

/// Non-mutating form of [`PartitionPoly::push`].
pub fn poly_update(poly: &PartitionPoly, y: f64) -> Result<PartitionPoly> {
    let mut next = poly.clone();
    next.push(y)?;
    Ok(next)
}

/// `(Σ_k y^t(k), Σ_k k y^t(k))`, which equal `1` and `Σ_i y_i`.
pub fn poly_identities(poly: &PartitionPoly) -> (f64, f64) {
    let scale = poly.log_scale.exp();
    let total: f64 = poly.coeffs.iter().sum();
    let first: f64 = poly
        .coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| k as f64 * c)
        .sum();
    (total * scale, first * scale)
}

/// `ln ψ_t(k) = ln ∫ b^k (1-b)^{t-k} dBeta(b; α, β)`.
pub fn log_psi(k: usize, t: usize, prior: &BetaPrior) -> Result<f64> {
    if k > t {
        return Err(domain("k", k as f64, "[0, t]"));
    }
    BetaPrior::new(prior.alpha, prior.beta)?;
    Ok(log_beta_unchecked(k as f64 + prior.alpha, (t - k) as f64 + prior.beta)
        - log_beta_unchecked(prior.alpha, prior.beta))
}

const PSI_ANCHOR_EVERY: usize = 32;

/// `ln ψ_t(k)` for all `k`, by the ratio recurrence re-anchored to the
/// exact value every few terms.
fn log_psi_all(t: usize, prior: &BetaPrior) -> Vec<f64> {
    let (a, b) = (prior.alpha, prior.beta);
    let norm = log_beta_unchecked(a, b);
    let mut out = Vec::with_capacity(t + 1);
    let mut cur = 0.0;
    for k in 0..=t {
        if k % PSI_ANCHOR_EVERY == 0 {
            cur = log_beta_unchecked(k as f64 + a, (t - k) as f64 + b) - norm;
        } else {
            cur += (k as f64 - 1.0 + a).ln() - ((t - k) as f64 + b).ln();
        }
        out.push(cur);
    }
    out
}

/// Mixture log wealth as a function of the candidate mean, with everything
/// that does not depend on `m` precomputed.
#[derive(Debug, Clone)]
pub struct UpWealth {
    t: f64,
    ks: Vec<f64>,
    terms: Vec<f64>,
}

impl UpWealth {
    pub fn new(poly: &PartitionPoly, prior: &BetaPrior) -> Self {
        let t = poly.t();
        let psi = log_psi_all(t, prior);
        let mut ks = Vec::with_capacity(t + 1);
        let mut terms = Vec::with_capacity(t + 1);
        for (k, (&c, lp)) in poly.coeffs.iter().zip(psi).enumerate() {
            if c > 0.0 {
                ks.push(k as f64);
                terms.push(lp + c.ln() + poly.log_scale);
            }
        }
        Self {
            t: t as f64,
            ks,
            terms,
        }
    }

    /// `ln Σ_k ψ(k) y(k) o1^k o2^{t-k}` at arbitrary odds.
    pub fn log_wealth_at_odds(&self, o1: f64, o2: f64) -> f64 {
        let (l1, l2) = (o1.ln(), o2.ln());
        let v: Vec<f64> = self
            .ks
            .iter()
            .zip(&self.terms)
            .map(|(k, a)| a + k * l1 + (self.t - k) * l2)
            .collect();
        log_sum_exp(&v)
    }

    fn eval(&self, m: f64, want_slope: bool) -> (f64, f64) {
        let l1m = (-m).ln_1p();
        let logit = m.ln() - l1m;
        let mut max = f64::NEG_INFINITY;
        for (k, a) in self.ks.iter().zip(&self.terms) {
            max = max.max(a - k * logit);
        }
        if max == f64::NEG_INFINITY {
            return (max, 0.0);
        }
        let mut sum = 0.0;
        let mut ksum = 0.0;
        for (k, a) in self.ks.iter().zip(&self.terms) {
            let w = (a - k * logit - max).exp();
            sum += w;
            if want_slope {
                ksum += k * w;
            }
        }
        let value = -self.t * l1m + max + sum.ln();
        let slope = if want_slope {
            self.t / (1.0 - m) - (ksum / sum) / (m * (1.0 - m))
        } else {
            0.0
        };
        (value, slope)
    }
}

impl LogWealthFn for UpWealth {
    fn value(&mut self, m: f64) -> f64 {
        self.eval(m, false).0
    }

    fn value_and_slope(&mut self, m: f64) -> (f64, Option<f64>) {
        let (v, s) = self.eval(m, true);
        (v, Some(s))
    }
}

/// Mixture log wealth `ln Σ_k ψ_t(k) y^t(k) / (m^k (1-m)^{t-k})`.
pub fn up_log_wealth(poly: &PartitionPoly, m: f64, prior: &BetaPrior) -> Result<f64> {
    open_unit("m", m)?;
    BetaPrior::new(prior.alpha, prior.beta)?;
    Ok(UpWealth::new(poly, prior).eval(m, false).0)
}

pub(crate) const UP_SEARCH: SearchSpec = SearchSpec::convex(1e-9);

/// The sublevel interval of the current round's mixture wealth at
/// threshold `ln(1/δ)`, seeded at the empirical mean.
///
/// This is the set for a single round; intersecting over rounds is left to
/// [`crate::confseq::ConfidenceState`].
pub fn up_interval(poly: &PartitionPoly, delta: f64, prior: &BetaPrior, tol: f64) -> Result<Interval> {
    check_delta(delta)?;
    BetaPrior::new(prior.alpha, prior.beta)?;
    if poly.t() == 0 {
        return Ok(Interval::UNIT);
    }
    let (_, sum) = poly_identities(poly);
    let seed = sum / poly.t() as f64;
    up_interval_within(poly, seed, delta, prior, tol, Interval::UNIT)
}

pub(crate) fn up_interval_within(
    poly: &PartitionPoly,
    seed: f64,
    delta: f64,
    prior: &BetaPrior,
    tol: f64,
    within: Interval,
) -> Result<Interval> {
    if poly.t() == 0 {
        return Ok(within);
    }
    let spec = SearchSpec { tol, ..UP_SEARCH };
    sublevel_within(&mut UpWealth::new(poly, prior), -delta.ln(), seed, within, &spec)
}
