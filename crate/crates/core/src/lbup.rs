//! Constant-memory lower bound on the uniform-prior universal portfolio.
//!
//! The per-round log gain is bounded below by a polynomial in `1 - y/m`
//! plus a logarithm in the bet, which makes the product over rounds a member
//! of the exponential family `φ_n(x; ρ, η) = exp(Σ_k ρ_k (1-x)^k / k + η ln x)`.
//! Mixing over bets then only needs the normalizer `Z_n` and the raw power
//! sums of the stream.

use serde::{Deserialize, Serialize};

use crate::error::{check_delta, closed_unit, domain, open_unit, Error, Result};
use crate::hr::{BinaryCounts, HrWealth};
use crate::roots::{sublevel_within, Interval, LogWealthFn, SearchSpec};
use crate::special::{
    log_add_exp, log_integrate_composite, log_integrate_unit_with_breaks,
    log_lower_incomplete_gamma, QuadratureSpec,
};
use crate::up::{BetaPrior, PartitionPoly, UpWealth};

/// Running power sums `s_j = Σ_i y_i^j`, `j = 0..=2n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentAccumulator {
    order: usize,
    t: u64,
    s: Vec<f64>,
}

impl MomentAccumulator {
    pub fn new(order: usize) -> Result<Self> {
        check_order(order)?;
        Ok(Self {
            order,
            t: 0,
            s: vec![0.0; 2 * order + 1],
        })
    }

    /// Rebuilds an accumulator from stored parts, checking its invariants.
    pub fn from_parts(order: usize, t: u64, s: Vec<f64>) -> Result<Self> {
        check_order(order)?;
        if s.len() != 2 * order + 1 {
            return Err(Error::Config(format!(
                "expected {} power sums for order {order}, got {}",
                2 * order + 1,
                s.len()
            )));
        }
        if s[0] != t as f64 {
            return Err(domain("s_0", s[0], "equal to t"));
        }
        for j in 1..s.len() {
            if !(s[j] >= 0.0 && s[j] <= s[j - 1]) {
                return Err(domain("s_j", s[j], "[0, s_{j-1}]"));
            }
        }
        Ok(Self { order, t, s })
    }

    pub fn push(&mut self, y: f64) -> Result<()> {
        closed_unit("y", y)?;
        self.t += 1;
        self.s[0] = self.t as f64;
        let mut p = 1.0;
        for sj in self.s.iter_mut().skip(1) {
            p *= y;
            *sj += p;
        }
        Ok(())
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn moments(&self) -> &[f64] {
        &self.s
    }

    pub fn mean(&self) -> Option<f64> {
        (self.t > 0).then(|| (self.s[1] / self.t as f64).min(1.0))
    }

    /// Number of stored reals: `t` and `s_0..s_{2n}`.
    pub fn state_len(&self) -> usize {
        1 + self.s.len()
    }

    /// Power sums of the reflected stream `1 - y_i`, from
    /// `s_j(1 - y) = Σ_l C(j, l) (-1)^l s_l(y)`.
    pub fn reflected_moments(&self) -> Vec<f64> {
        let binom = pascal(2 * self.order);
        (0..self.s.len())
            .map(|j| {
                let mut acc = 0.0;
                for l in 0..=j {
                    let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
                    acc += sign * binom[j][l] * self.s[l];
                }
                acc
            })
            .collect()
    }
}

fn check_order(order: usize) -> Result<()> {
    if order == 0 {
        return Err(domain("n", 0.0, "[1, inf)"));
    }
    Ok(())
}

/// Non-mutating form of [`MomentAccumulator::push`].
pub fn accumulate(acc: &MomentAccumulator, y: f64) -> Result<MomentAccumulator> {
    let mut next = acc.clone();
    next.push(y)?;
    Ok(next)
}

fn pascal(n: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let mut row = vec![1.0; i + 1];
        for j in 1..i {
            row[j] = rows[i - 1][j - 1] + rows[i - 1][j];
        }
        rows.push(row);
    }
    rows
}

/// `f_ℓ(x) = (ln(1+x) - Σ_{k<ℓ} (-1)^{k+1} x^k / k) / ((-1)^ℓ x^ℓ / ℓ)`,
/// continuous at 0 with `f_ℓ(0) = -1`.
pub fn f_ell(x: f64, ell: u32) -> Result<f64> {
    if !(x > -1.0) || x.is_nan() {
        return Err(domain("x", x, "(-1, inf)"));
    }
    if ell == 0 {
        return Err(domain("ell", 0.0, "[1, inf)"));
    }
    let l = ell as f64;
    if x.abs() <= 0.5 {
        // Σ_j (-1)^{j+1} ℓ x^j / (ℓ + j); the quotient form cancels badly here.
        let mut sum = 0.0;
        let mut pow = 1.0;
        for j in 0..80 {
            let sign = if j % 2 == 0 { -1.0 } else { 1.0 };
            let term = sign * l * pow / (l + j as f64);
            sum += term;
            if term.abs() <= 1e-17 * sum.abs() {
                break;
            }
            pow *= x;
        }
        return Ok(sum);
    }
    let mut head = 0.0;
    let mut pow = 1.0;
    for k in 1..ell {
        pow *= x;
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        head += sign * pow / k as f64;
    }
    let lead = if ell % 2 == 0 { 1.0 } else { -1.0 } * x.powi(ell as i32) / l;
    Ok((x.ln_1p() - head) / lead)
}

/// Lower bound of order `n` on `ln(b y/m + (1-b)(1-y)/(1-m))`.
///
/// For `b >= m` it is written in `a = 1 - y/m`, `x = (1-b)/(1-m)`; for
/// `b < m` the roles of the horses swap (`a = 1 - (1-y)/(1-m)`, `x = b/m`):
/// `Σ_{k<2n} (1-x)^k (a^{2n} - a^k) / k + a^{2n} ln x`.
pub fn log_gain_lower_bound(y: f64, m: f64, b: f64, n: usize) -> Result<f64> {
    closed_unit("y", y)?;
    open_unit("m", m)?;
    open_unit("b", b)?;
    check_order(n)?;
    let (a, x) = if b >= m {
        (1.0 - y / m, (1.0 - b) / (1.0 - m))
    } else {
        (1.0 - (1.0 - y) / (1.0 - m), b / m)
    };
    // Σ_k u^k (a^{2n} - a^k) / k + a^{2n} ln x, regrouped as
    // a^{2n} r(u) - Σ_k (a u)^k / k with r(u) = ln(1-u) + Σ_{k<2n} u^k / k,
    // which avoids cancelling two large multiples of a^{2n} for small m.
    let two_n = 2 * n;
    let u = 1.0 - x;
    let au = a * u;
    let mut head = 0.0;
    let mut p = 1.0;
    for k in 1..two_n {
        p *= au;
        head += p / k as f64;
    }
    Ok(a.powi(two_n as i32) * log_tail(x, u, two_n) - head)
}

/// `ln x + Σ_{k<2n} u^k / k` for `u = 1 - x`, which equals
/// `-Σ_{k>=2n} u^k / k`; summed as that series when `u` is small.
fn log_tail(x: f64, u: f64, two_n: usize) -> f64 {
    if u.abs() < 0.25 {
        let mut pow = u.powi(two_n as i32);
        let mut sum = 0.0;
        for k in two_n..two_n + 60 {
            let term = pow / k as f64;
            sum += term;
            if term.abs() <= 1e-17 * sum.abs() {
                break;
            }
            pow *= u;
        }
        -sum
    } else {
        let mut s = 0.0;
        for k in (1..two_n).rev() {
            s = s * u + 1.0 / k as f64;
        }
        x.ln() + s * u
    }
}

/// Parameters `(ρ, η)` of `φ_n(x; ρ, η) = exp(Σ_k ρ_k (1-x)^k / k + η ln x)`.
///
/// Alongside `ρ` the struct keeps `ρ_k - η` computed without cancellation,
/// which is what the density is evaluated with (see [`Self::log_phi`]).
#[derive(Debug, Clone, PartialEq)]
pub struct ExpFamilyParams {
    rho: Vec<f64>,
    eta: f64,
    centered: Vec<f64>,
}

impl ExpFamilyParams {
    /// Parameters for order `(rho.len() + 1) / 2`; `rho` must have odd length.
    pub fn new(rho: Vec<f64>, eta: f64) -> Result<Self> {
        if rho.len() % 2 == 0 {
            return Err(Error::Config(format!(
                "rho must have 2n - 1 entries, got {}",
                rho.len()
            )));
        }
        if let Some(bad) = rho.iter().find(|r| !r.is_finite()) {
            return Err(domain("rho", *bad, "finite"));
        }
        if !eta.is_finite() {
            return Err(domain("eta", eta, "finite"));
        }
        let centered = rho.iter().map(|r| r - eta).collect();
        Ok(Self { rho, eta, centered })
    }

    pub fn zero(order: usize) -> Self {
        let len = 2 * order.max(1) - 1;
        Self {
            rho: vec![0.0; len],
            eta: 0.0,
            centered: vec![0.0; len],
        }
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn order(&self) -> usize {
        (self.rho.len() + 1) / 2
    }

    pub fn is_zero(&self) -> bool {
        self.eta == 0.0 && self.rho.iter().all(|r| *r == 0.0)
    }

    /// Parameters of the product `φ(x; self) φ(x; ρ0, η0)`.
    pub fn combine(&self, rho0: &[f64], eta0: f64) -> Self {
        let rho = self.rho.iter().zip(rho0).map(|(a, b)| a + b).collect();
        let centered = self
            .centered
            .iter()
            .zip(rho0)
            .map(|(c, r0)| c + (r0 - eta0))
            .collect();
        Self {
            rho,
            eta: self.eta + eta0,
            centered,
        }
    }

    /// `ln φ_n(x)`, evaluated as `Σ_k (ρ_k - η) u^k / k + η r(u)` with
    /// `u = 1 - x` and `r(u) = ln(1-u) + Σ_{k<2n} u^k / k`. Near `x = 1`
    /// both `Σ ρ_k u^k / k` and `η ln x` are large and nearly cancel; in this
    /// form `r(u) = O(u^{2n})` is summed directly.
    pub fn log_phi(&self, x: f64) -> f64 {
        let u = 1.0 - x;
        let mut poly = 0.0;
        for (k, c) in self.centered.iter().enumerate().rev() {
            poly = poly * u + c / (k + 1) as f64;
        }
        poly *= u;
        if self.eta == 0.0 {
            return poly;
        }
        poly + self.eta * log_tail(x, u, self.rho.len() + 1)
    }

    /// First and second derivatives of `ln φ_n` in `x`.
    fn log_phi_derivs(&self, x: f64) -> (f64, f64) {
        let u = 1.0 - x;
        let two_n = self.rho.len() + 1;
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        let mut pow = 1.0; // u^{k-1}
        let mut pow_prev = 0.0; // u^{k-2}
        for (i, c) in self.centered.iter().enumerate() {
            let k = i + 1;
            d1 -= c * pow;
            if k >= 2 {
                d2 += c * (k - 1) as f64 * pow_prev;
            }
            pow_prev = pow;
            pow *= u;
        }
        if self.eta != 0.0 {
            let u2n2 = u.powi(two_n as i32 - 2);
            let u2n1 = u2n2 * u;
            d1 += self.eta * u2n1 / x;
            d2 -= self.eta * ((two_n - 1) as f64 * u2n2 / x + u2n1 / (x * x));
        }
        (d1, d2)
    }
}

/// `(ρ_n(y; m), η_n(y; m))` from the power sums of the stream, with
/// `P_k = Σ_i (1 - y_i/m)^k = Σ_j C(k, j) s_j (-1/m)^j`, `η = P_{2n}` and
/// `ρ_k = η - P_k`.
pub fn exp_family_params(acc: &MomentAccumulator, m: f64) -> Result<ExpFamilyParams> {
    open_unit("m", m)?;
    Ok(params_from_sums(acc.order, &acc.s, m))
}

/// Parameters of the reflected stream `1 - y_i` at `1 - m`, computed from
/// the stored power sums only.
pub fn barred_params(acc: &MomentAccumulator, m: f64) -> Result<ExpFamilyParams> {
    open_unit("m", m)?;
    Ok(params_from_sums(acc.order, &acc.reflected_moments(), 1.0 - m))
}

fn params_from_sums(order: usize, s: &[f64], m: f64) -> ExpFamilyParams {
    let two_n = 2 * order;
    let binom = pascal(two_n);
    let r = -1.0 / m;
    let mut v = Vec::with_capacity(two_n + 1);
    let mut pow = 1.0;
    for sj in s.iter().take(two_n + 1) {
        v.push(sj * pow);
        pow *= r;
    }
    let p = |k: usize| -> f64 { (0..=k).map(|j| binom[k][j] * v[j]).sum() };
    // η is a sum of even powers; clip the rounding error below zero.
    let eta = p(two_n).max(0.0);
    let centered: Vec<f64> = (1..two_n).map(|k| -p(k)).collect();
    let rho = centered.iter().map(|c| c + eta).collect();
    ExpFamilyParams { rho, eta, centered }
}

/// Conjugate prior hyperparameters for the two halves `b > m` and `b <= m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorHyper {
    pub rho0_1: Vec<f64>,
    pub eta0_1: f64,
    pub rho0_2: Vec<f64>,
    pub eta0_2: f64,
}

impl PriorHyper {
    /// The all-zero choice, which makes the prior uniform on `[0, 1]`.
    pub fn zero(order: usize) -> Self {
        let len = 2 * order.max(1) - 1;
        Self {
            rho0_1: vec![0.0; len],
            eta0_1: 0.0,
            rho0_2: vec![0.0; len],
            eta0_2: 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.eta0_1 == 0.0
            && self.eta0_2 == 0.0
            && self.rho0_1.iter().chain(&self.rho0_2).all(|r| *r == 0.0)
    }

    pub fn validate(&self, order: usize) -> Result<()> {
        let len = 2 * order - 1;
        if self.rho0_1.len() != len || self.rho0_2.len() != len {
            return Err(Error::Config(format!(
                "prior hyperparameters need {len} entries per half for order {order}"
            )));
        }
        let all = self
            .rho0_1
            .iter()
            .chain(&self.rho0_2)
            .chain([&self.eta0_1, &self.eta0_2]);
        for v in all {
            if !v.is_finite() {
                return Err(domain("hyperparameter", *v, "finite"));
            }
        }
        Ok(())
    }
}

const SCAN_POINTS: usize = 32;
const COMPOSITE_INTERVALS: usize = 4096;

/// Panel cuts around the mode of `φ_n`, scaled by its curvature there.
fn mode_breaks(p: &ExpFamilyParams) -> Vec<f64> {
    let mut xs: Vec<f64> = vec![1e-6, 1e-3];
    xs.extend((0..SCAN_POINTS).map(|i| (i as f64 + 0.5) / SCAN_POINTS as f64));
    xs.extend([1.0 - 1e-3, 1.0 - 1e-6]);
    let vals: Vec<f64> = xs.iter().map(|&x| p.log_phi(x)).collect();
    let best = vals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);

    let last = xs.len() - 1;
    let mut breaks = Vec::with_capacity(12);
    let (mode, sigma) = if best == 0 || best == last {
        let end = if best == 0 { 0.0 } else { 1.0 };
        let (d1, _) = p.log_phi_derivs(xs[best]);
        let decay = if d1 != 0.0 { 1.0 / d1.abs() } else { 0.25 };
        (end, decay.min(0.25))
    } else {
        let (mut lo, mut hi) = (xs[best - 1], xs[best + 1]);
        breaks.push(lo);
        breaks.push(hi);
        let mut x = xs[best];
        // Safeguarded Newton on the derivative.
        for _ in 0..60 {
            let (d1, d2) = p.log_phi_derivs(x);
            if d1 > 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let mut next = if d2 < 0.0 { x - d1 / d2 } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - x).abs() <= 1e-12 * x.max(1e-300) {
                x = next;
                break;
            }
            x = next;
        }
        let (_, d2) = p.log_phi_derivs(x);
        let sigma = if d2 < 0.0 {
            (-1.0 / d2).sqrt()
        } else {
            0.5 * (xs[best + 1] - xs[best - 1])
        };
        (x, sigma)
    };
    if mode > 0.0 && mode < 1.0 {
        breaks.push(mode);
    }
    for k in [1.0, 3.0, 9.0, 27.0] {
        breaks.push(mode - k * sigma);
        breaks.push(mode + k * sigma);
    }
    if sigma > 0.05 {
        breaks.extend([0.25, 0.5, 0.75]);
    }
    breaks
}

/// `ln Z_n(ρ, η) = ln ∫_0^1 φ_n(x; ρ, η) dx` by adaptive quadrature, with
/// a composite rule as fallback when the adaptive budget runs out.
pub fn log_z(params: &ExpFamilyParams, spec: &QuadratureSpec) -> Result<f64> {
    if params.is_zero() {
        return Ok(0.0);
    }
    let breaks = mode_breaks(params);
    match log_integrate_unit_with_breaks(|x| params.log_phi(x), &breaks, spec) {
        Ok(v) => Ok(v),
        Err(Error::NonConvergence { .. }) => {
            match log_integrate_composite(|x| params.log_phi(x), COMPOSITE_INTERVALS) {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::NormalizerNonConvergence {
                    rho: params.rho.clone(),
                    eta: params.eta,
                }),
            }
        }
        Err(e) => Err(match e {
            Error::Domain { .. } => Error::NormalizerNonConvergence {
                rho: params.rho.clone(),
                eta: params.eta,
            },
            other => other,
        }),
    }
}

/// Closed form of `ln Z_1(ρ_1, η)` for `ρ_1 >= 0`:
/// `ρ_1 - (η + 1) ln ρ_1 + ln γ(η + 1, ρ_1)`.
pub fn log_z1_closed_form(rho1: f64, eta: f64) -> Result<f64> {
    if !(rho1 >= 0.0) || !rho1.is_finite() {
        return Err(domain("rho1", rho1, "[0, inf)"));
    }
    if !(eta > -1.0) || !eta.is_finite() {
        return Err(domain("eta", eta, "(-1, inf)"));
    }
    if rho1 == 0.0 {
        return Ok(-(eta + 1.0).ln());
    }
    Ok(rho1 - (eta + 1.0) * rho1.ln() + log_lower_incomplete_gamma(eta + 1.0, rho1)?)
}

/// `ln(m̄ Z(p1) + m Z(p2))`.
fn log_split(m: f64, p1: &ExpFamilyParams, p2: &ExpFamilyParams, spec: &QuadratureSpec) -> Result<f64> {
    let a = (-m).ln_1p() + log_z(p1, spec)?;
    let b = m.ln() + log_z(p2, spec)?;
    Ok(log_add_exp(a, b))
}

/// Numerator `ln(m̄ Z(ρ(y; m), η(y; m)) + m Z(ρ(ȳ; m̄), η(ȳ; m̄)))` with the
/// zero prior.
fn log_numerator(acc: &MomentAccumulator, m: f64, spec: &QuadratureSpec) -> Result<f64> {
    let p1 = params_from_sums(acc.order, &acc.s, m);
    let p2 = params_from_sums(acc.order, &acc.reflected_moments(), 1.0 - m);
    log_split(m, &p1, &p2, spec)
}

/// Log of the lower-bound mixture wealth under the conjugate prior given by
/// `hyper`.
pub fn lbup_log_wealth(
    acc: &MomentAccumulator,
    m: f64,
    hyper: &PriorHyper,
    spec: &QuadratureSpec,
) -> Result<f64> {
    open_unit("m", m)?;
    hyper.validate(acc.order)?;
    if hyper.is_zero() {
        // The uniform prior normalizes to m̄ + m = 1.
        return log_numerator(acc, m, spec);
    }
    let p1 = exp_family_params(acc, m)?.combine(&hyper.rho0_1, hyper.eta0_1);
    let p2 = barred_params(acc, m)?.combine(&hyper.rho0_2, hyper.eta0_2);
    let num = log_split(m, &p1, &p2, spec)?;
    let n = acc.order;
    let h1 = ExpFamilyParams::zero(n).combine(&hyper.rho0_1, hyper.eta0_1);
    let h2 = ExpFamilyParams::zero(n).combine(&hyper.rho0_2, hyper.eta0_2);
    let den = log_split(m, &h1, &h2, spec)?;
    Ok(num - den)
}

/// What the hybrid keeps from its exact phase: the partition polynomial and
/// the power sums at the switch time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridSnapshot {
    pub poly: PartitionPoly,
    pub moments: MomentAccumulator,
}

impl HybridSnapshot {
    pub fn t_switch(&self) -> u64 {
        self.moments.t
    }
}

/// Exact mixture wealth up to the switch, continued by the lower-bound
/// mixture whose prior is the lower-bound posterior at the switch:
/// `UP_{t_s}(m) · N_t(m) / N_{t_s}(m)`.
pub fn hybrid_log_wealth(
    snapshot: &HybridSnapshot,
    acc: &MomentAccumulator,
    m: f64,
    prior: &BetaPrior,
    spec: &QuadratureSpec,
) -> Result<f64> {
    open_unit("m", m)?;
    check_hybrid(snapshot, acc)?;
    HybridWealth::new(snapshot, acc, prior, *spec).eval(m)
}

fn check_hybrid(snapshot: &HybridSnapshot, acc: &MomentAccumulator) -> Result<()> {
    if snapshot.moments.order != acc.order {
        return Err(Error::Config(format!(
            "snapshot order {} differs from accumulator order {}",
            snapshot.moments.order, acc.order
        )));
    }
    if acc.t < snapshot.moments.t {
        return Err(Error::Config(format!(
            "accumulator at t = {} precedes the switch at t = {}",
            acc.t, snapshot.moments.t
        )));
    }
    if snapshot.poly.t() as u64 != snapshot.moments.t {
        return Err(Error::Config("snapshot polynomial and moments disagree on t".into()));
    }
    Ok(())
}

pub(crate) struct HybridWealth<'a> {
    up: UpWealth,
    snapshot: &'a HybridSnapshot,
    acc: &'a MomentAccumulator,
    spec: QuadratureSpec,
}

impl<'a> HybridWealth<'a> {
    pub(crate) fn new(
        snapshot: &'a HybridSnapshot,
        acc: &'a MomentAccumulator,
        prior: &BetaPrior,
        spec: QuadratureSpec,
    ) -> Self {
        Self {
            up: UpWealth::new(&snapshot.poly, prior),
            snapshot,
            acc,
            spec,
        }
    }

    fn eval(&mut self, m: f64) -> Result<f64> {
        let up = self.up.value(m);
        if self.acc.t == self.snapshot.moments.t {
            return Ok(up);
        }
        let now = log_numerator(self.acc, m, &self.spec)?;
        let then = log_numerator(&self.snapshot.moments, m, &self.spec)?;
        Ok(up + now - then)
    }
}

impl LogWealthFn for HybridWealth<'_> {
    fn value(&mut self, m: f64) -> f64 {
        match self.eval(m) {
            Ok(v) => v,
            // Fall back to the Jensen-reduced race at this m.
            Err(_) => jensen_fallback(self.acc, m),
        }
    }
}

fn jensen_fallback(acc: &MomentAccumulator, m: f64) -> f64 {
    let c = BinaryCounts::new(acc.t, acc.s[1].min(acc.t as f64)).unwrap_or_default();
    HrWealth::new(&c).value(m)
}

pub(crate) struct LbupWealth<'a> {
    pub(crate) acc: &'a MomentAccumulator,
    pub(crate) hyper: &'a PriorHyper,
    pub(crate) spec: QuadratureSpec,
}

impl LogWealthFn for LbupWealth<'_> {
    fn value(&mut self, m: f64) -> f64 {
        match lbup_log_wealth(self.acc, m, self.hyper, &self.spec) {
            Ok(v) => v,
            Err(_) => jensen_fallback(self.acc, m),
        }
    }
}

/// Search settings for the lower-bound methods: bracket `[1e-4, 1 - 1e-4]`
/// and a 64-point scan for excursions of a possibly non-convex wealth.
pub const LBUP_SEARCH: SearchSpec = SearchSpec::guarded(1e-4);

/// Largest interval around `mu_hat` on which the lower-bound wealth stays
/// below `1/δ`.
pub fn lbup_interval(
    acc: &MomentAccumulator,
    mu_hat: f64,
    delta: f64,
    hyper: &PriorHyper,
    spec: &QuadratureSpec,
) -> Result<Interval> {
    check_delta(delta)?;
    hyper.validate(acc.order)?;
    spec.validate()?;
    if acc.t == 0 {
        return Ok(Interval::UNIT);
    }
    let seed = mu_hat.clamp(1e-9, 1.0 - 1e-9);
    let mut f = LbupWealth {
        acc,
        hyper,
        spec: *spec,
    };
    sublevel_within(&mut f, -delta.ln(), seed, Interval::UNIT, &LBUP_SEARCH)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::log_gain;
    use crate::special::log_integrate_unit;
    use crate::up::up_log_wealth;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    fn acc_of(n: usize, y: &[f64]) -> MomentAccumulator {
        let mut a = MomentAccumulator::new(n).unwrap();
        for &v in y {
            a.push(v).unwrap();
        }
        a
    }

    #[test]
    fn f_ell_examples() {
        for l in 1..=6 {
            assert_eq!(f_ell(0.0, l).unwrap(), -1.0);
        }
        let v = f_ell(1.0, 2).unwrap();
        assert!((v - 2.0 * (std::f64::consts::LN_2 - 1.0)).abs() < 1e-14);
        assert!(f_ell(-1.0, 2).is_err());
        assert!(f_ell(0.5, 0).is_err());
    }

    #[test]
    fn f_ell_branches_agree() {
        for l in 1..=6u32 {
            for &x in &[-0.5, -0.49, 0.49, 0.5] {
                let series = f_ell(x, l).unwrap();
                let lf = l as f64;
                let mut head = 0.0;
                for k in 1..l {
                    head += if k % 2 == 1 { 1.0 } else { -1.0 } * x.powi(k as i32) / k as f64;
                }
                let lead = if l % 2 == 0 { 1.0 } else { -1.0 } * x.powi(l as i32) / lf;
                let direct = (x.ln_1p() - head) / lead;
                assert!((series - direct).abs() < 1e-11, "l={l} x={x}");
            }
        }
    }

    #[test]
    fn f_ell_increasing_and_derivative() {
        for l in 1..=6u32 {
            let mut prev = f64::NEG_INFINITY;
            for i in 0..1000 {
                let x = -0.99 + (50.0 + 0.99) * i as f64 / 999.0;
                let v = f_ell(x, l).unwrap();
                assert!(v > prev, "l={l} x={x}");
                prev = v;
            }
            let lf = l as f64;
            for i in 0..200 {
                let x = -0.9 + 10.9 * (i as f64 + 0.5) / 200.0;
                if x.abs() < 1e-3 {
                    continue;
                }
                let h = 1e-6;
                let fd = (f_ell(x + h, l).unwrap() - f_ell(x - h, l).unwrap()) / (2.0 * h);
                let exact = -(lf / x) * (f_ell(x, l).unwrap() + 1.0 / (1.0 + x));
                assert!((fd - exact).abs() < 1e-6, "l={l} x={x}: {fd} vs {exact}");
            }
        }
    }

    #[test]
    fn lower_bound_equalities() {
        for n in 1..=4 {
            for &y in &[0.0, 0.3, 1.0] {
                assert_eq!(log_gain_lower_bound(y, 0.4, 0.4, n).unwrap(), 0.0);
            }
            for &b in &[0.1, 0.4, 0.9] {
                assert!(log_gain_lower_bound(0.4, 0.4, b, n).unwrap().abs() < 1e-15);
                assert!(log_gain(0.4, 0.4, b).abs() < 1e-15);
            }
        }
        assert!(log_gain_lower_bound(0.5, 0.5, 1.0, 2).is_err());
        assert!(log_gain_lower_bound(0.5, 0.5, 0.0, 2).is_err());
        assert!(log_gain_lower_bound(0.5, 0.5, 0.5, 0).is_err());
    }

    #[test]
    fn lower_bound_is_below_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20_000 {
            let y: f64 = rng.random();
            let m: f64 = rng.random_range(0.001..0.999);
            let b: f64 = rng.random_range(0.001..0.999);
            let n = rng.random_range(1..=4);
            let lb = log_gain_lower_bound(y, m, b, n).unwrap();
            assert!(lb <= log_gain(y, m, b) + 1e-12, "y={y} m={m} b={b} n={n}");
        }
    }

    #[test]
    fn one_term_bound_is_fan_type() {
        // n = 1: (1-x)(a^2 - a) + a^2 ln x with x = (1-b)/(1-m), a = 1 - y/m.
        let (y, m, b): (f64, f64, f64) = (0.2, 0.35, 0.6);
        let a = 1.0 - y / m;
        let x = (1.0 - b) / (1.0 - m);
        let want = (1.0 - x) * (a * a - a) + a * a * x.ln();
        assert!((log_gain_lower_bound(y, m, b, 1).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn accumulator_examples() {
        let a = acc_of(2, &[0.0]);
        assert_eq!(a.moments(), &[1.0, 0.0, 0.0, 0.0, 0.0]);
        let a = acc_of(1, &[0.5]);
        assert_eq!(a.moments(), &[1.0, 0.5, 0.25]);
        assert_eq!(a.state_len(), 4);
        assert!(MomentAccumulator::new(0).is_err());
        assert!(accumulate(&a, 2.0).is_err());
        let b = accumulate(&a, 1.0).unwrap();
        assert_eq!(b.t(), 2);
        assert!(MomentAccumulator::from_parts(1, 2, vec![2.0, 1.5, 1.25]).is_ok());
        assert!(MomentAccumulator::from_parts(1, 2, vec![2.0, 1.5, 1.75]).is_err());
    }

    #[test]
    fn params_examples() {
        let a = acc_of(2, &[0.3, 0.3, 0.3]);
        let p = exp_family_params(&a, 0.3).unwrap();
        assert!(p.eta().abs() < 1e-12);
        assert!(p.rho().iter().all(|r| r.abs() < 1e-12));
        let q = barred_params(&a, 0.3).unwrap();
        assert!(q.eta().abs() < 1e-12);

        let a = acc_of(1, &[0.0]);
        let p = exp_family_params(&a, 0.5).unwrap();
        assert_eq!(p.rho(), &[0.0]);
        assert_eq!(p.eta(), 1.0);

        let a = acc_of(1, &[1.0]);
        let q = barred_params(&a, 0.5).unwrap();
        assert!(q.rho()[0].abs() < 1e-15);
        assert!((q.eta() - 1.0).abs() < 1e-15);
    }

    fn direct_params(y: &[f64], m: f64, n: usize) -> (Vec<f64>, f64) {
        let eta: f64 = y.iter().map(|v| (1.0 - v / m).powi(2 * n as i32)).sum();
        let rho = (1..2 * n)
            .map(|k| y.iter().map(|v| (1.0 - v / m).powi(2 * n as i32) - (1.0 - v / m).powi(k as i32)).sum())
            .collect();
        (rho, eta)
    }

    #[test]
    fn params_match_per_sample_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let y: Vec<f64> = (0..50).map(|_| rng.random()).collect();
        let yb: Vec<f64> = y.iter().map(|v| 1.0 - v).collect();
        for n in 1..=3 {
            let a = acc_of(n, &y);
            for &m in &[0.2, 0.5, 0.77] {
                let p = exp_family_params(&a, m).unwrap();
                let (rho, eta) = direct_params(&y, m, n);
                assert!((p.eta() - eta).abs() <= 1e-9 * eta.abs().max(1.0));
                for (x, z) in p.rho().iter().zip(&rho) {
                    assert!((x - z).abs() <= 1e-9 * z.abs().max(1.0));
                }
                let q = barred_params(&a, m).unwrap();
                let (rho, eta) = direct_params(&yb, 1.0 - m, n);
                assert!((q.eta() - eta).abs() <= 1e-9 * eta.abs().max(1.0));
                for (x, z) in q.rho().iter().zip(&rho) {
                    assert!((x - z).abs() <= 1e-9 * z.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn log_phi_matches_definition() {
        let p = ExpFamilyParams::new(vec![2.0, -1.5, 0.7], 1.3).unwrap();
        for &x in &[1e-6, 0.01, 0.2, 0.5, 0.74, 0.76, 0.99, 1.0 - 1e-9] {
            let u: f64 = 1.0 - x;
            let direct = 2.0 * u - 1.5 * u * u / 2.0 + 0.7 * u.powi(3) / 3.0 + 1.3 * x.ln();
            assert!((p.log_phi(x) - direct).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn log_phi_derivatives() {
        let p = ExpFamilyParams::new(vec![5.0, -3.0, 2.0], 4.0).unwrap();
        for &x in &[0.05, 0.3, 0.6, 0.9] {
            let h = 1e-5;
            let d1 = (p.log_phi(x + h) - p.log_phi(x - h)) / (2.0 * h);
            let d2 = (p.log_phi(x + h) - 2.0 * p.log_phi(x) + p.log_phi(x - h)) / (h * h);
            let (a, b) = p.log_phi_derivs(x);
            assert!((a - d1).abs() < 1e-6 * d1.abs().max(1.0));
            assert!((b - d2).abs() < 1e-3 * d2.abs().max(1.0));
        }
    }

    #[test]
    fn log_z_examples() {
        assert_eq!(log_z(&ExpFamilyParams::zero(2), &spec()).unwrap(), 0.0);
        let p = ExpFamilyParams::new(vec![1.0], 0.0).unwrap();
        assert!((log_z(&p, &spec()).unwrap() - 0.541_324_854_612_918_108_98).abs() < 1e-10);
        let p = ExpFamilyParams::new(vec![5.0], 3.0).unwrap();
        let closed = log_z1_closed_form(5.0, 3.0).unwrap();
        assert!((log_z(&p, &spec()).unwrap() - closed).abs() < 1e-8);
    }

    #[test]
    fn z1_closed_form_reference() {
        // mpmath at 30 digits
        let cases = [
            (0.1, 0.0, 0.050_416_631_949_954_877_92),
            (0.1, 0.5, -0.365_121_253_867_329_881_5),
            (0.1, 3.0, -1.366_160_263_834_629_891),
            (1.0, 0.0, 0.541_324_854_612_918_109_0),
            (1.0, 0.5, 0.029_634_983_105_441_688_98),
            (1.0, 3.0, -1.172_180_347_241_449_860),
            (5.0, 0.0, 3.383_801_338_116_411_068),
            (5.0, 0.5, 2.446_320_244_147_102_401),
            (5.0, 3.0, 0.046_087_780_192_768_109_26),
            (20.0, 0.0, 17.004_267_724_384_855_38),
            (20.0, 0.5, 15.385_619_341_378_677_90),
            (20.0, 3.0, 9.808_827_171_287_178_629),
        ];
        for (rho, eta, want) in cases {
            let c = log_z1_closed_form(rho, eta).unwrap();
            assert!((c - want).abs() < 1e-12, "closed ({rho},{eta})");
            let p = ExpFamilyParams::new(vec![rho], eta).unwrap();
            let q = log_z(&p, &spec()).unwrap();
            assert!((q - want).abs() < 1e-9, "quad ({rho},{eta}): {q}");
        }
        assert!((log_z1_closed_form(0.0, 1.0).unwrap() + 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn log_z_sharp_integrands() {
        // Large parameters from a long stream: compare with a fine composite rule
        // on a window around the peak.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let y: Vec<f64> = (0..20_000).map(|_| rng.random::<f64>() * 0.5).collect();
        let a = acc_of(3, &y);
        for &m in &[0.2, 0.25, 0.3] {
            let p = exp_family_params(&a, m).unwrap();
            let got = log_z(&p, &spec()).unwrap();
            let reference = log_integrate_composite(|x| p.log_phi(x), 2_000_000).unwrap();
            assert!((got - reference).abs() < 1e-7, "m={m}: {got} vs {reference}");
        }
    }

    #[test]
    fn wealth_trivial_and_oracle() {
        let a = MomentAccumulator::new(2).unwrap();
        let v = lbup_log_wealth(&a, 0.3, &PriorHyper::zero(2), &spec()).unwrap();
        assert!(v.abs() < 1e-15);

        // n = 1 against direct quadrature over b of the summed per-round bounds.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y: Vec<f64> = (0..5).map(|_| rng.random()).collect();
        let a = acc_of(1, &y);
        let m = 0.4;
        let lb = |b: f64| -> f64 { y.iter().map(|&v| log_gain_lower_bound(v, m, b, 1).unwrap()).sum() };
        let left = log_integrate_unit(|x| lb(x * m), &spec()).unwrap() + m.ln();
        let right = log_integrate_unit(|x| lb(m + x * (1.0 - m)), &spec()).unwrap() + (1.0 - m).ln();
        let oracle = log_add_exp(left, right);
        let got = lbup_log_wealth(&a, m, &PriorHyper::zero(1), &spec()).unwrap();
        assert!((got - oracle).abs() < 1e-8, "{got} vs {oracle}");
    }

    #[test]
    fn below_uniform_mixture() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in 1..=3 {
            let y: Vec<f64> = (0..60).map(|_| rng.random::<f64>().powi(2)).collect();
            let a = acc_of(n, &y);
            let p = PartitionPoly::from_outcomes(&y).unwrap();
            for i in 1..20 {
                let m = i as f64 / 20.0;
                let lb = lbup_log_wealth(&a, m, &PriorHyper::zero(n), &spec()).unwrap();
                let up = up_log_wealth(&p, m, &BetaPrior::UNIFORM).unwrap();
                assert!(lb <= up + 1e-9, "n={n} m={m}: {lb} > {up}");
            }
        }
    }

    #[test]
    fn nonzero_hyper_is_normalized() {
        let hyper = PriorHyper {
            rho0_1: vec![0.5, -0.2, 0.1],
            eta0_1: 0.3,
            rho0_2: vec![-0.4, 0.2, 0.0],
            eta0_2: 0.1,
        };
        let a = MomentAccumulator::new(2).unwrap();
        let v = lbup_log_wealth(&a, 0.37, &hyper, &spec()).unwrap();
        assert!(v.abs() < 1e-12);
        assert!(lbup_log_wealth(&a, 0.37, &PriorHyper::zero(1), &spec()).is_err());
    }

    #[test]
    fn hybrid_reduces_to_its_parts() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let y: Vec<f64> = (0..80).map(|_| rng.random()).collect();
        let snap = HybridSnapshot {
            poly: PartitionPoly::from_outcomes(&y[..30]).unwrap(),
            moments: acc_of(2, &y[..30]),
        };
        let at_switch = acc_of(2, &y[..30]);
        for &m in &[0.3, 0.5, 0.6] {
            let h = hybrid_log_wealth(&snap, &at_switch, m, &BetaPrior::JEFFREYS, &spec()).unwrap();
            let u = up_log_wealth(&snap.poly, m, &BetaPrior::JEFFREYS).unwrap();
            assert_eq!(h, u);
        }

        let empty = HybridSnapshot {
            poly: PartitionPoly::new(),
            moments: MomentAccumulator::new(2).unwrap(),
        };
        let full = acc_of(2, &y);
        for &m in &[0.3, 0.5, 0.6] {
            let h = hybrid_log_wealth(&empty, &full, m, &BetaPrior::JEFFREYS, &spec()).unwrap();
            let l = lbup_log_wealth(&full, m, &PriorHyper::zero(2), &spec()).unwrap();
            assert!((h - l).abs() < 1e-12);
        }
        assert!(hybrid_log_wealth(&snap, &acc_of(2, &y[..10]), 0.5, &BetaPrior::JEFFREYS, &spec()).is_err());
    }

    #[test]
    fn interval_contains_mean_and_up_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let y: Vec<f64> = (0..100).map(|_| rng.random::<f64>() * 0.6).collect();
        let mu = y.iter().sum::<f64>() / 100.0;
        let p = PartitionPoly::from_outcomes(&y).unwrap();
        let up = crate::up::up_interval(&p, 0.05, &BetaPrior::UNIFORM, 1e-9).unwrap();
        for n in 1..=3 {
            let a = acc_of(n, &y);
            let iv = lbup_interval(&a, mu, 0.05, &PriorHyper::zero(n), &spec()).unwrap();
            assert!(iv.contains(mu));
            assert!(iv.low <= up.low + 1e-9 && up.high <= iv.high + 1e-9, "{iv:?} vs {up:?}");
        }
        let a = MomentAccumulator::new(1).unwrap();
        assert_eq!(lbup_interval(&a, 0.5, 0.05, &PriorHyper::zero(1), &spec()).unwrap(), Interval::UNIT);
    }
}
