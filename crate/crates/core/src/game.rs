//! Horse-race wealth processes, the achievability check for candidate wealth
//! functions, and extraction of a betting strategy from an achievable one.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{closed_unit, domain, open_unit, Error, Result};
use crate::special::{binary_entropy, log_beta_unchecked};

/// Odds of a two-horse race.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OddsPair {
    pub o1: f64,
    pub o2: f64,
}

impl OddsPair {
    pub fn new(o1: f64, o2: f64) -> Result<Self> {
        if !(o1 > 0.0 && o1.is_finite()) {
            return Err(domain("o1", o1, "(0, inf)"));
        }
        if !(o2 > 0.0 && o2.is_finite()) {
            return Err(domain("o2", o2, "(0, inf)"));
        }
        Ok(Self { o1, o2 })
    }

    /// The odds `(1/m, 1/(1-m))` under which betting is fair when the mean is `m`.
    pub fn for_mean(m: f64) -> Result<Self> {
        open_unit("m", m)?;
        Ok(Self {
            o1: 1.0 / m,
            o2: 1.0 / (1.0 - m),
        })
    }

    /// Multiplicative gain of bet `b` on outcome `c` (mass on horse 1).
    pub fn gain(&self, b: f64, c: f64) -> f64 {
        self.o1 * b * c + self.o2 * (1.0 - b) * (1.0 - c)
    }
}

/// Log of the per-round gain `b y/m + (1-b)(1-y)/(1-m)`; `-inf` on ruin.
#[inline]
pub(crate) fn log_gain(y: f64, m: f64, b: f64) -> f64 {
    (b * y / m + (1.0 - b) * (1.0 - y) / (1.0 - m)).ln()
}

/// Log wealth of the constant bettor `b` against odds `(1/m, 1/(1-m))`.
pub fn constant_bettor_log_wealth(y: &[f64], m: f64, b: f64) -> Result<f64> {
    open_unit("m", m)?;
    closed_unit("b", b)?;
    let mut acc = 0.0;
    for &yi in y {
        closed_unit("y", yi)?;
        acc += log_gain(yi, m, b);
    }
    Ok(acc)
}

/// Log wealth of the best constant bettor in hindsight on a binary race
/// with `s` wins for horse 1 out of `t` rounds.
pub fn best_hindsight_log_wealth(s: f64, t: u64, o1: f64, o2: f64) -> Result<f64> {
    let odds = OddsPair::new(o1, o2)?;
    if t == 0 {
        return Err(domain("t", 0.0, "[1, inf)"));
    }
    let tf = t as f64;
    if !(0.0..=tf).contains(&s) {
        return Err(domain("S", s, "[0, t]"));
    }
    Ok(xlog(s, odds.o1) + xlog(tf - s, odds.o2) - tf * binary_entropy(s / tf)?)
}

fn xlog(x: f64, o: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * o.ln()
    }
}

/// Krichevsky–Trofimov bet at round `t` after `prior_sum` total outcome mass:
/// `(prior_sum + 1/2) / t`.
pub fn kt_bet(prior_sum: f64, t: u64) -> Result<f64> {
    if t == 0 {
        return Err(domain("t", 0.0, "[1, inf)"));
    }
    let tf = t as f64;
    if !(prior_sum >= 0.0 && prior_sum <= tf - 1.0) {
        return Err(domain("prior_sum", prior_sum, "[0, t-1]"));
    }
    Ok((prior_sum + 0.5) / tf)
}

/// Log-wealth curve of a causal strategy. `bets` receives the outcomes seen
/// so far and returns the fraction wagered on horse 1 for the next round.
pub fn simulate_strategy_wealth<F>(mut bets: F, y: &[f64], m: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    open_unit("m", m)?;
    let mut out = Vec::with_capacity(y.len());
    let mut acc = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        closed_unit("y", yi)?;
        let b = closed_unit("b", bets(&y[..i]))?;
        acc += log_gain(yi, m, b);
        out.push(acc);
    }
    Ok(out)
}

/// The KT strategy as a closure for [`simulate_strategy_wealth`].
pub fn kt_strategy(history: &[f64]) -> f64 {
    (history.iter().sum::<f64>() + 0.5) / (history.len() as f64 + 1.0)
}

/// Outcome and odds of the "continuous coin" baseline: the gain
/// `b(1-y+m) + (1-b)(1+y-m)` is a two-horse race at odds `(2, 2)` with
/// outcome `(1-y+m)/2` on horse 1.
pub fn cb_transform(y: f64, m: f64) -> Result<(f64, OddsPair)> {
    closed_unit("y", y)?;
    open_unit("m", m)?;
    Ok(((1.0 - y + m) / 2.0, OddsPair { o1: 2.0, o2: 2.0 }))
}

/// Evaluates a wealth function at a basis prefix followed by one general
/// outcome `c` on the probability simplex (the market vector is `o_j c_j`).
pub type InteriorWealth = Arc<dyn Fn(&[usize], &[f64]) -> f64 + Send + Sync>;

/// Candidate wealth function tabulated on every sequence of basis outcomes
/// (`o_j e_j`) up to a horizon.
#[derive(Clone)]
pub struct WealthTable {
    horizon: usize,
    odds: Vec<f64>,
    // levels[t] holds K^t values, indexed base K with the earliest round
    // as the most significant digit.
    levels: Vec<Vec<f64>>,
    interior: Option<InteriorWealth>,
}

impl std::fmt::Debug for WealthTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WealthTable")
            .field("horizon", &self.horizon)
            .field("odds", &self.odds)
            .field("levels", &self.levels)
            .field("interior", &self.interior.is_some())
            .finish()
    }
}

fn encode(seq: &[usize], k: usize) -> usize {
    seq.iter().fold(0, |acc, &j| acc * k + j)
}

fn decode(mut idx: usize, len: usize, k: usize) -> Vec<usize> {
    let mut seq = vec![0; len];
    for slot in seq.iter_mut().rev() {
        *slot = idx % k;
        idx /= k;
    }
    seq
}

impl WealthTable {
    /// Builds a table from raw level vectors, validating shape and sign.
    pub fn from_levels(odds: Vec<f64>, levels: Vec<Vec<f64>>) -> Result<Self> {
        if odds.len() < 2 {
            return Err(Error::IncompleteTable(format!(
                "need at least two assets, got {}",
                odds.len()
            )));
        }
        for &o in &odds {
            if !(o > 0.0 && o.is_finite()) {
                return Err(domain("odds", o, "(0, inf)"));
            }
        }
        if levels.is_empty() {
            return Err(Error::IncompleteTable("no levels".into()));
        }
        let k = odds.len();
        let mut width = 1usize;
        for (t, level) in levels.iter().enumerate() {
            if level.len() != width {
                return Err(Error::IncompleteTable(format!(
                    "level {t} has {} entries, expected {width}",
                    level.len()
                )));
            }
            if let Some(bad) = level.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
                return Err(domain("psi", *bad, "[0, inf)"));
            }
            width = width
                .checked_mul(k)
                .ok_or_else(|| Error::IncompleteTable("table too large".into()))?;
        }
        Ok(Self {
            horizon: levels.len() - 1,
            odds,
            levels,
            interior: None,
        })
    }

    /// Tabulates `psi` on every basis sequence of length `0..=horizon`.
    pub fn from_fn<F>(horizon: usize, odds: Vec<f64>, psi: F) -> Result<Self>
    where
        F: Fn(&[usize]) -> f64,
    {
        let k = odds.len();
        let mut levels = Vec::with_capacity(horizon + 1);
        for t in 0..=horizon {
            let width = k.pow(t as u32);
            levels.push((0..width).map(|i| psi(&decode(i, t, k))).collect());
        }
        Self::from_levels(odds, levels)
    }

    /// Attaches an evaluator used for the convexity condition at interior
    /// market vectors.
    pub fn with_interior(mut self, interior: InteriorWealth) -> Self {
        self.interior = Some(interior);
        self
    }

    /// The Beta(1/2, 1/2) mixture potential on a fair two-horse race
    /// (odds 2, 2). Outcome index 0 is a win for horse 1.
    pub fn kt_mixture(horizon: usize) -> Self {
        let ln_pi = std::f64::consts::PI.ln();
        let phi = move |x: f64, t: f64| {
            (t * std::f64::consts::LN_2 + log_beta_unchecked(x + 0.5, t - x + 0.5) - ln_pi).exp()
        };
        let table = Self::from_fn(horizon, vec![2.0, 2.0], |seq| {
            let s = seq.iter().filter(|&&j| j == 0).count() as f64;
            phi(s, seq.len() as f64)
        })
        .expect("mixture table is well formed");
        table.with_interior(Arc::new(move |prefix, c| {
            let s = prefix.iter().filter(|&&j| j == 0).count() as f64;
            phi(s + c[0], prefix.len() as f64 + 1.0)
        }))
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_assets(&self) -> usize {
        self.odds.len()
    }

    pub fn odds(&self) -> &[f64] {
        &self.odds
    }

    /// `Ψ_t` at a basis sequence of length `t <= horizon`.
    pub fn value(&self, seq: &[usize]) -> Option<f64> {
        let k = self.num_assets();
        if seq.len() > self.horizon || seq.iter().any(|&j| j >= k) {
            return None;
        }
        self.levels[seq.len()].get(encode(seq, k)).copied()
    }

    /// Replaces one entry; used to build perturbed tables.
    pub fn set_value(&mut self, seq: &[usize], v: f64) -> Result<()> {
        let k = self.num_assets();
        if seq.len() > self.horizon || seq.iter().any(|&j| j >= k) {
            return Err(Error::IncompleteTable(format!("no entry for {seq:?}")));
        }
        if !(v >= 0.0) || !v.is_finite() {
            return Err(domain("psi", v, "[0, inf)"));
        }
        self.levels[seq.len()][encode(seq, k)] = v;
        Ok(())
    }
}

/// Outcome of [`check_achievability`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AchievabilityReport {
    pub a1_ok: bool,
    pub a2_ok: bool,
    /// Largest signed violation over all checked inequalities (`rhs - lhs`);
    /// nonpositive when everything holds.
    pub worst_violation: f64,
    /// Largest `|lhs - rhs|` in the consistency condition; zero when it holds
    /// with equality.
    pub a1_max_gap: f64,
    /// Number of interior points at which convexity was checked (zero when
    /// the table carries no interior evaluator).
    pub a2_points: usize,
}

const ACHIEVABILITY_TOL: f64 = 1e-12;

/// Interior points of the simplex with coordinates in `{1/10, ..., 9/10}`.
fn interior_grid(k: usize) -> Vec<Vec<f64>> {
    fn rec(k: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if cur.len() + 1 == k {
            if left >= 1 {
                cur.push(left);
                out.push(cur.iter().map(|&c| c as f64 / 10.0).collect());
                cur.pop();
            }
            return;
        }
        for c in 1..left {
            cur.push(c);
            rec(k, left - c, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, 10, &mut Vec::new(), &mut out);
    out
}

/// Checks the consistency (A1) and convexity (A2) conditions under which a
/// tabulated wealth function can be achieved by some causal strategy.
pub fn check_achievability(table: &WealthTable) -> Result<AchievabilityReport> {
    let k = table.num_assets();
    if (table.levels[0][0] - 1.0).abs() > ACHIEVABILITY_TOL {
        return Err(Error::IncompleteTable(format!(
            "Psi_0 = {} (expected 1)",
            table.levels[0][0]
        )));
    }
    let mut worst = f64::NEG_INFINITY;
    let mut a1_ok = true;
    let mut a1_gap = 0.0_f64;
    for t in 1..=table.horizon {
        for (p, &parent) in table.levels[t - 1].iter().enumerate() {
            let rhs: f64 = (0..k)
                .map(|j| table.levels[t][p * k + j] / table.odds[j])
                .sum();
            let v = rhs - parent;
            worst = worst.max(v);
            a1_gap = a1_gap.max(v.abs());
            if v > ACHIEVABILITY_TOL * parent.max(1.0) {
                a1_ok = false;
            }
        }
    }

    let mut a2_ok = true;
    let mut a2_points = 0;
    if let Some(interior) = &table.interior {
        let grid = interior_grid(k);
        for t in 1..=table.horizon {
            for p in 0..table.levels[t - 1].len() {
                let prefix = decode(p, t - 1, k);
                for c in &grid {
                    // market vector x_j = o_j c_j, so x_j / o_j = c_j
                    let lhs: f64 = (0..k).map(|j| c[j] * table.levels[t][p * k + j]).sum();
                    let rhs = interior(&prefix, c);
                    let v = rhs - lhs;
                    worst = worst.max(v);
                    a2_points += 1;
                    if v > ACHIEVABILITY_TOL * lhs.max(1.0) {
                        a2_ok = false;
                    }
                }
            }
        }
    }

    Ok(AchievabilityReport {
        a1_ok,
        a2_ok,
        worst_violation: worst,
        a1_max_gap: a1_gap,
        a2_points,
    })
}

/// Betting strategy read off an achievable wealth table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableStrategy {
    odds: Vec<f64>,
    // bets[t][prefix] is the bet vector for round t + 1.
    bets: Vec<Vec<Vec<f64>>>,
}

impl TableStrategy {
    pub fn horizon(&self) -> usize {
        self.bets.len()
    }

    /// Bet vector after the basis prefix `prefix`.
    pub fn bet(&self, prefix: &[usize]) -> Option<&[f64]> {
        let k = self.odds.len();
        if prefix.iter().any(|&j| j >= k) {
            return None;
        }
        self.bets
            .get(prefix.len())
            .and_then(|level| level.get(encode(prefix, k)))
            .map(Vec::as_slice)
    }

    /// Log-wealth curve obtained by following the strategy on a basis
    /// sequence.
    pub fn simulate(&self, seq: &[usize]) -> Option<Vec<f64>> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(seq.len());
        for i in 0..seq.len() {
            let b = self.bet(&seq[..i])?;
            let j = seq[i];
            acc += (b[j] * self.odds[j]).ln();
            out.push(acc);
        }
        Some(out)
    }
}

/// Extracts bets `b_j = Ψ_t(prefix ∘ o_j e_j) / (o_j Ψ_{t-1}(prefix))`,
/// spreading any leftover mass in proportion to those lower bounds.
pub fn strategy_from_wealth(table: &WealthTable) -> Result<TableStrategy> {
    let k = table.num_assets();
    let mut bets = Vec::with_capacity(table.horizon);
    for t in 1..=table.horizon {
        let parents = &table.levels[t - 1];
        let mut level = Vec::with_capacity(parents.len());
        for (p, &parent) in parents.iter().enumerate() {
            if parent == 0.0 {
                let prefix = decode(p, t - 1, k);
                if reachable(table, &prefix) {
                    return Err(Error::DegenerateWealth { prefix });
                }
                level.push(vec![1.0 / k as f64; k]);
                continue;
            }
            let lower: Vec<f64> = (0..k)
                .map(|j| table.levels[t][p * k + j] / (table.odds[j] * parent))
                .collect();
            let total: f64 = lower.iter().sum();
            let b = if total > 0.0 {
                lower.iter().map(|v| v / total).collect()
            } else {
                vec![1.0 / k as f64; k]
            };
            level.push(b);
        }
        bets.push(level);
    }
    Ok(TableStrategy {
        odds: table.odds.clone(),
        bets,
    })
}

/// A prefix is reachable with positive wealth when every proper prefix of
/// it has positive tabulated wealth.
fn reachable(table: &WealthTable, prefix: &[usize]) -> bool {
    (0..prefix.len()).all(|i| table.value(&prefix[..i]).is_some_and(|v| v > 0.0))
}
