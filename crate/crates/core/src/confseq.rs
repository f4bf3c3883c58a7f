//! Running-intersection confidence sequences from wealth processes.
//!
//! At each round the candidate means whose log wealth reaches `ln(1/δ)` are
//! rejected; the reported set is the intersection of the per-round
//! sublevel intervals, which realizes the supremum over past rounds.

use serde::{Deserialize, Serialize};

use crate::error::{check_delta, closed_unit, domain, open_unit, Error, Result};
use crate::game::cb_transform;
use crate::hr::{hr_interval_within, BinaryCounts};
use crate::lbup::{
    HybridSnapshot, HybridWealth, LbupWealth, MomentAccumulator, PriorHyper, LBUP_SEARCH,
};
use crate::roots::{scan_points, sublevel_within, Interval, LogWealthFn, SearchSpec};
use crate::special::QuadratureSpec;
use crate::up::{up_interval_within, BetaPrior, PartitionPoly, UpWealth};

/// Wealth process a confidence sequence is built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Method {
    /// Discrete race with the KT mixture, fed the raw outcomes.
    Hr,
    /// Exact Beta mixture over constant bets.
    Up { prior: BetaPrior },
    /// Conjugate mixture of order-`n` lower bounds.
    Lbup { n: usize, hyper: PriorHyper },
    /// Exact mixture for `t_switch` rounds, lower-bound mixture afterwards.
    Hybrid {
        n: usize,
        t_switch: u64,
        prior: BetaPrior,
    },
    /// Mixture over bets at even odds on `(1 - y + m) / 2`.
    Cb { prior: BetaPrior },
}

impl Method {
    pub fn lbup(n: usize) -> Self {
        Method::Lbup {
            n,
            hyper: PriorHyper::zero(n),
        }
    }

    /// Hybrid whose exact phase mixes with Beta(1/2, 1/2).
    pub fn hybrid(n: usize, t_switch: u64) -> Self {
        Method::Hybrid {
            n,
            t_switch,
            prior: BetaPrior::JEFFREYS,
        }
    }

    /// Short label used in tables: `hr`, `up`, `lbup3`, `hybrid`, `cb`.
    pub fn label(&self) -> String {
        match self {
            Method::Hr => "hr".into(),
            Method::Up { prior } if *prior == BetaPrior::JEFFREYS => "up".into(),
            Method::Up { prior } if *prior == BetaPrior::UNIFORM => "up-uniform".into(),
            Method::Up { prior } => format!("up-beta{},{}", prior.alpha, prior.beta),
            Method::Lbup { n, .. } => format!("lbup{n}"),
            Method::Hybrid { .. } => "hybrid".into(),
            Method::Cb { .. } => "cb".into(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Method::Hr => Ok(()),
            Method::Up { prior } | Method::Cb { prior } => {
                BetaPrior::new(prior.alpha, prior.beta).map(|_| ())
            }
            Method::Lbup { n, hyper } => {
                MomentAccumulator::new(*n)?;
                hyper.validate(*n)
            }
            Method::Hybrid { n, prior, .. } => {
                MomentAccumulator::new(*n)?;
                BetaPrior::new(prior.alpha, prior.beta).map(|_| ())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Accumulator {
    Hr(BinaryCounts),
    Up(PartitionPoly),
    Lbup(MomentAccumulator),
    Hybrid {
        // Live only until the switch.
        poly: Option<PartitionPoly>,
        acc: MomentAccumulator,
        snapshot: Option<HybridSnapshot>,
    },
    Cb(Vec<f64>),
}

/// One stream's confidence sequence. Serializable as a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceState {
    delta: f64,
    method: Method,
    t: u64,
    sum: f64,
    low: f64,
    high: f64,
    empty_since: Option<u64>,
    last_round: Option<Interval>,
    tol: f64,
    quadrature: QuadratureSpec,
    acc: Accumulator,
}

impl ConfidenceState {
    pub fn new(method: Method, delta: f64) -> Result<Self> {
        Self::with_settings(method, delta, 1e-9, QuadratureSpec::default())
    }

    pub fn with_settings(
        method: Method,
        delta: f64,
        tol: f64,
        quadrature: QuadratureSpec,
    ) -> Result<Self> {
        check_delta(delta)?;
        method.validate()?;
        quadrature.validate()?;
        if !(tol > 0.0 && tol < 0.5) {
            return Err(domain("tol", tol, "(0, 0.5)"));
        }
        let acc = match &method {
            Method::Hr => Accumulator::Hr(BinaryCounts::default()),
            Method::Up { .. } => Accumulator::Up(PartitionPoly::new()),
            Method::Lbup { n, .. } => Accumulator::Lbup(MomentAccumulator::new(*n)?),
            Method::Hybrid { n, t_switch, .. } => {
                let acc = MomentAccumulator::new(*n)?;
                if *t_switch == 0 {
                    Accumulator::Hybrid {
                        poly: None,
                        snapshot: Some(HybridSnapshot {
                            poly: PartitionPoly::new(),
                            moments: acc.clone(),
                        }),
                        acc,
                    }
                } else {
                    Accumulator::Hybrid {
                        poly: Some(PartitionPoly::new()),
                        acc,
                        snapshot: None,
                    }
                }
            }
            Method::Cb { .. } => Accumulator::Cb(Vec::new()),
        };
        Ok(Self {
            delta,
            method,
            t: 0,
            sum: 0.0,
            low: 0.0,
            high: 1.0,
            empty_since: None,
            last_round: None,
            tol,
            quadrature,
            acc,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn method(&self) -> &Method {
        &self.method
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn threshold(&self) -> f64 {
        -self.delta.ln()
    }

    /// Empirical mean of the outcomes so far.
    pub fn mean(&self) -> Option<f64> {
        (self.t > 0).then(|| (self.sum / self.t as f64).clamp(0.0, 1.0))
    }

    /// The running intersection, or `None` once it has become empty.
    pub fn interval(&self) -> Option<Interval> {
        match self.empty_since {
            Some(_) => None,
            None => Some(Interval {
                low: self.low,
                high: self.high,
            }),
        }
    }

    /// Round at which the intersection became empty.
    pub fn empty_since(&self) -> Option<u64> {
        self.empty_since
    }

    /// The last round's sublevel interval, searched within the running
    /// intersection of the rounds before it.
    pub fn last_round(&self) -> Option<Interval> {
        self.last_round
    }

    /// Log wealth of the current round at candidate mean `m`.
    pub fn log_wealth(&self, m: f64) -> Result<f64> {
        open_unit("m", m)?;
        let q = self.quadrature;
        Ok(match (&self.acc, &self.method) {
            (Accumulator::Hr(c), _) => crate::hr::hr_log_wealth(c, m)?,
            (Accumulator::Up(p), Method::Up { prior }) => UpWealth::new(p, prior).value(m),
            (Accumulator::Lbup(a), Method::Lbup { hyper, .. }) => LbupWealth {
                acc: a,
                hyper,
                spec: q,
            }
            .value(m),
            (Accumulator::Hybrid { poly, acc, snapshot }, Method::Hybrid { prior, .. }) => {
                match (poly, snapshot) {
                    (_, Some(s)) => HybridWealth::new(s, acc, prior, q).value(m),
                    (Some(p), None) => UpWealth::new(p, prior).value(m),
                    (None, None) => unreachable!("hybrid state holds a polynomial or a snapshot"),
                }
            }
            (Accumulator::Cb(y), Method::Cb { prior }) => cb_log_wealth(y, m, prior)?,
            _ => unreachable!("accumulator matches its method"),
        })
    }

    /// Folds in one outcome without recomputing the interval.
    pub fn absorb(&mut self, y: f64) -> Result<()> {
        closed_unit("y", y)?;
        match &mut self.acc {
            Accumulator::Hr(c) => c.push(y)?,
            Accumulator::Up(p) => p.push(y)?,
            Accumulator::Lbup(a) => a.push(y)?,
            Accumulator::Hybrid { poly, acc, snapshot } => {
                acc.push(y)?;
                if let Some(p) = poly {
                    p.push(y)?;
                    let Method::Hybrid { t_switch, .. } = self.method else {
                        unreachable!()
                    };
                    if acc.t() == t_switch {
                        *snapshot = Some(HybridSnapshot {
                            poly: poly.take().expect("checked above"),
                            moments: acc.clone(),
                        });
                    }
                }
            }
            Accumulator::Cb(v) => v.push(y),
        }
        self.t += 1;
        self.sum += y;
        Ok(())
    }

    /// Advances by one outcome and returns the running intersection.
    ///
    /// Once the intersection is empty every later call returns
    /// [`Error::EmptyIntersection`] with the round at which it emptied; the
    /// state keeps absorbing outcomes.
    pub fn update(&mut self, y: f64) -> Result<Interval> {
        self.absorb(y)?;
        if let Some(t) = self.empty_since {
            return Err(Error::EmptyIntersection { t });
        }
        let within = Interval {
            low: self.low,
            high: self.high,
        };
        let round = match self.round_interval(within) {
            Ok(iv) => iv,
            // The seed is rejected: the earlier rounds' bound stands.
            Err(Error::InfeasibleSeed { .. }) => within,
            Err(e) => return Err(e),
        };
        self.last_round = Some(round);
        match within.intersect(&round) {
            Some(iv) => {
                self.low = iv.low;
                self.high = iv.high;
                Ok(iv)
            }
            None => {
                self.empty_since = Some(self.t);
                Err(Error::EmptyIntersection { t: self.t })
            }
        }
    }

    fn round_interval(&self, within: Interval) -> Result<Interval> {
        let seed = match self.mean() {
            Some(mu) => mu,
            None => return Ok(within),
        };
        let thr = self.threshold();
        let q = self.quadrature;
        let guarded = SearchSpec {
            tol: self.tol,
            ..LBUP_SEARCH
        };
        match (&self.acc, &self.method) {
            (Accumulator::Hr(c), _) => hr_interval_within(c, self.delta, self.tol, within),
            (Accumulator::Up(p), Method::Up { prior }) => {
                up_interval_within(p, seed, self.delta, prior, self.tol, within)
            }
            (Accumulator::Lbup(a), Method::Lbup { hyper, .. }) => {
                let mut f = LbupWealth {
                    acc: a,
                    hyper,
                    spec: q,
                };
                sublevel_within(&mut f, thr, seed, within, &guarded)
            }
            (Accumulator::Hybrid { poly, acc, snapshot }, Method::Hybrid { prior, .. }) => {
                match (poly, snapshot) {
                    (_, Some(s)) if s.moments.t() < acc.t() => {
                        let mut f = HybridWealth::new(s, acc, prior, q);
                        sublevel_within(&mut f, thr, seed, within, &guarded)
                    }
                    (_, Some(s)) => {
                        up_interval_within(&s.poly, seed, self.delta, prior, self.tol, within)
                    }
                    (Some(p), None) => {
                        up_interval_within(p, seed, self.delta, prior, self.tol, within)
                    }
                    (None, None) => unreachable!("hybrid state holds a polynomial or a snapshot"),
                }
            }
            (Accumulator::Cb(y), Method::Cb { prior }) => {
                let mut f = CbWealth { y, prior: *prior };
                sublevel_within(&mut f, thr, seed, within, &guarded)
            }
            _ => unreachable!("accumulator matches its method"),
        }
    }

    /// Search used for the current round: the exact mixtures are convex in
    /// `m`, the lower-bound and even-odds ones are scanned.
    fn search_spec(&self) -> SearchSpec {
        let convex = SearchSpec {
            tol: self.tol,
            ..SearchSpec::convex(1e-9)
        };
        let guarded = SearchSpec {
            tol: self.tol,
            ..LBUP_SEARCH
        };
        match &self.acc {
            Accumulator::Hr(_) | Accumulator::Up(_) => convex,
            Accumulator::Hybrid {
                acc,
                snapshot: Some(s),
                ..
            } if s.moments.t() < acc.t() => guarded,
            Accumulator::Hybrid { .. } => convex,
            Accumulator::Lbup(_) | Accumulator::Cb(_) => guarded,
        }
    }

    /// Whether the current round's search, taken on its own, leaves `m` out
    /// of its interval: `m` is rejected, or (for scanned searches) a scan
    /// point between the empirical mean and `m` is. Rounds whose seed is
    /// itself rejected reject nothing, as in [`Self::update`].
    ///
    /// Costs a few wealth evaluations instead of a full search, which is
    /// what coverage simulations need.
    pub fn round_rejects(&self, m: f64) -> Result<bool> {
        open_unit("m", m)?;
        let Some(mu) = self.mean() else {
            return Ok(false);
        };
        let spec = self.search_spec();
        let thr = self.threshold();
        let seed = mu.clamp(spec.eps, 1.0 - spec.eps);
        if !(self.log_wealth(seed)? < thr) {
            return Ok(false);
        }
        if !(self.log_wealth(m)? < thr) {
            return Ok(true);
        }
        for p in scan_points(&spec, seed, m) {
            if !(self.log_wealth(p)? < thr) {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Runs [`Self::update`] over a slice, stopping at the first error other
    /// than an empty intersection. Returns the intervals, `None` where empty.
    pub fn update_all(&mut self, ys: &[f64]) -> Result<Vec<Option<Interval>>> {
        let mut out = Vec::with_capacity(ys.len());
        for &y in ys {
            match self.update(y) {
                Ok(iv) => out.push(Some(iv)),
                Err(Error::EmptyIntersection { .. }) => out.push(None),
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    }
}

struct CbWealth<'a> {
    y: &'a [f64],
    prior: BetaPrior,
}

impl LogWealthFn for CbWealth<'_> {
    fn value(&mut self, m: f64) -> f64 {
        cb_log_wealth(self.y, m, &self.prior).unwrap_or(f64::INFINITY)
    }
}

/// Log wealth of the mixture over constant bets at even odds on the
/// transformed outcomes `(1 - y_i + m) / 2`. The transform moves with `m`,
/// so the partition polynomial is rebuilt on every call (`O(t^2)`).
pub fn cb_log_wealth(y: &[f64], m: f64, prior: &BetaPrior) -> Result<f64> {
    open_unit("m", m)?;
    BetaPrior::new(prior.alpha, prior.beta)?;
    let mut poly = PartitionPoly::new();
    let mut odds = (2.0, 2.0);
    for &v in y {
        let (c, o) = cb_transform(v, m)?;
        poly.push(c)?;
        odds = (o.o1, o.o2);
    }
    Ok(UpWealth::new(&poly, prior).log_wealth_at_odds(odds.0, odds.1))
}

/// Single-round sublevel interval of [`cb_log_wealth`], seeded at the
/// empirical mean.
pub fn cb_interval(y: &[f64], delta: f64, prior: &BetaPrior) -> Result<Interval> {
    check_delta(delta)?;
    BetaPrior::new(prior.alpha, prior.beta)?;
    for &v in y {
        closed_unit("y", v)?;
    }
    if y.is_empty() {
        return Ok(Interval::UNIT);
    }
    let seed = y.iter().sum::<f64>() / y.len() as f64;
    let mut f = CbWealth { y, prior: *prior };
    sublevel_within(&mut f, -delta.ln(), seed, Interval::UNIT, &LBUP_SEARCH)
}
