use std::time::Instant;

use anyhow::{bail, Result};
use confseq_core::{ConfidenceState, Error as CoreError, Interval, Method};
use rayon::prelude::*;

use crate::config::{Dist, ExperimentConfig};
use crate::generate::generate;

/// Rounds at which wealth curves are drawn by default.
pub const CURVE_TIMES: [u64; 6] = [1, 5, 10, 50, 100, 500];

/// `points` evenly spaced candidate means on `[0.001, 0.999]`.
pub fn m_grid(points: usize) -> Vec<f64> {
    let (lo, hi) = (0.001, 0.999);
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub t: u64,
    pub m: f64,
    pub method: String,
    pub log_wealth: f64,
}

/// Log wealth of each method over the `m` grid at the requested rounds, on
/// the stream of the first seed. Each round also gets `threshold` rows at
/// `ln(1/δ)`.
pub fn wealth_curve(cfg: &ExperimentConfig, times: &[u64]) -> Result<Vec<CurveRow>> {
    cfg.validate()?;
    let y = generate(&cfg.dist, cfg.horizon, cfg.seeds[0])?;
    let mut times: Vec<u64> = times
        .iter()
        .copied()
        .filter(|&t| t >= 1 && t as usize <= y.len())
        .collect();
    times.sort_unstable();
    times.dedup();
    let grid = m_grid(cfg.m_grid);
    let threshold = -cfg.delta.ln();

    let per_method: Vec<Vec<CurveRow>> = cfg
        .methods
        .par_iter()
        .map(|method| -> Result<Vec<CurveRow>> {
            let mut s = ConfidenceState::new(method.clone(), cfg.delta)?;
            let mut rows = Vec::new();
            let label = method.label();
            for (i, &v) in y.iter().enumerate() {
                s.absorb(v)?;
                let t = i as u64 + 1;
                if times.binary_search(&t).is_ok() {
                    for &m in &grid {
                        rows.push(CurveRow {
                            t,
                            m,
                            method: label.clone(),
                            log_wealth: s.log_wealth(m)?,
                        });
                    }
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;

    let mut out = Vec::new();
    for &t in &times {
        for rows in &per_method {
            out.extend(rows.iter().filter(|r| r.t == t).cloned());
        }
        out.extend(grid.iter().map(|&m| CurveRow {
            t,
            m,
            method: "threshold".into(),
            log_wealth: threshold,
        }));
    }
    Ok(out)
}

/// One replicate: the running interval after every round (`None` once
/// empty) and the cumulative time spent in updates.
#[derive(Debug, Clone)]
pub struct ReplicateRun {
    pub intervals: Vec<Option<Interval>>,
    pub cumulative_ns: Vec<u64>,
    pub emptied_at: Option<u64>,
}

pub fn run_replicate(method: &Method, delta: f64, y: &[f64]) -> Result<ReplicateRun> {
    let mut s = ConfidenceState::new(method.clone(), delta)?;
    let mut intervals = Vec::with_capacity(y.len());
    let mut cumulative_ns = Vec::with_capacity(y.len());
    let mut total = 0u64;
    for &v in y {
        let start = Instant::now();
        let r = s.update(v);
        total += start.elapsed().as_nanos() as u64;
        match r {
            Ok(iv) => intervals.push(Some(iv)),
            Err(CoreError::EmptyIntersection { .. }) => intervals.push(None),
            Err(e) => return Err(e.into()),
        }
        cumulative_ns.push(total);
    }
    Ok(ReplicateRun {
        intervals,
        cumulative_ns,
        emptied_at: s.empty_since(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WidthRow {
    pub t: u64,
    pub method: String,
    pub low: f64,
    pub high: f64,
    pub elapsed_ns: u64,
}

/// Per-round interval ends averaged over seeds (replicates whose running
/// intersection has emptied are left out of the average), with the mean
/// cumulative update time.
pub fn run_widths(cfg: &ExperimentConfig) -> Result<Vec<WidthRow>> {
    cfg.validate()?;
    let streams: Vec<Vec<f64>> = cfg
        .seeds
        .iter()
        .map(|&s| generate(&cfg.dist, cfg.horizon, s))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..cfg.methods.len())
        .flat_map(|m| (0..streams.len()).map(move |s| (m, s)))
        .collect();
    let runs: Vec<ReplicateRun> = jobs
        .par_iter()
        .map(|&(m, s)| run_replicate(&cfg.methods[m], cfg.delta, &streams[s]))
        .collect::<Result<_>>()?;
    for (&(m, s), run) in jobs.iter().zip(&runs) {
        if let Some(t) = run.emptied_at {
            log::warn!(
                "{} seed {}: running intersection empty from t = {t}",
                cfg.methods[m].label(),
                cfg.seeds[s]
            );
        }
    }

    let horizon = streams.iter().map(Vec::len).min().unwrap_or(0);
    let mut rows = Vec::with_capacity(horizon * cfg.methods.len());
    for t in 0..horizon {
        for (m, method) in cfg.methods.iter().enumerate() {
            let reps = &runs[m * streams.len()..(m + 1) * streams.len()];
            let live: Vec<Interval> = reps.iter().filter_map(|r| r.intervals[t]).collect();
            let k = live.len() as f64;
            let (low, high) = if live.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                (
                    live.iter().map(|iv| iv.low).sum::<f64>() / k,
                    live.iter().map(|iv| iv.high).sum::<f64>() / k,
                )
            };
            let elapsed =
                reps.iter().map(|r| r.cumulative_ns[t] as u128).sum::<u128>() / reps.len() as u128;
            rows.push(WidthRow {
                t: t as u64 + 1,
                method: method.label(),
                low,
                high,
                elapsed_ns: elapsed as u64,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageRow {
    pub method: String,
    pub replicates: usize,
    pub miscovered: usize,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Wilson score interval for a binomial proportion at 95%.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = successes as f64 / n;
    let den = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / den;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / den;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Whether `mu` ever leaves the running interval within the stream, for
/// each method. Decided round by round with [`ConfidenceState::round_rejects`],
/// which agrees with the full update but only evaluates the wealth near `mu`.
pub fn miscovers(methods: &[Method], delta: f64, y: &[f64], mu: f64) -> Result<Vec<bool>> {
    methods
        .iter()
        .map(|method| -> Result<bool> {
            let mut s = ConfidenceState::new(method.clone(), delta)?;
            for &v in y {
                s.absorb(v)?;
                if s.round_rejects(mu)? {
                    return Ok(true);
                }
            }
            Ok(false)
        })
        .collect()
}

/// Per-seed miscoverage flags, `[seed][method]`.
pub fn coverage_flags(cfg: &ExperimentConfig, mu: f64) -> Result<Vec<Vec<bool>>> {
    cfg.validate()?;
    if !(mu > 0.0 && mu < 1.0) {
        bail!("true mean {mu} must lie in (0, 1)");
    }
    cfg.seeds
        .par_iter()
        .map(|&seed| {
            let y = generate(&cfg.dist, cfg.horizon, seed)?;
            miscovers(&cfg.methods, cfg.delta, &y, mu)
        })
        .collect()
}

/// Fraction of replicates (one per seed) in which the true mean leaves the
/// running interval within the horizon.
pub fn coverage_mc(cfg: &ExperimentConfig, mu: Option<f64>) -> Result<Vec<CoverageRow>> {
    if cfg.seeds.len() < 100 {
        bail!("coverage needs at least 100 replicates, got {}", cfg.seeds.len());
    }
    let mu = match mu.or_else(|| cfg.dist.mean()) {
        Some(mu) => mu,
        None => bail!("the true mean of {} is unknown; pass it explicitly", cfg.dist),
    };
    if let Dist::File(_) = cfg.dist {
        log::warn!("replicates of a file source all see the same stream");
    }
    let flags = coverage_flags(cfg, mu)?;
    let reps = flags.len();
    Ok(cfg
        .methods
        .iter()
        .enumerate()
        .map(|(j, method)| {
            let miscovered = flags.iter().filter(|f| f[j]).count();
            let (ci_low, ci_high) = wilson_interval(miscovered, reps);
            CoverageRow {
                method: method.label(),
                replicates: reps,
                miscovered,
                rate: miscovered as f64 / reps as f64,
                ci_low,
                ci_high,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub method: String,
    pub t: u64,
    pub ns_per_step: f64,
}

const WARMUP_STEPS: usize = 20;

/// Mean wall time of an update over `reps` consecutive rounds starting at
/// each round in `times`. Rounds between the measurement points are absorbed
/// without searching. The cost of one update depends on whether its interval
/// moves, so single updates are too noisy to compare across rounds.
pub fn bench(methods: &[Method], times: &[u64], dist: &Dist, seed: u64, reps: usize) -> Result<Vec<BenchRow>> {
    let mut times = times.to_vec();
    times.sort_unstable();
    times.dedup();
    let reps = reps.max(1);
    let last = *times.last().unwrap_or(&0) as usize;
    let y = generate(dist, last + reps, seed)?;
    if y.len() < last + reps {
        bail!("source holds {} observations, {} needed", y.len(), last + reps);
    }
    let mut rows = Vec::new();
    for method in methods {
        let mut s = ConfidenceState::new(method.clone(), 0.05)?;
        let mut i = 0usize;
        for &t in &times {
            let t = t as usize;
            let start_updates = t.saturating_sub(WARMUP_STEPS + 1);
            if start_updates < i {
                bail!("measurement rounds must be at least {} apart", WARMUP_STEPS + reps);
            }
            while i < start_updates {
                s.absorb(y[i])?;
                i += 1;
            }
            while i + 1 < t {
                let _ = s.update(y[i]);
                i += 1;
            }
            let start = Instant::now();
            for _ in 0..reps {
                let _ = s.update(y[i]);
                i += 1;
            }
            let per_step = start.elapsed().as_nanos() as f64 / reps as f64;
            rows.push(BenchRow {
                method: method.label(),
                t: t as u64,
                ns_per_step: per_step,
            });
        }
    }
    Ok(rows)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
