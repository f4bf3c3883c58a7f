use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use confseq_core::lbup::PriorHyper;
use confseq_core::up::BetaPrior;
use confseq_core::Method;

/// Source of observations.
#[derive(Debug, Clone, PartialEq)]
pub enum Dist {
    Bernoulli(f64),
    Beta(f64, f64),
    File(PathBuf),
}

impl Dist {
    /// Mean of the generating distribution, when it is known.
    pub fn mean(&self) -> Option<f64> {
        match self {
            Dist::Bernoulli(p) => Some(*p),
            Dist::Beta(a, b) => Some(a / (a + b)),
            Dist::File(_) => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Dist::Bernoulli(p) if !(0.0..=1.0).contains(p) => {
                bail!("bernoulli parameter {p} is outside [0, 1]")
            }
            Dist::Beta(a, b) if !(*a > 0.0 && *b > 0.0 && a.is_finite() && b.is_finite()) => {
                bail!("beta parameters ({a}, {b}) must be positive and finite")
            }
            _ => Ok(()),
        }
    }
}

impl FromStr for Dist {
    type Err = anyhow::Error;

    /// `bern:P`, `beta:A,B` or `file:PATH`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .with_context(|| format!("distribution '{s}' should look like bern:0.25, beta:1,3 or file:PATH"))?;
        let d = match kind {
            "bern" | "bernoulli" => Dist::Bernoulli(rest.trim().parse().context("bernoulli parameter")?),
            "beta" => {
                let (a, b) = rest.split_once(',').context("beta needs two parameters, e.g. beta:1,3")?;
                Dist::Beta(a.trim().parse().context("beta a")?, b.trim().parse().context("beta b")?)
            }
            "file" => Dist::File(PathBuf::from(rest)),
            other => bail!("unknown distribution kind '{other}'"),
        };
        d.validate()?;
        Ok(d)
    }
}

impl std::fmt::Display for Dist {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Dist::Bernoulli(p) => write!(f, "bern:{p}"),
            Dist::Beta(a, b) => write!(f, "beta:{a},{b}"),
            Dist::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

/// Parses `hr,up,lbup1,lbup3,hybrid,cb`. `lbup` alone and `hybrid` take
/// their order from `n`; UP and CB mix with Beta(1/2, 1/2).
pub fn parse_methods(s: &str, n: usize, t_switch: u64) -> Result<Vec<Method>> {
    let mut out = Vec::new();
    for name in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
        let m = match name {
            "hr" => Method::Hr,
            "up" => Method::Up {
                prior: BetaPrior::JEFFREYS,
            },
            "up-uniform" => Method::Up {
                prior: BetaPrior::UNIFORM,
            },
            "cb" => Method::Cb {
                prior: BetaPrior::JEFFREYS,
            },
            "hybrid" => Method::hybrid(n, t_switch),
            "lbup" => Method::lbup(n),
            other => match other.strip_prefix("lbup").map(str::parse::<usize>) {
                Some(Ok(k)) if k >= 1 => Method::Lbup {
                    n: k,
                    hyper: PriorHyper::zero(k),
                },
                _ => bail!("unknown method '{other}'"),
            },
        };
        out.push(m);
    }
    if out.is_empty() {
        bail!("no methods given");
    }
    Ok(out)
}

/// Everything an experiment run depends on; outputs are a function of it.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub dist: Dist,
    pub horizon: usize,
    pub delta: f64,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub n_lbup: usize,
    pub t_switch: u64,
    pub m_grid: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.dist.validate()?;
        if self.horizon == 0 {
            bail!("horizon must be at least 1");
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            bail!("delta = {} is outside (0, 1]", self.delta);
        }
        if self.seeds.is_empty() {
            bail!("at least one seed is required");
        }
        if self.methods.is_empty() {
            bail!("no methods given");
        }
        if self.m_grid < 2 {
            bail!("m grid needs at least 2 points");
        }
        Ok(())
    }

    /// `count` consecutive seeds starting at `first`.
    pub fn seed_range(first: u64, count: usize) -> Vec<u64> {
        (0..count as u64).map(|i| first.wrapping_add(i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_distributions() {
        assert_eq!("bern:0.25".parse::<Dist>().unwrap(), Dist::Bernoulli(0.25));
        assert_eq!("beta:1,3".parse::<Dist>().unwrap(), Dist::Beta(1.0, 3.0));
        assert_eq!(
            "file:/tmp/x.txt".parse::<Dist>().unwrap(),
            Dist::File("/tmp/x.txt".into())
        );
        assert!("bern:1.5".parse::<Dist>().is_err());
        assert!("beta:0,3".parse::<Dist>().is_err());
        assert!("gauss:0".parse::<Dist>().is_err());
        assert_eq!(Dist::Beta(10.0, 30.0).mean(), Some(0.25));
    }

    #[test]
    fn parses_methods() {
        let m = parse_methods("hr,up,lbup1,lbup3,hybrid,cb", 2, 50).unwrap();
        let labels: Vec<String> = m.iter().map(Method::label).collect();
        assert_eq!(labels, ["hr", "up", "lbup1", "lbup3", "hybrid", "cb"]);
        assert_eq!(m[4], Method::hybrid(2, 50));
        assert!(parse_methods("lbup0", 2, 50).is_err());
        assert!(parse_methods("foo", 2, 50).is_err());
        assert!(parse_methods("", 2, 50).is_err());
    }
}
