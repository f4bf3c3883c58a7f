use std::fs;

use anyhow::{bail, Context, Result};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::config::Dist;

/// The generator behind every seeded stream.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `horizon` observations from `dist`, deterministic in `seed`. File sources
/// ignore the seed and return at most `horizon` values.
pub fn generate(dist: &Dist, horizon: usize, seed: u64) -> Result<Vec<f64>> {
    dist.validate()?;
    let mut rng = rng(seed);
    match dist {
        Dist::Bernoulli(p) => {
            let p = *p;
            if p >= 1.0 {
                return Ok(vec![1.0; horizon]);
            }
            // P(u < p 2^64) = p for u uniform on 64 bits.
            let cut = (p * 18_446_744_073_709_551_616.0) as u64;
            Ok((0..horizon)
                .map(|_| (rng.next_u64() < cut) as u8 as f64)
                .collect())
        }
        Dist::Beta(a, b) => {
            let ga = Gamma::new(*a, 1.0).context("gamma shape a")?;
            let gb = Gamma::new(*b, 1.0).context("gamma shape b")?;
            Ok((0..horizon)
                .map(|_| {
                    let x = ga.sample(&mut rng);
                    let y = gb.sample(&mut rng);
                    (x / (x + y)).clamp(0.0, 1.0)
                })
                .collect())
        }
        Dist::File(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let mut out = Vec::new();
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() {
                    continue;
                }
                let v: f64 = line
                    .parse()
                    .with_context(|| format!("{}:{}: not a number", path.display(), i + 1))?;
                if !(0.0..=1.0).contains(&v) {
                    bail!("{}:{}: {v} is outside [0, 1]", path.display(), i + 1);
                }
                out.push(v);
                if out.len() == horizon {
                    break;
                }
            }
            if out.len() < horizon {
                log::warn!("{} holds {} observations, fewer than {horizon}", path.display(), out.len());
            }
            Ok(out)
        }
    }
}
