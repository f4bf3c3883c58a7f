//! Quick consistency checks between independent computations, runnable from
//! the command line.

use confseq_core::game::{check_achievability, strategy_from_wealth, WealthTable};
use confseq_core::hr::{hr_log_wealth, BinaryCounts};
use confseq_core::lbup::{log_gain_lower_bound, log_z, log_z1_closed_form, ExpFamilyParams};
use confseq_core::special::QuadratureSpec;
use confseq_core::up::{up_log_wealth, BetaPrior, PartitionPoly};
use confseq_core::{ConfidenceState, Method};
use rand::Rng;

use crate::generate::rng;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

pub fn run_all() -> Vec<Check> {
    vec![
        race_equals_mixture(),
        normalizer_dual_path(),
        lower_bound_validity(),
        achievability_round_trip(),
        checkpoint_round_trip(),
    ]
}

fn race_equals_mixture() -> Check {
    let mut r = rng(1);
    let y: Vec<f64> = (0..200).map(|_| r.random_bool(0.3) as u8 as f64).collect();
    let c = BinaryCounts::new(200, y.iter().sum()).expect("valid counts");
    let p = PartitionPoly::from_outcomes(&y).expect("valid outcomes");
    let mut worst = 0.0f64;
    for i in 1..=101 {
        let m = i as f64 / 102.0;
        let a = hr_log_wealth(&c, m).unwrap_or(f64::NAN);
        let b = up_log_wealth(&p, m, &BetaPrior::JEFFREYS).unwrap_or(f64::NAN);
        worst = worst.max((a - b).abs());
    }
    check("binary race equals Beta(1/2,1/2) mixture", worst <= 1e-9, format!("max gap {worst:.3e}"))
}

fn normalizer_dual_path() -> Check {
    let spec = QuadratureSpec::default();
    let mut worst = 0.0f64;
    for rho in [0.1, 1.0, 5.0, 20.0, 60.0] {
        for eta in [0.0, 0.5, 3.0] {
            let q = ExpFamilyParams::new(vec![rho], eta)
                .and_then(|p| log_z(&p, &spec))
                .unwrap_or(f64::NAN);
            let c = log_z1_closed_form(rho, eta).unwrap_or(f64::NAN);
            worst = worst.max((q - c).abs());
        }
    }
    check("order-1 normalizer quadrature vs closed form", worst <= 1e-8, format!("max gap {worst:.3e}"))
}

fn lower_bound_validity() -> Check {
    let mut r = rng(2);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        let y: f64 = r.random();
        let m = r.random_range(0.001..0.999);
        let b = r.random_range(0.0005..0.9995);
        let n = r.random_range(1..=4);
        let lb = log_gain_lower_bound(y, m, b, n).unwrap_or(f64::NAN);
        let exact = (b * y / m + (1.0 - b) * (1.0 - y) / (1.0 - m)).ln();
        worst = worst.max(lb - exact);
    }
    check("log-gain lower bound stays below the gain", worst <= 1e-12, format!("max excess {worst:.3e}"))
}

fn achievability_round_trip() -> Check {
    let table = WealthTable::kt_mixture(6);
    let report = match check_achievability(&table) {
        Ok(r) => r,
        Err(e) => return check("mixture table is achievable", false, e.to_string()),
    };
    let strat = match strategy_from_wealth(&table) {
        Ok(s) => s,
        Err(e) => return check("mixture table is achievable", false, e.to_string()),
    };
    let mut worst = 0.0f64;
    for idx in 0..64usize {
        let seq: Vec<usize> = (0..6).map(|i| (idx >> (5 - i)) & 1).collect();
        let curve = strat.simulate(&seq).unwrap_or_default();
        for t in 1..=6 {
            let want = table.value(&seq[..t]).unwrap_or(f64::NAN).ln();
            worst = worst.max((curve.get(t - 1).copied().unwrap_or(f64::NAN) - want).abs());
        }
    }
    let passed = report.a1_ok && report.a2_ok && report.a1_max_gap <= 1e-12 && worst <= 1e-10;
    check(
        "mixture table is achievable",
        passed,
        format!("consistency gap {:.3e}, replay gap {worst:.3e}", report.a1_max_gap),
    )
}

fn checkpoint_round_trip() -> Check {
    let mut r = rng(3);
    let y: Vec<f64> = (0..60).map(|_| r.random()).collect();
    let mut whole = ConfidenceState::new(Method::hybrid(3, 20), 0.05).expect("valid method");
    let mut first = whole.clone();
    for &v in &y[..30] {
        let _ = whole.update(v);
        let _ = first.update(v);
    }
    let restored: Option<ConfidenceState> = serde_json::to_string(&first)
        .ok()
        .and_then(|s| serde_json::from_str(&s).ok());
    let Some(mut resumed) = restored else {
        return check("checkpoint replay", false, "serialization failed".into());
    };
    let mut same = true;
    for &v in &y[30..] {
        same &= whole.update(v).ok() == resumed.update(v).ok();
    }
    check("checkpoint replay", same, String::new())
}
