use confseq_core::game::{best_hindsight_log_wealth, constant_bettor_log_wealth};
use confseq_core::hr::{hr_interval, hr_log_wealth, log_phi_tilde, pinsker_outer, BinaryCounts};
use confseq_core::lbup::{
    barred_params, exp_family_params, f_ell, lbup_interval, lbup_log_wealth, log_gain_lower_bound,
    MomentAccumulator, PriorHyper,
};
use confseq_core::special::{log_add_exp, log_gamma, log_sum_exp, QuadratureSpec};
use confseq_core::up::{poly_identities, up_interval, up_log_wealth, BetaPrior, PartitionPoly};
use confseq_core::{confseq::cb_interval, ConfidenceState, Method};
use proptest::prelude::*;

fn stream(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..=1.0f64, 1..max_len)
}

fn binary_stream(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop::bool::ANY.prop_map(|b| b as u8 as f64), 1..max_len)
}

fn exact_log_gain(y: f64, m: f64, b: f64) -> f64 {
    (b * y / m + (1.0 - b) * (1.0 - y) / (1.0 - m)).ln()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn log_gamma_recurrence(x in 0.01..150.0f64) {
        let lhs = log_gamma(x + 1.0).unwrap();
        let rhs = log_gamma(x).unwrap() + x.ln();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn log_sum_exp_is_symmetric_and_bounded(xs in prop::collection::vec(-700.0..700.0f64, 1..20)) {
        let v = log_sum_exp(&xs);
        let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(v >= max && v <= max + (xs.len() as f64).ln() + 1e-12);
        let mut rev = xs.clone();
        rev.reverse();
        prop_assert!((log_sum_exp(&rev) - v).abs() <= 1e-12 * v.abs().max(1.0));
        prop_assert_eq!(log_add_exp(xs[0], f64::NEG_INFINITY), xs[0]);
    }

    #[test]
    fn accumulator_sums_are_ordered(y in stream(300), n in 1usize..5) {
        let mut a = MomentAccumulator::new(n).unwrap();
        for &v in &y {
            a.push(v).unwrap();
        }
        let s = a.moments();
        prop_assert_eq!(s[0], y.len() as f64);
        for j in 1..s.len() {
            prop_assert!(s[j] >= 0.0 && s[j] <= s[j - 1]);
        }
        prop_assert_eq!(a.state_len(), 2 * n + 2);
        let refl = a.reflected_moments();
        let direct: f64 = y.iter().map(|v| (1.0 - v).powi(2)).sum();
        prop_assert!((refl[2] - direct).abs() <= 1e-9 * y.len() as f64);
    }

    #[test]
    fn partition_poly_identities(y in stream(200)) {
        let p = PartitionPoly::from_outcomes(&y).unwrap();
        let (total, first) = poly_identities(&p);
        prop_assert!((total - 1.0).abs() < 1e-12);
        let sum: f64 = y.iter().sum();
        prop_assert!((first - sum).abs() < 1e-9 * sum.max(1.0));
    }

    #[test]
    fn lower_bound_below_exact(y in 0.0..=1.0f64, m in 0.001..0.999f64, b in 0.0005..0.9995f64, n in 1usize..5) {
        let lb = log_gain_lower_bound(y, m, b, n).unwrap();
        prop_assert!(lb <= exact_log_gain(y, m, b) + 1e-12);
    }

    #[test]
    fn f_ell_is_increasing(x in -0.99..30.0f64, dx in 1e-3..1.0f64, l in 1u32..7) {
        prop_assert!(f_ell(x, l).unwrap() < f_ell(x + dx, l).unwrap());
    }

    #[test]
    fn exp_family_eta_is_nonnegative(y in stream(200), m in 0.01..0.99f64, n in 1usize..4) {
        let mut a = MomentAccumulator::new(n).unwrap();
        for &v in &y {
            a.push(v).unwrap();
        }
        prop_assert!(exp_family_params(&a, m).unwrap().eta() >= 0.0);
        prop_assert!(barred_params(&a, m).unwrap().eta() >= 0.0);
    }

    #[test]
    fn hr_mixture_below_hindsight(t in 1u64..500, frac in 0.0..=1.0f64, m in 0.01..0.99f64) {
        let s = (t as f64 * frac).round();
        let mix = log_phi_tilde(s, t, 1.0 / m, 1.0 / (1.0 - m)).unwrap();
        let best = best_hindsight_log_wealth(s, t, 1.0 / m, 1.0 / (1.0 - m)).unwrap();
        prop_assert!(mix <= best + 1e-10);
    }

    #[test]
    fn hr_equals_up_on_binary(y in binary_stream(200), m in 0.01..0.99f64) {
        let s: f64 = y.iter().sum();
        let c = BinaryCounts::new(y.len() as u64, s).unwrap();
        let p = PartitionPoly::from_outcomes(&y).unwrap();
        let a = hr_log_wealth(&c, m).unwrap();
        let b = up_log_wealth(&p, m, &BetaPrior::JEFFREYS).unwrap();
        prop_assert!((a - b).abs() <= 1e-9, "{} vs {}", a, b);
    }

    #[test]
    fn mixture_wealth_nonpositive_at_empirical_mean(y in stream(120)) {
        let mu = y.iter().sum::<f64>() / y.len() as f64;
        prop_assume!(mu > 1e-6 && mu < 1.0 - 1e-6);
        let p = PartitionPoly::from_outcomes(&y).unwrap();
        prop_assert!(up_log_wealth(&p, mu, &BetaPrior::UNIFORM).unwrap() <= 1e-12);
        prop_assert!(up_log_wealth(&p, mu, &BetaPrior::JEFFREYS).unwrap() <= 1e-12);
        // every constant bettor loses at the empirical mean
        prop_assert!(constant_bettor_log_wealth(&y, mu, 0.8).unwrap() <= 1e-12);
    }

    #[test]
    fn pinsker_contains_hr(t in 1u64..5000, frac in 0.0..=1.0f64, delta in 0.001..0.5f64) {
        let c = BinaryCounts::new(t, (t as f64 * frac).round()).unwrap();
        let inner = hr_interval(&c, delta, 1e-10).unwrap();
        let outer = pinsker_outer(&c, delta).unwrap();
        prop_assert!(outer.low <= inner.low + 1e-9 && inner.high <= outer.high + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn running_intersection_shrinks_and_keeps_mean(y in stream(60), which in 0usize..5) {
        let method = [
            Method::Hr,
            Method::Up { prior: BetaPrior::JEFFREYS },
            Method::lbup(2),
            Method::hybrid(2, 15),
            Method::Cb { prior: BetaPrior::JEFFREYS },
        ][which].clone();
        let mut s = ConfidenceState::new(method, 0.05).unwrap();
        let mut prev = s.interval().unwrap();
        for &v in &y {
            let iv = match s.update(v) {
                Ok(iv) => iv,
                Err(_) => break,
            };
            prop_assert!(prev.contains_interval(&iv));
            prev = iv;
        }
    }

    #[test]
    fn single_round_sets_contain_mean_and_nest(y in stream(80), n in 1usize..4) {
        let mu = y.iter().sum::<f64>() / y.len() as f64;
        let s: f64 = y.iter().sum();
        let p = PartitionPoly::from_outcomes(&y).unwrap();
        let mut a = MomentAccumulator::new(n).unwrap();
        for &v in &y {
            a.push(v).unwrap();
        }
        let spec = QuadratureSpec::default();
        let hr = hr_interval(&BinaryCounts::new(y.len() as u64, s.min(y.len() as f64)).unwrap(), 0.05, 1e-9).unwrap();
        let up = up_interval(&p, 0.05, &BetaPrior::UNIFORM, 1e-9).unwrap();
        let lb = lbup_interval(&a, mu, 0.05, &PriorHyper::zero(n), &spec).unwrap();
        let cb = cb_interval(&y, 0.05, &BetaPrior::JEFFREYS).unwrap();
        for iv in [hr, up, lb, cb] {
            prop_assert!(iv.contains(mu), "{:?} misses {}", iv, mu);
        }
        prop_assert!(lb.low <= up.low + 1e-8 && up.high <= lb.high + 1e-8, "{:?} vs {:?}", lb, up);
        for i in 1..20 {
            let m = i as f64 / 20.0;
            let l = lbup_log_wealth(&a, m, &PriorHyper::zero(n), &spec).unwrap();
            let u = up_log_wealth(&p, m, &BetaPrior::UNIFORM).unwrap();
            prop_assert!(l <= u + 1e-9);
        }
    }
}
