use proptest::prelude::*;
use uspas::compfn::{fit_k_envelope, fit_l_envelope, kl_from_us_ua, ComparisonFunction, Kind, KlBound};

fn kinf_instance() -> impl Strategy<Value = ComparisonFunction> {
    let linear = (1e-2..1e2f64).prop_map(ComparisonFunction::linear);
    let power = (1e-2..1e2f64, 0.3..4.0f64).prop_map(|(a, p)| ComparisonFunction::power(a, p));
    let grid = prop::collection::vec(0.01..2.0f64, 2..8).prop_map(|steps| {
        let mut pts = vec![(0.0, 0.0)];
        let (mut s, mut v) = (0.0, 0.0);
        for (i, d) in steps.iter().enumerate() {
            s += 0.5 + i as f64 * 0.1;
            v += d;
            pts.push((s, v));
        }
        ComparisonFunction::grid_k(pts, Some(1.0)).unwrap()
    });
    let leaf = prop_oneof![linear, power, grid];
    leaf.prop_recursive(2, 6, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 1..3).prop_map(ComparisonFunction::sum),
            (inner.clone(), 0.1..10.0f64).prop_map(|(f, c)| f.scaled(c)),
            (inner.clone(), inner).prop_map(|(a, b)| a.compose_as(&b, Kind::Kinf).unwrap()),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn invert_after_eval_round_trips(f in kinf_instance(), s in 1e-3..50.0f64) {
        let y = f.eval(s).unwrap();
        let back = f.invert(y).unwrap();
        prop_assert!((back - s).abs() <= 1e-8 * s.max(1e-12), "s = {s}, back = {back}");
    }

    #[test]
    fn k_envelope_dominates_and_increases(samples in prop::collection::vec((1e-3..10.0f64, 0.0..5.0f64), 1..40)) {
        let env = fit_k_envelope(&samples).unwrap();
        for &(s, v) in &samples {
            prop_assert!(env.eval(s).unwrap() >= v);
        }
        let mut prev = env.eval(0.0).unwrap();
        prop_assert_eq!(prev, 0.0);
        for i in 1..200 {
            let cur = env.eval(0.06 * i as f64).unwrap();
            prop_assert!(cur > prev);
            prev = cur;
        }
    }

    #[test]
    fn l_envelope_dominates_and_decreases(samples in prop::collection::vec((0.0..20.0f64, 0.0..5.0f64), 1..40)) {
        let env = fit_l_envelope(&samples).unwrap();
        for &(t, v) in &samples {
            prop_assert!(env.eval(t).unwrap() >= v);
        }
        let mut prev = env.eval(0.0).unwrap();
        for i in 1..200 {
            let cur = env.eval(0.15 * i as f64).unwrap();
            prop_assert!(cur <= prev);
            prev = cur;
        }
    }

    #[test]
    fn kl_constructions_are_monotone(a in 0.1..5.0f64, rate in 0.01..3.0f64, b in 0.1..5.0f64, p in 0.5..3.0f64) {
        let prod = KlBound::exponential(a, rate);
        let other = KlBound::Product { eta: ComparisonFunction::power(b, p), rate, shift: 1.0 };
        let max = KlBound::Max { terms: vec![prod.clone(), other.clone()] };
        let sum = KlBound::Sum { terms: vec![prod, other] };
        let env = kl_from_us_ua(ComparisonFunction::power(b, p), ComparisonFunction::exp_decay(a, rate, 0.0));
        for beta in [max, sum, env] {
            prop_assert!(beta.check_monotone(5.0, 20.0, 25).is_ok());
        }
    }
}
