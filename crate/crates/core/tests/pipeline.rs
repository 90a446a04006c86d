use std::sync::Arc;

use proptest::prelude::*;
use uspas::catalog::{linear_cascade, linear_cascade_inputs, CascadeInputs};
use uspas::certcheck::{BallPair, CheckConfig};
use uspas::synth::{cascade_constants, synthesize_cascade_bound, validate_estimate};
use uspas::sysmodel::{
    compose_cascade, ensemble, integrate, linear_decay, CascadeSystem, FnSystem, InitialConditionSampler, IntegrateOptions,
    Method, NoCoupling, SamplerKind, VectorField,
};

fn rk4(step: f64) -> IntegrateOptions {
    IntegrateOptions::with_method(Method::Rk4 { step })
}

fn inputs(inner1: f64, outer1: f64, inner2: f64, outer2: f64) -> CascadeInputs {
    linear_cascade_inputs(BallPair::new(inner1, outer1).unwrap(), BallPair::new(inner2, outer2).unwrap())
}

#[test]
fn rk4_converges_at_fourth_order() {
    let sys = linear_cascade();
    let exact = |t: f64| t * (-t).exp();
    let err = |h: f64| {
        // Output spacing is horizon / 400 = 0.1, so both steps land on it.
        let traj = integrate(&sys, 0.0, &[0.0, 1.0], &[], 40.0, &rk4(h)).unwrap();
        traj.iter().map(|(t, x)| (x[0] - exact(t)).abs()).fold(0.0, f64::max)
    };
    let ratio = err(0.1) / err(0.05);
    assert!((10.0..=25.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn adaptive_matches_closed_form() {
    let traj = integrate(&linear_cascade(), 0.0, &[0.0, 1.0], &[], 5.0, &IntegrateOptions::default()).unwrap();
    assert!(traj.len() >= 401);
    for (t, x) in traj.iter() {
        assert!((x[0] - t * (-t).exp()).abs() <= 1e-7);
        assert!((x[1] - (-t).exp()).abs() <= 1e-7);
    }
}

#[test]
fn autonomous_solutions_are_time_invariant() {
    let sys = FnSystem::new(2, 0, |_t, x, _th, dx| {
        dx[0] = x[1];
        dx[1] = -x[0].sin() - 0.3 * x[1];
    });
    let a = integrate(&sys, 0.0, &[1.0, 0.0], &[], 4.0, &rk4(1e-3)).unwrap();
    let b = integrate(&sys, 7.5, &[1.0, 0.0], &[], 4.0, &rk4(1e-3)).unwrap();
    for ((_, x), (_, y)) in a.iter().zip(b.iter()) {
        for (u, v) in x.iter().zip(y) {
            assert!((u - v).abs() < 1e-12);
        }
    }
}

#[test]
fn uncoupled_cascade_matches_separate_integration() {
    let f1 = Arc::new(FnSystem::new(1, 0, |t, x, _th, dx| dx[0] = -x[0] + t.cos()));
    let f2 = Arc::new(linear_decay(vec![2.0], vec![]));
    let stacked = compose_cascade(CascadeSystem::new(f1.clone(), f2.clone(), Arc::new(NoCoupling { rows: 1, cols: 1 }))).unwrap();
    let joint = integrate(&stacked, 0.0, &[0.5, 1.5], &[], 3.0, &rk4(1e-3)).unwrap();
    let a = integrate(f1.as_ref(), 0.0, &[0.5], &[], 3.0, &rk4(1e-3)).unwrap();
    let b = integrate(f2.as_ref(), 0.0, &[1.5], &[], 3.0, &rk4(1e-3)).unwrap();
    for i in 0..joint.len() {
        assert_eq!(joint.state(i)[0], a.state(i)[0]);
        assert_eq!(joint.state(i)[1], b.state(i)[0]);
    }
}

#[test]
fn ensembles_are_deterministic() {
    let sys = linear_cascade();
    let sampler = InitialConditionSampler {
        kind: SamplerKind::UniformBall { radius: 2.0, count: 50 },
        t0_probes: vec![0.0, 1.0],
        seed: 11,
    };
    let ics = sampler.generate(sys.dim());
    assert_eq!(ics, sampler.generate(sys.dim()));
    let run = || {
        ensemble(&sys, &ics, &[], 3.0, &IntegrateOptions::default())
            .into_iter()
            .map(|r| r.unwrap().last().to_vec())
            .collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn hand_computed_linear_cascade_estimate() {
    let i = inputs(0.1, 5.0, 0.001, 5.0);
    let c = cascade_constants(&i.cert, &i.beta2, &i.coupling, &i.gamma).unwrap();
    assert!((c.delta3 - 0.293185).abs() < 1e-6, "{}", c.delta3);
    assert!((c.delta4 - 0.382843).abs() < 1e-6, "{}", c.delta4);
    assert!((c.inner - 0.382843).abs() < 1e-6);
    assert_eq!(c.outer, 5.0);
}

#[test]
fn inner_radius_shrinks_strictly_when_halved_twice() {
    let radii: Vec<f64> = [(0.1, 0.001), (0.05, 0.0005), (0.025, 0.00025)]
        .iter()
        .map(|&(d1, d2)| {
            let i = inputs(d1, 5.0, d2, 5.0);
            synthesize_cascade_bound(&i.cert, &i.beta2, &i.coupling, &i.gamma).unwrap().inner
        })
        .collect();
    assert!(radii[1] < radii[0] && radii[2] < radii[1], "{radii:?}");
    assert!((radii[1] - 0.223205).abs() < 1e-6);
    assert!((radii[2] - 0.136803).abs() < 1e-6);
}

#[test]
fn outer_radius_grows_when_doubled() {
    let outer = |big: f64| {
        let i = inputs(0.1, big, 0.001, big);
        synthesize_cascade_bound(&i.cert, &i.beta2, &i.coupling, &i.gamma).unwrap().outer
    };
    let (a, b, c) = (outer(5.0), outer(10.0), outer(20.0));
    assert!(a < b && b < c, "{a} {b} {c}");
}

#[test]
fn synthesized_bound_dominates_simulation() {
    let i = inputs(0.1, 5.0, 0.001, 5.0);
    let est = synthesize_cascade_bound(&i.cert, &i.beta2, &i.coupling, &i.gamma).unwrap();
    let mut cfg = CheckConfig::new(30.0, 3);
    cfg.sampler = Some(InitialConditionSampler {
        kind: SamplerKind::UniformBall { radius: est.outer, count: 500 },
        t0_probes: vec![0.0],
        seed: 3,
    });
    let verdict = validate_estimate(&linear_cascade(), &[], &est, &cfg).unwrap();
    assert!(verdict.holds, "{:?}", verdict.counterexample);
    assert_eq!(verdict.samples, 500);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    // The estimate is monotone over a 4 x 4 grid of radii: smaller inner
    // radii never give a larger inner estimate and larger outer radii never
    // give a smaller outer estimate.
    #[test]
    fn estimate_is_monotone_in_the_radii(scale in 0.5..2.0f64) {
        let inner = [0.2, 0.1, 0.05, 0.025].map(|d| d * scale);
        let outer = [2.0, 4.0, 8.0, 16.0].map(|d| d * scale);
        let mut table = [[(0.0, 0.0); 4]; 4];
        for (a, &d) in inner.iter().enumerate() {
            for (b, &big) in outer.iter().enumerate() {
                let i = inputs(d, big, d / 100.0, big);
                let c = cascade_constants(&i.cert, &i.beta2, &i.coupling, &i.gamma).unwrap();
                table[a][b] = (c.inner, c.outer);
            }
        }
        for a in 0..4 {
            for b in 0..4 {
                if a + 1 < 4 {
                    prop_assert!(table[a + 1][b].0 <= table[a][b].0);
                }
                if b + 1 < 4 {
                    prop_assert!(table[a][b + 1].1 >= table[a][b].1);
                }
            }
        }
    }
}
