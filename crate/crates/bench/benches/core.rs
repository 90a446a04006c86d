use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use uspas::catalog::{linear_cascade, linear_cascade_inputs};
use uspas::certcheck::BallPair;
use uspas::compfn::{ComparisonFunction, Kind};
use uspas::robot::{bundled_calibration, closed_loop_cascade, Vector};
use uspas::synth::{synthesize_cascade_bound, transform_lyapunov, Decay, LyapunovCertificate};
use uspas::sysmodel::{integrate, IntegrateOptions, Method};

fn inversion(c: &mut Criterion) {
    let grid = ComparisonFunction::grid_k(vec![(0.0, 0.0), (0.5, 0.2), (1.0, 1.1), (2.0, 1.5)], Some(2.0)).unwrap();
    let f = ComparisonFunction::sum(vec![ComparisonFunction::power(0.5, 2.0), grid.clone()])
        .compose_as(&ComparisonFunction::linear(3.0), Kind::Kinf)
        .unwrap();
    c.bench_function("invert composed sum", |b| b.iter(|| f.invert(black_box(7.3)).unwrap()));
    c.bench_function("invert grid", |b| b.iter(|| grid.invert(black_box(1.3)).unwrap()));
}

fn integration(c: &mut Criterion) {
    let sys = linear_cascade();
    c.bench_function("rk45 linear cascade 30 s", |b| {
        b.iter(|| integrate(&sys, 0.0, black_box(&[0.3, 1.0]), &[], 30.0, &IntegrateOptions::default()).unwrap())
    });
    c.bench_function("rk4 linear cascade 30 s", |b| {
        let opts = IntegrateOptions::with_method(Method::Rk4 { step: 1e-2 });
        b.iter(|| integrate(&sys, 0.0, black_box(&[0.3, 1.0]), &[], 30.0, &opts).unwrap())
    });

    let cal = bundled_calibration().unwrap();
    let plant = cal.plant();
    let gains = cal.schedule.gains(5.0);
    let robot = closed_loop_cascade(&plant).unwrap();
    let x0 = plant.direct_initial(&(plant.target + Vector::<2>::new(1.0, -0.5)), &Vector::<2>::zeros(), &gains);
    let z0 = plant.to_cascade(&x0, &gains);
    let theta = gains.cascade_theta(cal.extra_resistance);
    c.bench_function("rk45 robot cascade 10 s", |b| {
        b.iter(|| integrate(&robot, 0.0, black_box(&z0), &theta, 10.0, &IntegrateOptions::default()).unwrap())
    });
}

fn synthesis(c: &mut Criterion) {
    let inputs = linear_cascade_inputs(BallPair::new(0.1, 5.0).unwrap(), BallPair::new(0.001, 5.0).unwrap());
    c.bench_function("synthesize linear cascade", |b| {
        b.iter(|| synthesize_cascade_bound(&inputs.cert, &inputs.beta2, &inputs.coupling, &inputs.gamma).unwrap())
    });
    let cert = LyapunovCertificate {
        lower: ComparisonFunction::power(0.5, 2.0),
        upper: ComparisonFunction::power(1.0, 2.0),
        decay: Decay::Rate {
            alpha: ComparisonFunction::sum(vec![ComparisonFunction::power(1.0, 2.0), ComparisonFunction::linear(0.1)]),
        },
        grad_bound: ComparisonFunction::identity(),
        annulus: BallPair::new(0.1, 5.0).unwrap(),
        theta: vec![],
        function: None,
    };
    c.bench_function("exponential transform", |b| b.iter(|| transform_lyapunov(black_box(&cert), 1.0).unwrap()));
}

criterion_group!(benches, inversion, integration, synthesis);
criterion_main!(benches);
