use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use cm_core::cmsolve::{reduce_model, solve_graded, ModelOrder};
use cm_core::order::OrderSpec;
use cm_core::sysmodel::parse_system;
use cm_core::testutil::{random_valid_system, TestRng};
use cm_core::verify::{compare_trajectories, NumericConfig, StableStart};

const PROTOTYPE: &str = "[centre]\nx' = eps*x - x*y\n[stable]\ny' = -y + x^2\n[params]\neps\n";

fn bench_solve_graded(c: &mut Criterion) {
    let sys = parse_system(PROTOTYPE).unwrap();
    let mut group = c.benchmark_group("solve_graded");
    for (q, p) in [(6, 3), (8, 5), (12, 8)] {
        let spec = OrderSpec::unit(q, p, 1, 1).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(format!("q{q}_p{p}")), &spec, |b, spec| {
            b.iter(|| solve_graded(&sys, spec).unwrap())
        });
    }
    group.finish();
}

fn bench_random_systems(c: &mut Criterion) {
    let mut rng = TestRng::new(5);
    let systems: Vec<_> = (0..20).map(|_| random_valid_system(&mut rng)).collect();
    c.bench_function("solve_graded/20_random_systems_q4_p3", |b| {
        b.iter(|| {
            for sys in &systems {
                let shape = sys.shape();
                let spec = OrderSpec::unit(4, 3, shape.centre, shape.params).unwrap();
                solve_graded(sys, &spec).unwrap();
            }
        })
    });
}

fn bench_trajectory_comparison(c: &mut Criterion) {
    let sys = parse_system(PROTOTYPE).unwrap();
    let spec = OrderSpec::unit(6, 3, 1, 1).unwrap();
    let approx = solve_graded(&sys, &spec).unwrap();
    let model = reduce_model(&sys, &approx, ModelOrder::QPlusOne).unwrap();
    let cfg = NumericConfig {
        x0: vec![0.05],
        y0: StableStart::Explicit(vec![0.3]),
        dt: 1e-3,
        t_end: 20.0,
        t_transient: 10.0,
    };
    c.bench_function("compare_trajectories/prototype_20s", |b| {
        b.iter(|| compare_trajectories(&sys, &approx, &model, &[vec![0.05]], &cfg).unwrap())
    });
}

criterion_group!(benches, bench_solve_graded, bench_random_systems, bench_trajectory_comparison);
criterion_main!(benches);
