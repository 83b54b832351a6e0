//! Cross-module solver contracts on randomized valid systems: the graded
//! solver annihilates the kept-set residual exactly, enlarging the spec
//! never changes already-solved coefficients, and the fixed-point route
//! agrees with the graded one when A = 0.

use cm_core::cmsolve::{apply_h, iterate_fixed_point, solve_graded, Method};
use cm_core::order::{OrderMode, OrderSpec};
use cm_core::sysmodel::parse_system;
use cm_core::testutil::{random_valid_system, TestRng};
use cm_core::verify::{check_residual_order, check_theorem4_consistency};
use num_traits::Zero;

const PROTOTYPE: &str = "[centre]\nx' = eps*x - x*y\n[stable]\ny' = -y + x^2\n[params]\neps\n";

#[test]
fn graded_solver_annihilates_kept_residual() {
    let mut rng = TestRng::new(42);
    for round in 0..40 {
        let sys = random_valid_system(&mut rng);
        let q = 2 + (rng.below(3) as u32);
        let p = 1 + (rng.below(3) as u32);
        let shape = sys.shape();
        let spec = OrderSpec::unit(q, p, shape.centre, shape.params).unwrap();
        let approx = solve_graded(&sys, &spec).unwrap();
        let residual = apply_h(&approx.phi, &sys).unwrap();
        for component in &residual {
            assert!(
                spec.truncate(component).unwrap().is_zero(),
                "round {round}: kept residual nonzero for\n{}",
                sys.to_text()
            );
        }
        // the module-crossing contract: the certificate reaches the same verdict
        let cert = check_residual_order(&sys, &approx.phi, &OrderMode::Flexible(spec.clone())).unwrap();
        assert!(cert.pass, "round {round}");
        // manifold invariant: degree >= 2, kept set only
        for component in &approx.phi {
            for (mono, _) in component.terms() {
                assert!(mono.total_degree() >= 2);
                assert!(spec.in_kept_set(mono).unwrap());
            }
        }
    }
}

#[test]
fn enlarging_the_spec_is_triangular() {
    let mut rng = TestRng::new(1234);
    for round in 0..25 {
        let sys = random_valid_system(&mut rng);
        let q = 2 + (rng.below(3) as u32);
        let p = 1 + (rng.below(3) as u32);
        let shape = sys.shape();
        let spec = OrderSpec::unit(q, p, shape.centre, shape.params).unwrap();
        let small = solve_graded(&sys, &spec).unwrap();
        let large = solve_graded(&sys, &spec.boosted(2, 2)).unwrap();
        for (a, b) in small.phi.iter().zip(&large.phi) {
            assert_eq!(&spec.truncate(b).unwrap(), a, "round {round}");
        }
        let probe = check_theorem4_consistency(&sys, &spec, (2, 2)).unwrap();
        assert!(probe.pass, "round {round}");
    }
}

#[test]
fn probe_monotone_under_smaller_boost() {
    let mut rng = TestRng::new(99);
    for _ in 0..10 {
        let sys = random_valid_system(&mut rng);
        let shape = sys.shape();
        let spec = OrderSpec::unit(3, 2, shape.centre, shape.params).unwrap();
        if check_theorem4_consistency(&sys, &spec, (2, 2)).unwrap().pass {
            for boost in [(1, 1), (2, 0), (0, 2), (1, 0), (0, 0)] {
                assert!(check_theorem4_consistency(&sys, &spec, boost).unwrap().pass);
            }
        }
    }
}

#[test]
fn fixed_point_matches_graded_for_zero_a() {
    let mut rng = TestRng::new(7);
    let mut covered = 0;
    for _ in 0..40 {
        let sys = random_valid_system(&mut rng);
        if sys.a.iter().any(|row| row.iter().any(|c| !c.is_zero())) {
            continue;
        }
        covered += 1;
        let shape = sys.shape();
        let spec = OrderSpec::unit(4, 3, shape.centre, shape.params).unwrap();
        let graded = solve_graded(&sys, &spec).unwrap();
        let fixed = iterate_fixed_point(&sys, &spec, 64).unwrap();
        assert_eq!(fixed.phi, graded.phi, "system\n{}", sys.to_text());
        assert!(matches!(fixed.method, Method::FixedPoint { .. }));
    }
    assert!(covered >= 10, "generator produced too few A = 0 systems: {covered}");
}

#[test]
fn prototype_manifold_has_even_x_degrees() {
    // the prototype is symmetric under x -> -x, y -> y; the manifold
    // inherits the symmetry
    let sys = parse_system(PROTOTYPE).unwrap();
    let spec = OrderSpec::unit(8, 4, 1, 1).unwrap();
    let approx = solve_graded(&sys, &spec).unwrap();
    assert!(!approx.phi[0].is_zero());
    for (mono, _) in approx.phi[0].terms() {
        assert_eq!(mono.xdegree() % 2, 0, "odd x-degree term {mono:?}");
    }
}
