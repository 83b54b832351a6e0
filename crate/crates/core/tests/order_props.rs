//! Properties of the order calculus: the error set absorbs products,
//! truncation is an idempotent linear map compatible with multiplication,
//! the flexible and coupled classes nest as expected, and truncation
//! commutes with differentiation on kept output.

use cm_core::order::{in_coupled_error_set, OrderSpec};
use cm_core::poly::{Layout, Monomial, Polynomial, Rational, Var};
use num_bigint::BigInt;
use proptest::prelude::*;

const LAYOUT: Layout = Layout { centre: 2, stable: 0, params: 2 };

fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

fn arb_mono() -> impl Strategy<Value = Monomial> {
    (0u32..6, 0u32..6, 0u32..5, 0u32..5).prop_map(|(x1, x2, e1, e2)| Monomial {
        xexp: vec![x1, x2],
        yexp: vec![],
        eexp: vec![e1, e2],
    })
}

fn arb_poly() -> impl Strategy<Value = Polynomial> {
    prop::collection::vec((arb_mono(), -4i64..5), 0..6).prop_map(|terms| {
        Polynomial::from_terms(
            LAYOUT,
            terms.into_iter().map(|(m, c)| (m, Rational::from_integer(BigInt::from(c)))),
        )
    })
}

fn arb_spec() -> impl Strategy<Value = OrderSpec> {
    (2u32..6, 1u32..5, prop::sample::select(vec![(1, 1), (1, 2), (2, 1), (3, 2)]))
        .prop_map(|(q, p, (wn, wd))| {
            OrderSpec::weighted(
                q,
                p,
                vec![Rational::from_integer(1.into()), rat(wn, wd)],
                vec![rat(wn, wd), Rational::from_integer(1.into())],
            )
            .unwrap()
        })
}

proptest! {
    #[test]
    fn error_set_absorbs_products(m1 in arb_mono(), m2 in arb_mono(), spec in arb_spec()) {
        if spec.in_error_set(&m1).unwrap() {
            prop_assert!(spec.in_error_set(&m1.product(&m2)).unwrap());
        }
    }

    #[test]
    fn truncate_idempotent_and_linear(a in arb_poly(), b in arb_poly(), spec in arb_spec()) {
        let ta = spec.truncate(&a).unwrap();
        prop_assert_eq!(spec.truncate(&ta).unwrap(), ta.clone());
        prop_assert_eq!(
            spec.truncate(&a.add(&b).unwrap()).unwrap(),
            ta.add(&spec.truncate(&b).unwrap()).unwrap()
        );
    }

    #[test]
    fn truncate_compatible_with_products(a in arb_poly(), b in arb_poly(), spec in arb_spec()) {
        let direct = spec.truncate(&a.mul(&b).unwrap()).unwrap();
        let pre = spec.truncate(&spec.truncate(&a).unwrap().mul(&spec.truncate(&b).unwrap()).unwrap()).unwrap();
        prop_assert_eq!(direct, pre);
    }

    #[test]
    fn flexible_nests_in_coupled_at_equal_orders(m in arb_mono(), r in 2u32..6) {
        // unit weights: flexible (q = p = r) error set is contained in the
        // coupled class with exponent r, which is exactly total degree >= r
        let spec = OrderSpec::unit(r, r, 2, 2).unwrap();
        let coupled = in_coupled_error_set(&m, r, r).unwrap();
        prop_assert_eq!(coupled, m.total_degree() >= r);
        if spec.in_error_set(&m).unwrap() {
            prop_assert!(coupled);
        }
    }

    #[test]
    fn differentiation_preserves_the_kept_set(p in arb_poly(), spec in arb_spec()) {
        // degrees only decrease under differentiation, so the kept set maps
        // into itself and truncation is a no-op on derivatives of kept input
        let kept = spec.truncate(&p).unwrap();
        for var in [Var::Centre(0), Var::Centre(1), Var::Param(0), Var::Param(1)] {
            let derived = kept.differentiate(var).unwrap();
            prop_assert_eq!(spec.truncate(&derived).unwrap(), derived);
        }
    }
}
