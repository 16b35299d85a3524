use proptest::prelude::*;
use ringsched::rartime::UtilitySpec;

fn concave() -> impl Strategy<Value = UtilitySpec> {
    prop_oneof![
        (0.1f64..20.0).prop_map(|c| UtilitySpec::Sqrt { c }),
        Just(UtilitySpec::Log),
        (0.0f64..0.01, -50.0f64..0.0).prop_map(|(c2, c1)| UtilitySpec::NegQuadCost { c2, c1 }),
    ]
}

proptest! {
    #[test]
    fn concave_utilities_have_diminishing_steps(u in concave(), v in 0.0f64..1e3, h in 0.01f64..50.0) {
        let lim = u.nondecreasing_limit();
        prop_assume!(v + 2.0 * h <= lim);
        let (a, b, c) = (u.value(v), u.value(v + h), u.value(v + 2.0 * h));
        prop_assert!(b >= a);
        prop_assert!(b - a >= c - b - 1e-9 * c.abs().max(1.0));
        prop_assert_eq!(u.value(0.0), 0.0);
    }

    #[test]
    fn sigmoid_is_bounded_and_nondecreasing(p in 0.1f64..10.0, s in 0.01f64..0.99, m in 0.0f64..500.0, v in 0.0f64..1e3, h in 0.0f64..100.0) {
        let u = UtilitySpec::Sigmoid { priority: p, sensitivity: s, midpoint: m };
        prop_assert!(!u.is_concave());
        prop_assert!(u.value(v + h) >= u.value(v));
        prop_assert!(u.value(v) <= p);
        prop_assert!((u.value(m) - p / 2.0).abs() < 1e-12);
    }
}

#[test]
fn quadratic_cost_rises_only_to_its_vertex() {
    let u = UtilitySpec::NegQuadCost { c2: 1.0, c1: -4.0 };
    assert_eq!(u.nondecreasing_limit(), 2.0);
    assert_eq!(u.value(2.0), 4.0);
    assert!(u.value(3.0) < u.value(2.0));
}
