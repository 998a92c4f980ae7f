use proptest::prelude::*;

use lambda_core::galerkin::{self, Basis, FunctionDescriptor, GalerkinLevel};
use lambda_core::internal::{transfer_eval, Assignment, Formula, HyperfiniteSet, Rel, Term};
use lambda_core::poly::{q_int, Poly};
use lambda_core::ratfn::RatFn;
use lambda_core::{Hyperreal, Oracle, SetDescriptor};

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(64)
}

fn periodic_set() -> impl Strategy<Value = SetDescriptor> {
    (prop::collection::vec(any::<bool>(), 0..4), prop::collection::vec(any::<bool>(), 1..8))
        .prop_map(|(pre, per)| SetDescriptor::periodic(format!("{pre:?}{per:?}"), pre, per))
}

fn ratfn() -> impl Strategy<Value = RatFn> {
    (prop::collection::vec(-6i64..=6, 1..4), prop::collection::vec(-4i64..=4, 1..3))
        .prop_filter("nonzero denominator", |(_, d)| d.iter().any(|&c| c != 0))
        .prop_map(|(n, d)| RatFn::new(Poly::from_ints(&n), Poly::from_ints(&d)))
}

fn value(o: &Oracle, r: RatFn, alternating: bool) -> Hyperreal {
    let x = Hyperreal::closed_form(o, "r", r);
    if alternating {
        let alt = Hyperreal::eventually_periodic(o, "(-1)^n", vec![], vec![q_int(1), q_int(-1)]);
        x.mul(&alt).unwrap()
    } else {
        x
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn complement_flips(s in periodic_set()) {
        let o = Oracle::with_horizon(5_000);
        prop_assert_ne!(o.is_qualified(&s).unwrap(), o.is_qualified(&s.complement()).unwrap());
    }

    #[test]
    fn qualified_sets_are_closed_under_intersection(s in periodic_set(), t in periodic_set()) {
        let o = Oracle::with_horizon(5_000);
        let (a, b) = (o.is_qualified(&s).unwrap(), o.is_qualified(&t).unwrap());
        prop_assert_eq!(o.is_qualified(&s.intersect(&t)).unwrap(), a && b);
        prop_assert_eq!(o.is_qualified(&s.union(&t)).unwrap(), a || b);
        prop_assert!(o.check_consistency().is_consistent());
    }

    #[test]
    fn finite_sets_never_qualify(members in prop::collection::vec(0u64..10_000, 0..20)) {
        let o = Oracle::with_horizon(5_000);
        prop_assert!(!o.is_qualified(&SetDescriptor::finite("F", &members)).unwrap());
    }

    #[test]
    fn ring_laws(a in ratfn(), b in ratfn(), c in ratfn(), alt in any::<bool>()) {
        let o = Oracle::with_horizon(5_000);
        let (a, b, c) = (value(&o, a, alt), value(&o, b, false), value(&o, c, false));
        let lhs = a.mul(&b.add(&c).unwrap()).unwrap();
        let rhs = a.mul(&b).unwrap().add(&a.mul(&c).unwrap()).unwrap();
        prop_assert!(lhs.eq(&rhs).unwrap());
        prop_assert!(a.sub(&a).unwrap().eq(&Hyperreal::from_int(&o, 0)).unwrap());
        prop_assert!(a.add(&b).unwrap().eq(&b.add(&a).unwrap()).unwrap());
    }

    #[test]
    fn order_is_total_and_compatible(a in ratfn(), b in ratfn(), c in ratfn(), alt in any::<bool>()) {
        let o = Oracle::with_horizon(5_000);
        let (a, b, c) = (value(&o, a, alt), value(&o, b, false), value(&o, c, false));
        let answers = [a.lt(&b).unwrap(), a.eq(&b).unwrap(), a.gt(&b).unwrap()];
        prop_assert_eq!(answers.iter().filter(|&&x| x).count(), 1);
        if answers[0] {
            prop_assert!(a.add(&c).unwrap().lt(&b.add(&c).unwrap()).unwrap());
        }
    }

    #[test]
    fn nonzero_values_are_invertible(r in ratfn(), alt in any::<bool>()) {
        let o = Oracle::with_horizon(5_000);
        let x = value(&o, r, alt);
        let one = Hyperreal::from_int(&o, 1);
        if !x.eq(&Hyperreal::from_int(&o, 0)).unwrap() {
            prop_assert!(x.mul(&x.inv().unwrap()).unwrap().eq(&one).unwrap());
        }
    }

    #[test]
    fn transfer_respects_negation(k in -20i64..20, c in -3i64..=3, rel in 0usize..6) {
        let rels = [Rel::Eq, Rel::Ne, Rel::Lt, Rel::Le, Rel::Gt, Rel::Ge];
        let o = Oracle::with_horizon(5_000);
        let mut asg = Assignment::new();
        asg.insert("w".into(), Hyperreal::omega(&o));
        let lhs = Term::int(c).mul(Term::var("x")).add(Term::int(k));
        let p = Formula::exists("x", HyperfiniteSet::upto_n(), Formula::atom(rels[rel], lhs, Term::var("w")));
        let v = transfer_eval(&o, &p, &asg).unwrap();
        prop_assert_eq!(transfer_eval(&o, &p.not(), &asg).unwrap(), !v);
    }

    #[test]
    fn projection_fixes_the_space(coeffs in prop::collection::vec(-2.0f64..2.0, 7), sine in any::<bool>()) {
        let basis = if sine { Basis::Sine } else { Basis::Hat };
        let level = GalerkinLevel::new(8, basis).unwrap();
        let u = level.from_coeffs(coeffs).unwrap();
        let pu = galerkin::project(&FunctionDescriptor::Ultrafunction(u.clone()), &level).unwrap();
        for (a, b) in pu.coeffs().iter().zip(u.coeffs()) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }
}
