use cpboot_core::opalg::{Algebra, Factor, OperatorPoly};
use cpboot_core::potentials::PotentialSpec;
use cpboot_core::rational::{cq, creal, q, qf, CQ};
use proptest::prelude::*;

fn factor() -> impl Strategy<Value = Factor> {
    prop_oneof![
        3 => (-4i32..=4).prop_map(Factor::R),
        1 => (0i32..=3).prop_map(Factor::W),
        1 => (0u8..=2).prop_map(Factor::V),
        3 => Just(Factor::P),
        1 => (-3i64..=3, -3i64..=3, 1i64..=3).prop_map(|(a, b, d)| Factor::Scalar(cq(qf(a, d), qf(b, d)))),
    ]
}

fn word(max: usize) -> impl Strategy<Value = Vec<Factor>> {
    prop::collection::vec(factor(), 0..=max)
}

fn poly(max: usize) -> impl Strategy<Value = OperatorPoly> {
    prop::collection::vec(word(max), 1..=2).prop_map(|ws| {
        let alg = Algebra::symbolic();
        ws.iter().fold(OperatorPoly::zero(), |acc, w| acc.add(&alg.canonicalize(w)))
    })
}

fn minus_i() -> CQ {
    cq(q(0), q(-1))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn canonical_form_does_not_depend_on_grouping(a in word(3), b in word(3), c in word(2)) {
        let alg = Algebra::symbolic();
        let whole: Vec<Factor> = a.iter().chain(&b).chain(&c).cloned().collect();
        let (pa, pb, pc) = (alg.canonicalize(&a), alg.canonicalize(&b), alg.canonicalize(&c));
        let left = alg.multiply(&alg.multiply(&pa, &pb), &pc);
        let right = alg.multiply(&pa, &alg.multiply(&pb, &pc));
        prop_assert_eq!(&left, &right);
        prop_assert_eq!(&alg.canonicalize(&whole), &left);
    }

    #[test]
    fn swapping_p_past_a_power_of_r_costs_its_derivative(a in word(3), b in word(3), s in -4i32..=4) {
        // p r^(s/2) = r^(s/2) p - i (s/2) r^(s/2 - 1)
        let alg = Algebra::symbolic();
        let with = |mid: &[Factor]| {
            let w: Vec<Factor> = a.iter().chain(mid).chain(&b).cloned().collect();
            alg.canonicalize(&w)
        };
        let lhs = with(&[Factor::P, Factor::R(s)]);
        let shift = with(&[Factor::R(s - 2)]).scale(&(minus_i() * creal(qf(s as i64, 2))));
        prop_assert_eq!(lhs, with(&[Factor::R(s), Factor::P]).add(&shift));
    }

    #[test]
    fn swapping_p_past_a_derivative_of_v(a in word(3), b in word(3), k in 1u8..=3) {
        let alg = Algebra::symbolic();
        let with = |mid: &[Factor]| {
            let w: Vec<Factor> = a.iter().chain(mid).chain(&b).cloned().collect();
            alg.canonicalize(&w)
        };
        let lhs = with(&[Factor::P, Factor::V(k)]);
        let shift = with(&[Factor::V(k + 1)]).scale(&minus_i());
        prop_assert_eq!(lhs, with(&[Factor::V(k), Factor::P]).add(&shift));
    }

    #[test]
    fn canonical_terms_are_nonzero_and_distinct(w in word(5)) {
        let p = Algebra::symbolic().canonicalize(&w);
        let monos: Vec<_> = p.terms().map(|(m, _)| m.clone()).collect();
        let mut sorted = monos.clone();
        sorted.dedup();
        prop_assert_eq!(monos.len(), sorted.len());
        prop_assert!(p.terms().all(|(_, c)| c.re != q(0) || c.im != q(0)));
    }

    #[test]
    fn adjoint_reverses_products(a in poly(3), b in poly(3)) {
        let alg = Algebra::symbolic();
        let ab = alg.multiply(&a, &b);
        prop_assert_eq!(alg.adjoint(&ab), alg.multiply(&alg.adjoint(&b), &alg.adjoint(&a)));
        prop_assert_eq!(alg.adjoint(&alg.adjoint(&a)), a);
    }

    #[test]
    fn jacobi_identity_holds(a in poly(2), b in poly(2), c in poly(2)) {
        let alg = Algebra::symbolic();
        let t1 = alg.commutator(&a, &alg.commutator(&b, &c));
        let t2 = alg.commutator(&b, &alg.commutator(&c, &a));
        let t3 = alg.commutator(&c, &alg.commutator(&a, &b));
        prop_assert!(t1.add(&t2).add(&t3).is_zero());
    }

    #[test]
    fn derivative_reduction_commutes_with_products(a in word(3), b in word(3), which in 0usize..3) {
        let spec = match which {
            0 => PotentialSpec::yukawa(1.0, 3.0).unwrap(),
            1 => PotentialSpec::gaussian(12.0, 1.0).unwrap(),
            _ => PotentialSpec::cornell(0.25, 1.0).unwrap(),
        };
        // half-integer powers of -V have no algebraic form for Cornell
        let keep = |w: &Vec<Factor>| w.iter().all(|f| !matches!(f, Factor::W(m) if m % 2 != 0));
        prop_assume!(which != 2 || (keep(&a) && keep(&b)));
        let sym = Algebra::symbolic();
        let (pa, pb) = (sym.canonicalize(&a), sym.canonicalize(&b));
        let direct = spec.reduce_derivatives(&sym.multiply(&pa, &pb)).unwrap();
        let reduced = spec.algebra().multiply(
            &spec.reduce_derivatives(&pa).unwrap(),
            &spec.reduce_derivatives(&pb).unwrap(),
        );
        prop_assert_eq!(direct, reduced);
    }

    #[test]
    fn derivative_reduction_is_idempotent(a in word(4), which in 0usize..2) {
        let spec = if which == 0 { PotentialSpec::yukawa(1.0, 3.0).unwrap() } else { PotentialSpec::gaussian(12.0, 1.0).unwrap() };
        let once = spec.reduce_derivatives(&Algebra::symbolic().canonicalize(&a)).unwrap();
        prop_assert_eq!(spec.reduce_derivatives(&once).unwrap(), once);
    }
}

#[test]
fn derivative_factors_match_finite_differences() {
    let h = 1e-3;
    for spec in [PotentialSpec::yukawa(1.0, 3.0).unwrap(), PotentialSpec::gaussian(12.0, 1.0).unwrap()] {
        let v = |r: f64| spec.value(r);
        for r in [0.5, 1.0, 2.0] {
            let d1 = (v(r - 2.0 * h) - 8.0 * v(r - h) + 8.0 * v(r + h) - v(r + 2.0 * h)) / (12.0 * h);
            let d2 = (-v(r - 2.0 * h) + 16.0 * v(r - h) - 30.0 * v(r) + 16.0 * v(r + h) - v(r + 2.0 * h)) / (12.0 * h * h);
            for (k, fd) in [(1u8, d1), (2, d2)] {
                let exact = spec.derivative_factor(k).unwrap().eval(r) * v(r);
                assert!((exact - fd).abs() <= 1e-8 * exact.abs().max(v(r).abs()), "{} k={k} r={r}: {exact} vs {fd}", spec.describe());
            }
        }
    }
}

#[test]
fn canonical_commutator_of_r_and_p() {
    let alg = Algebra::symbolic();
    let c = alg.commutator(&OperatorPoly::r(2), &OperatorPoly::p(1));
    assert_eq!(c, OperatorPoly::scalar(cq(q(0), q(1))));
}
