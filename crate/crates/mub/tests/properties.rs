//! Property-based invariants for the algebraic core: monomial orders,
//! coefficient field arithmetic, polynomial ring laws, reduction, basis
//! completeness, root isolation, interval soundness, and serialization
//! roundtrips.

use mub::groebner::{buchberger, reduce, s_polynomial};
use mub::polysys::{
    CoeffMode, Monomial, MonomialOrder, MultiPoly, OrderKind, PolynomialSystem, QSqrt3,
};
use mub::rat::{pow10_neg, rat_from_decimal, rat_to_decimal, round_sig, RInt, Rat};
use mub::realroots::{refine, sturm_isolate};
use proptest::prelude::*;
use std::cmp::Ordering;

const NVARS: usize = 3;

fn mono(exps: &[u16]) -> Monomial {
    let mut a = [0u16; 12];
    a[..exps.len()].copy_from_slice(exps);
    Monomial(a)
}

fn arb_mono() -> impl Strategy<Value = Monomial> {
    proptest::collection::vec(0u16..5, NVARS).prop_map(|v| mono(&v))
}

fn arb_order() -> impl Strategy<Value = MonomialOrder> {
    let kind = prop_oneof![Just(OrderKind::Lex), Just(OrderKind::GrevLex)];
    let perm = Just((0..NVARS).collect::<Vec<_>>()).prop_shuffle();
    (kind, perm).prop_map(|(kind, perm)| MonomialOrder { kind, perm })
}

fn arb_q() -> impl Strategy<Value = QSqrt3> {
    (-6i64..=6, -6i64..=6, 1i64..=4)
        .prop_map(|(a, b, d)| QSqrt3::new(Rat::from((a, d)), Rat::from((b, d))))
}

fn arb_poly() -> impl Strategy<Value = MultiPoly> {
    proptest::collection::vec((arb_mono(), arb_q()), 0..6)
        .prop_map(|terms| MultiPoly::from_terms(NVARS, terms))
}

proptest! {
    // ---------------------------------------------------------------- orders

    #[test]
    fn order_is_antisymmetric_and_total(a in arb_mono(), b in arb_mono(), ord in arb_order()) {
        prop_assert_eq!(ord.cmp(&a, &b), ord.cmp(&b, &a).reverse());
        if ord.cmp(&a, &b) == Ordering::Equal {
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn order_is_transitive(a in arb_mono(), b in arb_mono(), c in arb_mono(), ord in arb_order()) {
        let mut v = [a, b, c];
        v.sort_by(|x, y| ord.cmp(x, y));
        prop_assert_ne!(ord.cmp(&v[0], &v[1]), Ordering::Greater);
        prop_assert_ne!(ord.cmp(&v[1], &v[2]), Ordering::Greater);
        prop_assert_ne!(ord.cmp(&v[0], &v[2]), Ordering::Greater);
    }

    #[test]
    fn order_respects_multiplication(a in arb_mono(), b in arb_mono(), c in arb_mono(), ord in arb_order()) {
        prop_assert_eq!(ord.cmp(&a, &b), ord.cmp(&a.mul(&c), &b.mul(&c)));
    }

    #[test]
    fn order_has_one_as_minimum(a in arb_mono(), ord in arb_order()) {
        prop_assert_ne!(ord.cmp(&Monomial::one(), &a), Ordering::Greater);
    }

    // ----------------------------------------------------- monomial algebra

    #[test]
    fn lcm_is_a_common_multiple_and_tight(a in arb_mono(), b in arb_mono()) {
        let l = a.lcm(&b);
        prop_assert!(a.divides(&l) && b.divides(&l));
        prop_assert_eq!(a.lcm(&b), b.lcm(&a));
        // tightness: nothing strictly smaller in one variable still works
        for v in 0..NVARS {
            if l.0[v] > 0 {
                let mut smaller = l.0;
                smaller[v] -= 1;
                let s = Monomial(smaller);
                prop_assert!(!(a.divides(&s) && b.divides(&s)));
            }
        }
        prop_assert_eq!(a.coprime(&b), a.mul(&b) == l);
    }

    #[test]
    fn quotient_undoes_multiplication(a in arb_mono(), b in arb_mono()) {
        let p = a.mul(&b);
        prop_assert!(a.divides(&p));
        prop_assert_eq!(a.quotient_of(&p), b);
    }

    // ------------------------------------------------------ coefficient field

    #[test]
    fn coefficients_form_a_commutative_ring(x in arb_q(), y in arb_q(), z in arb_q()) {
        prop_assert_eq!(x.add(&y), y.add(&x));
        prop_assert_eq!(x.mul(&y), y.mul(&x));
        prop_assert_eq!(x.add(&y).add(&z), x.add(&y.add(&z)));
        prop_assert_eq!(x.mul(&y).mul(&z), x.mul(&y.mul(&z)));
        prop_assert_eq!(x.mul(&y.add(&z)), x.mul(&y).add(&x.mul(&z)));
        prop_assert_eq!(x.sub(&x), QSqrt3::zero());
        prop_assert_eq!(x.add(&x.neg()), QSqrt3::zero());
    }

    #[test]
    fn nonzero_coefficients_invert(x in arb_q()) {
        prop_assume!(!x.is_zero());
        prop_assert_eq!(x.mul(&x.inv()), QSqrt3::one());
        prop_assert_eq!(x.div(&x), QSqrt3::one());
    }

    #[test]
    fn coefficient_sign_matches_numeric_value(x in arb_q()) {
        let v = x.to_f64();
        // away from zero the exact sign decision must agree with f64
        if v.abs() > 1e-9 {
            let expect = if v > 0.0 { Ordering::Greater } else { Ordering::Less };
            prop_assert_eq!(x.sign(), expect);
        }
    }

    #[test]
    fn coefficient_enclosure_brackets_the_value(x in arb_q()) {
        let e = x.enclosure(25);
        let v = x.to_f64();
        prop_assert!(e.lo.to_f64() <= v + 1e-12 && v - 1e-12 <= e.hi.to_f64());
        prop_assert!(e.width() <= pow10_neg(25));
        // json roundtrip is exact
        prop_assert_eq!(QSqrt3::from_json(&x.to_json()).unwrap(), x);
    }

    // ---------------------------------------------------------- ring laws

    #[test]
    fn polynomials_form_a_commutative_ring(f in arb_poly(), g in arb_poly(), h in arb_poly()) {
        prop_assert_eq!(f.add(&g), g.add(&f));
        prop_assert_eq!(f.mul(&g), g.mul(&f));
        prop_assert_eq!(f.add(&g).add(&h), f.add(&g.add(&h)));
        prop_assert_eq!(f.mul(&g.add(&h)), f.mul(&g).add(&f.mul(&h)));
        prop_assert!(f.sub(&f).is_zero());
        prop_assert_eq!(f.mul(&g).mul(&h), f.mul(&g.mul(&h)));
    }

    #[test]
    fn evaluation_is_a_ring_homomorphism(f in arb_poly(), g in arb_poly(),
                                         pt in proptest::collection::vec(-1.0f64..1.0, NVARS)) {
        let (ef, eg) = (f.eval_f64(&pt), g.eval_f64(&pt));
        let scale = 1.0 + ef.abs().max(eg.abs());
        prop_assert!((f.add(&g).eval_f64(&pt) - (ef + eg)).abs() < 1e-9 * scale);
        prop_assert!((f.mul(&g).eval_f64(&pt) - ef * eg).abs() < 1e-9 * scale * scale);
    }

    #[test]
    fn polynomial_json_roundtrips(f in arb_poly()) {
        prop_assert_eq!(MultiPoly::from_json(&f.to_json(), NVARS).unwrap(), f);
    }

    // ---------------------------------------------------------- reduction

    #[test]
    fn remainders_are_irreducible_and_stable(f in arb_poly(), g1 in arb_poly(), g2 in arb_poly(),
                                             ord in arb_order()) {
        prop_assume!(!g1.is_zero() && !g2.is_zero());
        let basis = vec![g1, g2];
        let r = reduce(&f, &basis, &ord).unwrap();
        // no term of the remainder is divisible by a divisor's leading monomial
        for (m, _) in &r.terms {
            for g in &basis {
                prop_assert!(!g.leading(&ord).0.divides(m));
            }
        }
        prop_assert_eq!(reduce(&r, &basis, &ord).unwrap(), r);
    }

    #[test]
    fn spairs_cancel_leading_terms(f in arb_poly(), g in arb_poly(), ord in arb_order()) {
        prop_assume!(!f.is_zero() && !g.is_zero());
        let s = s_polynomial(&f, &g, &ord);
        if !s.is_zero() {
            let l = f.leading(&ord).0.lcm(g.leading(&ord).0);
            prop_assert_eq!(ord.cmp(s.leading(&ord).0, &l), Ordering::Less);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // ------------------------------------------------- basis completeness

    #[test]
    fn computed_bases_close_under_spairs(
        t1 in proptest::collection::vec((proptest::collection::vec(0u16..3, 2), -2i64..=2), 1..4),
        t2 in proptest::collection::vec((proptest::collection::vec(0u16..3, 2), -2i64..=2), 1..4),
    ) {
        let build = |ts: Vec<(Vec<u16>, i64)>| {
            let terms = ts
                .into_iter()
                .map(|(e, c)| (mono(&e), QSqrt3::from_int(c)))
                .collect();
            MultiPoly::from_terms(2, terms)
        };
        let (p1, p2) = (build(t1), build(t2));
        prop_assume!(!p1.is_zero() && !p2.is_zero());
        let sys = PolynomialSystem {
            dim: 2,
            mode: CoeffMode::Exact,
            vars: PolynomialSystem::var_names(2),
            polys: vec![p1.clone(), p2.clone()],
            source: None,
        };
        let ord = MonomialOrder::grevlex_default(2);
        let gb = buchberger(&sys, &ord).unwrap();
        let basis = gb.polys();
        // defining property: every S-polynomial reduces to zero
        for i in 0..basis.len() {
            for j in (i + 1)..basis.len() {
                let s = s_polynomial(&basis[i], &basis[j], &gb.order);
                prop_assert!(reduce(&s, basis, &gb.order).unwrap().is_zero());
            }
        }
        // the generators lie in the ideal of the basis
        prop_assert!(reduce(&p1, basis, &gb.order).unwrap().is_zero());
        prop_assert!(reduce(&p2, basis, &gb.order).unwrap().is_zero());
    }

    // ------------------------------------------------------ root isolation

    #[test]
    fn isolation_finds_exactly_the_constructed_roots(
        nums in proptest::collection::btree_set(-12i64..=12, 1..5),
        den in 1i64..=5,
        shift in 0i64..=6,
    ) {
        // distinct rational roots n/den, optionally times an irreducible quadratic
        let roots: Vec<Rat> = nums.iter().map(|&n| Rat::from((n, den))).collect();
        let mut poly = vec![Rat::from(1)];
        for r in &roots {
            let next: Vec<Rat> = {
                let mut out = vec![Rat::new(); poly.len() + 1];
                for (i, c) in poly.iter().enumerate() {
                    out[i + 1] += c;                    // x * c x^i
                    out[i] -= Rat::from(r * c);         // -r * c x^i
                }
                out
            };
            poly = next;
        }
        // (x^2 + shift + 1) has no real roots
        let q = Rat::from(shift + 1);
        let mut lifted = vec![Rat::new(); poly.len() + 2];
        for (i, c) in poly.iter().enumerate() {
            lifted[i + 2] += c;
            lifted[i] += Rat::from(&q * c);
        }
        let ivs = sturm_isolate(&lifted);
        prop_assert_eq!(ivs.len(), roots.len());
        for (iv, r) in ivs.iter().zip(roots.iter()) {
            let fine = refine(iv, 18);
            prop_assert!(&fine.lo <= r && r <= &fine.hi, "root {} escaped its interval", r);
            if !fine.is_exact() {
                prop_assert!(fine.width() < pow10_neg(15));
            }
        }
    }
}

proptest! {
    // ------------------------------------------------- rationals & intervals

    #[test]
    fn decimal_formatting_roundtrips(n in -100_000i64..=100_000, d in 1i64..=9_999) {
        let r = Rat::from((n, d));
        let parsed = rat_from_decimal(&rat_to_decimal(&r, 25)).unwrap();
        let err = Rat::from(Rat::from(&parsed - &r).abs());
        let mut bound = pow10_neg(18);
        bound *= Rat::from(Rat::from(r.clone()).abs() + Rat::from(1));
        prop_assert!(err <= bound);
    }

    #[test]
    fn significant_rounding_stays_close(n in -100_000i64..=100_000, d in 1i64..=9_999, dig in 3u32..=12) {
        let r = Rat::from((n, d));
        let rounded = round_sig(&r, dig);
        let err = Rat::from(Rat::from(&rounded - &r).abs());
        let mut bound = pow10_neg(dig - 1);
        bound *= Rat::from(Rat::from(r.clone()).abs() + pow10_neg(dig));
        prop_assert!(err <= bound, "rounded {} to {} (digits {})", r, rounded, dig);
    }

    #[test]
    fn interval_arithmetic_contains_pointwise_results(
        (al, aw) in (-50i64..=50, 0i64..=20),
        (bl, bw) in (-50i64..=50, 0i64..=20),
        (ta, tb) in (0i64..=100, 0i64..=100),
        e in 1u32..=4,
    ) {
        let ia = RInt::new(Rat::from((al, 7)), Rat::from((al + aw, 7)));
        let ib = RInt::new(Rat::from((bl, 9)), Rat::from((bl + bw, 9)));
        // points inside: lo + t/100 * width
        let pa = Rat::from(ia.lo.clone() + Rat::from((ta, 100)) * ia.width());
        let pb = Rat::from(ib.lo.clone() + Rat::from((tb, 100)) * ib.width());
        prop_assert!(ia.add(&ib).contains(&Rat::from(&pa + &pb)));
        prop_assert!(ia.sub(&ib).contains(&Rat::from(&pa - &pb)));
        prop_assert!(ia.mul(&ib).contains(&Rat::from(&pa * &pb)));
        let mut pw = Rat::from(1);
        for _ in 0..e {
            pw *= &pa;
        }
        prop_assert!(ia.pow(e).contains(&pw));
        prop_assert!(ia.neg().contains(&Rat::from(-pa)));
    }
}

// ----------------------------------------------------------- serialization

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn order_json_roundtrips(ord in arb_order()) {
        let back = MonomialOrder::from_json(&ord.to_json()).unwrap();
        prop_assert_eq!(back.kind, ord.kind);
        prop_assert_eq!(back.perm, ord.perm);
    }
}

#[test]
fn result_record_json_roundtrips() {
    use mub::harness::{Engine, ResultRecord};
    use mub::catalog::Family;
    let rec = ResultRecord {
        key: "abc123".into(),
        family: Family::Dita,
        params: vec![Rat::from((1, 8))],
        mode: CoeffMode::Approx(15),
        n_v: Some(48),
        n_t: Some(0),
        n_p: Some(0),
        four_bases_found: Some(false),
        wall_time_s: 1.25,
        engine: Engine::Numcheck,
        version: "0.1.0".into(),
        seed_provenance: "seed 42 index 3".into(),
        error: None,
    };
    let back = ResultRecord::from_json(&rec.to_json()).unwrap();
    assert_eq!(back, rec);
}
