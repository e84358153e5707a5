use borelforge::jets::{Jet, JetField};
use borelforge::realize::*;
use borelforge::smoothfn::series::factorial;
use borelforge::verify::sup_norm;
use borelforge::*;
use proptest::prelude::*;

fn line() -> Region {
    Region::interval(Rat::int(-1), Rat::int(1))
}

fn coeffs(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, .. ProptestConfig::default() })]

    #[test]
    fn borel_derivatives_are_exact(a in coeffs(7), num in -40i64..=40) {
        let jet = Jet::new(vec![Rat::new(num, 100)], 6, a.clone()).unwrap();
        let out = borel_realize(&jet, &line(), &RealizeOptions::default()).unwrap();
        let d = out.expr.eval_derivs(&jet.base_f64(), 6).unwrap();
        for (k, (got, want)) in d.iter().zip(&a).enumerate() {
            prop_assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0), "order {k}: {got} vs {want}");
        }
    }

    #[test]
    fn borel_tail_terms_are_small(a in coeffs(6)) {
        let jet = Jet::new(vec![Rat::zero()], 5, a).unwrap();
        let out = borel_realize(&jet, &line(), &RealizeOptions::default()).unwrap();
        let s = &out.schedules[0];
        prop_assert!(s.holds());
        // consecutive partial sums differ by one term; measure it directly
        for k in 1..=5 {
            let term = borel_term_expr(&jet, k, s.eps[k], &line()).unwrap();
            let w = [(-s.eps[k], s.eps[k])];
            for l in 0..k {
                let m = sup_norm(&term, &w, l, 401).unwrap();
                prop_assert!(m.value <= 1.0 / factorial(k), "term {k} order {l}: {}", m.value);
            }
        }
    }

    #[test]
    fn multi_point_support_is_exact(a in coeffs(15), shift in 0.0f64..0.05) {
        let bases = [0.1 + shift, 0.35 + shift, 0.7 + shift];
        let jets: Vec<Jet> = bases
            .iter()
            .enumerate()
            .map(|(i, b)| Jet::new(vec![Rat::from_f64(*b).unwrap()], 4, a[5 * i..5 * i + 5].to_vec()).unwrap())
            .collect();
        let field = JetField::points_only(jets.clone()).unwrap();
        let r = Region::interval(Rat::zero(), Rat::one());
        let out = multi_borel(&field, &r, &RealizeOptions::default()).unwrap();
        for (j, c) in jets.iter().zip(&out.caps) {
            let d = out.expr.eval_derivs(&j.base_f64(), 4).unwrap();
            for (got, want) in d.iter().zip(j.coeffs()) {
                prop_assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0));
            }
            prop_assert!(*c > 0.0);
        }
        for i in 0..1000 {
            let x = (i as f64 + 0.5) / 1000.0;
            let inside = jets.iter().zip(&out.caps).any(|(j, c)| (x - j.base_f64()[0]).abs() <= *c);
            if !inside {
                prop_assert_eq!(out.expr.eval(&[x]).unwrap(), 0.0);
            }
        }
    }
}

#[test]
fn filtered_remainder_vanishes_to_each_order() {
    let r = line();
    let terms: Vec<SmoothExpr> = (1..=5)
        .map(|j| {
            let mut b = ExprBuilder::new(&r);
            let x = b.coord(0);
            let p = b.pow(x, j);
            let s = b.affine(x, 1.0, 2.0);
            let root = b.mul(vec![p, s]);
            b.finish(root).unwrap()
        })
        .collect();
    let prefix = CompletionPrefix::new(SetDescriptor::points_1d(&[Rat::zero()]), terms.clone());
    let out = realize_filtered(&prefix, &r, &RealizeOptions::default()).unwrap();
    // f is the sum of its terms
    for x in [-0.7, -0.01, 0.0, 1e-4, 0.3] {
        let sum: f64 = out.terms.iter().map(|t| t.eval(&[x]).unwrap()).sum();
        let mag: f64 = out.terms.iter().map(|t| t.eval(&[x]).unwrap().abs()).sum();
        assert!((out.expr.eval(&[x]).unwrap() - sum).abs() <= 1e-15 * mag);
    }
    // f - sum_(j<=N) g_j summed term by term: subtracting from f would lose
    // everything below one ulp of g_1
    for n in 1..=5 {
        let h0 = if n < 5 { out.schedule.eps[n] / 4.0 } else { out.schedule.eps[4] / 4.0 };
        for dir in [-1.0f64, 1.0] {
            let rem = |h: f64| -> f64 {
                let x = dir * h;
                let head: f64 = (0..n).map(|j| out.terms[j].eval(&[x]).unwrap() - terms[j].eval(&[x]).unwrap()).sum();
                let tail: f64 = (n..5).map(|j| out.terms[j].eval(&[x]).unwrap()).sum();
                head + tail
            };
            let vals: Vec<f64> = (0..4).map(|i| rem(h0 / 2f64.powi(i)).abs()).collect();
            if vals.iter().all(|v| *v == 0.0) {
                // no terms beyond N: the remainder vanishes identically near 0
                assert_eq!(n, 5);
                continue;
            }
            let slope = (vals[0].ln() - vals[3].ln()) / 8f64.ln();
            assert!(slope >= n as f64 - 0.1, "N = {n}: slope {slope} {vals:?}");
        }
    }
}

#[test]
fn positivity_keeps_derivatives_on_z() {
    let r = line();
    let mut b = ExprBuilder::new(&r);
    let x = b.coord(0);
    let s = b.affine(x, 3.0, -0.5);
    let root = b.exp(s);
    let f = b.finish(root).unwrap();
    let z = SetDescriptor::points_1d(&[Rat::new(-1, 2), Rat::new(1, 3)]);
    let out = ensure_positive(&f, &z, 0.2, &r).unwrap();
    assert!(out.min_value > 0.0);
    for p in z.sample_points(3) {
        let a = f.eval_derivs(&p, 10).unwrap();
        let b = out.expr.eval_derivs(&p, 10).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() <= 1e-12 * u.abs().max(1.0));
        }
    }
}
