use borelforge::constraints::{retarget, solve_constraints, Functional};
use borelforge::filtration::{FormVerdict, PolyFiltration, RootMult};
use borelforge::flatzero::{flat_zero_chain, ln_flat_value, ZeroChain};
use borelforge::realize::{realize_filtered, CompletionPrefix, RealizeOptions};
use borelforge::verify::vanishing_order;
use borelforge::*;
use num_rational::BigRational;
use num_traits::One;
use proptest::prelude::*;

fn pts(v: &[Rat]) -> SetDescriptor {
    SetDescriptor::points_1d(v)
}

#[test]
fn flat_chain_is_positive_flat_and_in_every_level() {
    let r = Region::interval(Rat::int(-1), Rat::int(1));
    let sets = vec![
        pts(&[Rat::new(-1, 2), Rat::zero(), Rat::new(1, 2)]),
        pts(&[Rat::zero(), Rat::new(1, 2)]),
        pts(&[Rat::zero()]),
    ];
    let chain = ZeroChain::new(sets.clone(), None).unwrap();
    let f = flat_zero_chain(&chain, &r).unwrap();
    for i in 0..10_000 {
        let x = -1.0 + 2.0 * (i as f64 + 0.5) / 10_000.0;
        assert!(ln_flat_value(&chain, &f, &[x]).is_finite(), "{x}");
    }
    for (j, z) in sets.iter().enumerate() {
        for p in z.sample_points(1) {
            let v = vanishing_order(&f.expr, &p, &[1.0], 1e-2).unwrap();
            assert!(v.at_least((j + 1) as f64, 0.1), "Z_{}: {v:?}", j + 1);
        }
        // faster than any power: ln f - 30 ln h keeps falling as h shrinks
        for p in z.sample_points(1) {
            let r: Vec<f64> = (12..30)
                .map(|m| {
                    let h = 0.5f64.powi(m);
                    ln_flat_value(&chain, &f, &[p[0] + h]) - 30.0 * h.ln()
                })
                .collect();
            assert!(r.windows(2).all(|w| w[1] < w[0]), "Z_{}: {r:?}", j + 1);
        }
    }
}

fn level_strategy() -> impl Strategy<Value = (Vec<Vec<u32>>, usize)> {
    // increments per level for roots 0, 1/2, 1/3, then constant
    (1usize..6, prop::collection::vec(prop::collection::vec(0u32..3, 3), 6)).prop_map(|(c, inc)| {
        let mut cur = vec![0u32; 3];
        let mut out = Vec::new();
        for j in 0..c + 10 {
            if j < c {
                for (m, d) in cur.iter_mut().zip(&inc[j]) {
                    *m += d;
                }
            }
            out.push(cur.clone());
        }
        (out, c)
    })
}

proptest! {
    #[test]
    fn form_ok_survives_more_levels((mults, c) in level_strategy()) {
        let roots = [Rat::zero(), Rat::new(1, 2), Rat::new(1, 3)];
        let levels = mults
            .iter()
            .map(|m| roots.iter().zip(m).filter(|(_, k)| **k > 0).map(|(r, k)| RootMult { root: r.clone(), mult: *k }).collect())
            .collect();
        let f = PolyFiltration::from_levels((Rat::zero(), Rat::one()), levels).unwrap();
        for j_max in c + 1..=c + 5 {
            let before = f.necessary_form_check(j_max).unwrap();
            let after = f.necessary_form_check(j_max + 5).unwrap();
            if before.is_ok() {
                prop_assert!(after.is_ok(), "j_max {j_max}: {after:?}");
            }
        }
    }
}

#[test]
fn form_ok_rules_feed_the_realizer() {
    let w = (Rat::int(-1), Rat::int(1));
    let corpus = vec![
        PolyFiltration::power(w.clone(), vec![RootMult { root: Rat::zero(), mult: 1 }], vec![]).unwrap(),
        PolyFiltration::power(w.clone(), vec![RootMult { root: Rat::zero(), mult: 1 }], vec![RootMult { root: Rat::zero(), mult: 2 }]).unwrap(),
        PolyFiltration::power(w.clone(), vec![RootMult { root: Rat::new(-1, 2), mult: 1 }, RootMult { root: Rat::new(1, 3), mult: 2 }], vec![])
            .unwrap(),
    ];
    let r = Region::interval(w.0.clone(), w.1.clone());
    for f in corpus {
        let v = f.necessary_form_check(6).unwrap();
        let FormVerdict::Ok { indices, .. } = &v else { panic!("{v:?}") };
        let z = v.zero_set_descriptor().unwrap();
        // the generators of the first levels, each declared to its d_j
        let terms = (1..=4)
            .map(|j| {
                let lv = f.level(j).unwrap().unwrap();
                let mut b = ExprBuilder::new(&r);
                let x = b.coord(0);
                let factors = lv
                    .iter()
                    .map(|(p, m)| {
                        let lin = b.affine_exact(x, Rat::one(), Rat(-p.0.clone()));
                        b.pow(lin, *m)
                    })
                    .collect();
                let root = b.mul(factors);
                b.finish(root).unwrap()
            })
            .collect();
        let orders = Some(indices[..4].iter().map(|ix| ix.d).collect());
        let prefix = CompletionPrefix { zero_set: z, terms, orders };
        realize_filtered(&prefix, &r, &RealizeOptions::default()).unwrap();
    }
}

#[test]
fn witness_partial_sums_grow_like_factorials() {
    let f = PolyFiltration::harmonic((Rat::zero(), Rat::one()), Rat::one(), 0).unwrap();
    assert!(!f.necessary_form_check(12).unwrap().is_ok());
    let w = f.witness_unbounded(12).unwrap();
    let mut fact = BigRational::one();
    for n in 1..=12usize {
        fact *= BigRational::from_integer(n.into());
        let s = w.partial_sum(n, &w.terms[n - 1].point).unwrap();
        assert!(s.0 >= fact, "N = {n}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, .. ProptestConfig::default() })]

    #[test]
    fn correction_is_linear_in_targets(t in prop::collection::vec(-5.0f64..5.0, 6)) {
        let r = Region::interval(Rat::int(-1), Rat::int(2));
        let mut b = ExprBuilder::new(&r);
        let x = b.coord(0);
        let root = b.exp(x);
        let f0 = b.finish(root).unwrap();
        let z = pts(&[Rat::zero()]);
        let conds = vec![
            Functional::Punctual { base: vec![1.0], alpha: vec![0], target: 0.0 },
            Functional::Moment { weight: None, bounds: vec![[0.0, 2.0]], target: 0.0 },
            Functional::Punctual { base: vec![1.5], alpha: vec![2], target: 0.0 },
        ];
        let c1 = retarget(&conds, &t[..3]);
        let c2 = retarget(&conds, &t[3..]);
        let mid: Vec<f64> = (0..3).map(|i| 0.5 * (t[i] + t[i + 3])).collect();
        let cm = retarget(&conds, &mid);
        let a = solve_constraints(&f0, &z, 0.25, &c1).unwrap();
        let bb = solve_constraints(&f0, &z, 0.25, &c2).unwrap();
        let m = solve_constraints(&f0, &z, 0.25, &cm).unwrap();
        for i in 0..50 {
            let x = -1.0 + 3.0 * (i as f64 + 0.5) / 50.0;
            let avg = 0.5 * (a.expr.eval(&[x]).unwrap() + bb.expr.eval(&[x]).unwrap());
            prop_assert!((avg - m.expr.eval(&[x]).unwrap()).abs() <= 1e-10);
        }
        for p in [[0.0], [0.05], [-0.1]] {
            prop_assert_eq!(f0.eval_derivs(&p, 20).unwrap(), m.expr.eval_derivs(&p, 20).unwrap());
        }
    }
}
