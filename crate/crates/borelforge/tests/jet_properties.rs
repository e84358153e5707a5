use borelforge::jets::{compat_residual, jet_mul, jet_shift, Jet};
use borelforge::*;
use proptest::prelude::*;

fn jet_1d(base: Rat, coeffs: Vec<f64>) -> Jet {
    Jet::new(vec![base], coeffs.len() - 1, coeffs).unwrap()
}

fn small_ints(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((-6i32..=6).prop_map(f64::from), n)
}

proptest! {
    #[test]
    fn product_is_commutative_associative_unital(a in small_ints(6), b in small_ints(6), c in small_ints(6)) {
        let (a, b, c) = (jet_1d(Rat::zero(), a), jet_1d(Rat::zero(), b), jet_1d(Rat::zero(), c));
        prop_assert_eq!(jet_mul(&a, &b).unwrap(), jet_mul(&b, &a).unwrap());
        let left = jet_mul(&jet_mul(&a, &b).unwrap(), &c).unwrap();
        let right = jet_mul(&a, &jet_mul(&b, &c).unwrap()).unwrap();
        prop_assert_eq!(left, right);
        let mut unit = vec![0.0; 6];
        unit[0] = 1.0;
        prop_assert_eq!(jet_mul(&jet_1d(Rat::zero(), unit), &a).unwrap(), a);
    }

    #[test]
    fn planar_product_commutes(a in small_ints(10), b in small_ints(10)) {
        let a = Jet::new(vec![Rat::zero(), Rat::one()], 3, a).unwrap();
        let b = Jet::new(vec![Rat::zero(), Rat::one()], 3, b).unwrap();
        prop_assert_eq!(jet_mul(&a, &b).unwrap(), jet_mul(&b, &a).unwrap());
    }

    #[test]
    fn shift_and_back_is_identity(poly in small_ints(5), num in -8i64..=8) {
        // derivatives of a quartic with small integer coefficients at 0
        let mut coeffs = poly.clone();
        let mut fact = 1.0;
        for (k, c) in coeffs.iter_mut().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            *c *= fact;
        }
        let a = jet_1d(Rat::zero(), coeffs);
        let moved = jet_shift(&a, &[Rat::new(num, 4)]).unwrap();
        prop_assert_eq!(jet_shift(&moved, &[Rat::zero()]).unwrap(), a);
    }

    #[test]
    fn sampled_field_residual_decays(d in 1usize..=4, x0 in -0.5f64..0.5) {
        let r = Region::interval(Rat::int(-2), Rat::int(2));
        let mut b = ExprBuilder::new(&r);
        let x = b.coord(0);
        let h = b.affine(x, 2.0, 0.0);
        let root = b.exp(h);
        let f = b.finish(root).unwrap();
        let base = Rat::from_f64(x0).unwrap();
        let p = Jet::from_expr(&f, vec![base], d).unwrap();
        let mut logs = Vec::new();
        for i in 0..4 {
            let sep = 0.05 / 2f64.powi(i);
            let q = Jet::from_expr(&f, vec![Rat::from_f64(x0 + sep).unwrap()], d).unwrap();
            let res = compat_residual(&q, &p, d).unwrap();
            logs.push((sep.ln(), res.table[0].abs().ln()));
        }
        let slope = (logs[0].1 - logs[3].1) / (logs[0].0 - logs[3].0);
        prop_assert!(slope >= d as f64 + 0.9, "d {d}: slope {slope}");
    }
}
