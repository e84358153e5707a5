use borelforge::smoothfn::cutoff::hormander_cutoff;
use borelforge::smoothfn::expr::NodeId;
use borelforge::*;
use proptest::prelude::*;

#[derive(Clone, Debug)]
enum Recipe {
    X,
    Const(i8),
    Add(Box<Recipe>, Box<Recipe>),
    Mul(Box<Recipe>, Box<Recipe>),
    /// exp(x / 2) style damping keeps values moderate
    Exp(Box<Recipe>),
    Cutoff { center: i8, width: u8 },
    Bump { center: i8 },
    Pow(Box<Recipe>, u8),
}

fn recipe() -> impl Strategy<Value = Recipe> {
    let leaf = prop_oneof![
        Just(Recipe::X),
        (-4i8..=4).prop_map(Recipe::Const),
        ((-3i8..=3), (1u8..=4)).prop_map(|(center, width)| Recipe::Cutoff { center, width }),
        (-2i8..=2).prop_map(|center| Recipe::Bump { center }),
    ];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Recipe::Add(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Recipe::Mul(Box::new(a), Box::new(b))),
            inner.clone().prop_map(|a| Recipe::Exp(Box::new(a))),
            (inner, 1u8..=3).prop_map(|(a, k)| Recipe::Pow(Box::new(a), k)),
        ]
    })
}

fn build(b: &mut ExprBuilder, r: &Recipe) -> NodeId {
    match r {
        Recipe::X => b.coord(0),
        Recipe::Const(c) => b.constant(Rat::int(*c as i64)),
        Recipe::Add(x, y) => {
            let (x, y) = (build(b, x), build(b, y));
            b.add(vec![x, y])
        }
        Recipe::Mul(x, y) => {
            let (x, y) = (build(b, x), build(b, y));
            b.mul(vec![x, y])
        }
        Recipe::Exp(x) => {
            let x = build(b, x);
            let h = b.affine(x, 0.25, 0.0);
            b.exp(h)
        }
        Recipe::Cutoff { center, width } => {
            let x = b.coord(0);
            let w = *width as f64 * 0.5;
            let u = b.affine(x, 1.0 / w, -(*center as f64 * 0.25) / w);
            b.cutoff(u)
        }
        Recipe::Bump { center } => {
            let x = b.coord(0);
            let u = b.affine(x, 0.5, -(*center as f64) * 0.25);
            b.bump(u)
        }
        Recipe::Pow(x, k) => {
            let x = build(b, x);
            b.pow(x, *k as u32)
        }
    }
}

/// Plateau and support edges of the cutoffs and bumps.
fn edges(r: &Recipe, out: &mut Vec<f64>) {
    match r {
        Recipe::X | Recipe::Const(_) => {}
        Recipe::Add(a, b) | Recipe::Mul(a, b) => {
            edges(a, out);
            edges(b, out);
        }
        Recipe::Exp(a) | Recipe::Pow(a, _) => edges(a, out),
        Recipe::Cutoff { center, width } => {
            let w = *width as f64 * 0.5;
            for u in [-1.0, -0.5, 0.5, 1.0] {
                out.push(*center as f64 * 0.25 + u * w);
            }
        }
        Recipe::Bump { center } => {
            for u in [-1.0, 1.0] {
                out.push(2.0 * u + *center as f64 * 0.5);
            }
        }
    }
}

fn line() -> Region {
    Region::interval(Rat::int(-1), Rat::int(1))
}

fn make(r: &Recipe) -> SmoothExpr {
    let mut b = ExprBuilder::new(&line());
    let root = build(&mut b, r);
    b.finish(root).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, .. ProptestConfig::default() })]

    #[test]
    fn derivatives_match_finite_differences(r in recipe(), x in -0.9f64..0.9) {
        let mut near = Vec::new();
        edges(&r, &mut near);
        // distance to the nearest flat-type transition edge
        let free = near.iter().map(|c| (x - c).abs()).fold(f64::INFINITY, f64::min);
        prop_assume!(free > 0.02);
        let e = make(&r);
        let ad = e.eval_derivs(&[x], 6).unwrap();
        // nested exp/pow recipes can overflow
        prop_assume!(ad.iter().all(|v| v.is_finite() && v.abs() < 1e100));
        // each order against a first difference of the one below it; high-order
        // difference tables are unreliable inside transition layers
        // near an edge at distance d the transition varies on a length ~ d^2
        let h = (0.05 * free * free).min(2e-3);
        let at = |t: f64| e.eval_derivs(&[t], 5).unwrap();
        let rows: Vec<Vec<f64>> = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0].iter().map(|m| at(x + m * h)).collect();
        let five = |k: usize, a: usize, b: usize, c: usize, d: usize, step: f64| {
            (rows[a][k] - 8.0 * rows[b][k] + 8.0 * rows[c][k] - rows[d][k]) / (12.0 * step)
        };
        for k in 1..=6 {
            let coarse = five(k - 1, 0, 1, 4, 5, h);
            let fine = five(k - 1, 1, 2, 3, 4, 0.5 * h);
            let mag = rows.iter().map(|r| r[k - 1].abs()).fold(0.0, f64::max);
            let est = (coarse - fine).abs() / 15.0 + 1e-13 * mag / h;
            let tol = (1e-6 * ad[k].abs().max(1.0)).max(3.0 * est);
            prop_assert!((ad[k] - fine).abs() <= tol, "order {k}: ad {} fd {fine} est {est}", ad[k]);
        }
    }

    #[test]
    fn json_round_trip_is_bit_identical(r in recipe()) {
        let e = make(&r);
        let text = serde_json::to_string(&e).unwrap();
        let back: SmoothExpr = serde_json::from_str(&text).unwrap();
        for i in 0..1000 {
            let x = -1.0 + 2.0 * (i as f64 + 0.5) / 1000.0;
            prop_assert_eq!(e.eval(&[x]).unwrap().to_bits(), back.eval(&[x]).unwrap().to_bits());
        }
    }

    #[test]
    fn support_tags_give_exact_zero(c in -0.5f64..0.5, w in 0.05f64..0.3) {
        let r = line();
        let mut b = ExprBuilder::new(&r);
        let x = b.coord(0);
        let e1 = b.exp(x);
        let s = b.sum(vec![(e1, Some(vec![vec![(c - w, c + w)]]))]);
        let e = b.finish(s).unwrap();
        let mut outside = 0;
        for i in 0..1000 {
            let t = -1.0 + 2.0 * (i as f64 + 0.5) / 1000.0;
            if (t - c).abs() > w {
                outside += 1;
                prop_assert_eq!(e.eval(&[t]).unwrap(), 0.0);
            }
        }
        prop_assert!(outside > 0);
    }
}

#[test]
fn cutoff_sandwich() {
    let inner = SetDescriptor::build(1, vec![], vec![(Rat::new(-1, 4), Rat::new(1, 4))], vec![]).unwrap();
    let widths = vec![Rat::new(1, 10), Rat::new(1, 20), Rat::new(1, 40)];
    let cert = hormander_cutoff(&inner, &widths, &Region::interval(Rat::int(-1), Rat::int(1))).unwrap();
    let outer = 0.25 + 0.175;
    for i in 0..4001 {
        let x = -1.0 + 2.0 * i as f64 / 4000.0;
        let t = cert.expr.eval(&[x]).unwrap();
        assert!((0.0..=1.0).contains(&t), "{x}: {t}");
        if x.abs() <= 0.25 || x.abs() >= outer {
            assert_eq!(t * (1.0 - t), 0.0, "{x}: {t}");
        }
    }
}
