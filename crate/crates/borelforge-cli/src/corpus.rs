//! The worked examples, each run through the same JSON job path as the
//! binary and checked with the tolerances the acceptance suite pins.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use borelforge::constraints::{DecaySpec, Functional};
use borelforge::filtration::{FormVerdict, PolyFiltration, RootMult};
use borelforge::flatzero::ZeroChain;
use borelforge::jets::{Jet, JetField, Segment};
use borelforge::realize::CompletionPrefix;
use borelforge::smoothfn::cutoff::hormander_cutoff;
use borelforge::smoothfn::series::factorial;
use borelforge::verify::{num, vanishing_order, VerificationReport};
use borelforge::{ExprBuilder, Rat, Region, SetDescriptor, SmoothExpr};

use crate::commands::{self, Outcome};
use crate::job::{parse_job, JobFile, Settings};
use crate::CliError;

pub struct Case {
    pub id: usize,
    pub name: &'static str,
    pub run: fn() -> Result<VerificationReport, CliError>,
}

pub fn cases() -> Vec<Case> {
    vec![
        Case { id: 1, name: "borel-factorial-squares", run: borel_factorial_squares },
        Case { id: 2, name: "multi-borel-random", run: multi_borel_random },
        Case { id: 3, name: "point-plus-segment", run: point_plus_segment },
        Case { id: 4, name: "hormander-certificate", run: hormander_certificate },
        Case { id: 5, name: "filtered-even-powers", run: filtered_even_powers },
        Case { id: 6, name: "cubic-under-two-points", run: cubic_under_two_points },
        Case { id: 7, name: "filtration-verdicts", run: filtration_verdicts },
        Case { id: 8, name: "flat-chain", run: flat_chain },
        Case { id: 9, name: "three-conditions", run: three_conditions },
        Case { id: 10, name: "decay-unit-interval", run: decay_unit_interval },
        Case { id: 11, name: "expr-round-trip", run: expr_round_trip },
    ]
}

fn to_value(v: &impl Serialize) -> Value {
    serde_json::to_value(v).expect("library types serialize")
}

pub fn job(command: &str, region: Option<&Region>, payload: Value) -> JobFile {
    let mut doc = json!({ "version": 1, "command": command, "payload": payload });
    if let Some(r) = region {
        doc["region"] = to_value(r);
    }
    parse_job(&doc.to_string()).expect("corpus jobs are well formed")
}

fn absorb(case: &str, o: Outcome) -> Result<VerificationReport, CliError> {
    let mut rep = VerificationReport::new(case);
    rep.merge("", o.report).map_err(|e| CliError::Validation(e.to_string()))?;
    rep.env("result", o.result);
    Ok(rep)
}

fn noted<T>(r: Result<T, borelforge::verify::VerifyError>) -> Result<(), CliError> {
    r.map(|_| ()).map_err(|e| CliError::Validation(e.to_string()))
}

fn line(a: Rat, b: Rat) -> Region {
    Region::interval(a, b)
}

fn points(v: &[Rat]) -> SetDescriptor {
    SetDescriptor::points_1d(v)
}

// ---------------------------------------------------------------- 1

pub fn factorial_square_jet() -> Jet {
    let coeffs = (0..=40).map(|k| factorial(k) * factorial(k)).collect();
    Jet::new(vec![Rat::zero()], 40, coeffs).expect("valid jet")
}

fn borel_factorial_squares() -> Result<VerificationReport, CliError> {
    let t = Instant::now();
    let region = line(Rat::int(-1), Rat::int(1));
    let j = job("realize-borel", Some(&region), json!({ "jet": factorial_square_jet() }));
    let s = Settings { tol: Some(1e-9), max_order: Some(8), ..Settings::default() };
    let (o, _) = commands::realize_borel(&j, &s)?;
    let mut rep = absorb("borel-factorial-squares", o)?;
    noted(rep.at_most("runtime_s", 10.0, t.elapsed().as_secs_f64()))?;
    Ok(rep.finish())
}

// ---------------------------------------------------------------- 2

pub const MULTI_SEED: u64 = 20_240_611;

/// Five base points in `[0, 1]` at least `0.1` apart with order-4 jets, `|a| <= 10`.
pub fn random_jets(seed: u64) -> Vec<Jet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks: Vec<i64> = Vec::new();
    while picks.len() < 5 {
        let m = rng.random_range(50..=950i64);
        if picks.iter().all(|p| (p - m).abs() >= 100) {
            picks.push(m);
        }
    }
    picks
        .into_iter()
        .map(|m| {
            let a = (0..5).map(|_| rng.random_range(-10.0..=10.0)).collect();
            Jet::new(vec![Rat::new(m, 1000)], 4, a).expect("valid jet")
        })
        .collect()
}

fn multi_borel_random() -> Result<VerificationReport, CliError> {
    let region = line(Rat::zero(), Rat::one());
    let j = job("multi-borel", Some(&region), json!({ "points": random_jets(MULTI_SEED) }));
    let s = Settings { tol: Some(1e-10), ..Settings::default() };
    let (o, _) = commands::multi_borel_cmd(&j, &s)?;
    Ok(absorb("multi-borel-random", o)?.finish())
}

// ---------------------------------------------------------------- 3

pub fn point_plus_segment_field() -> JetField {
    let seg = Segment {
        axis: 0,
        level: Rat::zero(),
        from: Rat::new(1, 5),
        to: Rat::new(4, 5),
        transverse: vec![vec![Rat::one()], vec![Rat::zero(), Rat::one()]],
    };
    let pt = Jet::new(vec![Rat::zero(), Rat::zero()], 0, vec![5.0]).expect("valid jet");
    JetField::new(2, vec![pt], vec![seg]).expect("valid field")
}

fn point_plus_segment() -> Result<VerificationReport, CliError> {
    let region = Region::rect((Rat::int(-1), Rat::int(1)), (Rat::int(-1), Rat::int(1)));
    let j = job("extend-strata", Some(&region), json!({ "field": point_plus_segment_field() }));
    let s = Settings { tol: Some(1e-9), h0: Some(1e-3), ..Settings::default() };
    let (o, _) = commands::extend_strata(&j, &s)?;
    Ok(absorb("point-plus-segment", o)?.finish())
}

// ---------------------------------------------------------------- 4

pub const HORMANDER_WIDTHS: [(i64, i64); 4] = [(1, 10), (1, 20), (1, 40), (1, 80)];

fn hormander_certificate() -> Result<VerificationReport, CliError> {
    let region = line(Rat::int(-2), Rat::int(2));
    let inner = SetDescriptor::build(1, vec![], vec![(Rat::int(-1), Rat::int(1))], vec![]).map_err(|e| CliError::Validation(e.to_string()))?;
    let widths: Vec<Rat> = HORMANDER_WIDTHS.iter().map(|(a, b)| Rat::new(*a, *b)).collect();
    let mut rep = VerificationReport::new("hormander-certificate");
    let cert = hormander_cutoff(&inner, &widths, &region).map_err(|e| CliError::construction(e.to_string(), rep.clone()))?;
    noted(rep.at_most("fitted_constant", 10.0, cert.c))?;
    let worst = (1..=4).map(|k| cert.sup_norms[k] / cert.bound(k)).fold(0.0, f64::max);
    noted(rep.at_most("norm_to_bound_ratio", 1.0, worst))?;
    noted(rep.at_most("sup_of_cutoff", 1.0, cert.sup_norms[0]))?;
    let drift = cert.doubling_change.iter().take(5).cloned().fold(0.0, f64::max);
    noted(rep.at_most("grid_doubling_change", 0.01, drift))?;
    rep.env("sup_norms", to_value(&cert.sup_norms));
    Ok(rep.finish())
}

// ---------------------------------------------------------------- 5

fn power_terms(region: &Region, powers: impl Iterator<Item = u32>) -> Vec<SmoothExpr> {
    powers
        .map(|k| {
            let mut b = ExprBuilder::new(region);
            let x = b.coord(0);
            let p = b.pow(x, k);
            b.finish(p).expect("valid power")
        })
        .collect()
}

fn filtered_even_powers() -> Result<VerificationReport, CliError> {
    let region = line(Rat::int(-1), Rat::int(1));
    let prefix = CompletionPrefix::new(points(&[Rat::zero()]), power_terms(&region, (1..=6).map(|j| 2 * j)));
    let j = job("realize-filtered", Some(&region), json!({ "prefix": prefix }));
    let (o, art) = commands::realize_filtered_cmd(&j, &Settings::default())?;
    let mut rep = absorb("filtered-even-powers", o)?;
    // f really is the sum of its terms
    let mut worst: f64 = 0.0;
    for x in [-0.7, -1e-3, 0.0, 1e-6, 0.2, 0.9] {
        let parts: Vec<f64> = art.realization.terms.iter().map(|t| t.eval(&[x])).collect::<Result<_, _>>().map_err(|e| CliError::Validation(e.to_string()))?;
        let f = art.realization.expr.eval(&[x]).map_err(|e| CliError::Validation(e.to_string()))?;
        let mag: f64 = parts.iter().map(|v| v.abs()).sum();
        worst = worst.max((f - parts.iter().sum::<f64>()).abs() / mag.max(f64::MIN_POSITIVE));
    }
    noted(rep.at_most("sum_of_terms_rel_error", 1e-15, worst))?;
    Ok(rep.finish())
}

// ---------------------------------------------------------------- 6

fn cubic(region: &Region) -> SmoothExpr {
    let mut b = ExprBuilder::new(region);
    let x = b.coord(0);
    let a = b.affine(x, 1.0, -1.0);
    let c = b.affine(x, 1.0, -0.5);
    let p = b.mul(vec![x, a, c]);
    b.finish(p).expect("valid cubic")
}

fn cubic_under_two_points() -> Result<VerificationReport, CliError> {
    let region = line(Rat::new(-1, 2), Rat::new(3, 2));
    let prefix = CompletionPrefix::new(points(&[Rat::zero(), Rat::one()]), vec![cubic(&region)]);
    let j = job("realize-filtered", Some(&region), json!({ "prefix": prefix, "positive": { "eps": 0.1 } }));
    let (o, art) = commands::realize_filtered_cmd(&j, &Settings::default())?;
    let mut rep = absorb("cubic-under-two-points", o)?;
    let f = &art.realization.expr;
    let ev = |e: &SmoothExpr, x: f64| e.eval_derivs(&[x], 1).map_err(|err| CliError::Validation(err.to_string()));
    let (d0, d1) = (ev(f, 0.0)?[1], ev(f, 1.0)?[1]);
    noted(rep.close("slope_at_0", 0.5, d0, 1e-10))?;
    noted(rep.close("slope_at_1", 0.5, d1, 1e-10))?;
    let (mut pos, mut neg) = (false, false);
    for i in 0..10_000 {
        let x = 0.05 + 0.9 * (i as f64 + 0.5) / 10_000.0;
        let v = f.eval(&[x]).map_err(|e| CliError::Validation(e.to_string()))?;
        pos |= v > 0.0;
        neg |= v < 0.0;
    }
    noted(rep.record("sign_change_inside", json!(true), json!(pos && neg), 0.0, pos && neg))?;
    let p = art.positive.as_ref().expect("positivity was requested");
    let change = (ev(&p.expr, 0.0)?[1] - d0).abs().max((ev(&p.expr, 1.0)?[1] - d1).abs());
    noted(rep.at_most("positive_slope_change", 1e-12, change))?;
    Ok(rep.finish())
}

// ---------------------------------------------------------------- 7

fn filtration_verdicts() -> Result<VerificationReport, CliError> {
    let t = Instant::now();
    let s = Settings { j_max: Some(12), ..Settings::default() };
    let harmonic = PolyFiltration::harmonic((Rat::zero(), Rat::one()), Rat::one(), 0).map_err(|e| CliError::Validation(e.to_string()))?;
    let j = job("check-filtration", None, json!({ "filtration": harmonic }));
    let (o, art) = commands::check_filtration(&j, &s)?;
    let mut rep = absorb("filtration-verdicts", o)?;
    let fail = matches!(&art.verdict, FormVerdict::Fail { witness, .. } if !witness.is_empty());
    noted(rep.record("harmonic_is_form_fail", json!("FORM-FAIL"), to_value(&art.verdict)["verdict"].clone(), 0.0, fail))?;
    let n_witness = art.witness.as_ref().map_or(0, |w| w.terms.len());
    noted(rep.record("witness_terms", json!(12), json!(n_witness), 0.0, n_witness == 12))?;

    let power = PolyFiltration::power((Rat::int(-1), Rat::int(1)), vec![RootMult { root: Rat::zero(), mult: 1 }], vec![])
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let j = job("check-filtration", None, json!({ "filtration": power }));
    let (_, art) = commands::check_filtration(&j, &s)?;
    let ok = match &art.verdict {
        FormVerdict::Ok { indices, zero_set, .. } => {
            indices.len() == 12 && indices.iter().all(|ix| ix.k == Some(ix.j) && ix.d == ix.j) && zero_set == &vec![Rat::zero()]
        }
        FormVerdict::Fail { .. } => false,
    };
    noted(rep.record("powers_form_ok_with_k_d_equal_j", json!(true), to_value(&art.verdict), 0.0, ok))?;
    noted(rep.at_most("runtime_s", 1.0, t.elapsed().as_secs_f64()))?;
    Ok(rep.finish())
}

// ---------------------------------------------------------------- 8

/// `Z_i = {0} ∪ {1/n : i <= n <= 12}`.
pub fn harmonic_chain() -> ZeroChain {
    let sets = (1..=12)
        .map(|i| {
            let mut v = vec![Rat::zero()];
            v.extend((i..=12).map(|n| Rat::new(1, n)));
            points(&v)
        })
        .collect();
    ZeroChain::new(sets, None).expect("descending chain")
}

fn flat_chain() -> Result<VerificationReport, CliError> {
    let region = line(Rat::int(-1), Rat::int(2));
    let j = job("build-flat", Some(&region), json!({ "chain": harmonic_chain() }));
    let s = Settings { h0: Some(1e-3), max_order: Some(8), ..Settings::default() };
    let (o, art) = commands::build_flat(&j, &s)?;
    let mut rep = absorb("flat-chain", o)?;
    let mut flat = true;
    for dir in [1.0, -1.0] {
        let v = vanishing_order(&art.flat.expr, &[0.0], &[dir], 1e-5).map_err(|e| CliError::Validation(e.to_string()))?;
        flat &= v.infinite;
    }
    noted(rep.record("infinite_order_at_0", json!(true), json!(flat), 0.0, flat))?;
    let covered = (1..=12).all(|n| art.orders.iter().any(|(p, d, _)| (p[0] - 1.0 / n as f64).abs() < 1e-15 && *d == n));
    noted(rep.record("every_chain_point_measured", json!(true), json!(covered), 0.0, covered))?;
    Ok(rep.finish())
}

// ---------------------------------------------------------------- 9

pub fn exp_plus_x(region: &Region) -> SmoothExpr {
    let mut b = ExprBuilder::new(region);
    let x = b.coord(0);
    let e = b.exp(x);
    let root = b.add(vec![e, x]);
    b.finish(root).expect("valid start")
}

pub fn three_condition_list() -> Vec<Functional> {
    vec![
        Functional::Punctual { base: vec![1.0], alpha: vec![0], target: 5.0 },
        Functional::Moment { weight: None, bounds: vec![[0.0, 2.0]], target: 0.0 },
        Functional::Punctual { base: vec![1.5], alpha: vec![2], target: -2.0 },
    ]
}

fn three_conditions() -> Result<VerificationReport, CliError> {
    let region = line(Rat::int(-1), Rat::int(2));
    let f0 = exp_plus_x(&region);
    let z = points(&[Rat::zero()]);
    let payload = json!({ "f0": f0, "zero_set": z, "eps": 0.25, "conditions": three_condition_list() });
    let s = Settings { tol: Some(1e-8), ..Settings::default() };
    let (o, sol) = commands::solve_constraints_cmd(&job("solve-constraints", Some(&region), payload), &s)?;
    let mut rep = absorb("three-conditions", o)?;
    noted(rep.record("jet_order", json!(20), json!(sol.report.jet_order), 0.0, sol.report.jet_order >= 20))?;
    let dup = vec![
        Functional::Punctual { base: vec![1.0], alpha: vec![0], target: 5.0 },
        Functional::Punctual { base: vec![1.0], alpha: vec![0], target: 6.0 },
    ];
    let payload = json!({ "f0": f0, "zero_set": z, "eps": 0.25, "conditions": dup });
    let singular = match commands::solve_constraints_cmd(&job("solve-constraints", Some(&region), payload), &s) {
        Err(CliError::Construction { message, .. }) => message.contains("singular"),
        _ => false,
    };
    noted(rep.record("contradictory_duplicates_singular", json!(true), json!(singular), 0.0, singular))?;
    Ok(rep.finish())
}

// ---------------------------------------------------------------- 10

/// `exp(-1/x) exp(-1/(1-x))`.
pub fn two_sided_envelope(region: &Region) -> SmoothExpr {
    let mut b = ExprBuilder::new(region);
    let x = b.coord(0);
    let left = b.flat(x);
    let y = b.affine(x, -1.0, 1.0);
    let right = b.flat(y);
    let root = b.mul(vec![left, right]);
    b.finish(root).expect("valid envelope")
}

fn decay_unit_interval() -> Result<VerificationReport, CliError> {
    let region = line(Rat::zero(), Rat::one());
    let q = two_sided_envelope(&region);
    let terms = (1..=4)
        .map(|j| {
            let mut b = ExprBuilder::new(&region);
            let x = b.coord(0);
            let u = b.affine(x, 1.0, -0.5);
            let p = b.pow(u, 2 * j);
            let qn = b.embed(&q);
            let root = b.mul(vec![p, qn]);
            b.finish(root).expect("valid term")
        })
        .collect();
    let prefix = CompletionPrefix::new(points(&[Rat::new(1, 2)]), terms);
    let spec = DecaySpec { envelopes: vec![q; 4] };
    let j = job("decay-wrap", Some(&region), json!({ "prefix": prefix, "decay": spec }));
    let (o, out) = commands::decay_wrap_cmd(&j, &Settings::default())?;
    let mut rep = absorb("decay-unit-interval", o)?;
    let n = out.report.ladders.len();
    noted(rep.record("ladder_count", json!(8), json!(n), 0.0, n == 8))?;
    Ok(rep.finish())
}

// ---------------------------------------------------------------- 11

pub const ROUND_TRIP_SEED: u64 = 7;

/// An expression touching every node kind.
pub fn kitchen_sink() -> SmoothExpr {
    let region = line(Rat::int(-1), Rat::int(1));
    let mut b = ExprBuilder::new(&region);
    let x = b.coord(0);
    let c = b.constant(Rat::new(1, 3));
    let half = b.num(0.5);
    let sx = b.affine(x, 0.5, 0.1);
    let e = b.exp(sx);
    let bump = b.bump(sx);
    let fl = b.flat(x);
    let st = b.step(x);
    let cu = b.cutoff(x);
    let d = b.dist(points(&[Rat::new(1, 4)]));
    let g = b.gauge(points(&[Rat::new(-1, 2)]), 0.3);
    let h = b.hormander(x, vec![(Rat::new(-1, 4), Rat::new(1, 4))], vec![Rat::new(1, 10), Rat::new(1, 20)]);
    let p = b.pow(x, 3);
    let m = b.mul(vec![e, bump, c]);
    let den = b.affine(x, 0.25, 2.0);
    let q = b.div(p, den, 1.0);
    let n = b.neg(fl);
    let diff = b.sub(st, cu);
    let sum = b.sum(vec![(d, None), (g, Some(vec![vec![(-0.9, 0.2)]])), (h, None)]);
    let root = b.add(vec![m, q, n, diff, sum, half]);
    b.finish(root).expect("valid expression")
}

fn expr_round_trip() -> Result<VerificationReport, CliError> {
    let mut rep = VerificationReport::new("expr-round-trip");
    let e = kitchen_sink();
    let text = crate::output::expr_json(&e)?;
    let back: SmoothExpr = serde_json::from_str(&text).map_err(|err| CliError::Validation(err.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(ROUND_TRIP_SEED);
    let mut differ = 0;
    for _ in 0..1000 {
        let x = [rng.random_range(-1.0..=1.0)];
        let a = e.eval(&x).map_err(|err| CliError::Validation(err.to_string()))?;
        let b = back.eval(&x).map_err(|err| CliError::Validation(err.to_string()))?;
        if a.to_bits() != b.to_bits() {
            differ += 1;
        }
    }
    noted(rep.record("round_trip_bit_identical", json!(0), json!(differ), 0.0, differ == 0))?;
    let again = crate::output::expr_json(&back)?;
    noted(rep.record("json_is_stable", json!(true), json!(again == text), 0.0, again == text))?;
    // identical jobs give identical expression JSON
    let region = line(Rat::zero(), Rat::one());
    let j = job("multi-borel", Some(&region), json!({ "points": random_jets(MULTI_SEED) }));
    let a = commands::multi_borel_cmd(&j, &Settings::default())?.0;
    let b = commands::multi_borel_cmd(&j, &Settings::default())?.0;
    let same = crate::output::expr_json(a.expr.as_ref().expect("expr"))? == crate::output::expr_json(b.expr.as_ref().expect("expr"))?;
    noted(rep.record("deterministic_output", json!(true), json!(same), 0.0, same))?;
    rep.env("points", num(1000.0));
    Ok(rep.finish())
}
