//! One function per command: parse the payload, construct, then check the
//! result against oracles that do not reuse the construction's own bookkeeping.

use serde::Deserialize;
use serde_json::{json, Value};

use borelforge::constraints::{decay_wrap, solve_constraints, ConstraintError, ConstraintSolution, DecayRealization, DecaySpec, Functional};
use borelforge::filtration::{FiltrationError, FormVerdict, OrderLoci, PolyFiltration, Witness};
use borelforge::flatzero::{flat_zero_chain, ln_flat_value, FlatFunction, FlatZeroError, ZeroChain};
use borelforge::jets::{Jet, JetField};
use borelforge::quad::gauss_legendre;
use borelforge::realize::{
    borel_realize, borel_term_expr, ensure_positive, multi_borel, realize_filtered, whitney_extend_strata, BorelRealization, CompletionPrefix,
    FilteredRealization, Positivity, RealizeError, RealizeOptions, Schedule, StrataRealization,
};
use borelforge::smoothfn::series::{index_of, multi_indices};
use borelforge::verify::{fd_jet, num, vanishing_order, vanishing_order_with, VerificationReport, FD_MAX_ORDER};
use borelforge::{Rat, Region, SetDescriptor, SmoothExpr};

use crate::job::{parse_at, JobFile, Settings};
use crate::CliError;

pub const COMMANDS: [&str; 9] = [
    "realize-borel",
    "multi-borel",
    "extend-strata",
    "realize-filtered",
    "build-flat",
    "check-filtration",
    "solve-constraints",
    "decay-wrap",
    "verify",
];

/// Derivative orders checked by default.
pub const DEFAULT_MAX_ORDER: usize = 8;
/// Points per axis of the exact-zero and positivity sweeps.
const SWEEP_1D: usize = 10_000;
const SWEEP_2D: usize = 200;

/// What a successful construction hands back.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub command: String,
    pub expr: Option<SmoothExpr>,
    /// Command-specific data (schedules, verdicts, residual tables).
    pub result: Value,
    pub report: VerificationReport,
}

fn realize_failure(e: RealizeError, report: VerificationReport) -> CliError {
    match e {
        RealizeError::NotInterior(_)
        | RealizeError::Separation(..)
        | RealizeError::VanishingOrder { .. }
        | RealizeError::Incompatible(_)
        | RealizeError::Unsupported(_)
        | RealizeError::Dimension
        | RealizeError::Jet(_) => CliError::Validation(e.to_string()),
        _ => CliError::construction(e.to_string(), report),
    }
}

fn constraint_failure(e: ConstraintError, report: VerificationReport) -> CliError {
    match e {
        ConstraintError::InsideNeighbourhood { .. }
        | ConstraintError::BadFunctional { .. }
        | ConstraintError::Dimension
        | ConstraintError::Envelope { .. }
        | ConstraintError::Unsupported(_) => CliError::Validation(e.to_string()),
        ConstraintError::Realize(inner) => realize_failure(inner, report),
        _ => CliError::construction(e.to_string(), report),
    }
}

fn filtration_failure(e: FiltrationError) -> CliError {
    CliError::Validation(e.to_string())
}

fn flat_failure(e: FlatZeroError, report: VerificationReport) -> CliError {
    match e {
        FlatZeroError::Expr(_) => CliError::construction(e.to_string(), report),
        _ => CliError::Validation(e.to_string()),
    }
}

fn oracle_failure(e: impl std::fmt::Display, report: VerificationReport) -> CliError {
    CliError::construction(format!("oracle could not evaluate the output: {e}"), report)
}

fn need_region(job: &JobFile) -> Result<Region, CliError> {
    job.region.clone().ok_or_else(|| CliError::Validation("at region: this command needs a region".into()))
}

fn noted<T>(r: Result<T, borelforge::verify::VerifyError>) -> Result<(), CliError> {
    r.map(|_| ()).map_err(|e| CliError::Validation(e.to_string()))
}

fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1.0)
}

/// Grid over the region: `n` points per axis, cell centres.
fn sweep(region: &Region, n: usize) -> Vec<Vec<f64>> {
    let (lo, hi) = (region.lo(), region.hi());
    let axis = |i: usize| -> Vec<f64> { (0..n).map(|t| lo[i] + (hi[i] - lo[i]) * (t as f64 + 0.5) / n as f64).collect() };
    if region.dim() == 1 {
        axis(0).into_iter().map(|x| vec![x]).collect()
    } else {
        let ys = axis(1);
        axis(0).into_iter().flat_map(|x| ys.iter().map(move |y| vec![x, *y])).collect()
    }
}

fn axis_dirs(dim: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for i in 0..dim {
        for s in [1.0, -1.0] {
            let mut d = vec![0.0; dim];
            d[i] = s;
            out.push(d);
        }
    }
    out
}

pub fn dispatch(command: &str, job: &JobFile, s: &Settings) -> Result<Outcome, CliError> {
    if job.command != command {
        return Err(CliError::Validation(format!("at command: job is for `{}`, invoked as `{command}`", job.command)));
    }
    let s = s.merged(&job.tolerances);
    s.validate()?;
    match command {
        "realize-borel" => realize_borel(job, &s).map(|r| r.0),
        "multi-borel" => multi_borel_cmd(job, &s).map(|r| r.0),
        "extend-strata" => extend_strata(job, &s).map(|r| r.0),
        "realize-filtered" => realize_filtered_cmd(job, &s).map(|r| r.0),
        "build-flat" => build_flat(job, &s).map(|r| r.0),
        "check-filtration" => check_filtration(job, &s).map(|r| r.0),
        "solve-constraints" => solve_constraints_cmd(job, &s).map(|r| r.0),
        "decay-wrap" => decay_wrap_cmd(job, &s).map(|r| r.0),
        "verify" => verify_cmd(job, &s),
        other => Err(CliError::Validation(format!("at command: unknown command `{other}`"))),
    }
}

// ---------------------------------------------------------------- Borel

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BorelPayload {
    jet: Jet,
}

/// Every derivative of one Borel term at the base point, by finite
/// differences inside the term's plateau (scale `eps_k / 64`): the term's
/// own degree must match the jet, the rest must be zero. Returns the worst
/// `|fd - want| / (estimate + floor)`.
pub fn borel_fd_ratio(jet: &Jet, sched: &Schedule, region: &Region, max_order: usize) -> Result<(f64, usize), String> {
    let n = jet.order().min(max_order).min(FD_MAX_ORDER);
    let dim = jet.dim();
    let base = jet.base_f64();
    let idx = multi_indices(dim, n);
    let mut worst: f64 = 0.0;
    for k in 0..=n {
        let term = borel_term_expr(jet, k, sched.eps[k], region).map_err(|e| e.to_string())?;
        let fd = fd_jet(&term, &base, n, sched.eps[k] / 64.0).map_err(|e| e.to_string())?;
        for (i, alpha) in idx.iter().enumerate() {
            let deg: usize = alpha.iter().sum();
            let want = if deg == k { jet.coeffs()[index_of(dim, alpha)] } else { 0.0 };
            let floor = 1e-12 * want.abs().max(1.0);
            worst = worst.max((fd.values[i] - want).abs() / (fd.errors[i] + floor));
        }
    }
    Ok((worst, n))
}

fn check_point_jets(report: &mut VerificationReport, name: &str, f: &SmoothExpr, jets: &[Jet], tol: f64) -> Result<f64, CliError> {
    let mut worst: f64 = 0.0;
    for j in jets {
        let d = f.eval_derivs(&j.base_f64(), j.order()).map_err(|e| oracle_failure(e, report.clone()))?;
        for (got, want) in d.iter().zip(j.coeffs()) {
            worst = worst.max(rel_err(*got, *want));
        }
    }
    noted(report.at_most(name, tol, worst))?;
    Ok(worst)
}

pub fn realize_borel(job: &JobFile, s: &Settings) -> Result<(Outcome, BorelRealization), CliError> {
    let region = need_region(job)?;
    let p: BorelPayload = parse_at(&job.payload, "payload")?;
    let mut report = VerificationReport::new("realize-borel");
    let out = borel_realize(&p.jet, &region, &RealizeOptions::default()).map_err(|e| realize_failure(e, report.clone()))?;
    let tol = s.tol.unwrap_or(1e-9);
    check_point_jets(&mut report, "derivatives_rel_error", &out.expr, std::slice::from_ref(&p.jet), tol)?;
    let sched = &out.schedules[0];
    noted(report.at_most("tail_bound_ratio", 1.0, sched.worst_ratio()))?;
    let (ratio, n) = borel_fd_ratio(&p.jet, sched, &region, s.max_order.unwrap_or(DEFAULT_MAX_ORDER)).map_err(|e| oracle_failure(e, report.clone()))?;
    noted(report.at_most("fd_term_ratio", 1.0, ratio))?;
    report.env("fd_max_order", json!(n));
    let result = json!({ "schedule": sched, "cap": out.caps[0] });
    Ok((Outcome { command: "realize-borel".into(), expr: Some(out.expr.clone()), result, report: report.finish() }, out))
}

// ---------------------------------------------------------------- multi-Borel

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MultiPayload {
    points: Vec<Jet>,
}

/// Sweep points outside every support box where the value is not exactly 0.
pub fn nonzero_outside(f: &SmoothExpr, boxes: &[Vec<(f64, f64)>], region: &Region) -> Result<(usize, usize), borelforge::ExprError> {
    let n = if region.dim() == 1 { SWEEP_1D } else { SWEEP_2D };
    let mut outside = 0;
    let mut bad = 0;
    for p in sweep(region, n) {
        let inside = boxes.iter().any(|b| b.iter().zip(&p).all(|((lo, hi), x)| *x >= *lo && *x <= *hi));
        if !inside {
            outside += 1;
            if f.eval(&p)? != 0.0 {
                bad += 1;
            }
        }
    }
    Ok((bad, outside))
}

pub fn multi_borel_cmd(job: &JobFile, s: &Settings) -> Result<(Outcome, BorelRealization), CliError> {
    let region = need_region(job)?;
    let p: MultiPayload = parse_at(&job.payload, "payload")?;
    let field = JetField::points_only(p.points.clone()).map_err(|e| CliError::Validation(format!("at payload.points: {e}")))?;
    let mut report = VerificationReport::new("multi-borel");
    let out = multi_borel(&field, &region, &RealizeOptions::default()).map_err(|e| realize_failure(e, report.clone()))?;
    let tol = s.tol.unwrap_or(1e-10);
    check_point_jets(&mut report, "derivatives_rel_error", &out.expr, &p.points, tol)?;
    let worst = out.schedules.iter().map(Schedule::worst_ratio).fold(0.0, f64::max);
    noted(report.at_most("tail_bound_ratio", 1.0, worst))?;
    let boxes: Vec<Vec<(f64, f64)>> =
        p.points.iter().zip(&out.caps).map(|(j, c)| j.base_f64().iter().map(|b| (b - c, b + c)).collect()).collect();
    let (bad, outside) = nonzero_outside(&out.expr, &boxes, &region).map_err(|e| oracle_failure(e, report.clone()))?;
    noted(report.record("zero_outside_supports", json!(0), json!(bad), 0.0, bad == 0))?;
    report.env("outside_samples", json!(outside));
    let result = json!({ "schedules": out.schedules, "caps": out.caps });
    Ok((Outcome { command: "multi-borel".into(), expr: Some(out.expr.clone()), result, report: report.finish() }, out))
}

// ---------------------------------------------------------------- strata

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StrataPayload {
    field: JetField,
}

pub fn extend_strata(job: &JobFile, s: &Settings) -> Result<(Outcome, StrataRealization), CliError> {
    let region = need_region(job)?;
    let p: StrataPayload = parse_at(&job.payload, "payload")?;
    let mut report = VerificationReport::new("extend-strata");
    let out = whitney_extend_strata(&p.field, &region, &RealizeOptions::default()).map_err(|e| realize_failure(e, report.clone()))?;
    let tol = s.tol.unwrap_or(1e-9);
    check_point_jets(&mut report, "point_rel_error", &out.expr, p.field.points(), tol)?;
    // transverse derivatives along each segment, read off the output
    let mut worst: f64 = 0.0;
    for seg in p.field.segments() {
        let (a, b) = (seg.from.to_f64(), seg.to.to_f64());
        let lvl = seg.level.to_f64();
        for i in 0..21 {
            let t = a + (b - a) * i as f64 / 20.0;
            let pt = if seg.axis == 0 { [t, lvl] } else { [lvl, t] };
            let d = out.expr.eval_derivs(&pt, seg.order()).map_err(|e| oracle_failure(e, report.clone()))?;
            for k in 0..=seg.order() {
                let alpha = if seg.axis == 0 { [0, k] } else { [k, 0] };
                worst = worst.max(rel_err(d[index_of(2, &alpha)], seg.data(k, 0, t)));
            }
        }
    }
    noted(report.at_most("transverse_rel_error", tol, worst))?;
    // each segment term is flat where it ends, seen from inside the segment
    let h0 = s.h0.unwrap_or(1e-3);
    let mut weakest = f64::INFINITY;
    for (seg, term) in p.field.segments().iter().zip(&out.segment_terms) {
        let lvl = seg.level.to_f64();
        for (end, sign) in [(seg.from.to_f64(), 1.0), (seg.to.to_f64(), -1.0)] {
            let (pt, dir) = if seg.axis == 0 { ([end, lvl], [sign, 0.0]) } else { ([lvl, end], [0.0, sign]) };
            let v = vanishing_order(term, &pt, &dir, h0).map_err(|e| oracle_failure(e, report.clone()))?;
            weakest = weakest.min(v.order());
        }
    }
    if !p.field.segments().is_empty() {
        noted(report.record("endpoint_flatness", json!(">= 8 or infinite"), num(weakest), 0.0, weakest >= 8.0))?;
    }
    let result = json!({
        "rhos": out.rhos,
        "schedules": out.schedules,
        "point_residual": out.point_residual,
        "segment_residual": out.segment_residual,
    });
    Ok((Outcome { command: "extend-strata".into(), expr: Some(out.expr.clone()), result, report: report.finish() }, out))
}

// ---------------------------------------------------------------- filtered

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PositiveSpec {
    eps: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FilteredPayload {
    prefix: CompletionPrefix,
    #[serde(default)]
    positive: Option<PositiveSpec>,
}

/// Slack on remainder slopes.
pub const SLOPE_SLACK: f64 = 0.1;

/// Smallest measured order of `f - sum_{j <= n} g_j` over sampled points of
/// `Z` and axis directions, for each `n = 1..=N`; `INFINITY` when it
/// vanishes identically on the ladder.
pub fn remainder_orders(out: &FilteredRealization, prefix: &CompletionPrefix) -> Result<Vec<f64>, String> {
    let n_terms = prefix.terms.len();
    let pts = prefix.zero_set.sample_points(3);
    let mut orders = Vec::with_capacity(n_terms);
    for n in 1..=n_terms {
        // inside every plateau up to the next term
        let h0 = out.schedule.eps[n.min(n_terms - 1)] / 4.0;
        let mut least = f64::INFINITY;
        for p in &pts {
            for dir in axis_dirs(p.len()) {
                let v = vanishing_order_with(|x| Ok(out.remainder_at(&prefix.terms, n, x)?), p, &dir, h0).map_err(|e| e.to_string())?;
                least = least.min(v.order());
            }
        }
        orders.push(least);
    }
    Ok(orders)
}

/// Largest change of any derivative up to `order` at sampled points of `z`,
/// relative to `max(1, |value|)`.
pub fn jet_change(a: &SmoothExpr, b: &SmoothExpr, z: &SetDescriptor, order: usize) -> Result<f64, borelforge::ExprError> {
    let mut worst: f64 = 0.0;
    for p in z.sample_points(3) {
        let u = a.eval_derivs(&p, order)?;
        let v = b.eval_derivs(&p, order)?;
        for (x, y) in u.iter().zip(&v) {
            worst = worst.max(rel_err(*y, *x));
        }
    }
    Ok(worst)
}

pub struct FilteredArtifacts {
    pub prefix: CompletionPrefix,
    pub realization: FilteredRealization,
    pub positive: Option<Positivity>,
}

pub fn realize_filtered_cmd(job: &JobFile, _s: &Settings) -> Result<(Outcome, FilteredArtifacts), CliError> {
    let region = need_region(job)?;
    let p: FilteredPayload = parse_at(&job.payload, "payload")?;
    let mut report = VerificationReport::new("realize-filtered");
    let out = realize_filtered(&p.prefix, &region, &RealizeOptions::default()).map_err(|e| realize_failure(e, report.clone()))?;
    noted(report.at_most("tail_bound_ratio", 1.0, out.schedule.worst_ratio()))?;
    let orders = remainder_orders(&out, &p.prefix).map_err(|e| oracle_failure(e, report.clone()))?;
    for (i, o) in orders.iter().enumerate() {
        let n = i + 1;
        let ok = *o >= n as f64 - SLOPE_SLACK;
        noted(report.record(&format!("remainder_order_{n}"), num(n as f64 - SLOPE_SLACK), num(*o), 0.0, ok))?;
    }
    let mut expr = out.expr.clone();
    let mut positive = None;
    if let Some(ps) = &p.positive {
        let pos = ensure_positive(&out.expr, &p.prefix.zero_set, ps.eps, &region).map_err(|e| realize_failure(e, report.clone()))?;
        noted(report.record("positive_min_value", json!("> 0"), num(pos.min_value), 0.0, pos.min_value > 0.0))?;
        let change = jet_change(&out.expr, &pos.expr, &p.prefix.zero_set, 10).map_err(|e| oracle_failure(e, report.clone()))?;
        noted(report.at_most("positive_jet_change", 1e-12, change))?;
        expr = pos.expr.clone();
        positive = Some(pos);
    }
    let result = json!({
        "schedule": out.schedule,
        "constants": out.constants,
        "measured_orders": out.measured_orders,
        "remainder_orders": orders.iter().map(|o| num(*o)).collect::<Vec<_>>(),
        "positivity": positive.as_ref().map(|p| json!({"multiplier": p.multiplier, "min_value": p.min_value})),
    });
    let outcome = Outcome { command: "realize-filtered".into(), expr: Some(expr), result, report: report.finish() };
    Ok((outcome, FilteredArtifacts { prefix: p.prefix, realization: out, positive }))
}

// ---------------------------------------------------------------- flat chain

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FlatPayload {
    chain: ZeroChain,
}

/// Cap on the order asked of a chain point, as for the finite-difference oracle.
pub const FLAT_ORDER_CAP: usize = 8;

pub struct FlatArtifacts {
    pub chain: ZeroChain,
    pub flat: FlatFunction,
    /// `(point, depth, measured order)`.
    pub orders: Vec<(Vec<f64>, usize, f64)>,
}

pub fn build_flat(job: &JobFile, s: &Settings) -> Result<(Outcome, FlatArtifacts), CliError> {
    let region = need_region(job)?;
    let p: FlatPayload = parse_at(&job.payload, "payload")?;
    let mut report = VerificationReport::new("build-flat");
    let f = flat_zero_chain(&p.chain, &region).map_err(|e| flat_failure(e, report.clone()))?;
    let mut orders = Vec::new();
    if let Some(z1) = p.chain.sets().first() {
        // positivity off Z_1, in log form so values below the f64 range still count
        let n = if region.dim() == 1 { SWEEP_1D } else { SWEEP_2D };
        let mut off = 0usize;
        let mut bad = 0usize;
        for x in sweep(&region, n) {
            if z1.contains(&x) {
                continue;
            }
            off += 1;
            if !ln_flat_value(&p.chain, &f, &x).is_finite() {
                bad += 1;
            }
        }
        report.env("positivity_samples", json!(off));
        noted(report.record("positive_off_zero_set", json!(0), json!(bad), 0.0, bad == 0))?;
        let h0 = s.h0.unwrap_or(1e-3);
        let cap = s.max_order.unwrap_or(FLAT_ORDER_CAP);
        let mut worst_margin = f64::INFINITY;
        for pt in z1.sample_points(1) {
            let depth = p.chain.sets().iter().take_while(|z| z.contains(&pt)).count();
            let mut least = f64::INFINITY;
            for dir in axis_dirs(pt.len()) {
                let v = vanishing_order(&f.expr, &pt, &dir, h0).map_err(|e| oracle_failure(e, report.clone()))?;
                least = least.min(v.order());
            }
            worst_margin = worst_margin.min(least - (depth.min(cap) as f64 - SLOPE_SLACK));
            orders.push((pt, depth, least));
        }
        noted(report.record("order_at_chain_points", json!("min(depth, cap) - 0.1"), num(worst_margin), 0.0, worst_margin >= 0.0))?;
    }
    let result = json!({
        "scales": f.scales,
        "gauge_scale": f.gauge_scale,
        "orders": orders.iter().map(|(p, d, o)| json!({"point": p, "depth": d, "order": num(*o)})).collect::<Vec<_>>(),
    });
    let outcome = Outcome { command: "build-flat".into(), expr: Some(f.expr.clone()), result, report: report.finish() };
    Ok((outcome, FlatArtifacts { chain: p.chain, flat: f, orders }))
}

// ---------------------------------------------------------------- filtrations

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FiltrationPayload {
    filtration: Value,
}

/// Default number of levels inspected.
pub const DEFAULT_J_MAX: usize = 12;

pub struct FiltrationArtifacts {
    pub filtration: PolyFiltration,
    pub loci: OrderLoci,
    pub verdict: FormVerdict,
    pub witness: Option<Witness>,
}

/// Exact checks on a growth witness: `g_j(w_j) = j!` and the partial sum at
/// `w_N` is at least `N!`.
pub fn witness_checks(report: &mut VerificationReport, w: &Witness) -> Result<(), CliError> {
    let mut fact = Rat::one();
    let mut exact = true;
    let mut grows = true;
    for (j0, t) in w.terms.iter().enumerate() {
        let j = j0 + 1;
        fact = Rat(&fact.0 * Rat::int(j as i64).0);
        exact &= t.exact_value(&t.point).as_ref() == Some(&fact);
        grows &= w.partial_sum(j, &t.point).is_some_and(|s| s >= fact);
    }
    noted(report.record("witness_value_is_factorial", json!(true), json!(exact), 0.0, exact))?;
    noted(report.record("witness_partial_sum_at_least_factorial", json!(true), json!(grows), 0.0, grows))?;
    Ok(())
}

pub fn check_filtration(job: &JobFile, s: &Settings) -> Result<(Outcome, FiltrationArtifacts), CliError> {
    let p: FiltrationPayload = parse_at(&job.payload, "payload")?;
    let mut raw = p.filtration;
    if let Some((lo, hi)) = &s.window {
        match raw.as_object_mut() {
            Some(obj) => {
                obj.insert("window".into(), json!([lo, hi]));
            }
            None => return Err(CliError::Validation("at payload.filtration: expected an object".into())),
        }
    }
    let f: PolyFiltration = parse_at(&raw, "payload.filtration")?;
    let j_max = s.j_max.unwrap_or(DEFAULT_J_MAX);
    let i_max = s.i_max.unwrap_or(j_max as u32);
    if j_max == 0 || i_max == 0 {
        return Err(CliError::Validation("--i-max and --j-max must be at least 1".into()));
    }
    let mut report = VerificationReport::new("check-filtration");
    let loci = f.order_loci(i_max, j_max).map_err(filtration_failure)?;
    let verdict = f.necessary_form_check(j_max).map_err(filtration_failure)?;
    let witness = match &verdict {
        FormVerdict::Fail { .. } => match f.witness_unbounded(j_max) {
            Ok(w) => Some(w),
            Err(FiltrationError::NoWitness(_)) => None,
            Err(e) => return Err(filtration_failure(e)),
        },
        FormVerdict::Ok { .. } => None,
    };
    if let Some(w) = &witness {
        witness_checks(&mut report, w)?;
    }
    let witness_json = witness.as_ref().map(|w| {
        w.terms
            .iter()
            .map(|t| json!({"level": t.level, "point": t.point, "radius": t.radius, "scale": t.scale, "generator": t.generator}))
            .collect::<Vec<_>>()
    });
    let result = json!({ "order_loci": loci, "verdict": verdict, "witness": witness_json });
    let outcome = Outcome { command: "check-filtration".into(), expr: None, result, report: report.finish() };
    Ok((outcome, FiltrationArtifacts { filtration: f, loci, verdict, witness }))
}

// ---------------------------------------------------------------- constraints

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintPayload {
    f0: SmoothExpr,
    zero_set: SetDescriptor,
    eps: f64,
    conditions: Vec<Functional>,
}

/// Composite Gauss-Legendre panels for the moment oracle.
const MOMENT_PANELS: usize = 512;

/// `l(f)` recomputed without the solver's quadrature: derivatives for
/// punctual conditions, composite Gauss-Legendre for 1D moments.
pub fn functional_value(c: &Functional, index: usize, f: &SmoothExpr) -> Result<f64, String> {
    match c {
        Functional::Punctual { base, alpha, .. } => {
            let k: usize = alpha.iter().sum();
            let d = f.eval_derivs(base, k).map_err(|e| e.to_string())?;
            Ok(d[index_of(base.len(), alpha)])
        }
        Functional::Moment { weight, bounds, .. } if bounds.len() == 1 => {
            let [a, b] = bounds[0];
            let (nodes, weights) = gauss_legendre(16);
            let h = (b - a) / MOMENT_PANELS as f64;
            let mut acc = 0.0;
            for i in 0..MOMENT_PANELS {
                let mid = a + (i as f64 + 0.5) * h;
                for (t, w) in nodes.iter().zip(&weights) {
                    let x = [mid + 0.5 * h * t];
                    let wv = match weight {
                        Some(e) => e.eval(&x).map_err(|e| e.to_string())?,
                        None => 1.0,
                    };
                    acc += 0.5 * h * w * wv * f.eval(&x).map_err(|e| e.to_string())?;
                }
            }
            Ok(acc)
        }
        other => other.apply(index, f).map_err(|e| e.to_string()),
    }
}

pub fn solve_constraints_cmd(job: &JobFile, s: &Settings) -> Result<(Outcome, ConstraintSolution), CliError> {
    let p: ConstraintPayload = parse_at(&job.payload, "payload")?;
    if let Some(r) = &job.region {
        if r != p.f0.region() {
            return Err(CliError::Validation("at region: differs from the region of payload.f0".into()));
        }
    }
    let mut report = VerificationReport::new("solve-constraints");
    let sol = solve_constraints(&p.f0, &p.zero_set, p.eps, &p.conditions).map_err(|e| constraint_failure(e, report.clone()))?;
    let tol = s.tol.unwrap_or(borelforge::constraints::RESIDUAL_TOL);
    let mut residuals = Vec::with_capacity(p.conditions.len());
    for (i, c) in p.conditions.iter().enumerate() {
        let v = functional_value(c, i, &sol.expr).map_err(|e| oracle_failure(e, report.clone()))?;
        residuals.push(v - c.target());
    }
    let worst = residuals.iter().map(|r| r.abs()).fold(0.0, f64::max);
    noted(report.at_most("max_residual", tol, worst))?;
    let order = sol.report.jet_order;
    let mut change: f64 = 0.0;
    for pt in p.zero_set.sample_points(3) {
        let a = p.f0.eval_derivs(&pt, order).map_err(|e| oracle_failure(e, report.clone()))?;
        let b = sol.expr.eval_derivs(&pt, order).map_err(|e| oracle_failure(e, report.clone()))?;
        change = a.iter().zip(&b).map(|(u, v)| (u - v).abs()).fold(change, f64::max);
    }
    noted(report.at_most("jet_change_on_zero_set", 0.0, change))?;
    report.env("jet_order", json!(order));
    let result = json!({ "solver": sol.report, "residuals": residuals });
    Ok((Outcome { command: "solve-constraints".into(), expr: Some(sol.expr.clone()), result, report: report.finish() }, sol))
}

// ---------------------------------------------------------------- decay

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DecayPayload {
    prefix: CompletionPrefix,
    decay: DecaySpec,
}

pub fn decay_wrap_cmd(job: &JobFile, _s: &Settings) -> Result<(Outcome, DecayRealization), CliError> {
    let region = need_region(job)?;
    let p: DecayPayload = parse_at(&job.payload, "payload")?;
    let mut report = VerificationReport::new("decay-wrap");
    let out = decay_wrap(&p.prefix, &p.decay, &region, &RealizeOptions::default()).map_err(|e| constraint_failure(e, report.clone()))?;
    noted(report.at_most("tail_bound_ratio", 1.0, out.realization.schedule.worst_ratio()))?;
    for l in &out.report.ladders {
        // the maximum must sit before the last rung (all-zero ladders are bounded)
        let (argmax, max) = l.ratios.iter().enumerate().fold((0, -1.0), |acc, (i, &r)| if r > acc.1 { (i, r) } else { acc });
        let finite = l.ratios.iter().all(|r| r.is_finite());
        let ok = finite && !l.ratios.is_empty() && (max == 0.0 || argmax + 1 < l.ratios.len());
        noted(report.record(&format!("ratio_bounded_{}_{}", l.end, l.k), json!("max before the last rung"), json!({"argmax": argmax, "rungs": l.ratios.len(), "max": num(max)}), 0.0, ok),
        )?;
    }
    report.env("flag", json!(out.report.flag));
    let result = json!({ "decay": out.report, "schedule": out.realization.schedule });
    Ok((Outcome { command: "decay-wrap".into(), expr: Some(out.realization.expr.clone()), result, report: report.finish() }, out))
}

// ---------------------------------------------------------------- verify

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum VerifyCheck {
    /// Raw partials at a point, graded-lex, checked by propagation and by finite differences.
    Derivatives {
        at: Vec<f64>,
        expected: Vec<f64>,
        #[serde(default)]
        scale: Option<f64>,
    },
    VanishingOrder {
        at: Vec<f64>,
        dir: Vec<f64>,
        #[serde(default)]
        h0: Option<f64>,
        /// `null` asks for the infinite-order flag.
        min_order: Option<f64>,
    },
    SupNorm {
        window: Vec<[f64; 2]>,
        k: usize,
        max: f64,
        #[serde(default)]
        grid: Option<usize>,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifyPayload {
    expr: SmoothExpr,
    checks: Vec<VerifyCheck>,
}

fn verify_cmd(job: &JobFile, s: &Settings) -> Result<Outcome, CliError> {
    let p: VerifyPayload = parse_at(&job.payload, "payload")?;
    let e = &p.expr;
    let mut report = VerificationReport::new("verify");
    let tol = s.tol.unwrap_or(1e-9);
    for (i, c) in p.checks.iter().enumerate() {
        let at = |what: &str| CliError::Validation(format!("at payload.checks[{i}]: {what}"));
        match c {
            VerifyCheck::Derivatives { at: x, expected, scale } => {
                if x.len() != e.dim() {
                    return Err(at("point dimension"));
                }
                let n = (0..=borelforge::smoothfn::series::MAX_ORDER)
                    .find(|n| borelforge::smoothfn::series::table_len(e.dim(), *n) == expected.len())
                    .ok_or_else(|| at("expected length is not a full derivative table"))?;
                let d = e.eval_derivs(x, n).map_err(|err| at(&err.to_string()))?;
                let worst = d.iter().zip(expected).map(|(g, w)| rel_err(*g, *w)).fold(0.0, f64::max);
                noted(report.at_most(&format!("check_{i}_derivatives"), tol, worst))?;
                let m = n.min(s.max_order.unwrap_or(DEFAULT_MAX_ORDER)).min(FD_MAX_ORDER);
                let fd = fd_jet(e, x, m, scale.unwrap_or(1.0)).map_err(|err| at(&err.to_string()))?;
                let ok = (0..fd.values.len()).all(|j| fd.agrees(j, expected[j], 1e-8 * expected[j].abs().max(1.0)));
                noted(report.record(&format!("check_{i}_finite_differences"), json!(format!("orders <= {m}")), json!(fd.values), 0.0, ok))?;
            }
            VerifyCheck::VanishingOrder { at: x, dir, h0, min_order } => {
                if x.len() != e.dim() || dir.len() != e.dim() {
                    return Err(at("point or direction dimension"));
                }
                let v = vanishing_order(e, x, dir, h0.or(s.h0).unwrap_or(1e-3)).map_err(|err| at(&err.to_string()))?;
                let ok = match min_order {
                    Some(n) => v.at_least(*n, 0.0),
                    None => v.infinite,
                };
                let claim = min_order.map_or(json!("infinite"), |n| json!(n));
                noted(report.record(&format!("check_{i}_vanishing_order"), claim, num(v.order()), 0.0, ok))?;
            }
            VerifyCheck::SupNorm { window, k, max, grid } => {
                let w: Vec<(f64, f64)> = window.iter().map(|[a, b]| (*a, *b)).collect();
                let m = borelforge::verify::sup_norm(e, &w, *k, grid.unwrap_or(401)).map_err(|err| at(&err.to_string()))?;
                noted(report.at_most(&format!("check_{i}_sup_norm"), *max, m.value))?;
            }
        }
    }
    Ok(Outcome { command: "verify".into(), expr: None, result: json!({ "checks": p.checks.len() }), report: report.finish() })
}
