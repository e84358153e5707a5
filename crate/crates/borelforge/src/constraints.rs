//! Corrections by flat elements: finitely many linear conditions solved with
//! bumps kept off a neighbourhood of the zero set, and boundary decay for
//! filtered prefixes.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::quad::{simpson, simpson_2d, Quad, TOL};
use crate::rational::Rat;
use crate::realize::{realize_filtered, CompletionPrefix, FilteredRealization, RealizeError, RealizeOptions};
use crate::smoothfn::cutoff::hormander_node;
use crate::smoothfn::expr::{ExprBuilder, ExprError, NodeId, SmoothExpr};
use crate::smoothfn::series::index_of;
use crate::smoothfn::set::{Region, SetDescriptor};

/// Condition-number gate for the dictionary system.
pub const COND_MAX: f64 = 1e10;
/// Candidate bump centers scored per dictionary slot.
pub const CANDIDATES: usize = 64;
/// Residual bound promised by the solver.
pub const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, thiserror::Error)]
pub enum ConstraintError {
    #[error("condition {index}: base point {point:?} is at distance {distance:e} from Z, needs at least {eps:e}")]
    InsideNeighbourhood { index: usize, point: Vec<f64>, distance: f64, eps: f64 },
    #[error("system is singular (condition number {cond:e}); near-dependency of conditions {dependency:?}")]
    Singular { cond: f64, dependency: Vec<f64> },
    #[error("only {have} bump centers fit off the neighbourhood of Z, need {need}")]
    NoRoom { have: usize, need: usize },
    #[error("condition {0}: quadrature did not converge")]
    Quadrature(usize),
    #[error("condition {index}: {reason}")]
    BadFunctional { index: usize, reason: String },
    #[error("dimension mismatch")]
    Dimension,
    #[error("envelope {k}: {reason}")]
    Envelope { k: usize, reason: String },
    #[error("term {term} leaves the envelope class on the boundary collar: |g^({k})/q_{k}| = {ratio:e} at {at}")]
    Collar { term: usize, k: usize, at: f64, ratio: f64 },
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Realize(#[from] RealizeError),
}

fn unit_weight() -> Option<SmoothExpr> {
    None
}

/// A linear condition `l(f) = target`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Functional {
    /// `d^alpha f(base)`.
    Punctual { base: Vec<f64>, alpha: Vec<usize>, target: f64 },
    /// `integral of weight * f` over a box; weight 1 when omitted.
    Moment {
        #[serde(default = "unit_weight", skip_serializing_if = "Option::is_none")]
        weight: Option<SmoothExpr>,
        bounds: Vec<[f64; 2]>,
        target: f64,
    },
}

impl Functional {
    pub fn target(&self) -> f64 {
        match self {
            Functional::Punctual { target, .. } | Functional::Moment { target, .. } => *target,
        }
    }

    fn with_target(&self, t: f64) -> Functional {
        let mut c = self.clone();
        match &mut c {
            Functional::Punctual { target, .. } | Functional::Moment { target, .. } => *target = t,
        }
        c
    }

    fn validate(&self, index: usize, region: &Region) -> Result<(), ConstraintError> {
        let bad = |reason: &str| ConstraintError::BadFunctional { index, reason: reason.into() };
        match self {
            Functional::Punctual { base, alpha, target } => {
                if base.len() != region.dim() || alpha.len() != region.dim() {
                    return Err(ConstraintError::Dimension);
                }
                if !region.contains(base) {
                    return Err(bad("base point outside the region"));
                }
                if !target.is_finite() {
                    return Err(bad("target is not finite"));
                }
            }
            Functional::Moment { weight, bounds, target } => {
                if bounds.len() != region.dim() || weight.as_ref().is_some_and(|w| w.dim() != region.dim()) {
                    return Err(ConstraintError::Dimension);
                }
                let inside = bounds.iter().zip(region.lo().iter().zip(region.hi())).all(|([a, b], (lo, hi))| lo <= a && a < b && b <= hi);
                if !inside {
                    return Err(bad("integration box must be nonempty and inside the region"));
                }
                if !target.is_finite() {
                    return Err(bad("target is not finite"));
                }
            }
        }
        Ok(())
    }

    /// `l(f)`.
    pub fn apply(&self, index: usize, f: &SmoothExpr) -> Result<f64, ConstraintError> {
        match self {
            Functional::Punctual { base, alpha, .. } => {
                let k: usize = alpha.iter().sum();
                let d = f.eval_derivs(base, k)?;
                Ok(d[index_of(base.len(), alpha)])
            }
            Functional::Moment { weight, bounds, .. } => {
                let q = integrate(f, weight.as_ref(), bounds)?;
                if !q.converged || !q.value.is_finite() {
                    return Err(ConstraintError::Quadrature(index));
                }
                Ok(q.value)
            }
        }
    }
}

fn integrate(f: &SmoothExpr, w: Option<&SmoothExpr>, bounds: &[[f64; 2]]) -> Result<Quad, ConstraintError> {
    let err = std::cell::RefCell::new(None);
    let at = |p: &[f64]| -> f64 {
        let v = f.eval(p).and_then(|v| Ok(v * w.map_or(Ok(1.0), |w| w.eval(p))?));
        v.unwrap_or_else(|e| {
            err.borrow_mut().get_or_insert(e);
            0.0
        })
    };
    let q = match bounds {
        [x] => simpson(&|t: f64| at(&[t]), x[0], x[1], TOL),
        [x, y] => simpson_2d(&|s: f64, t: f64| at(&[s, t]), (x[0], x[1]), (y[0], y[1]), TOL),
        _ => return Err(ConstraintError::Dimension),
    };
    match err.into_inner() {
        Some(e) => Err(e.into()),
        None => Ok(q),
    }
}

/// One dictionary element: a bump on a box.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Bump {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Bump {
    fn node(&self, b: &mut ExprBuilder) -> NodeId {
        let mut factors = Vec::with_capacity(self.center.len());
        for (axis, c) in self.center.iter().enumerate() {
            let x = b.coord(axis);
            let u = b.affine(x, 1.0 / self.radius, -c / self.radius);
            factors.push(b.bump(u));
        }
        // peak value 1
        factors.push(b.num(std::f64::consts::E.powi(self.center.len() as i32)));
        b.mul(factors)
    }

    fn support(&self) -> Vec<(f64, f64)> {
        self.center.iter().map(|c| (c - self.radius, c + self.radius)).collect()
    }

    fn expr(&self, region: &Region) -> Result<SmoothExpr, ExprError> {
        let mut b = ExprBuilder::new(region);
        let n = self.node(&mut b);
        let s = b.sum(vec![(n, Some(vec![self.support()]))]);
        b.finish(s)
    }
}

/// Candidate centers on a grid of the region, with the largest box radius
/// that keeps the bump inside the region and off `U_(eps/2)(Z)`.
fn candidates(region: &Region, z: &SetDescriptor, eps: f64) -> Vec<Bump> {
    let dim = region.dim();
    let per_axis = if dim == 1 { CANDIDATES } else { (CANDIDATES as f64).sqrt() as usize };
    let (lo, hi) = (region.lo(), region.hi());
    let coord = |axis: usize, i: usize| lo[axis] + (hi[axis] - lo[axis]) * (i as f64 + 0.5) / per_axis as f64;
    let centers: Vec<Vec<f64>> = if dim == 1 {
        (0..per_axis).map(|i| vec![coord(0, i)]).collect()
    } else {
        (0..per_axis).flat_map(|i| (0..per_axis).map(move |k| (i, k))).map(|(i, k)| vec![coord(0, i), coord(1, k)]).collect()
    };
    // box corners sit sqrt(dim) radii away from the center
    let spread = (dim as f64).sqrt();
    centers
        .into_iter()
        .filter(|c| region.contains(c))
        .filter_map(|c| {
            let dz = if z.is_empty() { f64::INFINITY } else { z.distance(&c) };
            let room = (dz - 0.5 * eps) / spread;
            let r = 0.999 * room.min(region.boundary_distance(&c)).min(region.min_width() / 8.0);
            (r > 0.0 && r.is_finite()).then_some(Bump { center: c, radius: r })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub dictionary: Vec<Bump>,
    pub coefficients: Vec<f64>,
    /// `l_k(f) - c_k` on the assembled function.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub condition_number: f64,
    /// Largest change of any derivative of order <= `jet_order` at sampled points of `Z`.
    pub jet_change: f64,
    pub jet_order: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConstraintSolution {
    pub expr: SmoothExpr,
    pub report: ConstraintReport,
}

/// Chooses the dictionary for a condition list: one bump per condition,
/// greedily maximizing the part of its column orthogonal to those already
/// chosen. Depends on the conditions only, not on their targets.
pub fn build_dictionary(conds: &[Functional], z: &SetDescriptor, eps: f64, region: &Region) -> Result<(Vec<Bump>, DMatrix<f64>), ConstraintError> {
    let n = conds.len();
    let cands = candidates(region, z, eps);
    if cands.len() < n {
        return Err(ConstraintError::NoRoom { have: cands.len(), need: n });
    }
    let column = |bump: &Bump| -> Result<Vec<f64>, ConstraintError> {
        let e = bump.expr(region)?;
        conds.iter().enumerate().map(|(k, c)| c.apply(k, &e)).collect()
    };
    #[cfg(feature = "parallel")]
    let cols: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        cands.par_iter().map(column).collect::<Result<_, _>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let cols: Vec<Vec<f64>> = cands.iter().map(column).collect::<Result<_, _>>()?;

    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut picked: Vec<usize> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut best = (usize::MAX, -1.0);
        for (i, c) in cols.iter().enumerate() {
            if picked.contains(&i) {
                continue;
            }
            let mut r = DVector::from_column_slice(c);
            for q in &basis {
                let dot = q.dot(&r);
                r.axpy(-dot, q, 1.0);
            }
            let s = r.norm();
            // ties go to the earlier candidate, keeping the choice deterministic
            if s > best.1 {
                best = (i, s);
            }
        }
        let (i, _) = best;
        let mut r = DVector::from_column_slice(&cols[i]);
        for q in &basis {
            let dot = q.dot(&r);
            r.axpy(-dot, q, 1.0);
        }
        let norm = r.norm();
        if norm > 0.0 {
            basis.push(r / norm);
        }
        picked.push(i);
    }
    let a = DMatrix::from_fn(n, n, |k, j| cols[picked[j]][k]);
    Ok((picked.into_iter().map(|i| cands[i].clone()).collect(), a))
}

/// `f = f0 + sum c_a b_a` with `l_k(f) = c_k`; the bumps vanish on
/// `U_(eps/2)(Z)`, so every derivative of `f0` there is kept.
pub fn solve_constraints(f0: &SmoothExpr, z: &SetDescriptor, eps: f64, conds: &[Functional]) -> Result<ConstraintSolution, ConstraintError> {
    let region = f0.region().clone();
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(ConstraintError::Unsupported("eps must be positive".into()));
    }
    if !z.is_empty() && z.dim() != region.dim() {
        return Err(ConstraintError::Dimension);
    }
    for (k, c) in conds.iter().enumerate() {
        c.validate(k, &region)?;
        if let Functional::Punctual { base, .. } = c {
            let d = if z.is_empty() { f64::INFINITY } else { z.distance(base) };
            if d < eps {
                return Err(ConstraintError::InsideNeighbourhood { index: k, point: base.clone(), distance: d, eps });
            }
        }
    }
    let jet_order = if region.dim() == 1 { 20 } else { 8 };
    if conds.is_empty() {
        let report = ConstraintReport {
            dictionary: vec![],
            coefficients: vec![],
            residuals: vec![],
            max_residual: 0.0,
            condition_number: 1.0,
            jet_change: 0.0,
            jet_order,
        };
        return Ok(ConstraintSolution { expr: f0.clone(), report });
    }
    let (dict, a) = build_dictionary(conds, z, eps, &region)?;
    let svd = a.clone().svd(true, false);
    let sv = &svd.singular_values;
    let (imin, smin) = sv.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    let smax = sv.max();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(cond <= COND_MAX) {
        let u = svd.u.as_ref().expect("requested");
        let dependency = u.column(imin).iter().copied().collect();
        return Err(ConstraintError::Singular { cond, dependency });
    }
    let base: Vec<f64> = conds.iter().enumerate().map(|(k, c)| c.apply(k, f0)).collect::<Result<_, _>>()?;
    let rhs = DVector::from_iterator(conds.len(), conds.iter().zip(&base).map(|(c, v)| c.target() - v));
    let coef = a.col_piv_qr().solve(&rhs).ok_or(ConstraintError::Singular { cond, dependency: vec![] })?;

    let mut b = ExprBuilder::new(&region);
    let f0n = b.embed(f0);
    let mut terms = Vec::with_capacity(dict.len() + 1);
    terms.push((f0n, None));
    for (bump, c) in dict.iter().zip(coef.iter()) {
        let n = bump.node(&mut b);
        let k = b.num(*c);
        let t = b.mul(vec![k, n]);
        terms.push((t, Some(vec![bump.support()])));
    }
    let root = b.sum(terms);
    let expr = b.finish(root)?;

    let residuals: Vec<f64> = conds.iter().enumerate().map(|(k, c)| Ok(c.apply(k, &expr)? - c.target())).collect::<Result<_, ConstraintError>>()?;
    let max_residual = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let mut jet_change: f64 = 0.0;
    for p in z.sample_points(5) {
        if !region.contains(&p) {
            continue;
        }
        let before = f0.eval_derivs(&p, jet_order)?;
        let after = expr.eval_derivs(&p, jet_order)?;
        for (x, y) in before.iter().zip(&after) {
            jet_change = jet_change.max((x - y).abs());
        }
    }
    let report = ConstraintReport {
        dictionary: dict,
        coefficients: coef.iter().copied().collect(),
        residuals,
        max_residual,
        condition_number: cond,
        jet_change,
        jet_order,
    };
    Ok(ConstraintSolution { expr, report })
}

/// Same conditions with new targets.
pub fn retarget(conds: &[Functional], targets: &[f64]) -> Vec<Functional> {
    conds.iter().zip(targets).map(|(c, t)| c.with_target(*t)).collect()
}

/// Decay envelopes `q_0, ..., q_K`: `|f^(k)| <= C_k q_k` near the boundary.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecaySpec {
    pub envelopes: Vec<SmoothExpr>,
}

/// Smallest envelope value a ladder still samples.
const ENVELOPE_FLOOR: f64 = 1e-290;
/// Longest ladder.
const MAX_RUNGS: usize = 60;

/// Points approaching the end `end` of a 1D region geometrically.
fn ladder(region: &Region, end: usize) -> Vec<f64> {
    let (lo, hi) = (region.lo()[0], region.hi()[0]);
    let s = 0.25 * (hi - lo);
    (0..MAX_RUNGS)
        .map(|m| {
            let d = s * 0.5f64.powi(m as i32);
            if end == 0 {
                lo + d
            } else {
                hi - d
            }
        })
        .collect()
}

impl DecaySpec {
    pub fn order(&self) -> usize {
        self.envelopes.len().saturating_sub(1)
    }

    /// Samples positivity on the region and decay along both boundary ladders.
    pub fn validate(&self, region: &Region) -> Result<(), ConstraintError> {
        if region.dim() != 1 {
            return Err(ConstraintError::Unsupported("decay envelopes are implemented on the line".into()));
        }
        if self.envelopes.is_empty() {
            return Err(ConstraintError::Envelope { k: 0, reason: "no envelopes given".into() });
        }
        for (k, q) in self.envelopes.iter().enumerate() {
            if q.dim() != 1 {
                return Err(ConstraintError::Dimension);
            }
            for p in region.grid(201).into_iter().filter(|p| region.boundary_distance(p) > 0.0) {
                let v = q.eval(&p)?;
                if !(v > 0.0) || !v.is_finite() {
                    return Err(ConstraintError::Envelope { k, reason: format!("not positive at {}: {v:e}", p[0]) });
                }
            }
            for end in 0..2 {
                let vals: Vec<f64> = ladder(region, end).iter().map(|x| q.eval(&[*x])).collect::<Result<_, _>>()?;
                let first = vals[0];
                let last = *vals.last().expect("nonempty");
                if !(last < first) || last > 1e-3 * first.max(f64::MIN_POSITIVE) && last > 1e-12 {
                    return Err(ConstraintError::Envelope { k, reason: format!("does not tend to 0 at the {} end", ["left", "right"][end]) });
                }
            }
        }
        Ok(())
    }
}

/// `sup |f^(k)/q_k|` sampled along one boundary ladder.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RatioLadder {
    pub end: String,
    pub k: usize,
    pub points: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Rung holding the largest ratio.
    pub argmax: usize,
    /// All ratios finite and the maximum is not on the final rung.
    pub bounded: bool,
}

fn ratio_ladders(f: &SmoothExpr, spec: &DecaySpec, region: &Region) -> Result<Vec<RatioLadder>, ConstraintError> {
    let mut out = Vec::new();
    for end in 0..2 {
        for (k, q) in spec.envelopes.iter().enumerate() {
            let mut points = Vec::new();
            let mut ratios = Vec::new();
            for x in ladder(region, end) {
                let qv = q.eval(&[x])?;
                if qv < ENVELOPE_FLOOR {
                    break;
                }
                let d = f.eval_derivs(&[x], k)?[k];
                points.push(x);
                ratios.push((d / qv).abs());
            }
            let (argmax, max) = ratios.iter().enumerate().fold((0, -1.0), |acc, (i, &r)| if r > acc.1 { (i, r) } else { acc });
            let finite = ratios.iter().all(|r| r.is_finite());
            let bounded = finite && (max == 0.0 || argmax + 1 < ratios.len());
            out.push(RatioLadder { end: ["left", "right"][end].into(), k, points, ratios, argmax, bounded });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayReport {
    /// Collar width `c_j` used for term `j`.
    pub collars: Vec<f64>,
    pub ladders: Vec<RatioLadder>,
    pub bounded: bool,
    /// Decay is checked on sampled collars, not at the level of germs.
    pub flag: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayRealization {
    pub realization: FilteredRealization,
    pub report: DecayReport,
}

/// Replaces each `g_j` by `g_j (1 - t_j)`, with `t_j` a cutoff equal to 1
/// on the boundary collar of width `c_j = c_0 2^-j` and 0 beyond `2 c_j`,
/// then assembles the prefix with [`realize_filtered`].
pub fn decay_wrap(prefix: &CompletionPrefix, spec: &DecaySpec, region: &Region, opts: &RealizeOptions) -> Result<DecayRealization, ConstraintError> {
    spec.validate(region)?;
    let z = &prefix.zero_set;
    if z.dim() != 1 {
        return Err(ConstraintError::Dimension);
    }
    let (lo, hi) = (region.lo()[0], region.hi()[0]);
    // distance from Z to the boundary
    let room = z.intervals_1d().iter().map(|(a, b)| (a.to_f64() - lo).min(hi - b.to_f64())).fold(f64::INFINITY, f64::min);
    if !(room > 0.0) {
        return Err(ConstraintError::Unsupported("Z must stay away from the region boundary".into()));
    }
    // collars stay in the outer quarter of the gap, so terms are untouched near Z
    let c0 = (room / 8.0).min((hi - lo) / 8.0);
    let bounds = region.bounds_exact();
    let (rlo, rhi) = bounds[0].clone();
    let mut collars = Vec::with_capacity(prefix.terms.len());
    let mut terms = Vec::with_capacity(prefix.terms.len());
    for (idx, g) in prefix.terms.iter().enumerate() {
        let j = idx + 1;
        let c = c0 * 0.5f64.powi(j as i32);
        collars.push(c);
        let ce = Rat::from_f64(c).expect("finite");
        // 1 within c of either end, 0 beyond 2c
        let inner = SetDescriptor::build(1, vec![vec![rlo.clone()], vec![rhi.clone()]], vec![], vec![])
            .map_err(|e| ConstraintError::Unsupported(e.to_string()))?
            .fattened(&ce);
        let widths = vec![Rat(&ce.0 * Rat::new(2, 3).0), Rat(&ce.0 * Rat::new(1, 3).0)];
        let mut b = ExprBuilder::new(region);
        let t = hormander_node(&mut b, &inner, &widths).map_err(RealizeError::from)?;
        let one = b.num(1.0);
        let keep = b.sub(one, t);
        let gn = b.embed(g);
        let root = b.mul(vec![gn, keep]);
        terms.push(b.finish(root)?);
    }
    let wrapped = CompletionPrefix { zero_set: z.clone(), terms, orders: prefix.orders.clone() };
    let realization = realize_filtered(&wrapped, region, opts)?;
    let ladders = ratio_ladders(&realization.expr, spec, region)?;
    let bounded = ladders.iter().all(|l| l.bounded);
    if let Some(l) = ladders.iter().find(|l| !l.bounded) {
        let at = l.points.get(l.argmax).copied().unwrap_or(f64::NAN);
        return Err(ConstraintError::Collar { term: 0, k: l.k, at, ratio: l.ratios.get(l.argmax).copied().unwrap_or(f64::NAN) });
    }
    let report = DecayReport { collars, ladders, bounded, flag: "collar-verified only".into() };
    Ok(DecayRealization { realization, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(a: i64, b: i64) -> Region {
        Region::interval(Rat::int(a), Rat::int(b))
    }

    fn smooth_start(region: &Region) -> SmoothExpr {
        // 1 + x + x^2/2 times a wide bump: generic values everywhere
        let mut b = ExprBuilder::new(region);
        let x = b.coord(0);
        let e = b.exp(x);
        let root = b.add(vec![e, x]);
        b.finish(root).unwrap()
    }

    fn three_conditions() -> Vec<Functional> {
        vec![
            Functional::Punctual { base: vec![1.0], alpha: vec![0], target: 5.0 },
            Functional::Moment { weight: None, bounds: vec![[0.0, 2.0]], target: 0.0 },
            Functional::Punctual { base: vec![1.5], alpha: vec![2], target: -2.0 },
        ]
    }

    #[test]
    fn three_conditions_are_met() {
        let r = line(-1, 2);
        let f0 = smooth_start(&r);
        let z = SetDescriptor::points_1d(&[Rat::zero()]);
        let s = solve_constraints(&f0, &z, 0.25, &three_conditions()).unwrap();
        assert!(s.report.max_residual <= RESIDUAL_TOL, "{:?}", s.report);
        assert_eq!(s.report.jet_change, 0.0);
    }

    #[test]
    fn contradictory_duplicates_are_singular() {
        let r = line(-1, 2);
        let f0 = smooth_start(&r);
        let z = SetDescriptor::points_1d(&[Rat::zero()]);
        let conds = vec![
            Functional::Punctual { base: vec![1.0], alpha: vec![0], target: 5.0 },
            Functional::Punctual { base: vec![1.0], alpha: vec![0], target: 6.0 },
        ];
        match solve_constraints(&f0, &z, 0.25, &conds) {
            Err(ConstraintError::Singular { dependency, .. }) => {
                assert!((dependency[0] + dependency[1]).abs() < 1e-8, "{dependency:?}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn base_point_near_z_is_rejected() {
        let r = line(-1, 2);
        let f0 = smooth_start(&r);
        let z = SetDescriptor::points_1d(&[Rat::zero()]);
        let conds = vec![Functional::Punctual { base: vec![0.1], alpha: vec![0], target: 1.0 }];
        assert!(matches!(solve_constraints(&f0, &z, 0.25, &conds), Err(ConstraintError::InsideNeighbourhood { .. })));
    }

    #[test]
    fn empty_conditions_keep_input() {
        let r = line(-1, 2);
        let f0 = smooth_start(&r);
        let s = solve_constraints(&f0, &SetDescriptor::empty(1), 0.1, &[]).unwrap();
        assert_eq!(s.expr, f0);
    }

    #[test]
    fn functional_json_rejects_unknown_fields() {
        let ok = r#"{"kind":"punctual","base":[1.0],"alpha":[0],"target":5}"#;
        assert!(serde_json::from_str::<Functional>(ok).is_ok());
        let bad = r#"{"kind":"punctual","base":[1.0],"alpha":[0],"target":5,"x":1}"#;
        assert!(serde_json::from_str::<Functional>(bad).is_err());
    }

    fn envelope(region: &Region) -> SmoothExpr {
        let mut b = ExprBuilder::new(region);
        let x = b.coord(0);
        let left = b.flat(x);
        let y = b.affine(x, -1.0, 1.0);
        let right = b.flat(y);
        let root = b.mul(vec![left, right]);
        b.finish(root).unwrap()
    }

    #[test]
    fn decay_on_unit_interval() {
        let r = line(0, 1);
        let q = envelope(&r);
        let terms = (1..=4)
            .map(|j| {
                let mut b = ExprBuilder::new(&r);
                let x = b.coord(0);
                let u = b.affine(x, 1.0, -0.5);
                let p = b.pow(u, 2 * j);
                let qn = b.embed(&q);
                let root = b.mul(vec![p, qn]);
                b.finish(root).unwrap()
            })
            .collect();
        let prefix = CompletionPrefix::new(SetDescriptor::points_1d(&[Rat::new(1, 2)]), terms);
        let spec = DecaySpec { envelopes: vec![q.clone(); 4] };
        let out = decay_wrap(&prefix, &spec, &r, &RealizeOptions::default()).unwrap();
        assert!(out.report.bounded);
        assert_eq!(out.report.ladders.len(), 8);
        for l in &out.report.ladders {
            assert!(l.argmax + 1 < l.ratios.len() || l.ratios.iter().all(|v| *v == 0.0), "{l:?}");
        }
        assert_eq!(out.report.flag, "collar-verified only");
    }

    #[test]
    fn linear_in_targets() {
        let r = line(-1, 2);
        let f0 = smooth_start(&r);
        let z = SetDescriptor::points_1d(&[Rat::zero()]);
        let c = three_conditions();
        let c2 = retarget(&c, &[1.0, 2.0, 3.0]);
        let mid = retarget(&c, &[3.0, 1.0, 0.5]);
        let a = solve_constraints(&f0, &z, 0.25, &c).unwrap();
        let b = solve_constraints(&f0, &z, 0.25, &c2).unwrap();
        let m = solve_constraints(&f0, &z, 0.25, &mid).unwrap();
        assert_eq!(a.report.dictionary, m.report.dictionary);
        for x in [-0.5, 0.4, 1.0, 1.3, 1.9] {
            let avg = 0.5 * (a.expr.eval(&[x]).unwrap() + b.expr.eval(&[x]).unwrap());
            assert!((avg - m.expr.eval(&[x]).unwrap()).abs() < 1e-10);
        }
    }
}
