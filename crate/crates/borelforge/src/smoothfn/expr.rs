//! Immutable expression DAG with Taylor-mode evaluation.

use std::rc::Rc;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::mollify::{Profile, MAX_PROFILE_DERIV};
use super::series::{Series, MAX_ORDER};
use super::set::{Region, SetDescriptor};
use super::univariate::{bump_at, cutoff_at, exp_at, flat_at, recip_at, step_at};
use crate::rational::Rat;

pub type NodeId = usize;

/// A union of closed boxes outside which a sum term is identically zero.
pub type Support = Vec<Vec<[Rat; 2]>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub node: NodeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<Support>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Node {
    Coord { axis: usize },
    Const { value: Rat },
    Add { args: Vec<NodeId> },
    Sub { a: NodeId, b: NodeId },
    Mul { args: Vec<NodeId> },
    /// `a / b`, valid where `|b| >= floor`.
    Div { a: NodeId, b: NodeId, floor: Rat },
    Neg { a: NodeId },
    /// `scale * a + shift`
    Affine { a: NodeId, scale: Rat, shift: Rat },
    Pow { a: NodeId, exp: u32 },
    Exp { a: NodeId },
    /// `exp(-1/(1-t^2))` on `|t| < 1`, else 0.
    Bump { a: NodeId },
    /// `exp(-1/t)` on `t > 0`, else 0.
    Flat { a: NodeId },
    /// Smoothstep, 0 below 0 and 1 above 1.
    Step { a: NodeId },
    /// 1 on `|t| <= 1/2`, 0 on `|t| >= 1`.
    Cutoff { a: NodeId },
    /// Smoothed distance to a set; smooth off the set, reads 0 on it.
    Dist { set: SetDescriptor },
    /// `exp(-scale/dist)`: flat on the set, 1 for the empty set.
    Gauge { set: SetDescriptor, scale: Rat },
    /// Indicator of `inner` smoothed by bumps of the given widths, applied to `a`.
    Hormander { a: NodeId, inner: Vec<[Rat; 2]>, widths: Vec<Rat> },
    Sum { terms: Vec<Term> },
}

impl Node {
    pub fn children(&self) -> Vec<NodeId> {
        match self {
            Node::Coord { .. } | Node::Const { .. } | Node::Dist { .. } | Node::Gauge { .. } => vec![],
            Node::Add { args } | Node::Mul { args } => args.clone(),
            Node::Sub { a, b } | Node::Div { a, b, .. } => vec![*a, *b],
            Node::Neg { a }
            | Node::Affine { a, .. }
            | Node::Pow { a, .. }
            | Node::Exp { a }
            | Node::Bump { a }
            | Node::Flat { a }
            | Node::Step { a }
            | Node::Cutoff { a }
            | Node::Hormander { a, .. } => vec![*a],
            Node::Sum { terms } => terms.iter().map(|t| t.node).collect(),
        }
    }

    fn shifted(&self, off: usize) -> Node {
        let mut n = self.clone();
        match &mut n {
            Node::Coord { .. } | Node::Const { .. } | Node::Dist { .. } | Node::Gauge { .. } => {}
            Node::Add { args } | Node::Mul { args } => args.iter_mut().for_each(|a| *a += off),
            Node::Sub { a, b } | Node::Div { a, b, .. } => {
                *a += off;
                *b += off;
            }
            Node::Neg { a }
            | Node::Affine { a, .. }
            | Node::Pow { a, .. }
            | Node::Exp { a }
            | Node::Bump { a }
            | Node::Flat { a }
            | Node::Step { a }
            | Node::Cutoff { a }
            | Node::Hormander { a, .. } => *a += off,
            Node::Sum { terms } => terms.iter_mut().for_each(|t| t.node += off),
        }
        n
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("point {0:?} is outside the region")]
    OutsideRegion(Vec<f64>),
    #[error("point has {got} coordinates, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("derivative order {k} exceeds the maximum {max}")]
    OrderTooHigh { k: usize, max: usize },
    #[error("denominator at node {node} is {value:e}, below its certified floor {floor:e}")]
    Denominator { node: NodeId, value: f64, floor: f64 },
    #[error("cutoff derivative order {k} exceeds the tabulated maximum {max}")]
    CutoffOrder { k: usize, max: usize },
    #[error("node {node}: {reason}")]
    BadNode { node: NodeId, reason: String },
    #[error("unsupported expression version {0}")]
    Version(u32),
}

/// Compiled smoothed indicator along one variable.
#[derive(Debug)]
struct Smoothed {
    inner: Vec<(f64, f64)>,
    fat: Vec<(f64, f64)>,
    scale: f64,
    profile: Arc<Profile>,
}

impl Smoothed {
    fn coeffs(&self, u0: f64, k: usize) -> Result<Vec<f64>, ExprError> {
        let mut c = vec![0.0; k + 1];
        if self.inner.iter().any(|(a, b)| u0 >= *a && u0 <= *b) {
            c[0] = 1.0;
            return Ok(c);
        }
        let h = self.profile.half_support();
        for (a, b) in &self.fat {
            for (edge, sign) in [(*a, 1.0), (*b, -1.0)] {
                let u = (u0 - edge) / self.scale;
                c[0] += sign * self.profile.cdf(u);
                if u <= -h || u >= h {
                    continue;
                }
                let mut fact = 1.0;
                for (j, cj) in c.iter_mut().enumerate().skip(1) {
                    fact *= j as f64;
                    let d = self
                        .profile
                        .density_deriv(j - 1, u)
                        .ok_or(ExprError::CutoffOrder { k: j, max: MAX_PROFILE_DERIV + 1 })?;
                    *cj += sign * d / (self.scale.powi(j as i32) * fact);
                }
            }
        }
        c[0] = c[0].clamp(0.0, 1.0);
        Ok(c)
    }
}

#[derive(Debug)]
enum Op {
    Coord(usize),
    Const(f64),
    Add(Vec<usize>),
    Sub(usize, usize),
    Mul(Vec<usize>),
    Div(usize, usize, f64),
    Neg(usize),
    Affine(usize, f64, f64),
    Pow(usize, u32),
    Exp(usize),
    Bump(usize),
    Flat(usize),
    Step(usize),
    Cutoff(usize),
    Dist(SetDescriptor),
    Gauge(SetDescriptor, f64),
    Smoothed(usize, Smoothed),
    Sum(Vec<(usize, Option<Vec<Vec<(f64, f64)>>>)>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExprRepr {
    version: u32,
    region: Region,
    nodes: Vec<Node>,
    root: NodeId,
}

/// A smooth function on a region, stored as a topologically ordered DAG.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "ExprRepr", into = "ExprRepr")]
pub struct SmoothExpr {
    repr: ExprRepr,
    tape: Arc<Vec<Op>>,
}

impl PartialEq for SmoothExpr {
    fn eq(&self, other: &SmoothExpr) -> bool {
        self.repr == other.repr
    }
}

impl From<SmoothExpr> for ExprRepr {
    fn from(e: SmoothExpr) -> ExprRepr {
        e.repr
    }
}

fn bad(node: NodeId, reason: impl Into<String>) -> ExprError {
    ExprError::BadNode { node, reason: reason.into() }
}

fn boxes_f64(s: &Support) -> Vec<Vec<(f64, f64)>> {
    s.iter().map(|b| b.iter().map(|[a, c]| (a.to_f64(), c.to_f64())).collect()).collect()
}

fn compile(r: &ExprRepr) -> Result<Vec<Op>, ExprError> {
    if r.version != 1 {
        return Err(ExprError::Version(r.version));
    }
    let dim = r.region.dim();
    if r.nodes.is_empty() || r.root >= r.nodes.len() {
        return Err(bad(r.root, "root out of range"));
    }
    let mut tape = Vec::with_capacity(r.nodes.len());
    for (i, n) in r.nodes.iter().enumerate() {
        if n.children().iter().any(|c| *c >= i) {
            return Err(bad(i, "child does not precede its parent"));
        }
        let op = match n {
            Node::Coord { axis } => {
                if *axis >= dim {
                    return Err(bad(i, format!("axis {axis} in dimension {dim}")));
                }
                Op::Coord(*axis)
            }
            Node::Const { value } => Op::Const(value.to_f64()),
            Node::Add { args } => Op::Add(args.clone()),
            Node::Sub { a, b } => Op::Sub(*a, *b),
            Node::Mul { args } => Op::Mul(args.clone()),
            Node::Div { a, b, floor } => {
                if !floor.is_positive() {
                    return Err(bad(i, "division floor must be positive"));
                }
                Op::Div(*a, *b, floor.to_f64())
            }
            Node::Neg { a } => Op::Neg(*a),
            Node::Affine { a, scale, shift } => Op::Affine(*a, scale.to_f64(), shift.to_f64()),
            Node::Pow { a, exp } => Op::Pow(*a, *exp),
            Node::Exp { a } => Op::Exp(*a),
            Node::Bump { a } => Op::Bump(*a),
            Node::Flat { a } => Op::Flat(*a),
            Node::Step { a } => Op::Step(*a),
            Node::Cutoff { a } => Op::Cutoff(*a),
            Node::Dist { set } => {
                if set.dim() != dim || set.is_empty() {
                    return Err(bad(i, "distance needs a nonempty set of the region's dimension"));
                }
                Op::Dist(set.clone())
            }
            Node::Gauge { set, scale } => {
                if set.dim() != dim {
                    return Err(bad(i, "gauge set dimension mismatch"));
                }
                if !scale.is_positive() {
                    return Err(bad(i, "gauge scale must be positive"));
                }
                Op::Gauge(set.clone(), scale.to_f64())
            }
            Node::Hormander { a, inner, widths } => Op::Smoothed(*a, smoothed(i, inner, widths)?),
            Node::Sum { terms } => {
                let mut out = Vec::with_capacity(terms.len());
                for t in terms {
                    if let Some(s) = &t.support {
                        for b in s {
                            if b.len() != dim || b.iter().any(|[lo, hi]| lo > hi) {
                                return Err(bad(i, "malformed support box"));
                            }
                        }
                    }
                    out.push((t.node, t.support.as_ref().map(boxes_f64)));
                }
                Op::Sum(out)
            }
        };
        tape.push(op);
    }
    Ok(tape)
}

fn smoothed(i: NodeId, inner: &[[Rat; 2]], widths: &[Rat]) -> Result<Smoothed, ExprError> {
    if widths.is_empty() || widths.len() > 12 {
        return Err(bad(i, "between 1 and 12 widths are required"));
    }
    if widths.iter().any(|w| !w.is_positive()) || widths.windows(2).any(|w| w[1] > w[0]) {
        return Err(bad(i, "widths must be positive and nonincreasing"));
    }
    if inner.iter().any(|[a, b]| a > b) {
        return Err(bad(i, "reversed inner interval"));
    }
    let d1 = widths[0].to_f64();
    let ratios: Vec<f64> = widths.iter().map(|w| w.to_f64() / d1).collect();
    let total: f64 = widths.iter().map(Rat::to_f64).sum();
    let mut iv: Vec<(f64, f64)> = inner.iter().map(|[a, b]| (a.to_f64(), b.to_f64())).collect();
    iv.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut fat: Vec<(f64, f64)> = Vec::new();
    for (a, b) in &iv {
        let (lo, hi) = (a - 0.5 * total, b + 0.5 * total);
        match fat.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => fat.push((lo, hi)),
        }
    }
    Ok(Smoothed { inner: iv, fat, scale: d1, profile: Profile::shared(&ratios) })
}

impl TryFrom<ExprRepr> for SmoothExpr {
    type Error = ExprError;

    fn try_from(repr: ExprRepr) -> Result<SmoothExpr, ExprError> {
        let tape = compile(&repr)?;
        Ok(SmoothExpr { repr, tape: Arc::new(tape) })
    }
}

struct Ctx<'a> {
    tape: &'a [Op],
    x: &'a [f64],
    k: usize,
    memo: Vec<Option<Rc<Series>>>,
}

impl Ctx<'_> {
    fn zero(&self) -> Series {
        Series::zero(self.x.len(), self.k)
    }

    fn coords(&self) -> Vec<Series> {
        (0..self.x.len()).map(|i| Series::variable(self.x.len(), self.k, i, self.x[i])).collect()
    }

    fn uni(&mut self, a: usize, g: impl Fn(f64, usize) -> Vec<f64>) -> Result<Series, ExprError> {
        let s = self.node(a)?;
        Ok(s.compose(&g(s.value(), self.k)))
    }

    fn node(&mut self, id: usize) -> Result<Rc<Series>, ExprError> {
        if let Some(s) = &self.memo[id] {
            return Ok(s.clone());
        }
        let dim = self.x.len();
        let k = self.k;
        let out = match &self.tape[id] {
            Op::Coord(axis) => Series::variable(dim, k, *axis, self.x[*axis]),
            Op::Const(v) => Series::constant(dim, k, *v),
            Op::Add(args) => {
                let mut acc = self.zero();
                for a in args {
                    acc.add_assign(&*self.node(*a)?);
                }
                acc
            }
            Op::Sub(a, b) => self.node(*a)?.sub(&*self.node(*b)?),
            Op::Mul(args) => {
                let mut acc = Series::constant(dim, k, 1.0);
                for a in args {
                    acc = acc.mul(&*self.node(*a)?);
                    if acc.is_zero() {
                        break;
                    }
                }
                acc
            }
            Op::Div(a, b, floor) => {
                let den = self.node(*b)?;
                if !(den.value().abs() >= *floor) {
                    return Err(ExprError::Denominator { node: id, value: den.value(), floor: *floor });
                }
                let inv = den.compose(&recip_at(den.value(), k));
                self.node(*a)?.mul(&inv)
            }
            Op::Neg(a) => self.node(*a)?.scale(-1.0),
            Op::Affine(a, s, t) => self.node(*a)?.scale(*s).add_const(*t),
            Op::Pow(a, n) => self.node(*a)?.powi(*n),
            Op::Exp(a) => self.uni(*a, exp_at)?,
            Op::Bump(a) => self.uni(*a, bump_at)?,
            Op::Flat(a) => self.uni(*a, flat_at)?,
            Op::Step(a) => self.uni(*a, step_at)?,
            Op::Cutoff(a) => self.uni(*a, cutoff_at)?,
            Op::Dist(set) => set.soft_distance_series(&self.coords()).unwrap_or_else(|| self.zero()),
            Op::Gauge(set, scale) => {
                if set.is_empty() {
                    Series::constant(dim, k, 1.0)
                } else {
                    match set.soft_distance_series(&self.coords()) {
                        None => self.zero(),
                        Some(d) => {
                            let u = d.scale(1.0 / scale);
                            u.compose(&flat_at(u.value(), k))
                        }
                    }
                }
            }
            Op::Smoothed(a, sm) => {
                let s = self.node(*a)?;
                s.compose(&sm.coeffs(s.value(), k)?)
            }
            Op::Sum(terms) => {
                let mut acc = self.zero();
                for (node, support) in terms {
                    if let Some(boxes) = support {
                        let inside = boxes.iter().any(|b| b.iter().zip(self.x).all(|((lo, hi), v)| *v >= *lo && *v <= *hi));
                        if !inside {
                            continue;
                        }
                    }
                    acc.add_assign(&*self.node(*node)?);
                }
                acc
            }
        };
        let out = Rc::new(out);
        self.memo[id] = Some(out.clone());
        Ok(out)
    }
}

impl SmoothExpr {
    pub fn region(&self) -> &Region {
        &self.repr.region
    }

    pub fn dim(&self) -> usize {
        self.repr.region.dim()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.repr.nodes
    }

    pub fn root(&self) -> NodeId {
        self.repr.root
    }

    pub fn constant(region: &Region, v: Rat) -> SmoothExpr {
        let mut b = ExprBuilder::new(region);
        let c = b.constant(v);
        b.finish(c).expect("constant is valid")
    }

    pub fn zero(region: &Region) -> SmoothExpr {
        SmoothExpr::constant(region, Rat::zero())
    }

    /// Same function on another region of equal dimension.
    pub fn with_region(&self, region: &Region) -> Result<SmoothExpr, ExprError> {
        if region.dim() != self.dim() {
            return Err(ExprError::Dimension { expected: self.dim(), got: region.dim() });
        }
        let mut repr = self.repr.clone();
        repr.region = region.clone();
        SmoothExpr::try_from(repr)
    }

    /// True when the root is a literal zero.
    pub fn is_literal_zero(&self) -> bool {
        matches!(&self.repr.nodes[self.repr.root], Node::Const { value } if value.is_zero())
    }

    fn check_point(&self, x: &[f64]) -> Result<(), ExprError> {
        if x.len() != self.dim() {
            return Err(ExprError::Dimension { expected: self.dim(), got: x.len() });
        }
        if !self.repr.region.contains(x) {
            return Err(ExprError::OutsideRegion(x.to_vec()));
        }
        Ok(())
    }

    /// Taylor expansion at `x` to total order `k`, without the region check.
    pub fn series_unchecked(&self, x: &[f64], k: usize) -> Result<Series, ExprError> {
        if k > MAX_ORDER {
            return Err(ExprError::OrderTooHigh { k, max: MAX_ORDER });
        }
        if x.len() != self.dim() {
            return Err(ExprError::Dimension { expected: self.dim(), got: x.len() });
        }
        let mut ctx = Ctx { tape: &self.tape, x, k, memo: vec![None; self.tape.len()] };
        let s = ctx.node(self.repr.root)?;
        Ok(Rc::try_unwrap(s).unwrap_or_else(|rc| (*rc).clone()))
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, ExprError> {
        self.check_point(x)?;
        Ok(self.series_unchecked(x, 0)?.value())
    }

    /// Normalized Taylor coefficients at `x` up to total order `k`.
    pub fn series(&self, x: &[f64], k: usize) -> Result<Series, ExprError> {
        self.check_point(x)?;
        self.series_unchecked(x, k)
    }

    /// All raw partial derivatives up to total order `k`, graded-lex order.
    pub fn eval_derivs(&self, x: &[f64], k: usize) -> Result<Vec<f64>, ExprError> {
        Ok(self.series(x, k)?.raw())
    }
}

/// Incremental construction of a [`SmoothExpr`].
#[derive(Clone, Debug)]
pub struct ExprBuilder {
    region: Region,
    nodes: Vec<Node>,
}

fn exact(v: f64) -> Rat {
    Rat::from_f64(v).expect("finite parameter")
}

impl ExprBuilder {
    pub fn new(region: &Region) -> ExprBuilder {
        ExprBuilder { region: region.clone(), nodes: Vec::new() }
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn push(&mut self, n: Node) -> NodeId {
        self.nodes.push(n);
        self.nodes.len() - 1
    }

    pub fn coord(&mut self, axis: usize) -> NodeId {
        self.push(Node::Coord { axis })
    }

    pub fn constant(&mut self, value: Rat) -> NodeId {
        self.push(Node::Const { value })
    }

    /// Constant with the exact value of a double.
    pub fn num(&mut self, v: f64) -> NodeId {
        self.constant(exact(v))
    }

    pub fn add(&mut self, args: Vec<NodeId>) -> NodeId {
        self.push(Node::Add { args })
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Node::Sub { a, b })
    }

    pub fn mul(&mut self, args: Vec<NodeId>) -> NodeId {
        self.push(Node::Mul { args })
    }

    pub fn div(&mut self, a: NodeId, b: NodeId, floor: f64) -> NodeId {
        self.push(Node::Div { a, b, floor: exact(floor) })
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        self.push(Node::Neg { a })
    }

    pub fn affine(&mut self, a: NodeId, scale: f64, shift: f64) -> NodeId {
        self.push(Node::Affine { a, scale: exact(scale), shift: exact(shift) })
    }

    pub fn affine_exact(&mut self, a: NodeId, scale: Rat, shift: Rat) -> NodeId {
        self.push(Node::Affine { a, scale, shift })
    }

    pub fn pow(&mut self, a: NodeId, exp: u32) -> NodeId {
        self.push(Node::Pow { a, exp })
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        self.push(Node::Exp { a })
    }

    pub fn bump(&mut self, a: NodeId) -> NodeId {
        self.push(Node::Bump { a })
    }

    pub fn flat(&mut self, a: NodeId) -> NodeId {
        self.push(Node::Flat { a })
    }

    pub fn step(&mut self, a: NodeId) -> NodeId {
        self.push(Node::Step { a })
    }

    pub fn cutoff(&mut self, a: NodeId) -> NodeId {
        self.push(Node::Cutoff { a })
    }

    pub fn dist(&mut self, set: SetDescriptor) -> NodeId {
        self.push(Node::Dist { set })
    }

    pub fn gauge(&mut self, set: SetDescriptor, scale: f64) -> NodeId {
        self.push(Node::Gauge { set, scale: exact(scale) })
    }

    pub fn hormander(&mut self, a: NodeId, inner: Vec<(Rat, Rat)>, widths: Vec<Rat>) -> NodeId {
        let inner = inner.into_iter().map(|(x, y)| [x, y]).collect();
        self.push(Node::Hormander { a, inner, widths })
    }

    /// Sum with optional support boxes (per term, a union of boxes).
    pub fn sum(&mut self, terms: Vec<(NodeId, Option<Vec<Vec<(f64, f64)>>>)>) -> NodeId {
        let terms = terms
            .into_iter()
            .map(|(node, s)| Term {
                node,
                support: s.map(|boxes| boxes.into_iter().map(|b| b.into_iter().map(|(lo, hi)| [exact(lo), exact(hi)]).collect()).collect()),
            })
            .collect();
        self.push(Node::Sum { terms })
    }

    /// Copies another expression's nodes in and returns its root here.
    pub fn embed(&mut self, e: &SmoothExpr) -> NodeId {
        let off = self.nodes.len();
        for n in e.nodes() {
            self.nodes.push(n.shifted(off));
        }
        e.root() + off
    }

    pub fn finish(self, root: NodeId) -> Result<SmoothExpr, ExprError> {
        SmoothExpr::try_from(ExprRepr { version: 1, region: self.region, nodes: self.nodes, root })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> Region {
        Region::interval(Rat::int(-2), Rat::int(2))
    }

    #[test]
    fn polynomial_derivatives() {
        let mut b = ExprBuilder::new(&line());
        let x = b.coord(0);
        let sq = b.pow(x, 2);
        let e = b.finish(sq).unwrap();
        assert_eq!(e.eval_derivs(&[1.5], 3).unwrap(), vec![2.25, 3.0, 2.0, 0.0]);
    }

    #[test]
    fn bump_at_origin_and_outside() {
        let r = Region::interval(Rat::int(-2), Rat::int(2));
        let mut b = ExprBuilder::new(&r);
        let x = b.coord(0);
        let bb = b.bump(x);
        let e = b.finish(bb).unwrap();
        assert!((e.eval(&[0.0]).unwrap() - (-1f64).exp()).abs() < 1e-16);
        assert_eq!(e.eval(&[1.5]).unwrap(), 0.0);
        assert!(matches!(e.eval(&[3.0]), Err(ExprError::OutsideRegion(_))));
    }

    #[test]
    fn division_floor_enforced() {
        let mut b = ExprBuilder::new(&line());
        let x = b.coord(0);
        let one = b.num(1.0);
        let q = b.div(one, x, 0.5);
        let e = b.finish(q).unwrap();
        assert_eq!(e.eval(&[1.0]).unwrap(), 1.0);
        assert!(matches!(e.eval(&[0.25]), Err(ExprError::Denominator { .. })));
    }

    #[test]
    fn sum_support_skips_terms() {
        let mut b = ExprBuilder::new(&line());
        let x = b.coord(0);
        let one = b.num(1.0);
        let q = b.div(one, x, 1.0);
        // the quotient would fail near 0; its tag keeps it away
        let s = b.sum(vec![(q, Some(vec![vec![(1.0, 2.0)]])), (one, None)]);
        let e = b.finish(s).unwrap();
        assert_eq!(e.eval(&[0.0]).unwrap(), 1.0);
        assert_eq!(e.eval(&[2.0]).unwrap(), 1.5);
    }

    #[test]
    fn json_round_trip_and_rejections() {
        let mut b = ExprBuilder::new(&line());
        let x = b.coord(0);
        let e1 = b.exp(x);
        let c = b.hormander(x, vec![(Rat::int(-1), Rat::int(1))], vec![Rat::new(1, 10)]);
        let m = b.mul(vec![e1, c]);
        let e = b.finish(m).unwrap();
        let text = serde_json::to_string(&e).unwrap();
        let back: SmoothExpr = serde_json::from_str(&text).unwrap();
        assert_eq!(back, e);
        assert_eq!(back.eval(&[1.03]).unwrap(), e.eval(&[1.03]).unwrap());
        let cyclic = text.replace(r#""root":3"#, r#""root":7"#);
        assert!(serde_json::from_str::<SmoothExpr>(&cyclic).is_err());
        let unknown = text.replacen(r#""op":"coord""#, r#""op":"coord","junk":0"#, 1);
        assert!(serde_json::from_str::<SmoothExpr>(&unknown).is_err());
    }

    #[test]
    fn smoothed_indicator_plateaus() {
        let mut b = ExprBuilder::new(&line());
        let x = b.coord(0);
        let c = b.hormander(x, vec![(Rat::int(-1), Rat::int(1))], vec![Rat::new(1, 10)]);
        let e = b.finish(c).unwrap();
        assert_eq!(e.eval(&[1.0]).unwrap(), 1.0);
        assert_eq!(e.eval(&[-1.0]).unwrap(), 1.0);
        assert_eq!(e.eval(&[1.1]).unwrap(), 0.0);
        assert!((e.eval(&[1.05]).unwrap() - 0.5).abs() < 1e-10);
        assert_eq!(e.eval_derivs(&[0.3], 4).unwrap(), vec![1.0, 0.0, 0.0, 0.0, 0.0]);
    }
}
