//! Extension of jet data given on points and axis-aligned segments in the plane.
//!
//! A segment with transverse data `h_k(s)` carries the polynomial
//! `P(s, n) = sum_k h_k(s) n^k / k!`. It is realized as
//! `P (C_0 + C_1 + (1 - C_0)(1 - C_1) tau(n / rho) W(s))`, where `C_e` are
//! product cutoffs at the endpoints and `W` rises from 0 to 1 over the first
//! and last `rho / 2` of the segment. The bracket is 1 on the strip
//! `|n| <= rho/2` over the closed segment, so every transverse derivative is
//! exact there, and the `W` part vanishes identically near both endpoints.
//! Point jets sitting on an endpoint must agree with `P` up to the transverse
//! order; their extra entries are added by a small Borel term.

use serde::{Deserialize, Serialize};

use super::borel::{borel_schedule, push_terms, separation_caps};
use super::{RealizeError, RealizeOptions, Schedule};
use crate::jets::{Jet, JetField, Segment};
use crate::rational::Rat;
use crate::smoothfn::expr::{ExprBuilder, NodeId, SmoothExpr};
use crate::smoothfn::series::{factorial, index_of, multi_indices};
use crate::smoothfn::set::Region;

/// Relative agreement required between an endpoint jet and its segment.
const ENDPOINT_TOL: f64 = 1e-9;
/// Samples per segment in the residual check.
const SEGMENT_SAMPLES: usize = 21;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StrataRealization {
    pub expr: SmoothExpr,
    /// The interior part of each segment term (flat at both endpoints).
    pub segment_terms: Vec<SmoothExpr>,
    pub rhos: Vec<f64>,
    /// Borel schedules for points off the segments and endpoint corrections.
    pub schedules: Vec<Schedule>,
    /// Largest `|f^(k)(p) - h_k(p)|` relative to `max(1, |h_k|)` over point jets.
    pub point_residual: f64,
    /// Same for transverse derivatives sampled along the segments.
    pub segment_residual: f64,
}

type Bx = Vec<(f64, f64)>;

fn segment_box(s: &Segment) -> Bx {
    let along = (s.from.to_f64(), s.to.to_f64());
    let level = s.level.to_f64();
    if s.axis == 0 {
        vec![along, (level, level)]
    } else {
        vec![(level, level), along]
    }
}

fn linf_gap(a: &Bx, b: &Bx) -> f64 {
    a.iter().zip(b).map(|((a0, a1), (b0, b1))| (b0 - a1).max(a0 - b1).max(0.0)).fold(0.0, f64::max)
}

fn grow(b: &Bx, r: f64) -> Bx {
    b.iter().map(|(lo, hi)| (lo - r, hi + r)).collect()
}

/// Along-axis and transverse coordinate nodes for a segment.
fn frame(b: &mut ExprBuilder, s: &Segment) -> (NodeId, NodeId) {
    let along = b.coord(s.axis);
    let across = b.coord(1 - s.axis);
    let n = b.affine_exact(across, Rat::one(), Rat(-&s.level.0));
    (along, n)
}

fn poly_node(b: &mut ExprBuilder, s: &Segment, along: NodeId, n: NodeId) -> NodeId {
    let mut terms = Vec::new();
    for (k, coeffs) in s.transverse.iter().enumerate() {
        for (i, c) in coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let mut f = vec![b.num(c.to_f64() / factorial(k))];
            if i > 0 {
                f.push(b.pow(along, i as u32));
            }
            if k > 0 {
                f.push(b.pow(n, k as u32));
            }
            terms.push(b.mul(f));
        }
    }
    if terms.is_empty() {
        b.num(0.0)
    } else {
        b.add(terms)
    }
}

/// `tau((v - c) / r)` for a node `v`.
fn cut(b: &mut ExprBuilder, v: NodeId, c: &Rat, r: &Rat) -> NodeId {
    let inv = Rat(r.0.recip());
    let u = b.affine_exact(v, inv.clone(), Rat(-(&c.0 * &inv.0)));
    b.cutoff(u)
}

/// Returns (full term, interior part) for one segment at scale `rho`.
fn segment_nodes(b: &mut ExprBuilder, s: &Segment, rho: &Rat) -> (NodeId, NodeId) {
    let (along, n) = frame(b, s);
    let p = poly_node(b, s, along, n);
    let zero = Rat::zero();
    let tn = cut(b, n, &zero, rho);
    let ends: Vec<NodeId> = [&s.from, &s.to]
        .iter()
        .map(|e| {
            let ts = cut(b, along, e, rho);
            b.mul(vec![ts, tn])
        })
        .collect();
    let half = Rat(&rho.0 / num_bigint::BigInt::from(2));
    let inv = Rat(half.0.recip());
    let rise_in = b.affine_exact(along, inv.clone(), Rat(-(&s.from.0 * &inv.0)));
    let rise = b.step(rise_in);
    let fall_in = b.affine_exact(along, Rat(-&inv.0), Rat(&s.to.0 * &inv.0));
    let fall = b.step(fall_in);
    let one = b.num(1.0);
    let m0 = b.sub(one, ends[0]);
    let m1 = b.sub(one, ends[1]);
    let interior = b.mul(vec![p, m0, m1, tn, rise, fall]);
    let e0 = b.mul(vec![p, ends[0]]);
    let e1 = b.mul(vec![p, ends[1]]);
    (b.add(vec![e0, e1, interior]), interior)
}

/// Jet of the segment polynomial at one of its endpoints.
fn polynomial_jet(s: &Segment, at: &[Rat], order: usize, region: &Region) -> Result<Jet, RealizeError> {
    let mut b = ExprBuilder::new(region);
    let (along, n) = frame(&mut b, s);
    let p = poly_node(&mut b, s, along, n);
    let e = b.finish(p)?;
    Ok(Jet::from_expr(&e, at.to_vec(), order)?)
}

fn transverse_index(axis: usize, k: usize) -> usize {
    if axis == 0 {
        index_of(2, &[0, k])
    } else {
        index_of(2, &[k, 0])
    }
}

fn transverse_order(axis: usize, a: &[usize]) -> usize {
    a[1 - axis]
}

/// Realizes a field of point jets and segment data.
pub fn whitney_extend_strata(field: &JetField, region: &Region, opts: &RealizeOptions) -> Result<StrataRealization, RealizeError> {
    if field.dim() != region.dim() {
        return Err(RealizeError::Dimension);
    }
    let segs = field.segments();
    let seg_boxes: Vec<Bx> = segs.iter().map(segment_box).collect();
    // which segment, if any, each point is an endpoint of
    let owner: Vec<Option<usize>> = field.points().iter().map(|p| segs.iter().position(|s| s.is_endpoint(p.base()))).collect();
    let free: Vec<usize> = (0..field.points().len()).filter(|i| owner[*i].is_none()).collect();
    let free_boxes: Vec<Bx> = free.iter().map(|&i| field.points()[i].base_f64().iter().map(|v| (*v, *v)).collect()).collect();

    let mut rhos = Vec::new();
    for (i, s) in segs.iter().enumerate() {
        let len = s.to.to_f64() - s.from.to_f64();
        let mut r = len / 2.5;
        for (j, t) in seg_boxes.iter().enumerate() {
            if j != i {
                r = r.min(0.499 * linf_gap(&seg_boxes[i], t));
            }
        }
        for fb in &free_boxes {
            r = r.min(0.499 * linf_gap(&seg_boxes[i], fb));
        }
        for end in [&s.from, &s.to] {
            let p: Vec<f64> = s.point(end).iter().map(Rat::to_f64).collect();
            let d = region.boundary_distance(&p);
            if !(d > 0.0) {
                return Err(RealizeError::NotInterior(p));
            }
            r = r.min(0.999 * d);
        }
        rhos.push(Rat::from_f64(r).expect("finite"));
    }

    let mut b = ExprBuilder::new(region);
    let mut terms: Vec<(NodeId, Option<Vec<Bx>>)> = Vec::new();
    let mut interiors = Vec::new();
    for ((s, rho), bx) in segs.iter().zip(&rhos).zip(&seg_boxes) {
        let (full, _) = segment_nodes(&mut b, s, rho);
        terms.push((full, Some(vec![grow(bx, rho.to_f64())])));
        let mut sb = ExprBuilder::new(region);
        let (_, inner) = segment_nodes(&mut sb, s, rho);
        interiors.push(sb.finish(inner)?);
    }

    let mut schedules = Vec::new();
    // endpoint corrections
    for (jet, own) in field.points().iter().zip(&owner) {
        let Some(si) = *own else { continue };
        let s = &segs[si];
        let pj = polynomial_jet(s, jet.base(), jet.order(), region)?;
        let idx = multi_indices(2, jet.order());
        let mut diff = Vec::with_capacity(idx.len());
        for ((a, have), want) in idx.iter().zip(jet.coeffs()).zip(pj.coeffs()) {
            if transverse_order(s.axis, a) <= s.order() {
                if (have - want).abs() > ENDPOINT_TOL * want.abs().max(1.0) {
                    return Err(RealizeError::Incompatible(format!(
                        "point {:?} disagrees with segment data at {:?}: {have} vs {want}",
                        jet.base_f64(),
                        a
                    )));
                }
                diff.push(0.0);
            } else {
                diff.push(have - want);
            }
        }
        let d = Jet::new(jet.base().to_vec(), jet.order(), diff)?;
        let sched = borel_schedule(&d, 0.5 * rhos[si].to_f64(), opts)?;
        push_terms(&mut b, &d, &sched, &mut terms);
        schedules.push(sched);
    }
    // points off the segments
    let free_jets: Vec<&Jet> = free.iter().map(|&i| &field.points()[i]).collect();
    let caps = separation_caps(&free_jets.iter().map(|j| j.base_f64()).collect::<Vec<_>>());
    for (jet, sep) in free_jets.iter().zip(caps) {
        let p = jet.base_f64();
        let d = region.boundary_distance(&p);
        if !(d > 0.0) {
            return Err(RealizeError::NotInterior(p));
        }
        let pb: Bx = p.iter().map(|v| (*v, *v)).collect();
        let mut cap = sep.min(d);
        for sb in &seg_boxes {
            cap = cap.min(0.499 * linf_gap(&pb, sb));
        }
        let sched = borel_schedule(jet, cap, opts)?;
        push_terms(&mut b, jet, &sched, &mut terms);
        schedules.push(sched);
    }
    let root = b.sum(terms);
    let expr = b.finish(root)?;

    let mut point_residual: f64 = 0.0;
    for jet in field.points() {
        let got = expr.eval_derivs(&jet.base_f64(), jet.order())?;
        for (g, w) in got.iter().zip(jet.coeffs()) {
            point_residual = point_residual.max((g - w).abs() / w.abs().max(1.0));
        }
    }
    let mut segment_residual: f64 = 0.0;
    for s in segs {
        let (a, c) = (s.from.to_f64(), s.to.to_f64());
        for i in 0..SEGMENT_SAMPLES {
            let t = a + (c - a) * i as f64 / (SEGMENT_SAMPLES - 1) as f64;
            let mut x = vec![0.0; 2];
            x[s.axis] = t;
            x[1 - s.axis] = s.level.to_f64();
            let got = expr.eval_derivs(&x, s.order())?;
            for k in 0..=s.order() {
                let want = s.data(k, 0, t);
                let g = got[transverse_index(s.axis, k)];
                segment_residual = segment_residual.max((g - want).abs() / want.abs().max(1.0));
            }
        }
    }
    Ok(StrataRealization {
        expr,
        segment_terms: interiors,
        rhos: rhos.iter().map(Rat::to_f64).collect(),
        schedules,
        point_residual,
        segment_residual,
    })
}
