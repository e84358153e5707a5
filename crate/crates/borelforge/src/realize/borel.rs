//! Borel's lemma: a smooth function with any prescribed jet at a point.
//!
//! `f = sum_k P_k(x - p) tau((x - p) / eps_k)`, where `P_k` is the degree-`k`
//! part of the Taylor polynomial and `tau` the product base cutoff. On the
//! support `|x_i - p_i| <= eps`, the Leibniz rule gives
//! `|d^l term_k| <= eps^(k-|l|) sum_a |a_a| sum_m C(l, m) T_(l-m) / (a-m)!`,
//! with `T` the certified base-cutoff norms. Each `eps_k` is the largest
//! dyadic fraction of the previous scale that keeps every bound `<= 1/k!`.

use serde::{Deserialize, Serialize};

use super::{RealizeError, RealizeOptions, Schedule};
use crate::jets::{Jet, JetField};
use crate::rational::Rat;
use crate::smoothfn::expr::{ExprBuilder, NodeId, SmoothExpr};
use crate::smoothfn::series::{factorial, ln_factorial, multi_indices};
use crate::smoothfn::set::Region;
use crate::smoothfn::univariate::CUTOFF_SUP;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BorelRealization {
    pub expr: SmoothExpr,
    /// One schedule per realized point, in input order.
    pub schedules: Vec<Schedule>,
    /// Radius cap used for each point.
    pub caps: Vec<f64>,
}

fn binom(n: usize, k: usize) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// `sum_{m <= a, m <= l} C(l, m) T_(l-m) / (a-m)!`.
fn leibniz_weight(a: &[usize], l: &[usize]) -> f64 {
    let mut total = 1.0;
    for (&ai, &li) in a.iter().zip(l) {
        let mut s = 0.0;
        for m in 0..=ai.min(li) {
            s += binom(li, m) * CUTOFF_SUP[li - m] / factorial(ai - m);
        }
        total *= s;
    }
    total
}

/// `ln max_{|l| = order} sum_a |a_a| weight(a, l)` over the nonzero degree-`k` entries.
fn ln_amplitude(entries: &[(Vec<usize>, f64)], dim: usize, order: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for l in multi_indices(dim, order).into_iter().filter(|l| l.iter().sum::<usize>() == order) {
        // log-sum-exp keeps huge coefficients finite
        let logs: Vec<f64> = entries.iter().map(|(a, c)| c.abs().ln() + leibniz_weight(a, &l).ln()).collect();
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let v = top + logs.iter().map(|v| (v - top).exp()).sum::<f64>().ln();
        best = best.max(v);
    }
    best
}

fn degree_entries(jet: &Jet, k: usize) -> Vec<(Vec<usize>, f64)> {
    multi_indices(jet.dim(), jet.order())
        .into_iter()
        .zip(jet.coeffs())
        .filter(|(a, c)| a.iter().sum::<usize>() == k && **c != 0.0)
        .map(|(a, c)| (a, *c))
        .collect()
}

/// Scales `eps_0 >= eps_1 >= ...` starting from `cap`.
pub fn borel_schedule(jet: &Jet, cap: f64, opts: &RealizeOptions) -> Result<Schedule, RealizeError> {
    let dim = jet.dim();
    let mut sched = Schedule::default();
    let mut prev = cap;
    for k in 0..=jet.order() {
        let entries = degree_entries(jet, k);
        let limit = 1.0 / factorial(k);
        if entries.is_empty() {
            sched.eps.push(prev);
            sched.bounds.push(vec![0.0; k]);
            sched.limits.push(limit);
            continue;
        }
        let amps: Vec<f64> = (0..k).map(|l| ln_amplitude(&entries, dim, l)).collect();
        let ln_limit = -ln_factorial(k);
        let mut eps = prev;
        let fits = |eps: f64| amps.iter().enumerate().all(|(l, a)| a + (k - l) as f64 * eps.ln() <= ln_limit);
        if !fits(eps) {
            let allowed = amps.iter().enumerate().map(|(l, a)| (ln_limit - a) / (k - l) as f64).fold(f64::INFINITY, f64::min);
            let halvings = ((eps.ln() - allowed) / std::f64::consts::LN_2).ceil().max(0.0);
            eps = prev * (-halvings).exp2();
            while !fits(eps) && eps >= opts.eps_min {
                eps *= 0.5;
            }
        }
        if !(eps >= opts.eps_min) {
            return Err(RealizeError::ScheduleUnderflow { term: k, eps_min: opts.eps_min });
        }
        sched.bounds.push(amps.iter().enumerate().map(|(l, a)| (a + (k - l) as f64 * eps.ln()).exp()).collect());
        sched.eps.push(eps);
        sched.limits.push(limit);
        prev = eps;
    }
    Ok(sched)
}

fn support_box(base: &[f64], eps: f64) -> Vec<(f64, f64)> {
    base.iter().map(|p| (p - eps, p + eps)).collect()
}

/// Nodes for the degree-`k` term at scale `eps`, or `None` if it vanishes.
fn degree_term(b: &mut ExprBuilder, jet: &Jet, k: usize, eps: f64) -> Option<NodeId> {
    let entries = degree_entries(jet, k);
    if entries.is_empty() {
        return None;
    }
    let base = jet.base();
    let inv = Rat::from_f64(1.0 / eps).expect("finite scale");
    let shifted: Vec<NodeId> = (0..jet.dim())
        .map(|i| {
            let x = b.coord(i);
            b.affine_exact(x, Rat::one(), Rat(-&base[i].0))
        })
        .collect();
    let mut monomials = Vec::new();
    for (a, c) in &entries {
        let denom: f64 = a.iter().map(|ai| factorial(*ai)).product();
        let mut factors = vec![b.num(c / denom)];
        for (i, &ai) in a.iter().enumerate() {
            if ai > 0 {
                factors.push(b.pow(shifted[i], ai as u32));
            }
        }
        monomials.push(b.mul(factors));
    }
    let poly = if monomials.len() == 1 { monomials[0] } else { b.add(monomials) };
    let mut factors = vec![poly];
    for i in 0..jet.dim() {
        let x = b.coord(i);
        let u = b.affine_exact(x, inv.clone(), Rat(-(&base[i].0 * &inv.0)));
        factors.push(b.cutoff(u));
    }
    Some(b.mul(factors))
}

pub(crate) fn push_terms(b: &mut ExprBuilder, jet: &Jet, sched: &Schedule, out: &mut Vec<(NodeId, Option<Vec<Vec<(f64, f64)>>>)>) {
    let base = jet.base_f64();
    for (k, &eps) in sched.eps.iter().enumerate() {
        if let Some(node) = degree_term(b, jet, k, eps) {
            out.push((node, Some(vec![support_box(&base, eps)])));
        }
    }
}

fn interior_cap(jet: &Jet, region: &Region) -> Result<f64, RealizeError> {
    if jet.dim() != region.dim() {
        return Err(RealizeError::Dimension);
    }
    let p = jet.base_f64();
    let d = region.boundary_distance(&p);
    if !(d > 0.0) {
        return Err(RealizeError::NotInterior(p));
    }
    Ok(d)
}

/// Realizes one jet; every derivative of order `<= jet.order()` at the base is exact.
pub fn borel_realize(jet: &Jet, region: &Region, opts: &RealizeOptions) -> Result<BorelRealization, RealizeError> {
    let cap = interior_cap(jet, region)?;
    let sched = borel_schedule(jet, cap, opts)?;
    let mut b = ExprBuilder::new(region);
    let mut terms = Vec::new();
    push_terms(&mut b, jet, &sched, &mut terms);
    let root = b.sum(terms);
    Ok(BorelRealization { expr: b.finish(root)?, schedules: vec![sched], caps: vec![cap] })
}

/// The degree-`k` term alone, for independent checks.
pub fn borel_term_expr(jet: &Jet, k: usize, eps: f64, region: &Region) -> Result<SmoothExpr, RealizeError> {
    let mut b = ExprBuilder::new(region);
    let root = match degree_term(&mut b, jet, k, eps) {
        Some(n) => n,
        None => b.num(0.0),
    };
    Ok(b.finish(root)?)
}

/// Largest cap keeping the support boxes of distinct points disjoint.
pub(crate) fn separation_caps(bases: &[Vec<f64>]) -> Vec<f64> {
    bases
        .iter()
        .enumerate()
        .map(|(i, p)| {
            bases
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, q)| p.iter().zip(q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(f64::INFINITY, f64::min)
                * 0.5
                * 0.999
        })
        .collect()
}

/// Disjointly supported Borel realizations at each point of a point field.
pub fn multi_borel(field: &JetField, region: &Region, opts: &RealizeOptions) -> Result<BorelRealization, RealizeError> {
    if !field.segments().is_empty() {
        return Err(RealizeError::Unsupported("segments need whitney_extend_strata".into()));
    }
    if field.dim() != region.dim() {
        return Err(RealizeError::Dimension);
    }
    let bases: Vec<Vec<f64>> = field.points().iter().map(Jet::base_f64).collect();
    let sep = separation_caps(&bases);
    let mut b = ExprBuilder::new(region);
    let mut terms = Vec::new();
    let mut schedules = Vec::new();
    let mut caps = Vec::new();
    for (jet, s) in field.points().iter().zip(&sep) {
        let cap = interior_cap(jet, region)?.min(*s);
        let sched = borel_schedule(jet, cap, opts)?;
        push_terms(&mut b, jet, &sched, &mut terms);
        schedules.push(sched);
        caps.push(cap);
    }
    let root = b.sum(terms);
    Ok(BorelRealization { expr: b.finish(root)?, schedules, caps })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> Region {
        Region::interval(Rat::int(-1), Rat::int(1))
    }

    #[test]
    fn cubic_jet_is_reproduced() {
        let jet = Jet::new(vec![Rat::new(1, 4)], 3, vec![2.0, -1.0, 3.0, 5.0]).unwrap();
        let r = borel_realize(&jet, &line(), &RealizeOptions::default()).unwrap();
        let d = r.expr.eval_derivs(&[0.25], 3).unwrap();
        for (a, b) in d.iter().zip(jet.coeffs()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{d:?}");
        }
        assert!(r.schedules[0].holds());
        assert_eq!(r.expr.eval(&[-0.6]).unwrap(), 0.0);
    }

    #[test]
    fn schedule_shrinks_for_large_coefficients() {
        let small = Jet::new(vec![Rat::zero()], 4, vec![1.0; 5]).unwrap();
        let big = Jet::new(vec![Rat::zero()], 4, vec![1e6; 5]).unwrap();
        let o = RealizeOptions::default();
        let a = borel_schedule(&small, 0.5, &o).unwrap();
        let b = borel_schedule(&big, 0.5, &o).unwrap();
        assert!(b.eps[4] < a.eps[4]);
        assert!(a.holds() && b.holds());
    }

    #[test]
    fn underflow_is_reported() {
        let jet = Jet::new(vec![Rat::zero()], 3, vec![0.0, 0.0, 0.0, 1e300]).unwrap();
        let o = RealizeOptions { eps_min: 1e-3 };
        assert!(matches!(borel_schedule(&jet, 0.5, &o), Err(RealizeError::ScheduleUnderflow { term: 3, .. })));
    }

    #[test]
    fn planar_jet() {
        let region = Region::rect((Rat::int(-1), Rat::int(1)), (Rat::int(-1), Rat::int(1)));
        // f = 1 + 2x - y + x y + 3 y^2 / 2 (order 2)
        let jet = Jet::new(vec![Rat::zero(), Rat::zero()], 2, vec![1.0, 2.0, -1.0, 0.0, 1.0, 3.0]).unwrap();
        let r = borel_realize(&jet, &region, &RealizeOptions::default()).unwrap();
        let d = r.expr.eval_derivs(&[0.0, 0.0], 2).unwrap();
        assert_eq!(d, jet.coeffs());
    }

    #[test]
    fn multi_point_supports_are_disjoint() {
        let a = Jet::new(vec![Rat::new(1, 10)], 2, vec![1.0, 0.0, 2.0]).unwrap();
        let c = Jet::new(vec![Rat::new(3, 10)], 2, vec![-1.0, 4.0, 0.0]).unwrap();
        let field = JetField::points_only(vec![a, c]).unwrap();
        let r = multi_borel(&field, &line(), &RealizeOptions::default()).unwrap();
        assert!(r.caps.iter().all(|c| *c < 0.1));
        assert_eq!(r.expr.eval(&[0.2]).unwrap(), 0.0);
        assert_eq!(r.expr.eval_derivs(&[0.3], 1).unwrap(), vec![-1.0, 4.0]);
    }
}
