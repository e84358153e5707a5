//! Assembling `f = sum_j tau_j g_j` from a completion prefix, and the
//! positivity correction away from the zero set.
//!
//! `tau_j` is 1 on `U_(eps_j/2)(Z)` and vanishes off `U_(eps_j)(Z)`, with
//! transition widths `(eps_j/2)(8, 4, 2, 1)/15`. At unit scale its
//! derivative norms `S_l` are measured once; at scale `eps` they become
//! `2 S_l eps^-l` (at most two transition layers overlap). On the support
//! `|g_j^(i)| <= C_j eps^(d_j - i)`, with `C_j` measured near `Z` and doubled,
//! so the tail rule `sup |(tau_j g_j)^(l)| <= 1/j!` for `l < min(j, d_j)` is
//! met by `sum_i C(l, i) H_(l-i) C_j eps^(d_j - i) <= 1/j!`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{CompletionPrefix, RealizeError, RealizeOptions, Schedule};
use crate::rational::Rat;
use crate::smoothfn::cutoff::{flat_gauge, hormander_node};
use crate::smoothfn::expr::{ExprBuilder, ExprError, SmoothExpr};
use crate::smoothfn::mollify::MAX_PROFILE_DERIV;
use crate::smoothfn::series::{factorial, ln_factorial};
use crate::smoothfn::set::{Region, SetDescriptor};
use crate::verify::{sup_norm, vanishing_order};

/// Transition widths of `tau_j`, as fractions of `eps_j / 2`.
const WIDTH_RATIOS: [i64; 4] = [8, 4, 2, 1];
/// Samples per component used for the derivative constants.
const CONSTANT_GRID: usize = 801;
/// Most terms a prefix may have (cutoff derivatives are tabulated to this order).
pub const MAX_TERMS: usize = MAX_PROFILE_DERIV + 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FilteredRealization {
    pub expr: SmoothExpr,
    pub schedule: Schedule,
    /// Measured `C_j` (already doubled).
    pub constants: Vec<f64>,
    /// Measured vanishing slopes of each `g_j` (minimum over samples; `None` = flat).
    pub measured_orders: Vec<Option<f64>>,
    /// Each `tau_j g_j` on its own, so remainders can be summed without cancellation.
    #[serde(skip)]
    pub terms: Vec<SmoothExpr>,
}

impl FilteredRealization {
    /// `(f - sum_{j <= n} g_j)(x)`, summed term by term so it keeps its
    /// relative accuracy where the remainder is far below `g_1`.
    pub fn remainder_at(&self, g: &[SmoothExpr], n: usize, x: &[f64]) -> Result<f64, ExprError> {
        let mut acc = 0.0;
        for (j, t) in self.terms.iter().enumerate() {
            acc += if j < n { t.eval(x)? - g[j].eval(x)? } else { t.eval(x)? };
        }
        Ok(acc)
    }
}

fn widths(eps: &Rat) -> Vec<Rat> {
    WIDTH_RATIOS.iter().map(|r| Rat(&eps.0 * Rat::new(*r, 30).0)).collect()
}

/// `S_l = sup |tau^(l)|` for the unit-scale cutoff, `l = 0..=MAX_PROFILE_DERIV`.
fn unit_norms() -> &'static [f64] {
    static NORMS: OnceLock<Vec<f64>> = OnceLock::new();
    NORMS.get_or_init(|| {
        let region = Region::interval(Rat::int(-2), Rat::int(2));
        let z = SetDescriptor::points_1d(&[Rat::zero()]);
        let mut b = ExprBuilder::new(&region);
        let t = hormander_node(&mut b, &z.fattened(&Rat::new(1, 2)), &widths(&Rat::one())).expect("unit widths");
        let e = b.finish(t).expect("valid cutoff");
        (0..=MAX_PROFILE_DERIV)
            .map(|l| if l == 0 { 1.0 } else { sup_norm(&e, &[(0.5, 1.0)], l, 401).expect("cutoff evaluates").value * 1.001 })
            .collect()
    })
}

fn binom(n: usize, k: usize) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Points of `U_r(Z)` (within `region`) at distance at least `r / 1000` from `Z`.
fn collar_samples(z: &SetDescriptor, r: f64, region: &Region) -> Vec<f64> {
    let mut out = Vec::new();
    let rr = Rat::from_f64(r).expect("finite");
    for (a, b) in z.fattened_1d(&rr) {
        let (a, b) = (a.to_f64(), b.to_f64());
        for i in 0..CONSTANT_GRID {
            let x = a + (b - a) * i as f64 / (CONSTANT_GRID - 1) as f64;
            let d = z.distance(&[x]);
            if d >= r * 1e-3 && d <= r && region.contains(&[x]) {
                out.push(x);
            }
        }
    }
    out
}

/// `max_x max_{i < m} |g^(i)(x)| / dist(x, Z)^(d - i)` over the samples, doubled.
fn derivative_constant(g: &SmoothExpr, z: &SetDescriptor, xs: &[f64], m: usize, d: usize) -> Result<f64, RealizeError> {
    let mut c: f64 = 0.0;
    for &x in xs {
        let dist = z.distance(&[x]);
        let raw = g.eval_derivs(&[x], m.saturating_sub(1))?;
        for (i, v) in raw.iter().enumerate().take(m) {
            let e = d.saturating_sub(i) as i32;
            c = c.max(v.abs() / dist.powi(e));
        }
    }
    if !c.is_finite() {
        return Err(RealizeError::NotFinite);
    }
    Ok(2.0 * c)
}

fn measure_order(g: &SmoothExpr, z: &SetDescriptor, h0: f64) -> Result<Option<f64>, RealizeError> {
    let mut worst: Option<f64> = None;
    for p in z.sample_points(5) {
        for dir in [-1.0, 1.0] {
            let v = vanishing_order(g, &p, &[dir], h0)?;
            if v.infinite {
                continue;
            }
            let s = v.slope.unwrap_or(f64::INFINITY);
            worst = Some(worst.map_or(s, |w: f64| w.min(s)));
        }
    }
    Ok(worst)
}

/// Sums `tau_j g_j` over the prefix with scales from the tail rule.
pub fn realize_filtered(prefix: &CompletionPrefix, region: &Region, opts: &RealizeOptions) -> Result<FilteredRealization, RealizeError> {
    let z = &prefix.zero_set;
    if z.dim() != 1 || region.dim() != 1 {
        return Err(RealizeError::Unsupported("filtered realization is implemented on the line".into()));
    }
    if z.is_empty() {
        return Err(RealizeError::Unsupported("the zero set is empty".into()));
    }
    let n = prefix.terms.len();
    if n > MAX_TERMS {
        return Err(RealizeError::Unsupported(format!("at most {MAX_TERMS} terms are supported, got {n}")));
    }
    if let Some(o) = &prefix.orders {
        if o.len() != n {
            return Err(RealizeError::Unsupported("one declared order per term is required".into()));
        }
    }
    let room = z
        .intervals_1d()
        .iter()
        .map(|(a, b)| (a.to_f64() - region.lo()[0]).min(region.hi()[0] - b.to_f64()))
        .fold(f64::INFINITY, f64::min);
    if !(room > 0.0) {
        return Err(RealizeError::NotInterior(vec![room]));
    }
    let eps_top = 0.999 * room.min(1.0);
    let h0 = (eps_top / 8.0).min(1e-3);

    let mut measured_orders = Vec::with_capacity(n);
    let mut constants = Vec::with_capacity(n);
    let xs = collar_samples(z, eps_top, region);
    for (idx, g) in prefix.terms.iter().enumerate() {
        let j = idx + 1;
        let d = prefix.declared_order(j);
        let m = measure_order(g, z, h0)?;
        if let Some(s) = m {
            if s < d as f64 - 0.1 {
                let at = z.sample_points(1).into_iter().next().unwrap_or_default();
                return Err(RealizeError::VanishingOrder { term: j, at, measured: s, declared: d });
            }
        }
        measured_orders.push(m);
        constants.push(derivative_constant(g, z, &xs, j.min(d), d)?);
    }

    let s_unit = unit_norms();
    let mut sched = Schedule::default();
    let mut prev = 2.0 * eps_top;
    let mut b = ExprBuilder::new(region);
    let mut terms = Vec::new();
    let mut parts = Vec::with_capacity(n);
    for (idx, g) in prefix.terms.iter().enumerate() {
        let j = idx + 1;
        let d = prefix.declared_order(j);
        let lmax = j.min(d);
        let cj = constants[idx];
        let ln_limit = -ln_factorial(j);
        let bound = |eps: f64, l: usize| -> f64 {
            let mut acc = 0.0;
            for i in 0..=l {
                let h = if l == i { 1.0 } else { 2.0 * s_unit[l - i] * eps.powi(-((l - i) as i32)) };
                acc += binom(l, i) * h * cj * eps.powi((d - i) as i32);
            }
            acc
        };
        let fits = |eps: f64| (0..lmax).all(|l| bound(eps, l).ln() <= ln_limit);
        let mut eps = 0.5 * prev;
        while !fits(eps) {
            eps *= 0.5;
            if eps < opts.eps_min {
                return Err(RealizeError::ScheduleUnderflow { term: j, eps_min: opts.eps_min });
            }
        }
        sched.bounds.push((0..lmax).map(|l| bound(eps, l)).collect());
        sched.limits.push(1.0 / factorial(j));
        sched.eps.push(eps);
        prev = eps;

        let e = Rat::from_f64(eps).expect("finite");
        let inner = z.fattened(&Rat(&e.0 / num_bigint::BigInt::from(2)));
        let tau = hormander_node(&mut b, &inner, &widths(&e))?;
        let gn = b.embed(g);
        let term = b.mul(vec![tau, gn]);
        let mut one = ExprBuilder::new(region);
        let t1 = hormander_node(&mut one, &inner, &widths(&e))?;
        let g1 = one.embed(g);
        let root = one.mul(vec![t1, g1]);
        parts.push(one.finish(root)?);
        let support = z.fattened_1d(&e).into_iter().map(|(a, c)| vec![(a.to_f64(), c.to_f64())]).collect();
        terms.push((term, Some(support)));
    }
    let root = b.sum(terms);
    Ok(FilteredRealization { expr: b.finish(root)?, schedule: sched, constants, measured_orders, terms: parts })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Positivity {
    pub expr: SmoothExpr,
    /// Multiplier of the gauge.
    pub multiplier: f64,
    pub sup_f: f64,
    pub min_gauge: f64,
    /// Smallest sampled value of the result off `U_eps(Z)`.
    pub min_value: f64,
}

/// `f + M G (1 - C)`: unchanged on `U_(eps/2)(Z)`, positive off `U_eps(Z)`.
pub fn ensure_positive(f: &SmoothExpr, z: &SetDescriptor, eps: f64, region: &Region) -> Result<Positivity, RealizeError> {
    let dim = region.dim();
    if f.dim() != dim || z.dim() != dim {
        return Err(RealizeError::Dimension);
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(RealizeError::Unsupported("eps must be positive".into()));
    }
    let e = Rat::from_f64(eps).expect("finite");
    let gauge = flat_gauge(z, region)?;
    let samples: Vec<Vec<f64>> =
        region.grid(if dim == 1 { 4001 } else { 201 }).into_iter().filter(|p| region.contains(p) && z.distance(p) >= eps).collect();
    let mut sup_f: f64 = 0.0;
    let mut min_gauge = f64::INFINITY;
    for p in &samples {
        sup_f = sup_f.max(f.eval(p)?.abs());
        min_gauge = min_gauge.min(gauge.expr.eval(p)?);
    }
    if !sup_f.is_finite() {
        return Err(RealizeError::NotFinite);
    }
    let multiplier = if samples.is_empty() {
        0.0
    } else if min_gauge > 0.0 {
        1.01 * (sup_f + 1.0) / min_gauge
    } else {
        return Err(RealizeError::Unsupported(format!("the gauge underflows at distance {eps:e}; use a larger eps")));
    };
    if !multiplier.is_finite() {
        return Err(RealizeError::NotFinite);
    }
    // C is 1 on U_(eps/2) and supported well inside U_eps
    let half = Rat(&e.0 / num_bigint::BigInt::from(2));
    let total = if dim == 1 { Rat::new(1, 4) } else { Rat::new(1, 8) };
    let w = vec![Rat(&e.0 * &total.0 * Rat::new(2, 3).0), Rat(&e.0 * &total.0 * Rat::new(1, 3).0)];
    let mut b = ExprBuilder::new(region);
    let fnode = b.embed(f);
    let c = if z.is_empty() { b.num(0.0) } else { hormander_node(&mut b, &z.fattened(&half), &w)? };
    let one = b.num(1.0);
    let off = b.sub(one, c);
    let g = b.embed(&gauge.expr);
    let m = b.num(multiplier);
    let lift = b.mul(vec![m, g, off]);
    let root = b.add(vec![fnode, lift]);
    let expr = b.finish(root)?;
    let mut min_value = f64::INFINITY;
    for p in &samples {
        min_value = min_value.min(expr.eval(p)?);
    }
    Ok(Positivity { expr, multiplier, sup_f, min_gauge, min_value })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(a: i64, b: i64) -> Region {
        Region::interval(Rat::int(a), Rat::int(b))
    }

    fn power(region: &Region, k: u32) -> SmoothExpr {
        let mut b = ExprBuilder::new(region);
        let x = b.coord(0);
        let p = b.pow(x, k);
        b.finish(p).unwrap()
    }

    #[test]
    fn even_powers_at_origin() {
        let r = line(-1, 1);
        let terms = (1..=4).map(|j| power(&r, 2 * j)).collect();
        let prefix = CompletionPrefix::new(SetDescriptor::points_1d(&[Rat::zero()]), terms);
        let out = realize_filtered(&prefix, &r, &RealizeOptions::default()).unwrap();
        assert!(out.schedule.holds());
        let eps4 = out.schedule.eps[3];
        // all cutoffs are 1 near 0, so f is the polynomial there
        let x = 0.25 * eps4;
        let want: f64 = (1..=4).map(|j| x.powi(2 * j)).sum();
        assert!((out.expr.eval(&[x]).unwrap() - want).abs() <= 1e-15 * want.max(1e-300));
        assert_eq!(out.expr.eval(&[0.999]).unwrap(), 0.0);
    }

    #[test]
    fn low_order_term_is_rejected() {
        let r = line(-1, 1);
        let prefix = CompletionPrefix::new(SetDescriptor::points_1d(&[Rat::zero()]), vec![power(&r, 2), power(&r, 1)]);
        let err = realize_filtered(&prefix, &r, &RealizeOptions::default()).unwrap_err();
        assert!(matches!(err, RealizeError::VanishingOrder { term: 2, .. }), "{err}");
    }

    #[test]
    fn positivity_keeps_the_germ() {
        let r = line(-1, 2);
        // f = x(x - 1)(x - 1/2)
        let mut b = ExprBuilder::new(&r);
        let x = b.coord(0);
        let a = b.affine(x, 1.0, -1.0);
        let c = b.affine(x, 1.0, -0.5);
        let p = b.mul(vec![x, a, c]);
        let f = b.finish(p).unwrap();
        let z = SetDescriptor::points_1d(&[Rat::zero(), Rat::one()]);
        let pos = ensure_positive(&f, &z, 0.1, &r).unwrap();
        assert!(pos.min_value > 0.0);
        for p in [0.0, 1.0, 0.03, 0.97] {
            assert_eq!(pos.expr.eval_derivs(&[p], 2).unwrap(), f.eval_derivs(&[p], 2).unwrap());
        }
    }
}
