//! One function that is flat along a descending chain of closed sets and
//! positive off the largest one.
//!
//! `tau = prod_j ((1 - s_j) + s_j G_j)`, where `G_j` is the flat gauge of
//! `Z_j` and `s_j` is a smoothstep of `dist(x, Z_j)` that equals 1 inside the
//! `eps_(j+1)`-neighbourhood and 0 outside the `eps_j`-neighbourhood,
//! switching over the middle third of that annulus. Each factor lies in
//! `(0, 1]` off `Z_j`, and the first one is `G_1` near `Z_1`, so `tau`
//! vanishes exactly on `Z_1`. Near `Z_j` the first `j` factors are all
//! gauges. All gauges use `L / m`, with `L` the usual scale of `Z_1` and `m`
//! the chain length, so the product never drops below a single gauge.

use serde::{Deserialize, Serialize};

use crate::rational::Rat;
use crate::smoothfn::cutoff::gauge_scale;
use crate::smoothfn::expr::{ExprBuilder, ExprError, SmoothExpr};
use crate::smoothfn::set::{Region, SetDescriptor};
use crate::smoothfn::univariate::step_at;

/// Longest chain accepted.
pub const MAX_CHAIN: usize = 12;

#[derive(Debug, thiserror::Error)]
pub enum FlatZeroError {
    #[error("chains are limited to {MAX_CHAIN} sets, got {0}")]
    TooLong(usize),
    #[error("set {0} is empty while the chain is not")]
    EmptySet(usize),
    #[error("set {later} is not contained in set {earlier}: sample {at:?}")]
    NotDescending { earlier: usize, later: usize, at: Vec<f64> },
    #[error("annulus scales must be positive and strictly decreasing")]
    Scales,
    #[error("expected {want} scales, got {got}")]
    ScaleCount { want: usize, got: usize },
    #[error("dimension mismatch")]
    Dimension,
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChainRepr {
    sets: Vec<SetDescriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eps: Option<Vec<f64>>,
}

/// `Z_1 ⊇ Z_2 ⊇ ... ⊇ Z_m` with optional annulus scales `eps_1 > ... > eps_m`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "ChainRepr", into = "ChainRepr")]
pub struct ZeroChain {
    sets: Vec<SetDescriptor>,
    eps: Option<Vec<f64>>,
}

impl TryFrom<ChainRepr> for ZeroChain {
    type Error = FlatZeroError;
    fn try_from(r: ChainRepr) -> Result<ZeroChain, FlatZeroError> {
        ZeroChain::new(r.sets, r.eps)
    }
}

impl From<ZeroChain> for ChainRepr {
    fn from(c: ZeroChain) -> ChainRepr {
        ChainRepr { sets: c.sets, eps: c.eps }
    }
}

impl ZeroChain {
    pub fn new(sets: Vec<SetDescriptor>, eps: Option<Vec<f64>>) -> Result<ZeroChain, FlatZeroError> {
        if sets.len() > MAX_CHAIN {
            return Err(FlatZeroError::TooLong(sets.len()));
        }
        if let Some(first) = sets.first() {
            if sets.iter().any(|s| s.dim() != first.dim()) {
                return Err(FlatZeroError::Dimension);
            }
        }
        if let Some(i) = sets.iter().position(SetDescriptor::is_empty) {
            return Err(FlatZeroError::EmptySet(i + 1));
        }
        for (i, w) in sets.windows(2).enumerate() {
            if let Some(p) = w[1].sample_points(9).into_iter().find(|p| !w[0].contains(p)) {
                return Err(FlatZeroError::NotDescending { earlier: i + 1, later: i + 2, at: p });
            }
        }
        if let Some(e) = &eps {
            if e.len() != sets.len() {
                return Err(FlatZeroError::ScaleCount { want: sets.len(), got: e.len() });
            }
            if e.iter().any(|v| !(*v > 0.0) || !v.is_finite()) || e.windows(2).any(|w| w[1] >= w[0]) {
                return Err(FlatZeroError::Scales);
            }
        }
        Ok(ZeroChain { sets, eps })
    }

    pub fn sets(&self) -> &[SetDescriptor] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// Explicit scales, or `eps_1 = min_width/4` halved at each level.
    pub fn scales(&self, region: &Region) -> Vec<f64> {
        match &self.eps {
            Some(e) => e.clone(),
            None => {
                let e1 = 0.25 * region.min_width();
                (0..self.sets.len()).map(|j| e1 * 0.5f64.powi(j as i32)).collect()
            }
        }
    }
}

/// Output of [`flat_zero_chain`] with the scales it used.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlatFunction {
    pub expr: SmoothExpr,
    pub scales: Vec<f64>,
    /// Scale shared by every gauge factor.
    pub gauge_scale: f64,
}

pub fn flat_zero_chain(chain: &ZeroChain, region: &Region) -> Result<FlatFunction, FlatZeroError> {
    let mut b = ExprBuilder::new(region);
    if chain.is_empty() {
        let one = b.num(1.0);
        return Ok(FlatFunction { expr: b.finish(one)?, scales: vec![], gauge_scale: 0.0 });
    }
    if chain.sets[0].dim() != region.dim() {
        return Err(FlatZeroError::Dimension);
    }
    let eps = chain.scales(region);
    // the product of all gauges is then no smaller than one gauge at full scale
    let l = gauge_scale(&chain.sets[0]) / chain.len() as f64;
    let one = b.num(1.0);
    let mut factors = Vec::with_capacity(chain.len());
    for (j, z) in chain.sets.iter().enumerate() {
        let outer = eps[j];
        let inner = eps.get(j + 1).copied().unwrap_or(0.5 * outer);
        // smoothstep across the middle third of (inner, outer)
        let a = inner + (outer - inner) / 3.0;
        let c = inner + 2.0 * (outer - inner) / 3.0;
        if !(a < c) {
            return Err(FlatZeroError::Scales);
        }
        let d = b.dist(z.clone());
        let width = Rat::from_f64(c - a).ok_or(FlatZeroError::Scales)?;
        let top = Rat::from_f64(c).ok_or(FlatZeroError::Scales)?;
        let inv = Rat(width.0.recip());
        let s_in = b.affine_exact(d, Rat(-&inv.0), Rat(&top.0 * &inv.0));
        let s = b.step(s_in);
        let g = b.gauge(z.clone(), l);
        let off = b.sub(one, s);
        let on = b.mul(vec![s, g]);
        factors.push(b.add(vec![off, on]));
    }
    let root = if factors.len() == 1 { factors[0] } else { b.mul(factors) };
    Ok(FlatFunction { expr: b.finish(root)?, scales: eps, gauge_scale: l })
}

/// `ln f(x)` without underflow, for the function built from `chain`;
/// `-inf` on `Z_1`.
pub fn ln_flat_value(chain: &ZeroChain, f: &FlatFunction, x: &[f64]) -> f64 {
    let eps = &f.scales;
    let mut acc = 0.0;
    for (j, z) in chain.sets.iter().enumerate() {
        let Some(d) = z.soft_distance(x) else {
            return f64::NEG_INFINITY;
        };
        let outer = eps[j];
        let inner = eps.get(j + 1).copied().unwrap_or(0.5 * outer);
        let a = inner + (outer - inner) / 3.0;
        let c = inner + 2.0 * (outer - inner) / 3.0;
        let s = step_at((c - d) / (c - a), 0)[0];
        let ln_g = -f.gauge_scale / d;
        acc += if s >= 1.0 {
            ln_g
        } else {
            ((1.0 - s) + s * ln_g.exp()).ln()
        };
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::vanishing_order;

    fn line() -> Region {
        Region::interval(Rat::int(-1), Rat::int(1))
    }

    #[test]
    fn empty_chain_is_one() {
        let c = ZeroChain::new(vec![], None).unwrap();
        let f = flat_zero_chain(&c, &line()).unwrap();
        assert_eq!(f.expr.eval(&[0.3]).unwrap(), 1.0);
    }

    #[test]
    fn single_point() {
        let z = SetDescriptor::points_1d(&[Rat::zero()]);
        let c = ZeroChain::new(vec![z], None).unwrap();
        let f = flat_zero_chain(&c, &line()).unwrap();
        assert_eq!(f.expr.eval(&[0.0]).unwrap(), 0.0);
        for x in [-0.9, -0.2, 0.05, 0.5, 1.0] {
            assert!(f.expr.eval(&[x]).unwrap() > 0.0);
        }
        let v = vanishing_order(&f.expr, &[0.0], &[1.0], 1e-2).unwrap();
        assert!(v.at_least(20.0, 0.0), "{v:?}");
        for x in [-0.7, -0.1, 0.02, 0.3] {
            let ln = ln_flat_value(&c, &f, &[x]);
            assert!((ln.exp() - f.expr.eval(&[x]).unwrap()).abs() <= 1e-14, "{x}");
        }
        assert!(ln_flat_value(&c, &f, &[1e-5]).is_finite());
    }

    #[test]
    fn non_descending_is_rejected() {
        let a = SetDescriptor::points_1d(&[Rat::zero()]);
        let b = SetDescriptor::points_1d(&[Rat::one()]);
        assert!(matches!(ZeroChain::new(vec![a, b], None), Err(FlatZeroError::NotDescending { .. })));
    }

    #[test]
    fn scales_must_decrease() {
        let a = SetDescriptor::points_1d(&[Rat::zero()]);
        assert!(matches!(ZeroChain::new(vec![a.clone(), a], Some(vec![0.1, 0.2])), Err(FlatZeroError::Scales)));
    }
}
