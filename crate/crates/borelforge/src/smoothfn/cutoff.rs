//! Controlled cutoffs with measured derivative certificates, and flat gauges.

use serde::{Deserialize, Serialize};

use super::expr::{ExprBuilder, ExprError, NodeId, SmoothExpr};
use super::set::{Ball, Region, SetDescriptor};
use crate::rational::Rat;
use crate::verify::{sup_norm_doubled, VerifyError};

/// Points per axis used when measuring certificate norms in 1D.
pub const CERT_GRID_1D: usize = 401;
pub const CERT_GRID_2D: usize = 61;

#[derive(Debug, thiserror::Error)]
pub enum CutoffError {
    #[error("widths must be positive and nonincreasing")]
    BadWidths,
    #[error("{0} widths requested, at most 12 are supported")]
    TooManyWidths(usize),
    #[error("fattening by {total} leaves the region")]
    WidthsTooLarge { total: f64 },
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

/// A cutoff with its claimed bounds `sup |tau^(k)| <= C^k / (d_1 ... d_k)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CutoffCertificate {
    pub expr: SmoothExpr,
    pub inner: SetDescriptor,
    /// A superset of the support.
    pub outer: SetDescriptor,
    pub widths: Vec<Rat>,
    /// Fitted constant.
    pub c: f64,
    pub max_order: usize,
    /// Measured `sup |tau^(k)|` for `k = 0..=max_order`.
    pub sup_norms: Vec<f64>,
    /// Relative change of each measured norm under grid doubling.
    pub doubling_change: Vec<f64>,
    pub grid: usize,
}

impl CutoffCertificate {
    /// `C^k / (d_1 ... d_k)`.
    pub fn bound(&self, k: usize) -> f64 {
        let prod: f64 = self.widths.iter().take(k).map(Rat::to_f64).product();
        self.c.powi(k as i32) / prod
    }

    pub fn holds(&self) -> bool {
        (1..=self.max_order).all(|k| self.sup_norms[k] <= self.bound(k) * (1.0 + 1e-12)) && self.sup_norms[0] <= 1.0
    }
}

fn check_widths(widths: &[Rat]) -> Result<(), CutoffError> {
    if widths.len() > 12 {
        return Err(CutoffError::TooManyWidths(widths.len()));
    }
    if widths.is_empty() || widths.iter().any(|w| !w.is_positive()) || widths.windows(2).any(|w| w[1] > w[0]) {
        return Err(CutoffError::BadWidths);
    }
    Ok(())
}

fn total(widths: &[Rat]) -> Rat {
    Rat(widths.iter().map(|w| w.0.clone()).sum())
}

/// Axis-aligned boxes (exact) covering each component of a set.
fn component_boxes(set: &SetDescriptor) -> Vec<Vec<(Rat, Rat)>> {
    let mut out: Vec<Vec<(Rat, Rat)>> = set.point_list().iter().map(|p| p.iter().map(|v| (v.clone(), v.clone())).collect()).collect();
    for (a, b) in set.interval_list() {
        out.push(vec![(a, b)]);
    }
    for b in set.ball_list() {
        out.push(b.center.iter().map(|c| (Rat(&c.0 - &b.radius.0), Rat(&c.0 + &b.radius.0))).collect());
    }
    out
}

/// Adds the smoothed indicator of `inner` to a builder: 1 on `inner`,
/// supported in its `sum(widths)`-fattening (sup-norm fattening in 2D).
pub fn hormander_node(b: &mut ExprBuilder, inner: &SetDescriptor, widths: &[Rat]) -> Result<NodeId, CutoffError> {
    check_widths(widths)?;
    if inner.is_empty() {
        return Ok(b.num(0.0));
    }
    if inner.dim() == 1 {
        let x = b.coord(0);
        return Ok(b.hormander(x, inner.intervals_1d(), widths.to_vec()));
    }
    let x = b.coord(0);
    let y = b.coord(1);
    let one = b.num(1.0);
    let mut complements = Vec::new();
    let boxes = component_boxes(inner);
    for bx in &boxes {
        let tx = b.hormander(x, vec![bx[0].clone()], widths.to_vec());
        let ty = b.hormander(y, vec![bx[1].clone()], widths.to_vec());
        let t = b.mul(vec![tx, ty]);
        if boxes.len() == 1 {
            return Ok(t);
        }
        complements.push(b.sub(one, t));
    }
    let prod = b.mul(complements);
    Ok(b.sub(one, prod))
}

fn outer_set(inner: &SetDescriptor, d: &Rat) -> SetDescriptor {
    if inner.dim() == 1 {
        let iv = inner.fattened_1d(d);
        return SetDescriptor::build(1, vec![], iv, vec![]).expect("merged intervals are valid");
    }
    // a disc around each fattened box
    let balls = component_boxes(inner)
        .into_iter()
        .map(|bx| {
            let half: Vec<f64> = bx.iter().map(|(a, b)| 0.5 * (b.to_f64() - a.to_f64()) + d.to_f64()).collect();
            let r = (half[0] * half[0] + half[1] * half[1]).sqrt() * (1.0 + 1e-12);
            Ball {
                center: bx.iter().map(|(a, b)| Rat((&a.0 + &b.0) / num_bigint::BigInt::from(2))).collect(),
                radius: Rat::from_f64(r).expect("finite"),
            }
        })
        .collect();
    SetDescriptor::build(2, vec![], vec![], balls).expect("valid discs")
}

/// Smoothed indicator of `inner` with certified derivative bounds.
pub fn hormander_cutoff(inner: &SetDescriptor, widths: &[Rat], region: &Region) -> Result<CutoffCertificate, CutoffError> {
    check_widths(widths)?;
    let d = total(widths);
    let df = d.to_f64();
    let boxes: Vec<Vec<(f64, f64)>> = component_boxes(inner)
        .iter()
        .map(|bx| bx.iter().map(|(a, b)| (a.to_f64() - df, b.to_f64() + df)).collect())
        .collect();
    for bx in &boxes {
        for (i, (a, b)) in bx.iter().enumerate() {
            if *a < region.lo()[i] || *b > region.hi()[i] {
                return Err(CutoffError::WidthsTooLarge { total: df });
            }
        }
    }
    let mut b = ExprBuilder::new(region);
    let root = hormander_node(&mut b, inner, widths)?;
    let expr = b.finish(root)?;
    let m = widths.len();
    let outer = outer_set(inner, &d);
    if inner.is_empty() {
        return Ok(CutoffCertificate {
            expr,
            inner: inner.clone(),
            outer,
            widths: widths.to_vec(),
            c: 1.0,
            max_order: m,
            sup_norms: vec![0.0; m + 1],
            doubling_change: vec![0.0; m + 1],
            grid: 0,
        });
    }
    // derivatives vanish off the transition layers, so only those are sampled
    let windows: Vec<Vec<(f64, f64)>> = if inner.dim() == 1 {
        let mut w = Vec::new();
        for (a, bb) in inner.intervals_1d() {
            let (a, bb) = (a.to_f64(), bb.to_f64());
            w.push(vec![(a - df, a)]);
            w.push(vec![(bb, bb + df)]);
        }
        w
    } else {
        boxes.clone()
    };
    let grid = if inner.dim() == 1 { CERT_GRID_1D } else { CERT_GRID_2D };
    let mut sup_norms = vec![0.0f64; m + 1];
    let mut doubling_change = vec![0.0f64; m + 1];
    for k in 0..=m {
        for w in &windows {
            let (_, fine, rel) = sup_norm_doubled(&expr, w, k, grid)?;
            if fine.value >= sup_norms[k] {
                sup_norms[k] = fine.value;
                doubling_change[k] = rel;
            }
        }
    }
    let mut prod = 1.0;
    let mut c: f64 = 0.0;
    for k in 1..=m {
        prod *= widths[k - 1].to_f64();
        c = c.max((sup_norms[k] * prod).powf(1.0 / k as f64));
    }
    // one part in 1e9 of headroom for the final comparison
    c *= 1.0 + 1e-9;
    Ok(CutoffCertificate { expr, inner: inner.clone(), outer, widths: widths.to_vec(), c, max_order: m, sup_norms, doubling_change, grid })
}

/// `exp(-L / dist(x, Z))` through the smoothed distance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlatGauge {
    pub expr: SmoothExpr,
    /// `L = min(1, half the smallest gap between components)`.
    pub scale: f64,
    /// Set when Z covers every sample of the region (the gauge is then 0).
    pub covers_region: bool,
}

pub fn gauge_scale(z: &SetDescriptor) -> f64 {
    z.min_gap().map_or(1.0, |g| (0.5 * g).min(1.0))
}

pub fn flat_gauge(z: &SetDescriptor, region: &Region) -> Result<FlatGauge, CutoffError> {
    if z.dim() != region.dim() {
        return Err(ExprError::Dimension { expected: region.dim(), got: z.dim() }.into());
    }
    let scale = gauge_scale(z);
    let mut b = ExprBuilder::new(region);
    let g = b.gauge(z.clone(), scale);
    let expr = b.finish(g)?;
    let covers_region = !z.is_empty() && region.grid(11).iter().all(|p| z.contains(p));
    Ok(FlatGauge { expr, scale, covers_region })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::fd_jet;

    fn line(a: i64, b: i64) -> Region {
        Region::interval(Rat::int(a), Rat::int(b))
    }

    fn unit_interval() -> SetDescriptor {
        SetDescriptor::build(1, vec![], vec![(Rat::int(-1), Rat::int(1))], vec![]).unwrap()
    }

    #[test]
    fn single_width_cutoff() {
        let cert = hormander_cutoff(&unit_interval(), &[Rat::new(1, 10)], &line(-2, 2)).unwrap();
        assert_eq!(cert.expr.eval(&[0.7]).unwrap(), 1.0);
        assert_eq!(cert.expr.eval(&[-1.1]).unwrap(), 0.0);
        assert_eq!(cert.expr.eval(&[1.1]).unwrap(), 0.0);
        assert!(cert.holds());
        assert!(cert.sup_norms[1] <= cert.c / 0.1);
    }

    #[test]
    fn empty_inner_gives_zero() {
        let cert = hormander_cutoff(&SetDescriptor::empty(1), &[Rat::new(1, 10)], &line(-2, 2)).unwrap();
        assert_eq!(cert.expr.eval(&[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn too_wide_is_rejected() {
        let r = hormander_cutoff(&unit_interval(), &[Rat::int(1), Rat::new(1, 2)], &line(-2, 2));
        assert!(matches!(r, Err(CutoffError::WidthsTooLarge { .. })));
    }

    #[test]
    fn cutoff_derivatives_match_finite_differences() {
        let w = [Rat::new(1, 10), Rat::new(1, 20)];
        let cert = hormander_cutoff(&unit_interval(), &w, &line(-2, 2)).unwrap();
        for x in [1.03, 1.07, 1.11, -1.05] {
            let exact = cert.expr.eval_derivs(&[x], 3).unwrap();
            let fd = fd_jet(&cert.expr, &[x], 3, 0.01).unwrap();
            for i in 0..=3 {
                assert!(fd.agrees(i, exact[i], 1e-6 * (1.0 + exact[i].abs())), "x={x} k={i}: {} vs {}", fd.values[i], exact[i]);
            }
        }
    }

    #[test]
    fn two_dim_cutoff_plateau_and_support() {
        let p = SetDescriptor::points(2, vec![vec![Rat::int(0), Rat::int(0)]]).unwrap();
        let r = Region::rect((Rat::int(-1), Rat::int(1)), (Rat::int(-1), Rat::int(1)));
        let cert = hormander_cutoff(&p, &[Rat::new(1, 5)], &r).unwrap();
        assert_eq!(cert.expr.eval(&[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cert.expr.eval(&[0.0, 0.21]).unwrap(), 0.0);
        assert!(cert.holds());
    }

    #[test]
    fn gauge_closed_form_and_flatness() {
        let z = SetDescriptor::points_1d(&[Rat::int(0)]);
        let g = flat_gauge(&z, &line(-1, 1)).unwrap();
        assert!((g.expr.eval(&[0.5]).unwrap() - (-2f64).exp()).abs() < 1e-15);
        assert_eq!(g.expr.eval(&[0.0]).unwrap(), 0.0);
        let fd = fd_jet(&g.expr, &[1e-3], 10, 1e-4).unwrap();
        assert!(fd.values[10].abs() < 1e-8);
        let e = flat_gauge(&SetDescriptor::empty(1), &line(-1, 1)).unwrap();
        assert_eq!(e.expr.eval(&[0.3]).unwrap(), 1.0);
        let all = SetDescriptor::build(1, vec![], vec![(Rat::int(-1), Rat::int(1))], vec![]).unwrap();
        assert!(flat_gauge(&all, &line(-1, 1)).unwrap().covers_region);
    }
}
