//! Closed sets (finite unions of points, intervals and balls) and boxes.

use serde::{Deserialize, Serialize};

use super::series::Series;
use super::univariate::pow_at;
use crate::rational::Rat;

/// Sharpness of the soft minimum over component distances.
pub const SOFTMIN_POWER: i32 = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ball {
    pub center: Vec<Rat>,
    pub radius: Rat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SetRepr {
    dim: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    points: Vec<Vec<Rat>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    intervals: Vec<[Rat; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    balls: Vec<Ball>,
}

#[derive(Clone, Debug, PartialEq)]
enum Part {
    Point(Vec<f64>),
    Interval(f64, f64),
    Ball(Vec<f64>, f64),
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SetError {
    #[error("dimension must be 1 or 2, got {0}")]
    BadDim(usize),
    #[error("coordinate count {got} does not match dimension {dim}")]
    Arity { dim: usize, got: usize },
    #[error("intervals are only allowed in dimension 1")]
    IntervalIn2d,
    #[error("interval [{0}, {1}] is reversed")]
    Reversed(Rat, Rat),
    #[error("negative radius {0}")]
    NegativeRadius(Rat),
    #[error("empty box side [{0}, {1}]")]
    EmptyBox(Rat, Rat),
}

/// Union of finitely many closed points, intervals (dimension 1) and balls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SetRepr", into = "SetRepr")]
pub struct SetDescriptor {
    repr: SetRepr,
    parts: Vec<Part>,
}

impl TryFrom<SetRepr> for SetDescriptor {
    type Error = SetError;

    fn try_from(repr: SetRepr) -> Result<Self, SetError> {
        let dim = repr.dim;
        if dim != 1 && dim != 2 {
            return Err(SetError::BadDim(dim));
        }
        let mut parts = Vec::new();
        for p in &repr.points {
            if p.len() != dim {
                return Err(SetError::Arity { dim, got: p.len() });
            }
            parts.push(Part::Point(p.iter().map(Rat::to_f64).collect()));
        }
        for [lo, hi] in &repr.intervals {
            if dim != 1 {
                return Err(SetError::IntervalIn2d);
            }
            if lo > hi {
                return Err(SetError::Reversed(lo.clone(), hi.clone()));
            }
            parts.push(Part::Interval(lo.to_f64(), hi.to_f64()));
        }
        for b in &repr.balls {
            if b.center.len() != dim {
                return Err(SetError::Arity { dim, got: b.center.len() });
            }
            if b.radius.0 < num_rational::BigRational::from_integer(0.into()) {
                return Err(SetError::NegativeRadius(b.radius.clone()));
            }
            parts.push(Part::Ball(b.center.iter().map(Rat::to_f64).collect(), b.radius.to_f64()));
        }
        Ok(SetDescriptor { repr, parts })
    }
}

impl From<SetDescriptor> for SetRepr {
    fn from(s: SetDescriptor) -> SetRepr {
        s.repr
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

impl SetDescriptor {
    pub fn empty(dim: usize) -> SetDescriptor {
        SetDescriptor::build(dim, vec![], vec![], vec![]).expect("valid")
    }

    pub fn build(dim: usize, points: Vec<Vec<Rat>>, intervals: Vec<(Rat, Rat)>, balls: Vec<Ball>) -> Result<SetDescriptor, SetError> {
        SetDescriptor::try_from(SetRepr {
            dim,
            points,
            intervals: intervals.into_iter().map(|(a, b)| [a, b]).collect(),
            balls,
        })
    }

    pub fn points(dim: usize, pts: Vec<Vec<Rat>>) -> Result<SetDescriptor, SetError> {
        SetDescriptor::build(dim, pts, vec![], vec![])
    }

    /// Points on the line.
    pub fn points_1d(pts: &[Rat]) -> SetDescriptor {
        SetDescriptor::points(1, pts.iter().map(|p| vec![p.clone()]).collect()).expect("valid")
    }

    pub fn dim(&self) -> usize {
        self.repr.dim
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn component_count(&self) -> usize {
        self.parts.len()
    }

    pub fn point_list(&self) -> &[Vec<Rat>] {
        &self.repr.points
    }

    pub fn interval_list(&self) -> Vec<(Rat, Rat)> {
        self.repr.intervals.iter().map(|[a, b]| (a.clone(), b.clone())).collect()
    }

    pub fn ball_list(&self) -> &[Ball] {
        &self.repr.balls
    }

    fn part_distance(p: &Part, x: &[f64]) -> f64 {
        match p {
            Part::Point(c) => norm(&x.iter().zip(c).map(|(a, b)| a - b).collect::<Vec<_>>()),
            Part::Interval(lo, hi) => (lo - x[0]).max(x[0] - hi),
            Part::Ball(c, r) => norm(&x.iter().zip(c).map(|(a, b)| a - b).collect::<Vec<_>>()) - r,
        }
    }

    /// Euclidean distance to the set, 0 inside; `+inf` for the empty set.
    pub fn distance(&self, x: &[f64]) -> f64 {
        self.parts.iter().map(|p| Self::part_distance(p, x).max(0.0)).fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.distance(x) <= 0.0
    }

    fn part_distance_series(p: &Part, xs: &[Series]) -> Series {
        match p {
            Part::Point(c) | Part::Ball(c, _) => {
                let sq = xs.iter().zip(c).map(|(s, ci)| {
                    let d = s.clone().add_const(-ci);
                    d.mul(&d)
                });
                let mut acc = Series::zero(xs[0].dim(), xs[0].order());
                for s in sq {
                    acc.add_assign(&s);
                }
                let r = match p {
                    Part::Ball(_, r) => *r,
                    _ => 0.0,
                };
                if xs[0].dim() == 1 {
                    let d = xs[0].clone().add_const(-c[0]);
                    let sgn = d.value().signum();
                    return d.scale(sgn).add_const(-r);
                }
                acc.compose(&pow_at(acc.value(), 0.5, acc.order())).add_const(-r)
            }
            Part::Interval(lo, hi) => {
                let x = &xs[0];
                if x.value() < *lo {
                    x.scale(-1.0).add_const(*lo)
                } else {
                    x.clone().add_const(-hi)
                }
            }
        }
    }

    /// Smoothed distance as a Taylor series at the point `xs` expands
    /// around: `d_m (1 + sum_{i != m} (d_m/d_i)^P)^(-1/P)` with `d_m` the
    /// nearest component. Returns `None` on the set.
    pub fn soft_distance_series(&self, xs: &[Series]) -> Option<Series> {
        if self.parts.is_empty() {
            return None;
        }
        let x0: Vec<f64> = xs.iter().map(Series::value).collect();
        let d0: Vec<f64> = self.parts.iter().map(|p| Self::part_distance(p, &x0)).collect();
        let (m, dm) = d0.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, d)| if *d < acc.1 { (i, *d) } else { acc });
        if dm <= 0.0 {
            return None;
        }
        let near = Self::part_distance_series(&self.parts[m], xs);
        let p = SOFTMIN_POWER;
        let mut total = Series::constant(xs[0].dim(), xs[0].order(), 1.0);
        let mut any = false;
        for (i, part) in self.parts.iter().enumerate() {
            if i == m || (dm / d0[i]).powi(p) < 1e-40 {
                continue;
            }
            any = true;
            let di = Self::part_distance_series(part, xs);
            let inv = di.compose(&super::univariate::recip_at(di.value(), di.order()));
            let ratio = near.mul(&inv);
            total.add_assign(&ratio.powi(p as u32));
        }
        if !any {
            return Some(near);
        }
        let shrink = total.compose(&pow_at(total.value(), -1.0 / p as f64, total.order()));
        Some(near.mul(&shrink))
    }

    /// Value of the smoothed distance; `None` on the set.
    pub fn soft_distance(&self, x: &[f64]) -> Option<f64> {
        let xs: Vec<Series> = x.iter().map(|v| Series::constant(x.len(), 0, *v)).collect();
        self.soft_distance_series(&xs).map(|s| s.value())
    }

    /// Smallest positive gap between two components, if there are two.
    pub fn min_gap(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for i in 0..self.parts.len() {
            for j in i + 1..self.parts.len() {
                let g = Self::gap(&self.parts[i], &self.parts[j]);
                if g > 0.0 {
                    best = Some(best.map_or(g, |b| b.min(g)));
                }
            }
        }
        best
    }

    fn anchor(p: &Part) -> (Vec<f64>, f64) {
        match p {
            Part::Point(c) => (c.clone(), 0.0),
            Part::Ball(c, r) => (c.clone(), *r),
            Part::Interval(lo, hi) => (vec![0.5 * (lo + hi)], 0.5 * (hi - lo)),
        }
    }

    fn gap(a: &Part, b: &Part) -> f64 {
        let (ca, ra) = Self::anchor(a);
        let (cb, rb) = Self::anchor(b);
        let d = norm(&ca.iter().zip(&cb).map(|(x, y)| x - y).collect::<Vec<_>>());
        (d - ra - rb).max(0.0)
    }

    /// Components as closed intervals (dimension 1), sorted and merged.
    pub fn intervals_1d(&self) -> Vec<(Rat, Rat)> {
        self.fattened_1d(&Rat::zero())
    }

    /// Closed `eps`-neighbourhood as merged intervals (dimension 1).
    pub fn fattened_1d(&self, eps: &Rat) -> Vec<(Rat, Rat)> {
        assert_eq!(self.dim(), 1);
        let mut iv: Vec<(Rat, Rat)> = Vec::new();
        for p in &self.repr.points {
            iv.push((p[0].clone(), p[0].clone()));
        }
        for [a, b] in &self.repr.intervals {
            iv.push((a.clone(), b.clone()));
        }
        for b in &self.repr.balls {
            let c = &b.center[0].0;
            iv.push((Rat(c - &b.radius.0), Rat(c + &b.radius.0)));
        }
        for (a, b) in iv.iter_mut() {
            *a = Rat(&a.0 - &eps.0);
            *b = Rat(&b.0 + &eps.0);
        }
        iv.sort();
        let mut out: Vec<(Rat, Rat)> = Vec::new();
        for (a, b) in iv {
            if let Some(last) = out.last_mut() {
                if a <= last.1 {
                    if b > last.1 {
                        last.1 = b;
                    }
                    continue;
                }
            }
            out.push((a, b));
        }
        out
    }

    /// Closed `eps`-neighbourhood as a set: merged intervals in 1D, discs in 2D.
    pub fn fattened(&self, eps: &Rat) -> SetDescriptor {
        if self.dim() == 1 {
            return SetDescriptor::build(1, vec![], self.fattened_1d(eps), vec![]).expect("merged intervals are valid");
        }
        let mut balls: Vec<Ball> = self.repr.points.iter().map(|p| Ball { center: p.clone(), radius: eps.clone() }).collect();
        for b in &self.repr.balls {
            balls.push(Ball { center: b.center.clone(), radius: Rat(&b.radius.0 + &eps.0) });
        }
        SetDescriptor::build(2, vec![], vec![], balls).expect("valid discs")
    }

    /// Axis-aligned boxes covering each component (points give degenerate boxes).
    pub fn bounding_boxes(&self) -> Vec<Vec<(f64, f64)>> {
        self.parts
            .iter()
            .map(|p| match p {
                Part::Point(c) => c.iter().map(|v| (*v, *v)).collect(),
                Part::Interval(lo, hi) => vec![(*lo, *hi)],
                Part::Ball(c, r) => c.iter().map(|v| (v - r, v + r)).collect(),
            })
            .collect()
    }

    /// Representative points of the set: all points, interval ends and
    /// interior samples, ball centers and boundary samples.
    pub fn sample_points(&self, per_component: usize) -> Vec<Vec<f64>> {
        let n = per_component.max(2);
        let mut out = Vec::new();
        for p in &self.parts {
            match p {
                Part::Point(c) => out.push(c.clone()),
                Part::Interval(lo, hi) => {
                    for i in 0..n {
                        out.push(vec![lo + (hi - lo) * i as f64 / (n - 1) as f64]);
                    }
                }
                Part::Ball(c, r) => {
                    out.push(c.clone());
                    if c.len() == 1 {
                        out.push(vec![c[0] - r]);
                        out.push(vec![c[0] + r]);
                    } else {
                        for i in 0..n {
                            let t = std::f64::consts::TAU * i as f64 / n as f64;
                            out.push(vec![c[0] + r * t.cos(), c[1] + r * t.sin()]);
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionRepr {
    #[serde(rename = "box")]
    bounds: Vec<[Rat; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    excluded: Option<SetDescriptor>,
}

/// A closed box in dimension 1 or 2, optionally minus a closed set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RegionRepr", into = "RegionRepr")]
pub struct Region {
    repr: RegionRepr,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl TryFrom<RegionRepr> for Region {
    type Error = SetError;

    fn try_from(repr: RegionRepr) -> Result<Region, SetError> {
        let dim = repr.bounds.len();
        if dim != 1 && dim != 2 {
            return Err(SetError::BadDim(dim));
        }
        for [a, b] in &repr.bounds {
            if a >= b {
                return Err(SetError::EmptyBox(a.clone(), b.clone()));
            }
        }
        if let Some(ex) = &repr.excluded {
            if ex.dim() != dim {
                return Err(SetError::Arity { dim, got: ex.dim() });
            }
        }
        let lo = repr.bounds.iter().map(|[a, _]| a.to_f64()).collect();
        let hi = repr.bounds.iter().map(|[_, b]| b.to_f64()).collect();
        Ok(Region { repr, lo, hi })
    }
}

impl From<Region> for RegionRepr {
    fn from(r: Region) -> RegionRepr {
        r.repr
    }
}

impl Region {
    pub fn new(bounds: Vec<(Rat, Rat)>) -> Result<Region, SetError> {
        Region::try_from(RegionRepr { bounds: bounds.into_iter().map(|(a, b)| [a, b]).collect(), excluded: None })
    }

    pub fn interval(lo: Rat, hi: Rat) -> Region {
        Region::new(vec![(lo, hi)]).expect("nonempty interval")
    }

    pub fn rect(x: (Rat, Rat), y: (Rat, Rat)) -> Region {
        Region::new(vec![x, y]).expect("nonempty rectangle")
    }

    pub fn with_excluded(mut self, set: SetDescriptor) -> Result<Region, SetError> {
        if set.dim() != self.dim() {
            return Err(SetError::Arity { dim: self.dim(), got: set.dim() });
        }
        self.repr.excluded = Some(set);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn bounds_exact(&self) -> Vec<(Rat, Rat)> {
        self.repr.bounds.iter().map(|[a, b]| (a.clone(), b.clone())).collect()
    }

    pub fn excluded(&self) -> Option<&SetDescriptor> {
        self.repr.excluded.as_ref()
    }

    pub fn width(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).fold(0.0, f64::max)
    }

    pub fn min_width(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).fold(f64::INFINITY, f64::min)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// Closed-box membership with a relative slack of `1e-12`, minus the
    /// excluded set.
    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        for i in 0..self.dim() {
            let slack = 1e-12 * (self.hi[i] - self.lo[i]);
            if !(x[i] >= self.lo[i] - slack && x[i] <= self.hi[i] + slack) {
                return false;
            }
        }
        match &self.repr.excluded {
            Some(ex) => !ex.contains(x),
            None => true,
        }
    }

    /// Distance from `x` to the box boundary (positive inside).
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        (0..self.dim()).map(|i| (x[i] - self.lo[i]).min(self.hi[i] - x[i])).fold(f64::INFINITY, f64::min)
    }

    /// Uniform grid with `n` points per axis, endpoints included.
    pub fn grid(&self, n: usize) -> Vec<Vec<f64>> {
        let n = n.max(2);
        let axis = |i: usize| -> Vec<f64> {
            (0..n).map(|k| self.lo[i] + (self.hi[i] - self.lo[i]) * k as f64 / (n - 1) as f64).collect()
        };
        if self.dim() == 1 {
            axis(0).into_iter().map(|v| vec![v]).collect()
        } else {
            let xs = axis(0);
            let ys = axis(1);
            let mut out = Vec::with_capacity(n * n);
            for x in &xs {
                for y in &ys {
                    out.push(vec![*x, *y]);
                }
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distances() {
        let s = SetDescriptor::build(1, vec![vec![Rat::int(0)]], vec![(Rat::int(2), Rat::int(3))], vec![]).unwrap();
        assert_eq!(s.distance(&[0.5]), 0.5);
        assert_eq!(s.distance(&[2.5]), 0.0);
        assert_eq!(s.distance(&[4.0]), 1.0);
        assert_eq!(s.min_gap(), Some(2.0));
        let merged = s.fattened_1d(&Rat::new(3, 2));
        assert_eq!(merged, vec![(Rat::new(-3, 2), Rat::new(9, 2))]);
    }

    #[test]
    fn soft_distance_single_point_is_exact() {
        let s = SetDescriptor::points_1d(&[Rat::int(0)]);
        let x = Series::variable(1, 3, 0, 0.5);
        let d = s.soft_distance_series(&[x]).unwrap();
        assert_eq!(d.raw(), vec![0.5, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn soft_distance_is_below_true_distance() {
        let s = SetDescriptor::points_1d(&[Rat::int(0), Rat::int(1)]);
        for i in 1..100 {
            let x = i as f64 / 100.0;
            let d = s.soft_distance_series(&[Series::variable(1, 0, 0, x)]).unwrap().value();
            let t = s.distance(&[x]);
            assert!(d <= t * (1.0 + 1e-15) && d >= t * 2f64.powf(-1.0 / 64.0) * (1.0 - 1e-15));
        }
    }

    #[test]
    fn region_json_round_trip() {
        let r: Region = serde_json::from_str(r#"{"box": [["-1", "1"], [{"num":"0","den":"1"}, "1/2"]]}"#).unwrap();
        assert_eq!(r.dim(), 2);
        let back: Region = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
        assert!(serde_json::from_str::<Region>(r#"{"box": [["1", "1"]]}"#).is_err());
        assert!(serde_json::from_str::<Region>(r#"{"box": [["0", "1"]], "extra": 1}"#).is_err());
    }
}
