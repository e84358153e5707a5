//! Jets: finite tables of raw partial derivatives at a base point.
//!
//! Products use the Leibniz rule in raw coordinates,
//! `(ab)^(k) = sum_{l <= k} C(k, l) a^(l) b^(k-l)` with multinomial
//! `C(k, l) = prod_i C(k_i, l_i)`. This is the same product as the
//! symmetrized tensor product on Taylor coefficients: writing
//! `a = sum a^(l) x^l / l!` and multiplying the two series gives the
//! coefficient of `x^k / k!` as `sum_l k!/(l!(k-l)!) a^(l) b^(k-l)`, and the
//! binomial weight of two symmetric tensors of degrees `l` and `k - l` is
//! exactly that factor. Storing raw partials avoids the tensor bookkeeping.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::rational::Rat;
use crate::smoothfn::expr::{ExprError, SmoothExpr};
use crate::smoothfn::series::{factorial, index_of, multi_indices, table_len, Series, MAX_ORDER};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum JetError {
    #[error("base points differ")]
    BaseMismatch,
    #[error("dimension must be 1 or 2 and match the base point")]
    Dimension,
    #[error("order {0} exceeds the maximum {MAX_ORDER}")]
    OrderTooHigh(usize),
    #[error("expected {expected} coefficients for order {order}, got {got}")]
    Length { order: usize, expected: usize, got: usize },
    #[error("non-finite coefficient at index {0}")]
    NonFinite(usize),
    #[error("jet order {have} is below the requested order {want}")]
    OrderTooLow { have: usize, want: usize },
    #[error("point index {0} out of range")]
    NoSuchPoint(usize),
    #[error("base points {0} and {1} coincide")]
    Duplicate(usize, usize),
    #[error("segment {0}: {1}")]
    Segment(usize, String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JetRepr {
    base: Vec<Rat>,
    order: usize,
    coeffs: Vec<f64>,
}

/// Raw partials `f^(k)(base)` for `|k| <= order`, graded-lex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "JetRepr", into = "JetRepr")]
pub struct Jet {
    base: Vec<Rat>,
    order: usize,
    coeffs: Vec<f64>,
}

impl TryFrom<JetRepr> for Jet {
    type Error = JetError;
    fn try_from(r: JetRepr) -> Result<Jet, JetError> {
        Jet::new(r.base, r.order, r.coeffs)
    }
}

impl From<Jet> for JetRepr {
    fn from(j: Jet) -> JetRepr {
        JetRepr { base: j.base, order: j.order, coeffs: j.coeffs }
    }
}

fn rat(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

fn binom(n: usize, k: usize) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

impl Jet {
    pub fn new(base: Vec<Rat>, order: usize, coeffs: Vec<f64>) -> Result<Jet, JetError> {
        let dim = base.len();
        if dim != 1 && dim != 2 {
            return Err(JetError::Dimension);
        }
        if order > MAX_ORDER {
            return Err(JetError::OrderTooHigh(order));
        }
        let expected = table_len(dim, order);
        if coeffs.len() != expected {
            return Err(JetError::Length { order, expected, got: coeffs.len() });
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(JetError::NonFinite(i));
        }
        Ok(Jet { base, order, coeffs })
    }

    pub fn zero(base: Vec<Rat>, order: usize) -> Jet {
        let n = table_len(base.len(), order);
        Jet::new(base, order, vec![0.0; n]).expect("valid zero jet")
    }

    /// Sampled from an expression by Taylor propagation.
    pub fn from_expr(e: &SmoothExpr, base: Vec<Rat>, order: usize) -> Result<Jet, JetError> {
        let x: Vec<f64> = base.iter().map(Rat::to_f64).collect();
        let raw = e.eval_derivs(&x, order)?;
        Jet::new(base, order, raw)
    }

    pub fn dim(&self) -> usize {
        self.base.len()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn base(&self) -> &[Rat] {
        &self.base
    }

    pub fn base_f64(&self) -> Vec<f64> {
        self.base.iter().map(Rat::to_f64).collect()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn get(&self, alpha: &[usize]) -> f64 {
        self.coeffs[index_of(self.dim(), alpha)]
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == 0.0)
    }

    /// Normalized Taylor coefficients as a series.
    pub fn to_series(&self) -> Series {
        let c = multi_indices(self.dim(), self.order)
            .iter()
            .zip(&self.coeffs)
            .map(|(a, v)| v / a.iter().map(|k| factorial(*k)).product::<f64>())
            .collect();
        Series::from_normalized(self.dim(), self.order, c)
    }

    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.order);
        Jet { base: self.base.clone(), order, coeffs: self.coeffs[..table_len(self.dim(), order)].to_vec() }
    }

    pub fn sub(&self, other: &Jet) -> Result<Jet, JetError> {
        if self.base != other.base {
            return Err(JetError::BaseMismatch);
        }
        let order = self.order.min(other.order);
        let n = table_len(self.dim(), order);
        let coeffs = self.coeffs[..n].iter().zip(&other.coeffs[..n]).map(|(a, b)| a - b).collect();
        Ok(Jet { base: self.base.clone(), order, coeffs })
    }

    /// Values of `sum_{|l| <= d - |k|} h_{k+l} delta^l / l!` for `|k| <= d`,
    /// evaluated exactly in rationals and rounded once.
    fn transported(&self, delta: &[BigRational], d: usize) -> Vec<f64> {
        let dim = self.dim();
        let idx = multi_indices(dim, d);
        let h: Vec<BigRational> = self.coeffs.iter().map(|c| rat(*c)).collect();
        let fact: Vec<BigRational> = (0..=self.order)
            .scan(BigInt::from(1), |acc, k| {
                if k > 0 {
                    *acc *= k;
                }
                Some(BigRational::from_integer(acc.clone()))
            })
            .collect();
        let powers: Vec<Vec<BigRational>> = delta
            .iter()
            .map(|dv| {
                let mut p = vec![BigRational::from_integer(1.into())];
                for i in 1..=self.order {
                    let next = &p[i - 1] * dv;
                    p.push(next);
                }
                p
            })
            .collect();
        idx.iter()
            .map(|k| {
                let deg: usize = k.iter().sum();
                let mut acc = BigRational::zero();
                for l in multi_indices(dim, d - deg) {
                    let kl: Vec<usize> = k.iter().zip(&l).map(|(a, b)| a + b).collect();
                    let mut term = h[index_of(dim, &kl)].clone();
                    if term.is_zero() {
                        continue;
                    }
                    for (i, li) in l.iter().enumerate() {
                        term = term * &powers[i][*li] / &fact[*li];
                    }
                    acc += term;
                }
                acc.to_f64().unwrap_or(f64::NAN)
            })
            .collect()
    }

    fn delta(&self, to: &[Rat]) -> Vec<BigRational> {
        to.iter().zip(&self.base).map(|(a, b)| &a.0 - &b.0).collect()
    }
}

/// Leibniz product; the result has the smaller order.
pub fn jet_mul(a: &Jet, b: &Jet) -> Result<Jet, JetError> {
    if a.base != b.base {
        return Err(JetError::BaseMismatch);
    }
    let dim = a.dim();
    let order = a.order.min(b.order);
    let idx = multi_indices(dim, order);
    let coeffs = idx
        .iter()
        .map(|k| {
            let deg: usize = k.iter().sum();
            let mut s = 0.0;
            for l in multi_indices(dim, deg) {
                if l.iter().zip(k).any(|(li, ki)| li > ki) {
                    continue;
                }
                let rest: Vec<usize> = k.iter().zip(&l).map(|(ki, li)| ki - li).collect();
                let c: f64 = k.iter().zip(&l).map(|(ki, li)| binom(*ki, *li)).product();
                s += c * a.get(&l) * b.get(&rest);
            }
            s
        })
        .collect();
    Ok(Jet { base: a.base.clone(), order, coeffs })
}

/// Taylor re-expansion of the jet's polynomial at `new_base`.
pub fn jet_shift(a: &Jet, new_base: &[Rat]) -> Result<Jet, JetError> {
    if new_base.len() != a.dim() {
        return Err(JetError::Dimension);
    }
    let coeffs = a.transported(&a.delta(new_base), a.order);
    Jet::new(new_base.to_vec(), a.order, coeffs)
}

/// Prescribed data on finitely many points and, in 2D, axis-aligned segments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FieldRepr", into = "FieldRepr")]
pub struct JetField {
    repr: FieldRepr,
}

/// Transverse data along `{x_axis in [from, to], other coordinate = level}`:
/// `transverse[k]` holds ascending polynomial coefficients of
/// `d^k f / dn^k` as a function of the along-axis coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub axis: usize,
    pub level: Rat,
    pub from: Rat,
    pub to: Rat,
    pub transverse: Vec<Vec<Rat>>,
}

/// Largest polynomial degree accepted along a segment.
pub const MAX_SEGMENT_DEGREE: usize = 20;

impl Segment {
    /// Transverse order carried.
    pub fn order(&self) -> usize {
        self.transverse.len().saturating_sub(1)
    }

    /// `d^k f / dn^k` at along-axis coordinate `s`, and its `j`-th `s`-derivative.
    pub fn data(&self, k: usize, j: usize, s: f64) -> f64 {
        let Some(p) = self.transverse.get(k) else { return 0.0 };
        let mut acc = 0.0;
        for (i, c) in p.iter().enumerate().skip(j) {
            let fall: f64 = ((i - j + 1)..=i).map(|v| v as f64).product();
            acc += c.to_f64() * fall * s.powi((i - j) as i32);
        }
        acc
    }

    /// Point of the segment at along-axis coordinate `s`.
    pub fn point(&self, s: &Rat) -> Vec<Rat> {
        if self.axis == 0 {
            vec![s.clone(), self.level.clone()]
        } else {
            vec![self.level.clone(), s.clone()]
        }
    }

    pub fn contains(&self, p: &[Rat]) -> bool {
        let (along, across) = if self.axis == 0 { (&p[0], &p[1]) } else { (&p[1], &p[0]) };
        *across == self.level && *along >= self.from && *along <= self.to
    }

    pub fn is_endpoint(&self, p: &[Rat]) -> bool {
        *p == self.point(&self.from)[..] || *p == self.point(&self.to)[..]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FieldRepr {
    dim: usize,
    #[serde(default)]
    points: Vec<Jet>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    segments: Vec<Segment>,
}

impl TryFrom<FieldRepr> for JetField {
    type Error = JetError;
    fn try_from(r: FieldRepr) -> Result<JetField, JetError> {
        JetField::new(r.dim, r.points, r.segments)
    }
}

impl From<JetField> for FieldRepr {
    fn from(f: JetField) -> FieldRepr {
        f.repr
    }
}

/// Compatibility residual between two jets of a field.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Residual {
    /// Graded-lex residual table for `|k| <= d`.
    pub table: Vec<f64>,
    pub max_abs: f64,
    /// `|x - y|` (Euclidean).
    pub scale: f64,
    pub compatible: bool,
}

pub const COMPAT_TOL_ABS: f64 = 1e-9;
pub const COMPAT_TOL_REL: f64 = 1e-3;

impl JetField {
    pub fn new(dim: usize, points: Vec<Jet>, segments: Vec<Segment>) -> Result<JetField, JetError> {
        if dim != 1 && dim != 2 {
            return Err(JetError::Dimension);
        }
        for p in &points {
            if p.dim() != dim {
                return Err(JetError::Dimension);
            }
        }
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                if points[i].base == points[j].base {
                    return Err(JetError::Duplicate(i, j));
                }
            }
        }
        for (i, s) in segments.iter().enumerate() {
            if dim != 2 {
                return Err(JetError::Segment(i, "segments need dimension 2".into()));
            }
            if s.axis > 1 {
                return Err(JetError::Segment(i, "axis must be 0 or 1".into()));
            }
            if s.from >= s.to {
                return Err(JetError::Segment(i, "empty segment".into()));
            }
            if s.transverse.is_empty() || s.transverse.iter().any(|p| p.len() > MAX_SEGMENT_DEGREE + 1) {
                return Err(JetError::Segment(i, format!("need 1 to {} polynomial coefficients per order", MAX_SEGMENT_DEGREE + 1)));
            }
            if s.order() > MAX_ORDER {
                return Err(JetError::OrderTooHigh(s.order()));
            }
            for p in &points {
                if s.contains(&p.base) && !s.is_endpoint(&p.base) {
                    return Err(JetError::Segment(i, "a listed point lies inside the segment".into()));
                }
            }
            for (j, t) in segments.iter().enumerate().skip(i + 1) {
                if segments_meet(s, t) {
                    return Err(JetError::Segment(i, format!("meets segment {j}")));
                }
            }
        }
        Ok(JetField { repr: FieldRepr { dim, points, segments } })
    }

    pub fn points_only(points: Vec<Jet>) -> Result<JetField, JetError> {
        let dim = points.first().map_or(1, Jet::dim);
        JetField::new(dim, points, vec![])
    }

    pub fn dim(&self) -> usize {
        self.repr.dim
    }

    pub fn points(&self) -> &[Jet] {
        &self.repr.points
    }

    pub fn segments(&self) -> &[Segment] {
        &self.repr.segments
    }

    /// `h_k|x - sum_{|l| <= d-|k|} h_{k+l}|y (x-y)^l / l!` for `|k| <= d`.
    pub fn compat_residual(&self, x: usize, y: usize, d: usize) -> Result<Residual, JetError> {
        let px = self.points().get(x).ok_or(JetError::NoSuchPoint(x))?;
        let py = self.points().get(y).ok_or(JetError::NoSuchPoint(y))?;
        compat_residual(px, py, d)
    }
}

fn segments_meet(s: &Segment, t: &Segment) -> bool {
    if s.axis == t.axis {
        return s.level == t.level && s.from <= t.to && t.from <= s.to;
    }
    // crossing: s horizontal-ish along its axis, t along the other
    t.level >= s.from && t.level <= s.to && s.level >= t.from && s.level <= t.to
}

/// Residual of `x`'s jet against the Taylor transport of `y`'s jet.
pub fn compat_residual(px: &Jet, py: &Jet, d: usize) -> Result<Residual, JetError> {
    if px.dim() != py.dim() {
        return Err(JetError::Dimension);
    }
    let have = px.order.min(py.order);
    if have < d {
        return Err(JetError::OrderTooLow { have, want: d });
    }
    let moved = py.transported(&py.delta(&px.base), d);
    let table: Vec<f64> = px.coeffs[..moved.len()].iter().zip(&moved).map(|(a, b)| a - b).collect();
    let scale = px.base_f64().iter().zip(py.base_f64()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let idx = multi_indices(px.dim(), d);
    let compatible = table.iter().zip(&idx).all(|(r, k)| {
        let deg: usize = k.iter().sum();
        r.abs() <= COMPAT_TOL_ABS + COMPAT_TOL_REL * scale.powi((d + 1 - deg) as i32)
    });
    let max_abs = table.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(Residual { table, max_abs, scale, compatible })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn j1(base: i64, c: &[f64]) -> Jet {
        Jet::new(vec![Rat::int(base)], c.len() - 1, c.to_vec()).unwrap()
    }

    #[test]
    fn unit_and_square() {
        let x = j1(0, &[0.0, 1.0, 0.0]);
        assert_eq!(jet_mul(&x, &x).unwrap().coeffs(), &[0.0, 0.0, 2.0]);
        let one = j1(0, &[1.0, 0.0, 0.0]);
        assert_eq!(jet_mul(&one, &x).unwrap(), x);
        assert!(jet_mul(&x, &j1(1, &[0.0, 1.0, 0.0])).is_err());
    }

    #[test]
    fn shift_square() {
        let sq = j1(0, &[0.0, 0.0, 2.0]);
        let s = jet_shift(&sq, &[Rat::int(1)]).unwrap();
        assert_eq!(s.coeffs(), &[1.0, 2.0, 2.0]);
        assert_eq!(jet_shift(&sq, &[Rat::int(0)]).unwrap(), sq);
    }

    #[test]
    fn constant_mismatch_is_incompatible() {
        let a = Jet::new(vec![Rat::zero()], 1, vec![1.0, 0.0]).unwrap();
        let b = Jet::new(vec![Rat::new(1, 10)], 1, vec![0.0, 0.0]).unwrap();
        let r = compat_residual(&a, &b, 1).unwrap();
        assert_eq!(r.table[0], 1.0);
        assert!(!r.compatible);
    }

    #[test]
    fn json_rejects_short_tables() {
        assert!(serde_json::from_str::<Jet>(r#"{"base":["0"],"order":2,"coeffs":[1,2]}"#).is_err());
        let j: Jet = serde_json::from_str(r#"{"base":["0","1/2"],"order":1,"coeffs":[1,2,3]}"#).unwrap();
        assert_eq!(j.get(&[0, 1]), 3.0);
    }

    #[test]
    fn segment_data_derivatives() {
        let s = Segment { axis: 0, level: Rat::zero(), from: Rat::new(1, 5), to: Rat::new(4, 5), transverse: vec![vec![Rat::int(1), Rat::int(2), Rat::int(3)]] };
        // 1 + 2s + 3s^2
        assert_eq!(s.data(0, 0, 2.0), 17.0);
        assert_eq!(s.data(0, 1, 2.0), 14.0);
        assert_eq!(s.data(0, 2, 2.0), 6.0);
        assert_eq!(s.data(0, 3, 2.0), 0.0);
        assert_eq!(s.data(1, 0, 2.0), 0.0);
    }
}
