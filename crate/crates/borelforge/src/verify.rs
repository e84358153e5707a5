//! Independent oracles: finite differences, vanishing-order ladders, sup
//! norms, and the report record that collects their verdicts.
//!
//! Nothing here uses Taylor propagation for the quantity being checked:
//! `fd_jet` and `vanishing_order` only read function values. `sup_norm`
//! needs derivative values by definition and takes them from the expression.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::smoothfn::expr::{ExprError, SmoothExpr};
use crate::smoothfn::series::{factorial, multi_indices};

/// Highest order `fd_jet` accepts.
pub const FD_MAX_ORDER: usize = 10;
/// Value below which a ladder rung counts as underflowed.
pub const UNDERFLOW: f64 = 1e-300;

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("finite differences are limited to order {max}, asked for {k}")]
    FdOrder { k: usize, max: usize },
    #[error("check `{0}` recorded twice")]
    Duplicate(String),
    #[error("empty or reversed window")]
    Window,
}

/// Finite-difference derivative table with per-entry error estimates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FdJet {
    /// Raw partials in graded-lex order.
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    /// Smallest step used per total order.
    pub steps: Vec<f64>,
    /// False where the extrapolation spread is not small against the value.
    pub converged: Vec<bool>,
}

impl FdJet {
    /// `|value - expected| <= error` with a floor `abs`.
    pub fn agrees(&self, i: usize, expected: f64, abs: f64) -> bool {
        (self.values[i] - expected).abs() <= self.errors[i] + abs
    }
}

fn binom(n: usize, k: usize) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Smallest step (in units of the feature scale) for a derivative of order `n`.
fn min_step(n: usize) -> f64 {
    if n == 0 {
        return 1.25e-3;
    }
    (2f64.powi(n as i32) * 1e-7).powf(1.0 / n as f64).max(1.25e-3)
}

fn descale(mut v: f64, scale: f64, n: usize) -> f64 {
    for _ in 0..n {
        v /= scale;
    }
    v
}

/// Central differences at `x` with 4-level Richardson extrapolation.
/// `scale` is the local feature size; the base step for first derivatives
/// is `1e-2 * scale`, and higher orders use larger steps to keep roundoff
/// below truncation.
pub fn fd_jet(e: &SmoothExpr, x: &[f64], k: usize, scale: f64) -> Result<FdJet, VerifyError> {
    if k > FD_MAX_ORDER {
        return Err(VerifyError::FdOrder { k, max: FD_MAX_ORDER });
    }
    let dim = e.dim();
    let f = |p: &[f64]| -> Result<f64, ExprError> { Ok(e.series_unchecked(p, 0)?.value()) };
    let idx = multi_indices(dim, k);
    let mut values = Vec::with_capacity(idx.len());
    let mut errors = Vec::with_capacity(idx.len());
    let mut converged = Vec::with_capacity(idx.len());
    let mut steps = vec![0.0; k + 1];
    for alpha in &idx {
        let n: usize = alpha.iter().sum();
        if n == 0 {
            values.push(f(x)?);
            errors.push(0.0);
            converged.push(true);
            continue;
        }
        let hmin = min_step(n) * scale;
        steps[n] = hmin;
        let mut table = [[0.0f64; 4]; 4];
        let mut fmax: f64 = 0.0;
        let mut weight = 0.0;
        for (lvl, row) in table.iter_mut().enumerate() {
            let h = hmin * 2f64.powi(3 - lvl as i32);
            // tensor product of 1D central stencils
            let mut acc = 0.0;
            let mut wsum = 0.0;
            let a = alpha[0];
            let b = if dim == 2 { alpha[1] } else { 0 };
            for i in 0..=a {
                let ci = if i % 2 == 0 { 1.0 } else { -1.0 } * binom(a, i);
                let dx = (a as f64 / 2.0 - i as f64) * h;
                for j in 0..=b {
                    let cj = if j % 2 == 0 { 1.0 } else { -1.0 } * binom(b, j);
                    let mut p = x.to_vec();
                    p[0] += dx;
                    if dim == 2 {
                        p[1] += (b as f64 / 2.0 - j as f64) * h;
                    }
                    let v = f(&p)?;
                    fmax = fmax.max(v.abs());
                    acc += ci * cj * v;
                    wsum += (ci * cj).abs();
                }
            }
            if lvl == 3 {
                weight = wsum;
            }
            // divide in scale units first so tiny scales do not underflow h^n
            row[0] = descale(acc / (h / scale).powi(n as i32), scale, n);
        }
        for j in 1..4 {
            for i in j..4 {
                let q = 4f64.powi(j as i32);
                table[i][j] = table[i][j - 1] + (table[i][j - 1] - table[i - 1][j - 1]) / (q - 1.0);
            }
        }
        let best = table[3][3];
        let spread = (best - table[3][2]).abs().max((best - table[2][2]).abs());
        let roundoff = descale(4.0 * f64::EPSILON * weight * fmax / min_step(n).powi(n as i32), scale, n);
        let err = spread + roundoff;
        values.push(best);
        errors.push(err);
        converged.push(err <= 1e-3 * best.abs() + 1e-8 * (1.0 + fmax));
    }
    Ok(FdJet { values, errors, steps, converged })
}

/// Outcome of a vanishing-order ladder.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VanishingOrder {
    /// Least-squares slope of `log|f|` against `log h`; `None` when flat.
    pub slope: Option<f64>,
    /// Values underflowed below `1e-300` at the finest rung.
    pub infinite: bool,
    /// Exactly zero at every rung.
    pub identically_zero: bool,
    pub steps: Vec<f64>,
    pub values: Vec<f64>,
}

impl VanishingOrder {
    pub fn order(&self) -> f64 {
        if self.infinite {
            f64::INFINITY
        } else {
            self.slope.unwrap_or(0.0)
        }
    }

    /// Infinite flag or slope at least `n - slack`.
    pub fn at_least(&self, n: f64, slack: f64) -> bool {
        self.infinite || self.slope.is_some_and(|s| s >= n - slack)
    }
}

/// Dyadic ladder `h0, h0/2, h0/4, h0/8` along `dir` from `z`.
pub fn vanishing_order(e: &SmoothExpr, z: &[f64], dir: &[f64], h0: f64) -> Result<VanishingOrder, VerifyError> {
    vanishing_order_with(|p| Ok(e.series_unchecked(p, 0)?.value()), z, dir, h0)
}

/// Same ladder for any evaluator, e.g. a remainder summed term by term.
pub fn vanishing_order_with(
    mut eval: impl FnMut(&[f64]) -> Result<f64, VerifyError>,
    z: &[f64],
    dir: &[f64],
    h0: f64,
) -> Result<VanishingOrder, VerifyError> {
    let steps: Vec<f64> = (0..4).map(|i| h0 / 2f64.powi(i)).collect();
    let mut values = Vec::with_capacity(4);
    for h in &steps {
        let p: Vec<f64> = z.iter().zip(dir).map(|(a, d)| a + h * d).collect();
        values.push(eval(&p)?.abs());
    }
    let identically_zero = values.iter().all(|v| *v == 0.0);
    let infinite = values[3] < UNDERFLOW;
    let slope = if infinite {
        None
    } else {
        let xs: Vec<f64> = steps.iter().map(|h| h.ln()).collect();
        let ys: Vec<f64> = values.iter().map(|v| v.max(UNDERFLOW).ln()).collect();
        let mx = xs.iter().sum::<f64>() / 4.0;
        let my = ys.iter().sum::<f64>() / 4.0;
        let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        Some(num / den)
    };
    Ok(VanishingOrder { slope, infinite, identically_zero, steps, values })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SupNorm {
    pub value: f64,
    pub argmax: Vec<f64>,
    /// Points per axis on the coarse grid.
    pub grid: usize,
    /// Extra points added by refinement.
    pub refined: usize,
}

/// Largest absolute partial of total order `k` over `n` points per axis
/// that are evaluated in the box `window`, refined around cells where
/// `h * |f^(k+1)|` is comparable to the running maximum.
pub fn sup_norm(e: &SmoothExpr, window: &[(f64, f64)], k: usize, n: usize) -> Result<SupNorm, VerifyError> {
    if window.len() != e.dim() || window.iter().any(|(a, b)| !(a <= b)) {
        return Err(VerifyError::Window);
    }
    let n = n.max(2);
    let dim = e.dim();
    let order_k: Vec<usize> = multi_indices(dim, k + 1)
        .iter()
        .enumerate()
        .filter(|(_, a)| a.iter().sum::<usize>() == k)
        .map(|(i, _)| i)
        .collect();
    let order_next: Vec<usize> = multi_indices(dim, k + 1)
        .iter()
        .enumerate()
        .filter(|(_, a)| a.iter().sum::<usize>() == k + 1)
        .map(|(i, _)| i)
        .collect();
    let probe = |p: &[f64]| -> Result<(f64, f64), ExprError> {
        let raw = e.series_unchecked(p, k + 1)?.raw();
        let a = order_k.iter().map(|i| raw[*i].abs()).fold(0.0, f64::max);
        let b = order_next.iter().map(|i| raw[*i].abs()).fold(0.0, f64::max);
        Ok((a, b))
    };
    let axis = |i: usize| -> Vec<f64> {
        let (a, b) = window[i];
        (0..n).map(|t| a + (b - a) * t as f64 / (n - 1) as f64).collect()
    };
    let pts: Vec<Vec<f64>> = if dim == 1 {
        axis(0).into_iter().map(|v| vec![v]).collect()
    } else {
        let ys = axis(1);
        axis(0).into_iter().flat_map(|x| ys.iter().map(move |y| vec![x, *y])).collect()
    };
    #[cfg(feature = "parallel")]
    let probed: Vec<Result<(f64, f64), ExprError>> = {
        use rayon::prelude::*;
        pts.par_iter().map(|p| probe(p)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let probed: Vec<Result<(f64, f64), ExprError>> = pts.iter().map(|p| probe(p)).collect();
    let mut best = (0.0, pts[0].clone());
    let mut vals = Vec::with_capacity(pts.len());
    for (p, r) in pts.iter().zip(probed) {
        let (a, b) = r?;
        if a > best.0 {
            best = (a, p.clone());
        }
        vals.push((a, b));
    }
    let h: Vec<f64> = window.iter().map(|(a, b)| (b - a) / (n - 1) as f64).collect();
    let hmax = h.iter().cloned().fold(0.0, f64::max);
    let mut refined = 0;
    // cells flagged by the derivative test get 15 sub-samples per axis
    let mut cand: Vec<Vec<f64>> = Vec::new();
    for (p, (a, b)) in pts.iter().zip(&vals) {
        if hmax * b > 0.0 && a + hmax * b > best.0 * 1.0001 {
            cand.extend(stencil(p, &h, 8.0, window));
        }
    }
    for q in &cand {
        let (a, _) = probe(q)?;
        refined += 1;
        if a > best.0 {
            best = (a, q.clone());
        }
    }
    // then zoom in on the maximizer
    let mut hz = h.clone();
    for _ in 0..6 {
        hz.iter_mut().for_each(|v| *v /= 8.0);
        let centre = best.1.clone();
        for q in stencil(&centre, &hz, 8.0, window) {
            let (a, _) = probe(&q)?;
            refined += 1;
            if a > best.0 {
                best = (a, q);
            }
        }
    }
    Ok(SupNorm { value: best.0, argmax: best.1, grid: n, refined })
}

/// Points `p + (t/m - 1) h` per axis for `t = 1..2m`, clamped to the window.
fn stencil(p: &[f64], h: &[f64], m: f64, window: &[(f64, f64)]) -> Vec<Vec<f64>> {
    let mut sub = vec![vec![]];
    for (i, hi) in h.iter().enumerate() {
        let mut next = Vec::new();
        for s in &sub {
            for t in 1..(2.0 * m) as usize {
                let mut q: Vec<f64> = s.clone();
                q.push((p[i] + (t as f64 / m - 1.0) * hi).clamp(window[i].0, window[i].1));
                next.push(q);
            }
        }
        sub = next;
    }
    sub
}

/// `sup_norm` at `n` and `2n - 1` points; returns both and the relative change.
pub fn sup_norm_doubled(e: &SmoothExpr, window: &[(f64, f64)], k: usize, n: usize) -> Result<(SupNorm, SupNorm, f64), VerifyError> {
    let a = sup_norm(e, window, k, n)?;
    let b = sup_norm(e, window, k, 2 * n - 1)?;
    let rel = if b.value == 0.0 { (a.value - b.value).abs() } else { (a.value - b.value).abs() / b.value };
    Ok((a, b, rel))
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Check {
    pub name: String,
    pub claimed: Value,
    pub measured: Value,
    pub tolerance: f64,
    pub pass: bool,
}

/// Oracle-vs-construction record.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerificationReport {
    pub job: String,
    pub checks: Vec<Check>,
    pub environment: BTreeMap<String, Value>,
    pub wall_time_s: f64,
    pub pass: bool,
    #[serde(skip, default = "Instant::now")]
    started: Instant,
}

/// Numbers that JSON cannot carry (infinities, NaN) become strings.
pub fn num(v: f64) -> Value {
    if v.is_finite() {
        Value::from(v)
    } else {
        Value::from(v.to_string())
    }
}

impl VerificationReport {
    pub fn new(job: &str) -> VerificationReport {
        VerificationReport {
            job: job.to_string(),
            checks: Vec::new(),
            environment: BTreeMap::new(),
            wall_time_s: 0.0,
            pass: true,
            started: Instant::now(),
        }
    }

    pub fn record(&mut self, name: &str, claimed: Value, measured: Value, tolerance: f64, pass: bool) -> Result<(), VerifyError> {
        if self.checks.iter().any(|c| c.name == name) {
            return Err(VerifyError::Duplicate(name.to_string()));
        }
        self.checks.push(Check { name: name.to_string(), claimed, measured, tolerance, pass });
        self.pass = self.checks.iter().all(|c| c.pass);
        Ok(())
    }

    /// Records `|measured - claimed| <= tol`.
    pub fn close(&mut self, name: &str, claimed: f64, measured: f64, tol: f64) -> Result<bool, VerifyError> {
        let ok = (measured - claimed).abs() <= tol;
        self.record(name, num(claimed), num(measured), tol, ok)?;
        Ok(ok)
    }

    /// Records `measured <= bound`.
    pub fn at_most(&mut self, name: &str, bound: f64, measured: f64) -> Result<bool, VerifyError> {
        let ok = measured <= bound;
        self.record(name, num(bound), num(measured), 0.0, ok)?;
        Ok(ok)
    }

    pub fn env(&mut self, key: &str, v: Value) {
        self.environment.insert(key.to_string(), v);
    }

    pub fn merge(&mut self, prefix: &str, other: VerificationReport) -> Result<(), VerifyError> {
        for c in other.checks {
            self.record(&format!("{prefix}{}", c.name), c.claimed, c.measured, c.tolerance, c.pass)?;
        }
        for (k, v) in other.environment {
            self.environment.insert(format!("{prefix}{k}"), v);
        }
        Ok(())
    }

    pub fn finish(mut self) -> VerificationReport {
        self.wall_time_s = self.started.elapsed().as_secs_f64();
        self.pass = self.checks.iter().all(|c| c.pass);
        self
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("report {}: {}\n", self.job, if self.pass { "PASS" } else { "FAIL" });
        for c in &self.checks {
            s.push_str(&format!(
                "  [{}] {}: claimed {} measured {} (tol {:e})\n",
                if c.pass { "ok" } else { "FAIL" },
                c.name,
                c.claimed,
                c.measured,
                c.tolerance
            ));
        }
        s.push_str(&format!("  wall time {:.3} s\n", self.wall_time_s));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::Rat;
    use crate::smoothfn::expr::ExprBuilder;
    use crate::smoothfn::set::Region;

    fn unary(lo: i64, hi: i64, f: impl Fn(&mut ExprBuilder, usize) -> usize) -> SmoothExpr {
        let mut b = ExprBuilder::new(&Region::interval(Rat::int(lo), Rat::int(hi)));
        let x = b.coord(0);
        let r = f(&mut b, x);
        b.finish(r).unwrap()
    }

    #[test]
    fn cubic_fd_jet() {
        let e = unary(0, 4, |b, x| b.pow(x, 3));
        let j = fd_jet(&e, &[2.0], 3, 1.0).unwrap();
        for (v, want) in j.values.iter().zip([8.0, 12.0, 12.0, 6.0]) {
            assert!((v - want).abs() < 1e-8, "{v} vs {want}");
        }
    }

    #[test]
    fn exp_fd_jet_within_estimate() {
        let e = unary(-1, 1, |b, x| b.exp(x));
        let j = fd_jet(&e, &[0.0], 6, 1.0).unwrap();
        for i in 0..=6 {
            assert!(j.agrees(i, 1.0, 1e-12), "order {i}: {} +- {}", j.values[i], j.errors[i]);
            assert!(j.errors[i] < 1e-4);
        }
    }

    #[test]
    fn bump_edge_is_flagged() {
        let e = unary(-2, 2, |b, x| b.bump(x));
        let j = fd_jet(&e, &[0.98], 6, 1.0).unwrap();
        assert!(!j.converged[6]);
    }

    #[test]
    fn monomial_order_and_flat_flag() {
        let e = unary(-1, 1, |b, x| b.pow(x, 5));
        let v = vanishing_order(&e, &[0.0], &[1.0], 1e-3).unwrap();
        assert!((v.slope.unwrap() - 5.0).abs() < 0.1);
        let e = unary(-1, 1, |b, x| b.flat(x));
        assert!(vanishing_order(&e, &[0.0], &[1.0], 1e-3).unwrap().infinite);
        let e = unary(-1, 1, |b, x| {
            let f = b.flat(x);
            let s = b.pow(x, 2);
            b.mul(vec![s, f])
        });
        assert!(vanishing_order(&e, &[0.0], &[1.0], 1e-3).unwrap().infinite);
    }

    #[test]
    fn sup_norms() {
        let e = unary(-1, 1, |b, x| b.pow(x, 2));
        let s = sup_norm(&e, &[(-1.0, 1.0)], 1, 101).unwrap();
        assert!((s.value - 2.0).abs() < 1e-12);
        let e = unary(-1, 1, |b, x| {
            let y = b.affine(x, -25.0, 0.0);
            let z = b.mul(vec![y, x]);
            b.exp(z)
        });
        // exp(-25 x^2) peaks at 1 on x = 0 which the odd grid misses
        let (a, b2, rel) = sup_norm_doubled(&e, &[(-1.0, 1.0)], 0, 40).unwrap();
        assert!((a.value - 1.0).abs() < 1e-6, "{}", a.value);
        assert!(rel < 0.01 && b2.value <= 1.0);
    }

    #[test]
    fn report_rejects_duplicates() {
        let mut r = VerificationReport::new("t");
        r.close("a", 1.0, 1.0, 0.0).unwrap();
        assert!(r.close("a", 1.0, 1.0, 0.0).is_err());
        r.at_most("b", 1.0, 2.0).unwrap();
        let r = r.finish();
        assert!(!r.pass);
        let text = serde_json::to_string(&r).unwrap();
        assert!(text.contains("\"pass\":false"));
    }
}
