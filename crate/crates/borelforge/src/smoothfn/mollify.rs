//! Convolution profiles for the controlled cutoffs.
//!
//! A profile is the density `P = psi_1 * ... * psi_m` of `m` normalized
//! bumps with radii `r_i = d_i / (2 d_1)`. Derivatives `P^(r)` put one
//! derivative on each of the first factors and any excess on the last one,
//! so `|P^(k-1)|` inherits the `1/(d_1 ... d_k)` scaling. Each derivative is
//! tabulated lazily as piecewise Chebyshev interpolants.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use super::series::factorial;
use super::univariate::bump_at;
use crate::quad::{gauss_legendre, simpson};

const PANELS: usize = 64;
const FIRST_PANELS: usize = 256;
const NODES: usize = 22;
const GL_POINTS: usize = 10;
const GL_CELLS: usize = 48;
/// Highest tabulated density derivative; cutoff derivatives stop one above.
pub const MAX_PROFILE_DERIV: usize = 15;

fn bump_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| simpson(&|t: f64| bump_at(t, 0)[0], -1.0, 1.0, 1e-16).value)
}

/// `e`-th derivative of the unit-mass bump of radius `r`.
fn kernel(r: f64, e: usize, t: f64) -> f64 {
    let u = t / r;
    if u.abs() >= 1.0 {
        return 0.0;
    }
    bump_at(u, e)[e] * factorial(e) / (bump_mass() * r.powi(e as i32 + 1))
}

#[derive(Debug, Clone)]
struct Panels {
    lo: f64,
    hi: f64,
    below: f64,
    above: f64,
    c: Vec<Vec<f64>>,
}

fn map_panels<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

impl Panels {
    fn fit(lo: f64, hi: f64, panels: usize, f: impl Fn(f64) -> f64 + Sync + Send) -> Panels {
        let w = (hi - lo) / panels as f64;
        let nodes: Vec<f64> = (0..NODES).map(|k| (std::f64::consts::PI * (k as f64 + 0.5) / NODES as f64).cos()).collect();
        let c = map_panels(panels, |p| {
            let a = lo + w * p as f64;
            let vals: Vec<f64> = nodes.iter().map(|x| f(a + 0.5 * w * (x + 1.0))).collect();
            let mut c = vec![0.0; NODES];
            for (j, cj) in c.iter_mut().enumerate() {
                let mut s = 0.0;
                for (k, v) in vals.iter().enumerate() {
                    s += v * (std::f64::consts::PI * j as f64 * (k as f64 + 0.5) / NODES as f64).cos();
                }
                *cj = s * 2.0 / NODES as f64;
            }
            c[0] *= 0.5;
            c
        });
        Panels { lo, hi, below: 0.0, above: 0.0, c }
    }

    fn width(&self) -> f64 {
        (self.hi - self.lo) / self.c.len() as f64
    }

    fn eval(&self, u: f64) -> f64 {
        if u <= self.lo {
            return self.below;
        }
        if u >= self.hi {
            return self.above;
        }
        let w = self.width();
        let p = (((u - self.lo) / w) as usize).min(self.c.len() - 1);
        let x = 2.0 * (u - self.lo - w * p as f64) / w - 1.0;
        let c = &self.c[p];
        let (mut b1, mut b2) = (0.0, 0.0);
        for cj in c[1..].iter().rev() {
            let b0 = 2.0 * x * b1 - b2 + cj;
            b2 = b1;
            b1 = b0;
        }
        x * b1 - b2 + c[0]
    }

    /// Running integral from `lo`, scaled so the total is 1.
    fn cumulative(&self) -> Panels {
        let half = 0.5 * self.width();
        let mut start = 0.0;
        let mut out = Vec::with_capacity(self.c.len());
        for c in &self.c {
            let n = c.len();
            let at = |j: usize| if j < n { c[j] } else { 0.0 };
            let mut a = vec![0.0; n + 1];
            for (j, aj) in a.iter_mut().enumerate().skip(1) {
                let prev = if j == 1 { 2.0 * at(0) } else { at(j - 1) };
                *aj = half * (prev - at(j + 1)) / (2 * j) as f64;
            }
            // value at x = -1 must equal the running start
            let at_minus: f64 = a.iter().enumerate().map(|(j, v)| if j % 2 == 0 { *v } else { -v }).sum();
            a[0] = start - at_minus;
            start = a.iter().sum();
            out.push(a);
        }
        for a in out.iter_mut() {
            a.iter_mut().for_each(|v| *v /= start);
        }
        Panels { lo: self.lo, hi: self.hi, below: 0.0, above: 1.0, c: out }
    }
}

/// Unit-scale convolution profile for one width ratio vector.
#[derive(Debug)]
pub struct Profile {
    radii: Vec<f64>,
    cdf: OnceLock<Panels>,
    derivs: Vec<OnceLock<Panels>>,
}

impl Profile {
    fn new(ratios: &[f64]) -> Profile {
        Profile {
            radii: ratios.iter().map(|r| 0.5 * r).collect(),
            cdf: OnceLock::new(),
            derivs: (0..=MAX_PROFILE_DERIV).map(|_| OnceLock::new()).collect(),
        }
    }

    /// Shared profile for widths proportional to `ratios` (first entry 1).
    pub fn shared(ratios: &[f64]) -> Arc<Profile> {
        static CACHE: OnceLock<Mutex<HashMap<Vec<u64>, Arc<Profile>>>> = OnceLock::new();
        let key: Vec<u64> = ratios.iter().map(|r| r.to_bits()).collect();
        let mut map = CACHE.get_or_init(Default::default).lock().expect("profile cache");
        map.entry(key).or_insert_with(|| Arc::new(Profile::new(ratios))).clone()
    }

    /// Half-width of the density support.
    pub fn half_support(&self) -> f64 {
        self.radii.iter().sum()
    }

    pub fn factors(&self) -> usize {
        self.radii.len()
    }

    fn orders(&self, r: usize) -> Vec<usize> {
        let m = self.radii.len();
        let mut e = vec![0; m];
        for (i, ei) in e.iter_mut().enumerate().take(m - 1) {
            if r > i {
                *ei = 1;
            }
        }
        e[m - 1] = r - e[..m - 1].iter().sum::<usize>();
        e
    }

    /// Tabulates `psi_1^(e_1) * ... * psi_m^(e_m)` level by level.
    fn build(&self, e: &[usize]) -> Panels {
        let r0 = self.radii[0];
        let mut table = Panels::fit(-r0, r0, FIRST_PANELS, |u| kernel(r0, e[0], u));
        let mut reach = r0;
        let (gx, gw) = gauss_legendre(GL_POINTS);
        for (i, &ri) in self.radii.iter().enumerate().skip(1) {
            // fixed composite rule over the whole kernel support
            let cell = 2.0 * ri / GL_CELLS as f64;
            let mut ts = Vec::with_capacity(GL_CELLS * GL_POINTS);
            let mut ws = Vec::with_capacity(GL_CELLS * GL_POINTS);
            for c in 0..GL_CELLS {
                let mid = -ri + cell * (c as f64 + 0.5);
                for (x, w) in gx.iter().zip(&gw) {
                    let t = mid + 0.5 * cell * x;
                    ts.push(t);
                    ws.push(0.5 * cell * w * kernel(ri, e[i], t));
                }
            }
            let prev = &table;
            let conv = |u: f64| ts.iter().zip(&ws).map(|(t, w)| w * prev.eval(u - t)).sum::<f64>();
            reach += ri;
            table = Panels::fit(-reach, reach, PANELS, conv);
        }
        table
    }

    /// `P^(r)(u)` at unit scale; `None` past the tabulated order.
    pub fn density_deriv(&self, r: usize, u: f64) -> Option<f64> {
        let h = self.half_support();
        if u <= -h || u >= h {
            return Some(0.0);
        }
        let cell = self.derivs.get(r)?;
        Some(cell.get_or_init(|| self.build(&self.orders(r))).eval(u))
    }

    /// Cumulative distribution of `P`, exactly 0 below and 1 above the support.
    pub fn cdf(&self, u: f64) -> f64 {
        let h = self.half_support();
        if u <= -h {
            return 0.0;
        }
        if u >= h {
            return 1.0;
        }
        let table = self.cdf.get_or_init(|| {
            let _ = self.density_deriv(0, 0.0);
            self.derivs[0].get().expect("density tabulated").cumulative()
        });
        table.eval(u).clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_bump_cdf_and_mass() {
        let p = Profile::shared(&[1.0]);
        assert_eq!(p.cdf(-0.5), 0.0);
        assert_eq!(p.cdf(0.5), 1.0);
        assert!((p.cdf(0.0) - 0.5).abs() < 1e-12);
        let m = simpson(&|u: f64| p.density_deriv(0, u).unwrap(), -0.5, 0.5, 1e-14).value;
        assert!((m - 1.0).abs() < 1e-10, "{m}");
    }

    #[test]
    fn convolved_density_derivative_matches_difference_quotient() {
        let p = Profile::shared(&[1.0, 0.5, 0.25]);
        let m = simpson(&|u: f64| p.density_deriv(0, u).unwrap(), -0.875, 0.875, 1e-14).value;
        assert!((m - 1.0).abs() < 1e-10, "{m}");
        for &u in &[-0.6, -0.2, 0.05, 0.3, 0.7] {
            let h = 1e-5;
            let fd = (p.density_deriv(0, u + h).unwrap() - p.density_deriv(0, u - h).unwrap()) / (2.0 * h);
            let d1 = p.density_deriv(1, u).unwrap();
            assert!((fd - d1).abs() < 1e-6 * (1.0 + d1.abs()), "u={u}: {fd} vs {d1}");
            let fd0 = (p.cdf(u + h) - p.cdf(u - h)) / (2.0 * h);
            let d0 = p.density_deriv(0, u).unwrap();
            assert!((fd0 - d0).abs() < 1e-6 * (1.0 + d0), "u={u}: {fd0} vs {d0}");
        }
        // symmetric density, odd derivative
        assert!((p.cdf(0.0) - 0.5).abs() < 1e-12);
        assert!((p.density_deriv(1, 0.2).unwrap() + p.density_deriv(1, -0.2).unwrap()).abs() < 1e-9);
    }
}
