//! Truncated Taylor series in one or two variables.
//!
//! Coefficients are normalized (`f^(a,b) / (a! b!)`) and stored by total
//! degree; inside degree `n` the entry `i` multiplies `x^(n-i) y^i`. That is
//! the graded-lex order used by every derivative table in the crate.

/// Largest supported total derivative order.
pub const MAX_ORDER: usize = 60;

/// `n!` as a double for `n <= 170`.
pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

pub fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// Number of multi-indices of total degree `<= order`.
pub fn table_len(dim: usize, order: usize) -> usize {
    if dim == 1 {
        order + 1
    } else {
        (order + 1) * (order + 2) / 2
    }
}

/// Position of a multi-index in graded-lex order.
pub fn index_of(dim: usize, alpha: &[usize]) -> usize {
    if dim == 1 {
        alpha[0]
    } else {
        let n = alpha[0] + alpha[1];
        n * (n + 1) / 2 + alpha[1]
    }
}

/// Multi-indices of total degree `<= order` in graded-lex order.
pub fn multi_indices(dim: usize, order: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(table_len(dim, order));
    for n in 0..=order {
        if dim == 1 {
            out.push(vec![n]);
        } else {
            for i in 0..=n {
                out.push(vec![n - i, i]);
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    dim: usize,
    order: usize,
    c: Vec<f64>,
}

impl Series {
    pub fn zero(dim: usize, order: usize) -> Series {
        Series { dim, order, c: vec![0.0; table_len(dim, order)] }
    }

    pub fn constant(dim: usize, order: usize, v: f64) -> Series {
        let mut s = Series::zero(dim, order);
        s.c[0] = v;
        s
    }

    /// The coordinate function `x_axis` expanded at `at`.
    pub fn variable(dim: usize, order: usize, axis: usize, at: f64) -> Series {
        let mut s = Series::constant(dim, order, at);
        if order >= 1 {
            s.c[if dim == 1 { 1 } else { 1 + axis }] = 1.0;
        }
        s
    }

    pub fn from_normalized(dim: usize, order: usize, c: Vec<f64>) -> Series {
        assert_eq!(c.len(), table_len(dim, order));
        Series { dim, order, c }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    fn offset(&self, n: usize) -> usize {
        if self.dim == 1 {
            n
        } else {
            n * (n + 1) / 2
        }
    }

    fn part_len(&self, n: usize) -> usize {
        if self.dim == 1 {
            1
        } else {
            n + 1
        }
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|v| *v == 0.0)
    }

    /// Normalized coefficient of `x^alpha`.
    pub fn coeff(&self, alpha: &[usize]) -> f64 {
        self.c[index_of(self.dim, alpha)]
    }

    /// Raw partial derivatives in graded-lex order.
    pub fn raw(&self) -> Vec<f64> {
        let mut out = self.c.clone();
        for n in 0..=self.order {
            let o = self.offset(n);
            for i in 0..self.part_len(n) {
                let a = if self.dim == 1 { n } else { n - i };
                let b = if self.dim == 1 { 0 } else { i };
                out[o + i] *= factorial(a) * factorial(b);
            }
        }
        out
    }

    pub fn add(&self, o: &Series) -> Series {
        let c = self.c.iter().zip(&o.c).map(|(a, b)| a + b).collect();
        Series { dim: self.dim, order: self.order, c }
    }

    pub fn sub(&self, o: &Series) -> Series {
        let c = self.c.iter().zip(&o.c).map(|(a, b)| a - b).collect();
        Series { dim: self.dim, order: self.order, c }
    }

    pub fn scale(&self, k: f64) -> Series {
        Series { dim: self.dim, order: self.order, c: self.c.iter().map(|a| a * k).collect() }
    }

    pub fn add_const(mut self, k: f64) -> Series {
        self.c[0] += k;
        self
    }

    pub fn add_assign(&mut self, o: &Series) {
        for (a, b) in self.c.iter_mut().zip(&o.c) {
            *a += b;
        }
    }

    pub fn mul(&self, o: &Series) -> Series {
        let mut out = Series::zero(self.dim, self.order);
        if self.is_zero() || o.is_zero() {
            return out;
        }
        for p in 0..=self.order {
            let (ao, al) = (self.offset(p), self.part_len(p));
            let a = &self.c[ao..ao + al];
            if a.iter().all(|v| *v == 0.0) {
                continue;
            }
            for q in 0..=(self.order - p) {
                let (bo, bl) = (o.offset(q), o.part_len(q));
                let b = &o.c[bo..bo + bl];
                let oo = out.offset(p + q);
                for (i, ai) in a.iter().enumerate() {
                    if *ai == 0.0 {
                        continue;
                    }
                    for (j, bj) in b.iter().enumerate() {
                        out.c[oo + i + j] += ai * bj;
                    }
                }
            }
        }
        out
    }

    /// `g(self)` where `g[n]` are the normalized Taylor coefficients of a
    /// univariate function at `self.value()`.
    pub fn compose(&self, g: &[f64]) -> Series {
        let k = self.order;
        let last = match g.iter().take(k + 1).rposition(|v| *v != 0.0) {
            Some(i) => i,
            None => return Series::zero(self.dim, k),
        };
        let mut delta = self.clone();
        delta.c[0] = 0.0;
        if delta.is_zero() || last == 0 {
            return Series::constant(self.dim, k, g[0]);
        }
        let mut r = Series::constant(self.dim, k, g[last]);
        for n in (0..last).rev() {
            r = r.mul(&delta).add_const(g[n]);
        }
        r
    }

    pub fn powi(&self, n: u32) -> Series {
        let mut result = Series::constant(self.dim, self.order, 1.0);
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    /// Keeps total degrees `<= order`.
    pub fn truncate(&self, order: usize) -> Series {
        let order = order.min(self.order);
        Series { dim: self.dim, order, c: self.c[..table_len(self.dim, order)].to_vec() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_of_shifted_variable() {
        let x = Series::variable(1, 3, 0, 3.0);
        let sq = x.mul(&x);
        assert_eq!(sq.raw(), vec![9.0, 6.0, 2.0, 0.0]);
    }

    #[test]
    fn two_dim_product_layout() {
        let x = Series::variable(2, 2, 0, 0.0);
        let y = Series::variable(2, 2, 1, 0.0);
        let xy = x.mul(&y);
        // order: 1, x, y, x^2, xy, y^2
        assert_eq!(xy.coeffs(), &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(index_of(2, &[1, 1]), 4);
        assert_eq!(multi_indices(2, 1), vec![vec![0, 0], vec![1, 0], vec![0, 1]]);
    }

    #[test]
    fn compose_with_exp_coefficients() {
        let x = Series::variable(1, 5, 0, 1.0);
        let g: Vec<f64> = (0..=5).map(|n| 1f64.exp() / factorial(n)).collect();
        let e = x.compose(&g);
        for v in e.raw() {
            assert!((v - 1f64.exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn powi_matches_repeated_product() {
        let s = Series::from_normalized(2, 4, (0..15).map(|i| 0.1 * i as f64 - 0.5).collect());
        let p = s.powi(3);
        let q = s.mul(&s).mul(&s);
        for (a, b) in p.coeffs().iter().zip(q.coeffs()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
