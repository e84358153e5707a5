//! Adaptive Simpson quadrature.

/// Default absolute tolerance.
pub const TOL: f64 = 1e-12;
/// Default recursion cap.
pub const MAX_DEPTH: u32 = 40;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
    /// False when some panel hit the depth cap before meeting its share of the tolerance.
    pub converged: bool,
}

struct State<'a, F: Fn(f64) -> f64> {
    f: &'a F,
    evals: usize,
    converged: bool,
    max_depth: u32,
    min_depth: u32,
}

impl<F: Fn(f64) -> f64> State<'_, F> {
    #[allow(clippy::too_many_arguments)]
    fn step(&mut self, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> (f64, f64) {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = (self.f)(lm);
        let frm = (self.f)(rm);
        self.evals += 2;
        let h = b - a;
        let left = h / 12.0 * (fa + 4.0 * flm + fm);
        let right = h / 12.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth >= self.min_depth && delta.abs() <= 15.0 * tol {
            return (left + right + delta / 15.0, delta.abs() / 15.0);
        }
        if depth >= self.max_depth || !delta.is_finite() || m <= a || m >= b {
            self.converged = false;
            return (left + right + delta / 15.0, delta.abs() / 15.0);
        }
        let (l, el) = self.step(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1);
        let (r, er) = self.step(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
        (l + r, el + er)
    }
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`. The interval is
/// first cut into `panels` pieces so narrow features are not skipped by the
/// first five samples.
pub fn simpson_panels<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, max_depth: u32, panels: usize) -> Quad {
    if b <= a {
        return Quad { value: 0.0, error: 0.0, evals: 0, converged: true };
    }
    let panels = panels.max(1);
    let mut st = State { f, evals: 0, converged: true, max_depth, min_depth: 2 };
    let w = (b - a) / panels as f64;
    let mut value = 0.0;
    let mut error = 0.0;
    let mut fa = f(a);
    st.evals += 1;
    for i in 0..panels {
        let lo = a + w * i as f64;
        let hi = if i + 1 == panels { b } else { a + w * (i + 1) as f64 };
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        let fb = f(hi);
        st.evals += 2;
        let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
        let (v, e) = st.step(lo, hi, fa, fm, fb, whole, tol / panels as f64, 0);
        value += v;
        error += e;
        fa = fb;
    }
    Quad { value, error, evals: st.evals, converged: st.converged }
}

/// Adaptive Simpson with the crate defaults (8 initial panels).
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Quad {
    simpson_panels(f, a, b, tol, MAX_DEPTH, 8)
}

/// Iterated adaptive Simpson over a rectangle.
pub fn simpson_2d<F: Fn(f64, f64) -> f64>(f: &F, x: (f64, f64), y: (f64, f64), tol: f64) -> Quad {
    let width = (y.1 - y.0).max(0.0);
    let evals = std::cell::Cell::new(0usize);
    let ok = std::cell::Cell::new(true);
    let inner = |xv: f64| {
        let q = simpson(&|yv: f64| f(xv, yv), y.0, y.1, tol / (width + 1.0));
        evals.set(evals.get() + q.evals);
        if !q.converged {
            ok.set(false);
        }
        q.value
    };
    let q = simpson(&inner, x.0, x.1, tol);
    Quad { value: q.value, error: q.error, evals: evals.get(), converged: q.converged && ok.get() }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        // Legendre recurrence for P_n and its derivative
        let legendre = |z: f64| {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            (p1, n as f64 * (z * p1 - p0) / (z * z - 1.0))
        };
        for _ in 0..100 {
            let (p, dp) = legendre(z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let dp = legendre(z).1;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = z;
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let q = simpson(&|x: f64| x * x * x - 2.0 * x, 0.0, 2.0, TOL);
        assert!((q.value - 0.0).abs() < 1e-14);
        assert!(q.converged);
    }

    #[test]
    fn sine_period() {
        let q = simpson(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, TOL);
        assert!((q.value - 2.0).abs() < 1e-11, "{}", q.value);
    }

    #[test]
    fn narrow_gaussian_not_missed() {
        let q = simpson(&|x: f64| (-(x - 0.3).powi(2) / 1e-4).exp(), -1.0, 1.0, TOL);
        let exact = (std::f64::consts::PI * 1e-4).sqrt();
        assert!((q.value - exact).abs() < 1e-11);
    }

    #[test]
    fn gauss_legendre_degree() {
        let (x, w) = gauss_legendre(8);
        let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((q - 2.0 / 15.0).abs() < 1e-15);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn rectangle() {
        let q = simpson_2d(&|x: f64, y: f64| x * y, (0.0, 1.0), (0.0, 2.0), 1e-10);
        assert!((q.value - 1.0).abs() < 1e-10);
    }
}
