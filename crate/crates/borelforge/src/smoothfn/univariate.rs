//! Normalized Taylor coefficients of the scalar building blocks.
//!
//! Each `*_at(u0, k)` returns `g^(n)(u0) / n!` for `n <= k`.

use super::series::factorial;

fn urecip(a: &[f64]) -> Vec<f64> {
    let mut b = vec![0.0; a.len()];
    b[0] = 1.0 / a[0];
    for n in 1..a.len() {
        let mut s = 0.0;
        for k in 1..=n {
            s += a[k] * b[n - k];
        }
        b[n] = -s * b[0];
    }
    b
}

fn uexp(a: &[f64]) -> Vec<f64> {
    let mut b = vec![0.0; a.len()];
    b[0] = a[0].exp();
    for n in 1..a.len() {
        let mut s = 0.0;
        for k in 1..=n {
            s += k as f64 * a[k] * b[n - k];
        }
        b[n] = s / n as f64;
    }
    b
}

fn umul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; a.len()];
    for i in 0..a.len() {
        if a[i] == 0.0 {
            continue;
        }
        for j in 0..a.len() - i {
            c[i + j] += a[i] * b[j];
        }
    }
    c
}

fn linear(u0: f64, slope: f64, k: usize) -> Vec<f64> {
    let mut a = vec![0.0; k + 1];
    a[0] = u0;
    if k >= 1 {
        a[1] = slope;
    }
    a
}

fn unit(k: usize) -> Vec<f64> {
    let mut a = vec![0.0; k + 1];
    a[0] = 1.0;
    a
}

pub fn exp_at(u0: f64, k: usize) -> Vec<f64> {
    let e = u0.exp();
    (0..=k).map(|n| e / factorial(n)).collect()
}

pub fn recip_at(u0: f64, k: usize) -> Vec<f64> {
    urecip(&linear(u0, 1.0, k))
}

/// `u^p` for real `p`, requires `u0 > 0`.
pub fn pow_at(u0: f64, p: f64, k: usize) -> Vec<f64> {
    let mut out = vec![0.0; k + 1];
    let mut binom = 1.0;
    let base = u0.powf(p);
    for (n, o) in out.iter_mut().enumerate() {
        if n > 0 {
            binom *= (p - (n as f64 - 1.0)) / n as f64;
        }
        *o = base * binom / u0.powi(n as i32);
    }
    out
}

pub fn ln_at(u0: f64, k: usize) -> Vec<f64> {
    let mut out = vec![0.0; k + 1];
    out[0] = u0.ln();
    for n in 1..=k {
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        out[n] = sign / (n as f64 * u0.powi(n as i32));
    }
    out
}

/// `exp(-1/a(t))` for a univariate series `a`; zero when `a(0) <= 0`.
fn flat_of(a: &[f64]) -> Vec<f64> {
    if a[0] <= 0.0 {
        return vec![0.0; a.len()];
    }
    let w: Vec<f64> = urecip(a).into_iter().map(|v| -v).collect();
    uexp(&w)
}

/// Smoothstep `h(s) = phi(s) / (phi(s) + phi(1 - s))` of a univariate series.
fn step_of(s: &[f64]) -> Vec<f64> {
    if s[0] <= 0.0 {
        return vec![0.0; s.len()];
    }
    if s[0] >= 1.0 {
        return unit(s.len() - 1);
    }
    let a = flat_of(s);
    let one_minus: Vec<f64> = s.iter().enumerate().map(|(i, v)| if i == 0 { 1.0 - v } else { -v }).collect();
    let b = flat_of(&one_minus);
    let den: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
    umul(&a, &urecip(&den))
}

/// Flat kernel `phi(u) = exp(-1/u)` for `u > 0`, else 0.
pub fn flat_at(u0: f64, k: usize) -> Vec<f64> {
    flat_of(&linear(u0, 1.0, k))
}

/// Base bump `beta(u) = exp(-1/(1-u^2))` on `|u| < 1`, else 0.
pub fn bump_at(u0: f64, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; k + 1];
    v[0] = 1.0 - u0 * u0;
    if k >= 1 {
        v[1] = -2.0 * u0;
    }
    if k >= 2 {
        v[2] = -1.0;
    }
    flat_of(&v)
}

/// Smoothstep: 0 for `s <= 0`, 1 for `s >= 1`.
pub fn step_at(s0: f64, k: usize) -> Vec<f64> {
    step_of(&linear(s0, 1.0, k))
}

/// Base cutoff: 1 on `|u| <= 1/2`, 0 on `|u| >= 1`, `h(2 - 2|u|)` between.
pub fn cutoff_at(u0: f64, k: usize) -> Vec<f64> {
    let a = u0.abs();
    if a <= 0.5 {
        return unit(k);
    }
    if a >= 1.0 {
        return vec![0.0; k + 1];
    }
    let sigma = u0.signum();
    step_of(&linear(2.0 - 2.0 * a, -2.0 * sigma, k))
}

/// Certified sup norms of the base cutoff derivatives, orders `0..=60`.
///
/// Entry `l >= 1` is `1000 * 2^l * max |h^(l)|`, measured once by dense
/// high-precision sampling (`tools/cutoff_norms.py`); entry 0 is exact.
pub const CUTOFF_SUP: [f64; 61] = [
    1.0,
    4.0e+3,
    3.936e+4,
    8.845e+5,
    3.649e+7,
    2.469e+9,
    3.082e+11,
    5.468e+13,
    1.236e+16,
    3.466e+18,
    1.183e+21,
    5.118e+23,
    2.828e+26,
    1.804e+29,
    1.305e+32,
    1.068e+35,
    9.82e+37,
    1.1e+41,
    1.387e+44,
    1.875e+47,
    2.832e+50,
    4.61e+53,
    8.591e+56,
    1.748e+60,
    3.994e+63,
    9.442e+66,
    2.38e+70,
    6.501e+73,
    2.01e+77,
    6.607e+80,
    2.359e+84,
    8.783e+87,
    3.295e+91,
    1.446e+95,
    6.281e+98,
    3.155e+102,
    1.578e+106,
    8.027e+109,
    4.532e+113,
    2.636e+117,
    1.664e+121,
    1.102e+125,
    7.476e+128,
    5.339e+132,
    4.055e+136,
    3.214e+140,
    2.742e+144,
    2.455e+148,
    2.174e+152,
    2.023e+156,
    2.006e+160,
    1.873e+164,
    2.209e+168,
    2.296e+172,
    2.708e+176,
    3.103e+180,
    3.987e+184,
    4.894e+188,
    6.858e+192,
    8.647e+196,
    1.302e+201,
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_at_zero_is_inverse_e() {
        let c = bump_at(0.0, 0);
        assert!((c[0] - (-1f64).exp()).abs() < 1e-16);
        assert_eq!(bump_at(1.5, 4), vec![0.0; 5]);
    }

    #[test]
    fn flat_kernel_is_flat_at_zero() {
        assert_eq!(flat_at(0.0, 10), vec![0.0; 11]);
        let c = flat_at(0.5, 2);
        assert!((c[0] - (-2f64).exp()).abs() < 1e-16);
        // d/du exp(-1/u) = exp(-1/u)/u^2
        assert!((c[1] - 4.0 * (-2f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn cutoff_plateaus() {
        assert_eq!(cutoff_at(0.3, 5), unit(5));
        assert_eq!(cutoff_at(-0.5, 5), unit(5));
        assert_eq!(cutoff_at(1.0, 5), vec![0.0; 6]);
        let mid = cutoff_at(0.75, 0)[0];
        assert!((mid - 0.5).abs() < 1e-15);
        let sym = cutoff_at(-0.8, 3);
        let pos = cutoff_at(0.8, 3);
        assert!((sym[1] + pos[1]).abs() < 1e-12 && (sym[2] - pos[2]).abs() < 1e-9);
    }

    #[test]
    fn pow_and_ln() {
        let p = pow_at(4.0, 0.5, 2);
        assert!((p[0] - 2.0).abs() < 1e-15 && (p[1] - 0.25).abs() < 1e-15);
        let l = ln_at(2.0, 2);
        assert!((l[1] - 0.5).abs() < 1e-15 && (l[2] + 0.125).abs() < 1e-15);
    }

    #[test]
    fn shipped_norms_dominate_double_precision_sampling() {
        // low orders are accurate in doubles; the table must sit above them
        for l in 1..=10 {
            let mut best = 0.0f64;
            for i in 1..4000 {
                let t = 0.5 + 0.5 * i as f64 / 4000.0;
                let c = cutoff_at(t, l);
                best = best.max((c[l] * factorial(l)).abs());
            }
            assert!(CUTOFF_SUP[l] >= best * 100.0, "order {l}: {} vs {}", CUTOFF_SUP[l], best);
            assert!(CUTOFF_SUP[l] <= best * 5000.0, "order {l}: table too loose");
        }
    }
}
