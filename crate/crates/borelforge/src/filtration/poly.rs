//! Dense univariate polynomials over the rationals, with exact real-root
//! isolation and rational-root recovery.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Ascending coefficients, no trailing zeros (the zero polynomial is empty).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Poly(Vec<BigRational>);

fn q(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

impl Poly {
    pub fn new(mut c: Vec<BigRational>) -> Poly {
        while c.last().is_some_and(Zero::is_zero) {
            c.pop();
        }
        Poly(c)
    }

    pub fn one() -> Poly {
        Poly(vec![BigRational::one()])
    }

    /// `x - r`.
    pub fn linear(r: &BigRational) -> Poly {
        Poly(vec![-r.clone(), BigRational::one()])
    }

    pub fn from_roots<'a>(roots: impl IntoIterator<Item = (&'a BigRational, u32)>) -> Poly {
        let mut p = Poly::one();
        for (r, m) in roots {
            for _ in 0..m {
                p = p.mul(&Poly::linear(r));
            }
        }
        p
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    /// Degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    pub fn lead(&self) -> BigRational {
        self.0.last().cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn eval(&self, x: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for c in self.0.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        if self.is_zero() || o.is_zero() {
            return Poly(vec![]);
        }
        let mut c = vec![BigRational::zero(); self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Poly::new(c)
    }

    pub fn derivative(&self) -> Poly {
        Poly::new(self.0.iter().enumerate().skip(1).map(|(i, c)| c * q(i as i64)).collect())
    }

    /// Quotient and remainder; panics on a zero divisor.
    pub fn divrem(&self, d: &Poly) -> (Poly, Poly) {
        let dd = d.degree().expect("division by the zero polynomial");
        let mut r = self.0.clone();
        if r.len() <= dd {
            return (Poly(vec![]), self.clone());
        }
        let mut quo = vec![BigRational::zero(); r.len() - dd];
        let lead = d.lead();
        for k in (0..quo.len()).rev() {
            let c = &r[k + dd] / &lead;
            if !c.is_zero() {
                for (i, di) in d.0.iter().enumerate() {
                    r[k + i] -= &c * di;
                }
            }
            quo[k] = c;
        }
        r.truncate(dd);
        (Poly::new(quo), Poly::new(r))
    }

    pub fn monic(&self) -> Poly {
        if self.is_zero() {
            return self.clone();
        }
        let l = self.lead();
        Poly(self.0.iter().map(|c| c / &l).collect())
    }

    pub fn gcd(&self, o: &Poly) -> Poly {
        let (mut a, mut b) = (self.clone(), o.clone());
        while !b.is_zero() {
            let (_, r) = a.divrem(&b);
            a = b;
            b = r;
        }
        a.monic()
    }

    /// Same roots, each simple.
    pub fn square_free(&self) -> Poly {
        let g = self.gcd(&self.derivative());
        self.divrem(&g).0.monic()
    }

    /// How many times `x - r` divides `self` (the zero polynomial gives `None`).
    pub fn multiplicity(&self, r: &BigRational) -> Option<u32> {
        if self.is_zero() {
            return None;
        }
        let lin = Poly::linear(r);
        let mut p = self.clone();
        let mut m = 0;
        loop {
            let (quo, rem) = p.divrem(&lin);
            if !rem.is_zero() {
                return Some(m);
            }
            p = quo;
            m += 1;
        }
    }

    /// Integer multiple with coprime integer coefficients; returns the leading one.
    fn integer_lead(&self) -> BigInt {
        let l = self.0.iter().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
        let ints: Vec<BigInt> = self.0.iter().map(|c| (c * BigRational::from_integer(l.clone())).to_integer()).collect();
        let g = ints.iter().fold(BigInt::zero(), |acc, c| acc.gcd(c));
        (ints.last().expect("nonzero") / g).abs()
    }
}

/// Sturm sequence of a square-free polynomial.
struct Sturm(Vec<Poly>);

impl Sturm {
    fn new(p: &Poly) -> Sturm {
        let mut s = vec![p.clone(), p.derivative()];
        while !s.last().expect("nonempty").is_zero() {
            let n = s.len();
            let (_, r) = s[n - 2].divrem(&s[n - 1]);
            s.push(Poly(r.0.into_iter().map(|c| -c).collect()));
        }
        s.pop();
        Sturm(s)
    }

    fn changes(&self, x: &BigRational) -> usize {
        let signs: Vec<bool> = self.0.iter().map(|p| p.eval(x)).filter(|v| !v.is_zero()).map(|v| v.is_positive()).collect();
        signs.windows(2).filter(|w| w[0] != w[1]).count()
    }

    /// Distinct roots in `(a, b]`.
    fn count(&self, a: &BigRational, b: &BigRational) -> usize {
        self.changes(a) - self.changes(b)
    }
}

/// The rational with the smallest denominator in `[lo, hi]`.
pub fn simplest_between(lo: &BigRational, hi: &BigRational) -> BigRational {
    let fl = lo.floor();
    if &fl == lo {
        return fl;
    }
    let next = &fl + BigRational::one();
    if &next <= hi {
        // prefer the integer closest to zero
        if lo.is_negative() && hi.is_positive() {
            return BigRational::zero();
        }
        return if hi.is_negative() { hi.floor() } else { next };
    }
    let inner = simplest_between(&(hi - &fl).recip(), &(lo - &fl).recip());
    fl + inner.recip()
}

/// A real root in the window that is not rational.
#[derive(Debug, Clone, PartialEq)]
pub struct IrrationalRoot {
    pub lo: BigRational,
    pub hi: BigRational,
}

/// All real roots of `p` in `[lo, hi]` with multiplicities, or the first
/// isolating interval whose root is irrational.
pub fn rational_roots(p: &Poly, lo: &BigRational, hi: &BigRational) -> Result<Vec<(BigRational, u32)>, IrrationalRoot> {
    if p.degree().unwrap_or(0) == 0 {
        return Ok(vec![]);
    }
    let sf = p.square_free();
    let sturm = Sturm::new(&sf);
    let n = sf.integer_lead();
    let tiny = BigRational::new(BigInt::one(), &n * &n * BigInt::from(2));
    let mut found = Vec::new();
    if sf.eval(lo).is_zero() {
        found.push(lo.clone());
    }
    let mut stack = vec![(lo.clone(), hi.clone())];
    while let Some((a, b)) = stack.pop() {
        let c = sturm.count(&a, &b);
        if c == 0 {
            continue;
        }
        if c > 1 {
            let m = (&a + &b) / q(2);
            stack.push((a, m.clone()));
            stack.push((m, b));
            continue;
        }
        let (mut a, mut b) = (a, b);
        loop {
            if sf.eval(&b).is_zero() {
                found.push(b);
                break;
            }
            if &b - &a < tiny {
                let s = simplest_between(&a, &b);
                if sf.eval(&s).is_zero() {
                    found.push(s);
                    break;
                }
                return Err(IrrationalRoot { lo: a, hi: b });
            }
            let m = (&a + &b) / q(2);
            if sturm.count(&a, &m) == 1 {
                b = m;
            } else {
                a = m;
            }
        }
    }
    found.sort();
    Ok(found.into_iter().map(|r| {
        let m = p.multiplicity(&r).expect("nonzero");
        (r, m)
    }).collect())
}
