# Regenerates the shipped sup-norm table of the base cutoff derivatives.
# tau(t) = h(2 - 2|t|), h(s) = phi(s) / (phi(s) + phi(1 - s)), phi(s) = exp(-1/s).
# Output: Rust array literal, entry l = 2^l * max_s |h^(l)(s)| * 1000 (l >= 1), entry 0 = 1.
import sys
from mpmath import mp, mpf, exp, factorial

mp.dps = 200
K = 60


def recip(a):
    b = [mpf(0)] * len(a)
    b[0] = 1 / a[0]
    for n in range(1, len(a)):
        s = mpf(0)
        for k in range(1, n + 1):
            s += a[k] * b[n - k]
        b[n] = -s / a[0]
    return b


def sexp(a):
    b = [mpf(0)] * len(a)
    b[0] = exp(a[0])
    for n in range(1, len(a)):
        s = mpf(0)
        for k in range(1, n + 1):
            s += k * a[k] * b[n - k]
        b[n] = s / n
    return b


def mul(a, b):
    c = [mpf(0)] * len(a)
    for i in range(len(a)):
        for j in range(len(a) - i):
            c[i + j] += a[i] * b[j]
    return c


def phi(a):
    return sexp([-x for x in recip(a)])


def h_coeffs(s):
    u = [mpf(0)] * (K + 1)
    v = [mpf(0)] * (K + 1)
    u[0], u[1] = s, mpf(1)
    v[0], v[1] = 1 - s, mpf(-1)
    p, q = phi(u), phi(v)
    return mul(p, recip([x + y for x, y in zip(p, q)]))


def samples():
    pts = []
    n = 700
    for i in range(n):
        e = -6 + (6 + mp.log10(mpf("0.5"))) * i / (n - 1)
        pts.append(mpf(10) ** e)
    for i in range(1, 300):
        pts.append(mpf("0.05") + (mpf("0.45")) * i / 300)
    return pts


best = [mpf(0)] * (K + 1)
for s in samples():
    c = h_coeffs(s)
    for l in range(K + 1):
        v = abs(c[l]) * factorial(l)
        if v > best[l]:
            best[l] = v

out = ["1.0"]
for l in range(1, K + 1):
    out.append(mp.nstr(best[l] * mpf(2) ** l * 1000, 4, min_fixed=1, max_fixed=0))
sys.stdout.write("[\n" + "".join("    %s,\n" % x for x in out) + "]\n")
