"""Independent reference implementations used by the tests.

Step-value normalizers are evaluated with exact rationals straight from their
defining sums; nothing here imports the package under test.
"""

import math
from fractions import Fraction as F


def frac(x):
    return x if isinstance(x, F) else F(str(x))


def holm_fdp(J, gamma):
    g = frac(gamma)
    out = []
    for j in range(1, J + 1):
        fl = math.floor(g * j)
        out.append(F(fl + 1, J + fl + 1 - j))
    return out


def kfwe(J, k):
    return [F(k, J - max(j - k, 0)) for j in range(1, J + 1)]


def linear(J):
    return [F(j, J) for j in range(1, J + 1)]


def _jbar(t, v, g, J):
    terms = [J, J + t - v]
    if g > 0:
        terms.append(math.ceil(F(t) / g) - 1)
    return min(terms)


def _tbar(v, g, J):
    return min(math.floor(g * J) + 1, v, math.floor(g * (J - v) / (1 - g)) + 1)


def S1(v, gamma, delta):
    g, J = frac(gamma), len(delta)
    if v == 0:
        return F(0)
    total, prev = F(0), F(0)
    for t in range(1, _tbar(v, g, J) + 1):
        eps = delta[_jbar(t, v, g, J) - 1]
        total += (eps - prev) / t
        prev = eps
    return v * total


def D1(gamma, delta):
    return max(S1(v, gamma, delta) for v in range(0, len(delta) + 1))


def S2(v, gamma, delta):
    g, J = frac(gamma), len(delta)
    d = lambda i: delta[i - 1]  # noqa: E731  (1-based)
    total = v * d(1)
    for s in range(v - J + 2, v + 1):
        i = J - v + s
        lev = math.floor(g * i) + 1
        if v >= lev:
            total += v * (d(i) - d(i - 1)) / max(s, lev)
    return total


def D2(gamma, delta):
    return max(S2(v, gamma, delta) for v in range(1, len(delta) + 1))


def S3(v, k, delta):
    J = len(delta)
    d = lambda i: delta[i - 1]  # noqa: E731
    total = v * d(J - v + k) / k
    for s in range(k + 1, v + 1):
        total += v * (d(J - v + s) - d(J - v + s - 1)) / s
    return total


def D3(k, delta):
    return max(S3(v, k, delta) for v in range(k, len(delta) + 1))


def fixed_stepdown_count(p_sorted, alphas):
    d = 0
    for pj, aj in zip(p_sorted, alphas):
        if pj <= aj:
            d += 1
        else:
            break
    return d


def fixed_stepup_count(p_sorted, alphas):
    u = 0
    for j, (pj, aj) in enumerate(zip(p_sorted, alphas), start=1):
        if pj <= aj:
            u = j
    return u
