"""Brute-force reference implementations written with explicit loops.

Nothing here imports the package's numerical code; every quantity is computed
from its defining sum, one grid point at a time.
"""
import math


def cell(y, j, i, k):
    return float(y[j][i][k])


def dims(y):
    return len(y), len(y[0]), len(y[0][0])


def cond_mean(y, i, k):
    n, _, _ = dims(y)
    return sum(cell(y, j, i, k) for j in range(n)) / n


def subj_mean(y, j, k):
    _, ell, _ = dims(y)
    return sum(cell(y, j, i, k) for i in range(ell)) / ell


def grand(y, k):
    n, ell, _ = dims(y)
    return sum(cell(y, j, i, k) for j in range(n) for i in range(ell)) / (n * ell)


def ssa(y):
    n, ell, p = dims(y)
    out = []
    for k in range(p):
        g = grand(y, k)
        out.append(n * sum((cond_mean(y, i, k) - g) ** 2 for i in range(ell)))
    return out


def ssr(y):
    n, ell, p = dims(y)
    out = []
    for k in range(p):
        g = grand(y, k)
        s = 0.0
        for i in range(ell):
            for j in range(n):
                r = cell(y, j, i, k) - cond_mean(y, i, k) - subj_mean(y, j, k) + g
                s += r * r
        out.append(s)
    return out


def f_point(y):
    n, ell, _ = dims(y)
    return [(a / (ell - 1)) / (r / ((ell - 1) * (n - 1))) for a, r in zip(ssa(y), ssr(y))]


def trapezoid(values, t):
    total = 0.0
    for k in range(len(t) - 1):
        total += 0.5 * (t[k + 1] - t[k]) * (values[k] + values[k + 1])
    return total


def stat_C(y, t):
    return trapezoid(ssa(y), t)


def stat_D(y, t):
    return trapezoid(f_point(y), t)


def stat_E(y, t):
    return max(f_point(y))


def ssa_b1(boot, orig):
    n, ell, p = dims(boot)
    out = []
    for k in range(p):
        gb, go = grand(boot, k), grand(orig, k)
        out.append(n * sum((cond_mean(boot, i, k) - cond_mean(orig, i, k) - gb + go) ** 2
                           for i in range(ell)))
    return out


def covariance(y):
    """Unbiased covariance of the concatenated curves (block order: condition, point)."""
    n, ell, p = dims(y)
    vecs = [[cell(y, j, i, k) for i in range(ell) for k in range(p)] for j in range(n)]
    d = ell * p
    mean = [sum(v[a] for v in vecs) / n for a in range(d)]
    return [[sum((v[a] - mean[a]) * (v[b] - mean[b]) for v in vecs) / (n - 1) for b in range(d)]
            for a in range(d)]


def paired_t_squared(y, k):
    """Squared paired t statistic of the two conditions at grid point k."""
    n = len(y)
    d = [cell(y, j, 1, k) - cell(y, j, 0, k) for j in range(n)]
    m = sum(d) / n
    s2 = sum((x - m) ** 2 for x in d) / (n - 1)
    return m * m / (s2 / n)


def p_value(resampled, observed):
    return sum(1 for v in resampled if v > observed) / len(resampled)


def bonferroni(p_raw):
    m = len(p_raw)
    return [min(1.0, m * p) for p in p_raw]


def rel_close(a, b, rtol=1e-10, atol=0.0):
    return math.isclose(a, b, rel_tol=rtol, abs_tol=atol)
