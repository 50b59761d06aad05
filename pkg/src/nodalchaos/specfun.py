"""Hermite/Laguerre polynomials, sphere constants and chaos coefficients.

Everything here is a pure function.  Combinatorial quantities (``theta``,
``diagram4``, ``wick_oracle``, ``coefficient_bound``) stay exact when fed
integers or :class:`fractions.Fraction`; the rest is double precision.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

MAX_DEGREE = 64


class DegreeTooLargeError(ValueError):
    """Raised when a polynomial degree exceeds :data:`MAX_DEGREE`."""


def _check_degree(q):
    if q < 0:
        raise ValueError(f"degree must be non-negative, got {q}")
    if q > MAX_DEGREE:
        raise DegreeTooLargeError(f"degree {q} too large (max {MAX_DEGREE})")


def hermite_eval(q, x):
    """Probabilists' Hermite polynomial H_q evaluated at ``x``.

    Uses the three-term recurrence H_{k+1} = x H_k - k H_{k-1}.  ``x`` may be
    a scalar, an array, or a Fraction (exact evaluation).
    """
    _check_degree(q)
    if q == 0:
        return x * 0 + 1
    h_prev, h = x * 0 + 1, x
    for k in range(1, q):
        h_prev, h = h, x * h - k * h_prev
    return h


def hermite_table(qmax, x):
    """Stack of H_0..H_qmax at ``x``; shape ``(qmax + 1,) + shape(x)``."""
    _check_degree(qmax)
    x = np.asarray(x, dtype=float)
    out = np.empty((qmax + 1,) + x.shape)
    out[0] = 1.0
    if qmax >= 1:
        out[1] = x
    for k in range(1, qmax):
        out[k + 1] = x * out[k] - k * out[k - 1]
    return out


def hermite_coefficients(q):
    """Integer monomial coefficients of H_q, lowest degree first.

    Read off the generating function exp(tx - t^2/2):
    H_q(x) = q! sum_m (-1)^m x^(q-2m) / (m! 2^m (q-2m)!).
    """
    _check_degree(q)
    coef = [0] * (q + 1)
    for m in range(q // 2 + 1):
        coef[q - 2 * m] = (-1) ** m * math.factorial(q) // (
            math.factorial(m) * 2**m * math.factorial(q - 2 * m))
    return coef


def hermite_at_zero(a):
    """H_{2a}(0) = (-1)^a (2a)! / (2^a a!), as an exact integer."""
    _check_degree(2 * a)
    return (-1) ** a * math.factorial(2 * a) // (2**a * math.factorial(a))


def laguerre_eval(k, alpha, x):
    """Generalized Laguerre polynomial L_k^(alpha)(x) by recurrence.

    Parameters
    ----------
    k : int
        Degree, 0 <= k <= MAX_DEGREE.
    alpha : float
        Generalization parameter.
    x : float or ndarray
        Evaluation point(s).

    Returns
    -------
    float or ndarray
    """
    _check_degree(k)
    x = np.asarray(x, dtype=float) if not isinstance(x, (int, float, Fraction)) else x
    l_prev = x * 0 + 1
    if k == 0:
        return l_prev
    l_cur = 1 + alpha - x
    for j in range(1, k):
        l_prev, l_cur = l_cur, ((2 * j + 1 + alpha - x) * l_cur - (j + alpha) * l_prev) / (j + 1)
    return l_cur


def sphere_area(n):
    """Volume s_n of the unit sphere S^n in R^{n+1} (s_0 = 2)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    return 2.0 * math.exp((n + 1) / 2 * math.log(math.pi) - math.lgamma((n + 1) / 2))


def beta_const(n, q):
    """Moment integral of |v_1|^q over the unit sphere S^{n-1} in R^n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if q < 0:
        raise ValueError("q must be >= 0")
    return 2.0 * math.exp((n - 1) / 2 * math.log(math.pi)
                          + math.lgamma((q + 1) / 2) - math.lgamma((q + n) / 2))


def c_chi(b):
    """Coefficient of H_{2b} in the Hermite expansion of |g|, g ~ N(0, 1)."""
    _check_degree(2 * b)
    return (-1.0) ** (b - 1) / (2.0 ** (b - 1) * math.sqrt(2 * math.pi)
                                * (2 * b - 1) * math.factorial(b))


def a_coeff(n, b):
    """Chaos coefficient of degree 2b for the Euclidean norm in R^n."""
    return math.pi / sphere_area(n) * c_chi(b)


def theta(a, b):
    """Exact rational coefficient of the (a, b) bi-chaotic term.

    Equals (-1)^(a+b-1) / (2^(a+b) (2b-1) a! b!); for b = 0 the factor
    (2b-1) = -1 supplies the sign flip.
    """
    _check_degree(2 * (a + b))
    sign = 1 if (a + b - 1) % 2 == 0 else -1
    return Fraction(sign, 2 ** (a + b) * (2 * b - 1) * math.factorial(a) * math.factorial(b))


def theta_float(a, b):
    return float(theta(a, b))


def c_dq(d, q):
    """Normalizing constant linking sphere averages of H_q to Laguerre polynomials.

    Satisfies L_{q/2}^{(d/2-1)}(|xi|^2/2) = c_dq(d, q) * int_{S^{d-1}} H_q(<xi, v>) dv.
    """
    if q % 2:
        raise ValueError(f"q must be even, got {q}")
    _check_degree(q)
    h = q // 2
    rising = math.exp(math.lgamma(d / 2 + h) - math.lgamma(d / 2))
    double_fact = math.prod(range(q - 1, 0, -2)) if q > 0 else 1
    return rising / (math.factorial(h) * double_fact) * (-1) ** h / sphere_area(d - 1)


def diagram4(a, b, a2, b2, c13, c14, c23, c24):
    """E[H_a(g1) H_b(g2) H_a2(g3) H_b2(g4)] for unit Gaussians with C12 = C34 = 0.

    Single-sum closed form.  The correlations may be ints, Fractions, floats
    or broadcastable arrays; the result has the corresponding type.
    """
    for d in (a, b, a2, b2):
        _check_degree(d)
    if a + b != a2 + b2:
        return c13 * 0
    total = c13 * 0
    for k in range(max(0, a2 - b), min(a, a2) + 1):
        # a! b! a2! b2! / (k! (a-k)! (a2-k)! (b-a2+k)!) is an integer
        coef = math.comb(a, k) * math.comb(b, a2 - k) * math.factorial(a2) * math.factorial(b2)
        total = total + coef * c13**k * c14 ** (a - k) * c23 ** (a2 - k) * c24 ** (b - a2 + k)
    return total


def wick_oracle(degrees, cov):
    """Brute-force diagram sum for E[prod_i H_{d_i}(g_i)], g unit-variance Gaussian.

    Enumerates every symmetric non-negative integer matrix with zero
    diagonal and row sums ``degrees``.  Exact when ``cov`` holds Fractions.
    Intended as an independent test oracle only.
    """
    degrees = [int(d) for d in degrees]
    m = len(degrees)
    pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
    last_pair = {i: max((p for p, (a, _) in enumerate(pairs) if a == i), default=-1)
                 for i in range(m)}
    total = cov[0][0] * 0
    # factorial denominators kept as integers so Fraction input stays exact
    stack = [(0, tuple(degrees), 1, 1)]
    while stack:
        idx, rem, weight, den = stack.pop()
        if idx == len(pairs):
            if not any(rem):
                total = total + weight * Fraction(1, den)
            continue
        i, j = pairs[idx]
        hi = min(rem[i], rem[j])
        # the last pair leaving row i must use up its remaining degree
        lo = rem[i] if last_pair[i] == idx else 0
        for kij in range(lo, hi + 1):
            new = list(rem)
            new[i] -= kij
            new[j] -= kij
            stack.append((idx + 1, tuple(new), weight * cov[i][j] ** kij, den * math.factorial(kij)))
    return total * math.prod(math.factorial(d) for d in degrees)


def coefficient_bound(q):
    """Return (sum_{a+b=a'+b'=q/2} |Theta(a,b) Theta(a',b')| q!, 2^q), exactly."""
    if q % 2:
        raise ValueError(f"q must be even, got {q}")
    s = sum(abs(theta(a, q // 2 - a)) for a in range(q // 2 + 1))
    return s * s * math.factorial(q), Fraction(2**q)


def vandermonde_sum(a, b, a2, b2):
    """kappa(a, b, a2, b2): the exact integer sum bounding the diagram coefficients.

    Arguments are half-degrees; the Hermite degrees are 2a, 2b, 2a2, 2b2.
    """
    if a + b != a2 + b2:
        raise ValueError("need a + b == a2 + b2")
    f = math.factorial
    total = 0
    for k in range(max(0, 2 * a2 - 2 * b), min(2 * a, 2 * a2) + 1):
        num = f(2 * a) * f(2 * b) * f(2 * a2) * f(2 * b2)
        den = f(k) * f(2 * a - k) * f(2 * a2 - k) * f(2 * b - 2 * a2 + k)
        total += num // den
    return total


def splits(q):
    """Pairs (a, b) with 2a + 2b = q, a ascending."""
    if q % 2:
        raise ValueError(f"q must be even, got {q}")
    return [(a, q // 2 - a) for a in range(q // 2 + 1)]
