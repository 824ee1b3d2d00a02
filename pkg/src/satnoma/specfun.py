"""Scalar special functions used by the fading and outage formulas.

Everything here works in double precision. The incomplete gamma routines
accept array arguments for ``x`` because the channel CDF is evaluated on
whole sample sets; the other functions are scalar.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy import special as _sp

from .errors import ConvergenceError

__all__ = [
    "SeriesControl",
    "DEFAULT_CONTROL",
    "log_gamma",
    "pochhammer",
    "regularized_lower_gamma",
    "lower_incomplete_gamma",
    "kummer_1f1",
    "bessel_j",
    "gauss_laguerre_rule",
]

_EPS = np.finfo(float).eps
_FPMIN = np.finfo(float).tiny / _EPS
_GAMMA_ITMAX = 5000


@dataclass(frozen=True)
class SeriesControl:
    """Truncation policy for the infinite sums in the fading formulas.

    A sum is accepted once the bound on its remaining tail drops below
    ``rel_tol`` times the partial sum. Reaching ``max_terms`` first raises
    :class:`ConvergenceError`; a truncated value is never returned silently.
    """

    rel_tol: float = 1e-12
    max_terms: int = 500

    def __post_init__(self):
        if not 0.0 < self.rel_tol < 1.0:
            raise ValueError(f"rel_tol must lie in (0, 1), got {self.rel_tol}")
        if self.max_terms < 1:
            raise ValueError(f"max_terms must be positive, got {self.max_terms}")


DEFAULT_CONTROL = SeriesControl()


# Stirling corrections B_2k / (2k (2k-1)), k = 1..8.
_STIRLING = (1 / 12, -1 / 360, 1 / 1260, -1 / 1680, 1 / 1188,
             -691 / 360360, 1 / 156, -3617 / 122400)
_HALF_LOG_2PI = 0.91893853320467274178
_STIRLING_FROM = 10.0
_SPLITTER = 134217729.0  # 2^27 + 1


def _two_prod(a, b):
    # Dekker: a * b == hi + lo exactly.
    hi = a * b
    ca = _SPLITTER * a
    a_hi = ca - (ca - a)
    a_lo = a - a_hi
    cb = _SPLITTER * b
    b_hi = cb - (cb - b)
    b_lo = b - b_hi
    lo = ((a_hi * b_hi - hi) + a_hi * b_lo + a_lo * b_hi) + a_lo * b_lo
    return hi, lo


def _log_dd(y):
    # ln(y) as hi + lo, with one Newton step on exp carried in double-double.
    t = math.log(y)
    hi, lo = _two_prod(y, math.exp(-t))
    return t, (hi - 1.0) + lo


def log_gamma(x: float) -> float:
    """Natural log of the Gamma function for ``x > 0``.

    ``math.lgamma`` below 10. Above, Stirling's series with the dominant
    ``(x - 1/2) ln x`` product carried in double-double, which keeps
    ``exp(result)`` within about 1e-13 relative even where the log itself
    is in the hundreds.
    """
    if not x > 0:
        raise ValueError(f"log_gamma requires x > 0, got {x}")
    if x < _STIRLING_FROM or math.isinf(x):
        return math.lgamma(x)
    lx_hi, lx_lo = _log_dd(x)
    xh = x - 0.5
    p_hi, p_lo = _two_prod(xh, lx_hi)
    inv = 1.0 / x
    inv2 = inv * inv
    tail = 0.0
    for c in reversed(_STIRLING):
        tail = tail * inv2 + c
    return math.fsum((p_hi, p_lo, xh * lx_lo, -x, _HALF_LOG_2PI, tail * inv))


def pochhammer(m: float, k: int) -> float:
    """Rising factorial ``m (m+1) ... (m+k-1)``.

    Small ``k`` uses the direct product; larger ``k`` goes through log-gamma
    so the result overflows only when the true value does.
    """
    if not m > 0:
        raise ValueError(f"pochhammer requires m > 0, got {m}")
    if k < 0:
        raise ValueError(f"pochhammer requires k >= 0, got {k}")
    if k <= 32:
        out = 1.0
        for j in range(k):
            out *= m + j
        return out
    return math.exp(log_gamma(m + k) - log_gamma(m))


def _log_prefactor(a, x):
    # log(x^a e^-x / Gamma(a)); x == 0 maps to -inf.
    with np.errstate(divide="ignore"):
        return a * np.log(x) - x - math.lgamma(a)


def _gamma_series(a, x):
    s = np.full_like(x, 1.0 / a)
    d = s.copy()
    ap = a
    for _ in range(_GAMMA_ITMAX):
        ap += 1.0
        d *= x / ap
        s += d
        if np.all(np.abs(d) <= np.abs(s) * _EPS):
            break
    else:
        raise ConvergenceError(f"incomplete gamma series did not converge for a={a}")
    return s * np.exp(_log_prefactor(a, x))


def _gamma_contfrac(a, x):
    # Modified Lentz evaluation of the continued fraction for Q(a, x).
    b = x + 1.0 - a
    c = np.full_like(x, 1.0 / _FPMIN)
    d = 1.0 / b
    h = d.copy()
    for i in range(1, _GAMMA_ITMAX):
        an = -i * (i - a)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < _FPMIN, _FPMIN, d)
        c = b + an / c
        c = np.where(np.abs(c) < _FPMIN, _FPMIN, c)
        d = 1.0 / d
        delta = d * c
        h *= delta
        if np.all(np.abs(delta - 1.0) <= _EPS):
            break
    else:
        raise ConvergenceError(f"incomplete gamma fraction did not converge for a={a}")
    return np.exp(_log_prefactor(a, x)) * h


def regularized_lower_gamma(a: float, x):
    """Regularized lower incomplete gamma ``P(a, x) = gamma(a, x) / Gamma(a)``.

    Uses the power series for ``x < a + 1`` and the continued fraction for
    the complement otherwise. ``x`` may be a scalar or an array.
    """
    if not a > 0:
        raise ValueError(f"incomplete gamma requires a > 0, got {a}")
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0) or np.any(np.isnan(xa)):
        raise ValueError("incomplete gamma requires x >= 0")
    flat = np.atleast_1d(xa).ravel()
    out = np.empty_like(flat)
    lo = flat < a + 1.0
    if np.any(lo):
        out[lo] = _gamma_series(a, flat[lo])
    if np.any(~lo):
        out[~lo] = 1.0 - _gamma_contfrac(a, flat[~lo])
    out = out.reshape(np.shape(xa))
    return float(out) if np.ndim(xa) == 0 else out


def lower_incomplete_gamma(a: float, x):
    """Unregularized ``gamma(a, x) = integral_0^x t^(a-1) e^-t dt``.

    Overflows for ``a`` beyond about 171 where ``Gamma(a)`` itself does; the
    fading series work with :func:`regularized_lower_gamma` instead.
    """
    return regularized_lower_gamma(a, x) * math.gamma(a)


def kummer_1f1(a: float, b: float, z: float, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """Confluent hypergeometric ``1F1(a; b; z)`` by its defining series, ``z >= 0``."""
    if not a > 0:
        raise ValueError(f"kummer_1f1 requires a > 0, got {a}")
    if b <= 0 and float(b).is_integer():
        raise ValueError(f"kummer_1f1 undefined for b = {b}")
    if z < 0:
        raise ValueError(f"kummer_1f1 supports z >= 0 only, got {z}")
    total = 1.0
    term = 1.0
    for k in range(ctl.max_terms):
        ratio = (a + k) / ((b + k) * (k + 1.0)) * z
        term *= ratio
        total += term
        # Past the peak the terms shrink geometrically; bound the tail by that.
        if ratio < 1.0:
            tail = term * ratio / (1.0 - ratio)
            if tail <= ctl.rel_tol * total:
                return total
    raise ConvergenceError(
        f"1F1({a}; {b}; {z}) needs more than {ctl.max_terms} terms"
    )


def bessel_j(order: int, u):
    """Bessel function of the first kind for orders 1 and 3.

    Accuracy is 1e-10 absolute for ``|u| <= 50``, the range the beam
    pattern needs. Larger arguments are evaluated but not guaranteed.
    """
    if order == 1:
        return _sp.j1(u)
    if order == 3:
        return _sp.jv(3, u)
    raise ValueError(f"unsupported Bessel order {order}; only 1 and 3 are used")


_rule_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}
_rule_lock = threading.Lock()


def _laguerre_newton(n):
    nodes = np.empty(n)
    weights = np.empty(n)
    z = 0.0
    for i in range(n):
        if i == 0:
            z = 3.0 / (1.0 + 2.4 * n)
        elif i == 1:
            z += 15.0 / (1.0 + 2.5 * n)
        else:
            ai = i - 1
            z += (1.0 + 2.55 * ai) / (1.9 * ai) * (z - nodes[i - 2])
        for _ in range(100):
            p1, p2, pp = _laguerre_eval(n, z)
            z1 = z
            z = z1 - p1 / pp
            # Quadratic convergence stalls at ~1e-13 relative from rounding.
            if abs(z - z1) <= 1e-12 * z:
                break
        else:
            raise ConvergenceError(f"Laguerre root {i} of degree {n} did not converge")
        _, p2, pp = _laguerre_eval(n, z)
        nodes[i] = z
        weights[i] = -1.0 / (pp * n * p2)
    return nodes, weights


def _laguerre_eval(n, z):
    # Returns L_n(z), L_{n-1}(z) and L_n'(z).
    p1, p2 = 1.0, 0.0
    for j in range(1, n + 1):
        p3, p2 = p2, p1
        p1 = ((2 * j - 1 - z) * p2 - (j - 1) * p3) / j
    return p1, p2, n * (p1 - p2) / z


def gauss_laguerre_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights with ``sum(w * f(x)) ~ integral_0^inf f(x) e^-x dx``.

    Exact for polynomials up to degree ``2n - 1``. Rules are computed once by
    Newton iteration on the Laguerre recurrence and cached; the returned
    arrays are read-only.
    """
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= 128:
        raise ValueError(f"Gauss-Laguerre order must be an integer in [1, 128], got {n}")
    n = int(n)
    rule = _rule_cache.get(n)
    if rule is None:
        with _rule_lock:
            rule = _rule_cache.get(n)
            if rule is None:
                nodes, weights = _laguerre_newton(n)
                nodes.flags.writeable = False
                weights.flags.writeable = False
                rule = (nodes, weights)
                _rule_cache[n] = rule
    return rule
