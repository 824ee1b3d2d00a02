"""Shadowed-Rician fading: parameters, exact CDF/PDF, order statistics, sampling.

The channel power ``|h|^2`` is the squared magnitude of a Nakagami-m
shadowed line-of-sight term plus a Rayleigh scattered term (Abdi et al.).
With ``r = omega / (2 b m + omega)`` the CDF series reads

    F(x) = (1 - r)^m * sum_k (m)_k r^k / k! * P(k + 1, x / 2b)

where ``P`` is the regularized lower incomplete gamma function. This is the
usual ``alpha * sum (m)_k delta^k / (k!^2 beta^(k+1)) * gamma(k+1, x beta)``
form with the factorials and powers of beta folded into the coefficients,
which keeps every coefficient bounded and the sum free of overflow.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, ValidationError
from .specfun import DEFAULT_CONTROL, SeriesControl, kummer_1f1, regularized_lower_gamma

__all__ = [
    "ShadowedRicianParams",
    "DerivedConstants",
    "PRESETS",
    "preset",
    "derive",
    "series_coefficients",
    "cdf_gain",
    "pdf_gain",
    "sample_gain",
    "sample_ordered_gains",
    "order_statistic_cdf",
    "order_statistic_cdf_binomial",
    "ordered_cdf",
]

CLAMP_SLACK = 1e-9


@dataclass(frozen=True)
class ShadowedRicianParams:
    """Fading triple: ``b`` is half the multipath power, ``m`` the Nakagami
    shadowing parameter, ``omega`` the mean line-of-sight power."""

    b: float
    m: float
    omega: float

    def __post_init__(self):
        if not (self.b > 0 and math.isfinite(self.b)):
            raise ValidationError(f"fading b must be positive, got {self.b}")
        if not (self.m > 0 and math.isfinite(self.m)):
            raise ValidationError(f"fading m must be positive, got {self.m}")
        if not (self.omega >= 0 and math.isfinite(self.omega)):
            raise ValidationError(f"fading omega must be nonnegative, got {self.omega}")

    @property
    def mean_power(self) -> float:
        return 2.0 * self.b + self.omega


PRESETS = {
    "fhs": ShadowedRicianParams(b=0.063, m=0.739, omega=8.97e-4),
    "as": ShadowedRicianParams(b=0.126, m=10.1, omega=0.835),
    "ils": ShadowedRicianParams(b=0.158, m=19.4, omega=1.29),
}


def preset(name: str) -> ShadowedRicianParams:
    """Look up a shadowing preset by name (``fhs``, ``as``, ``ils``; any case)."""
    try:
        return PRESETS[name.strip().lower()]
    except KeyError:
        raise ValidationError(
            f"unknown shadowing preset {name!r}; expected one of {sorted(PRESETS)}"
        ) from None


@dataclass(frozen=True)
class DerivedConstants:
    alpha: float
    beta: float
    delta: float

    @property
    def ratio(self) -> float:
        """``delta / beta``, the geometric rate of the CDF series; always < 1."""
        return self.delta / self.beta


def derive(params: ShadowedRicianParams) -> DerivedConstants:
    two_b = 2.0 * params.b
    denom = two_b * params.m + params.omega
    beta = 1.0 / two_b
    delta = (params.omega / two_b) / denom
    # (2bm / (2bm + omega))^m in log space; m reaches ~20 in the presets.
    alpha = math.exp(params.m * math.log(two_b * params.m / denom)) / two_b
    return DerivedConstants(alpha=alpha, beta=beta, delta=delta)


def series_coefficients(params: ShadowedRicianParams, ctl: SeriesControl = DEFAULT_CONTROL) -> np.ndarray:
    """Coefficients ``(m)_k r^k / k!`` of the CDF series, truncated per ``ctl``.

    The cut is independent of ``x``: because ``P(k+1, y)`` decreases in ``k``,
    the relative truncation error of the CDF is bounded by the coefficient
    tail over the coefficient head. Raises :class:`ConvergenceError` if
    ``ctl.max_terms`` is reached first.
    """
    m = params.m
    r = params.omega / (2.0 * params.b * m + params.omega)
    coeffs = [1.0]
    head = 1.0
    term = 1.0
    k = 0
    while True:
        # Sup of the term ratio (m + j) r / (j + 1) over all j >= k.
        q = r * max((m + k) / (k + 1.0), 1.0)
        if q < 1.0 and term * q / (1.0 - q) <= ctl.rel_tol * head:
            return np.asarray(coeffs)
        if len(coeffs) >= ctl.max_terms:
            raise ConvergenceError(
                f"CDF series for {params} needs more than {ctl.max_terms} terms"
            )
        term *= (m + k) * r / (k + 1.0)
        head += term
        coeffs.append(term)
        k += 1


def _clamp_probability(value, what):
    v = np.asarray(value, dtype=float)
    if np.any(v < -CLAMP_SLACK) or np.any(v > 1.0 + CLAMP_SLACK):
        worst = float(v[np.argmax(np.maximum(-v, v - 1.0))]) if v.ndim else float(v)
        raise ConvergenceError(f"{what} left [0, 1] by more than {CLAMP_SLACK}: {worst!r}")
    return np.clip(v, 0.0, 1.0)


def cdf_gain(params: ShadowedRicianParams, x, ctl: SeriesControl = DEFAULT_CONTROL):
    """CDF of the unordered channel power ``|h|^2``; ``x`` scalar or array."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0) or np.any(np.isnan(xa)):
        raise ValueError("channel power must be nonnegative")
    coeffs = series_coefficients(params, ctl)
    y = np.atleast_1d(xa).ravel() / (2.0 * params.b)
    top = len(coeffs)
    # P(k+1, y) from the top index down: P(a, y) = P(a+1, y) + y^a e^-y / a!.
    # The downward direction only adds positive terms, so it is stable.
    p_next = regularized_lower_gamma(float(top), y)
    total = coeffs[-1] * p_next
    with np.errstate(divide="ignore"):
        log_y = np.log(y)
    for k in range(top - 1, 0, -1):
        p_next = p_next + np.exp(k * log_y - y - math.lgamma(k + 1.0))
        total = total + coeffs[k - 1] * p_next
    r = params.omega / (2.0 * params.b * params.m + params.omega)
    scale = math.exp(params.m * math.log1p(-r))
    out = _clamp_probability(scale * total, "shadowed-Rician CDF")
    out = np.where(y == 0.0, 0.0, out).reshape(np.shape(xa))
    return float(out) if np.ndim(xa) == 0 else out


def pdf_gain(params: ShadowedRicianParams, x: float, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """Density of ``|h|^2`` at a scalar ``x``.

    Evaluated as ``alpha e^(-beta x) 1F1(m; 1; delta x)``. Where a bound on the
    result is below the double-precision range it returns 0 instead of
    summing a long hypergeometric series.
    """
    if not x >= 0:
        raise ValueError(f"channel power must be nonnegative, got {x}")
    d = derive(params)
    z = d.delta * x
    log_pref = math.log(d.alpha) - d.beta * x
    if log_pref + z + max(params.m - 1.0, 0.0) * math.log1p(z) < -800.0:
        return 0.0
    return math.exp(log_pref + math.log(kummer_1f1(params.m, 1.0, z, ctl)))


def sample_gain(params: ShadowedRicianParams, rng: np.random.Generator, size=None):
    """Draw channel powers ``|A e^(i theta) + Z|^2``.

    ``A^2`` is Gamma(m, omega/m) (Nakagami-m LoS power) and ``Z`` is circular
    complex Gaussian with total variance ``2b``. The LoS phase is not drawn:
    ``Z`` is rotation invariant, so ``|A e^(i theta) + Z|`` has the law of
    ``|A + Z|``.
    """
    los_power = rng.gamma(params.m, params.omega / params.m, size=size)
    amp = np.sqrt(los_power)
    sigma = math.sqrt(params.b)
    re = amp + sigma * rng.standard_normal(size=size)
    im = sigma * rng.standard_normal(size=size)
    return re * re + im * im


def sample_ordered_gains(params: ShadowedRicianParams, M: int, rng: np.random.Generator, size=None):
    """``M`` i.i.d. channel powers sorted ascending along the last axis.

    With ``size=None`` returns shape ``(M,)``; otherwise ``(size, M)``.
    Ties keep draw order.
    """
    if M < 1:
        raise ValueError(f"user count must be at least 1, got {M}")
    shape = (M,) if size is None else (size, M)
    draws = sample_gain(params, rng, size=shape)
    return np.sort(draws, axis=-1, kind="stable")


def _order_coefficients(M, p):
    theta = math.factorial(M) // (math.factorial(p - 1) * math.factorial(M - p))
    return [theta * math.comb(M - p, l) * (-1) ** l / (p + l) for l in range(M - p + 1)]


def order_statistic_cdf(F, M: int, p: int):
    """CDF of the ``p``-th smallest of ``M`` i.i.d. draws given the parent CDF ``F``.

    Uses the alternating expansion
    ``M!/((p-1)!(M-p)!) * sum_l C(M-p, l) (-1)^l / (p+l) * F^(p+l)``.
    """
    if not 1 <= p <= M:
        raise ValueError(f"user index p={p} outside 1..{M}")
    Fa = np.asarray(F, dtype=float)
    coeffs = _order_coefficients(M, p)
    terms = np.stack([c * Fa ** (p + l) for l, c in enumerate(coeffs)])
    out = np.sum(terms, axis=0)
    return float(out) if np.ndim(Fa) == 0 else out


def order_statistic_cdf_binomial(F, M: int, p: int):
    """Same quantity as :func:`order_statistic_cdf` via
    ``sum_{j>=p} C(M, j) F^j (1-F)^(M-j)``; used as a cross-check."""
    if not 1 <= p <= M:
        raise ValueError(f"user index p={p} outside 1..{M}")
    Fa = np.asarray(F, dtype=float)
    out = sum(math.comb(M, j) * Fa**j * (1.0 - Fa) ** (M - j) for j in range(p, M + 1))
    return float(out) if np.ndim(Fa) == 0 else out


def ordered_cdf(params: ShadowedRicianParams, M: int, p: int, x, ctl: SeriesControl = DEFAULT_CONTROL):
    """CDF of the ``p``-th ordered channel power among ``M`` users."""
    return order_statistic_cdf(cdf_gain(params, x, ctl), M, p)
