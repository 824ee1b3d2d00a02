"""Closed-form, exact and asymptotic outage probabilities for the ordered users.

All results come back as :class:`OutageResult`. The pSIC closed form is
computed twice (its own incomplete-gamma series and the order-statistic
transform of the channel CDF) and the two must agree before a value is
returned.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import channel
from .channel import ordered_cdf
from .errors import ConvergenceError
from .noma import NomaScenario, psi_star, vartheta_star
from .specfun import DEFAULT_CONTROL, SeriesControl, gauss_laguerre_rule, regularized_lower_gamma

__all__ = [
    "METHODS",
    "Diagnostics",
    "OutageResult",
    "ApproximationRegimeWarning",
    "DEFAULT_QUAD_N",
    "outage_psic_exact",
    "outage_ipsic_exact",
    "outage_ipsic_floor",
    "outage_psic_asymptote",
    "outage_psic_series_approx",
    "outage_oma",
    "oma_threshold",
    "diversity_order",
]

METHODS = (
    "exact_ipsic", "exact_psic", "floor_ipsic", "asymptote_psic",
    "series_psic", "monte_carlo", "oma",
)
DEFAULT_QUAD_N = 64
DUAL_FORM_RTOL = 1e-10
QUAD_RTOL = 1e-8
SERIES_REGIME_LIMIT = 0.1


class ApproximationRegimeWarning(UserWarning):
    """A small-argument approximation was used outside its regime."""


@dataclass(frozen=True)
class Diagnostics:
    series_terms: int | None = None
    quad_nodes: int | None = None
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class OutageResult:
    probability: float
    method: str
    diagnostics: Diagnostics = field(default_factory=Diagnostics)
    ci_halfwidth: float | None = None
    trials: int | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown outage method {self.method!r}")
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError(f"outage probability {self.probability!r} outside [0, 1]")

    @property
    def std_error(self) -> float | None:
        return None if self.ci_halfwidth is None else self.ci_halfwidth / 1.96


def _clip(value: float, what: str) -> float:
    if value < -channel.CLAMP_SLACK or value > 1.0 + channel.CLAMP_SLACK:
        raise ConvergenceError(f"{what} evaluated to {value!r}, outside [0, 1]")
    return min(max(value, 0.0), 1.0)


def _clip_approx(value: float) -> tuple[float, tuple[str, ...]]:
    # Approximations legitimately overshoot at low SNR; cap and say so.
    if value > 1.0:
        return 1.0, ("clipped_above_one",)
    if value < 0.0:
        return 0.0, ("clipped_below_zero",)
    return value, ()


def _order_sum(F: float, M: int, p: int) -> float:
    # Theta_p sum_l C(M-p, l) (-1)^l / (p + l) * F^(p+l), accumulated exactly-rounded.
    theta = math.factorial(M) // (math.factorial(p - 1) * math.factorial(M - p))
    return math.fsum(
        theta * math.comb(M - p, l) * (-1) ** l / (p + l) * F ** (p + l)
        for l in range(M - p + 1)
    )


def _gamma_series_cdf(params, x: float, ctl: SeriesControl) -> tuple[float, int]:
    """``alpha * sum_k (m)_k delta^k / (k!^2 beta^(k+1)) * gamma(k+1, x beta)``.

    Each incomplete gamma is evaluated on its own (no recurrence), and the
    sum stops on an ``x``-dependent tail bound. Independent of
    :func:`channel.cdf_gain` apart from the shared special functions.
    """
    d = channel.derive(params)
    y = x * d.beta
    if y == 0.0:
        return 0.0, 1
    r = d.ratio
    m = params.m
    # Folded coefficient: (m)_k delta^k / (k!^2 beta^(k+1)) * k! = c_k / beta.
    coeff = 1.0
    total = 0.0
    for k in range(ctl.max_terms):
        p_k = regularized_lower_gamma(k + 1.0, y)
        total += coeff * p_k
        q = r * max((m + k + 1) / (k + 2.0), 1.0)
        next_coeff = coeff * (m + k) * r / (k + 1.0)
        if q < 1.0 and next_coeff * p_k / (1.0 - q) <= ctl.rel_tol * total:
            return d.alpha / d.beta * total, k + 1
        coeff = next_coeff
    raise ConvergenceError(f"incomplete-gamma series for {params} exceeded {ctl.max_terms} terms")


def outage_psic_exact(scenario: NomaScenario, p: int, rho: float,
                      ctl: SeriesControl = DEFAULT_CONTROL) -> OutageResult:
    """Closed-form outage of user ``p`` under perfect SIC.

    The residual-interference setting of ``scenario`` is ignored.
    """
    M = scenario.M
    params = scenario.fading(p)
    threshold = psi_star(scenario, p, rho)
    F_series, terms = _gamma_series_cdf(params, threshold, ctl)
    direct = _order_sum(F_series, M, p)
    composed = float(ordered_cdf(params, M, p, threshold, ctl))
    if abs(direct - composed) > DUAL_FORM_RTOL * max(abs(composed), 1e-300):
        raise ConvergenceError(
            f"pSIC outage forms disagree for p={p}, rho={rho}: {direct!r} vs {composed!r}"
        )
    return OutageResult(_clip(direct, "pSIC outage"), "exact_psic", Diagnostics(series_terms=terms))


def _laguerre_average(f, quad_n: int) -> float:
    nodes, weights = gauss_laguerre_rule(quad_n)
    return math.fsum(weights * f(nodes))


def _checked_laguerre(f, quad_n: int) -> tuple[float, tuple[str, ...]]:
    value = _laguerre_average(f, quad_n)
    other_n = 2 * quad_n if 2 * quad_n <= 128 else quad_n // 2
    other = _laguerre_average(f, other_n)
    flags = ()
    if abs(value - other) > QUAD_RTOL * abs(other):
        flags = ("quadrature_nonconvergence",)
        warnings.warn(
            f"Gauss-Laguerre orders {quad_n} and {other_n} differ: {value!r} vs {other!r}",
            RuntimeWarning, stacklevel=3,
        )
    return value, flags


def _require_ipsic(scenario: NomaScenario):
    if not scenario.sic.is_imperfect:
        raise ValueError("this outage expression needs an ipSIC scenario (omega_i > 0)")


def outage_ipsic_exact(scenario: NomaScenario, p: int, rho: float,
                       quad_n: int = DEFAULT_QUAD_N,
                       ctl: SeriesControl = DEFAULT_CONTROL) -> OutageResult:
    """Exact outage of user ``p`` with residual interference ``|h_I|^2 ~ Exp(omega_i)``.

    Averages the ordered CDF at ``psi* (eta rho |h_I|^2 + 1)`` over the
    residual power. With ``t = |h_I|^2 / omega_i`` the average has weight
    ``e^-t``, handled exactly by Gauss-Laguerre.
    """
    _require_ipsic(scenario)
    M = scenario.M
    params = scenario.fading(p)
    threshold = psi_star(scenario, p, rho)
    slope = threshold * scenario.residual_factor(p) * rho * scenario.sic.omega_i
    terms = len(channel.series_coefficients(params, ctl))

    def integrand(t):
        return ordered_cdf(params, M, p, threshold + slope * t, ctl)

    value, flags = _checked_laguerre(integrand, quad_n)
    diag = Diagnostics(series_terms=terms, quad_nodes=quad_n, flags=flags)
    return OutageResult(_clip(value, "ipSIC outage"), "exact_ipsic", diag)


def outage_ipsic_floor(scenario: NomaScenario, p: int,
                       quad_n: int = DEFAULT_QUAD_N,
                       ctl: SeriesControl = DEFAULT_CONTROL) -> OutageResult:
    """High-SNR limit of the ipSIC outage of user ``p``; independent of ``rho``."""
    _require_ipsic(scenario)
    M = scenario.M
    params = scenario.fading(p)
    slope = scenario.residual_factor(p) * vartheta_star(scenario, p) * scenario.sic.omega_i
    terms = len(channel.series_coefficients(params, ctl))

    def integrand(t):
        return ordered_cdf(params, M, p, slope * t, ctl)

    value, flags = _checked_laguerre(integrand, quad_n)
    diag = Diagnostics(series_terms=terms, quad_nodes=quad_n, flags=flags)
    return OutageResult(_clip(value, "ipSIC floor"), "floor_ipsic", diag)


def outage_psic_asymptote(scenario: NomaScenario, p: int, rho: float) -> OutageResult:
    """Leading high-SNR term ``M!/((M-p)! p!) * (alpha psi*)^p`` under pSIC."""
    M = scenario.M
    alpha = channel.derive(scenario.fading(p)).alpha
    coeff = math.factorial(M) // (math.factorial(M - p) * math.factorial(p))
    value = coeff * (alpha * psi_star(scenario, p, rho)) ** p
    value, flags = _clip_approx(value)
    return OutageResult(value, "asymptote_psic", Diagnostics(series_terms=1, flags=flags))


def outage_psic_series_approx(scenario: NomaScenario, p: int, rho: float,
                              ctl: SeriesControl = DEFAULT_CONTROL,
                              k_terms: int | None = None,
                              l_terms: int | None = None) -> OutageResult:
    """pSIC outage with ``gamma(k+1, y)`` replaced by ``y^(k+1)/(k+1)``.

    After the substitution the powers of beta cancel and the channel CDF
    becomes ``alpha * sum_k (m)_k delta^k psi*^(k+1) / (k!^2 (k+1))``. Valid for
    ``psi* beta << 1``; beyond 0.1 a :class:`ApproximationRegimeWarning` is
    issued and the result is flagged. ``k_terms`` / ``l_terms`` cap the
    inner and order-statistic sums; ``k_terms=1, l_terms=1`` gives the
    high-SNR asymptote.
    """
    M = scenario.M
    params = scenario.fading(p)
    d = channel.derive(params)
    threshold = psi_star(scenario, p, rho)
    flags: tuple[str, ...] = ()
    if threshold * d.beta > SERIES_REGIME_LIMIT:
        flags = ("out_of_regime",)
        warnings.warn(
            f"psi* beta = {threshold * d.beta:.3g} exceeds {SERIES_REGIME_LIMIT}; "
            "small-argument approximation is unreliable here",
            ApproximationRegimeWarning, stacklevel=2,
        )
    limit = ctl.max_terms if k_terms is None else k_terms
    z = d.delta * threshold
    term = threshold  # k = 0 term
    total = 0.0
    used = 0
    for k in range(limit):
        total += term
        used = k + 1
        # term_{k+1} / term_k = (m + k) z (k + 1) / ((k + 1)^2 (k + 2))
        nxt = term * (params.m + k) * z / ((k + 1.0) * (k + 2.0))
        if k_terms is None and (params.m + k) * z / ((k + 1.0) * (k + 2.0)) < 0.5 \
                and nxt <= ctl.rel_tol * total:
            break
        term = nxt
    else:
        if k_terms is None:
            raise ConvergenceError(f"series approximation exceeded {ctl.max_terms} terms")
    F = d.alpha * total
    n_l = M - p + 1 if l_terms is None else min(l_terms, M - p + 1)
    theta = math.factorial(M) // (math.factorial(p - 1) * math.factorial(M - p))
    value = math.fsum(
        theta * math.comb(M - p, l) * (-1) ** l / (p + l) * F ** (p + l) for l in range(n_l)
    )
    value, clip_flags = _clip_approx(value)
    return OutageResult(value, "series_psic", Diagnostics(series_terms=used, flags=flags + clip_flags))


def oma_threshold(scenario: NomaScenario, p: int, rho: float) -> float:
    """Channel power below which user ``p`` fails in the OMA baseline.

    Each user gets a 1/M time share at full power and must carry the NOMA
    sum rate ``R_o = sum R_i``: outage when ``log2(1 + rho phi_p |h|^2) / M < R_o``.
    """
    scenario._index(p)
    if not rho > 0:
        raise ValueError(f"SNR must be positive, got {rho}")
    sum_rate = math.fsum(scenario.rates)
    return (2.0 ** (scenario.M * sum_rate) - 1.0) / (rho * scenario.gains[p - 1])


def outage_oma(scenario: NomaScenario, p: int, rho: float,
               ctl: SeriesControl = DEFAULT_CONTROL) -> OutageResult:
    params = scenario.fading(p)
    value = float(ordered_cdf(params, scenario.M, p, oma_threshold(scenario, p, rho), ctl))
    terms = len(channel.series_coefficients(params, ctl))
    return OutageResult(_clip(value, "OMA outage"), "oma", Diagnostics(series_terms=terms))


def diversity_order(points: Sequence[tuple[float, float]],
                    window: tuple[int, int] | None = None) -> float:
    """Negative log-log slope of outage versus linear SNR.

    ``points`` are ``(rho, P)`` pairs with increasing ``rho``; ``window``
    selects an inclusive index range. With more than two points the slope
    is a least-squares fit.
    """
    pts = list(points)
    if window is not None:
        lo, hi = window
        pts = pts[lo:hi + 1]
    if len(pts) < 2:
        raise ValueError("diversity order needs at least two points")
    rho = np.array([pt[0] for pt in pts], dtype=float)
    prob = np.array([pt[1] for pt in pts], dtype=float)
    if np.any(np.diff(rho) <= 0):
        raise ValueError("SNR values must be strictly increasing")
    if np.any(prob <= 0):
        raise ValueError("diversity order needs strictly positive outage probabilities")
    slope = np.polyfit(np.log(rho), np.log(prob), 1)[0]
    return float(-slope)
