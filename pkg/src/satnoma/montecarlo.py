"""Monte Carlo outage estimates used to check the analytic results.

Trials are split into fixed blocks of ``BLOCK_SIZE``. Block ``b`` draws from
its own generator seeded by ``SeedSequence(seed, spawn_key=(b,))``, so
counts are reproducible bit for bit and do not depend on the worker count.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .analytic import Diagnostics, OutageResult
from .channel import sample_ordered_gains
from .errors import ValidationError
from .noma import NomaScenario, psi_star, sinr_detect

__all__ = [
    "BLOCK_SIZE",
    "SimConfig",
    "block_rng",
    "sample_residual",
    "outage_indicators",
    "simulate_outage",
    "simulate_outage_threshold_form",
    "simulate_oma",
]

BLOCK_SIZE = 4096
Z95 = 1.96


@dataclass(frozen=True)
class SimConfig:
    trials: int = 100_000
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1000:
            raise ValidationError(f"need at least 1000 trials for a confidence interval, got {self.trials}")
        if not 0 <= self.seed < 2**64:
            raise ValidationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.workers < 1:
            raise ValidationError(f"workers must be positive, got {self.workers}")


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))


def sample_residual(omega_i: float, rng: np.random.Generator, size=None):
    """Residual interference power ``|h_I|^2`` for ``h_I ~ CN(0, omega_i)``."""
    return rng.exponential(omega_i, size=size)


def _block_sizes(trials):
    full, rest = divmod(trials, BLOCK_SIZE)
    return [BLOCK_SIZE] * full + ([rest] if rest else [])


def _draw_block(scenario: NomaScenario, p: int, rng, n):
    gains = sample_ordered_gains(scenario.fading(p), scenario.M, rng, size=n)[:, p - 1]
    if scenario.sic.is_imperfect:
        residual = sample_residual(scenario.sic.omega_i, rng, size=n)
    else:
        residual = np.zeros(n)
    return gains, residual


def _fail_sinr_chain(scenario, p, rho, gains, residual):
    fail = np.zeros(gains.shape, dtype=bool)
    for q in range(1, p + 1):
        sinr = sinr_detect(scenario, p, q, gains, residual, rho)
        fail |= sinr < scenario.thresholds[q - 1]
    return fail


def _fail_threshold(scenario, p, rho, gains, residual):
    eta = scenario.residual_factor(p)
    return ~(gains > psi_star(scenario, p, rho) * (eta * rho * residual + 1.0))


def _fail_oma(scenario, p, rho, gains, residual):
    sum_rate = math.fsum(scenario.rates)
    rate = np.log2(1.0 + rho * scenario.gains[p - 1] * gains) / scenario.M
    return rate < sum_rate


_RULES = {
    "sinr": _fail_sinr_chain,
    "threshold": _fail_threshold,
    "oma": _fail_oma,
}


def _run_blocks(scenario, p, rho, sim: SimConfig, rule, reduce):
    scenario._index(p)
    if rho < 0:
        raise ValueError(f"SNR must be nonnegative, got {rho}")

    def one(args):
        b, n = args
        gains, residual = _draw_block(scenario, p, block_rng(sim.seed, b), n)
        return reduce(rule(scenario, p, rho, gains, residual))

    jobs = list(enumerate(_block_sizes(sim.trials)))
    if sim.workers == 1:
        return [one(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=sim.workers) as pool:
        return list(pool.map(one, jobs))


def outage_indicators(scenario: NomaScenario, p: int, rho: float, sim: SimConfig,
                      form: str = "sinr") -> np.ndarray:
    """Per-trial outage flags (``form`` is ``sinr``, ``threshold`` or ``oma``)."""
    parts = _run_blocks(scenario, p, rho, sim, _RULES[form], lambda f: f)
    return np.concatenate(parts)


def _result(failures: int, sim: SimConfig) -> OutageResult:
    p_hat = failures / sim.trials
    half = Z95 * math.sqrt(p_hat * (1.0 - p_hat) / sim.trials)
    return OutageResult(p_hat, "monte_carlo", Diagnostics(), ci_halfwidth=half, trials=sim.trials)


def _count(scenario, p, rho, sim, form):
    return sum(_run_blocks(scenario, p, rho, sim, _RULES[form], lambda f: int(np.count_nonzero(f))))


def simulate_outage(scenario: NomaScenario, p: int, rho: float, sim: SimConfig) -> OutageResult:
    """Fraction of trials where user ``p`` fails any SIC stage or its own decode."""
    return _result(_count(scenario, p, rho, sim, "sinr"), sim)


def simulate_outage_threshold_form(scenario: NomaScenario, p: int, rho: float,
                                   sim: SimConfig) -> OutageResult:
    """Same trials as :func:`simulate_outage`, judged by ``|h_p|^2 > psi* (eta rho |h_I|^2 + 1)``."""
    return _result(_count(scenario, p, rho, sim, "threshold"), sim)


def simulate_oma(scenario: NomaScenario, p: int, rho: float, sim: SimConfig) -> OutageResult:
    """OMA baseline: outage when ``log2(1 + rho phi_p |h_p|^2) / M < sum_i R_i``."""
    return _result(_count(scenario, p, rho, sim, "oma"), sim)
