"""NOMA downlink scenario, SIC detection thresholds and SINR expressions."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from functools import cached_property
from typing import Sequence

import numpy as np

from . import linkbudget
from .channel import ShadowedRicianParams, preset
from .errors import ValidationError
from .linkbudget import LinkGeometry

__all__ = [
    "SicMode",
    "UserConfig",
    "NomaScenario",
    "GAIN_REFERENCES",
    "gamma_threshold",
    "psi",
    "psi_star",
    "vartheta_star",
    "sinr_detect",
    "reference_scenario",
]

REFERENCE_ALLOC = (0.5, 0.4, 0.1)
REFERENCE_RATES = (0.1, 0.5, 1.0)
GAIN_REFERENCES = ("boresight", "absolute")


def gamma_threshold(rate_bpcu: float) -> float:
    """SINR needed to carry ``rate_bpcu`` bits per channel use: ``2^R - 1``."""
    if rate_bpcu < 0:
        raise ValueError(f"target rate must be nonnegative, got {rate_bpcu}")
    return 2.0**rate_bpcu - 1.0


@dataclass(frozen=True)
class SicMode:
    """Perfect (``psic``) or imperfect (``ipsic``) interference cancellation.

    ``omega_i`` is the variance of the residual interference channel for
    ipSIC. By default every user sees the residual term. Setting
    ``exempt_first_user`` drops it for user 1, who decodes no other signal.
    """

    kind: str = "psic"
    omega_i: float = 0.0
    exempt_first_user: bool = False

    def __post_init__(self):
        if self.kind not in ("psic", "ipsic"):
            raise ValidationError(f"sic must be 'psic' or 'ipsic', got {self.kind!r}")
        if self.kind == "ipsic" and not self.omega_i > 0:
            raise ValidationError(f"ipSIC needs a positive residual power omega_i, got {self.omega_i}")
        if self.kind == "psic" and self.omega_i != 0:
            raise ValidationError("pSIC takes no residual power; leave omega_i at 0")

    @classmethod
    def psic(cls) -> SicMode:
        return cls("psic")

    @classmethod
    def ipsic(cls, omega_i: float, exempt_first_user: bool = False) -> SicMode:
        return cls("ipsic", omega_i, exempt_first_user)

    @classmethod
    def ipsic_db(cls, omega_i_db: float, exempt_first_user: bool = False) -> SicMode:
        return cls.ipsic(10.0 ** (omega_i_db / 10.0), exempt_first_user)

    @property
    def is_imperfect(self) -> bool:
        return self.kind == "ipsic"

    def residual_factor(self, p: int) -> float:
        """The 0/1 multiplier on the residual term for detecting user ``p``."""
        if not self.is_imperfect or (p == 1 and self.exempt_first_user):
            return 0.0
        return 1.0


@dataclass(frozen=True)
class UserConfig:
    alloc: float
    rate_bpcu: float
    geometry: LinkGeometry = field(default_factory=LinkGeometry)
    fading: ShadowedRicianParams = field(default_factory=lambda: preset("fhs"))


@dataclass(frozen=True)
class NomaScenario:
    """``M`` users indexed 1..M from weakest to strongest channel.

    Construction checks the allocation (sums to one, non-increasing,
    positive) and the SIC feasibility ``a_p > gamma_th_p * sum_{i>p} a_i``.

    ``gain_reference`` fixes the scale of the composite gains. ``absolute``
    keeps ``eta * G_s * G_p(phi_p)`` (about 3e-13 for the default link), so
    ``rho`` is the raw transmit power over noise. ``boresight`` (default)
    divides every gain by the largest boresight link budget among the users,
    so ``rho`` is the SNR a user at the beam centre would see.
    """

    users: tuple[UserConfig, ...]
    sic: SicMode = field(default_factory=SicMode)
    gain_reference: str = "boresight"

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))
        self._validate()

    @classmethod
    def unvalidated(cls, users: Sequence[UserConfig], sic: SicMode | None = None,
                    gain_reference: str = "boresight") -> NomaScenario:
        """Build a scenario without invariant checks (test hook for degenerate cases)."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "users", tuple(users))
        object.__setattr__(obj, "sic", sic if sic is not None else SicMode())
        object.__setattr__(obj, "gain_reference", gain_reference)
        return obj

    def _validate(self):
        M = len(self.users)
        if M < 2:
            raise ValidationError(f"a NOMA scenario needs at least 2 users, got {M}")
        if self.gain_reference not in GAIN_REFERENCES:
            raise ValidationError(
                f"gain_reference must be one of {GAIN_REFERENCES}, got {self.gain_reference!r}"
            )
        a = [u.alloc for u in self.users]
        if abs(math.fsum(a) - 1.0) > 1e-12:
            raise ValidationError(f"power allocation must sum to 1, got sum {math.fsum(a)!r}")
        for p in range(1, M):
            if a[p] > a[p - 1]:
                raise ValidationError(
                    f"power allocation must be non-increasing: a_{p + 1}={a[p]} > a_{p}={a[p - 1]}"
                )
        if not a[-1] > 0:
            raise ValidationError(f"every user needs positive power, got a_{M}={a[-1]}")
        for p, u in enumerate(self.users, start=1):
            if not u.rate_bpcu > 0:
                raise ValidationError(f"target rate of user {p} must be positive, got {u.rate_bpcu}")
        for p, margin in enumerate(self.feasibility_margins[:-1], start=1):
            if not margin > 0:
                raise ValidationError(
                    f"infeasible allocation for user {p}: a_{p} - gamma_th_{p} * sum_(i>{p}) a_i "
                    f"= {margin:.6g} must be positive"
                )

    @property
    def M(self) -> int:
        return len(self.users)

    @cached_property
    def allocs(self) -> np.ndarray:
        return np.array([u.alloc for u in self.users])

    @cached_property
    def rates(self) -> np.ndarray:
        return np.array([u.rate_bpcu for u in self.users])

    @cached_property
    def thresholds(self) -> np.ndarray:
        return np.array([gamma_threshold(r) for r in self.rates])

    @cached_property
    def tail_allocs(self) -> np.ndarray:
        """``sum_{i>p} a_i`` for p = 1..M (zero for the last user)."""
        a = self.allocs
        return np.array([math.fsum(a[p:]) for p in range(1, self.M + 1)])

    @cached_property
    def feasibility_margins(self) -> np.ndarray:
        """``a_p - gamma_th_p * sum_{i>p} a_i``; the last entry is ``a_M``."""
        return self.allocs - self.thresholds * self.tail_allocs

    @cached_property
    def absolute_gains(self) -> np.ndarray:
        return np.array([linkbudget.composite_gain(u.geometry) for u in self.users])

    @cached_property
    def gain_scale(self) -> float:
        if self.gain_reference == "absolute":
            return 1.0
        return max(linkbudget.boresight_gain(u.geometry) for u in self.users)

    @cached_property
    def gains(self) -> np.ndarray:
        """Composite gains ``phi_p`` on the scenario's reference scale."""
        return self.absolute_gains / self.gain_scale

    def fading(self, p: int) -> ShadowedRicianParams:
        return self.users[self._index(p)].fading

    @property
    def homogeneous_fading(self) -> bool:
        return len({u.fading for u in self.users}) == 1

    def residual_factor(self, p: int) -> float:
        self._index(p)
        return self.sic.residual_factor(p)

    def with_sic(self, sic: SicMode) -> NomaScenario:
        return replace(self, sic=sic)

    def with_fading(self, fading: ShadowedRicianParams) -> NomaScenario:
        return replace(self, users=tuple(replace(u, fading=fading) for u in self.users))

    def with_angles(self, angles_deg: Sequence[float]) -> NomaScenario:
        if len(angles_deg) != self.M:
            raise ValidationError(f"expected {self.M} angles, got {len(angles_deg)}")
        return replace(self, users=tuple(
            replace(u, geometry=replace(u.geometry, angle_deg=ang))
            for u, ang in zip(self.users, angles_deg)
        ))

    def _index(self, p: int) -> int:
        if not 1 <= p <= self.M:
            raise ValueError(f"user index p={p} outside 1..{self.M}")
        return p - 1

    def __getstate__(self):
        # Drop cached properties so pickles stay small and consistent.
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def __setstate__(self, state):
        for k, v in state.items():
            object.__setattr__(self, k, v)


def _threshold_coeff(scenario: NomaScenario, q: int) -> float:
    # gamma_th_q / (a_q - gamma_th_q sum_{i>q} a_i): psi_q without rho and phi.
    i = q - 1
    return scenario.thresholds[i] / scenario.feasibility_margins[i]


def psi(scenario: NomaScenario, p: int, rho: float, gain: float | None = None) -> float:
    """Channel-power threshold for detecting user ``p``'s own signal.

    ``gain`` is the composite gain of the detecting receiver; it defaults to
    user ``p``'s own.
    """
    scenario._index(p)
    if not rho > 0:
        raise ValueError(f"SNR must be positive, got {rho}")
    phi = scenario.gains[p - 1] if gain is None else gain
    return _threshold_coeff(scenario, p) / (rho * phi)


def vartheta_star(scenario: NomaScenario, p: int) -> float:
    """SNR-free worst-case threshold ``max_{q<=p} gamma_q / (phi_p (a_q - gamma_q sum_{i>q} a_i))``."""
    scenario._index(p)
    worst = max(_threshold_coeff(scenario, q) for q in range(1, p + 1))
    return worst / scenario.gains[p - 1]


def psi_star(scenario: NomaScenario, p: int, rho: float) -> float:
    """Largest of the SIC thresholds user ``p`` must clear, all at its own gain."""
    if not rho > 0:
        raise ValueError(f"SNR must be positive, got {rho}")
    return vartheta_star(scenario, p) / rho


def sinr_detect(scenario: NomaScenario, p: int, q: int, gain_p, residual_power, rho: float):
    """SINR at user ``p`` when decoding user ``q``'s message (``q <= p``).

    Signals of users ``q+1..M`` are interference; ``residual_power`` is
    ``|h_I|^2`` and counts only when the SIC mode applies it to user ``p``.
    Arrays broadcast.
    """
    if not 1 <= q <= p <= scenario.M:
        raise ValueError(f"need 1 <= q <= p <= M, got q={q}, p={p}")
    phi = scenario.gains[p - 1]
    eta = scenario.residual_factor(p)
    signal = phi * rho * np.asarray(gain_p, dtype=float)
    interference = signal * scenario.tail_allocs[q - 1]
    noise = eta * rho * np.asarray(residual_power, dtype=float) + 1.0
    return signal * scenario.allocs[q - 1] / (interference + noise)


def reference_scenario(fading: str | ShadowedRicianParams = "fhs",
                   angles_deg: Sequence[float] = (0.1, 0.1, 0.1),
                   sic: SicMode | None = None,
                   gain_reference: str = "boresight") -> NomaScenario:
    """Three users with allocation (0.5, 0.4, 0.1), rates (0.1, 0.5, 1.0) bpcu and default geometry."""
    if isinstance(fading, str):
        fading = preset(fading)
    users = tuple(
        UserConfig(alloc=a, rate_bpcu=r, geometry=LinkGeometry(angle_deg=ang), fading=fading)
        for a, r, ang in zip(REFERENCE_ALLOC, REFERENCE_RATES, angles_deg, strict=True)
    )
    return NomaScenario(users, sic if sic is not None else SicMode(), gain_reference)
