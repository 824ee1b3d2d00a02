"""Outage probabilities of NOMA satellite downlinks over shadowed-Rician fading.

Analytic expressions (exact, closed form, asymptotic) live in
:mod:`satnoma.analytic`; :mod:`satnoma.montecarlo` checks them by simulation.
"""
from .analytic import (
    OutageResult,
    diversity_order,
    outage_ipsic_exact,
    outage_ipsic_floor,
    outage_oma,
    outage_psic_asymptote,
    outage_psic_exact,
    outage_psic_series_approx,
)
from .channel import PRESETS, ShadowedRicianParams, cdf_gain, ordered_cdf, pdf_gain, preset
from .errors import ConvergenceError, ValidationError
from .linkbudget import LinkGeometry, composite_gain
from .montecarlo import SimConfig, simulate_oma, simulate_outage, simulate_outage_threshold_form
from .noma import NomaScenario, SicMode, UserConfig, reference_scenario
from .specfun import SeriesControl

__version__ = "0.1.0"
