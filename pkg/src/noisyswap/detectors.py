"""Detector model: inefficiency plus dark counts from a fictitious thermal port.

A detector of effective efficiency ``eta`` is a beamsplitter of transmittance
``eta`` in front of an ideal detector. Dark counts come from a thermal state
on the unused port whose temperature is fixed by the dark-count probability
``p_dc`` of the corresponding threshold detector.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from .numerics import SeriesResult, binomial, log_abs_hyp2f1_terminating, sum_adaptive

__all__ = [
    "DetectorSpec",
    "ThresholdOutcome",
    "SingularModel",
    "SingularMarginWarning",
    "thermal_r_from_pdc",
    "b_param",
    "g_function",
    "prob_count_given_incident",
    "prob_threshold_given_incident",
]

B_CLAMP = 1.0 - 1e-12
CLAMP_TOLERANCE = 1e-12


class SingularModel(ValueError):
    """The finite-temperature detector model has no solution for these parameters."""


class SingularMarginWarning(RuntimeWarning):
    pass


class ThresholdOutcome(enum.IntEnum):
    NO_CLICK = 0
    CLICK = 1

    @classmethod
    def coerce(cls, value) -> "ThresholdOutcome":
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            key = value.strip().lower().replace("-", "_")
            if key in ("click", "1", "c"):
                return cls.CLICK
            if key in ("no_click", "noclick", "0", "n"):
                return cls.NO_CLICK
            raise ValueError(f"not a threshold outcome: {value!r}")
        return cls(int(value))


@dataclass(frozen=True)
class DetectorSpec:
    """Effective efficiency ``eta`` and dark-count probability ``p_dc`` of one detector."""

    eta: float
    p_dc: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")
        if not 0.0 <= self.p_dc < 1.0:
            raise ValueError(f"p_dc must lie in [0, 1), got {self.p_dc}")

    @property
    def degenerate(self) -> bool:
        """True when the detector can never click."""
        return self.eta == 0.0 and self.p_dc == 0.0

    @property
    def singular(self) -> bool:
        """True on the margin eta=1 with dark counts (only reachable as a joint limit)."""
        return self.eta == 1.0 and self.p_dc > 0.0

    @property
    def ideal(self) -> bool:
        return self.eta == 1.0 and self.p_dc == 0.0


def thermal_r_from_pdc(spec: DetectorSpec) -> float:
    """Return ``tanh(r)**2`` of the thermal port that reproduces ``spec.p_dc``.

    Inverts ``p_dc = (1-eta) x / (1 - eta x)`` for ``x = tanh(r)**2``.
    """
    if spec.p_dc == 0.0:
        return 0.0
    if spec.singular:
        raise SingularModel("eta=1 with p_dc>0 needs an infinite thermal temperature")
    return spec.p_dc / ((1.0 - spec.eta) + spec.eta * spec.p_dc)


def b_param(spec: DetectorSpec) -> float:
    """``b = eta * tanh(r)**2 = [1 + (1-eta)/(eta p_dc)]**-1``, in ``[0, 1)``.

    On the singular margin (eta=1, p_dc>0) the exact value is 1; it is clamped
    to ``1 - 1e-12`` and a :class:`SingularMarginWarning` is emitted.
    """
    eta, pdc = spec.eta, spec.p_dc
    if eta == 0.0 or pdc == 0.0:
        return 0.0
    if spec.singular:
        warnings.warn(
            "b_param at eta=1, p_dc>0 is 1; clamped to 1-1e-12",
            SingularMarginWarning,
            stacklevel=2,
        )
        return B_CLAMP
    return eta * pdc / (eta * pdc + (1.0 - eta))


def _log_b(eta: float, p_dc: float) -> float:
    # log of b without the underflow of eta * p_dc at tiny eta
    return math.log(eta) + math.log(p_dc) - math.log(eta * p_dc + (1.0 - eta))


@lru_cache(maxsize=8192)
def _g_scaled(kappa: int, lam: int, eta: float, p_dc: float, log_scale: float) -> SeriesResult:
    """``exp(log_scale) * G(kappa, lam; eta, p_dc)`` with every term formed in log space."""
    coeff = binomial(kappa, lam)
    if eta == 0.0 or p_dc == 0.0:
        # b = 0: only the n=0 term survives and its hypergeometric factor is 1
        return SeriesResult(coeff * math.exp(log_scale), 0.0, 1)
    if eta == 1.0:
        raise SingularModel("G series diverges at eta=1 with p_dc>0")
    log_b = _log_b(eta, p_dc)
    b = math.exp(log_b)
    z = Fraction(eta - 1.0) / Fraction(eta)
    c = kappa - lam + 1
    dk = kappa - lam
    log_coeff = math.log(coeff) + log_scale

    def term(n: int) -> float:
        log_f = log_abs_hyp2f1_terminating(n, lam, c, z)
        if log_f == -math.inf:
            return 0.0
        log_mag = (
            math.lgamma(dk + n + 1) - math.lgamma(dk + 1) - math.lgamma(n + 1)
            + n * log_b
            + 2.0 * log_f
            + log_coeff
        )
        return math.exp(log_mag)

    # binomial growth n**(kappa-lam) times the squared polynomial n**(2 lam)
    return sum_adaptive(term, b, eps_rel=1e-16, degree_bound=kappa + lam)


def g_function(kappa: int, lam: int, spec: DetectorSpec) -> SeriesResult:
    """The dark-count series ``G(kappa, lam; eta, p_dc)``; exactly 0 when ``kappa < lam``."""
    if kappa < 0 or lam < 0:
        raise ValueError("kappa and lam must be non-negative")
    if kappa < lam:
        return SeriesResult(0.0, 0.0, 1)
    if spec.singular:
        b_param(spec)
        raise SingularModel("G series diverges at eta=1 with p_dc>0")
    return _g_scaled(int(kappa), int(lam), float(spec.eta), float(spec.p_dc), 0.0)


def _clamp_probability(p: float) -> float:
    if p < 0.0:
        assert p > -CLAMP_TOLERANCE, f"probability {p} far below 0"
        return 0.0
    if p > 1.0:
        assert p < 1.0 + CLAMP_TOLERANCE, f"probability {p} far above 1"
        return 1.0
    return p


def _prob_count_from_g(q: int, i: int, spec: DetectorSpec, branch: str) -> float:
    eta, pdc = spec.eta, spec.p_dc
    log_pre = math.log1p(-eta) + math.log1p(-pdc) - math.log1p(-eta * (1.0 - pdc))
    if branch == "i>=q":
        if i < q:
            return 0.0
        # (eta/(1-eta))**q (1-eta)**i = eta**q (1-eta)**(i-q)
        scale = log_pre + q * math.log(eta) + (i - q) * math.log1p(-eta)
        return _g_scaled(i, q, eta, pdc, scale).value
    if q < i:
        return 0.0
    if pdc == 0.0:
        return math.exp(log_pre) * eta**i if q == i else 0.0
    # ((1-eta)/eta * b)**(q-i) eta**i
    scale = log_pre + (q - i) * (math.log1p(-eta) - math.log(eta) + _log_b(eta, pdc)) + i * math.log(eta)
    return _g_scaled(q, i, eta, pdc, scale).value


def prob_count_given_incident(q: int, i: int, spec: DetectorSpec, branch: str | None = None) -> float:
    """Probability that a number-resolving detector reports ``q`` photons for ``i`` incident.

    ``branch`` forces one of the two closed-form branches (``"i>=q"`` or
    ``"q>=i"``); both are valid at ``q == i``.
    """
    if q < 0 or i < 0:
        raise ValueError("counts must be non-negative")
    eta, pdc = spec.eta, spec.p_dc
    if spec.singular:
        raise SingularModel("photon-count statistics undefined at eta=1 with p_dc>0")
    if eta == 0.0:
        # signal fully lost; only the thermal port reaches the detector
        return (1.0 - pdc) * pdc**q
    if eta == 1.0:
        return 1.0 if q == i else 0.0
    if branch is None:
        branch = "i>=q" if i >= q else "q>=i"
    elif branch not in ("i>=q", "q>=i"):
        raise ValueError(f"unknown branch {branch!r}")
    elif branch == "i>=q" and i < q or branch == "q>=i" and q < i:
        raise ValueError(f"branch {branch} not valid for q={q}, i={i}")
    return _clamp_probability(_prob_count_from_g(q, i, spec, branch))


def prob_threshold_given_incident(outcome, i: int, spec: DetectorSpec) -> float:
    """Click / no-click probability of a threshold detector for ``i`` incident photons."""
    if i < 0:
        raise ValueError("i must be non-negative")
    outcome = ThresholdOutcome.coerce(outcome)
    pdc = spec.p_dc
    no_click = (1.0 - pdc) * (1.0 - spec.eta * (1.0 - pdc)) ** i
    if outcome is ThresholdOutcome.NO_CLICK:
        return no_click
    return 1.0 - no_click
