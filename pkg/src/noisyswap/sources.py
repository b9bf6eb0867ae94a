"""Two type-I PDC sources feeding a balanced-beamsplitter Bell measurement.

Mode order everywhere is "HVVH": a four-tuple ``(n1, n2, n3, n4)`` is either an
ideal Bell readout on ``(c'_H, c'_V, b'_V, b'_H)`` or an occupation of the
outgoing modes ``(a_H, a_V, d_V, d_H)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, NamedTuple

from .numerics import binomial, ln_factorial

__all__ = [
    "Occupation4",
    "SourceParams",
    "PureStateAD",
    "prior_prob",
    "phi_state",
    "pdc_joint_amplitude",
]

NORM_TOLERANCE = 1e-12


class Occupation4(NamedTuple):
    n1: int
    n2: int
    n3: int
    n4: int

    @classmethod
    def of(cls, values: Iterable[int]) -> "Occupation4":
        vals = tuple(int(v) for v in values)
        if len(vals) != 4:
            raise ValueError(f"expected four occupations, got {len(vals)}")
        occ = cls(*vals)
        if min(occ) < 0:
            raise ValueError(f"occupations must be non-negative: {occ}")
        return occ

    @property
    def total(self) -> int:
        return self.n1 + self.n2 + self.n3 + self.n4


@dataclass(frozen=True)
class SourceParams:
    """Both sources share the interaction parameter ``chi`` (brightness is ``chi**2``)."""

    chi: float

    def __post_init__(self):
        if not self.chi >= 0.0:
            raise ValueError(f"chi must be non-negative, got {self.chi}")
        if self.chi >= 1.0:
            warnings.warn(
                f"chi={self.chi} is far outside the weak-pumping regime; "
                "series converge slowly as tanh(chi)**2 approaches 1",
                RuntimeWarning,
                stacklevel=3,
            )

    @property
    def tanh2(self) -> float:
        return math.tanh(self.chi) ** 2

    @property
    def phi(self) -> complex:
        return 1j * math.tanh(self.chi)

    @property
    def omega(self) -> float:
        return -math.log(math.cosh(self.chi))


@dataclass(frozen=True)
class PureStateAD:
    """Normalized pure state of ``(a_H, a_V, d_V, d_H)`` with fixed photon number."""

    total_photons: int
    amplitudes: Mapping[Occupation4, complex] = field(repr=False)

    def __post_init__(self):
        for occ in self.amplitudes:
            if sum(occ) != self.total_photons:
                raise ValueError(f"occupation {occ} breaks photon number {self.total_photons}")

    @property
    def norm2(self) -> float:
        return math.fsum(abs(a) ** 2 for a in self.amplitudes.values())

    def amplitude(self, occ) -> complex:
        return self.amplitudes.get(Occupation4(*occ), 0.0)

    def inner(self, other: "PureStateAD") -> complex:
        """``<self|other>``."""
        if self.total_photons != other.total_photons:
            return 0.0
        small, large = (self, other) if len(self.amplitudes) <= len(other.amplitudes) else (other, self)
        acc = 0.0
        for occ in small.amplitudes:
            if occ in large.amplitudes:
                acc += self.amplitudes[occ].conjugate() * other.amplitudes[occ]
        return acc


def prior_prob(readout, src: SourceParams) -> float:
    """Probability ``tanh(chi)**(2n) / cosh(chi)**8`` of an ideal readout with ``n`` photons."""
    n = sum(Occupation4.of(readout))
    chi = src.chi
    if n == 0:
        return math.cosh(chi) ** -8
    return math.exp(2 * n * math.log(math.tanh(chi)) - 8 * math.log(math.cosh(chi))) if chi > 0 else 0.0


@lru_cache(maxsize=4096)
def _phi_cached(readout: Occupation4) -> PureStateAD:
    i, j, k, l = readout
    n = i + j + k + l
    acc: dict[Occupation4, float] = {}
    # (d_H - a_H)^i (d_V - a_V)^j (a_V + d_V)^k (a_H + d_H)^l |vac>
    for mu in range(i + 1):
        for nu in range(j + 1):
            coef_mn = (-1) ** (mu + nu) * binomial(i, mu) * binomial(j, nu)
            for kap in range(k + 1):
                for lam in range(l + 1):
                    occ = Occupation4(mu + lam, nu + kap, j + k - nu - kap, i + l - mu - lam)
                    acc[occ] = acc.get(occ, 0.0) + coef_mn * binomial(k, kap) * binomial(l, lam)
    log_norm = 0.5 * (n * math.log(2.0) + sum(ln_factorial(x) for x in readout))
    amps = {}
    for occ, c in acc.items():
        if c == 0.0:
            continue
        # creation-operator powers acting on vacuum give sqrt(occ!)
        log_occ = 0.5 * sum(ln_factorial(x) for x in occ)
        amps[occ] = complex(c * math.exp(log_occ - log_norm))
    state = PureStateAD(n, amps)
    assert abs(state.norm2 - 1.0) < 1e-10 * max(1, n), state.norm2
    return state


def phi_state(readout) -> PureStateAD:
    """State of the outgoing modes after the ideal Bell readout ``readout``.

    The global phase ``i**n`` carried by the source amplitude is dropped.
    """
    return _phi_cached(Occupation4.of(readout))


def pdc_joint_amplitude(pair_counts, src: SourceParams) -> complex:
    """Amplitude for ``(n_aHbH, n_aVbV, n_cHdH, n_cVdV)`` pairs in the four squeezers.

    Each squeezer in normal order contributes ``phi**n`` on the Fock pair
    ``|n, n>``; the four vacuum factors give ``exp(4 omega)``.
    """
    counts = Occupation4.of(pair_counts)
    n = counts.total
    if src.chi == 0.0:
        return 1.0 + 0j if n == 0 else 0j
    mag = math.exp(4 * src.omega + n * math.log(math.tanh(src.chi)))
    return mag * (1j**n)
