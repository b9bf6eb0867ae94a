"""Posterior over ideal Bell readouts given an imperfect readout.

Source prior and detector likelihood both factorize over the four Bell
detectors, so the posterior is a product of four one-dimensional factors.
Each factor is computed in closed form and truncated at a per-index cutoff
with an explicit bound on the discarded probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .detectors import (
    DetectorSpec,
    SingularModel,
    ThresholdOutcome,
    b_param,
    prob_count_given_incident,
)
from .numerics import SeriesResult, sum_adaptive
from .sources import Occupation4

__all__ = [
    "MeaninglessConditional",
    "DetectorBank",
    "Truncation",
    "PosteriorFactor",
    "Posterior4",
    "f_count",
    "f_threshold",
    "count_evidence",
    "threshold_evidence",
    "posterior_factor",
    "posterior_joint",
    "readout_probability",
]

N_MAX_FLOOR = 6
N_MAX_CEILING = 24


class MeaninglessConditional(ValueError):
    """The conditioning event has probability zero."""


@dataclass(frozen=True)
class DetectorBank:
    """Four detectors in readout order ``(c'_H, c'_V, b'_V, b'_H)`` or ``(D_a+, D_a-, D_d-, D_d+)``."""

    specs: tuple[DetectorSpec, DetectorSpec, DetectorSpec, DetectorSpec]

    def __post_init__(self):
        specs = tuple(self.specs)
        if len(specs) != 4:
            raise ValueError(f"a detector bank needs exactly four detectors, got {len(specs)}")
        for s in specs:
            if not isinstance(s, DetectorSpec):
                raise TypeError(f"expected DetectorSpec, got {type(s).__name__}")
        object.__setattr__(self, "specs", specs)

    @classmethod
    def uniform(cls, eta: float, p_dc: float = 0.0) -> "DetectorBank":
        spec = DetectorSpec(eta, p_dc)
        return cls((spec, spec, spec, spec))

    @classmethod
    def from_lists(cls, etas: Sequence[float], pdcs: Sequence[float]) -> "DetectorBank":
        return cls(tuple(DetectorSpec(e, p) for e, p in zip(etas, pdcs, strict=True)))

    def __iter__(self):
        return iter(self.specs)

    def __getitem__(self, k):
        return self.specs[k]

    def __len__(self):
        return 4


@dataclass(frozen=True)
class Truncation:
    """Numeric truncation controls.

    ``n_max=None`` picks a per-factor cutoff automatically so that each
    factor's discarded probability is below ``eps_tail / 4``. ``prune`` drops
    materialized joint components lighter than that weight; their total
    weight is added to the reported tail.
    """

    n_max: int | None = None
    eps_tail: float = 1e-12
    prune: float = 1e-12

    def __post_init__(self):
        if self.n_max is not None and self.n_max < 0:
            raise ValueError("n_max must be non-negative")
        if not 0.0 < self.eps_tail < 1.0:
            raise ValueError("eps_tail must lie in (0, 1)")
        if self.prune < 0.0:
            raise ValueError("prune must be non-negative")


# --- count-resolving factors --------------------------------------------------

def _count_numerator(q: int, i: int, x: float, spec: DetectorSpec, branch: str | None = None) -> float:
    """Joint weight ``p(q|i) x**i`` of the count readout and ``i`` incident photons."""
    p = prob_count_given_incident(q, i, spec, branch)
    return x**i * p if p else 0.0


def _count_denominator(q: int, x: float, spec: DetectorSpec) -> SeriesResult:
    head = math.fsum(_count_numerator(q, i, x, spec) for i in range(q + 1))
    if x == 0.0:
        return SeriesResult(head, 0.0, q + 1)
    b = b_param(spec)
    ratio = x * (1.0 - spec.eta) / (1.0 - b)
    tail = sum_adaptive(
        lambda n: _count_numerator(q, q + 1 + n, x, spec),
        min(ratio, 1.0 - 1e-9),
        eps_rel=1e-17,
        degree_bound=2 * q + 2,
    )
    return SeriesResult(head + tail.value, tail.tail_bound, q + 1 + tail.terms_used)


def _check_nonsingular(spec: DetectorSpec):
    if spec.singular:
        raise SingularModel("count statistics undefined at eta=1 with p_dc>0")


def f_count(q: int, i: int, chi: float, spec: DetectorSpec, branch: str | None = None) -> float:
    """Posterior probability that ``i`` photons arrived given a count readout ``q``."""
    if q < 0 or i < 0:
        raise ValueError("counts must be non-negative")
    _check_nonsingular(spec)
    x = math.tanh(chi) ** 2
    if spec.eta == 1.0:
        return 1.0 if q == i else 0.0
    if spec.eta == 0.0:
        # the readout carries no information about i
        return x**i * (1.0 - x)
    g = _count_denominator(q, x, spec)
    if g.value == 0.0:
        raise MeaninglessConditional(f"count readout {q} has probability zero")
    return _count_numerator(q, i, x, spec, branch) / g.value


def count_evidence(q: int, chi: float, spec: DetectorSpec) -> float:
    """``sum_i p(q|i) tanh(chi)**(2i) (1 - tanh(chi)**2)``: marginal probability of readout ``q`` on one detector."""
    _check_nonsingular(spec)
    x = math.tanh(chi) ** 2
    if spec.eta == 1.0:
        return x**q * (1.0 - x)
    if spec.eta == 0.0:
        return prob_count_given_incident(q, 0, spec)
    return _count_denominator(q, x, spec).value * (1.0 - x)


# --- threshold factors --------------------------------------------------------

def _h(x: float, spec: DetectorSpec) -> float:
    return (1.0 - spec.eta * (1.0 - spec.p_dc)) * x


def _click_likelihood(i: int, spec: DetectorSpec) -> float:
    # 1 - (1-p)(1-eta(1-p))^i without cancellation
    if spec.eta * (1.0 - spec.p_dc) == 1.0:
        return 1.0 if i > 0 else spec.p_dc
    return -math.expm1(math.log1p(-spec.p_dc) + i * math.log1p(-spec.eta * (1.0 - spec.p_dc)))


def _click_norm(x: float, spec: DetectorSpec) -> float:
    """``cosh^2 chi - (1-p)/(1-h)`` rewritten without the cancellation at small chi."""
    h = _h(x, spec)
    num = x * spec.eta * (1.0 - spec.p_dc) + spec.p_dc * (1.0 - x)
    return num / ((1.0 - x) * (1.0 - h))


def f_threshold(outcome, i: int, chi: float, spec: DetectorSpec) -> float:
    """Posterior probability of ``i`` incident photons given a click / no-click readout."""
    if i < 0:
        raise ValueError("i must be non-negative")
    outcome = ThresholdOutcome.coerce(outcome)
    x = math.tanh(chi) ** 2
    h = _h(x, spec)
    if outcome is ThresholdOutcome.NO_CLICK:
        return h**i * (1.0 - h)
    norm = _click_norm(x, spec)
    if norm == 0.0:
        raise MeaninglessConditional("a click is impossible for this detector and source")
    if i == 0:
        return spec.p_dc / norm
    return x**i * _click_likelihood(i, spec) / norm


def threshold_evidence(outcome, chi: float, spec: DetectorSpec) -> float:
    """Marginal probability of a click / no-click on one Bell detector."""
    outcome = ThresholdOutcome.coerce(outcome)
    x = math.tanh(chi) ** 2
    h = _h(x, spec)
    no_click = (1.0 - spec.p_dc) * (1.0 - x) / (1.0 - h)
    if outcome is ThresholdOutcome.NO_CLICK:
        return no_click
    return _click_norm(x, spec) * (1.0 - x)


def _threshold_tail(outcome, n: int, x: float, spec: DetectorSpec) -> float:
    """Exact posterior mass at indices ``> n``."""
    h = _h(x, spec)
    if outcome is ThresholdOutcome.NO_CLICK:
        return h ** (n + 1)
    norm = _click_norm(x, spec)
    total = x ** (n + 1) / (1.0 - x) - (1.0 - spec.p_dc) * h ** (n + 1) / (1.0 - h)
    return max(total, 0.0) / norm


# --- posterior ----------------------------------------------------------------

@dataclass(frozen=True)
class PosteriorFactor:
    """One detector's posterior over incident photon number, truncated at ``len(weights) - 1``."""

    weights: np.ndarray
    tail_bound: float
    evidence: float

    @property
    def n_max(self) -> int:
        return len(self.weights) - 1


def posterior_factor(outcome, chi: float, spec: DetectorSpec, family: str,
                     eps: float = 0.25e-12, n_max: int | None = None) -> PosteriorFactor:
    """Truncated posterior for one detector.

    With ``n_max=None`` the cutoff is the smallest index in
    ``[N_MAX_FLOOR, N_MAX_CEILING]`` whose discarded mass is below ``eps``.
    """
    x = math.tanh(chi) ** 2
    if family == "threshold":
        outcome = ThresholdOutcome.coerce(outcome)
        fn = lambda i: f_threshold(outcome, i, chi, spec)
        tail_at = lambda n: _threshold_tail(outcome, n, x, spec)
        evidence = threshold_evidence(outcome, chi, spec)
    elif family == "count":
        q = int(outcome)
        fn = lambda i: f_count(q, i, chi, spec)
        evidence = count_evidence(q, chi, spec)
        tail_at = None
    else:
        raise ValueError(f"unknown detector family {family!r}")

    limit = N_MAX_CEILING if n_max is None else n_max
    if family == "count":
        # the count posterior can peak above the readout value when eta is small
        limit = max(limit, int(outcome) + N_MAX_FLOOR) if n_max is None else limit
    values = [fn(i) for i in range(limit + 1)]
    if tail_at is None:
        cums = np.cumsum(values)
        tails = [max(0.0, 1.0 - c) for c in cums]
        if not (spec.eta in (0.0, 1.0)):
            q = int(outcome)
            g = _count_denominator(q, x, spec)
            slack = g.tail_bound / g.value + 1e-15 * (q + 2)
            tails = [t + slack for t in tails]
        tail_at = tails.__getitem__
    if n_max is None:
        n = N_MAX_FLOOR
        while n < limit and tail_at(n) >= eps:
            n += 1
    else:
        n = n_max
    return PosteriorFactor(np.asarray(values[: n + 1], dtype=float), float(tail_at(n)), evidence)


class Posterior4:
    """Factored posterior ``P(ijkl | qrst) = w1(i) w2(j) w3(k) w4(l)``.

    ``tail_bound`` bounds the probability outside the per-index cutoffs:
    ``1 - prod(1 - t_k)`` for factor tails ``t_k``.
    """

    def __init__(self, factors: Sequence[PosteriorFactor], readout=None, family: str = "threshold"):
        if len(factors) != 4:
            raise ValueError("Posterior4 needs four factors")
        self.factors = tuple(factors)
        self.readout = tuple(readout) if readout is not None else None
        self.family = family
        kept = 1.0
        for f in self.factors:
            kept *= 1.0 - f.tail_bound
        self.tail_bound = 1.0 - kept

    @property
    def cutoff(self) -> tuple[int, int, int, int]:
        return tuple(f.n_max for f in self.factors)

    @property
    def evidence(self) -> float:
        """Probability of the observed readout (per pump pulse)."""
        return float(np.prod([f.evidence for f in self.factors]))

    def weight(self, occ) -> float:
        occ = Occupation4.of(occ)
        w = 1.0
        for f, n in zip(self.factors, occ):
            if n > f.n_max:
                return 0.0
            w *= f.weights[n]
        return float(w)

    def dense(self) -> np.ndarray:
        w1, w2, w3, w4 = (f.weights for f in self.factors)
        return np.einsum("i,j,k,l->ijkl", w1, w2, w3, w4)

    def total_weight(self) -> float:
        return float(np.prod([f.weights.sum() for f in self.factors]))

    def items(self, min_weight: float = 0.0) -> Iterator[tuple[Occupation4, float]]:
        """Materialized components with weight at least ``min_weight``, in index order."""
        dense = self.dense()
        idx = np.argwhere(dense >= min_weight) if min_weight > 0 else np.argwhere(dense > 0)
        for row in idx:
            occ = Occupation4(*(int(v) for v in row))
            yield occ, float(dense[tuple(row)])

    def pruned(self, min_weight: float) -> tuple[list[tuple[Occupation4, float]], float]:
        """Components at or above ``min_weight`` plus the total weight of those dropped."""
        kept = list(self.items(min_weight))
        dropped = self.total_weight() - math.fsum(w for _, w in kept)
        return kept, max(dropped, 0.0)


def posterior_joint(readout, chi: float, bank: DetectorBank, trunc: Truncation | None = None,
                    family: str | None = None) -> Posterior4:
    """Posterior over ideal readouts for an imperfect Bell readout on ``bank``.

    ``family`` is ``"threshold"`` or ``"count"``; when omitted it is inferred
    from the readout values (ThresholdOutcome members mean threshold).
    """
    trunc = trunc or Truncation()
    readout = tuple(readout)
    if len(readout) != 4:
        raise ValueError("readout must have four entries")
    if family is None:
        kinds = {isinstance(r, ThresholdOutcome) or isinstance(r, str) for r in readout}
        if len(kinds) != 1:
            raise ValueError("mixed detector families in one Bell readout")
        family = "threshold" if kinds.pop() else "count"
    if family == "threshold":
        readout = tuple(ThresholdOutcome.coerce(r) for r in readout)
    factors = [
        posterior_factor(r, chi, spec, family, eps=trunc.eps_tail / 4, n_max=trunc.n_max)
        for r, spec in zip(readout, bank)
    ]
    return Posterior4(factors, readout, family)


def readout_probability(readout, chi: float, bank: DetectorBank, family: str = "threshold") -> float:
    """Probability of an imperfect Bell readout per pump pulse."""
    total = 1.0
    for r, spec in zip(readout, bank):
        if family == "threshold":
            total *= threshold_evidence(r, chi, spec)
        else:
            total *= count_evidence(int(r), chi, spec)
    return total
