"""Combinatorial and series kernels shared by the rest of the package.

Everything here is a pure function. Factorials are handled in log space and
the terminating Gauss hypergeometric polynomial is accumulated exactly in
rational arithmetic, because its terms alternate in sign for negative
arguments and cancel badly in floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable

__all__ = [
    "SeriesResult",
    "NonConvergenceError",
    "ln_factorial",
    "binomial",
    "hyp2f1_terminating",
    "log_abs_hyp2f1_terminating",
    "sum_adaptive",
]

MIN_TERMS = 8
MAX_TERMS = 10**6
_EXACT_DEGREE_LIMIT = 64


class NonConvergenceError(ArithmeticError):
    """Raised when a series cannot be summed to the requested accuracy."""


@dataclass(frozen=True)
class SeriesResult:
    """Truncated value of a convergent series with a bound on the dropped tail."""

    value: float
    tail_bound: float
    terms_used: int

    def __post_init__(self):
        if self.tail_bound < 0:
            raise ValueError("tail_bound must be non-negative")
        if self.terms_used < 1:
            raise ValueError("terms_used must be at least 1")


@lru_cache(maxsize=4096)
def ln_factorial(n: int) -> float:
    """Natural log of ``n!``, correctly rounded for the sizes used here."""
    if n < 0:
        raise ValueError(f"ln_factorial needs n >= 0, got {n}")
    if n < 2:
        return 0.0
    # math.log on an exact big integer is accurate to the last ulp
    return math.log(math.factorial(n))


def binomial(n: int, k: int) -> float:
    """Binomial coefficient as a float; zero outside ``0 <= k <= n``."""
    if k < 0 or k > n or n < 0:
        return 0.0
    return float(math.comb(n, k))


@lru_cache(maxsize=65536)
def hyp2f1_terminating(n: int, lam: int, c: int, z: float) -> float:
    """Evaluate ``2F1(-n, -lam; c; z)`` for non-negative integers ``n``, ``lam``.

    The series stops after ``min(n, lam)`` terms. For moderate degree the sum
    is done exactly over the rationals (``z`` is converted exactly from its
    binary value) and rounded once at the end.
    """
    if n < 0 or lam < 0:
        raise ValueError("n and lam must be non-negative")
    if c < 1:
        raise ValueError("c must be a positive integer")
    degree = min(n, lam)
    if degree == 0:
        return 1.0
    if degree <= _EXACT_DEGREE_LIMIT and math.isfinite(z):
        zq = Fraction(z)
        total = Fraction(1)
        term = Fraction(1)
        for m in range(degree):
            # ratio of consecutive terms: (m-n)(m-lam) / ((c+m)(m+1)) * z
            term = term * (m - n) * (m - lam) * zq / ((c + m) * (m + 1))
            total += term
        return float(total)
    terms = [1.0]
    term = 1.0
    for m in range(degree):
        term *= (m - n) * (m - lam) * z / ((c + m) * (m + 1))
        terms.append(term)
    return math.fsum(terms)


def _log_abs_fraction(x: Fraction) -> float:
    if x == 0:
        return -math.inf
    return math.log(abs(x.numerator)) - math.log(x.denominator)


def log_abs_hyp2f1_terminating(n: int, lam: int, c: int, z: float | Fraction) -> float:
    """``log|2F1(-n, -lam; c; z)|``, finite even where the value itself overflows.

    ``z`` may be a :class:`fractions.Fraction`; returns ``-inf`` at a zero.
    """
    if n < 0 or lam < 0:
        raise ValueError("n and lam must be non-negative")
    if c < 1:
        raise ValueError("c must be a positive integer")
    degree = min(n, lam)
    zq = Fraction(z)
    total = Fraction(1)
    term = Fraction(1)
    for m in range(degree):
        term = term * (m - n) * (m - lam) * zq / ((c + m) * (m + 1))
        total += term
    return _log_abs_fraction(total)


def sum_adaptive(
    term: Callable[[int], float],
    geometric_ratio_hint: float,
    eps_rel: float = 1e-15,
    degree_bound: int = 0,
    min_terms: int = MIN_TERMS,
    max_terms: int = MAX_TERMS,
) -> SeriesResult:
    """Sum ``term(0) + term(1) + ...`` for a geometrically decaying series.

    ``geometric_ratio_hint`` is the asymptotic ratio ``r`` of successive terms,
    and ``degree_bound`` is the degree of any polynomial factor riding on top
    of ``r**n``. Summation stops once the latest term is below
    ``eps_rel * |partial sum|``, at least ``ceil(log(eps_rel)/log(r))`` terms
    have been used, and the polynomial-corrected ratio ``r * (1 + d/N)`` is
    below one. The tail is bounded by the geometric envelope of that ratio.
    """
    r = float(geometric_ratio_hint)
    if not 0.0 <= r < 1.0:
        raise NonConvergenceError(f"ratio hint {r} is not in [0, 1)")
    if r > 0.0 and eps_rel < 1.0:
        needed = math.ceil(math.log(eps_rel) / math.log(r))
    else:
        needed = 0
    needed = max(needed, min_terms, 1)

    parts: list[float] = []
    n = 0
    while True:
        t = float(term(n))
        if not math.isfinite(t):
            raise NonConvergenceError(f"non-finite term at n={n}")
        parts.append(t)
        n += 1
        if n >= needed:
            partial = math.fsum(parts)
            r_eff = r * (1.0 + degree_bound / n)
            if abs(t) <= eps_rel * abs(partial) and r_eff < 1.0:
                tail = abs(t) * r_eff / (1.0 - r_eff)
                return SeriesResult(partial, tail, n)
        if n >= max_terms:
            raise NonConvergenceError(f"series not converged after {max_terms} terms")
