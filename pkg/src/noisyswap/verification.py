"""Oracle cross-checks of the closed forms at user-chosen parameters."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .analysis import AngleConfig, rotation_amplitude
from .config import ExperimentConfig
from .detectors import prob_count_given_incident, prob_threshold_given_incident
from .inference import Truncation, f_count, f_threshold, posterior_joint
from .oracle import (
    oracle_detector_prob,
    oracle_rotation,
    oracle_swap_posterior,
    oracle_threshold_prob,
)
from .sources import Occupation4
from .swapstate import MixedStateAD

__all__ = ["CheckResult", "run_checks", "trace_distance", "restricted_state"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    error: float
    tolerance: float

    @property
    def ok(self) -> bool:
        return self.error <= self.tolerance

    def line(self) -> str:
        return f"{'PASS' if self.ok else 'FAIL'} {self.name}: error {self.error:.3e} (tolerance {self.tolerance:.0e})"


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.linalg.eigvalsh(rho - sigma)).sum())


def restricted_state(posterior, keys) -> MixedStateAD:
    """The closed-form mixture restricted to ``keys`` and renormalized."""
    from .sources import phi_state

    w = np.array([posterior.weight(k) for k in keys])
    w = w / w.sum()
    return MixedStateAD(tuple((float(wk), phi_state(k)) for wk, k in zip(w, keys)))


def _oracle_bayes(outcome, i, chi, spec, family, n_sum=60):
    x = math.tanh(chi) ** 2
    like = (lambda k: oracle_threshold_prob(outcome, k, spec)) if family == "threshold" \
        else (lambda k: oracle_detector_prob(outcome, k, spec))
    den = math.fsum(like(k) * x**k for k in range(n_sum))
    return like(i) * x**i / den


def run_checks(config: ExperimentConfig, max_count: int = 4, swap_cutoff: int = 3,
               rotation_total: int = 4) -> list[CheckResult]:
    """Compare each closed form with its brute-force counterpart at ``config``'s parameters."""
    specs = list(dict.fromkeys(list(config.bell_bank) + list(config.analysis_bank)))
    results = []

    err = 0.0
    for spec in specs:
        if spec.singular:
            continue
        for q in range(max_count + 1):
            for i in range(max_count + 1):
                err = max(err, abs(prob_count_given_incident(q, i, spec) - oracle_detector_prob(q, i, spec)))
            err = max(err, abs(prob_threshold_given_incident(0, q, spec) - oracle_threshold_prob(0, q, spec)))
    results.append(CheckResult("detector conditionals", err, 1e-9))

    err = 0.0
    chi = config.chi
    for spec in config.bell_bank:
        if spec.singular or spec.degenerate or chi == 0.0:
            continue
        for i in range(max_count + 1):
            for outcome in (0, 1):
                err = max(err, abs(f_threshold(outcome, i, chi, spec) - _oracle_bayes(outcome, i, chi, spec, "threshold")))
            for q in range(3):
                err = max(err, abs(f_count(q, i, chi, spec) - _oracle_bayes(q, i, chi, spec, "count")))
    results.append(CheckResult("posterior factors", err, 1e-9))

    err = 0.0
    readout = ("click", "no_click", "click", "no_click")
    orc = oracle_swap_posterior(readout, chi, config.bell_bank, N=swap_cutoff)
    post = posterior_joint(readout, chi, config.bell_bank, Truncation(), family="threshold")
    keys = list(orc.weights)
    ours = restricted_state(post, keys)
    basis, rho = ours.density_matrix()
    err = trace_distance(rho, orc.density_matrix(basis))
    results.append(CheckResult("swapped state (trace distance)", err, 1e-8))

    err = 0.0
    rng = np.random.default_rng(20240607)
    for _ in range(4):
        a, d = rng.uniform(-math.pi, math.pi, size=2)
        ang = AngleConfig(a, d)
        for n in range(rotation_total + 1):
            for f in itertools.product(range(n + 1), repeat=4):
                if sum(f) != n:
                    continue
                for t in itertools.product(range(n + 1), repeat=4):
                    if sum(t) != n or t[0] + t[1] != f[0] + f[1]:
                        continue
                    w1 = abs(rotation_amplitude(f, t, ang)) ** 2
                    w2 = abs(oracle_rotation(Occupation4(*f), Occupation4(*t), ang)) ** 2
                    err = max(err, abs(w1 - w2))
    results.append(CheckResult("rotation transition probabilities", err, 1e-10))
    return results
