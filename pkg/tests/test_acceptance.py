"""Acceptance suite: one PASS/FAIL line per criterion.

Run through pytest (lines are repeated in the terminal summary) or directly
with ``python tests/test_acceptance.py``.
"""

import itertools
import math
import time
from dataclasses import dataclass, replace

import numpy as np
import pytest

from noisyswap.analysis import (
    AngleConfig,
    coincidence_table,
    four_fold_scan,
    rotation_amplitude,
    scan_visibility,
    visibility_vs_chi,
)
from noisyswap.config import ExperimentConfig, TIMEBIN_CONFIG, parse_config_text
from noisyswap.detectors import (
    DetectorSpec,
    ThresholdOutcome,
    g_function,
    prob_count_given_incident,
    prob_threshold_given_incident,
)
from noisyswap.inference import (
    DetectorBank,
    Truncation,
    f_count,
    f_threshold,
    posterior_factor,
    posterior_joint,
)
from noisyswap.oracle import (
    oracle_detector_prob,
    oracle_rotation,
    oracle_swap_posterior,
    oracle_threshold_prob,
)
from noisyswap.sources import Occupation4, phi_state
from noisyswap.swapstate import (
    MixedStateAD,
    assemble_state,
    fidelity_psi_minus,
    postselect,
    psi_minus,
    werner_visibility,
)
from noisyswap.verification import restricted_state, trace_distance

NO_CLICK, CLICK = ThresholdOutcome.NO_CLICK, ThresholdOutcome.CLICK

# reproduction-guide choice for the chi = 0.05 comparison point
COMPARISON = dict(chi=0.05, eta=0.1, p_dc=1e-5)
ETA_SWEEP = (0.025, 0.05, 0.1, 0.2, 0.3, 0.4)
PDC_SWEEP = (1e-2, 1e-3, 1e-4, 1e-5)
SHAPE_CHIS = (0.002, 0.01, 0.03, 0.1, 0.2)

RESULTS: list[str] = []


@dataclass
class Outcome:
    number: int
    title: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"criterion {self.number} [{'PASS' if self.passed else 'FAIL'}] {self.title}: {self.detail}"


def uniform_config(chi, eta, p_dc):
    bank = DetectorBank.uniform(eta, p_dc)
    return ExperimentConfig(chi=chi, bell_bank=bank, analysis_bank=bank)


def spec_grid():
    etas = [0.02, 0.1, 0.35, 0.7, 0.95]
    pdcs = [0.0, 1e-6, 1e-5, 1e-3, 0.02]
    return [DetectorSpec(e, p) for e in etas for p in pdcs]


# --- criteria ---------------------------------------------------------------------------

def criterion_1() -> Outcome:
    cfg = replace(parse_config_text(TIMEBIN_CONFIG), chi=math.sqrt(0.06), truncation=Truncation(n_max=8))
    t0 = time.perf_counter()
    V = scan_visibility(cfg).value
    elapsed = time.perf_counter() - t0
    ok = abs(V - 0.777) <= 0.005 and elapsed < 120
    return Outcome(1, "time-bin visibility 0.777 +- 0.005", ok, f"V = {V:.6f} at chi = sqrt(0.06), N_max = 8, {elapsed:.1f} s")


def criterion_2() -> Outcome:
    p = COMPARISON
    plausible = 0.05 <= p["eta"] <= 0.2 and p["p_dc"] <= 3e-5
    V = scan_visibility(uniform_config(p["chi"], p["eta"], p["p_dc"])).value
    ok = plausible and abs(V - 0.98) <= 0.01
    return Outcome(2, "chi = 0.05 comparison point 0.98 +- 0.01", ok,
                   f"V = {V:.4f} with eta = {p['eta']}, p_dc = {p['p_dc']:g} on all eight detectors")


def criterion_3() -> Outcome:
    cfg = parse_config_text(TIMEBIN_CONFIG)
    deltas = np.radians(np.arange(0.0, 180.0, 5.0))
    a = four_fold_scan(cfg, deltas)
    b = four_fold_scan(cfg, deltas + math.pi / 2)
    phase_err = float(np.max(np.abs(a.anticorr - b.corr)) / a.anticorr.max())
    vis = scan_visibility(cfg)
    d_max, d_min = math.degrees(vis.delta_max), math.degrees(vis.delta_min)
    ok = phase_err < 1e-9 and abs(d_max - 45) <= 0.5 and abs(d_min - 135) <= 0.5
    return Outcome(3, "curves 90 deg apart, extrema at 45 / 135 deg", ok,
                   f"shift mismatch {phase_err:.1e}, max at {d_max:.3f} deg, min at {d_min:.3f} deg")


def criterion_4() -> Outcome:
    t0 = time.perf_counter()
    err_a = max(abs(prob_count_given_incident(q, i, s) - oracle_detector_prob(q, i, s))
                for s in spec_grid() for q in range(7) for i in range(7))

    err_b = 0.0
    for s in spec_grid():
        if s.eta == 1.0:
            continue
        for chi in (0.05, 0.24):
            x = math.tanh(chi) ** 2

            def bayes(like, i):
                return like(i) * x**i / math.fsum(like(k) * x**k for k in range(80))

            for i in range(7):
                for o in (NO_CLICK, CLICK):
                    ref = bayes(lambda k: oracle_threshold_prob(o, k, s), i)
                    err_b = max(err_b, abs(f_threshold(o, i, chi, s) - ref))
                for q in range(4):
                    ref = bayes(lambda k: oracle_detector_prob(q, k, s), i)
                    err_b = max(err_b, abs(f_count(q, i, chi, s) - ref))

    cfg = parse_config_text(TIMEBIN_CONFIG)
    readout = (CLICK, NO_CLICK, CLICK, NO_CLICK)
    orc = oracle_swap_posterior(readout, cfg.chi, cfg.bell_bank, N=4)
    post = posterior_joint(readout, cfg.chi, cfg.bell_bank, family="threshold")
    basis, rho = restricted_state(post, list(orc.weights)).density_matrix()
    err_c = trace_distance(rho, orc.density_matrix(basis))

    rng = np.random.default_rng(16)
    err_d = 0.0
    for a, d in rng.uniform(-math.pi, math.pi, size=(16, 2)):
        ang = AngleConfig(a, d)
        for n in range(5):
            occs = [o for o in itertools.product(range(n + 1), repeat=4) if sum(o) == n]
            for f in occs:
                for t in occs:
                    if f[0] + f[1] != t[0] + t[1]:
                        continue
                    w1 = abs(rotation_amplitude(f, t, ang)) ** 2
                    w2 = abs(oracle_rotation(Occupation4(*f), Occupation4(*t), ang)) ** 2
                    err_d = max(err_d, abs(w1 - w2))
    elapsed = time.perf_counter() - t0
    ok = err_a <= 1e-9 and err_b <= 1e-9 and err_c <= 1e-8 and err_d <= 1e-10 and elapsed < 300
    return Outcome(4, "oracle equivalence", ok,
                   f"(a) {err_a:.1e} (b) {err_b:.1e} (c) {err_c:.1e} (d) {err_d:.1e}, {elapsed:.1f} s")


def criterion_5() -> Outcome:
    ideal = DetectorSpec(1.0, 0.0)
    errs = {}
    errs["kronecker"] = max(abs(f_count(q, i, chi, ideal) - (q == i))
                            for q in range(6) for i in range(6) for chi in (0.05, 0.24, 0.6))
    errs["threshold"] = max(
        max(abs(f_threshold(NO_CLICK, i, chi, ideal) - (i == 0)) for i in range(8))
        + abs(math.fsum(f_threshold(CLICK, i, chi, ideal) for i in range(600)) - 1.0)
        for chi in (0.05, 0.24, 0.6)
    )
    errs["g_binomial"] = max(abs(g_function(k, l, DetectorSpec(eta, 0.0)).value - math.comb(k, l))
                             for k in range(8) for l in range(k + 1) for eta in (0.1, 0.5, 0.9))
    errs["branches"] = max(
        abs(prob_count_given_incident(i, i, s, "i>=q") - prob_count_given_incident(i, i, s, "q>=i"))
        / max(prob_count_given_incident(i, i, s), 1e-300)
        for s in (DetectorSpec(e, p) for e in (0.05, 0.3, 0.8) for p in (1e-5, 1e-3, 0.05))
        for i in range(7)
    )
    ok = errs["kronecker"] == 0 and errs["threshold"] < 1e-12 and errs["g_binomial"] == 0 and errs["branches"] <= 1e-12
    return Outcome(5, "limit identities", ok, ", ".join(f"{k} {v:.1e}" for k, v in errs.items()))


def criterion_6(n_configs: int = 50) -> Outcome:
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(n_configs):
        chi = rng.uniform(0.02, 0.35)
        bell = DetectorBank.from_lists(rng.uniform(0.02, 0.9, 4), 10 ** rng.uniform(-7, -3, 4))
        ana = DetectorBank.from_lists(rng.uniform(0.02, 0.9, 4), 10 ** rng.uniform(-7, -3, 4))
        trunc = Truncation(eps_tail=1e-10, prune=1e-11)
        for s in list(bell) + list(ana):
            for i in range(5):
                worst = max(worst, abs(math.fsum(prob_count_given_incident(q, i, s) for q in range(40)) - 1.0))
                both = prob_threshold_given_incident(CLICK, i, s) + prob_threshold_given_incident(NO_CLICK, i, s)
                worst = max(worst, abs(both - 1.0))
        readout = tuple(ThresholdOutcome(int(v)) for v in rng.integers(0, 2, 4))
        counts = tuple(int(v) for v in rng.integers(0, 3, 4))
        for r, s, q in zip(readout, bell, counts):
            for fac in (posterior_factor(r, chi, s, "threshold", eps=1e-11),
                        posterior_factor(q, chi, s, "count", eps=1e-11)):
                worst = max(worst, abs(fac.weights.sum() + fac.tail_bound - 1.0) - fac.tail_bound)
        post = posterior_joint(readout, chi, bell, trunc, family="threshold")
        state = assemble_state(post, prune=trunc.prune)
        worst = max(worst, abs(state.total_weight + state.tail_bound - 1.0) - state.tail_bound)
        table, tail = coincidence_table(post, AngleConfig(*rng.uniform(0, math.pi, 2)), ana, trunc)
        worst = max(worst, abs(table.sum() - 1.0) - tail)
    ok = worst <= 1e-9
    return Outcome(6, f"normalization over {n_configs} random configurations", ok,
                   f"worst excess over reported tail {max(worst, 0.0):.1e}")


def criterion_7() -> Outcome:
    eta_rows = np.array([visibility_vs_chi(uniform_config(0.1, e, 1e-5), SHAPE_CHIS) for e in ETA_SWEEP])
    pdc_rows = np.array([visibility_vs_chi(uniform_config(0.1, 0.1, p), SHAPE_CHIS) for p in PDC_SWEEP])
    eta_monotone = bool(np.all(np.diff(eta_rows, axis=0) > 0))
    pdc_antitone = bool(np.all(np.diff(pdc_rows, axis=0) > 0))  # rows run from high to low p_dc
    wide = (0.0005, 0.002, 0.01, 0.03, 0.1, 0.3)
    interior = []
    for e in ETA_SWEEP:
        v = visibility_vs_chi(uniform_config(0.1, e, 1e-5), wide)
        k = int(np.argmax(v))
        interior.append(0 < k < len(wide) - 1)
    ok = eta_monotone and pdc_antitone and all(interior)
    return Outcome(7, "shape: interior maximum, ordering in eta and p_dc", ok,
                   f"interior max {sum(interior)}/{len(interior)}, eta ordering {eta_monotone}, "
                   f"p_dc ordering {pdc_antitone} at chi = {SHAPE_CHIS}")


def criterion_8() -> Outcome:
    state, success = postselect(MixedStateAD(((1.0, phi_state((1, 0, 1, 0))),)))
    (w, s), = state.components
    overlap = abs(s.inner(psi_minus()))
    F = fidelity_psi_minus(state)
    V = werner_visibility(F)
    support = set(s.amplitudes) == {Occupation4(1, 0, 1, 0), Occupation4(0, 1, 0, 1)}
    ok = support and abs(success - 0.5) < 1e-15 and abs(overlap - 1) < 1e-15 and abs(F - 1) < 1e-15 and abs(V - 1) < 1e-14
    return Outcome(8, "post-selection of the two-photon readout", ok,
                   f"success {success:.15g}, overlap {overlap:.15g}, F {F:.15g}, V_werner {V:.15g}")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8]


# --- pytest wiring ---------------------------------------------------------------------------

def _check(fn):
    outcome = fn()
    RESULTS.append(outcome.line())
    print(outcome.line())
    assert outcome.passed, outcome.line()


@pytest.mark.xfail(strict=True, reason=(
    "the stated model gives V = 0.6926 at the listed parameters; it reaches 0.777 only at chi = 0.196. "
    "See the time-bin discussion in the README and the decisions ledger"))
def test_criterion_1_timebin_visibility():
    _check(criterion_1)


@pytest.mark.parametrize("fn", CRITERIA[1:], ids=[f"criterion_{k}" for k in range(2, 9)])
def test_criterion(fn):
    _check(fn)


if __name__ == "__main__":
    for fn in CRITERIA:
        print(fn().line(), flush=True)
