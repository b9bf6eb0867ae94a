import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import spec_grid
from noisyswap.detectors import DetectorSpec, ThresholdOutcome
from noisyswap.inference import (
    DetectorBank,
    MeaninglessConditional,
    Posterior4,
    Truncation,
    count_evidence,
    f_count,
    f_threshold,
    posterior_factor,
    posterior_joint,
    readout_probability,
    threshold_evidence,
)
from noisyswap.oracle import oracle_detector_prob, oracle_threshold_prob

NO_CLICK, CLICK = ThresholdOutcome.NO_CLICK, ThresholdOutcome.CLICK


def oracle_bayes(like, i, chi, n_sum=80):
    x = math.tanh(chi) ** 2
    return like(i) * x**i / math.fsum(like(k) * x**k for k in range(n_sum))


# --- single-detector factors ---------------------------------------------------

@pytest.mark.parametrize("chi", [0.05, 0.24, 0.6])
def test_count_factor_ideal_detector(chi):
    for q in range(5):
        for i in range(5):
            assert f_count(q, i, chi, DetectorSpec(1.0, 0.0)) == (1.0 if q == i else 0.0)


@pytest.mark.parametrize("eta, chi", [(0.2, 0.24), (0.6, 0.1), (0.05, 0.4)])
def test_count_factor_zero_dark_counts(eta, chi):
    y = (1 - eta) * math.tanh(chi) ** 2
    assert f_count(0, 2, chi, DetectorSpec(eta, 0.0)) == pytest.approx(y**2 * (1 - y), rel=1e-12)


def test_count_factor_frozen_value():
    # 50-digit Bayes quotient from the beamsplitter construction
    assert f_count(2, 1, 0.24, DetectorSpec(0.045, 3e-5)) == pytest.approx(0.019971241311552523, rel=1e-10)


def test_threshold_factor_frozen_values():
    spec = DetectorSpec(0.135, 1e-5)
    assert f_threshold(NO_CLICK, 1, 0.24, spec) == pytest.approx(0.045670198512406485, rel=1e-12)
    assert f_threshold(CLICK, 1, 0.24, spec) == pytest.approx(0.8981552008560115, rel=1e-12)


@pytest.mark.parametrize("chi", [0.01, 0.24, 0.7])
def test_threshold_ideal_limits(chi):
    ideal = DetectorSpec(1.0, 0.0)
    for i in range(6):
        assert f_threshold(NO_CLICK, i, chi, ideal) == (1.0 if i == 0 else 0.0)
    assert f_threshold(CLICK, 0, chi, ideal) == 0.0
    assert f_threshold(CLICK, 0, chi, DetectorSpec(0.3, 0.0)) == 0.0
    total = math.fsum(f_threshold(CLICK, i, chi, ideal) for i in range(400))
    assert total == pytest.approx(1.0, abs=1e-12)


def test_click_without_any_cause_is_meaningless():
    with pytest.raises(MeaninglessConditional):
        f_threshold(CLICK, 1, 0.2, DetectorSpec(0.0, 0.0))
    with pytest.raises(MeaninglessConditional):
        f_threshold(CLICK, 1, 0.0, DetectorSpec(0.5, 0.0))


@pytest.mark.parametrize("spec", [s for s in spec_grid() if s.eta < 1.0], ids=str)
@pytest.mark.parametrize("chi", [0.05, 0.24])
def test_factors_match_oracle_bayes(spec, chi):
    err = 0.0
    for i in range(7):
        for o in (NO_CLICK, CLICK):
            if o is CLICK and spec.p_dc == 0.0 and chi == 0.0:
                continue
            ref = oracle_bayes(lambda k: oracle_threshold_prob(o, k, spec), i, chi)
            err = max(err, abs(f_threshold(o, i, chi, spec) - ref))
        for q in range(4):
            ref = oracle_bayes(lambda k: oracle_detector_prob(q, k, spec), i, chi)
            err = max(err, abs(f_count(q, i, chi, spec) - ref))
    assert err <= 1e-9


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 0.99), st.floats(1e-7, 0.05), st.floats(0.0, 0.8), st.integers(0, 4))
def test_factors_normalize(eta, pdc, chi, q):
    spec = DetectorSpec(eta, pdc)
    for family, outcome in (("threshold", NO_CLICK), ("threshold", CLICK), ("count", q)):
        fac = posterior_factor(outcome, chi, spec, family, eps=1e-12)
        assert fac.weights.sum() + fac.tail_bound == pytest.approx(1.0, abs=1e-9)
        assert fac.weights.sum() <= 1.0 + 1e-12


@settings(max_examples=10, deadline=None)
@given(st.floats(0.01, 0.95), st.floats(0.0, 0.05), st.floats(0.01, 0.5))
def test_evidences_normalize(eta, pdc, chi):
    spec = DetectorSpec(eta, pdc)
    assert threshold_evidence(CLICK, chi, spec) + threshold_evidence(NO_CLICK, chi, spec) == pytest.approx(1.0, abs=1e-12)
    total = math.fsum(count_evidence(q, chi, spec) for q in range(30))
    assert total == pytest.approx(1.0, abs=1e-9)


def test_automatic_cutoff_meets_tail_budget():
    fac = posterior_factor(CLICK, 0.24, DetectorSpec(0.045, 3e-5), "threshold", eps=1e-13)
    assert 6 <= fac.n_max <= 24
    assert fac.tail_bound < 1e-13
    fixed = posterior_factor(CLICK, 0.24, DetectorSpec(0.045, 3e-5), "threshold", n_max=3)
    assert fixed.n_max == 3 and fixed.tail_bound > 1e-6


def test_unknown_family_rejected():
    with pytest.raises(ValueError):
        posterior_factor(0, 0.1, DetectorSpec(0.5), "photon")


# --- joint posterior ------------------------------------------------------------

def test_vacuum_posterior_at_zero_brightness():
    post = posterior_joint((NO_CLICK,) * 4, 0.0, DetectorBank.uniform(0.3, 1e-5), family="threshold")
    assert post.weight((0, 0, 0, 0)) == pytest.approx(1.0)


def test_ideal_count_readout_is_certain(ideal_bank):
    post = posterior_joint((1, 0, 1, 0), 0.3, ideal_bank, family="count")
    assert post.weight((1, 0, 1, 0)) == 1.0
    assert post.total_weight() == 1.0


def test_family_inference():
    bank = DetectorBank.uniform(0.5, 1e-4)
    assert posterior_joint(("click", "no_click", "click", "no_click"), 0.2, bank).family == "threshold"
    assert posterior_joint((1, 0, 1, 0), 0.2, bank).family == "count"
    with pytest.raises(ValueError):
        posterior_joint(("click", 0, 1, 0), 0.2, bank)


def test_joint_is_product_of_factors(timebin_bell_bank):
    readout = (CLICK, NO_CLICK, CLICK, NO_CLICK)
    post = posterior_joint(readout, 0.24, timebin_bell_bank, family="threshold")
    occ = (2, 0, 1, 1)
    expected = math.prod(f_threshold(o, n, 0.24, s) for o, n, s in zip(readout, occ, timebin_bell_bank))
    assert post.weight(occ) == pytest.approx(expected, rel=1e-14)
    assert post.evidence == pytest.approx(readout_probability(readout, 0.24, timebin_bell_bank), rel=1e-14)
    assert post.total_weight() + post.tail_bound == pytest.approx(1.0, abs=1e-12)
    assert post.tail_bound < 1e-12


def test_pruning_accounts_for_dropped_weight(timebin_bell_bank):
    post = posterior_joint((CLICK, NO_CLICK, CLICK, NO_CLICK), 0.24, timebin_bell_bank, family="threshold")
    kept, dropped = post.pruned(1e-8)
    assert math.fsum(w for _, w in kept) + dropped == pytest.approx(post.total_weight(), abs=1e-14)
    assert all(w >= 1e-8 for _, w in kept)


def test_readout_symmetry():
    bank = DetectorBank.uniform(0.1, 1e-5)
    a = posterior_joint((CLICK, NO_CLICK, CLICK, NO_CLICK), 0.2, bank, family="threshold")
    b = posterior_joint((NO_CLICK, CLICK, NO_CLICK, CLICK), 0.2, bank, family="threshold")
    assert a.evidence == pytest.approx(b.evidence, rel=1e-14)
    assert a.weight((1, 0, 1, 0)) == pytest.approx(b.weight((0, 1, 0, 1)), rel=1e-14)


def test_posterior4_needs_four_factors():
    fac = posterior_factor(NO_CLICK, 0.1, DetectorSpec(0.5), "threshold")
    with pytest.raises(ValueError):
        Posterior4([fac] * 3)


@pytest.mark.parametrize("seed", range(50))
def test_joint_normalization_random_configs(seed):
    rng = np.random.default_rng(seed)
    etas = rng.uniform(0.01, 0.95, 4)
    pdcs = 10 ** rng.uniform(-7, -2, 4)
    chi = rng.uniform(0.02, 0.6)
    bank = DetectorBank.from_lists(etas, pdcs)
    readout = tuple(ThresholdOutcome(int(v)) for v in rng.integers(0, 2, 4))
    post = posterior_joint(readout, chi, bank, Truncation(eps_tail=1e-10), family="threshold")
    assert post.total_weight() + post.tail_bound == pytest.approx(1.0, abs=1e-9)
    assert post.tail_bound <= 1e-10
    counts = tuple(int(v) for v in rng.integers(0, 3, 4))
    post = posterior_joint(counts, chi, bank, Truncation(eps_tail=1e-10), family="count")
    assert post.total_weight() + post.tail_bound == pytest.approx(1.0, abs=1e-9)


def test_detector_bank_construction():
    bank = DetectorBank.from_lists([0.1, 0.2, 0.3, 0.4], [0, 1e-5, 0, 1e-5])
    assert [s.eta for s in bank] == [0.1, 0.2, 0.3, 0.4]
    assert bank[3] == DetectorSpec(0.4, 1e-5)
    with pytest.raises(ValueError):
        DetectorBank.from_lists([0.1, 0.2], [0, 0])
