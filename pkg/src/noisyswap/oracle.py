"""Brute-force Fock-space reference calculations.

Nothing in this module uses the closed forms of the other modules. Detector
statistics come from an explicit beamsplitter acting on a signal Fock state
and a truncated thermal state; the swapped state comes from enumerating
squeezer pair numbers and interfering modes b and c explicitly; rotations
come from exponentiating the generator on each fixed-photon-number block.
These routines are slow and meant for verification at small cutoffs.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

from .detectors import DetectorSpec, ThresholdOutcome
from .sources import Occupation4, SourceParams, pdc_joint_amplitude

__all__ = [
    "CutoffTooSmall",
    "oracle_beamsplitter",
    "beamsplitter_block",
    "oracle_detector_prob",
    "oracle_threshold_prob",
    "thermal_cutoff",
    "OracleSwapResult",
    "oracle_swap_posterior",
    "oracle_rotation",
    "rotation_block",
]


class CutoffTooSmall(ValueError):
    pass


@lru_cache(maxsize=65536)
def oracle_beamsplitter(in_pair, out_pair, transmittance: float) -> float:
    """``<m', n'| U_BS |m, n>`` for the two-mode beamsplitter.

    Creation operators transform as ``c+ -> sqrt(T) c+ - sqrt(1-T) e+`` and
    ``e+ -> sqrt(1-T) c+ + sqrt(T) e+``. The matrix element is read off the
    binomial expansion of ``(c+)^m (e+)^n`` after the substitution.
    """
    m, n = in_pair
    mp, np_ = out_pair
    if m + n != mp + np_:
        return 0.0
    t = math.sqrt(transmittance)
    r = math.sqrt(1.0 - transmittance)
    acc = 0.0
    # x photons of the first input stay in the first output, y of the second join it
    for x in range(max(0, mp - n), min(m, mp) + 1):
        y = mp - x
        acc += (
            math.comb(m, x) * math.comb(n, y)
            * t ** x * (-r) ** (m - x)
            * r ** y * t ** (n - y)
        )
    scale = math.sqrt(math.factorial(mp) * math.factorial(np_) / (math.factorial(m) * math.factorial(n)))
    return acc * scale


def beamsplitter_block(total: int, transmittance: float) -> np.ndarray:
    """Matrix of the beamsplitter on the ``total``-photon subspace, rows indexed by output ``m'``."""
    U = np.empty((total + 1, total + 1))
    for m in range(total + 1):
        for mp in range(total + 1):
            U[mp, m] = oracle_beamsplitter((m, total - m), (mp, total - mp), transmittance)
    return U


def thermal_cutoff(x: float, tol: float = 1e-13) -> int:
    """Smallest ``N`` with thermal tail ``x**N / (1 - x) < tol``."""
    if x == 0.0:
        return 0
    return max(0, math.ceil(math.log(tol * (1.0 - x)) / math.log(x)))


def _thermal_x(spec: DetectorSpec) -> float:
    # invert p_dc = (1-eta) x / (1 - eta x) independently of the detectors module
    if spec.p_dc == 0.0:
        return 0.0
    return spec.p_dc / (1.0 - spec.eta * (1.0 - spec.p_dc))


def oracle_detector_prob(q: int, i: int, spec: DetectorSpec, N_thermal: int | None = None) -> float:
    """Probability of ``q`` transmitted photons for a Fock state ``|i>`` mixed with thermal light."""
    x = _thermal_x(spec)
    # outcomes with q > i need at least q - i thermal photons, so extend the cutoff
    # past them to keep the truncation relative rather than absolute
    needed = thermal_cutoff(x) + max(q - i, 0)
    if N_thermal is None:
        N_thermal = needed
    elif N_thermal < needed:
        raise CutoffTooSmall(f"thermal cutoff {N_thermal} < required {needed}")
    eta = spec.eta
    total = 0.0
    for n in range(N_thermal + 1):
        weight = (1.0 - x) * x ** n
        if weight == 0.0:
            break
        tot = i + n
        if q > tot:
            continue
        # signal is the transmitted (first) port, thermal light enters the second
        amp = oracle_beamsplitter((i, n), (q, tot - q), eta)
        total += weight * amp * amp
    return total


def oracle_threshold_prob(outcome, i: int, spec: DetectorSpec, N_thermal: int | None = None) -> float:
    p0 = oracle_detector_prob(0, i, spec, N_thermal)
    return p0 if ThresholdOutcome.coerce(outcome) is ThresholdOutcome.NO_CLICK else 1.0 - p0


class OracleSwapResult:
    """Posterior weights and swapped mixed state from explicit enumeration.

    ``weights`` maps ideal readouts to posterior probabilities, ``states``
    maps the same keys to unnormalized amplitude dictionaries over
    ``(a_H, a_V, d_V, d_H)``.
    """

    def __init__(self, weights, states, evidence, tail_bound):
        self.weights = weights
        self.states = states
        self.evidence = evidence
        self.tail_bound = tail_bound

    def density_matrix(self, basis):
        index = {occ: k for k, occ in enumerate(basis)}
        rho = np.zeros((len(basis), len(basis)), dtype=complex)
        for key, w in self.weights.items():
            amps = self.states[key]
            vec = np.zeros(len(basis), dtype=complex)
            for occ, a in amps.items():
                vec[index[occ]] = a
            nrm = np.vdot(vec, vec).real
            if nrm > 0:
                rho += w * np.outer(vec, vec.conj()) / nrm
        return rho


def _readout_likelihood(readout, ideal, bank, family, cache):
    like = 1.0
    for q, i, spec in zip(readout, ideal, bank):
        key = (q, i, spec)
        if key not in cache:
            if family == "threshold":
                cache[key] = oracle_threshold_prob(q, i, spec)
            else:
                cache[key] = oracle_detector_prob(q, i, spec)
        like *= cache[key]
    return like


def oracle_swap_posterior(readout, chi: float, bank, N: int = 4, family: str = "threshold"):
    """Enumerate squeezer pair numbers up to ``N`` each and apply Bayes' rule directly.

    ``bank`` lists the four detector specs for ``(c'_H, c'_V, b'_V, b'_H)``.
    Only ideal readouts whose H and V photon totals are both at most ``N`` are
    kept, since only those are built from a complete set of pair
    configurations. The posterior is therefore conditioned on that readout
    set; ``tail_bound`` is the prior probability of everything outside it.
    Raises :class:`CutoffTooSmall` if no kept readout is compatible with ``readout``.
    """
    src = SourceParams(chi)
    bank = tuple(bank)
    half = 0.5
    # ideal readout -> amplitudes on (a_H, a_V, d_V, d_H)
    branches: dict[Occupation4, dict[Occupation4, complex]] = {}
    for nH_ab, nV_ab, nH_cd, nV_cd in itertools.product(range(N + 1), repeat=4):
        amp = pdc_joint_amplitude((nH_ab, nV_ab, nH_cd, nV_cd), src)
        if amp == 0:
            continue
        # input b_H = nH_ab, c_H = nH_cd; outputs (b'_H, c'_H) from the balanced splitter
        for bHp in range(nH_ab + nH_cd + 1):
            cHp = nH_ab + nH_cd - bHp
            uH = oracle_beamsplitter((nH_ab, nH_cd), (bHp, cHp), half)
            if uH == 0.0:
                continue
            for bVp in range(nV_ab + nV_cd + 1):
                cVp = nV_ab + nV_cd - bVp
                uV = oracle_beamsplitter((nV_ab, nV_cd), (bVp, cVp), half)
                if uV == 0.0:
                    continue
                ideal = Occupation4(cHp, cVp, bVp, bHp)
                out = Occupation4(nH_ab, nV_ab, nV_cd, nH_cd)
                dest = branches.setdefault(ideal, {})
                dest[out] = dest.get(out, 0.0) + amp * uH * uV
    # a readout is exact only if every pair configuration feeding it was enumerated
    exact = {
        key: amps for key, amps in branches.items()
        if key.n1 + key.n4 <= N and key.n2 + key.n3 <= N
    }
    dropped_prior = 1.0 - math.fsum(
        abs(a) ** 2 for amps in exact.values() for a in amps.values()
    )

    cache: dict = {}
    joint = {}
    for ideal, amps in exact.items():
        p_ideal = math.fsum(abs(a) ** 2 for a in amps.values())
        if p_ideal == 0.0:
            continue
        joint[ideal] = _readout_likelihood(readout, ideal, bank, family, cache) * p_ideal
    evidence = math.fsum(joint.values())
    if evidence == 0.0:
        raise CutoffTooSmall(f"no ideal readout within N={N} explains {tuple(readout)}")
    weights = {key: val / evidence for key, val in joint.items() if val > 0.0}
    states = {key: exact[key] for key in weights}
    return OracleSwapResult(weights, states, evidence, max(dropped_prior, 0.0))


def rotation_block(total: int, bloch_angle: float) -> np.ndarray:
    """``exp(i theta J)`` on the ``total``-photon subspace of an (H, V) mode pair.

    Basis index is the V occupation. ``J = (V+ H + V H+)/2`` moves one photon
    between H and V with matrix element ``sqrt((h)(v+1))/2``.
    """
    dim = total + 1
    J = np.zeros((dim, dim))
    for v in range(total):
        h = total - v
        # V+ H |h, v> = sqrt(h (v+1)) |h-1, v+1>
        val = 0.5 * math.sqrt(h * (v + 1))
        J[v + 1, v] = val
        J[v, v + 1] = val
    return expm(1j * bloch_angle * J)


def oracle_rotation(from_occ, to_occ, angles) -> complex:
    """``<to| U_a(2 alpha) U_d(2 delta) |from>`` on ``(a_H, a_V, d_V, d_H)`` occupations."""
    f = Occupation4.of(from_occ)
    t = Occupation4.of(to_occ)
    na, nd = f.n1 + f.n2, f.n3 + f.n4
    if t.n1 + t.n2 != na or t.n3 + t.n4 != nd:
        return 0j
    Ra = rotation_block(na, angles.alpha_bloch)
    Rd = rotation_block(nd, angles.delta_bloch)
    # block index is the V count: a_V = n2, d_V = n3
    return complex(Ra[t.n2, f.n2] * Rd[t.n3, f.n3])
