"""Polarization analysis of the swapped state: rotations, four-fold coincidences, visibility.

Both rotators act as ``exp(i theta J)`` with ``J = (V+ H + V H+)/2`` on their
mode pair and ``theta`` the Bloch angle (twice the real-space angle). After
rotation the modes ``(a_H, a_V, d_V, d_H)`` feed the threshold detectors
``(D_a+, D_a-, D_d-, D_d+)``.

Coincidence probabilities are computed sector by sector. The rotators and
detectors conserve the photon numbers ``(n_a, n_d)`` of each arm, so only the
block of the density matrix inside a sector contributes. Each block is a
small matrix indexed by the V-photon counts of the two arms.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Sequence, TextIO

import numpy as np
from scipy.optimize import minimize_scalar

from .config import ExperimentConfig, config_to_lines
from .detectors import ThresholdOutcome, prob_threshold_given_incident
from .inference import DetectorBank, MeaninglessConditional, Posterior4, Truncation, posterior_joint
from .numerics import binomial
from .sources import Occupation4, phi_state
from .swapstate import MixedStateAD, assemble_state, fidelity_psi_minus, mix_states, postselect, werner_visibility

__all__ = [
    "AngleConfig",
    "CoincidencePattern",
    "ACCEPTED_READOUTS",
    "DegenerateCurve",
    "ANTICORRELATED",
    "CORRELATED",
    "rotation_block",
    "rotation_amplitude",
    "transition_prob",
    "phi_amplitude",
    "phi_transition_prob",
    "closed_form_amplitude",
    "SectorMixture",
    "HeraldedState",
    "herald",
    "coincidence_prob",
    "coincidence_table",
    "ScanResult",
    "four_fold_scan",
    "VisibilityResult",
    "visibility",
    "scan_visibility",
    "postselected_fidelity",
    "default_delta_grid",
    "chsh_s",
    "visibility_vs_chi",
    "write_scan_csv",
    "write_sweep_csv",
]

CLICK, NO_CLICK = ThresholdOutcome.CLICK, ThresholdOutcome.NO_CLICK
ACCEPTED_READOUTS = ((CLICK, NO_CLICK, CLICK, NO_CLICK), (NO_CLICK, CLICK, NO_CLICK, CLICK))
REFINE_WINDOW = math.radians(2.0)
SHIFT_REPORT = math.radians(0.1)


@dataclass(frozen=True)
class AngleConfig:
    """Real-space polarization rotation angles (radians) of modes a and d."""

    alpha_real: float
    delta_real: float = 0.0

    @classmethod
    def from_degrees(cls, alpha: float, delta: float = 0.0) -> "AngleConfig":
        return cls(math.radians(alpha), math.radians(delta))

    @classmethod
    def from_bloch(cls, alpha_bloch: float, delta_bloch: float = 0.0) -> "AngleConfig":
        return cls(alpha_bloch / 2.0, delta_bloch / 2.0)

    @property
    def alpha_bloch(self) -> float:
        return 2.0 * self.alpha_real

    @property
    def delta_bloch(self) -> float:
        return 2.0 * self.delta_real

    @property
    def alpha_waveplate(self) -> float:
        """Half-wave-plate axis angle producing the rotation of mode a."""
        return self.alpha_real / 2.0

    @property
    def delta_waveplate(self) -> float:
        return self.delta_real / 2.0


@dataclass(frozen=True)
class CoincidencePattern:
    """Click pattern on ``(D_a+, D_a-, D_d-, D_d+)``."""

    outcomes: tuple[ThresholdOutcome, ThresholdOutcome, ThresholdOutcome, ThresholdOutcome]

    def __post_init__(self):
        outs = tuple(ThresholdOutcome.coerce(o) for o in self.outcomes)
        if len(outs) != 4:
            raise ValueError("a coincidence pattern has four outcomes")
        object.__setattr__(self, "outcomes", outs)

    @classmethod
    def of(cls, values) -> "CoincidencePattern":
        return values if isinstance(values, cls) else cls(tuple(values))

    @property
    def index(self) -> tuple[int, int, int, int]:
        return tuple(int(o) for o in self.outcomes)


ANTICORRELATED = (CoincidencePattern.of((1, 0, 1, 0)), CoincidencePattern.of((0, 1, 0, 1)))
CORRELATED = (CoincidencePattern.of((0, 1, 1, 0)), CoincidencePattern.of((1, 0, 0, 1)))


# --- rotations ----------------------------------------------------------------

@lru_cache(maxsize=4096)
def _rotation_block_cached(total: int, bloch_angle: float) -> np.ndarray:
    c = math.cos(bloch_angle / 2.0)
    s = math.sin(bloch_angle / 2.0)
    R = np.zeros((total + 1, total + 1), dtype=complex)
    lf = [math.lgamma(k + 1) for k in range(total + 1)]
    for v in range(total + 1):
        h = total - v
        # (c H+ + i s V+)^h (i s H+ + c V+)^v: x H photons from the first factor, y from the second
        for x in range(h + 1):
            for y in range(v + 1):
                hp = x + y
                vp = total - hp
                coef = binomial(h, x) * binomial(v, y) * c ** (x + v - y) * s ** (h - x + y)
                if coef == 0.0:
                    continue
                phase = 1j ** (h - x + y)
                scale = math.exp(0.5 * (lf[hp] + lf[vp] - lf[h] - lf[v]))
                R[vp, v] += phase * coef * scale
    R.setflags(write=False)
    return R


def rotation_block(total: int, bloch_angle: float) -> np.ndarray:
    """Rotation on the ``total``-photon space of one (H, V) mode pair, indexed by V count."""
    return _rotation_block_cached(int(total), float(bloch_angle))


def rotation_amplitude(from_occ, to_occ, angles: AngleConfig) -> complex:
    """``<to| U_a U_d |from>`` between Fock occupations of ``(a_H, a_V, d_V, d_H)``."""
    f = Occupation4.of(from_occ)
    t = Occupation4.of(to_occ)
    na, nd = f.n1 + f.n2, f.n3 + f.n4
    if t.n1 + t.n2 != na or t.n3 + t.n4 != nd:
        return 0j
    Ra = rotation_block(na, angles.alpha_bloch)
    Rd = rotation_block(nd, angles.delta_bloch)
    return complex(Ra[t.n2, f.n2] * Rd[t.n3, f.n3])


def transition_prob(from_occ, to_occ, angles: AngleConfig) -> float:
    return abs(rotation_amplitude(from_occ, to_occ, angles)) ** 2


def phi_amplitude(readout, to_occ, angles: AngleConfig) -> complex:
    """``<to| U_a U_d |Phi_readout>``: rotated post-measurement state in the Fock basis."""
    t = Occupation4.of(to_occ)
    acc = 0j
    for occ, amp in phi_state(readout).amplitudes.items():
        acc += amp * rotation_amplitude(occ, t, angles)
    return acc


def phi_transition_prob(readout, to_occ, angles: AngleConfig) -> float:
    """Transition probability ``W`` from the state heralded by ``readout`` to occupation ``to``."""
    return abs(phi_amplitude(readout, to_occ, angles)) ** 2


def closed_form_amplitude(readout, to_occ, angles: AngleConfig) -> complex:
    """Closed-form multi-sum for ``<to| U_a U_d |Phi_readout>`` from the disentangled rotators.

    Written with powers of ``tan`` and ``cos`` of the half Bloch angles, so it
    is undefined where either cosine vanishes (real-space angle 90 degrees);
    a ``ZeroDivisionError`` is raised there. :func:`phi_amplitude` is exact at
    every angle and is used everywhere else in the package.
    """
    i1, j1, k1, l1 = Occupation4.of(readout)
    i2, j2, k2, l2 = Occupation4.of(to_occ)
    if i1 + j1 + k1 + l1 != i2 + j2 + k2 + l2:
        return 0j
    ca = math.cos(angles.alpha_bloch / 2.0)
    cd = math.cos(angles.delta_bloch / 2.0)
    if abs(ca) < 1e-12 or abs(cd) < 1e-12:
        raise ZeroDivisionError("closed form is singular at a half Bloch angle of 90 degrees")
    ta = 1j * math.tan(angles.alpha_bloch / 2.0)
    td = 1j * math.tan(angles.delta_bloch / 2.0)
    fact = math.factorial

    def prod_sqrt(count: int, offset: int) -> float:
        return math.sqrt(math.prod(offset + m for m in range(1, count + 1))) if count > 0 else 1.0

    pre = 1.0 / (math.sqrt(2.0) ** (i1 + j1 + k1 + l1) * math.sqrt(fact(i1) * fact(j1) * fact(k1) * fact(l1)))
    total = 0j
    for mu in range(i1 + 1):
        for nu in range(j1 + 1):
            for kap in range(k1 + 1):
                for lam in range(l1 + 1):
                    if mu + nu + kap + lam != i2 + j2:
                        continue
                    outer = (
                        (-1) ** (mu + nu)
                        * math.comb(i1, mu) * math.comb(j1, nu) * math.comb(k1, kap) * math.comb(l1, lam)
                        * math.sqrt(fact(mu + lam) * fact(nu + kap)
                                    * fact(i1 + l1 - mu - lam) * fact(j1 + k1 - nu - kap))
                    )
                    va = nu + kap
                    vd = j1 + k1 - nu - kap
                    inner = 0j
                    for na in range(min(j2, va) + 1):
                        for nd in range(min(k2, vd) + 1):
                            term = (
                                ca ** (i2 + j2 - 2 * na) * cd ** (k2 + l2 - 2 * nd)
                                * ta ** (j2 + va - 2 * na) * td ** (k2 + vd - 2 * nd)
                                / (fact(j2 - na) * fact(va - na) * fact(k2 - nd) * fact(vd - nd))
                            )
                            term *= prod_sqrt(j2 - na, na) * prod_sqrt(va - na, na)
                            term *= prod_sqrt(j2 - na, i2) * prod_sqrt(va - na, i2 + j2 - va)
                            term *= prod_sqrt(k2 - nd, nd) * prod_sqrt(vd - nd, nd)
                            term *= prod_sqrt(k2 - nd, l2) * prod_sqrt(vd - nd, k2 + l2 - vd)
                            inner += term
                    total += outer * inner
    return pre * total


# --- sector engine ------------------------------------------------------------

class SectorMixture:
    """Density-matrix blocks of a mixed state, one per arm photon numbers ``(n_a, n_d)``.

    The a-arm rotation is applied once at construction; :meth:`pattern_table`
    then applies the d-arm rotation and the analysis detectors for one delta.
    """

    def __init__(self, state: MixedStateAD, alpha_real: float):
        self.tail_bound = state.tail_bound
        self.alpha_real = float(alpha_real)
        vecs: dict[tuple[int, int], list[tuple[float, np.ndarray]]] = {}
        for w, s in state.components:
            per_sector: dict[tuple[int, int], np.ndarray] = {}
            for occ, amp in s.amplitudes.items():
                na, nd = occ.n1 + occ.n2, occ.n3 + occ.n4
                v = per_sector.get((na, nd))
                if v is None:
                    v = per_sector[(na, nd)] = np.zeros((na + 1, nd + 1), dtype=complex)
                v[occ.n2, occ.n3] += amp
            for key, v in per_sector.items():
                vecs.setdefault(key, []).append((w, v))
        self.blocks: dict[tuple[int, int], np.ndarray] = {}
        for key in sorted(vecs):
            na, nd = key
            Ra = rotation_block(na, 2.0 * self.alpha_real)
            rho = np.zeros((na + 1, nd + 1, na + 1, nd + 1), dtype=complex)
            for w, v in vecs[key]:
                rv = Ra @ v
                rho += w * np.einsum("ab,cd->abcd", rv, rv.conj())
            # only the a-diagonal survives the a-arm number measurement
            diag = np.einsum("axay->axy", rho)
            self.blocks[key] = np.ascontiguousarray(diag)
        self.max_photons = max((max(k) for k in self.blocks), default=0)

    def occupation_probs(self, delta_real: float) -> dict[tuple[int, int], np.ndarray]:
        """``P[(n_a, n_d)][a_V, d_V]`` after both rotations."""
        out = {}
        for (na, nd), diag in self.blocks.items():
            Rd = rotation_block(nd, 2.0 * delta_real)
            P = np.einsum("dx,axy,dy->ad", Rd, diag, Rd.conj()).real
            out[(na, nd)] = P
        return out

    def pattern_table(self, delta_real: float, bank: DetectorBank) -> np.ndarray:
        """Probabilities of all 16 click patterns, shape ``(2, 2, 2, 2)``.

        Entries sum to the represented weight, ``1 - tail_bound``.
        """
        n = self.max_photons
        L = [
            np.array([[prob_threshold_given_incident(o, i, spec) for i in range(n + 1)] for o in (0, 1)])
            for spec in bank
        ]
        table = np.zeros((2, 2, 2, 2))
        for (na, nd), P in self.occupation_probs(delta_real).items():
            av = np.arange(na + 1)
            dv = np.arange(nd + 1)
            A = L[0][:, na - av][:, None, :] * L[1][:, av][None, :, :]
            D = L[2][:, dv][:, None, :] * L[3][:, nd - dv][None, :, :]
            table += np.einsum("qra,std,ad->qrst", A, D, P)
        return table


def _pattern_sum(table: np.ndarray, patterns: Iterable[CoincidencePattern]) -> float:
    return float(sum(table[p.index] for p in patterns))


@dataclass(frozen=True)
class HeraldedState:
    """Swapped state conditioned on the union of accepted Bell readouts."""

    state: MixedStateAD
    readouts: tuple
    evidences: tuple[float, ...]
    posteriors: tuple[Posterior4, ...] = field(repr=False)

    @property
    def success_probability(self) -> float:
        """Probability per pump pulse that an accepted readout occurs."""
        return math.fsum(self.evidences)


def herald(chi: float, bell_bank: DetectorBank, readouts=ACCEPTED_READOUTS,
           trunc: Truncation | None = None, family: str = "threshold") -> HeraldedState:
    """Mix the swapped states of each accepted readout, weighted by its probability."""
    trunc = trunc or Truncation()
    posts, states, evs = [], [], []
    for r in readouts:
        post = posterior_joint(r, chi, bell_bank, trunc, family=family)
        posts.append(post)
        states.append(assemble_state(post, prune=trunc.prune))
        evs.append(post.evidence)
    if math.fsum(evs) <= 0.0:
        raise MeaninglessConditional("accepted readouts have zero probability")
    mixed = mix_states(zip(evs, states))
    return HeraldedState(mixed, tuple(tuple(r) for r in readouts), tuple(evs), tuple(posts))


def coincidence_table(posterior: Posterior4, angles: AngleConfig, analysis_bank: DetectorBank,
                      trunc: Truncation | None = None) -> tuple[np.ndarray, float]:
    """All 16 pattern probabilities for one Bell readout, and the tail bound."""
    trunc = trunc or Truncation()
    state = assemble_state(posterior, prune=trunc.prune)
    sectors = SectorMixture(state, angles.alpha_real)
    return sectors.pattern_table(angles.delta_real, analysis_bank), state.tail_bound


def coincidence_prob(pattern, posterior: Posterior4, angles: AngleConfig, analysis_bank: DetectorBank,
                     trunc: Truncation | None = None) -> float:
    """Probability of ``pattern`` on the analysis detectors given the Bell readout behind ``posterior``."""
    table, _ = coincidence_table(posterior, angles, analysis_bank, trunc)
    return float(table[CoincidencePattern.of(pattern).index])


@dataclass(frozen=True)
class ScanResult:
    delta: np.ndarray
    anticorr: np.ndarray
    corr: np.ndarray
    tail_bound: float
    herald: HeraldedState = field(repr=False)


def _map(fn: Callable, items: Sequence, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _curves(sectors: SectorMixture, bank: DetectorBank, deltas: Sequence[float], threads: int):
    tables = _map(lambda d: sectors.pattern_table(d, bank), list(deltas), threads)
    anti = np.array([_pattern_sum(t, ANTICORRELATED) for t in tables])
    corr = np.array([_pattern_sum(t, CORRELATED) for t in tables])
    return anti, corr


def default_delta_grid(points: int = 181) -> np.ndarray:
    return np.linspace(0.0, math.pi, points)


def four_fold_scan(config: ExperimentConfig, delta_grid: Sequence[float] | None = None,
                   threads: int | None = None, readouts=ACCEPTED_READOUTS) -> ScanResult:
    """Anticorrelated and correlated four-fold coincidence curves versus delta (radians)."""
    deltas = np.asarray(default_delta_grid() if delta_grid is None else delta_grid, dtype=float)
    h = herald(config.chi, config.bell_bank, readouts, config.truncation)
    sectors = SectorMixture(h.state, config.alpha_real)
    anti, corr = _curves(sectors, config.analysis_bank, deltas, threads or config.resolved_threads)
    return ScanResult(deltas, anti, corr, h.state.tail_bound, h)


# --- visibility ---------------------------------------------------------------

@dataclass(frozen=True)
class VisibilityResult:
    value: float
    p_max: float
    p_min: float
    delta_max: float
    delta_min: float
    shift_max: float = 0.0
    shift_min: float = 0.0

    @property
    def shifted(self) -> bool:
        """True when refinement moved an extremum by more than 0.1 degree."""
        return abs(self.shift_max) > SHIFT_REPORT or abs(self.shift_min) > SHIFT_REPORT


class DegenerateCurve(ValueError):
    """The coincidence curve is identically zero, so no visibility exists."""


def _ratio(p_max: float, p_min: float) -> float:
    if p_max + p_min <= 0.0:
        raise DegenerateCurve("degenerate curve: maximum plus minimum is zero")
    return min(max((p_max - p_min) / (p_max + p_min), 0.0), 1.0)


def _wrapped_distance(x: np.ndarray, centre: float) -> np.ndarray:
    # curves have period pi in delta
    return np.abs((x - centre + math.pi / 2) % math.pi - math.pi / 2)


def visibility(values: Sequence[float], deltas: Sequence[float] | None = None,
               alpha_real: float = math.pi / 4, window: float = REFINE_WINDOW) -> float:
    """``(max - min) / (max + min)`` of a sampled curve.

    With ``deltas`` given, the maximum is taken over samples within ``window``
    of ``alpha`` and the minimum within ``window`` of ``alpha + pi/2``
    (falling back to the global extremum if no sample lies in a window).
    """
    vals = np.asarray(values, dtype=float)
    if vals.size == 0:
        raise ValueError("empty curve")
    if deltas is None:
        return _ratio(float(vals.max()), float(vals.min()))
    ds = np.asarray(deltas, dtype=float)
    near_max = _wrapped_distance(ds, alpha_real) <= window + 1e-12
    near_min = _wrapped_distance(ds, alpha_real + math.pi / 2) <= window + 1e-12
    p_max = float(vals[near_max].max()) if near_max.any() else float(vals.max())
    p_min = float(vals[near_min].min()) if near_min.any() else float(vals.min())
    return _ratio(p_max, p_min)


def _refine(fn: Callable[[float], float], centre: float, sign: float) -> tuple[float, float]:
    """Extremum of ``fn`` within the refinement window around ``centre``."""
    at_centre = fn(centre)
    res = minimize_scalar(lambda d: sign * fn(d), bounds=(centre - REFINE_WINDOW, centre + REFINE_WINDOW),
                          method="bounded", options={"xatol": 1e-6})
    if sign * res.fun < sign * at_centre:
        return float(res.x), float(sign * res.fun)
    return centre, at_centre


def scan_visibility(config: ExperimentConfig, heralded: HeraldedState | None = None) -> VisibilityResult:
    """Visibility of the anticorrelated curve with extrema refined near ``alpha`` and ``alpha + 90 deg``."""
    h = heralded or herald(config.chi, config.bell_bank, ACCEPTED_READOUTS, config.truncation)
    sectors = SectorMixture(h.state, config.alpha_real)
    bank = config.analysis_bank

    def anti(d: float) -> float:
        return _pattern_sum(sectors.pattern_table(d, bank), ANTICORRELATED)

    a = config.alpha_real
    d_max, p_max = _refine(anti, a, -1.0)
    d_min, p_min = _refine(anti, a + math.pi / 2, 1.0)
    return VisibilityResult(_ratio(p_max, p_min), p_max, p_min, d_max, d_min, d_max - a, d_min - a - math.pi / 2)


def chsh_s(V: float) -> float:
    """CHSH correlation ``2 sqrt(2) V`` of a Werner-like state with visibility ``V``."""
    if not 0.0 <= V <= 1.0:
        raise ValueError(f"visibility must lie in [0, 1], got {V}")
    return 2.0 * math.sqrt(2.0) * V


def visibility_vs_chi(config: ExperimentConfig, chi_grid: Sequence[float],
                      threads: int | None = None) -> np.ndarray:
    """Refined visibility at each ``chi``; rows are independent so they run in parallel."""
    chis = [float(c) for c in chi_grid]
    results = _map(lambda c: scan_visibility(config.with_chi(c)).value, chis, threads or config.resolved_threads)
    return np.array(results)


def postselected_fidelity(h: HeraldedState) -> tuple[float, float]:
    """Singlet fidelity of the post-selected heralded state and its Werner visibility."""
    ps, _ = postselect(h.state)
    F = fidelity_psi_minus(ps)
    return F, werner_visibility(F)


# --- CSV ----------------------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _header(fh: TextIO, config: ExperimentConfig | None, extra: dict | None):
    if config is not None:
        for line in config_to_lines(config):
            fh.write(f"# {line}\n")
    for key, val in (extra or {}).items():
        fh.write(f"# {key} = {val}\n")


def write_scan_csv(fh: TextIO, result: ScanResult, config: ExperimentConfig | None = None,
                   extra: dict | None = None) -> None:
    _header(fh, config, {"tail_bound": _fmt(result.tail_bound), **(extra or {})})
    fh.write("delta_deg,anticorr,corr\n")
    for d, a, c in zip(result.delta, result.anticorr, result.corr):
        fh.write(f"{_fmt(math.degrees(d))},{_fmt(a)},{_fmt(c)}\n")


def write_sweep_csv(fh: TextIO, chis: Sequence[float], values: Sequence[float],
                    config: ExperimentConfig | None = None, extra: dict | None = None) -> None:
    _header(fh, config, extra)
    fh.write("chi,visibility\n")
    for c, v in zip(chis, values):
        fh.write(f"{_fmt(c)},{_fmt(v)}\n")
