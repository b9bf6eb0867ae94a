"""The swapped mixed state of modes a and d, post-selection and fidelity."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np

from .inference import Posterior4
from .sources import Occupation4, PureStateAD, phi_state

__all__ = [
    "BudgetExceeded",
    "EmptyPostselection",
    "MixedStateAD",
    "assemble_state",
    "mix_states",
    "postselect",
    "fidelity_psi_minus",
    "werner_visibility",
    "psi_minus",
    "write_state",
    "read_state",
]

DEFAULT_BUDGET = 2_000_000
WEIGHT_TOLERANCE = 1e-9


class BudgetExceeded(MemoryError):
    """Materializing the state would exceed the configured amplitude budget."""


class EmptyPostselection(ValueError):
    """Post-selection keeps no more weight than the truncation error."""


@dataclass(frozen=True)
class MixedStateAD:
    """Weighted mixture of normalized pure states of ``(a_H, a_V, d_V, d_H)``.

    ``tail_bound`` bounds the weight not represented by ``components``, so
    ``sum(weights) + tail_bound`` is 1 up to rounding.
    """

    components: tuple[tuple[float, PureStateAD], ...]
    tail_bound: float = 0.0
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        comps = tuple((float(w), s) for w, s in self.components)
        for w, _ in comps:
            if w < 0.0:
                raise ValueError(f"negative mixture weight {w}")
        if self.tail_bound < 0.0:
            raise ValueError("tail_bound must be non-negative")
        object.__setattr__(self, "components", comps)

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.components])

    @property
    def total_weight(self) -> float:
        return math.fsum(w for w, _ in self.components)

    def trace(self) -> float:
        return math.fsum(w * s.norm2 for w, s in self.components)

    def basis(self) -> list[Occupation4]:
        occs = {occ for _, s in self.components for occ in s.amplitudes}
        return sorted(occs, key=lambda o: (sum(o), o))

    def density_matrix(self, basis: Sequence[Occupation4] | None = None):
        """Dense density matrix on ``basis`` (default: the occupied support).

        Returns ``(basis, rho)``. Amplitude outside ``basis`` is dropped.
        """
        basis = list(basis) if basis is not None else self.basis()
        index = {Occupation4.of(o): k for k, o in enumerate(basis)}
        rho = np.zeros((len(basis), len(basis)), dtype=complex)
        for w, s in self.components:
            vec = np.zeros(len(basis), dtype=complex)
            for occ, a in s.amplitudes.items():
                k = index.get(occ)
                if k is not None:
                    vec[k] = a
            rho += w * np.outer(vec, vec.conj())
        return basis, rho


def assemble_state(posterior: Posterior4, prune: float = 1e-12, budget: int = DEFAULT_BUDGET) -> MixedStateAD:
    """Pair each retained posterior weight with its post-measurement pure state.

    Components lighter than ``prune`` are dropped and their weight is added to
    the tail. ``budget`` caps the total number of stored amplitudes.
    """
    kept, dropped = posterior.pruned(prune)
    comps = []
    used = 0
    for occ, w in kept:
        # a fixed-total pure state has at most C(n+3, 3) amplitudes
        used += math.comb(occ.total + 3, 3)
        if used > budget:
            raise BudgetExceeded(
                f"state needs more than {budget} amplitudes; raise prune or lower n_max"
            )
        comps.append((w, phi_state(occ)))
    meta = {"readout": posterior.readout, "cutoff": posterior.cutoff, "evidence": posterior.evidence}
    return MixedStateAD(tuple(comps), posterior.tail_bound + dropped, meta)


def mix_states(parts: Iterable[tuple[float, MixedStateAD]]) -> MixedStateAD:
    """Convex combination ``sum p_k rho_k / sum p_k`` of mixed states."""
    parts = [(float(p), s) for p, s in parts if p > 0.0]
    total = math.fsum(p for p, _ in parts)
    if total <= 0.0:
        raise ValueError("mixing weights must have positive sum")
    comps = []
    tail = 0.0
    for p, s in parts:
        comps.extend((p / total * w, c) for w, c in s.components)
        tail += p / total * s.tail_bound
    return MixedStateAD(tuple(comps), tail)


def _heralded(occ: Occupation4) -> bool:
    return occ.n1 + occ.n2 > 0 and occ.n3 + occ.n4 > 0


def postselect(state: MixedStateAD) -> tuple[MixedStateAD, float]:
    """Project on at least one photon in each of the a and d arms.

    Returns the renormalized state and the success probability. The tail of
    the input may survive post-selection entirely, so the output tail is
    ``tail / (success + tail)``.
    """
    comps = []
    for w, s in state.components:
        amps = {occ: a for occ, a in s.amplitudes.items() if _heralded(occ)}
        if not amps:
            continue
        kept = math.fsum(abs(a) ** 2 for a in amps.values())
        scale = 1.0 / math.sqrt(kept)
        comps.append((w * kept, PureStateAD(s.total_photons, {o: a * scale for o, a in amps.items()})))
    success = math.fsum(w for w, _ in comps)
    if success <= state.tail_bound or success == 0.0:
        raise EmptyPostselection(
            f"post-selection success {success:.3e} does not exceed the tail bound {state.tail_bound:.3e}"
        )
    norm = success + state.tail_bound
    out = MixedStateAD(tuple((w / norm, s) for w, s in comps), state.tail_bound / norm, dict(state.meta))
    return out, success


def psi_minus() -> PureStateAD:
    r = 1.0 / math.sqrt(2.0)
    return PureStateAD(2, {Occupation4(1, 0, 1, 0): r + 0j, Occupation4(0, 1, 0, 1): -r + 0j})


def fidelity_psi_minus(state: MixedStateAD) -> float:
    """``<psi-|rho|psi->`` with ``psi- = (|1010> - |0101>)/sqrt(2)``."""
    target = psi_minus()
    f = math.fsum(w * abs(target.inner(s)) ** 2 for w, s in state.components if s.total_photons == 2)
    return min(max(f, 0.0), 1.0)


def werner_visibility(F: float) -> float:
    """Visibility of the Werner state with singlet fidelity ``F``."""
    if not 0.0 <= F <= 1.0:
        raise ValueError(f"fidelity must lie in [0, 1], got {F}")
    return (4.0 * F - 1.0) / 3.0


# --- plain-text serialization -------------------------------------------------
#
# Header lines start with '#' and hold 'key = value' pairs. Each data line is
#   <component> <weight> <n1> <n2> <n3> <n4> <re> <im>
# with one line per stored amplitude; all lines of a component repeat its weight.

FORMAT_TAG = "noisyswap-mixed-state 1"


def write_state(state: MixedStateAD, fh: TextIO, header: dict | None = None) -> None:
    fh.write(f"# {FORMAT_TAG}\n")
    for key, val in (header or {}).items():
        fh.write(f"# {key} = {val}\n")
    fh.write(f"# tail_bound = {state.tail_bound:.17g}\n")
    fh.write(f"# components = {len(state.components)}\n")
    fh.write("# component weight n1 n2 n3 n4 re im\n")
    for k, (w, s) in enumerate(state.components):
        for occ in sorted(s.amplitudes):
            a = complex(s.amplitudes[occ])
            fh.write(f"{k} {w:.17g} {occ.n1} {occ.n2} {occ.n3} {occ.n4} {a.real:.17g} {a.imag:.17g}\n")


def read_state(fh: TextIO) -> tuple[MixedStateAD, dict]:
    header: dict[str, str] = {}
    groups: dict[int, tuple[float, dict]] = {}
    first = True
    for lineno, raw in enumerate(fh, 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if first:
                if body != FORMAT_TAG:
                    raise ValueError(f"line {lineno}: not a mixed-state file")
                first = False
            elif "=" in body:
                key, val = body.split("=", 1)
                header[key.strip()] = val.strip()
            continue
        parts = line.split()
        if len(parts) != 8:
            raise ValueError(f"line {lineno}: expected 8 fields, got {len(parts)}")
        k = int(parts[0])
        w = float(parts[1])
        occ = Occupation4.of(parts[2:6])
        amp = complex(float(parts[6]), float(parts[7]))
        weight, amps = groups.setdefault(k, (w, {}))
        amps[occ] = amp
    comps = []
    for k in sorted(groups):
        w, amps = groups[k]
        total = sum(next(iter(amps)))
        comps.append((w, PureStateAD(total, amps)))
    tail = float(header.pop("tail_bound", 0.0))
    header.pop("components", None)
    return MixedStateAD(tuple(comps), tail), header
