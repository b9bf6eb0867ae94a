"""Experiment configuration and its flat ``key = value`` text format.

Recognized keys (angles in degrees, everything else dimensionless)::

    chi                     required, interaction parameter of both sources
    bell.eta.1 .. .4        Bell-stage efficiencies for (c'_H, c'_V, b'_V, b'_H)
    bell.pdc.1 .. .4        Bell-stage dark-count probabilities
    bell.eta / bell.pdc     shorthand setting all four
    analysis.eta.1 .. .4    analysis-stage detectors (D_a+, D_a-, D_d-, D_d+)
    analysis.pdc.1 .. .4
    analysis.eta / analysis.pdc
    alpha                   fixed rotation of mode a in real space (default 45)
    trunc.n_max             integer or 'auto'
    trunc.eps_tail          per-posterior tail budget (default 1e-12)
    trunc.prune             drop mixture components lighter than this
    threads                 integer or 'auto'

Lines starting with ``#`` and blank lines are ignored.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

from .detectors import DetectorSpec
from .inference import DetectorBank, Truncation

__all__ = ["ConfigError", "ExperimentConfig", "TIMEBIN_CONFIG", "parse_config", "parse_config_text", "config_to_lines"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    chi: float
    bell_bank: DetectorBank
    analysis_bank: DetectorBank
    alpha_real: float = math.pi / 4
    truncation: Truncation = field(default_factory=Truncation)
    threads: int | None = 1

    def __post_init__(self):
        if not (math.isfinite(self.chi) and self.chi >= 0.0):
            raise ConfigError(f"chi: must be a non-negative number, got {self.chi}")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads: must be at least 1")

    def with_chi(self, chi: float) -> "ExperimentConfig":
        return replace(self, chi=chi)

    @property
    def resolved_threads(self) -> int:
        return self.threads if self.threads is not None else (os.cpu_count() or 1)


_BANK_KEYS = {f"{stage}.{kind}.{k}" for stage in ("bell", "analysis") for kind in ("eta", "pdc") for k in range(1, 5)}
_SHORT_KEYS = {f"{stage}.{kind}" for stage in ("bell", "analysis") for kind in ("eta", "pdc")}
_SCALAR_KEYS = {"chi", "alpha", "trunc.n_max", "trunc.eps_tail", "trunc.prune", "threads"}
KNOWN_KEYS = _BANK_KEYS | _SHORT_KEYS | _SCALAR_KEYS


def _float(key: str, text: str) -> float:
    try:
        val = float(text)
    except ValueError:
        raise ConfigError(f"{key}: not a number: {text!r}") from None
    if not math.isfinite(val):
        raise ConfigError(f"{key}: must be finite")
    return val


def _split_pairs(lines: Iterable[str], source: str) -> dict[str, tuple[str, str]]:
    """Map key -> (value, location) for each ``key = value`` line."""
    out: dict[str, tuple[str, str]] = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{lineno}"
        if "=" not in line:
            raise ConfigError(f"{where}: expected 'key = value', got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"{where}: unknown key {key!r}")
        if not val:
            raise ConfigError(f"{where}: empty value for {key!r}")
        out[key] = (val, where)
    return out


def _build(pairs: dict[str, tuple[str, str]]) -> ExperimentConfig:
    def get(key, default=None):
        return pairs[key][0] if key in pairs else default

    if "chi" not in pairs:
        raise ConfigError("chi: required key missing")

    banks = {}
    for stage in ("bell", "analysis"):
        specs = []
        for k in range(1, 5):
            eta_txt = get(f"{stage}.eta.{k}", get(f"{stage}.eta"))
            pdc_txt = get(f"{stage}.pdc.{k}", get(f"{stage}.pdc", "0"))
            if eta_txt is None:
                raise ConfigError(f"{stage}.eta.{k}: required key missing")
            eta = _float(f"{stage}.eta.{k}", eta_txt)
            pdc = _float(f"{stage}.pdc.{k}", pdc_txt)
            if not 0.0 <= eta <= 1.0:
                raise ConfigError(f"{stage}.eta.{k}: must lie in [0, 1], got {eta}")
            if not 0.0 <= pdc < 1.0:
                raise ConfigError(f"{stage}.pdc.{k}: must lie in [0, 1), got {pdc}")
            specs.append(DetectorSpec(eta, pdc))
        banks[stage] = DetectorBank(tuple(specs))

    n_max_txt = get("trunc.n_max", "auto")
    if n_max_txt == "auto":
        n_max = None
    else:
        try:
            n_max = int(n_max_txt)
        except ValueError:
            raise ConfigError(f"trunc.n_max: expected integer or 'auto', got {n_max_txt!r}") from None
    try:
        trunc = Truncation(
            n_max=n_max,
            eps_tail=_float("trunc.eps_tail", get("trunc.eps_tail", "1e-12")),
            prune=_float("trunc.prune", get("trunc.prune", "1e-12")),
        )
    except ValueError as exc:
        raise ConfigError(f"trunc: {exc}") from None

    threads_txt = get("threads", "1")
    if threads_txt == "auto":
        threads = None
    else:
        try:
            threads = int(threads_txt)
        except ValueError:
            raise ConfigError(f"threads: expected integer or 'auto', got {threads_txt!r}") from None

    return ExperimentConfig(
        chi=_float("chi", get("chi")),
        bell_bank=banks["bell"],
        analysis_bank=banks["analysis"],
        alpha_real=math.radians(_float("alpha", get("alpha", "45"))),
        truncation=trunc,
        threads=threads,
    )


def parse_config_text(text: str, overrides: Iterable[str] = (), source: str = "<config>") -> ExperimentConfig:
    pairs = _split_pairs(text.splitlines(), source)
    pairs.update(_split_pairs(list(overrides), "--set"))
    return _build(pairs)


def parse_config(path: str | os.PathLike | None, overrides: Iterable[str] = ()) -> ExperimentConfig:
    """Load a config file (or only ``overrides`` when ``path`` is None)."""
    if path is None:
        return parse_config_text("", overrides)
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"{p}: {exc.strerror}") from None
    return parse_config_text(text, overrides, source=str(p))


def config_to_lines(cfg: ExperimentConfig) -> list[str]:
    """Fully resolved config as ``key = value`` lines."""
    lines = [f"chi = {cfg.chi:.12g}"]
    for stage, bank in (("bell", cfg.bell_bank), ("analysis", cfg.analysis_bank)):
        for k, spec in enumerate(bank, 1):
            lines.append(f"{stage}.eta.{k} = {spec.eta:.12g}")
            lines.append(f"{stage}.pdc.{k} = {spec.p_dc:.12g}")
    t = cfg.truncation
    lines.append(f"alpha = {math.degrees(cfg.alpha_real):.12g}")
    lines.append(f"trunc.n_max = {'auto' if t.n_max is None else t.n_max}")
    lines.append(f"trunc.eps_tail = {t.eps_tail:.12g}")
    lines.append(f"trunc.prune = {t.prune:.12g}")
    lines.append(f"threads = {'auto' if cfg.threads is None else cfg.threads}")
    return lines


TIMEBIN_CONFIG = """\
# Reference parameters of the time-bin swapping experiment (chi = sqrt(0.06))
chi = 0.244949
bell.eta.1 = 0.045
bell.eta.2 = 0.045
bell.eta.3 = 0.135
bell.eta.4 = 0.135
bell.pdc.1 = 3e-5
bell.pdc.2 = 3e-5
bell.pdc.3 = 1e-5
bell.pdc.4 = 1e-5
analysis.eta = 0.04
analysis.pdc = 3e-5
alpha = 45
"""
