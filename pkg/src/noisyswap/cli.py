"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 configuration error, 3 numeric
non-convergence, 4 verification mismatch.
"""

from __future__ import annotations

import argparse
import contextlib
import math
import sys
from dataclasses import replace
from typing import Sequence

import numpy as np

from . import analysis
from .config import TIMEBIN_CONFIG, ConfigError, ExperimentConfig, config_to_lines, parse_config, parse_config_text
from .detectors import SingularModel, ThresholdOutcome
from .inference import MeaninglessConditional, posterior_joint
from .numerics import NonConvergenceError
from .swapstate import EmptyPostselection, postselect, write_state

EXIT_USAGE, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VERIFY = 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _grid(text: str, name: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"{name}: expected start:stop:count, got {text!r}")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"{name}: expected start:stop:count, got {text!r}") from None
    if count < 1:
        raise UsageError(f"{name}: count must be positive")
    return np.linspace(start, stop, count)


def _readout(text: str):
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 4:
        raise UsageError("--readout needs four comma-separated outcomes")
    try:
        return tuple(ThresholdOutcome.coerce(p) for p in parts)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key=value config file (default: built-in time-bin reference)")
    common.add_argument("--set", metavar="KEY=VALUE", action="append", default=[], help="override a config key")
    common.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    common.add_argument("--threads", type=int, metavar="N", help="worker threads")

    p = _Parser(prog="noisyswap", description="Noisy entanglement swapping with PDC sources and imperfect detectors.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("scan", parents=[common], help="four-fold coincidence curves versus delta")
    s.add_argument("--delta-grid", metavar="START:STOP:COUNT", default="0:180:181", help="degrees")

    s = sub.add_parser("sweep-chi", parents=[common], help="visibility versus chi")
    s.add_argument("--chi-grid", metavar="START:STOP:COUNT", required=True)

    s = sub.add_parser("posterior", parents=[common], help="posterior over ideal Bell readouts")
    s.add_argument("--readout", metavar="O1,O2,O3,O4", help="threshold readout (default: both accepted readouts)")
    s.add_argument("--min-weight", type=float, default=1e-6, help="smallest weight to print")

    s = sub.add_parser("state", parents=[common], help="serialized swapped state")
    s.add_argument("--postselect", action="store_true", help="keep one or more photons in each arm")

    sub.add_parser("verify", parents=[common], help="oracle cross-checks at the configured parameters")
    return p


def load_config(args) -> ExperimentConfig:
    if args.config:
        cfg = parse_config(args.config, args.set)
    else:
        cfg = parse_config_text(TIMEBIN_CONFIG, args.set, source="<timebin>")
    if args.threads is not None:
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
        cfg = replace(cfg, threads=args.threads)
    return cfg


@contextlib.contextmanager
def _output(path):
    if path:
        with open(path, "w") as fh:
            yield fh
    else:
        yield sys.stdout


def _report(msg: str, args):
    # keep stdout clean for CSV when no --out is given
    print(msg, file=sys.stderr if not args.out else sys.stdout)


def cmd_scan(cfg: ExperimentConfig, args) -> int:
    deltas = np.radians(_grid(args.delta_grid, "--delta-grid"))
    result = analysis.four_fold_scan(cfg, deltas)
    vis = analysis.scan_visibility(cfg, result.herald)
    F, V_werner = analysis.postselected_fidelity(result.herald)
    extra = {
        "visibility": f"{vis.value:.12g}",
        "chsh_s": f"{analysis.chsh_s(vis.value):.12g}",
        "postselected_fidelity": f"{F:.12g}",
        "werner_visibility": f"{V_werner:.12g}",
        "accepted_readout_probability": f"{result.herald.success_probability:.12g}",
    }
    if vis.shifted:
        extra["extremum_shift_deg"] = f"{math.degrees(vis.shift_max):.4g},{math.degrees(vis.shift_min):.4g}"
    with _output(args.out) as fh:
        analysis.write_scan_csv(fh, result, cfg, extra)
    _report(
        f"V = {vis.value:.6f}  S = {analysis.chsh_s(vis.value):.6f}  "
        f"F = {F:.6f}  V_werner = {V_werner:.6f}  tail = {result.tail_bound:.2e}",
        args,
    )
    if vis.shifted:
        _report(f"extremum refined away from analytic position by "
                f"{math.degrees(vis.shift_max):.3f} / {math.degrees(vis.shift_min):.3f} deg", args)
    return 0


def cmd_sweep(cfg: ExperimentConfig, args) -> int:
    chis = _grid(args.chi_grid, "--chi-grid")
    if (chis < 0).any():
        raise UsageError("--chi-grid values must be non-negative")
    values = analysis.visibility_vs_chi(cfg, chis)
    with _output(args.out) as fh:
        analysis.write_sweep_csv(fh, chis, values, cfg, {"tail_budget": f"{cfg.truncation.eps_tail:.3g}"})
    return 0


def cmd_posterior(cfg: ExperimentConfig, args) -> int:
    readouts = [_readout(args.readout)] if args.readout else list(analysis.ACCEPTED_READOUTS)
    with _output(args.out) as fh:
        for line in config_to_lines(cfg):
            fh.write(f"# {line}\n")
        for r in readouts:
            post = posterior_joint(r, cfg.chi, cfg.bell_bank, cfg.truncation, family="threshold")
            label = ",".join(o.name.lower() for o in r)
            fh.write(f"# readout = {label}\n")
            fh.write(f"# evidence = {post.evidence:.12g}\n")
            fh.write(f"# cutoff = {','.join(map(str, post.cutoff))}\n")
            fh.write(f"# tail_bound = {post.tail_bound:.3e}\n")
            fh.write("i,j,k,l,weight\n")
            rows = sorted(post.items(args.min_weight), key=lambda kv: -kv[1])
            for occ, w in rows:
                fh.write(f"{occ.n1},{occ.n2},{occ.n3},{occ.n4},{w:.12g}\n")
    return 0


def cmd_state(cfg: ExperimentConfig, args) -> int:
    h = analysis.herald(cfg.chi, cfg.bell_bank, analysis.ACCEPTED_READOUTS, cfg.truncation)
    state = h.state
    header = {line.split(" = ")[0]: line.split(" = ")[1] for line in config_to_lines(cfg)}
    header["readout"] = "click,no_click,click,no_click | no_click,click,no_click,click"
    if args.postselect:
        state, success = postselect(state)
        header["postselection_success"] = f"{success:.12g}"
    with _output(args.out) as fh:
        write_state(state, fh, header)
    return 0


def cmd_verify(cfg: ExperimentConfig, args) -> int:
    from .verification import run_checks

    results = run_checks(cfg)
    with _output(args.out) as fh:
        for r in results:
            fh.write(r.line() + "\n")
    return 0 if all(r.ok for r in results) else EXIT_VERIFY


COMMANDS = {"scan": cmd_scan, "sweep-chi": cmd_sweep, "posterior": cmd_posterior, "state": cmd_state, "verify": cmd_verify}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = load_config(args)
        return COMMANDS[args.command](cfg, args)
    except UsageError as exc:
        print(f"noisyswap: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"noisyswap: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonConvergenceError, SingularModel, MeaninglessConditional, EmptyPostselection,
            analysis.DegenerateCurve) as exc:
        print(f"noisyswap: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SystemExit as exc:
        # argparse --help
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
