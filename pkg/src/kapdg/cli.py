"""Command-line entry point: run configuration, the time-loop driver, and
artifact emission (snapshots plus per-step diagnostics)."""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field as dc_field
from pathlib import Path

from .cases import CASE_NAMES, build_case
from .errors import KapdgError, SolverFailure, UsageError
from .runner import simulate, write_diagnostics, write_snapshot

SOLVERS = ("kapila-split", "transport-only")
IMPLICIT_METHODS = ("sdirk2-adaptive", "backward-euler", "explicit-diagnostic")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SOLVER = 3
EXIT_IO = 4


@dataclass
class RunConfig:
    case: str
    order: int = 2
    nx: int | None = None
    ny: int | None = None
    cfl: float = 0.1
    t_end: float | None = None
    solver: str = "kapila-split"
    implicit: str = "sdirk2-adaptive"
    out: str = "out"
    snapshots: tuple = ()
    diag_every: int = 1
    samples_per_cell: int = 1
    extra: dict = dc_field(default_factory=dict)

    def validate(self):
        if self.case not in CASE_NAMES:
            raise UsageError(f"case must be one of {', '.join(CASE_NAMES)}, got {self.case!r}")
        if self.order not in (1, 2):
            raise UsageError(f"order must be 1 or 2, got {self.order}")
        if not 0.0 < self.cfl < 1.0:
            raise UsageError(f"cfl must lie in (0,1), got {self.cfl}")
        for label, n in (("nx", self.nx), ("ny", self.ny)):
            if n is not None and n < 4:
                raise UsageError(f"{label} must be at least 4, got {n}")
        if self.solver not in SOLVERS:
            raise UsageError(f"solver must be one of {', '.join(SOLVERS)}")
        if self.implicit not in IMPLICIT_METHODS:
            raise UsageError(f"implicit must be one of {', '.join(IMPLICIT_METHODS)}")
        if self.diag_every < 1:
            raise UsageError("diag-every must be a positive integer")
        if self.t_end is not None and self.t_end < 0.0:
            raise UsageError("tend must be non-negative")
        t_final = self.resolved_t_end()
        if any(s > t_final + 1e-15 or s < 0.0 for s in self.snapshots):
            raise UsageError("snapshot times must lie in [0, tend]")
        return self

    def resolved_t_end(self):
        return self.t_end if self.t_end is not None else build_case(self.case).t_end


_CONFIG_KEYS = {
    "case": str,
    "order": int,
    "nx": int,
    "ny": int,
    "cfl": float,
    "tend": float,
    "solver": str,
    "implicit": str,
    "out": str,
    "snapshots": str,
    "diag_every": int,
    "samples_per_cell": int,
}


def _parse_snapshot_list(text):
    try:
        return tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError as err:
        raise UsageError(f"bad snapshot list {text!r}: {err}") from None


def read_config_file(path):
    """Line-oriented key=value file; '#' starts a comment; unknown keys fail."""
    values = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as err:
        raise UsageError(f"cannot read config file {path}: {err}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _CONFIG_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _CONFIG_KEYS[key](value)
        except ValueError:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return values


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="kapdg",
        description="Bound-preserving oscillation-eliminating DG solver for "
        "the Kapila five-equation two-phase flow model",
    )
    parser.add_argument("--case", choices=CASE_NAMES, help="benchmark to run")
    parser.add_argument("--order", type=int, help="polynomial degree (1 or 2)")
    parser.add_argument("--nx", type=int, help="cells along x")
    parser.add_argument("--ny", type=int, help="cells along y (2D cases)")
    parser.add_argument("--cfl", type=float, help="CFL number in (0,1); default 0.1")
    parser.add_argument("--tend", type=float, help="final time override")
    parser.add_argument("--solver", choices=SOLVERS, help="time-integration pipeline")
    parser.add_argument("--implicit", choices=IMPLICIT_METHODS, help="source-term solver")
    parser.add_argument("--out", help="output directory (default ./out)")
    parser.add_argument("--snapshots", help="comma-separated snapshot times")
    parser.add_argument("--diag-every", type=int, dest="diag_every", help="diagnostic cadence")
    parser.add_argument(
        "--samples-per-cell", type=int, dest="samples_per_cell", help="1D output samples per cell"
    )
    parser.add_argument("--config", help="key=value config file (flags override it)")
    return parser


def parse_config(argv):
    """Resolve a RunConfig from flags and an optional config file."""
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as err:
        raise UsageError("bad command line") from err
    values = read_config_file(ns.config) if ns.config else {}
    for key in _CONFIG_KEYS:
        flag = getattr(ns, key if key != "tend" else "tend", None)
        if flag is not None:
            values[key] = flag
    if "case" not in values:
        raise UsageError("--case is required (or provide it in the config file)")
    snapshots = values.pop("snapshots", None)
    tend = values.pop("tend", None)
    config = RunConfig(case=values.pop("case"), **values)
    if tend is not None:
        config.t_end = float(tend)
    if snapshots is not None:
        config.snapshots = (
            _parse_snapshot_list(snapshots) if isinstance(snapshots, str) else tuple(snapshots)
        )
    elif config.t_end is None:
        config.snapshots = tuple(build_case(config.case).snapshot_times)
    return config.validate()


def run(config):
    """Execute a validated RunConfig, writing snapshots and diagnostics."""
    case = build_case(config.case)
    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    t_final = config.resolved_t_end()
    written = []

    def on_snapshot(t, field):
        path = out_dir / f"snapshot_{len(written):04d}.dat"
        write_snapshot(field, path, case.phases, samples_per_cell=config.samples_per_cell)
        written.append((t, str(path)))

    result = simulate(
        case,
        nx=config.nx,
        ny=config.ny,
        order=config.order,
        cfl=config.cfl,
        t_end=t_final,
        solver=config.solver,
        implicit=config.implicit,
        snapshot_times=config.snapshots,
        on_snapshot=on_snapshot,
        diag_every=config.diag_every,
    )
    write_diagnostics(result.diagnostics, out_dir / "diagnostics.dat")
    with open(out_dir / "snapshots.index", "w") as fh:
        for t, path in written:
            fh.write(f"{t:.17g} {path}\n")
    return result


def main(argv=None):
    try:
        config = parse_config(sys.argv[1:] if argv is None else argv)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return EXIT_USAGE
    try:
        run(config)
    except SolverFailure as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return EXIT_IO
    except KapdgError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK
