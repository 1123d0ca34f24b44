"""Command-line front end.

Subcommands: ``simulate``, ``verify``, ``scaling`` and ``convergence``.
Exit codes: 0 success, 1 a check failed, 2 bad configuration, 3 the
integrator could not finish.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import (SUITES, run_suite, scaling_diagnostics, scaling_limit_check,
                          truncation_convergence)
from .integrator import ConfigError, IntegratorConfig, StepSizeUnderflow, check_grid, integrate
from .kernel import Constant, KernelSpecError, classify_growth, parse_kernel_spec
from .kernel_parser import (AsymmetricKernel, EvaluationError, ExpressionSyntaxError,
                            NegativeKernel)
from .report import PreconditionViolated, dump_reports
from .state import Geometric, InitialConditionError, geometric_tail_mass, parse_ic_spec

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_INTEGRATOR = 0, 1, 2, 3

_CONFIG_ERRORS = (KernelSpecError, ExpressionSyntaxError, EvaluationError, AsymmetricKernel,
                  NegativeKernel, InitialConditionError, ConfigError, FileNotFoundError)


class UsageError(ValueError):
    pass


def fmt(x) -> str:
    """17 significant digits: round-trips every double."""
    return f"{float(x):.17g}"


def parse_grid(text: str) -> np.ndarray:
    """``t0,t1,count`` (linear), ``t0,t1,count,log`` or ``@file``.

    A log grid is ``0`` followed by ``count`` log-spaced points from t0 to t1,
    so the initial condition always sits at t = 0. A file lists one time per
    line (commas also work); ``#`` starts a comment.
    """
    text = text.strip()
    if text.startswith("@"):
        path = Path(text[1:])
        if not path.is_file():
            raise FileNotFoundError(f"grid file not found: {path}")
        times = []
        for line in path.read_text().splitlines():
            line = line.split("#", 1)[0]
            times += [float(x) for x in line.replace(",", " ").split()]
        return check_grid(times)
    parts = [p.strip() for p in text.split(",")]
    log = len(parts) == 4 and parts[3].lower() == "log"
    if len(parts) not in (3, 4) or (len(parts) == 4 and not log):
        raise ConfigError(f"grid must be 't0,t1,count[,log]' or '@file', got {text!r}")
    try:
        t0, t1, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(f"cannot parse grid {text!r}") from None
    if count < 1 or (not log and count < 2 and t1 != t0):
        raise ConfigError("grid count too small")
    if log:
        if not 0 < t0 < t1:
            raise ConfigError("log grid needs 0 < t0 < t1")
        return check_grid(np.concatenate([[0.0], np.geomspace(t0, t1, count)]))
    return check_grid(np.linspace(t0, t1, count))


def parse_sizes(text: str) -> list[int]:
    try:
        sizes = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"sizes must be comma-separated integers, got {text!r}") from None
    if len(sizes) < 2:
        raise ConfigError("need at least two sizes")
    if any(b <= a for a, b in zip(sizes, sizes[1:])) or sizes[0] < 1:
        raise ConfigError(f"sizes must be positive and strictly increasing, got {sizes}")
    return sizes


@dataclass
class SimConfig:
    kernel_spec: str
    ic_spec: str
    n: int
    grid: np.ndarray
    integrator: IntegratorConfig
    out_dir: Path
    figures: bool = False
    options: dict = field(default_factory=dict)

    @classmethod
    def from_args(cls, args, default_grid: str) -> "SimConfig":
        if args.n < 1:
            raise ConfigError("--n must be >= 1")
        cfg = IntegratorConfig(rel_tol=args.rel_tol, abs_tol=args.abs_tol,
                               max_step=args.max_step, rhs_path=args.rhs)
        grid = parse_grid(args.grid or default_grid)
        opts = {k: getattr(args, k) for k in ("suite", "sizes", "jmax", "threshold") if hasattr(args, k)}
        return cls(args.kernel, args.ic, args.n, grid, cfg, Path(args.out_dir), args.figures, opts)

    def build(self):
        kernel = parse_kernel_spec(self.kernel_spec)
        ic = parse_ic_spec(self.ic_spec)
        return kernel, ic


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])


def _json_dump(obj, path: Path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _metadata(conf: SimConfig, kernel, ic, traj) -> dict:
    meta = {
        "version": __version__,
        "kernel": kernel.spec,
        "kernel_class": str(classify_growth(kernel)),
        "ic": ic.spec,
        "n": conf.n,
        "grid": {"t0": float(conf.grid[0]), "t1": float(conf.grid[-1]), "points": int(conf.grid.size)},
        "integrator": {
            "rel_tol": conf.integrator.rel_tol,
            "abs_tol": conf.integrator.abs_tol,
            "max_step": None if not np.isfinite(conf.integrator.max_step) else conf.integrator.max_step,
            "negativity_floor": conf.integrator.negativity_floor,
            "rhs_path": traj.rhs_path,
        },
        "stats": traj.stats.as_dict(),
    }
    if isinstance(ic, Geometric):
        meta["truncation_tail_mass"] = geometric_tail_mass(ic, conf.n)
    return meta


def write_trajectory(out_dir: Path, traj) -> None:
    n = traj.n
    write_csv(out_dir / "trajectory.csv", ["t"] + [f"c_{j}" for j in range(1, n + 1)],
              np.column_stack([traj.times, traj.values]))
    write_csv(out_dir / "moments.csv", ["t", "nu", "mass", "nu_odd"],
              np.column_stack([traj.times, traj.moments()]))


def cmd_simulate(conf: SimConfig) -> int:
    kernel, ic = conf.build()
    conf.out_dir.mkdir(parents=True, exist_ok=True)
    traj = integrate(kernel, ic, conf.n, conf.grid, conf.integrator)
    write_trajectory(conf.out_dir, traj)
    _json_dump(_metadata(conf, kernel, ic, traj), conf.out_dir / "metadata.json")
    if conf.figures:
        from . import plotting
        plotting.trajectory_figure(traj, conf.out_dir / "trajectory.png")
    print(f"wrote {conf.out_dir / 'trajectory.csv'} ({len(traj)} times, N={traj.n}, "
          f"{traj.stats.accepted} steps, rhs={traj.rhs_path})")
    return EXIT_OK


def cmd_verify(conf: SimConfig, suite: str) -> int:
    kernel, ic = conf.build()
    conf.out_dir.mkdir(parents=True, exist_ok=True)
    traj = integrate(kernel, ic, conf.n, conf.grid, conf.integrator)
    reports = run_suite(traj, suite, threshold=conf.options.get("threshold", 1e-12))
    dump_reports(reports, conf.out_dir / "report.json")
    for r in reports:
        print(r.line())
    failed = [r for r in reports if not r.passed and not r.skipped]
    return EXIT_FAILED if failed else EXIT_OK


def cmd_scaling(conf: SimConfig, j_max: int) -> int:
    kernel, ic = conf.build()
    if not isinstance(kernel, Constant):
        raise UsageError(f"scaling needs a constant kernel, got {kernel.spec}")
    if j_max < 1:
        raise ConfigError("--jmax must be >= 1")
    conf.out_dir.mkdir(parents=True, exist_ok=True)
    traj = integrate(kernel, ic, conf.n, conf.grid, conf.integrator)
    table = scaling_diagnostics(traj, j_max)
    write_csv(conf.out_dir / "scaling.csv", table.columns, table.data)
    limits = {}
    if isinstance(ic, Geometric) and ic.A0 > 0 and kernel.K > 0:
        try:
            report = scaling_limit_check(traj)
            print(report.line())
            limits = {"t nu limit": (1 + ic.alpha) / kernel.K,
                      "t c_1 limit": (1 - ic.alpha**2) / kernel.K}
        except PreconditionViolated:
            pass
    if conf.figures:
        from . import plotting
        plotting.scaling_figure(table, conf.out_dir / "scaling.png", limits)
    last = table.data[-1]
    print(f"t={fmt(last[0])}  t*nu={last[1]:.6g}  t*c_1={last[3]:.6g}")
    return EXIT_OK


def cmd_convergence(conf: SimConfig, sizes: list[int]) -> int:
    kernel, ic = conf.build()
    conf.out_dir.mkdir(parents=True, exist_ok=True)
    report = truncation_convergence(kernel, ic, sizes, conf.grid, conf.integrator)
    rows = report.context["rows"]
    write_csv(conf.out_dir / "convergence.csv", ["N", "D"], rows)
    dump_reports([report], conf.out_dir / "report.json")
    if conf.figures:
        from . import plotting
        plotting.convergence_figure(rows, conf.out_dir / "convergence.png")
    for n, d in rows:
        print(f"N={n:<6d} D={d:.6e}")
    print(report.line())
    return EXIT_OK if report.passed else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--kernel", default="const:1",
                        help="const:K, product:K,beta or expr:<expression in j,k> (default const:1)")
    common.add_argument("--ic", required=True, help="mono:p,lambda, geom:A0,alpha or explicit:file.csv")
    common.add_argument("--n", type=int, default=64, help="truncation size N (default 64)")
    common.add_argument("--grid", default=None, help="t0,t1,count[,log] or @file")
    common.add_argument("--rel-tol", type=float, default=1e-8)
    common.add_argument("--abs-tol", type=float, default=1e-10)
    common.add_argument("--max-step", type=float, default=float("inf"))
    common.add_argument("--rhs", choices=("naive", "fast", "auto"), default="auto")
    common.add_argument("--out-dir", default=".", help="directory for output files")
    common.add_argument("--figures", action="store_true", help="also write PNG figures (needs matplotlib)")

    ap = argparse.ArgumentParser(prog="rbksim", description="Cluster-eating coagulation simulator")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sub.add_parser("simulate", parents=[common], help="integrate and write trajectory/moments CSV")

    p = sub.add_parser("verify", parents=[common], help="run a verification suite, write report.json")
    p.add_argument("--suite", choices=SUITES, default="all")
    p.add_argument("--threshold", type=float, default=1e-12, help="positivity threshold for the support check")

    p = sub.add_parser("scaling", parents=[common], help="write the t*nu, t*c_j scaling table")
    p.add_argument("--jmax", type=int, default=5)

    p = sub.add_parser("convergence", parents=[common], help="compare truncations along a size ladder")
    p.add_argument("--sizes", required=True, help="comma-separated, strictly increasing N values")
    return ap


DEFAULT_GRIDS = {
    "simulate": "0,1,11",
    "verify": "0,10,21",
    "scaling": "1e-3,1e3,61,log",
    "convergence": "0,10,21",
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        conf = SimConfig.from_args(args, DEFAULT_GRIDS[args.command])
        if args.command == "simulate":
            return cmd_simulate(conf)
        if args.command == "verify":
            return cmd_verify(conf, args.suite)
        if args.command == "scaling":
            return cmd_scaling(conf, args.jmax)
        return cmd_convergence(conf, parse_sizes(args.sizes))
    except (*_CONFIG_ERRORS, UsageError) as exc:
        print(f"rbksim: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StepSizeUnderflow as exc:
        print(f"rbksim: integrator failure: {exc}", file=sys.stderr)
        return EXIT_INTEGRATOR


if __name__ == "__main__":
    sys.exit(main())
