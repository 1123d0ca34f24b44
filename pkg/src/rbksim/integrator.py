"""Adaptive Dormand-Prince 5(4) integration of the truncated system.

The step controller is the usual one: weighted RMS error with weights
``abs_tol + rel_tol * max(|y|, |y_new|)``, taken over the components that are
not identically zero in the step, safety factor 0.9, step ratio
clamped to [0.2, 5]. A step is rejected (and halved) if any component would
drop below ``-negativity_floor``; accepted components in ``(-floor, 0)`` are
set to exactly 0. Components that are 0 with a vanishing derivative at every
stage stay bitwise 0, so exact zeros survive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kernel import Kernel
from .report import OracleReport, PreconditionViolated
from .rhs import make_rhs
from .state import ClusterState, InitialCondition, realize

__all__ = [
    "IntegratorConfig",
    "IntegratorStats",
    "Trajectory",
    "ConfigError",
    "StepSizeUnderflow",
    "integrate",
    "integrate_state",
    "decay_check",
]


class ConfigError(ValueError):
    pass


class StepSizeUnderflow(RuntimeError):
    def __init__(self, t: float, h: float):
        self.t, self.h = t, h
        super().__init__(f"step size {h!r} too small to make progress at t={t!r}")


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = math.inf
    negativity_floor: float = 1e-14
    rhs_path: str = "auto"
    max_steps: int = 10_000_000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ConfigError("rel_tol and abs_tol must be positive")
        if not self.max_step > 0:
            raise ConfigError("max_step must be positive")
        if not self.negativity_floor >= 0:
            raise ConfigError("negativity_floor must be nonnegative")
        if self.rhs_path not in ("naive", "fast", "auto"):
            raise ConfigError(f"rhs_path must be naive, fast or auto, got {self.rhs_path!r}")


@dataclass
class IntegratorStats:
    accepted: int = 0
    rejected: int = 0
    negativity_rejections: int = 0
    rhs_evals: int = 0
    clamped: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(eq=False)
class Trajectory:
    times: np.ndarray
    values: np.ndarray  # shape (len(times), n), row i is the state at times[i]
    stats: IntegratorStats = field(default_factory=IntegratorStats)
    kernel: Kernel | None = None
    ic: InitialCondition | None = None
    cfg: IntegratorConfig | None = None
    rhs_path: str = ""

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def states(self) -> list[ClusterState]:
        return [ClusterState(row, float(t)) for t, row in zip(self.times, self.values)]

    def __len__(self):
        return len(self.times)

    def __getitem__(self, i) -> ClusterState:
        return ClusterState(self.values[i], float(self.times[i]))

    def moments(self) -> np.ndarray:
        """Columns ``nu, mass, nu_odd`` for every stored time."""
        j = np.arange(1, self.n + 1)
        return np.column_stack([self.values.sum(axis=1),
                                self.values @ j,
                                self.values[:, ::2].sum(axis=1)])


# Dormand-Prince coefficients
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array(_A[6] + [0.0])
# fifth-order minus embedded fourth-order weights
_E = _B - np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                    -92097 / 339200, 187 / 2100, 1 / 40])

_A_ROWS = np.zeros((7, 7))
for _i, _row in enumerate(_A):
    _A_ROWS[_i, : len(_row)] = _row

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0


def check_grid(grid) -> np.ndarray:
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size == 0:
        raise ConfigError("output grid must be a nonempty list of times")
    if not np.all(np.isfinite(g)):
        raise ConfigError("output grid contains non-finite times")
    if g[0] < 0:
        raise ConfigError("output grid must start at t >= 0")
    if np.any(np.diff(g) <= 0):
        raise ConfigError("output grid must be strictly increasing")
    return g


def _rms(x: np.ndarray, active: np.ndarray | None = None) -> float:
    """RMS over the active components only.

    Sizes that are identically zero contribute no error; counting them would
    make the step sequence depend on how much zero padding the truncation
    carries.
    """
    if active is not None:
        x = x[active]
    if x.size == 0:
        return 0.0
    return float(np.sqrt(np.mean(x * x)))


class _Stepper:
    def __init__(self, f, cfg: IntegratorConfig, stats: IntegratorStats):
        self.f = f
        self.cfg = cfg
        self.stats = stats

    def rhs(self, y):
        self.stats.rhs_evals += 1
        return self.f(y)

    def initial_step(self, t, y, f0, span) -> float:
        # Hairer, Norsett & Wanner's starting-step rule for order 5
        cfg = self.cfg
        scale = cfg.abs_tol + cfg.rel_tol * np.abs(y)
        active = (y != 0) | (f0 != 0)
        d0 = _rms(y / scale, active)
        d1 = _rms(f0 / scale, active)
        if d1 == 0.0:
            return min(span, cfg.max_step)
        h0 = 0.01 * d0 / d1 if d0 >= 1e-5 and d1 >= 1e-5 else 1e-6
        h0 = min(h0, span, cfg.max_step)
        f1 = self.rhs(y + h0 * f0)
        d2 = _rms((f1 - f0) / scale, active | (f1 != 0)) / h0
        if max(d1, d2) <= 1e-15:
            h1 = max(1e-6, h0 * 1e-3)
        else:
            h1 = (0.01 / max(d1, d2)) ** 0.2
        return min(100 * h0, h1, span, cfg.max_step)

    def step(self, y, k1, h):
        ks = np.empty((7, y.size))
        ks[0] = k1
        for i in range(1, 7):
            ks[i] = self.rhs(y + h * (_A_ROWS[i, :i] @ ks[:i]))
        y_new = y + h * (_B[:6] @ ks[:6])
        return y_new, h * (_E @ ks), ks[6]

    def advance(self, t, y, f0, h, target):
        """Integrate from t to exactly ``target``; returns the new (y, f, h)."""
        cfg = self.cfg
        floor = cfg.negativity_floor
        stats = self.stats
        rejected_last = False
        while t < target:
            if stats.accepted + stats.rejected >= cfg.max_steps:
                raise StepSizeUnderflow(t, h)
            h = min(h, cfg.max_step)
            # stretch by up to 10% rather than leave a sliver before the target
            last = t + 1.1 * h >= target
            if last:
                h = target - t
            if h <= 4 * np.finfo(float).eps * max(abs(t), np.finfo(float).tiny):
                raise StepSizeUnderflow(t, h)
            y_new, err, f_new = self.step(y, f0, h)
            if not np.all(np.isfinite(y_new)):
                stats.rejected += 1
                h *= MIN_FACTOR
                rejected_last = True
                continue
            if np.any(y_new < -floor):
                stats.rejected += 1
                stats.negativity_rejections += 1
                h *= 0.5
                rejected_last = True
                continue
            scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
            err_norm = _rms(err / scale, (y != 0) | (y_new != 0) | (err != 0))
            if err_norm <= 1.0:
                stats.accepted += 1
                t = target if last else t + h
                tiny_neg = y_new < 0
                if np.any(tiny_neg):
                    y_new[tiny_neg] = 0.0
                    stats.clamped += int(tiny_neg.sum())
                    f_new = self.rhs(y_new)
                y, f0 = y_new, f_new
                factor = MAX_FACTOR if err_norm == 0 else SAFETY * err_norm ** -0.2
                factor = min(MAX_FACTOR, max(MIN_FACTOR, factor))
                if rejected_last:
                    factor = min(factor, 1.0)
                rejected_last = False
                # the shortened final step says nothing about the natural step
                if not last or factor < 1.0:
                    h *= factor
            else:
                stats.rejected += 1
                h *= max(MIN_FACTOR, SAFETY * err_norm ** -0.2)
                rejected_last = True
        return y, f0, h


def integrate_state(kernel: Kernel, c0, t0: float, grid, cfg: IntegratorConfig | None = None,
                    stats: IntegratorStats | None = None, f=None) -> np.ndarray:
    """Integrate from ``c0`` at time ``t0`` and return the states at ``grid``.

    ``grid`` must satisfy ``grid[0] >= t0``. Returns an array of shape
    ``(len(grid), n)``.
    """
    cfg = cfg or IntegratorConfig()
    stats = stats if stats is not None else IntegratorStats()
    grid = check_grid(grid)
    if grid[0] < t0:
        raise ConfigError("output grid starts before the initial time")
    y = np.array(c0, dtype=float)
    if f is None:
        f = make_rhs(kernel, y.size, cfg.rhs_path)
    stepper = _Stepper(f, cfg, stats)
    out = np.empty((grid.size, y.size))
    f0 = stepper.rhs(y)
    h = None
    t = float(t0)
    for i, target in enumerate(grid):
        if target > t:
            if h is None:
                h = stepper.initial_step(t, y, f0, target - t)
            y, f0, h = stepper.advance(t, y, f0, h, float(target))
            t = float(target)
        out[i] = y
    return out


def integrate(kernel: Kernel, ic: InitialCondition, n: int, grid,
              cfg: IntegratorConfig | None = None) -> Trajectory:
    """Integrate the N-truncation from ``ic``, imposed at ``grid[0]``."""
    cfg = cfg or IntegratorConfig()
    grid = check_grid(grid)
    c0 = realize(ic, n).c
    f = make_rhs(kernel, n, cfg.rhs_path)
    stats = IntegratorStats()
    values = integrate_state(kernel, c0, grid[0], grid, cfg, stats, f=f)
    return Trajectory(grid, values, stats, kernel, ic, cfg, rhs_path=f.path)


def decay_check(traj: Trajectory, epsilon: float) -> OracleReport:
    """Pass when every component at the final time is below ``epsilon``."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if traj.kernel is not None:
        diag = traj.kernel.diagonal(traj.n)
        zero = np.flatnonzero(diag <= 0)
        if zero.size:
            j = int(zero[0]) + 1
            raise PreconditionViolated(f"a({j},{j}) = {diag[zero[0]]!r}; decay needs a positive diagonal")
    last = traj.values[-1]
    idx = int(np.argmax(last))
    peak = float(last[idx])
    return OracleReport.from_residual(
        "decay", peak, epsilon,
        message=f"max c_j at t={traj.times[-1]:g} is at j={idx + 1}",
        t_final=float(traj.times[-1]), argmax=idx + 1,
    )
