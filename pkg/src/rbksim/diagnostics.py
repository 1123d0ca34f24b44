"""Checks of moment identities, invariants and closed forms on trajectories.

Every check returns an :class:`~rbksim.report.OracleReport`. Checks that
only make sense for constant kernels raise KernelMismatch; :func:`run_suite`
turns those into skipped reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from . import oracles
from .integrator import ConfigError, IntegratorConfig, Trajectory, integrate, integrate_state
from .kernel import Kernel
from .rhs import make_rhs
from .report import KernelMismatch, OracleReport, PreconditionViolated
from .state import Explicit, Geometric, InitialCondition, Monodisperse, geometric_tail_mass

__all__ = [
    "WeightSequence",
    "ONE",
    "IDENTITY",
    "ODD_INDICATOR",
    "moment_rate",
    "moment_residual",
    "moment_residuals",
    "odd_count_check",
    "nu_envelope_check",
    "self_similar_check",
    "monodisperse_check",
    "monotonicity_checks",
    "support_invariance_check",
    "predicted_support",
    "truncation_convergence",
    "ScalingTable",
    "scaling_diagnostics",
    "scaling_limit_check",
    "run_suite",
    "SUITES",
]


@dataclass(frozen=True, eq=False)
class WeightSequence:
    """Test sequence ``g_j``: One, Identity, OddIndicator or Custom."""

    kind: str
    custom: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("One", "Identity", "OddIndicator", "Custom"):
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if self.kind == "Custom":
            arr = np.array(self.custom, dtype=float)
            if arr.ndim != 1 or not np.all(np.isfinite(arr)):
                raise ValueError("custom weights must be a finite 1-d array")
            object.__setattr__(self, "custom", arr)

    @classmethod
    def of(cls, values) -> "WeightSequence":
        return cls("Custom", values)

    def values(self, n: int) -> np.ndarray:
        j = np.arange(1, n + 1, dtype=float)
        if self.kind == "One":
            return np.ones(n)
        if self.kind == "Identity":
            return j
        if self.kind == "OddIndicator":
            return (j % 2 == 1).astype(float)
        if self.custom.size < n:
            raise ValueError(f"custom weights have {self.custom.size} entries, need {n}")
        return self.custom[:n].copy()

    def __str__(self):
        return self.kind


ONE = WeightSequence("One")
IDENTITY = WeightSequence("Identity")
ODD_INDICATOR = WeightSequence("OddIndicator")


def _context(traj: Trajectory) -> dict:
    ctx = {
        "kernel": getattr(traj.kernel, "spec", None),
        "ic": getattr(traj.ic, "spec", None),
        "n": traj.n,
        "t0": float(traj.times[0]),
        "t1": float(traj.times[-1]),
        "points": len(traj.times),
    }
    return ctx


def _moment_matrix(kernel: Kernel, g: np.ndarray) -> np.ndarray:
    """``M`` with ``sum_j g_j dc_j/dt = c^T M c``.

    Pairs with k < j lose ``g_j - g_{j-k}`` (the j-cluster is replaced by a
    (j-k)-cluster); pairs with k >= j lose ``g_j`` outright.
    """
    n = g.size
    j = np.arange(n)[:, None]
    k = np.arange(n)[None, :]
    lower = k < j
    diff = g[:, None] - g[np.where(lower, j - k - 1, 0)]
    coef = np.where(lower, diff, g[:, None])
    return -coef * kernel.table(n)


def moment_rate(kernel: Kernel, c, g: WeightSequence) -> float:
    """Right side of the weak moment identity at state ``c``, summed directly."""
    c = np.asarray(getattr(c, "c", c), dtype=float)
    return float(c @ _moment_matrix(kernel, g.values(c.size)) @ c)


def _adaptive_integral(rates, advance, tau, t, y0, r0, local_tol, max_depth):
    """Adaptive Simpson on ``[tau, t]`` with states propagated left to right.

    ``rates(states)`` maps a stack of states to one row of integrand values
    per weight; ``advance(y, a, times)`` re-integrates from ``y`` at ``a``.
    Each panel compares the 3-point and 5-point rules and is bisected until
    they agree to ``15 * local_tol * width``. Returns the integral and the
    number of accepted panels.
    """
    total = np.zeros_like(r0)
    panels = 0
    width = t - tau
    # stack of (a, b, y_a, r_a, depth); the left half is always handled first
    stack = [(tau, t, y0, r0, 0)]
    while stack:
        a, b, ya, ra, depth = stack.pop()
        h = b - a
        times = [a + h / 4, a + h / 2, a + 3 * h / 4, b]
        ys = advance(ya, a, times)
        rs = rates(ys)
        coarse = h / 6 * (ra + 4 * rs[:, 1] + rs[:, 3])
        fine = h / 12 * (ra + 4 * rs[:, 0] + 2 * rs[:, 1] + 4 * rs[:, 2] + rs[:, 3])
        if depth >= max_depth or np.all(np.abs(fine - coarse) <= 15 * local_tol * h / width):
            total += fine + (fine - coarse) / 15
            panels += 1
            continue
        stack.append((a + h / 2, b, ys[1], rs[:, 1], depth + 1))
        stack.append((a, a + h / 2, ya, ra, depth + 1))
    return total, panels


def moment_residuals(traj: Trajectory, weights=(ONE, IDENTITY, ODD_INDICATOR), kernel: Kernel | None = None,
                     tolerance: float = 1e-6, max_depth: int = 30) -> list[OracleReport]:
    """Integrated weak moment identity between consecutive grid times.

    For each interval ``[tau, t]`` the change of ``sum_j g_j c_j`` is compared
    with the time integral of the identity's right side. The integral is an
    adaptive Simpson rule whose nodes are re-integrated from the stored state
    at ``tau``, refined until the local error estimate is below 1e-2 of the
    tolerance. Residuals are relative to ``max_t |sum_j g_j c_j|``.
    """
    kernel = kernel or traj.kernel
    if kernel is None:
        raise ValueError("trajectory carries no kernel; pass one explicitly")
    cfg = traj.cfg or IntegratorConfig()
    n = traj.n
    gv = [w.values(n) for w in weights]
    mats = [_moment_matrix(kernel, g) for g in gv]
    sums = np.array([traj.values @ g for g in gv])  # (weights, times)
    scale = np.max(np.abs(sums), axis=1)
    safe_scale = np.where(scale > 0, scale, 1.0)
    worst = np.zeros(len(weights))
    where = [None] * len(weights)
    panels_used = 0
    f = make_rhs(kernel, n, cfg.rhs_path)

    def rates(states):
        states = np.atleast_2d(states)
        return np.array([np.einsum("ij,jk,ik->i", states, M, states) for M in mats])

    def advance(y, a, times):
        return integrate_state(kernel, y, a, times, cfg, f=f)

    for i in range(len(traj.times) - 1):
        tau, t = float(traj.times[i]), float(traj.times[i + 1])
        y0 = traj.values[i]
        if not np.any(y0):
            # the zero state is an equilibrium
            continue
        delta = sums[:, i + 1] - sums[:, i]
        integral, panels = _adaptive_integral(rates, advance, tau, t, y0, rates(y0)[:, 0],
                                              1e-2 * tolerance * safe_scale, max_depth)
        panels_used = max(panels_used, panels)
        err = np.abs(delta - integral) / safe_scale
        for w in range(len(weights)):
            if err[w] > worst[w]:
                worst[w] = err[w]
                where[w] = (tau, t)
    reports = []
    for w, weight in enumerate(weights):
        msg = "" if where[w] is None else f"worst interval [{where[w][0]:g}, {where[w][1]:g}]"
        reports.append(OracleReport.from_residual(
            f"moment_residual[{weight}]", worst[w], tolerance, message=msg,
            max_panels=panels_used, **_context(traj)))
    return reports


def moment_residual(kernel: Kernel, traj: Trajectory, g: WeightSequence, tolerance: float = 1e-6) -> OracleReport:
    return moment_residuals(traj, (g,), kernel=kernel, tolerance=tolerance)[0]


def _relative_error(measured: np.ndarray, exact: np.ndarray) -> np.ndarray:
    measured = np.asarray(measured, dtype=float)
    exact = np.asarray(exact, dtype=float)
    err = np.abs(measured - exact)
    nz = exact != 0
    return np.where(nz, err / np.where(nz, np.abs(exact), 1.0), err)


def odd_count_check(traj: Trajectory, tolerance: float = 1e-6) -> OracleReport:
    """Odd-size concentration against its closed form (constant kernels)."""
    K = oracles.require_constant(traj.kernel, "the odd-count law")
    odd = traj.values[:, ::2].sum(axis=1)
    s = traj.times - traj.times[0]
    exact = np.array([oracles.nu_odd_exact(odd[0], x, K) for x in s])
    err = _relative_error(odd, exact)
    i = int(np.argmax(err))
    return OracleReport.from_residual("odd_count", err[i], tolerance,
                                      message=f"worst at t={traj.times[i]:g}",
                                      nu_odd_0=float(odd[0]), **_context(traj))


def nu_envelope_check(traj: Trajectory, slack: float = 1e-6) -> OracleReport:
    """Total concentration within its two-sided envelope (constant kernels).

    The residual is the largest relative excursion outside the envelope,
    0 when every point is inside.
    """
    K = oracles.require_constant(traj.kernel, "the nu envelope")
    nu = traj.values.sum(axis=1)
    s = traj.times - traj.times[0]
    worst, at = 0.0, None
    for x, v in zip(s, nu):
        lo, hi = oracles.nu_bounds(nu[0], x, K)
        below = (lo - v) / lo if lo > 0 else max(0.0, lo - v)
        above = (v - hi) / hi if hi > 0 else max(0.0, v - hi)
        out = max(below, above, 0.0)
        if out > worst:
            worst, at = out, x + traj.times[0]
    msg = "" if at is None else f"worst excursion at t={at:g}"
    return OracleReport.from_residual("nu_envelope", worst, slack, message=msg, **_context(traj))


def self_similar_check(traj: Trajectory, j_max: int = 20, tolerance: float = 1e-6) -> OracleReport:
    """Components ``j <= j_max`` against the self-similar family (geometric data)."""
    K = oracles.require_constant(traj.kernel, "the self-similar solution")
    ic = traj.ic
    if not isinstance(ic, Geometric) or ic.A0 == 0:
        raise PreconditionViolated("self-similar check needs geometric initial data with A0 > 0")
    jm = min(j_max, traj.n)
    s = traj.times - traj.times[0]
    if ic.alpha == 0:
        err = np.abs(traj.values[:, :jm])
    else:
        params = oracles.SelfSimilarParams(ic.A0, ic.alpha)
        exact = np.array([[oracles.self_similar_exact(params, j, x, K) for j in range(1, jm + 1)] for x in s])
        err = _relative_error(traj.values[:, :jm], exact)
    i, j = np.unravel_index(int(np.argmax(err)), err.shape)
    ctx = _context(traj)
    ctx["tail_mass"] = geometric_tail_mass(ic, traj.n)
    return OracleReport.from_residual("self_similar", err[i, j], tolerance,
                                      message=f"worst at t={traj.times[i]:g}, j={j + 1}", j_max=jm, **ctx)


def monodisperse_check(traj: Trajectory, tolerance: float = 1e-8) -> OracleReport:
    """Monodisperse data stays monodisperse and follows ``lam/(1 + lam a_pp t)``."""
    ic = traj.ic
    if not isinstance(ic, Monodisperse) or ic.lam == 0:
        raise PreconditionViolated("monodisperse check needs monodisperse data with lambda > 0")
    a_pp = float(traj.kernel.eval(ic.p, ic.p))
    s = traj.times - traj.times[0]
    exact = np.array([oracles.monodisperse_exact(ic.lam, ic.p, a_pp, x) for x in s])
    err = _relative_error(traj.values[:, ic.p - 1], exact)
    others = np.delete(traj.values, ic.p - 1, axis=1)
    leaked = int(np.count_nonzero(others))
    ctx = _context(traj)
    if leaked:
        return OracleReport("monodisperse", float(err.max()), tolerance, False,
                            message=f"{leaked} off-index entries are not exactly 0", context=ctx)
    return OracleReport.from_residual("monodisperse", err.max(), tolerance, **ctx)


def monotonicity_checks(traj: Trajectory, slack: float = 1e-9) -> list[OracleReport]:
    """Number and mass must not increase along the grid.

    The residual is the largest increase between consecutive grid points,
    relative to the initial value of the moment.
    """
    out = []
    mom = traj.moments()
    for name, col in (("monotone_nu", 0), ("monotone_mass", 1)):
        x = mom[:, col]
        rise = np.diff(x).max(initial=0.0)
        ref = abs(x[0])
        res = max(rise, 0.0) / ref if ref > 0 else max(rise, 0.0)
        out.append(OracleReport.from_residual(name, res, slack, **_context(traj)))
    return out


def predicted_support(initial: set[int]) -> set[int]:
    """Positivity set for t > 0: P itself if #P = 1, else gcd multiples up to max P."""
    if not initial:
        raise PreconditionViolated("initial support is empty")
    if len(initial) == 1:
        return set(initial)
    m = reduce(math.gcd, initial)
    return set(range(m, max(initial) + 1, m))


def support_invariance_check(traj: Trajectory, threshold: float = 1e-12, t_min: float = 1e-3) -> OracleReport:
    """Observed positivity set against the gcd law at every t > t0.

    Entries outside the prediction must be exactly 0. Entries inside must
    exceed ``threshold``; before ``t0 + t_min`` shortfalls are reported in the
    context but do not fail the check. The residual counts violations.
    """
    c0 = traj.values[0]
    initial = {int(j) + 1 for j in np.flatnonzero(c0 > 0)}
    pred = predicted_support(initial)
    inside = np.zeros(traj.n, dtype=bool)
    inside[[j - 1 for j in pred]] = True
    violations = 0
    first = ""
    early = []
    min_inside = math.inf
    for t, row in zip(traj.times[1:], traj.values[1:]):
        leak = np.flatnonzero((row != 0) & ~inside)
        low = np.flatnonzero((row <= threshold) & inside)
        if inside.any():
            min_inside = min(min_inside, float(row[inside].min()))
        if leak.size:
            violations += leak.size
            first = first or f"t={t:g}: c_{leak[0] + 1}={row[leak[0]]!r} outside predicted support"
        if low.size:
            if t - traj.times[0] < t_min:
                early.append(float(t))
            else:
                violations += low.size
                first = first or f"t={t:g}: c_{low[0] + 1}={row[low[0]]!r} not above {threshold:g}"
    observed = {int(j) + 1 for j in np.flatnonzero(traj.values[-1] > threshold)}
    ctx = _context(traj)
    ctx.update(initial_support=sorted(initial), predicted_support=sorted(pred),
               observed_support=sorted(observed), min_inside=min_inside,
               threshold=threshold, below_threshold_before_t_min=early)
    return OracleReport("support_invariance", float(violations), 0.0, violations == 0,
                        message=first, context=ctx)


def truncation_convergence(kernel: Kernel, ic: InitialCondition, sizes, grid,
                           cfg: IntegratorConfig | None = None) -> OracleReport:
    """Distance between consecutive truncations along a size ladder.

    ``D(N) = max_t sum_{j<=N} j |c_j^N(t) - c_j^{N'}(t)|`` for consecutive
    sizes N < N'. Passes when D is nonincreasing; ``context["rows"]`` holds
    the ``(N, D(N))`` pairs.
    """
    sizes = [int(s) for s in sizes]
    if len(sizes) < 2:
        raise ConfigError("need at least two truncation sizes")
    if any(b <= a for a, b in zip(sizes, sizes[1:])) or sizes[0] < 1:
        raise ConfigError("truncation sizes must be positive and strictly increasing")
    trajs = [integrate(kernel, ic, n, grid, cfg) for n in sizes]
    rows = []
    for small, big in zip(trajs, trajs[1:]):
        n = small.n
        j = np.arange(1, n + 1)
        dist = np.abs(small.values - big.values[:, :n]) @ j
        rows.append((n, float(dist.max())))
    d = [r[1] for r in rows]
    rise = max((b - a for a, b in zip(d, d[1:])), default=0.0)
    ctx = {"kernel": kernel.spec, "ic": getattr(ic, "spec", None), "sizes": sizes, "rows": rows}
    if isinstance(ic, Geometric):
        ctx["tail_mass"] = [geometric_tail_mass(ic, n) for n in sizes]
    return OracleReport.from_residual("truncation_convergence", max(rise, 0.0), 0.0, **ctx)


@dataclass(frozen=True, eq=False)
class ScalingTable:
    columns: list[str]
    data: np.ndarray

    def column(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]


def scaling_diagnostics(traj: Trajectory, j_max: int) -> ScalingTable:
    """Rows ``t, t*nu, t*nu_odd, t*c_1 .. t*c_jmax`` for constant kernels."""
    oracles.require_constant(traj.kernel, "scaling diagnostics")
    if j_max < 1:
        raise ValueError("j_max must be >= 1")
    jm = min(j_max, traj.n)
    t = traj.times[:, None]
    mom = traj.moments()
    data = np.hstack([t, t * mom[:, [0]], t * mom[:, [2]], t * traj.values[:, :jm]])
    cols = ["t", "t_nu", "t_nu_odd"] + [f"t_c_{j}" for j in range(1, jm + 1)]
    return ScalingTable(cols, data)


def scaling_limit_check(traj: Trajectory, tolerance: float = 5e-3) -> OracleReport:
    """``t nu`` and ``t c_1`` at the final time against their limits (geometric data)."""
    K = oracles.require_constant(traj.kernel, "the scaling limits")
    if K == 0:
        raise PreconditionViolated("a zero kernel has no decay to scale")
    ic = traj.ic
    if not isinstance(ic, Geometric) or ic.A0 == 0:
        raise PreconditionViolated("scaling limits need geometric initial data with A0 > 0")
    c1_lim, nu_lim = oracles.scaling_limits(oracles.SelfSimilarParams(ic.A0, ic.alpha), 1, K)
    t = traj.times[-1] - traj.times[0]
    t_nu = t * traj.values[-1].sum()
    t_c1 = t * traj.values[-1, 0]
    res = max(abs(t_nu - nu_lim) / nu_lim, abs(t_c1 - c1_lim) / c1_lim)
    return OracleReport.from_residual("scaling_limits", res, tolerance,
                                      message=f"t*nu={t_nu:.6g} (limit {nu_lim:g}), t*c_1={t_c1:.6g} (limit {c1_lim:g})",
                                      t=float(t), t_nu=float(t_nu), t_c1=float(t_c1), **_context(traj))


SUITES = ("moments", "support", "oracles", "all")


def _guarded(name, fn, *args, **kwargs) -> list[OracleReport]:
    try:
        out = fn(*args, **kwargs)
    except (KernelMismatch, PreconditionViolated) as exc:
        return [OracleReport.skip(name, str(exc))]
    return out if isinstance(out, list) else [out]


def run_suite(traj: Trajectory, suite: str = "all", threshold: float = 1e-12) -> list[OracleReport]:
    """Run a named group of checks; inapplicable checks come back skipped."""
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r} (choose from {', '.join(SUITES)})")
    reports = []
    if suite in ("moments", "all"):
        reports += moment_residuals(traj)
        reports += monotonicity_checks(traj)
    if suite in ("support", "all"):
        if isinstance(traj.ic, Geometric):
            # full support that decays everywhere: every size eventually
            # drops under any fixed threshold, which says nothing about the law
            reports.append(OracleReport.skip(
                "support_invariance", "geometric data has full support; use explicit or monodisperse data"))
        else:
            reports += _guarded("support_invariance", support_invariance_check, traj, threshold)
    if suite in ("oracles", "all"):
        if isinstance(traj.ic, Monodisperse):
            reports += _guarded("monodisperse", monodisperse_check, traj)
        reports += _guarded("odd_count", odd_count_check, traj)
        reports += _guarded("nu_envelope", nu_envelope_check, traj)
        if isinstance(traj.ic, Geometric):
            reports += _guarded("self_similar", self_similar_check, traj)
    return reports
