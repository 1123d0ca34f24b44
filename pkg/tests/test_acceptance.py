"""Acceptance criteria, one test per criterion.

Each test prints a single PASS/FAIL line with the measured value and the
tolerance; the lines are also collected in the terminal summary.
"""

import time

import numpy as np
import pytest

from rbksim import diagnostics as dg
from rbksim.integrator import decay_check, integrate
from rbksim.kernel import Constant, ProductPower
from rbksim.oracles import SelfSimilarParams, monodisperse_exact, nu_odd_exact, self_similar_exact
from rbksim.rhs import eval_fast, eval_naive
from rbksim.state import Explicit, Geometric, Monodisperse

K1 = Constant(1)
LOG_GRID = np.concatenate([[0.0], np.geomspace(1e-3, 1e3, 61)])


def random_explicit(rng, n, max_support):
    size = int(rng.integers(1, max_support + 1))
    idx = rng.choice(np.arange(1, n + 1), size, replace=False)
    return Explicit(tuple((int(j), float(rng.uniform(0, 1))) for j in idx))


@pytest.fixture(scope="module")
def mono_run():
    integrate(K1, Monodisperse(1, 1.0), 8, [0, 1e-3])  # warm caches outside the timing
    t0 = time.perf_counter()
    traj = integrate(K1, Monodisperse(1, 1.0), 8, np.linspace(0, 10, 101))
    return traj, time.perf_counter() - t0


@pytest.fixture(scope="module")
def geom_run():
    t0 = time.perf_counter()
    traj = integrate(K1, Geometric(1.0, 0.5), 64, LOG_GRID)
    return traj, time.perf_counter() - t0


@pytest.fixture(scope="module")
def random_runs():
    # mixed kernels and data for the moment identities
    rng = np.random.default_rng(606)
    kernels = [K1, ProductPower(1, 0.5), ProductPower(1, 1), Constant(2.0)]
    runs = []
    for i in range(20):
        ic = random_explicit(rng, 24, 6) if i % 2 == 0 else Geometric(float(rng.uniform(0.2, 2)),
                                                                    float(rng.uniform(0.1, 0.7)))
        runs.append(integrate(kernels[i % 4], ic, 24, np.linspace(0, 3, 7)))
    return runs


@pytest.fixture(scope="module")
def envelope_runs():
    rng = np.random.default_rng(505)
    grid = np.concatenate([np.linspace(0, 1, 11), np.linspace(2, 50, 25)])
    return [integrate(K1, random_explicit(rng, 32, 10), 32, grid) for _ in range(100)]


@pytest.fixture(scope="module")
def support_runs():
    return {P: integrate(K1, Explicit(tuple((p, 1.0) for p in P)), 12, [0, 0.1, 1, 10])
            for P in ((6, 10), (2, 3), (3,))}


def test_01_monodisperse_exactness(mono_run, record):
    traj, elapsed = mono_run
    exact = np.array([monodisperse_exact(1.0, 1, 1.0, t) for t in traj.times])
    err = float(np.max(np.abs(traj.values[:, 0] - exact) / exact))
    zeros = not np.any(traj.values[:, 1:])
    ok = err <= 1e-8 and zeros and elapsed < 1.0
    record(1, ok, f"monodisperse max rel err {err:.2e} (tol 1e-8), off-index bitwise 0: {zeros}, "
                  f"runtime {elapsed:.3f}s (< 1s)")
    assert ok


def test_02_self_similar_family(geom_run, record):
    traj, elapsed = geom_run
    p = SelfSimilarParams(1.0, 0.5)
    exact = np.array([[self_similar_exact(p, j, t) for j in range(1, 21)] for t in traj.times])
    err = float(np.max(np.abs(traj.values[:, :20] - exact) / exact))
    ok = err <= 1e-6 and elapsed < 10.0
    record(2, ok, f"self-similar j<=20 max rel err {err:.2e} (tol 1e-6), runtime {elapsed:.2f}s (< 10s)")
    assert ok


def test_03_scaling_limits(geom_run, record):
    traj, _ = geom_run
    t = traj.times[-1]
    t_nu = t * traj.values[-1].sum()
    t_c1 = t * traj.values[-1, 0]
    e_nu, e_c1 = abs(t_nu - 1.5) / 1.5, abs(t_c1 - 0.75) / 0.75
    ok = e_nu <= 5e-3 and e_c1 <= 5e-3
    record(3, ok, f"t={t:g}: t*nu={t_nu:.6f} ({e_nu:.2%} from 1.5), t*c_1={t_c1:.6f} ({e_c1:.2%} from 0.75), "
                  f"tol 0.5%")
    assert ok


def test_04_odd_count_law(record):
    traj = integrate(K1, Geometric(1.0, 0.5), 64, np.linspace(0, 100, 201))
    odd = traj.values[:, ::2].sum(axis=1)
    exact = np.array([nu_odd_exact(2 / 3, t) for t in traj.times])
    err = float(np.max(np.abs(odd - exact) / exact))
    ok = err <= 1e-6 and abs(odd[0] - 2 / 3) < 1e-15
    record(4, ok, f"nu_odd max rel err {err:.2e} on [0,100] (tol 1e-6)")
    assert ok


def test_05_nu_envelope(envelope_runs, record):
    reps = [dg.nu_envelope_check(tr, slack=1e-6) for tr in envelope_runs]
    worst = max(r.residual for r in reps)
    ok = all(r.passed for r in reps)
    record(5, ok, f"{len(reps)} random runs, worst excursion outside envelope {worst:.2e} (slack 1e-6)")
    assert ok


def test_06_moment_identities(mono_run, geom_run, random_runs, record):
    trajs = [mono_run[0], geom_run[0]] + list(random_runs)
    worst = 0.0
    ok = True
    for tr in trajs:
        for rep in dg.moment_residuals(tr):
            worst = max(worst, rep.residual)
            ok &= rep.passed
    record(6, ok, f"{len(trajs)} runs x g in {{One, Identity, OddIndicator}}, worst residual {worst:.2e} (tol 1e-6)")
    assert ok


def test_07_support_gcd_law(support_runs, record):
    expected = {(6, 10): [2, 4, 6, 8, 10], (2, 3): [1, 2, 3], (3,): [3]}
    ok = True
    parts = []
    for P, traj in support_runs.items():
        rep = dg.support_invariance_check(traj, threshold=1e-12)
        observed = [sorted(int(j) + 1 for j in np.flatnonzero(row)) for row in traj.values[1:]]
        good = rep.passed and all(o == expected[P] for o in observed)
        ok &= good
        parts.append(f"P={set(P)} -> {set(expected[P])} {'ok' if good else 'MISMATCH'}")
    record(7, ok, "; ".join(parts) + " at t in {0.1,1,10}, threshold 1e-12")
    assert ok


def test_08_monotonicity(mono_run, geom_run, random_runs, envelope_runs, support_runs, record):
    trajs = [mono_run[0], geom_run[0], *random_runs, *envelope_runs, *support_runs.values()]
    worst = 0.0
    ok = True
    for tr in trajs:
        for rep in dg.monotonicity_checks(tr, slack=1e-9):
            worst = max(worst, rep.residual)
            ok &= rep.passed
    record(8, ok, f"{len(trajs)} runs, largest relative rise of nu or mass {worst:.2e} (slack 1e-9)")
    assert ok


def test_09_rhs_equivalence(record):
    rng = np.random.default_rng(909)
    t0 = time.perf_counter()
    worst = 0.0
    worst_plain = 0.0
    for kernel in (K1, ProductPower(1, 0.5), ProductPower(1, 1)):
        for n in (1, 2, 7, 64, 257, 1024):
            for _ in range(100):
                c = rng.random(n)
                fast = eval_fast(kernel, c).d
                ref = eval_naive(kernel, c, compensated=True).d
                worst = max(worst, float(np.max(np.abs(fast - ref) / (1 + np.abs(ref)))))
                if n == 1024:
                    plain = eval_naive(kernel, c).d
                    worst_plain = max(worst_plain, float(np.max(np.abs(fast - plain) / (1 + np.abs(plain)))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 30
    record(9, ok, f"fast vs naive (compensated accumulation) max |diff|/(1+|naive|) {worst:.2e} (tol 1e-12), "
                  f"runtime {elapsed:.1f}s (< 30s); plain-summation naive at N=1024 differs by {worst_plain:.1e}")
    assert ok


def test_10_long_time_decay(record):
    rng = np.random.default_rng(1010)
    ics = [random_explicit(rng, 32, 10) for _ in range(10)] + [Geometric(1.0, 0.5), Geometric(3.0, 0.9)]
    peaks = []
    ok = True
    for ic in ics:
        rep = decay_check(integrate(K1, ic, 32, [0, 1, 100, 1e4]), 1e-2)
        peaks.append(rep.residual)
        ok &= rep.passed
    record(10, ok, f"{len(ics)} runs to t=1e4, largest max_j c_j {max(peaks):.2e} (< 1e-2)")
    assert ok


def test_11_truncation_convergence(record):
    rep = dg.truncation_convergence(K1, Geometric(1.0, 0.9), [32, 64, 128], np.linspace(0, 10, 21))
    d = [row[1] for row in rep.context["rows"]]
    ok = all(b < a for a, b in zip(d, d[1:]))
    record(11, ok, "D(N) " + ", ".join(f"D({n})={v:.3e}" for n, v in rep.context["rows"]) + " strictly decreasing")
    assert ok
