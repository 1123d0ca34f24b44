"""Truncated concentration vectors, their moments, and initial conditions.

All public indexing is 1-based: ``c_j`` is the concentration of j-clusters,
j = 1..N. Internally the values live in a 0-based numpy array ``c[j-1]``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "ClusterState",
    "Monodisperse",
    "Geometric",
    "Explicit",
    "InitialCondition",
    "TruncationTooSmall",
    "InitialConditionError",
    "moment",
    "nu_odd",
    "support",
    "realize",
    "geometric_tail_mass",
    "parse_ic_spec",
]


class InitialConditionError(ValueError):
    pass


class TruncationTooSmall(InitialConditionError):
    def __init__(self, index: int, n: int):
        self.index, self.n = index, n
        super().__init__(f"initial condition has index {index} but truncation size is {n}")


@dataclass(frozen=True, eq=False)
class ClusterState:
    c: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        arr = np.array(self.c, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("state must be a nonempty 1-d array")
        arr.setflags(write=False)
        object.__setattr__(self, "c", arr)

    @property
    def n(self) -> int:
        return self.c.size

    def __getitem__(self, j: int) -> float:
        """1-based access: ``state[j] == c_j``."""
        if not 1 <= j <= self.n:
            raise IndexError(f"cluster size {j} outside 1..{self.n}")
        return float(self.c[j - 1])

    def moment(self, p: int) -> float:
        return moment(self, p)

    @property
    def nu(self) -> float:
        return moment(self, 0)

    @property
    def mass(self) -> float:
        return moment(self, 1)

    @property
    def nu_odd(self) -> float:
        return nu_odd(self)


def _values(state) -> np.ndarray:
    return state.c if isinstance(state, ClusterState) else np.asarray(state, dtype=float)


def moment(state, p: int) -> float:
    """``sum_j j^p c_j`` for p in {0, 1}."""
    c = _values(state)
    if p == 0:
        return float(c.sum())
    if p == 1:
        return float(np.arange(1, c.size + 1) @ c)
    raise ValueError("only moments 0 and 1 are supported")


def nu_odd(state) -> float:
    """Total concentration of odd-sized clusters, ``c_1 + c_3 + ...``."""
    return float(_values(state)[::2].sum())


def support(state, threshold: float = 0.0) -> set[int]:
    """``{j : c_j > threshold}`` as 1-based sizes."""
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    c = _values(state)
    return {int(j) + 1 for j in np.flatnonzero(c > threshold)}


@dataclass(frozen=True)
class Monodisperse:
    """``c_j(0) = lam * delta_{j,p}``."""

    p: int
    lam: float

    def __post_init__(self):
        if self.p < 1:
            raise InitialConditionError("monodisperse size p must be >= 1")
        if not (np.isfinite(self.lam) and self.lam >= 0):
            raise InitialConditionError("monodisperse concentration must be finite and >= 0")

    @property
    def spec(self):
        return f"mono:{self.p},{self.lam!r}"


@dataclass(frozen=True)
class Geometric:
    """``c_j(0) = A0 * alpha^j``, truncated at the run's N."""

    A0: float
    alpha: float

    def __post_init__(self):
        if not (np.isfinite(self.A0) and self.A0 >= 0):
            raise InitialConditionError("A0 must be finite and >= 0")
        if not 0 <= self.alpha < 1:
            raise InitialConditionError("alpha must lie in [0, 1)")

    @property
    def spec(self):
        return f"geom:{self.A0!r},{self.alpha!r}"


@dataclass(frozen=True)
class Explicit:
    """Finitely many ``(j, value)`` pairs; unspecified sizes start at zero."""

    entries: tuple = ()
    source: str = field(default="", compare=False)

    def __post_init__(self):
        entries = tuple((int(j), float(v)) for j, v in self.entries)
        for j, v in entries:
            if j < 1:
                raise InitialConditionError(f"cluster size must be >= 1, got {j}")
            if not (np.isfinite(v) and v >= 0):
                raise InitialConditionError(f"concentration for size {j} must be finite and >= 0")
        object.__setattr__(self, "entries", entries)

    @property
    def max_index(self) -> int:
        return max((j for j, _ in self.entries), default=0)

    @property
    def spec(self):
        return "explicit:" + (self.source or "<inline>")


InitialCondition = Monodisperse | Geometric | Explicit


def realize(ic: InitialCondition, n: int) -> ClusterState:
    """Materialise ``ic`` as an N-component state at t = 0."""
    if n < 1:
        raise InitialConditionError("truncation size must be >= 1")
    c = np.zeros(n)
    if isinstance(ic, Monodisperse):
        if ic.p > n:
            raise TruncationTooSmall(ic.p, n)
        c[ic.p - 1] = ic.lam
    elif isinstance(ic, Geometric):
        c[:] = ic.A0 * ic.alpha ** np.arange(1, n + 1, dtype=float)
    elif isinstance(ic, Explicit):
        if ic.max_index > n:
            raise TruncationTooSmall(ic.max_index, n)
        for j, v in ic.entries:
            c[j - 1] += v
    else:
        raise TypeError(f"not an initial condition: {ic!r}")
    return ClusterState(c, 0.0)


def geometric_tail_mass(ic: Geometric, n: int) -> float:
    """Mass ``A0 * sum_{j>n} j alpha^j`` dropped by truncating at n."""
    a = ic.alpha
    if a == 0:
        return 0.0
    return ic.A0 * a ** (n + 1) * ((n + 1) - n * a) / (1 - a) ** 2


def read_explicit_csv(path) -> Explicit:
    """Rows ``j,value``; a non-numeric first row is taken as a header."""
    path = Path(path)
    entries = []
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 2:
                raise InitialConditionError(f"{path}:{lineno}: expected 'j,value'")
            try:
                j, v = int(row[0]), float(row[1])
            except ValueError:
                if lineno == 1:
                    continue
                raise InitialConditionError(f"{path}:{lineno}: cannot parse {row!r}") from None
            entries.append((j, v))
    return Explicit(tuple(entries), source=str(path))


def parse_ic_spec(spec: str) -> InitialCondition:
    """``mono:p,lambda``, ``geom:A0,alpha`` or ``explicit:path``."""
    kind, sep, rest = spec.partition(":")
    if not sep:
        raise InitialConditionError(f"initial condition must look like 'kind:args', got {spec!r}")
    kind = kind.strip().lower()
    if kind == "explicit":
        path = Path(rest.strip())
        if not path.is_file():
            raise FileNotFoundError(f"initial-condition file not found: {path}")
        return read_explicit_csv(path)
    parts = [p.strip() for p in rest.split(",")]
    if len(parts) != 2:
        raise InitialConditionError(f"{kind} expects two comma-separated values, got {rest!r}")
    try:
        if kind == "mono":
            return Monodisperse(int(parts[0]), float(parts[1]))
        if kind == "geom":
            return Geometric(float(parts[0]), float(parts[1]))
    except ValueError as exc:
        if isinstance(exc, InitialConditionError):
            raise
        raise InitialConditionError(f"cannot parse {spec!r}: {exc}") from None
    raise InitialConditionError(f"unknown initial-condition kind {kind!r} (use mono, geom or explicit)")
