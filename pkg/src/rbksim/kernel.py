"""Rate coefficients ``a(j,k)`` and their growth classification."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _eft, kernel_parser
from .kernel_parser import KernelAst

__all__ = [
    "Kernel",
    "Constant",
    "ProductPower",
    "Expression",
    "GrowthClass",
    "KernelSpecError",
    "classify_growth",
    "parse_kernel_spec",
]


class KernelSpecError(ValueError):
    pass


class GrowthClass(enum.Enum):
    """Admissibility regimes, tightest first: a <= K, a <= K(jk)^1/2, a <= Kjk."""

    BOUNDED = "Bounded"
    SQRT_PRODUCT = "SqrtProduct"
    LINEAR_PRODUCT = "LinearProduct"
    UNVERIFIED = "Unverified"

    def __str__(self):
        return self.value


class Kernel:
    """Symmetric, nonnegative rate kernel. Subclasses are immutable."""

    separable = False

    def eval(self, j: int, k: int) -> float:
        raise NotImplementedError

    def table(self, n: int) -> np.ndarray:
        """Read-only ``(n, n)`` array with ``table[j-1, k-1] = a(j,k)``."""
        return _cached_table(self, n)

    def _compute_table(self, n: int) -> np.ndarray:
        raise NotImplementedError

    def diagonal(self, n: int) -> np.ndarray:
        return np.diag(self.table(n)).copy()

    @property
    def spec(self) -> str:
        raise NotImplementedError


@lru_cache(maxsize=32)
def _cached_table(kernel: Kernel, n: int) -> np.ndarray:
    t = kernel._compute_table(n)
    t.setflags(write=False)
    return t


@dataclass(frozen=True)
class ProductPower(Kernel):
    """``a(j,k) = K (jk)^beta`` with ``0 <= beta <= 1``."""

    K: float = 1.0
    beta: float = 1.0
    separable = True

    def __post_init__(self):
        if not (np.isfinite(self.K) and self.K >= 0):
            raise KernelSpecError(f"K must be finite and nonnegative, got {self.K}")
        if not 0.0 <= self.beta <= 1.0:
            raise KernelSpecError(f"beta must lie in [0, 1], got {self.beta}")

    def eval(self, j: int, k: int) -> float:
        return self.K * float(j * k) ** self.beta

    def _compute_table(self, n):
        idx = np.arange(1, n + 1, dtype=float)
        return self.K * np.outer(idx, idx) ** self.beta

    def weights(self, n: int) -> np.ndarray:
        """``j^beta`` for j = 1..n, so that ``a(j,k) = K w_j w_k``."""
        return np.arange(1, n + 1, dtype=float) ** self.beta

    def weights_dd(self, n: int):
        """``j^beta`` as an unevaluated double-double ``(hi, lo)``."""
        j = np.arange(1, n + 1, dtype=float)
        hi = j ** self.beta
        if self.beta in (0.0, 1.0):
            lo = np.zeros(n)
        elif self.beta == 0.5:
            # Newton residual of the square root, with hi*hi formed exactly
            p, e = _eft.two_prod(hi, hi)
            lo = ((j - p) - e) / (2.0 * hi)
        else:
            # extended precision where the platform has it, else lo = 0
            ext = np.arange(1, n + 1, dtype=np.longdouble) ** np.longdouble(self.beta)
            lo = (ext - hi.astype(np.longdouble)).astype(float)
        return hi, lo

    @property
    def spec(self):
        return f"product:{self.K!r},{self.beta!r}"


@dataclass(frozen=True)
class Constant(ProductPower):
    """``a(j,k) = K``."""

    K: float = 1.0
    beta: float = field(default=0.0, init=False)

    def eval(self, j: int, k: int) -> float:
        return float(self.K)

    def _compute_table(self, n):
        return np.full((n, n), float(self.K))

    def weights(self, n):
        return np.ones(n)

    def weights_dd(self, n):
        return np.ones(n), np.zeros(n)

    @property
    def spec(self):
        return f"const:{self.K!r}"


@dataclass(frozen=True)
class Expression(Kernel):
    """Kernel given by a parsed expression; see :mod:`rbksim.kernel_parser`."""

    ast: KernelAst
    source: str = field(default="", compare=False)

    def eval(self, j: int, k: int) -> float:
        with np.errstate(all="ignore"):
            return float(kernel_parser.evaluate(self.ast, float(j), float(k)))

    def _compute_table(self, n):
        table = kernel_parser.kernel_table(self.ast, n)
        # the symmetry/sign check also covers truncations larger than the
        # validation grid
        kernel_parser.check_table(table)
        return table

    @property
    def spec(self):
        return "expr:" + (self.source or kernel_parser.to_source(self.ast))


def _dominated(ratio: np.ndarray, limit: int) -> bool:
    # the bound "holds on the grid" when the sup of a/(jk)^b over [1..L]^2 is
    # already reached on the inner block [1..L/2]^2
    half = max(1, limit // 2)
    outer = ratio.max()
    inner = ratio[:half, :half].max()
    return outer <= inner * (1 + 1e-12) + 1e-300


def classify_growth(kernel: Kernel, sample_limit: int = 64) -> GrowthClass:
    """Tightest growth regime satisfied by ``kernel``.

    Built-in forms are classified exactly from their parameters. Expression
    kernels are sampled on ``[1..sample_limit]^2``; a class is granted when
    ``a(j,k)/(jk)^b`` does not grow towards the edge of the grid.
    """
    if sample_limit < 2:
        raise ValueError("sample_limit must be at least 2")
    if isinstance(kernel, ProductPower):
        if kernel.beta == 0.0 or kernel.K == 0.0:
            return GrowthClass.BOUNDED
        if kernel.beta <= 0.5:
            return GrowthClass.SQRT_PRODUCT
        return GrowthClass.LINEAR_PRODUCT
    table = kernel.table(sample_limit)
    idx = np.arange(1, sample_limit + 1, dtype=float)
    jk = np.outer(idx, idx)
    for beta, cls in ((0.0, GrowthClass.BOUNDED),
                      (0.5, GrowthClass.SQRT_PRODUCT),
                      (1.0, GrowthClass.LINEAR_PRODUCT)):
        if _dominated(table / jk**beta, sample_limit):
            return cls
    return GrowthClass.UNVERIFIED


def _floats(text: str, count: int, what: str):
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != count:
        raise KernelSpecError(f"{what} expects {count} comma-separated number(s), got {text!r}")
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise KernelSpecError(f"{what}: not a number in {text!r}") from None


def parse_kernel_spec(spec: str, grid: int = 64) -> Kernel:
    """Build a kernel from ``const:K``, ``product:K,beta`` or ``expr:<expression>``.

    Expression kernels are validated on ``[1..grid]^2``; parser and
    validation errors propagate unchanged.
    """
    kind, sep, rest = spec.partition(":")
    if not sep:
        raise KernelSpecError(f"kernel spec must look like 'kind:args', got {spec!r}")
    kind = kind.strip().lower()
    if kind == "const":
        (K,) = _floats(rest, 1, "const")
        return Constant(K)
    if kind == "product":
        K, beta = _floats(rest, 2, "product")
        return ProductPower(K, beta)
    if kind == "expr":
        ast = kernel_parser.parse(rest)
        return kernel_parser.validate_kernel(ast, grid, source=rest.strip())
    raise KernelSpecError(f"unknown kernel kind {kind!r} (use const, product or expr)")
