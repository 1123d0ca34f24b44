"""Closed-form solutions used as ground truth.

Everything except :func:`monodisperse_exact` holds for the constant kernel
``a(j,k) = 1``. For a constant ``K`` the same formulas apply with time
rescaled to ``K t``; pass ``K`` to get that form.
"""

from __future__ import annotations

from dataclasses import dataclass

from .kernel import Constant, Kernel
from .report import KernelMismatch

__all__ = [
    "SelfSimilarParams",
    "monodisperse_exact",
    "self_similar_exact",
    "nu_odd_exact",
    "nu_bounds",
    "scaling_limits",
    "require_constant",
]


@dataclass(frozen=True)
class SelfSimilarParams:
    A0: float
    alpha: float

    def __post_init__(self):
        if not self.A0 > 0:
            raise ValueError("A0 must be positive")
        if not 0 <= self.alpha < 1:
            raise ValueError("alpha must lie in [0, 1)")

    @property
    def beta_rate(self) -> float:
        return self.A0 * self.alpha / (1 - self.alpha**2)


def require_constant(kernel: Kernel | None, what: str) -> float:
    """Return ``K`` for a constant kernel, else raise KernelMismatch."""
    if not isinstance(kernel, Constant):
        name = getattr(kernel, "spec", type(kernel).__name__)
        raise KernelMismatch(f"{what} holds only for constant kernels, not {name}")
    return float(kernel.K)


def monodisperse_exact(lam: float, p: int, a_pp: float, t: float) -> float:
    """``c_p(t)`` for data ``lam * delta_{j,p}``; all other sizes stay 0."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if p < 1:
        raise ValueError("p must be >= 1")
    return lam / (1 + lam * a_pp * t)


def self_similar_exact(params: SelfSimilarParams, j: int, t: float, K: float = 1.0) -> float:
    return params.A0 * params.alpha**j / (1 + params.beta_rate * K * t)


def nu_odd_exact(nu_odd_0: float, t: float, K: float = 1.0) -> float:
    """Odd-size concentration; solves ``d nu_odd/dt = -K nu_odd^2``."""
    if nu_odd_0 < 0:
        raise ValueError("nu_odd(0) must be nonnegative")
    return nu_odd_0 / (1 + nu_odd_0 * K * t)


def nu_bounds(nu_0: float, t: float, K: float = 1.0) -> tuple[float, float]:
    """Lower and upper envelope of the total concentration at time t."""
    if nu_0 < 0:
        raise ValueError("nu(0) must be nonnegative")
    return nu_0 / (1 + nu_0 * K * t), nu_0 / (1 + nu_0 * K * t / 2)


def scaling_limits(params: SelfSimilarParams, j: int, K: float = 1.0) -> tuple[float, float]:
    """Limits of ``t c_j(t)`` and ``t nu(t)`` as t grows. Both are independent of A0."""
    a = params.alpha
    return (1 - a * a) * a ** (j - 1) / K, (1 + a) / K
