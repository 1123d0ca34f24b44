"""Simulation and verification of the cluster-eating coagulation system

    dc_j/dt = sum_k a(j+k,k) c_{j+k} c_k - c_j sum_k a(j,k) c_k

in its exact N-dimensional truncation.
"""

__version__ = "0.1.0"

from .kernel import Constant, Expression, GrowthClass, ProductPower, classify_growth, parse_kernel_spec
from .state import ClusterState, Explicit, Geometric, Monodisperse, parse_ic_spec, realize
from .rhs import eval_fast, eval_naive, make_rhs
from .integrator import IntegratorConfig, Trajectory, decay_check, integrate
from .report import OracleReport

__all__ = [
    "Constant",
    "ProductPower",
    "Expression",
    "GrowthClass",
    "classify_growth",
    "parse_kernel_spec",
    "ClusterState",
    "Monodisperse",
    "Geometric",
    "Explicit",
    "parse_ic_spec",
    "realize",
    "eval_naive",
    "eval_fast",
    "make_rhs",
    "IntegratorConfig",
    "Trajectory",
    "integrate",
    "decay_check",
    "OracleReport",
]
