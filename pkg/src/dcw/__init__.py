"""Random-field dissipative Curie-Weiss toolkit.

Exact finite-N stochastic simulation of the spin/interaction Markov
process, integration of its macroscopic ODE limit, closed-form stability
analysis, and numerical reconstruction of the (h, beta) phase diagram
including the Hopf curve and the saddle-node locus of limit cycles.
"""

__version__ = "0.1.0"

from .model import (
    BETA_TRICRITICAL,
    H_TRICRITICAL,
    Disorder,
    LienardState,
    MicroState,
    ModelParams,
    OrderState,
    PlanarState,
    beta_c,
)

__all__ = [
    "BETA_TRICRITICAL",
    "H_TRICRITICAL",
    "Disorder",
    "LienardState",
    "MicroState",
    "ModelParams",
    "OrderState",
    "PlanarState",
    "beta_c",
    "__version__",
]
