"""Core model definitions: parameters, state types, vector fields and jump rates.

The model is a mean-field spin system with a dissipative interaction
variable lambda and a quenched binary random field of intensity h.  Every
other module consumes the closed forms defined here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Tricritical field intensity: cosh(2*h_tc) = 2.
H_TRICRITICAL = 0.5 * math.log(2.0 + math.sqrt(3.0))
BETA_TRICRITICAL = 9.0 / 4.0


def beta_c(h: float) -> float:
    """Critical inverse temperature where the origin loses linear stability."""
    return 1.5 * math.cosh(h) ** 2


@dataclass(frozen=True)
class ModelParams:
    """Inverse temperature beta >= 0 and field intensity h >= 0."""

    beta: float
    h: float

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")
        if self.h < 0:
            raise ValueError(f"h must be nonnegative, got {self.h}")

    @property
    def beta_c(self) -> float:
        return beta_c(self.h)


@dataclass(frozen=True)
class Disorder:
    """A quenched realization of the binary site fields.

    Regeneration from (n, seed) is bit-identical; see
    :func:`dcw.microsim.sample_disorder`.
    """

    eta: np.ndarray
    n: int
    seed: int

    def __post_init__(self):
        eta = np.asarray(self.eta, dtype=np.int8)
        if eta.shape != (self.n,):
            raise ValueError(f"eta has shape {eta.shape}, expected ({self.n},)")
        if not np.all(np.abs(eta) == 1):
            raise ValueError("eta entries must be exactly -1 or +1")
        object.__setattr__(self, "eta", eta)

    @property
    def eta_bar(self) -> float:
        return float(np.mean(self.eta))


@dataclass(frozen=True)
class MicroState:
    """Full spin configuration plus the interaction variable at time t."""

    sigma: np.ndarray
    lam: float
    t: float = 0.0

    def __post_init__(self):
        sigma = np.asarray(self.sigma, dtype=np.int8)
        if not np.all(np.abs(sigma) == 1):
            raise ValueError("sigma entries must be exactly -1 or +1")
        object.__setattr__(self, "sigma", sigma)

    def order_state(self, disorder: Disorder) -> "OrderState":
        if len(self.sigma) != disorder.n:
            raise ValueError("sigma / disorder length mismatch")
        m = float(np.mean(self.sigma))
        mse = float(np.mean(self.sigma * disorder.eta))
        return OrderState(m, mse, self.lam, eta_bar=disorder.eta_bar)


@dataclass(frozen=True)
class OrderState:
    """The autonomous order-parameter triple (m_sigma, m_sigma_eta, lambda).

    eta_bar is auxiliary bookkeeping needed by the finite-N jump rates; the
    macroscopic limit sets it to zero.
    """

    m_sigma: float
    m_sigma_eta: float
    lam: float
    eta_bar: float = 0.0

    def __post_init__(self):
        if abs(self.m_sigma) > 1 + 1e-12 or abs(self.m_sigma_eta) > 1 + 1e-12:
            raise ValueError("magnetizations must lie in [-1, 1]")

    def as_array(self) -> np.ndarray:
        return np.array([self.m_sigma, self.m_sigma_eta, self.lam])


@dataclass(frozen=True)
class PlanarState:
    """Reduced planar state (m_sigma, lambda)."""

    m_sigma: float
    lam: float

    def as_array(self) -> np.ndarray:
        return np.array([self.m_sigma, self.lam])


@dataclass(frozen=True)
class LienardState:
    """Lienard coordinates (y, lambda), y = 2(lambda - beta*m_sigma)."""

    y: float
    lam: float

    def as_array(self) -> np.ndarray:
        return np.array([self.y, self.lam])


def planar_to_lienard(s: PlanarState, p: ModelParams) -> LienardState:
    return LienardState(2.0 * (s.lam - p.beta * s.m_sigma), s.lam)


def lienard_to_planar(s: LienardState, p: ModelParams) -> PlanarState:
    return PlanarState((s.lam - 0.5 * s.y) / p.beta, s.lam)


def tanh_pair_sum(lam: float, h: float) -> float:
    """tanh(lam + h) + tanh(lam - h); odd in lam."""
    return math.tanh(lam + h) + math.tanh(lam - h)


def tanh_pair_diff(lam: float, h: float) -> float:
    """tanh(lam + h) - tanh(lam - h); even in lam."""
    return math.tanh(lam + h) - math.tanh(lam - h)


def vector_field_3d(s: OrderState, p: ModelParams) -> np.ndarray:
    """Velocity of the macroscopic order-parameter flow at state s."""
    fsum = tanh_pair_sum(s.lam, p.h)
    fdiff = tanh_pair_diff(s.lam, p.h)
    dm = -2.0 * s.m_sigma + fsum
    dmse = -2.0 * s.m_sigma_eta + fdiff
    dlam = -s.lam + p.beta * dm
    return np.array([dm, dmse, dlam])


def vector_field_planar(s: PlanarState, p: ModelParams) -> np.ndarray:
    """Velocity of the reduced planar flow; the m_sigma_eta coordinate never
    feeds back, so this is the exact projection of the 3-D field."""
    fsum = tanh_pair_sum(s.lam, p.h)
    dm = -2.0 * s.m_sigma + fsum
    return np.array([dm, -s.lam + p.beta * dm])


def g_lienard(lam: float, p: ModelParams) -> float:
    """Restoring function of the Lienard form: 3*lam - beta*[tanh(lam+h)+tanh(lam-h)]."""
    return 3.0 * lam - p.beta * tanh_pair_sum(lam, p.h)


def vector_field_lienard(s: LienardState, p: ModelParams) -> np.ndarray:
    return np.array([-2.0 * s.lam, s.y - g_lienard(s.lam, p)])


def pair_counts(s: OrderState, n: int) -> np.ndarray:
    """Sizes of the four (sigma=j, eta=k) sub-populations as a 2x2 array.

    Index [a, b] holds the count for j = (+1, -1)[a], k = (+1, -1)[b].
    Counts must be nonnegative integers up to rounding tolerance 1e-9*n.
    """
    counts = np.empty((2, 2))
    for a, j in enumerate((1, -1)):
        for b, k in enumerate((1, -1)):
            counts[a, b] = 0.25 * n * (
                1.0 + k * s.eta_bar + j * s.m_sigma + j * k * s.m_sigma_eta
            )
    rounded = np.rint(counts)
    if np.any(rounded < 0) or np.any(np.abs(counts - rounded) > 1e-9 * n):
        raise ValueError(
            f"inconsistent bookkeeping: implied pair counts {counts.tolist()} "
            "are not nonnegative integers"
        )
    return rounded


def flip_rate_factor(j: int, k: int, lam: float, h: float) -> float:
    """Per-spin flip rate 1 - j*tanh(lam + k*h) for the (sigma=j, eta=k) class.

    Always in [0, 2]; this caps the total jump rate at 2N (thinning bound).
    """
    return 1.0 - j * math.tanh(lam + k * h)


def pair_rate(j: int, k: int, s: OrderState, p: ModelParams, n: int) -> float:
    """Aggregate flip rate of the (sigma=j, eta=k) sub-population."""
    if j not in (1, -1) or k not in (1, -1):
        raise ValueError("j and k must be +1 or -1")
    counts = pair_counts(s, n)
    c = counts[(1 - j) // 2, (1 - k) // 2]
    return c * flip_rate_factor(j, k, s.lam, p.h)
