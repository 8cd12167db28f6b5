"""Closed-form local analysis: linearization and eigenvalues of the planar
flow, the Hopf curve, first and second Lyapunov coefficients, and the study
of the fixed-point map Gamma(lambda) = beta/3 * [tanh(lambda+h)+tanh(lambda-h)]
that organizes the global structure (inflection point, zero counts, the
tangency curve beta_T)."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from .model import (
    BETA_TRICRITICAL,
    H_TRICRITICAL,
    ModelParams,
    PlanarState,
    beta_c,
    g_lienard,
    tanh_pair_sum,
    vector_field_planar,
)

_ZERO_MERGE_TOL = 1e-8


class Regime(Enum):
    Stable = "stable"
    Critical = "critical"
    Unstable = "unstable"


@dataclass(frozen=True)
class SpectralInfo:
    k_plus: complex
    k_minus: complex
    beta_c: float
    regime: Regime


@dataclass(frozen=True)
class GammaAnalysis:
    """Structure of the positive fixed points of Gamma.

    lambda_I is the positive inflection point (None below the tricritical
    field intensity); positive_zeros are the positive solutions of
    Gamma(lambda) = lambda; tangent is set when two zeros merged within the
    discrimination tolerance."""

    lambda_I: float | None
    positive_zeros: list[float]
    zero_count: int
    beta_T: float | None
    tangent: bool = False


def linearization_matrix(p: ModelParams) -> np.ndarray:
    """Jacobian of the planar field at the origin, in closed form."""
    s2 = 1.0 / math.cosh(p.h) ** 2
    return np.array([
        [-2.0, 2.0 * s2],
        [-2.0 * p.beta, 2.0 * p.beta * s2 - 1.0],
    ])


def numeric_jacobian(p: ModelParams, s: PlanarState = PlanarState(0.0, 0.0),
                     eps: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of the planar field."""
    x0 = s.as_array()
    jac = np.empty((2, 2))
    for j in range(2):
        dx = np.zeros(2)
        dx[j] = eps
        fp = vector_field_planar(PlanarState(*(x0 + dx)), p)
        fm = vector_field_planar(PlanarState(*(x0 - dx)), p)
        jac[:, j] = (fp - fm) / (2.0 * eps)
    return jac


def eigenvalues(p: ModelParams) -> SpectralInfo:
    """Spectrum of the linearization at the origin.

    k_pm = beta/cosh^2(h) - 3/2 +- sqrt((beta/cosh^2(h) - 3/2)^2 - 2);
    the real parts change sign exactly at beta_c(h) = (3/2)cosh^2(h)."""
    a = p.beta / math.cosh(p.h) ** 2 - 1.5
    root = cmath.sqrt(complex(a * a - 2.0))
    k_plus = a + root
    k_minus = a - root
    bc = p.beta_c
    if abs(p.beta - bc) <= 1e-12 * max(1.0, bc):
        regime = Regime.Critical
    elif p.beta < bc:
        regime = Regime.Stable
    else:
        regime = Regime.Unstable
    return SpectralInfo(k_plus=k_plus, k_minus=k_minus, beta_c=bc, regime=regime)


def first_lyapunov(h: float) -> float:
    """First Lyapunov coefficient on the Hopf curve beta = beta_c(h).

    Positive means the Hopf bifurcation is subcritical; the sign flips at
    the tricritical field intensity where cosh(2h) = 2."""
    if h < 0:
        raise ValueError("h must be nonnegative")
    c2 = math.cosh(2.0 * h)
    return beta_c(h) * (c2 - 2.0) / (4.0 * c2**4)


def tricritical_h_bisect(tol: float = 1e-10) -> float:
    """Locate the sign change of first_lyapunov in h by bisection."""
    lo, hi = 0.0, 2.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if first_lyapunov(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# --- Taylor machinery for the restoring function g ------------------------

def _tanh_derivative_polys(order: int) -> list[np.ndarray]:
    """Coefficient arrays (in t = tanh) of d^n/dx^n tanh(x), n = 0..order.

    Uses (d/dx) P(t) = P'(t) * (1 - t^2)."""
    polys = [np.array([0.0, 1.0])]
    for _ in range(order):
        prev = polys[-1]
        dp = np.polynomial.polynomial.polyder(prev)
        polys.append(np.polynomial.polynomial.polymul(dp, np.array([1.0, 0.0, -1.0])))
    return polys


def g_taylor_coefficients(p: ModelParams, order: int = 5) -> dict[int, float]:
    """Taylor coefficients of g(lambda) at lambda = 0 up to the given order.

    g is odd, so even coefficients vanish identically; odd ones come from
    exact derivatives of tanh evaluated at h."""
    polys = _tanh_derivative_polys(order)
    th = math.tanh(p.h)
    coeffs = {}
    fact = 1.0
    for n in range(1, order + 1):
        fact *= n
        if n % 2 == 0:
            coeffs[n] = 0.0
            continue
        # tanh^(n) is an even polynomial in t for odd n, so the +h and -h
        # contributions add up to twice the value at h.
        fn = 2.0 * float(np.polynomial.polynomial.polyval(th, polys[n]))
        c = -p.beta * fn / fact
        if n == 1:
            c += 3.0
        coeffs[n] = c
    return coeffs


def g_quintic_coefficient_fd(p: ModelParams, step: float = 0.05) -> float:
    """Finite-difference estimate of the degree-5 Taylor coefficient of g,
    via a central 7-point stencil for the fifth derivative (Richardson
    refined once); cross-check for the exact series route."""
    def fifth(dh):
        lam = dh * np.array([-3.0, -2.0, -1.0, 1.0, 2.0, 3.0])
        g = np.array([g_lienard(x, p) for x in lam])
        w = np.array([-1.0, 4.0, -5.0, 5.0, -4.0, 1.0])
        return float(np.dot(w, g)) / (2.0 * dh**5)
    f1, f2 = fifth(step), fifth(step / 2.0)
    # leading error is O(step^2)
    return (4.0 * f2 - f1) / 3.0 / 120.0


def second_lyapunov_tricritical() -> float:
    """Second Lyapunov coefficient at the tricritical point.

    Pipeline: the normal form at the tricritical parameters is
    xdot = -sqrt(2)*lambda, lambdadot = sqrt(2)*x + c5*lambda^5 + ...,
    with every lower-order nonlinear coefficient vanishing (even orders by
    oddness, the cubic because the first Lyapunov coefficient is zero).
    The only nonzero multilinear term of degree 5 then determines the
    coefficient via the resonant quintic average."""
    _, _, ell2 = _tricritical_quintic_data()
    return ell2


def _tricritical_quintic_data() -> tuple[float, complex, float]:
    p = ModelParams(beta=BETA_TRICRITICAL, h=H_TRICRITICAL)
    coeffs = g_taylor_coefficients(p, order=5)
    if abs(coeffs[1]) > 1e-9 or abs(coeffs[3]) > 1e-9:
        raise RuntimeError(
            f"linear/cubic normal-form coefficients do not vanish at the "
            f"tricritical point: {coeffs[1]}, {coeffs[3]}"
        )
    if abs(coeffs[2]) > 0.0 or abs(coeffs[4]) > 0.0:
        raise RuntimeError("even coefficients must vanish by oddness")
    c5 = -coeffs[5]  # coefficient of lambda^5 in the lambdadot equation
    # Eigvector of the rotation [[0, -sqrt2], [sqrt2, 0]] for +i*sqrt2.
    q2 = -1j / math.sqrt(2.0)
    p_vec2 = q2
    h32_2 = c5 * q2**3 * np.conj(q2) ** 2
    h32 = complex(h32_2)
    ell2 = float((np.conj(p_vec2) * h32).real / 12.0)
    return c5, h32, ell2


# --- Study of Gamma: inflection, fixed points, tangency curve -------------

def gamma(lam: float, p: ModelParams) -> float:
    return p.beta / 3.0 * tanh_pair_sum(lam, p.h)


def gamma_prime(lam: float, p: ModelParams) -> float:
    return p.beta / 3.0 * (
        1.0 / math.cosh(lam + p.h) ** 2 + 1.0 / math.cosh(lam - p.h) ** 2
    )


def lambda_inflection(h: float) -> float | None:
    """Positive inflection point of Gamma; None below the tricritical h.

    At the tricritical intensity the inflection sits exactly at 0; the
    arccosh argument equals 1 there only up to roundoff, so the threshold
    is taken on h itself."""
    if h < H_TRICRITICAL:
        return None
    ratio = (math.cosh(4.0 * h) - 3.0) / (2.0 * math.cosh(2.0 * h))
    if ratio <= 1.0:
        return 0.0
    return 0.5 * math.acosh(ratio)


def _diag_gap(lam: float, p: ModelParams) -> float:
    return gamma(lam, p) - lam


def analyze_gamma(p: ModelParams) -> GammaAnalysis:
    """Count and locate the positive fixed points of Gamma.

    Gamma changes curvature at most once (at lambda_I), so the sign pattern
    of Gamma' - 1 determines guaranteed brackets for every zero; brentq on
    those brackets to 1e-12.  Zeros closer than the discrimination tolerance
    are merged and reported as a tangency."""
    lam_i = lambda_inflection(p.h)
    lam_max = 2.0 * p.beta / 3.0 + 1.0  # beyond this Gamma < lambda
    slope0 = gamma_prime(0.0, p)

    zeros: list[float] = []
    tangent = False

    def crossing_of_slope(lo: float, hi: float) -> float:
        return brentq(lambda x: gamma_prime(x, p) - 1.0, lo, hi, xtol=1e-13)

    if lam_i is None or lam_i == 0.0:
        # concave on (0, inf): at most one positive zero, present iff the
        # slope at the origin exceeds 1 (beta > beta_c)
        if slope0 > 1.0:
            a = crossing_of_slope(0.0, _slope_below_one(p, max(lam_i or 0.0, 1e-3)))
            zeros.append(brentq(lambda x: _diag_gap(x, p), a, lam_max, xtol=1e-13))
    else:
        slope_peak = gamma_prime(lam_i, p)
        if slope0 > 1.0:
            # increasing at 0: single zero beyond the far slope-1 point
            b = crossing_of_slope(lam_i, _slope_below_one(p, lam_i))
            zeros.append(brentq(lambda x: _diag_gap(x, p), b, lam_max, xtol=1e-13))
        elif slope_peak > 1.0:
            a = crossing_of_slope(0.0, lam_i)
            b = crossing_of_slope(lam_i, _slope_below_one(p, lam_i))
            gap_b = _diag_gap(b, p)
            if gap_b > 0.0:
                z1 = brentq(lambda x: _diag_gap(x, p), a, b, xtol=1e-13)
                z2 = brentq(lambda x: _diag_gap(x, p), b, lam_max, xtol=1e-13)
                if z2 - z1 < _ZERO_MERGE_TOL:
                    zeros.append(0.5 * (z1 + z2))
                    tangent = True
                else:
                    zeros.extend([z1, z2])
            elif gap_b == 0.0:
                zeros.append(b)
                tangent = True
        # slope_peak <= 1: Gamma stays below the diagonal, no positive zeros

    bt = beta_T(p.h) if p.h > H_TRICRITICAL else None
    return GammaAnalysis(
        lambda_I=lam_i,
        positive_zeros=zeros,
        zero_count=len(zeros),
        beta_T=bt,
        tangent=tangent,
    )


def _slope_below_one(p: ModelParams, start: float) -> float:
    """A point to the right of start where Gamma' < 1 (exists since
    Gamma' -> 0)."""
    x = max(start, 1.0)
    while gamma_prime(x, p) >= 1.0:
        x *= 2.0
        if x > 1e6:
            raise RuntimeError("failed to bracket the slope-1 crossing")
    return x


def _beta_tangent(lam: float, h: float) -> float:
    """The beta for which Gamma has slope exactly 1 at lam."""
    return 3.0 / (1.0 / math.cosh(lam + h) ** 2 + 1.0 / math.cosh(lam - h) ** 2)


def beta_T(h: float) -> float:
    """Tangency curve separating zero from two positive fixed points.

    Eliminates beta via Gamma'(lam) = 1, then solves the scalar tangency
    condition Gamma(lam) = lam for lam > 0.  Defined for h above the
    tricritical intensity; always <= beta_c(h)."""
    if h <= H_TRICRITICAL:
        raise ValueError("beta_T is defined only for h above the tricritical value")

    def tangency_gap(lam: float) -> float:
        bp = ModelParams(beta=_beta_tangent(lam, h), h=h)
        return _diag_gap(lam, bp)

    # The gap is negative on (0, lam_star) and turns positive at the
    # tangency; near 0 it is O(lam^3) and drowns in roundoff, so anchor the
    # bracket at the most negative grid point and walk right.
    grid = np.concatenate([
        np.geomspace(1e-5, 1e-2, 120),
        np.linspace(1e-2, 2.0 * h + 5.0, 3000),
    ])
    vals = np.array([tangency_gap(x) for x in grid])
    trough = int(np.argmin(vals))
    if vals[trough] >= 0.0:
        raise RuntimeError(f"no tangency bracket found for h={h}")
    for i in range(trough + 1, len(grid)):
        if vals[i] >= 0.0:
            lam_star = brentq(tangency_gap, grid[i - 1], grid[i], xtol=1e-13)
            return _beta_tangent(lam_star, h)
    raise RuntimeError(f"no tangency bracket found for h={h}")


def stability_report(p: ModelParams) -> dict:
    """JSON-serializable report combining spectrum, Lyapunov coefficient,
    and the Gamma analysis at beta, h."""
    info = eigenvalues(p)
    ga = analyze_gamma(p)
    return {
        "h": p.h,
        "beta": p.beta,
        "beta_c": info.beta_c,
        "eigs": {
            "k_plus": [info.k_plus.real, info.k_plus.imag],
            "k_minus": [info.k_minus.real, info.k_minus.imag],
            "regime": info.regime.value,
        },
        "ell1": first_lyapunov(p.h),
        "gamma": {
            "lambda_I": ga.lambda_I,
            "positive_zeros": ga.positive_zeros,
            "zero_count": ga.zero_count,
            "beta_T": ga.beta_T,
            "tangent": ga.tangent,
        },
    }
