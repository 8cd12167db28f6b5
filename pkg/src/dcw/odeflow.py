"""Deterministic integration of the macroscopic flow in its three coordinate
systems, with Poincare-section event detection and backward-time integration.

The integrator is an embedded 5(4) adaptive Runge-Kutta pair with dense
output (scipy's RK45).  Section crossings are localized on the dense output
and Newton-polished to |lambda| < abs_tol, since they feed bifurcation
bisection downstream and must be far more accurate than its tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.integrate import solve_ivp

from .model import (
    LienardState,
    ModelParams,
    OrderState,
    PlanarState,
    g_lienard,
    tanh_pair_diff,
    tanh_pair_sum,
)


class SystemKind(Enum):
    Full3D = "full3d"
    Planar = "planar"
    Lienard = "lienard"


class Direction(Enum):
    Forward = 1
    Backward = -1


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = np.inf
    direction: Direction = Direction.Forward

    def __post_init__(self):
        for tol in (self.rel_tol, self.abs_tol):
            if not 0 < tol <= 1e-2:
                raise ValueError(f"tolerance {tol} outside (0, 1e-2]")


@dataclass(frozen=True)
class FlowResult:
    """Dense ODE solution sampled on a regular grid.

    states has one row per sample; sol is the dense interpolant (callable
    t -> state).  For Backward runs, t parametrizes the reversed-time flow.
    """

    times: np.ndarray
    states: np.ndarray
    system: SystemKind
    params: ModelParams
    sol: object = field(repr=False, compare=False, default=None)

    def to_csv(self, path) -> None:
        cols = {
            SystemKind.Full3D: "m_sigma,m_sigma_eta,lambda",
            SystemKind.Planar: "m_sigma,lambda",
            SystemKind.Lienard: "y,lambda",
        }[self.system]
        with open(path, "w") as fh:
            fh.write(f"t,{cols}\n")
            for t, row in zip(self.times, self.states):
                fh.write(f"{t:.12g}," + ",".join(f"{v:.12g}" for v in row) + "\n")


@dataclass(frozen=True)
class SectionEvent:
    t: float
    state: LienardState
    crossing_sign: int


class SectionStatus(Enum):
    OK = "ok"                  # requested number of crossings found
    Converged = "converged"    # trajectory collapsed to the origin first
    Truncated = "truncated"    # time horizon exhausted


def _rhs(system: SystemKind, p: ModelParams, sign: float):
    beta, h = p.beta, p.h
    if system is SystemKind.Full3D:
        def f(t, s):
            fsum = tanh_pair_sum(s[2], h)
            dm = -2.0 * s[0] + fsum
            return (sign * dm,
                    sign * (-2.0 * s[1] + tanh_pair_diff(s[2], h)),
                    sign * (-s[2] + beta * dm))
    elif system is SystemKind.Planar:
        def f(t, s):
            dm = -2.0 * s[0] + tanh_pair_sum(s[1], h)
            return (sign * dm, sign * (-s[1] + beta * dm))
    else:
        def f(t, s):
            return (sign * (-2.0 * s[1]),
                    sign * (s[0] - g_lienard(s[1], p)))
    return f


def _init_array(init) -> np.ndarray:
    if isinstance(init, (OrderState, PlanarState, LienardState)):
        return init.as_array()
    return np.asarray(init, dtype=float)


def integrate(
    system: SystemKind,
    p: ModelParams,
    init,
    t_end: float,
    cfg: IntegratorConfig = IntegratorConfig(),
    record_dt: float | None = None,
    n_points: int = 1000,
) -> FlowResult:
    """Integrate one of the three model systems up to t_end.

    The sample grid is k*record_dt (matching the simulator's record grid)
    when record_dt is given, otherwise n_points uniform samples.
    """
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    y0 = _init_array(init)
    sign = float(cfg.direction.value)
    sol = solve_ivp(
        _rhs(system, p, sign),
        (0.0, t_end),
        y0,
        method="RK45",
        rtol=cfg.rel_tol,
        atol=cfg.abs_tol,
        max_step=cfg.max_step,
        dense_output=True,
    )
    if not sol.success:
        raise RuntimeError(f"integration failed at t={sol.t[-1]}: {sol.message}")
    if not np.all(np.isfinite(sol.y)):
        raise RuntimeError("non-finite state encountered")
    if record_dt is not None:
        times = np.arange(int(math.floor(t_end / record_dt + 1e-9)) + 1) * record_dt
    else:
        times = np.linspace(0.0, t_end, n_points)
    states = sol.sol(times).T
    return FlowResult(times=times, states=states, system=system,
                      params=p, sol=sol.sol)


def _polish_crossing(dense, t_event: float, p: ModelParams, sign: float,
                     abs_tol: float) -> float:
    """Newton-polish an event time on the dense output until |lambda| < abs_tol."""
    t = t_event
    for _ in range(50):
        y, lam = dense(t)
        if abs(lam) < abs_tol:
            break
        dlam = sign * (y - g_lienard(lam, p))
        if dlam == 0.0:
            break
        t -= lam / dlam
    return t


def poincare_crossings(
    p: ModelParams,
    init: LienardState,
    n_crossings: int,
    cfg: IntegratorConfig = IntegratorConfig(),
    t_chunk: float = 100.0,
    t_max: float = 1e5,
    origin_tol: float = 1e-9,
) -> tuple[list[SectionEvent], SectionStatus]:
    """Transversal crossings of the section {lambda = 0, dlambda/dt > 0}.

    For Backward runs the section is traversed with lambda decreasing, so the
    event direction flips; the crossing coordinate y > 0 either way.
    """
    y0 = _init_array(init)
    if np.linalg.norm(y0) == 0.0:
        raise ValueError("init must not be the origin")
    sign = float(cfg.direction.value)
    rhs = _rhs(SystemKind.Lienard, p, sign)

    def section(t, s):
        return s[1]
    section.terminal = False
    # Forward flow crosses upward (dlambda/dt = y > 0); reversed flow crosses
    # the same curve with lambda decreasing.
    section.direction = sign

    events: list[SectionEvent] = []
    state = y0
    t_off = 0.0
    while len(events) < n_crossings and t_off < t_max:
        sol = solve_ivp(rhs, (0.0, t_chunk), state, method="RK45",
                        rtol=cfg.rel_tol, atol=cfg.abs_tol,
                        max_step=cfg.max_step, dense_output=True,
                        events=[section])
        if not sol.success:
            raise RuntimeError(f"integration failed: {sol.message}")
        for t_e in sol.t_events[0]:
            t_pol = _polish_crossing(sol.sol, t_e, p, sign, cfg.abs_tol)
            y_e, lam_e = sol.sol(t_pol)
            events.append(SectionEvent(
                t=t_off + t_pol,
                state=LienardState(float(y_e), float(lam_e)),
                crossing_sign=int(sign),
            ))
            if len(events) >= n_crossings:
                break
        state = sol.y[:, -1]
        t_off += t_chunk
        if np.linalg.norm(state) < origin_tol:
            return events, SectionStatus.Converged
    status = SectionStatus.OK if len(events) >= n_crossings else SectionStatus.Truncated
    return events, status


def crossings_to_csv(events: list[SectionEvent], path) -> None:
    with open(path, "w") as fh:
        fh.write("t,y,period_estimate\n")
        for i, ev in enumerate(events):
            period = ev.t - events[i - 1].t if i > 0 else float("nan")
            fh.write(f"{ev.t:.12g},{ev.state.y:.12g},{period:.12g}\n")


def period_estimate(events: list[SectionEvent]) -> float:
    """Mean inter-crossing time after discarding the leading transient
    (first 20% of crossings, at least 5)."""
    if len(events) < 7:
        raise ValueError("need at least 7 crossings for a period estimate")
    skip = max(5, int(0.2 * len(events)))
    gaps = np.diff([ev.t for ev in events[skip:]])
    if len(gaps) == 0:
        raise ValueError("transient discard left no crossings")
    return float(np.mean(gaps))


def lyapunov_U_monitor(traj: FlowResult, p: ModelParams):
    """Evaluate U = y^2/4 + lambda^2/2 and its flow derivative along a
    Lienard trajectory; flags samples with lambda >= 2*beta/3 where the
    derivative fails to be negative."""
    if traj.system is not SystemKind.Lienard:
        raise ValueError("monitor expects a Lienard trajectory")
    y = traj.states[:, 0]
    lam = traj.states[:, 1]
    u = 0.25 * y**2 + 0.5 * lam**2
    udot = np.array([-l * g_lienard(l, p) for l in lam])
    flags = (lam >= 2.0 * p.beta / 3.0) & (udot >= 0.0)
    return list(zip(traj.times, u, udot)), flags


def lienard_zero_coupling_solution(init: LienardState, t: np.ndarray) -> np.ndarray:
    """Closed-form solution of the Lienard system at beta = 0, where
    g(lambda) = 3*lambda and the flow is linear with eigenvalues -1, -2:
    y = 2*c1*exp(-t) + c2*exp(-2t), lambda = c1*exp(-t) + c2*exp(-2t)."""
    c1 = init.y - init.lam
    c2 = 2.0 * init.lam - init.y
    e1 = np.exp(-t)
    e2 = np.exp(-2.0 * t)
    return np.column_stack([2.0 * c1 * e1 + c2 * e2, c1 * e1 + c2 * e2])
