"""Global analysis of the planar flow: limit-cycle detection through the
Poincare return map on {lambda = 0, y > 0}, the saddle-node locus
beta_star(h) where the stable and unstable cycles collide, and whole
(h, beta) phase-diagram scans.

The unstable inner cycle of the coexistence phase is captured by reversing
time, where it becomes attracting; the stable cycle is reached forward from
a standardized far initial condition on the trapping boundary.  Return-map
iteration is accelerated with Aitken extrapolation and verified by a
one-period re-integration, so weakly attracting cycles near the saddle-node
do not exhaust the crossing budget."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.integrate import solve_ivp

from .model import H_TRICRITICAL, LienardState, ModelParams, g_lienard
from .odeflow import IntegratorConfig, _polish_crossing
from .stability import beta_T, eigenvalues, Regime

CROSSING_BUDGET = 2000
_CONV_TOL = 1e-8      # successive section gaps below this mean convergence
_ORIGIN_Y = 1e-6      # converged section coordinate below this means collapse
_VERIFY_TOL = 1e-9    # one-return residual accepted for a polished cycle


class CycleStability(Enum):
    Stable = "stable"
    Unstable = "unstable"


@dataclass(frozen=True)
class CycleInfo:
    amplitude: float          # max |lambda| over one period
    period: float
    stability: CycleStability
    section_point: float      # fixed point of the return map (y at lambda=0)
    return_derivative: float  # forward return-map derivative at the fixed point


class CycleIndeterminate(RuntimeError):
    """Crossing budget exhausted without convergence or collapse; carries the
    last observed gap between return-map iterates."""

    def __init__(self, last_gap: float, crossings: int):
        super().__init__(
            f"no verdict after {crossings} crossings (last gap {last_gap:.3e})"
        )
        self.last_gap = last_gap
        self.crossings = crossings


class ClassLabel(Enum):
    FP = "FP"
    CoexistFPLC = "FPLC"
    LC = "LC"
    Indeterminate = "IND"


@dataclass(frozen=True)
class PhaseClass:
    label: ClassLabel
    beta_c: float
    beta_star: float | None
    cycles: tuple[CycleInfo, ...]


@dataclass(frozen=True)
class BetaStarResult:
    h: float
    lo: float            # largest beta confirmed cycle-free
    hi: float            # smallest beta with a confirmed stable cycle
    indeterminate: bool  # bracket widened by an indeterminate probe

    @property
    def value(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo


class _SectionIterator:
    """Streams upward section crossings of the Lienard flow from a given
    state, continuing the integration chunk by chunk."""

    def __init__(self, p: ModelParams, state, cfg: IntegratorConfig,
                 reverse: bool = False, t_chunk: float = 50.0,
                 escape_norm: float | None = None):
        self.p = p
        self.cfg = cfg
        self.sign = -1.0 if reverse else 1.0
        self.rhs = _rhs_lienard(p, self.sign)
        self.state = np.asarray(state, dtype=float)
        self.t = 0.0
        self.t_chunk = t_chunk
        self.collapsed = False
        self.escaped = False
        self._pending: list[tuple[float, float]] = []

        def section(t, s):
            return s[1]
        section.terminal = False
        section.direction = self.sign
        self._events = [section]
        if escape_norm is not None:
            def escape(t, s):
                return escape_norm - (abs(s[0]) + abs(s[1]))
            escape.terminal = True
            escape.direction = -1
            self._events.append(escape)

    def next_crossing(self) -> tuple[float, float] | None:
        """Return (t, y) of the next crossing, or None once the trajectory
        has collapsed to the origin or escaped past the norm bound."""
        while not self._pending:
            if self.collapsed or self.escaped:
                return None
            sol = solve_ivp(self.rhs, (0.0, self.t_chunk), self.state,
                            method="RK45", rtol=self.cfg.rel_tol,
                            atol=self.cfg.abs_tol, max_step=self.cfg.max_step,
                            dense_output=True, events=self._events)
            if not sol.success:
                raise RuntimeError(f"integration failed: {sol.message}")
            if not np.all(np.isfinite(sol.y[:, -1])):
                raise RuntimeError("non-finite state in section search")
            for t_e in sol.t_events[0]:
                if self.t + t_e < 1e-9:
                    continue  # departure from the section itself
                t_pol = _polish_crossing(sol.sol, t_e, self.p, self.sign,
                                         self.cfg.abs_tol)
                y_e = float(sol.sol(t_pol)[0])
                self._pending.append((self.t + t_pol, y_e))
            if len(self._events) > 1 and len(sol.t_events[1]):
                self.escaped = True
                return self._pending.pop(0) if self._pending else None
            self.state = sol.y[:, -1]
            self.t += self.t_chunk
            if not self._pending and np.linalg.norm(self.state) < 1e-9:
                self.collapsed = True
        return self._pending.pop(0)


def _rhs_lienard(p: ModelParams, sign: float):
    beta, h = p.beta, p.h

    def f(t, s):
        return (sign * (-2.0 * s[1]), sign * (s[0] - g_lienard(s[1], p)))
    return f


def _single_return(p: ModelParams, y0: float, cfg: IntegratorConfig,
                   reverse: bool) -> tuple[float, float]:
    """One application of the section return map from (y0, 0); returns
    (image, return time)."""
    it = _SectionIterator(p, (y0, 0.0), cfg, reverse=reverse)
    got = it.next_crossing()
    if got is None:
        raise RuntimeError("trajectory collapsed before returning to the section")
    t, y = got
    return y, t


def far_initial_state(p: ModelParams) -> LienardState:
    """Standard far start on the trapping boundary: outside every cycle by
    the Lyapunov bound, inside the trapping funnel."""
    return LienardState(0.0, 2.0 * p.beta / 3.0 + 1.0)


def _search_cycle(
    p: ModelParams,
    start,
    cfg: IntegratorConfig,
    reverse: bool,
    escape_y: float | None = None,
    budget: int = CROSSING_BUDGET,
) -> CycleInfo | None:
    """Iterate the return map from `start` until it converges to a section
    fixed point (a cycle), collapses to the origin (None), or escapes past
    escape_y (None).  Raises CycleIndeterminate when the budget runs out."""
    it = _SectionIterator(p, np.asarray(start, dtype=float), cfg,
                          reverse=reverse, escape_norm=escape_y)
    ys: list[float] = []
    last_gap = math.inf
    polish_attempts = 0
    for k in range(budget):
        got = it.next_crossing()
        if got is None:
            return None  # collapsed to the origin
        _, y = got
        ys.append(y)
        if escape_y is not None and y > escape_y:
            return None
        if len(ys) >= 2:
            last_gap = abs(ys[-1] - ys[-2])
            if last_gap < _CONV_TOL:
                if ys[-1] < _ORIGIN_Y:
                    return None
                return _finalize_cycle(p, ys[-1], cfg, reverse)
        # Aitken-accelerated shortcut for weakly attracting cycles; the
        # polished point must verify as an actual fixed point of the right
        # stability, otherwise plain iteration continues.
        if (len(ys) >= 4 and last_gap < 1e-3 and k % 8 == 0
                and polish_attempts < 25):
            est = _aitken(ys[-3], ys[-2], ys[-1])
            if est is not None and est > _ORIGIN_Y:
                polish_attempts += 1
                polished = _polish_fixed_point(p, est, cfg, reverse)
                if polished is not None:
                    info = _finalize_cycle(p, polished, cfg, reverse)
                    expected = (CycleStability.Unstable if reverse
                                else CycleStability.Stable)
                    if info.stability is expected:
                        return info
    raise CycleIndeterminate(last_gap, budget)


def _aitken(y0: float, y1: float, y2: float) -> float | None:
    d2 = (y2 - y1) - (y1 - y0)
    if d2 == 0.0:
        return None
    est = y2 - (y2 - y1) ** 2 / d2
    if not math.isfinite(est) or est <= 0.0:
        return None
    # reject wild extrapolations
    if abs(est - y2) > 10.0 * abs(y2 - y1) + 1e-6:
        return None
    return est


def _polish_fixed_point(p: ModelParams, y_est: float,
                        cfg: IntegratorConfig, reverse: bool) -> float | None:
    """Secant iteration on P(y) - y around an extrapolated estimate; returns
    the verified fixed point or None if the estimate does not pan out.

    The origin is itself a fixed point of the return map and satisfies any
    absolute residual tolerance, so candidates at or below the collapse
    threshold are rejected rather than reported as zero-amplitude cycles."""
    def residual(y):
        return _single_return(p, y, cfg, reverse)[0] - y

    y0 = y_est
    f0 = residual(y0)
    if abs(f0) < _VERIFY_TOL:
        return y0 if y0 > _ORIGIN_Y else None
    y1 = y_est * (1.0 + 1e-6) + 1e-9
    f1 = residual(y1)
    for _ in range(30):
        if f1 == f0:
            return None
        y2 = y1 - f1 * (y1 - y0) / (f1 - f0)
        if not math.isfinite(y2) or y2 <= 0.0 or abs(y2 - y1) > max(1.0, y1):
            return None
        y0, f0 = y1, f1
        y1 = y2
        f1 = residual(y1)
        if abs(f1) < _VERIFY_TOL:
            return y1 if y1 > _ORIGIN_Y else None
    return None


def _finalize_cycle(p: ModelParams, y_star: float,
                    cfg: IntegratorConfig, reverse: bool) -> CycleInfo:
    _, period = _single_return(p, y_star, cfg, reverse)
    # Forward return-map derivative by central differences on the section.
    delta = max(1e-6, 1e-6 * y_star)
    up, _ = _single_return(p, y_star + delta, cfg, reverse)
    dn, _ = _single_return(p, y_star - delta, cfg, reverse)
    deriv = (up - dn) / (2.0 * delta)
    if reverse:
        deriv = 1.0 / deriv if deriv != 0.0 else math.inf
    stability = CycleStability.Stable if abs(deriv) < 1.0 else CycleStability.Unstable

    # Amplitude: max |lambda| over one period, sampled on the dense output.
    sign = -1.0 if reverse else 1.0
    sol = solve_ivp(_rhs_lienard(p, sign), (0.0, period), (y_star, 0.0),
                    method="RK45", rtol=cfg.rel_tol, atol=cfg.abs_tol,
                    dense_output=True)
    ts = np.linspace(0.0, period, 4001)
    amp = float(np.max(np.abs(sol.sol(ts)[1])))
    return CycleInfo(amplitude=amp, period=period, stability=stability,
                     section_point=y_star, return_derivative=deriv)


def find_stable_cycle(
    p: ModelParams,
    cfg: IntegratorConfig = IntegratorConfig(),
) -> CycleInfo | None:
    """Search for the stable limit cycle from the standard far start.

    None means the trajectory collapsed to the origin (no cycle)."""
    start = far_initial_state(p)
    return _search_cycle(p, start.as_array(), cfg, reverse=False)


def stable_cycle_from(p: ModelParams, init: LienardState,
                      cfg: IntegratorConfig = IntegratorConfig()) -> CycleInfo | None:
    """Like find_stable_cycle but from a caller-chosen initial condition."""
    return _search_cycle(p, init.as_array(), cfg, reverse=False)


def find_unstable_cycle(
    p: ModelParams,
    cfg: IntegratorConfig = IntegratorConfig(),
) -> CycleInfo | None:
    """Search for the inner unstable cycle by reversed-time integration from
    a small perturbation of the origin; only meaningful while the origin is
    linearly stable (coexistence candidates)."""
    if eigenvalues(p).regime is Regime.Unstable:
        raise ValueError("unstable-cycle search requires a linearly stable origin")
    escape = 6.0 * p.beta + 10.0
    info = _search_cycle(p, (1e-4, 0.0), cfg, reverse=True, escape_y=escape)
    return info


def beta_star(
    h: float,
    tol: float = 1e-4,
    cfg: IntegratorConfig = IntegratorConfig(),
) -> BetaStarResult:
    """Bisect the saddle-node locus of limit cycles in beta.

    Bracket seeded with [beta_T(h), beta_c(h)]; the cycle-existence
    predicate is monotone in beta by the rotated-vector-field structure.
    An indeterminate probe stops the refinement and the current bracket is
    reported as is."""
    if h <= H_TRICRITICAL:
        raise ValueError("beta_star is defined only above the tricritical h")
    if tol < 1e-6:
        raise ValueError("tol below 1e-6 is not supported")
    lo = beta_T(h)
    hi = ModelParams(beta=1.0, h=h).beta_c * (1.0 - 1e-9)
    indeterminate = False
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        try:
            cycle = find_stable_cycle(ModelParams(beta=mid, h=h), cfg)
        except CycleIndeterminate:
            indeterminate = True
            break
        if cycle is None:
            lo = mid
        else:
            hi = mid
    return BetaStarResult(h=h, lo=lo, hi=hi, indeterminate=indeterminate)


def classify(
    p: ModelParams,
    cfg: IntegratorConfig = IntegratorConfig(),
    boundary_tol: float = 1e-9,
    beta_star_hint: BetaStarResult | None = None,
    with_beta_star: bool = False,
) -> PhaseClass:
    """Attractor classification at (beta, h): FP, coexistence, or LC."""
    info = eigenvalues(p)
    bs: BetaStarResult | None = beta_star_hint
    if bs is None and with_beta_star and p.h > H_TRICRITICAL:
        bs = beta_star(p.h, cfg=cfg)
    bs_value = bs.value if bs is not None else None

    near_bc = abs(p.beta - info.beta_c) < boundary_tol
    near_bs = bs is not None and bs.lo - boundary_tol <= p.beta <= bs.hi + boundary_tol
    if near_bc or near_bs:
        return PhaseClass(ClassLabel.Indeterminate, info.beta_c, bs_value, ())

    try:
        stable = find_stable_cycle(p, cfg)
        if info.regime is Regime.Unstable:
            if stable is None:
                return PhaseClass(ClassLabel.Indeterminate, info.beta_c, bs_value, ())
            return PhaseClass(ClassLabel.LC, info.beta_c, bs_value, (stable,))
        if stable is None:
            return PhaseClass(ClassLabel.FP, info.beta_c, bs_value, ())
        unstable = find_unstable_cycle(p, cfg)
        cycles = (stable,) if unstable is None else (stable, unstable)
        return PhaseClass(ClassLabel.CoexistFPLC, info.beta_c, bs_value, cycles)
    except CycleIndeterminate:
        return PhaseClass(ClassLabel.Indeterminate, info.beta_c, bs_value, ())


def _scan_column(args):
    h, beta_grid, tol, rel_tol, abs_tol = args
    cfg = IntegratorConfig(rel_tol=rel_tol, abs_tol=abs_tol)
    bs = None
    if h > H_TRICRITICAL:
        bs = beta_star(h, tol=tol, cfg=cfg)
    rows = []
    for beta in beta_grid:
        p = ModelParams(beta=beta, h=h)
        pc = classify(p, cfg, boundary_tol=tol, beta_star_hint=bs)
        amp_s = amp_u = per_s = float("nan")
        for c in pc.cycles:
            if c.stability is CycleStability.Stable:
                amp_s, per_s = c.amplitude, c.period
            else:
                amp_u = c.amplitude
        rows.append({
            "h": h, "beta": beta, "class": pc.label.value,
            "beta_c": pc.beta_c, "beta_star": pc.beta_star,
            "amp_stable": amp_s, "amp_unstable": amp_u,
            "period_stable": per_s,
        })
    return h, bs, rows


def scan_phase_diagram(
    h_grid,
    beta_grid,
    tol: float = 1e-2,
    threads: int = 1,
    rel_tol: float = 1e-8,
    abs_tol: float = 1e-10,
) -> tuple[list[dict], list[BetaStarResult]]:
    """Classify every (h, beta) grid point; h columns run in parallel and
    results are assembled in grid order regardless of thread count."""
    h_grid = list(h_grid)
    beta_grid = list(beta_grid)
    if h_grid != sorted(h_grid) or beta_grid != sorted(beta_grid):
        raise ValueError("grids must be sorted ascending")
    tasks = [(h, beta_grid, tol, rel_tol, abs_tol) for h in h_grid]
    if threads > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(_scan_column, tasks))
    else:
        results = [_scan_column(t) for t in tasks]
    rows = []
    stars = []
    for h, bs, col in results:
        rows.extend(col)
        if bs is not None:
            stars.append(bs)
    return rows, stars


def phase_rows_to_csv(rows: list[dict], path) -> None:
    with open(path, "w") as fh:
        fh.write("h,beta,class,beta_c,beta_star,amp_stable,amp_unstable,"
                 "period_stable\n")
        for r in rows:
            bs = "" if r["beta_star"] is None else f"{r['beta_star']:.12g}"
            fh.write(
                f"{r['h']:.12g},{r['beta']:.12g},{r['class']},"
                f"{r['beta_c']:.12g},{bs},{r['amp_stable']:.12g},"
                f"{r['amp_unstable']:.12g},{r['period_stable']:.12g}\n"
            )


def beta_star_to_csv(stars: list[BetaStarResult], path) -> None:
    with open(path, "w") as fh:
        fh.write("h,beta_star_lo,beta_star_hi\n")
        for s in stars:
            fh.write(f"{s.h:.12g},{s.lo:.12g},{s.hi:.12g}\n")
