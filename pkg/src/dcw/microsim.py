"""Exact finite-N stochastic simulation of the spin/interaction Markov process.

Jump times are generated by thinning against the constant dominating rate 2N
(each spin flips at rate 1 - sigma*tanh(lambda + h*eta) <= 2).  Between jumps
the interaction variable decays in closed form, lambda(t) = lambda(t0) *
exp(-(t - t0)), so the sampled path carries no integrator error.

Randomness comes from a counter-based Philox generator.  Per proposal the
event stream is consumed in a fixed order (proposal time, category,
acceptance); spin selection inside a category uses a separate stream so that
FullSpin and OrderParamOnly runs with the same seed produce identical jump
sequences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .model import Disorder, MicroState, ModelParams, OrderState

_CHUNK = 4096

# Category order used for the cumulative-rate draw: (j, k) pairs.
_CATEGORIES = ((1, 1), (1, -1), (-1, 1), (-1, -1))


class SimMode(Enum):
    FullSpin = "full_spin"
    OrderParamOnly = "order_param_only"


@dataclass(frozen=True)
class SimConfig:
    n: int
    t_end: float
    seed: int
    record_dt: float = 0.01
    mode: SimMode = SimMode.OrderParamOnly

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if not 0 < self.record_dt <= self.t_end:
            raise ValueError("need 0 < record_dt <= t_end")


@dataclass(frozen=True)
class Trajectory:
    """Time-stamped sequence of order-parameter states.

    states has shape (len(times), 3) with columns (m_sigma, m_sigma_eta,
    lambda).  n == 0 encodes the macroscopic (ODE) limit.  For simulated
    paths, counts holds the four sub-population sizes at each sample time,
    from which the order parameters can be recomputed exactly.
    """

    times: np.ndarray
    states: np.ndarray
    params: ModelParams
    n: int
    counts: np.ndarray | None = None

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise ValueError("times/states length mismatch")
        if len(self.times) and self.times[0] != 0.0:
            raise ValueError("first sample time must be 0")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("t,m_sigma,m_sigma_eta,lambda\n")
            for t, (m, mse, lam) in zip(self.times, self.states):
                fh.write(f"{t:.12g},{m:.12g},{mse:.12g},{lam:.12g}\n")


def sample_disorder(n: int, seed: int) -> Disorder:
    """Draw n i.i.d. symmetric +-1 site fields; deterministic in (n, seed)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.Generator(np.random.Philox(seed))
    eta = (2 * rng.integers(0, 2, size=n) - 1).astype(np.int8)
    return Disorder(eta=eta, n=n, seed=seed)


def counts_from_order_state(s: OrderState, eta: Disorder) -> np.ndarray:
    """Integer sub-population counts closest to a target order state.

    Within each quenched eta class the number of +1 spins is rounded to the
    nearest integer, so the realized (m_sigma, m_sigma_eta) may differ from
    the target by O(1/N).
    """
    n = eta.n
    n_k = {1: int(np.sum(eta.eta == 1)), -1: n - int(np.sum(eta.eta == 1))}
    counts = np.zeros((2, 2), dtype=np.int64)
    for b, k in enumerate((1, -1)):
        s_k = 0.5 * n * (s.m_sigma + k * s.m_sigma_eta)  # sum of sigma over class k
        n_plus = int(round(0.5 * (n_k[k] + s_k)))
        n_plus = min(max(n_plus, 0), n_k[k])
        counts[0, b] = n_plus
        counts[1, b] = n_k[k] - n_plus
    return counts


def order_state_from_counts(counts: np.ndarray, lam: float, n: int) -> OrderState:
    c = counts
    m = (c[0, 0] + c[0, 1] - c[1, 0] - c[1, 1]) / n
    mse = (c[0, 0] - c[0, 1] - c[1, 0] + c[1, 1]) / n
    eta_bar = (c[0, 0] + c[1, 0] - c[0, 1] - c[1, 1]) / n
    return OrderState(m, mse, lam, eta_bar=eta_bar)


class _SpinRegistry:
    """Site indices grouped by (sigma, eta) class, with O(1) uniform removal."""

    def __init__(self, sigma: np.ndarray, eta: np.ndarray):
        self.members = {}
        self.pos = {}
        for a, j in enumerate((1, -1)):
            for b, k in enumerate((1, -1)):
                idx = np.flatnonzero((sigma == j) & (eta == k))
                self.members[a, b] = list(idx)
                for pidx, site in enumerate(idx):
                    self.pos[int(site)] = pidx

    def flip(self, a: int, b: int, u: float) -> int:
        """Move a uniformly chosen site from class (a, b) to (1-a, b)."""
        group = self.members[a, b]
        r = min(int(u * len(group)), len(group) - 1)
        site = group[r]
        last = group.pop()
        if r < len(group):
            group[r] = last
            self.pos[last] = r
        dest = self.members[1 - a, b]
        self.pos[site] = len(dest)
        dest.append(site)
        return site


def simulate(
    cfg: SimConfig,
    p: ModelParams,
    init: MicroState | OrderState,
    eta: Disorder,
) -> Trajectory:
    """Sample one statistically exact path of the order-parameter process."""
    n = cfg.n
    if eta.n != n:
        raise ValueError(f"disorder length {eta.n} != cfg.n {n}")

    if isinstance(init, MicroState):
        if len(init.sigma) != n:
            raise ValueError("init sigma length inconsistent with disorder")
        sigma = init.sigma.copy()
        lam = float(init.lam)
        counts = np.zeros((2, 2), dtype=np.int64)
        for a, j in enumerate((1, -1)):
            for b, k in enumerate((1, -1)):
                counts[a, b] = int(np.sum((sigma == j) & (eta.eta == k)))
    else:
        counts = counts_from_order_state(init, eta)
        lam = float(init.lam)
        if cfg.mode is SimMode.FullSpin:
            # Deterministic spin assignment consistent with the counts.
            sigma = np.empty(n, dtype=np.int8)
            for b, k in enumerate((1, -1)):
                sites = np.flatnonzero(eta.eta == k)
                sigma[sites[: counts[0, b]]] = 1
                sigma[sites[counts[0, b]:]] = -1
        else:
            sigma = None

    registry = None
    if cfg.mode is SimMode.FullSpin:
        registry = _SpinRegistry(sigma, eta.eta)

    ss = np.random.SeedSequence(cfg.seed)
    ev_ss, spin_ss = ss.spawn(2)
    ev_rng = np.random.Generator(np.random.Philox(ev_ss))
    spin_rng = np.random.Generator(np.random.Philox(spin_ss))

    beta, h = p.beta, p.h
    total_bound = 2.0 * n
    two_over_n = 2.0 / n

    # Incrementally maintained order parameters (floats); counts are exact.
    st = order_state_from_counts(counts, lam, n)
    m, mse = st.m_sigma, st.m_sigma_eta

    n_rec = int(math.floor(cfg.t_end / cfg.record_dt + 1e-9)) + 1
    rec_times = np.arange(n_rec) * cfg.record_dt
    rec_states = np.empty((n_rec, 3))
    rec_counts = np.empty((n_rec, 2, 2), dtype=np.int64)

    t_last = 0.0  # time of last accepted jump
    t = 0.0
    next_rec = 0

    def record_until(t_limit):
        nonlocal next_rec
        while next_rec < n_rec and rec_times[next_rec] <= t_limit + 1e-15:
            tr = rec_times[next_rec]
            lam_r = lam * math.exp(-(tr - t_last))
            rec_states[next_rec] = (m, mse, lam_r)
            rec_counts[next_rec] = counts
            next_rec += 1

    record_until(0.0)

    draws = ev_rng.random((_CHUNK, 3))
    di = 0
    while True:
        if di == _CHUNK:
            draws = ev_rng.random((_CHUNK, 3))
            di = 0
        u_time, u_cat, u_acc = draws[di]
        di += 1

        dt = -math.log1p(-u_time) / total_bound
        t_prop = t + dt
        if t_prop >= cfg.t_end:
            record_until(cfg.t_end)
            break
        t = t_prop
        lam_at = lam * math.exp(-(t - t_last))

        tp = math.tanh(lam_at + h)
        tm = math.tanh(lam_at - h)
        r_pp = counts[0, 0] * (1.0 - tp)
        r_pm = counts[0, 1] * (1.0 - tm)
        r_mp = counts[1, 0] * (1.0 + tp)
        r_mm = counts[1, 1] * (1.0 + tm)
        total = r_pp + r_pm + r_mp + r_mm
        accept_prob = total / total_bound
        if accept_prob > 1.0 + 1e-12:
            raise RuntimeError(
                f"thinning bound violated: acceptance probability {accept_prob}"
            )
        if u_acc >= accept_prob:
            continue

        # Accepted: pick category proportionally to its rate.
        x = u_cat * total
        if x < r_pp:
            a, b, j, k = 0, 0, 1, 1
        elif x < r_pp + r_pm:
            a, b, j, k = 0, 1, 1, -1
        elif x < r_pp + r_pm + r_mp:
            a, b, j, k = 1, 0, -1, 1
        else:
            a, b, j, k = 1, 1, -1, -1

        record_until(t)

        if registry is not None:
            site = registry.flip(a, b, spin_rng.random())
            sigma[site] = -sigma[site]
        counts[a, b] -= 1
        counts[1 - a, b] += 1
        m -= j * two_over_n
        mse -= j * k * two_over_n
        lam = lam_at - beta * j * two_over_n
        t_last = t

    return Trajectory(
        times=rec_times,
        states=rec_states,
        params=p,
        n=n,
        counts=rec_counts,
    )


def _lln_task(args):
    p, init, t_end, n, root_seed, i, record_dt = args
    from . import odeflow

    task_ss = np.random.SeedSequence([root_seed, n, i])
    dis_seed, dyn_seed = (int(s) for s in task_ss.generate_state(2))
    eta = sample_disorder(n, dis_seed)
    cfg = SimConfig(n=n, t_end=t_end, seed=dyn_seed, record_dt=record_dt)
    counts = counts_from_order_state(init, eta)
    realized = order_state_from_counts(counts, init.lam, n)
    traj = simulate(cfg, p, realized, eta)
    ref = odeflow.integrate(
        odeflow.SystemKind.Full3D, p, realized, t_end,
        record_dt=record_dt,
    )
    dist = np.linalg.norm(traj.states - ref.states, axis=1)
    return float(np.max(dist))


def lln_convergence_report(
    p: ModelParams,
    init: OrderState,
    t_end: float,
    n_list: list[int],
    seeds_per_n: int,
    root_seed: int = 0,
    record_dt: float = 0.05,
    threads: int = 1,
) -> list[dict]:
    """Empirical check of the macroscopic limit: for each N, the mean sup
    distance between simulated paths and the ODE solution, with its standard
    error over independent seeds (fresh disorder and dynamics per seed)."""
    if list(n_list) != sorted(n_list):
        raise ValueError("n_list must be increasing")
    rows = []
    for n in n_list:
        args = [(p, init, t_end, n, root_seed, i, record_dt)
                for i in range(seeds_per_n)]
        if threads > 1:
            from concurrent.futures import ProcessPoolExecutor
            with ProcessPoolExecutor(max_workers=threads) as ex:
                sups = list(ex.map(_lln_task, args))
        else:
            sups = [_lln_task(a) for a in args]
        sups = np.array(sups)
        rows.append({
            "n": n,
            "mean_sup_dist": float(np.mean(sups)),
            "std_err": float(np.std(sups, ddof=1) / math.sqrt(len(sups))),
        })
    return rows
