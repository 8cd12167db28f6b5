"""Command-line entry points.

Every subcommand resolves its configuration from (defaults < config file <
explicit flags), writes its delimited/JSON artifact into the output
directory together with a manifest.json from which the run can be
reproduced bit-identically, and optionally renders figures with --plot.

Config files are flat TOML key-value tables using the long option names
with underscores (e.g. ``record_dt = 0.01``).

Exit codes: 0 success, 1 usage error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

import numpy as np

from . import __version__, bifurcation, microsim, odeflow, stability
from .model import LienardState, ModelParams, OrderState


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _parse_grid(spec: str) -> list[float]:
    """start:step:stop, inclusive of the endpoint up to rounding."""
    try:
        start, step, stop = (float(x) for x in spec.split(":"))
    except ValueError as exc:
        raise _UsageError(f"bad grid spec {spec!r}, expected start:step:stop") from exc
    if step <= 0 or stop < start:
        raise _UsageError(f"bad grid spec {spec!r}")
    n = int(round((stop - start) / step)) + 1
    return [start + i * step for i in range(n)]


def _parse_floats(spec: str, k: int) -> list[float]:
    vals = [float(x) for x in spec.split(",")]
    if len(vals) != k:
        raise _UsageError(f"expected {k} comma-separated values, got {spec!r}")
    return vals


def _build_parser() -> _Parser:
    top = _Parser(prog="dcw", description=__doc__)
    top.add_argument("--version", action="version", version=__version__)
    sub = top.add_subparsers(dest="command", required=True)

    def add(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="TOML config file (flags override it)")
        sp.add_argument("--out", help="output directory (default .)")
        sp.add_argument("--plot", action="store_true", default=None,
                        help="also render figures")
        return sp

    sp = add("simulate", "finite-N stochastic simulation")
    sp.add_argument("--n", type=int)
    sp.add_argument("--beta", type=float)
    sp.add_argument("--h", type=float)
    sp.add_argument("--t-end", type=float, dest="t_end")
    sp.add_argument("--record-dt", type=float, dest="record_dt")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--disorder-seed", type=int, dest="disorder_seed")
    sp.add_argument("--mode", choices=["full_spin", "order_param_only"])
    sp.add_argument("--init", help="m_sigma,m_sigma_eta,lambda")

    sp = add("integrate", "deterministic integration of the limit systems")
    sp.add_argument("--system", choices=["full3d", "planar", "lienard"])
    sp.add_argument("--beta", type=float)
    sp.add_argument("--h", type=float)
    sp.add_argument("--t-end", type=float, dest="t_end")
    sp.add_argument("--record-dt", type=float, dest="record_dt")
    sp.add_argument("--init", help="comma-separated initial state")
    sp.add_argument("--rel-tol", type=float, dest="rel_tol")
    sp.add_argument("--abs-tol", type=float, dest="abs_tol")
    sp.add_argument("--direction", choices=["forward", "backward"])

    sp = add("stability", "spectrum, Lyapunov coefficient and Gamma report")
    sp.add_argument("--beta", type=float)
    sp.add_argument("--h", type=float)

    sp = add("gamma", "fixed-point structure of Gamma and the tangency curve")
    sp.add_argument("--beta", type=float)
    sp.add_argument("--h", type=float)

    sp = add("cycle", "stable/unstable limit-cycle search")
    sp.add_argument("--beta", type=float)
    sp.add_argument("--h", type=float)

    sp = add("betastar", "saddle-node locus bisection")
    sp.add_argument("--h", type=float)
    sp.add_argument("--tol", type=float)

    sp = add("scan", "phase-diagram grid classification")
    sp.add_argument("--h", dest="h_grid", help="start:step:stop")
    sp.add_argument("--beta", dest="beta_grid", help="start:step:stop")
    sp.add_argument("--tol", type=float)
    sp.add_argument("--threads", type=int)

    sp = add("lln", "empirical convergence to the macroscopic ODE")
    sp.add_argument("--beta", type=float)
    sp.add_argument("--h", type=float)
    sp.add_argument("--t-end", type=float, dest="t_end")
    sp.add_argument("--n-list", dest="n_list", help="comma-separated N values")
    sp.add_argument("--seeds-per-n", type=int, dest="seeds_per_n")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--record-dt", type=float, dest="record_dt")
    sp.add_argument("--threads", type=int)

    add("lyapunov2", "second Lyapunov coefficient at the tricritical point")
    return top


_DEFAULTS = {
    "simulate": {"n": 1000, "beta": 1.0, "h": 0.0, "t_end": 10.0,
                 "record_dt": 0.01, "seed": 0, "disorder_seed": 1,
                 "mode": "order_param_only", "init": "1,0,0"},
    "integrate": {"system": "full3d", "beta": 1.0, "h": 0.0, "t_end": 10.0,
                  "record_dt": 0.01, "init": "1,0,0", "rel_tol": 1e-10,
                  "abs_tol": 1e-12, "direction": "forward"},
    "stability": {"beta": 1.0, "h": 0.0},
    "gamma": {"beta": 1.0, "h": 0.0},
    "cycle": {"beta": 2.0, "h": 0.0},
    "betastar": {"h": 1.0, "tol": 1e-4},
    "scan": {"h_grid": "0:0.05:1.2", "beta_grid": "0.5:0.05:5", "tol": 1e-2,
             "threads": 1},
    "lln": {"beta": 1.0, "h": 0.3, "t_end": 10.0, "n_list": "250,1000,4000",
            "seeds_per_n": 50, "seed": 0, "record_dt": 0.05, "threads": 1},
    "lyapunov2": {},
}


def _resolve(args: argparse.Namespace) -> dict:
    cfg = dict(_DEFAULTS[args.command])
    cfg["out"] = "."
    cfg["plot"] = False
    if args.config:
        with open(args.config, "rb") as fh:
            file_cfg = tomllib.load(fh)
        unknown = set(file_cfg) - set(cfg)
        if unknown:
            raise _UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(file_cfg)
    for key in cfg:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    # output dir may be overridden by environment only
    cfg["out"] = os.environ.get("DCW_OUTPUT_DIR", cfg["out"])
    return cfg


def _write_manifest(cfg: dict, command: str, outputs: list[str]):
    manifest = {
        "tool": "dcw",
        "version": __version__,
        "command": command,
        "config": {k: v for k, v in cfg.items() if k != "out"},
        "outputs": outputs,
    }
    path = os.path.join(cfg["out"], "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def _write_json(cfg: dict, name: str, payload) -> str:
    path = os.path.join(cfg["out"], name)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    return name


def _cmd_simulate(cfg: dict) -> list[str]:
    p = ModelParams(beta=cfg["beta"], h=cfg["h"])
    m, mse, lam = _parse_floats(cfg["init"], 3)
    eta = microsim.sample_disorder(cfg["n"], cfg["disorder_seed"])
    sim_cfg = microsim.SimConfig(
        n=cfg["n"], t_end=cfg["t_end"], seed=cfg["seed"],
        record_dt=cfg["record_dt"], mode=microsim.SimMode(cfg["mode"]),
    )
    counts = microsim.counts_from_order_state(
        OrderState(m, mse, lam, eta_bar=eta.eta_bar), eta)
    init = microsim.order_state_from_counts(counts, lam, cfg["n"])
    traj = microsim.simulate(sim_cfg, p, init, eta)
    traj.to_csv(os.path.join(cfg["out"], "trajectory.csv"))
    outputs = ["trajectory.csv"]
    if cfg["plot"]:
        from . import plots
        plots.plot_trajectory(traj.times, traj.states,
                              ["m_sigma", "m_sigma_eta", "lambda"],
                              os.path.join(cfg["out"], "trajectory.png"),
                              title=f"N={cfg['n']} beta={p.beta} h={p.h}")
        outputs.append("trajectory.png")
    return outputs


def _cmd_integrate(cfg: dict) -> list[str]:
    p = ModelParams(beta=cfg["beta"], h=cfg["h"])
    system = odeflow.SystemKind(cfg["system"])
    dim = 3 if system is odeflow.SystemKind.Full3D else 2
    init = _parse_floats(cfg["init"], dim)
    icfg = odeflow.IntegratorConfig(
        rel_tol=cfg["rel_tol"], abs_tol=cfg["abs_tol"],
        direction=odeflow.Direction.Forward if cfg["direction"] == "forward"
        else odeflow.Direction.Backward,
    )
    res = odeflow.integrate(system, p, np.array(init), cfg["t_end"], icfg,
                            record_dt=cfg["record_dt"])
    res.to_csv(os.path.join(cfg["out"], "trajectory.csv"))
    outputs = ["trajectory.csv"]
    if cfg["plot"]:
        from . import plots
        labels = {"full3d": ["m_sigma", "m_sigma_eta", "lambda"],
                  "planar": ["m_sigma", "lambda"],
                  "lienard": ["y", "lambda"]}[cfg["system"]]
        plots.plot_trajectory(res.times, res.states, labels,
                              os.path.join(cfg["out"], "trajectory.png"))
        outputs.append("trajectory.png")
    return outputs


def _cmd_stability(cfg: dict) -> list[str]:
    p = ModelParams(beta=cfg["beta"], h=cfg["h"])
    report = stability.stability_report(p)
    print(json.dumps(report, indent=2, sort_keys=True))
    return [_write_json(cfg, "stability.json", report)]


def _cmd_gamma(cfg: dict) -> list[str]:
    p = ModelParams(beta=cfg["beta"], h=cfg["h"])
    ga = stability.analyze_gamma(p)
    payload = {
        "h": p.h, "beta": p.beta, "lambda_I": ga.lambda_I,
        "positive_zeros": ga.positive_zeros, "zero_count": ga.zero_count,
        "beta_T": ga.beta_T, "tangent": ga.tangent,
    }
    print(json.dumps(payload, indent=2, sort_keys=True))
    return [_write_json(cfg, "gamma.json", payload)]


def _cycle_payload(info: bifurcation.CycleInfo | None):
    if info is None:
        return None
    return {
        "amplitude": info.amplitude, "period": info.period,
        "stability": info.stability.value,
        "section_point": info.section_point,
        "return_derivative": info.return_derivative,
    }


def _cmd_cycle(cfg: dict) -> list[str]:
    p = ModelParams(beta=cfg["beta"], h=cfg["h"])
    stable = bifurcation.find_stable_cycle(p)
    unstable = None
    if stability.eigenvalues(p).regime is stability.Regime.Stable:
        unstable = bifurcation.find_unstable_cycle(p)
    payload = {"h": p.h, "beta": p.beta,
               "stable": _cycle_payload(stable),
               "unstable": _cycle_payload(unstable)}
    print(json.dumps(payload, indent=2, sort_keys=True))
    outputs = [_write_json(cfg, "cycle.json", payload)]
    if cfg["plot"]:
        from . import plots

        def orbit(info, reverse):
            if info is None:
                return None
            d = odeflow.Direction.Backward if reverse else odeflow.Direction.Forward
            res = odeflow.integrate(
                odeflow.SystemKind.Lienard, p,
                LienardState(info.section_point, 0.0), info.period,
                odeflow.IntegratorConfig(direction=d), n_points=1500)
            return res.states
        plots.plot_cycle(orbit(stable, False), orbit(unstable, True),
                         os.path.join(cfg["out"], "cycle.png"),
                         title=f"beta={p.beta} h={p.h}")
        outputs.append("cycle.png")
    return outputs


def _cmd_betastar(cfg: dict) -> list[str]:
    res = bifurcation.beta_star(cfg["h"], tol=cfg["tol"])
    payload = {"h": res.h, "beta_star_lo": res.lo, "beta_star_hi": res.hi,
               "beta_star": res.value, "indeterminate": res.indeterminate}
    print(json.dumps(payload, indent=2, sort_keys=True))
    return [_write_json(cfg, "betastar.json", payload)]


def _cmd_scan(cfg: dict) -> list[str]:
    h_grid = _parse_grid(cfg["h_grid"])
    beta_grid = _parse_grid(cfg["beta_grid"])
    rows, stars = bifurcation.scan_phase_diagram(
        h_grid, beta_grid, tol=cfg["tol"], threads=cfg["threads"])
    bifurcation.phase_rows_to_csv(rows, os.path.join(cfg["out"], "phase.csv"))
    bifurcation.beta_star_to_csv(stars, os.path.join(cfg["out"], "beta_star.csv"))
    outputs = ["phase.csv", "beta_star.csv"]
    if cfg["plot"]:
        from . import plots
        plots.plot_phase_diagram(rows, stars,
                                 os.path.join(cfg["out"], "phase.png"))
        outputs.append("phase.png")
    return outputs


def _cmd_lln(cfg: dict) -> list[str]:
    p = ModelParams(beta=cfg["beta"], h=cfg["h"])
    n_list = [int(x) for x in str(cfg["n_list"]).split(",")]
    rows = microsim.lln_convergence_report(
        p, OrderState(1.0, 0.0, 0.0), cfg["t_end"], n_list,
        cfg["seeds_per_n"], root_seed=cfg["seed"],
        record_dt=cfg["record_dt"], threads=cfg["threads"])
    path = os.path.join(cfg["out"], "lln.csv")
    with open(path, "w") as fh:
        fh.write("n,mean_sup_dist,std_err\n")
        for r in rows:
            fh.write(f"{r['n']},{r['mean_sup_dist']:.12g},{r['std_err']:.12g}\n")
    for r in rows:
        print(f"N={r['n']}: {r['mean_sup_dist']:.6g} +- {r['std_err']:.6g}")
    outputs = ["lln.csv"]
    if cfg["plot"]:
        from . import plots
        plots.plot_lln(rows, os.path.join(cfg["out"], "lln.png"))
        outputs.append("lln.png")
    return outputs


def _cmd_lyapunov2(cfg: dict) -> list[str]:
    ell2 = stability.second_lyapunov_tricritical()
    print(f"{ell2:.8g}")
    return [_write_json(cfg, "lyapunov2.json", {"ell2": ell2})]


_COMMANDS = {
    "simulate": _cmd_simulate,
    "integrate": _cmd_integrate,
    "stability": _cmd_stability,
    "gamma": _cmd_gamma,
    "cycle": _cmd_cycle,
    "betastar": _cmd_betastar,
    "scan": _cmd_scan,
    "lln": _cmd_lln,
    "lyapunov2": _cmd_lyapunov2,
}


def cli_dispatch(argv: list[str]) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _resolve(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        os.makedirs(cfg["out"], exist_ok=True)
        outputs = _COMMANDS[args.command](cfg)
        _write_manifest(cfg, args.command, outputs)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
