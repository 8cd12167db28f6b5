"""Figure rendering for the CLI report paths.

Every renderer takes already-computed results and writes a PNG next to the
delimited output; nothing here recomputes model quantities.
"""

from __future__ import annotations

import matplotlib
matplotlib.use("Agg")

import numpy as np
import matplotlib.pyplot as plt

from .model import H_TRICRITICAL, beta_c


def plot_trajectory(times, states, labels, path, title=None):
    fig, ax = plt.subplots(figsize=(7, 4))
    for i, lab in enumerate(labels):
        ax.plot(times, states[:, i], label=lab, lw=1.0)
    ax.set_xlabel("t")
    ax.legend(frameon=False)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_phase_diagram(rows, stars, path):
    """Scatter the classified (h, beta) grid with the critical curves."""
    colors = {"FP": "#4878cf", "FPLC": "#e5a137", "LC": "#d1495b",
              "IND": "#999999"}
    fig, ax = plt.subplots(figsize=(7, 5))
    for label, color in colors.items():
        pts = [(r["h"], r["beta"]) for r in rows if r["class"] == label]
        if pts:
            hs, bs = zip(*pts)
            ax.scatter(hs, bs, s=9, c=color, label=label, marker="s")
    h_line = np.linspace(min(r["h"] for r in rows), max(r["h"] for r in rows), 300)
    ax.plot(h_line, [beta_c(h) for h in h_line], "k-", lw=1.2,
            label=r"$\beta_c(h)$")
    if stars:
        hs = [s.h for s in stars]
        ax.plot(hs, [s.value for s in stars], "r--", lw=1.2,
                label=r"$\beta_\star(h)$")
    ax.axvline(H_TRICRITICAL, color="k", ls=":", lw=0.8)
    ax.set_xlabel("h")
    ax.set_ylabel(r"$\beta$")
    ax.set_ylim(min(r["beta"] for r in rows), max(r["beta"] for r in rows))
    ax.legend(frameon=False, loc="upper left")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_cycle(states_stable, states_unstable, path, title=None):
    fig, ax = plt.subplots(figsize=(5, 5))
    if states_stable is not None:
        ax.plot(states_stable[:, 0], states_stable[:, 1], "-",
                color="#d1495b", lw=1.2, label="stable cycle")
    if states_unstable is not None:
        ax.plot(states_unstable[:, 0], states_unstable[:, 1], "--",
                color="#4878cf", lw=1.2, label="unstable cycle")
    ax.plot([0], [0], "k.", ms=8)
    ax.set_xlabel("y")
    ax.set_ylabel(r"$\lambda$")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_lln(rows, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    ns = [r["n"] for r in rows]
    means = [r["mean_sup_dist"] for r in rows]
    errs = [r["std_err"] for r in rows]
    ax.errorbar(ns, means, yerr=errs, fmt="o-", capsize=3)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("N")
    ax.set_ylabel("mean sup distance to ODE")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
