"""SVG figures for capability curves, dispatch, trade-offs and ECDFs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from .capability import CapabilitySpec  # noqa: E402

plt.rcParams["svg.hashsalt"] = "ptes"  # stable element ids between runs


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def capability_curves(tags, path, n: int = 201, p_levels=(0.3, 0.65, 1.0)) -> Path:
    soc = np.linspace(0, 100, n)
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6), sharey=True)
    for tag in tags:
        spec = CapabilitySpec.parse(tag)
        levels = p_levels if spec.family == "A" else [None]
        for p in levels:
            label = tag if p is None else f"{tag} p={p:g}"
            for ax, side in zip(axes, ("charge", "discharge")):
                ax.plot(soc, np.broadcast_to(spec.eta(soc, side, p), soc.shape), label=label, lw=1.2)
    for ax, side in zip(axes, ("charging", "discharging")):
        ax.set_xlabel("SoC [%]")
        ax.set_title(side)
        ax.grid(alpha=0.3)
    axes[0].set_ylabel("capability fraction")
    axes[1].legend(fontsize=7, loc="best")
    fig.tight_layout()
    return _save(fig, path)


def dispatch_plot(solution, prices, path) -> Path:
    prices = getattr(prices, "prices", prices)
    h = np.arange(solution.horizon)
    fig, (a1, a2) = plt.subplots(2, 1, figsize=(9, 5), sharex=True)
    a1.step(h, solution.w_dis, where="post", label="discharge")
    a1.step(h, -solution.w_ch, where="post", label="charge")
    a1.set_ylabel("power [kW]")
    ax_p = a1.twinx()
    ax_p.plot(h, prices, color="grey", lw=0.7)
    ax_p.set_ylabel("price [$/MWh]")
    a1.legend(fontsize=7)
    a2.plot(h, solution.soc_pct)
    a2.set_ylabel("SoC [%]")
    a2.set_xlabel("hour")
    a2.set_ylim(0, 100)
    fig.suptitle(solution.tag)
    fig.tight_layout()
    return _save(fig, path)


def tradeoff_scatter(records: pd.DataFrame, path) -> Path:
    """RMSD against time ratio, one marker per model (mean over runs and datasets)."""
    g = records.groupby("model", sort=False)[["rmsd_soc", "rmsd_w", "time_ratio"]].mean()
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6), sharex=True)
    for ax, col, lab in zip(axes, ("rmsd_soc", "rmsd_w"), ("RMSD SoC [%]", "RMSD power [%]")):
        ax.scatter(g.time_ratio, g[col])
        for model, row in g.iterrows():
            ax.annotate(model, (row.time_ratio, row[col]), fontsize=7, xytext=(3, 3), textcoords="offset points")
        ax.set_xscale("log")
        ax.set_xlabel("time ratio to reference")
        ax.set_ylabel(lab)
        ax.grid(alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def ecdf_plot(ecdf: pd.DataFrame, path, group: str = "model") -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    for key, g in ecdf.groupby(group, sort=False):
        ax.step(g.duration_h, g.cumulative_fraction, where="post", label=str(key), lw=1.0)
    ax.set_xscale("symlog", linthresh=1.0)
    ax.set_xlabel("storage duration [h]")
    ax.set_ylabel("cumulative share of discharged energy")
    ax.set_ylim(0, 1.02)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    return _save(fig, path)


def cem_soc_plot(soc: pd.DataFrame, path) -> Path:
    """Representative-week PTES SoC per spec and resource."""
    keys = list(soc.groupby(["spec", "resource"], sort=False).groups)
    fig, ax = plt.subplots(figsize=(8, 4))
    for spec, res in keys:
        g = soc[(soc.spec == spec) & (soc.resource == res)]
        ax.plot(np.arange(len(g)), g.soc_pct.to_numpy(), lw=0.8, label=f"{spec} {res}")
    ax.set_xlabel("hour across representative weeks")
    ax.set_ylabel("SoC [%]")
    ax.set_ylim(0, 100)
    ax.legend(fontsize=6, ncol=2)
    fig.tight_layout()
    return _save(fig, path)
