"""Companion figures for run reports.

Rendered headlessly next to the report file: a per-sample residual chart and
a parameter-map scatter.  Figures are a convenience view of the same table
the report serializes; nothing reads them back.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)
import numpy as np

__all__ = ["residual_figure", "map_figure"]

_FLOOR = 1e-18


def residual_figure(path: str, table: list[dict], tolerance: float | None) -> bool:
    """Per-sample action/operator residuals on a log scale."""
    if not table:
        return False
    idx = np.arange(len(table))
    act = np.array(
        [r["action_residual"] if r["action_residual"] is not None else np.nan for r in table]
    )
    opr = np.array(
        [r["operator_residual"] if r["operator_residual"] is not None else np.nan for r in table]
    )
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    if np.isfinite(act).any():
        ax.semilogy(idx, np.maximum(act, _FLOOR), ".", label="action residual")
    if np.isfinite(opr).any():
        ax.semilogy(idx, np.maximum(opr, _FLOOR), "x", ms=4, label="operator residual")
    if tolerance is not None:
        ax.axhline(tolerance, color="tab:red", lw=1, ls="--", label="tolerance")
    ax.set_xlabel("sample")
    ax.set_ylabel("relative residual")
    ax.set_title("verification residuals")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return True


def map_figure(path: str, table: list[dict]) -> bool:
    """|component| of the synthesized image against |eps|, log-log."""
    rows = [r for r in table if r.get("image")]
    if not rows:
        return False
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    n_img = len(rows[0]["image"])
    eps_mag = []
    for r in rows:
        prod = 1.0 + 0.0j
        for re, im in r["eps"]:
            prod *= complex(re, im)
        eps_mag.append(max(abs(prod), _FLOOR))
    for i in range(n_img):
        ys = [max(abs(complex(*r["image"][i])), _FLOOR) for r in rows]
        ax.loglog(eps_mag, ys, ".", ms=4, label=f"|F(eps)[{i}]|")
    ax.set_xlabel("|eps| (component product)")
    ax.set_ylabel("|image component|")
    ax.set_title("synthesized parameter map")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return True
