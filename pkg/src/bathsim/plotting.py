"""Static figures written to files (non-interactive backend)."""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path, config_hash: str = "") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # no software/version stamp, so output depends only on the data
    meta = {"Software": None, "Description": f"bathsim config_hash={config_hash}"}
    fig.savefig(path, dpi=110, metadata=meta)
    plt.close(fig)
    return path


def plot_trajectory(record, path, title: str = "", other=None, other_label: str = "GLE",
                    config_hash: str = "") -> Path:
    """Oscillator position and energy drift against time."""
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(8, 5.5), sharex=True)
    ax1.plot(record.t, record.x, lw=0.8, label=record.meta.get("engine", "full"))
    if other is not None:
        ax1.plot(other.t, other.x, lw=0.8, ls="--", label=other_label)
        ax1.legend(loc="upper right")
    ax1.set_ylabel("x(t)")
    ax1.set_title(title)
    E = record.E_total
    if np.all(np.isfinite(E)):
        ax2.plot(record.t, (E - E[0]) / max(abs(E[0]), 1.0), lw=0.8)
        ax2.set_ylabel("relative energy change")
    ax2.set_xlabel("t")
    fig.tight_layout()
    return _save(fig, path, config_hash)


def plot_gap_table(nu, w_diamond, phi_vals, path, lambda0: Optional[float] = None,
                   config_hash: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(nu, w_diamond, label="gap kernel")
    ax.plot(nu, phi_vals, label="secular function")
    ax.axhline(0.0, color="k", lw=0.5)
    if lambda0 is not None:
        ax.axvline(lambda0, color="C3", ls=":", label=f"lambda0 = {lambda0:.6g}")
    ax.set_xlabel("nu")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path, config_hash)


def plot_kernel(tau, w, path, config_hash: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(tau, w, lw=0.8)
    ax.set_xlabel("tau")
    ax.set_ylabel("w(tau)")
    fig.tight_layout()
    return _save(fig, path, config_hash)


def plot_sweep(values: Sequence[float], lambda0: Sequence[Optional[float]], measured: Sequence[str],
               path, parameter: str = "v", config_hash: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    lam = np.array([np.nan if v is None else v for v in lambda0], dtype=float)
    ax.plot(values, lam, "o-", label="predicted lambda0")
    for x, m in zip(values, measured):
        ax.annotate(m[0] if m else "?", (x, 0.0), textcoords="offset points", xytext=(0, 4),
                    ha="center", fontsize=8)
    ax.set_xlabel(parameter)
    ax.set_ylabel("lambda0")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path, config_hash)
