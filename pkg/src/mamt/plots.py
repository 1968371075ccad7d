"""Figure rendering for metric archives (single- or multi-seed)."""

from __future__ import annotations

import warnings
from pathlib import Path
from typing import List, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .metrics import series
from .runner import RunResult, load_run

EPSILON_PLOT_RANGE = (0.01, 100.0)


class MissingSeriesError(KeyError):
    """A series required for plotting is absent from every run."""


def discover_runs(archive_dir: Path) -> List[RunResult]:
    archive_dir = Path(archive_dir)
    seed_dirs = sorted(archive_dir.glob("seed-*"))
    if not seed_dirs:
        if (archive_dir / "metrics.jsonl").exists():
            return [load_run(archive_dir)]
        raise FileNotFoundError(f"no run directories under {archive_dir}")
    return [load_run(d) for d in seed_dirs]


def _aligned_series(runs: Sequence[RunResult], key: str, source: str = "records"):
    rows = []
    for run in runs:
        values = series(getattr(run, source), key)
        if values:
            rows.append(values)
    if not rows:
        return None
    length = min(len(r) for r in rows)
    return np.array([r[:length] for r in rows])


def _band_plot(ax, data: np.ndarray, label: str):
    x = np.arange(data.shape[1])
    mean = data.mean(axis=0)
    std = data.std(axis=0)
    ax.plot(x, mean, label=label)
    ax.fill_between(x, mean - std, mean + std, alpha=0.25)


def emit_plots(archive_dir: Path, out_dir: Path | None = None) -> List[Path]:
    """Render every available series; returns the written figure paths.

    The evaluation-return series must exist (named error otherwise); the
    algorithm-specific series are optional and skipped with a warning when
    absent (a plain mirror-descent run has no adaptive-allocation traces).
    """
    runs = discover_runs(archive_dir)
    out_dir = Path(out_dir if out_dir is not None else Path(archive_dir) / "figures")
    out_dir.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []
    n_agents = _count_agents(runs)

    rewards = _aligned_series(runs, "mean_return", source="eval_records")
    if rewards is None:
        raise MissingSeriesError("mean_return")
    fig, ax = plt.subplots(figsize=(6, 4))
    _band_plot(ax, rewards, "evaluation return")
    train = _aligned_series(runs, "train_return_mean")
    if train is not None:
        ax2 = ax.twiny()
        _band_plot(ax2, train, "train return")
        ax2.set_xticks([])
    ax.set_xlabel("evaluation index")
    ax.set_ylabel("episode return")
    ax.legend()
    written.append(_save(fig, out_dir / "returns.png"))

    per_agent_kl = {
        i: _aligned_series(runs, f"policy_old_kl/{i}") for i in range(n_agents)
    }
    if any(v is not None for v in per_agent_kl.values()):
        fig, ax = plt.subplots(figsize=(6, 4))
        for i, data in per_agent_kl.items():
            if data is not None:
                _band_plot(ax, data, f"agent {i}")
        ax.set_xlabel("update iteration")
        ax.set_ylabel("KL(policy, delayed old copy)")
        ax.legend()
        written.append(_save(fig, out_dir / "policy_kl.png"))
    else:
        warnings.warn("series policy_old_kl/* empty; skipping policy KL plot")

    d_ns = _aligned_series(runs, "d_ns_total")
    if d_ns is not None:
        fig, ax = plt.subplots(figsize=(6, 4))
        _band_plot(ax, d_ns, "non-stationarity surrogate")
        ax.set_xlabel("update iteration")
        ax.set_ylabel("total surrogate")
        ax.legend()
        written.append(_save(fig, out_dir / "nonstationarity.png"))
    else:
        warnings.warn("series d_ns_total empty; skipping non-stationarity plot")

    eps_data = {
        i: _aligned_series(runs, f"epsilon/{i}") for i in range(n_agents)
    }
    if any(v is not None for v in eps_data.values()):
        fig, ax = plt.subplots(figsize=(6, 4))
        for i, data in eps_data.items():
            if data is not None and np.all(np.isfinite(data)):
                _band_plot(ax, data, f"agent {i}")
        ax.set_yscale("log")
        ax.set_ylim(*EPSILON_PLOT_RANGE)
        ax.set_xlabel("update iteration")
        ax.set_ylabel("trust region size")
        ax.legend()
        written.append(_save(fig, out_dir / "trust_regions.png"))
    else:
        warnings.warn("series epsilon/* empty; skipping trust-region plot")

    coord_keys = sorted(
        {k for run in runs for k in run.records[0] if k.startswith("coord_pre/")}
        if runs and runs[0].records else set()
    )
    if coord_keys:
        fig, ax = plt.subplots(figsize=(6, 4))
        labels, means, stds = [], [], []
        for key in coord_keys:
            data = _aligned_series(runs, key)
            if data is None:
                continue
            labels.append(key.removeprefix("coord_pre/"))
            means.append(float(data.mean()))
            stds.append(float(data.std()))
        ax.bar(labels, means, yerr=stds, capsize=3)
        ax.set_ylabel("coordination coefficient (pre-threshold)")
        ax.set_xlabel("agent pair")
        written.append(_save(fig, out_dir / "coordination.png"))
    else:
        warnings.warn("series coord_pre/* empty; skipping coordination plot")

    return written


def _count_agents(runs: Sequence[RunResult]) -> int:
    for run in runs:
        for record in run.records:
            agents = [k for k in record if k.startswith("policy_old_kl/")]
            if agents:
                return len(agents)
    return 0


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
