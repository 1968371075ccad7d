"""Brute-force verification suite for the divergence-decomposition theory.

Each check here recomputes a claimed identity or bound by direct
enumeration on randomly generated or closed-form instances, independent of
the training code. The ``verify-theorems`` CLI subcommand drives
:func:`run_all` and renders the outcome as a pass/fail table plus a CSV of
the tabular-game divergence sweep.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .divergence import (
    joint_bound_margin,
    joint_kl_exact,
    joint_product,
    kl,
    transition_kl,
)
from .envs.tabular import TabularGame

MEANFIELD_EQUALITY_TOL = 1e-8
BOUND_MARGIN_TOL = -1e-10
CLOSED_FORM_TOL = 1e-10

SWEEP_GRID = np.round(np.arange(1, 20) * 0.05, 2)  # 0.05 .. 0.95


def transition_kl_closed_form(m: float) -> float:
    """Closed-form dynamics divergence for the tabular game, own action a11."""
    return 0.2 * (1 + m) * np.log((2 + 2 * m) / (2 + m)) + 0.2 * (4 - m) * np.log(
        (8 - 2 * m) / (8 - m)
    )


def policy_kl_closed_form(m: float) -> float:
    """Closed-form KL between the (m, 1-m) and (m/2, 1-m/2) policies."""
    return m * np.log(2.0) + (1 - m) * np.log((2 - 2 * m) / (2 - m))


def _random_distribution(rng: np.random.Generator, size: int) -> np.ndarray:
    p = rng.gamma(1.0, size=size) + 1e-3
    return p / p.sum()


def meanfield_equality_trials(n_trials: int, rng: np.random.Generator) -> np.ndarray:
    """|enumerated joint KL - sum of local KLs| over random factored instances.

    Instances have 2-4 agents with 2-4 actions apiece and small per-agent
    observation supports with factored observation weights; the enumerated
    side takes the exact expectation over joint observations.
    """
    gaps = np.empty(n_trials)
    for t in range(n_trials):
        n = int(rng.integers(2, 5))
        n_actions = [int(rng.integers(2, 5)) for _ in range(n)]
        n_obs = [int(rng.integers(1, 4)) for _ in range(n)]
        obs_weights = [_random_distribution(rng, k) for k in n_obs]
        new = [
            np.stack([_random_distribution(rng, a) for _ in range(k)])
            for a, k in zip(n_actions, n_obs)
        ]
        old = [
            np.stack([_random_distribution(rng, a) for _ in range(k)])
            for a, k in zip(n_actions, n_obs)
        ]

        exact = 0.0
        for joint_obs in np.ndindex(*n_obs):
            weight = float(np.prod([w[o] for w, o in zip(obs_weights, joint_obs)]))
            exact += weight * joint_kl_exact(
                [new[i][o] for i, o in enumerate(joint_obs)],
                [old[i][o] for i, o in enumerate(joint_obs)],
            )

        meanfield = sum(
            float(np.sum([w[o] * kl(new[i][o], old[i][o]) for o in range(n_obs[i])]))
            for i, w in enumerate(obs_weights)
        )
        gaps[t] = abs(exact - meanfield)
    return gaps


def joint_bound_trials(
    n_factored: int, n_correlated: int, rng: np.random.Generator
) -> np.ndarray:
    """Bound margins for random factored and correlated joint pairs."""
    margins = np.empty(n_factored + n_correlated)
    for t in range(n_factored):
        dists_p = [_random_distribution(rng, 2) for _ in range(3)]
        dists_q = [_random_distribution(rng, 2) for _ in range(3)]
        margins[t] = joint_bound_margin(joint_product(dists_p), joint_product(dists_q))
    for t in range(n_correlated):
        shape = (int(rng.integers(2, 5)), int(rng.integers(2, 5)))
        p = _random_distribution(rng, shape[0] * shape[1]).reshape(shape)
        q = _random_distribution(rng, shape[0] * shape[1]).reshape(shape)
        margins[n_factored + t] = joint_bound_margin(p, q)
    return margins


def transition_policy_sweep(grid=SWEEP_GRID) -> List[dict]:
    """Dynamics vs policy divergence across the tabular-game policy family.

    For each m in the grid (paired with m/2) the row carries the
    marginalisation-based dynamics KL for own action a11, the policy KL,
    and their closed forms for cross-checking.
    """
    game = TabularGame()
    rows = []
    for m in grid:
        n = m / 2.0
        rows.append(
            {
                "m": float(m),
                "transition_kl": transition_kl(game, float(m), action=0),
                "policy_kl": kl(np.array([m, 1 - m]), np.array([n, 1 - n])),
                "transition_kl_closed": float(transition_kl_closed_form(m)),
                "policy_kl_closed": float(policy_kl_closed_form(m)),
            }
        )
    return rows


@dataclass
class OracleCheck:
    name: str
    passed: bool
    detail: str
    seconds: float


@dataclass
class OracleReport:
    checks: List[OracleCheck] = field(default_factory=list)
    sweep_rows: List[dict] = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def table(self) -> str:
        width = max(len(c.name) for c in self.checks)
        lines = []
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            lines.append(f"{c.name:<{width}}  {status}  {c.detail}  ({c.seconds:.2f}s)")
        return "\n".join(lines)


def _timed(report: OracleReport, name: str, fn) -> None:
    start = time.perf_counter()
    passed, detail = fn()
    report.checks.append(OracleCheck(name, passed, detail, time.perf_counter() - start))


def run_all(seed: int = 0, n_trials: int = 1000) -> OracleReport:
    """Run every enumeration oracle and collect a pass/fail report."""
    report = OracleReport()
    rng = np.random.default_rng(seed)

    def check_meanfield():
        gaps = meanfield_equality_trials(n_trials, rng)
        worst = float(gaps.max())
        return worst <= MEANFIELD_EQUALITY_TOL, f"max |joint - local sum| = {worst:.2e}"

    def check_bound():
        margins = joint_bound_trials(n_trials, n_trials, rng)
        worst = float(margins.min())
        return worst >= BOUND_MARGIN_TOL, f"min margin = {worst:.2e}"

    def check_sweep():
        rows = transition_policy_sweep()
        report.sweep_rows = rows
        tk = np.array([r["transition_kl"] for r in rows])
        pk = np.array([r["policy_kl"] for r in rows])
        closed_gap = max(
            float(np.max(np.abs(tk - [r["transition_kl_closed"] for r in rows]))),
            float(np.max(np.abs(pk - [r["policy_kl_closed"] for r in rows]))),
        )
        monotone = bool(np.all(np.diff(tk) > 0) and np.all(np.diff(pk) > 0))
        ordered = bool(np.all(tk <= pk))
        ok = monotone and ordered and closed_gap <= CLOSED_FORM_TOL
        return ok, (
            f"monotone={monotone} ordered={ordered} closed-form gap={closed_gap:.2e}"
        )

    _timed(report, "mean-field local-sum equality", check_meanfield)
    _timed(report, "joint divergence upper bound", check_bound)
    _timed(report, "dynamics-vs-policy divergence sweep", check_sweep)
    return report


def write_sweep_csv(rows: List[dict], path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
