"""Rollout/update loop, evaluation, and the decomposition-scheme study.

One learner consumes batches from the replay buffer; parallel environment
instances are stepped synchronously in-process (deterministic given the
seed). Every ``steps_per_update`` environment ticks, ``num_epochs_per_step``
update iterations run; each iteration appends one metric record.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import torch

from .buffer import ReplayBuffer
from .checkpoint import save_checkpoint
from .config import ExperimentConfig
from .envs import make_env
from .envs.base import Env, TransitionRecord
from .mamd import MamdLearner
from .mamt import MamtLearner
from .metrics import MetricsWriter, read_records, read_summary, write_summary


def resolve_epsilon(config: ExperimentConfig, env: Env) -> Optional[List[float]]:
    """Per-agent trust region sizes implied by the configured algorithm.

    baseline: no constraints (inf everywhere). mamd: the total budget split
    uniformly. mamd-op: the same uniform per-agent size as mamd, but applied
    only to agents that are actually coupled to someone else, with no
    constraint on the rest (this reduces to baseline when nobody is coupled
    and to mamd when everyone is). mamt adapts its own sizes, so None is
    returned.
    """
    n = env.spec.n_agents
    if config.algorithm == "mamt":
        return None
    if config.algorithm == "baseline":
        return [math.inf] * n
    if config.algorithm == "mamd":
        return [config.trust_region / n] * n
    if config.algorithm == "mamd-op":
        return [
            config.trust_region / n if len(env.coupling.partners(i)) > 1 else math.inf
            for i in range(n)
        ]
    raise ValueError(f"unknown algorithm {config.algorithm!r}")


def build_learner(config: ExperimentConfig, env: Env, seed: int) -> MamdLearner:
    if config.algorithm == "mamt":
        return MamtLearner(env.spec, config, seed=seed)
    return MamdLearner(env.spec, config, epsilon=resolve_epsilon(config, env), seed=seed)


def evaluate(learner: MamdLearner, config: ExperimentConfig, seed: int,
             eval_index: int) -> Dict[str, float]:
    """Greedy-policy episodes on freshly seeded environments."""
    returns = []
    for ep in range(config.eval_episodes):
        env = make_env(config.env.name, horizon=config.env.horizon)
        obs = env.reset(seed=seed * 100_000 + eval_index * 1_000 + ep)
        total = np.zeros(env.spec.n_agents)
        done = False
        while not done:
            obs_batch = [o[None, :] for o in obs]
            actions = learner.act(obs_batch, greedy=True)[0]
            obs, rewards, dones = env.step(actions)
            total += rewards
            done = bool(dones.all())
        returns.append(float(total.mean()))
    return {
        "eval_index": eval_index,
        "mean_return": float(np.mean(returns)),
        "std_return": float(np.std(returns)),
    }


@dataclass
class RunResult:
    run_dir: Optional[Path]
    records: List[dict]
    eval_records: List[dict]
    summary: dict


def run_single(config: ExperimentConfig, seed: int,
               run_dir: Optional[Path] = None) -> RunResult:
    """One seeded training run; writes metrics/config/checkpoint if run_dir set."""
    torch.set_num_threads(1)
    env_horizon = config.env.horizon
    envs = [make_env(config.env.name, horizon=env_horizon)
            for _ in range(config.env.n_parallel)]
    obs = [e.reset(seed=seed * 10_000 + k) for k, e in enumerate(envs)]

    learner = build_learner(config, envs[0], seed)
    buffer = ReplayBuffer(config.buffer_size, rng=np.random.default_rng(seed + 777))

    writer = MetricsWriter(run_dir / "metrics.jsonl") if run_dir else None
    eval_writer = MetricsWriter(run_dir / "eval.jsonl") if run_dir else None
    if run_dir:
        config.save(run_dir / "config.yaml")

    records: List[dict] = []
    eval_records: List[dict] = []
    episode_returns: List[float] = []
    episode_ticks: List[int] = []
    running = [np.zeros(e.spec.n_agents) for e in envs]
    eval_count = 0

    for tick in range(1, config.total_env_steps + 1):
        obs_batch = [
            np.stack([obs[k][i] for k in range(len(envs))])
            for i in range(envs[0].spec.n_agents)
        ]
        actions = learner.act(obs_batch)  # (n_envs, n_agents)
        for k, env in enumerate(envs):
            next_obs, rewards, dones = env.step(actions[k])
            buffer.add(TransitionRecord(
                obs=obs[k], actions=actions[k], rewards=rewards,
                next_obs=next_obs, dones=dones,
            ))
            running[k] += rewards
            if dones.all():
                episode_returns.append(float(running[k].mean()))
                episode_ticks.append(tick)
                running[k] = np.zeros(env.spec.n_agents)
                obs[k] = env.reset()
            else:
                obs[k] = next_obs

        if tick % config.steps_per_update == 0 and len(buffer) >= config.batch_size:
            for _ in range(config.num_epochs_per_step):
                metrics = learner.update(buffer.sample(config.batch_size))
                record = {"env_steps": tick, "iteration": learner.iteration, **metrics}
                if episode_returns:
                    record["train_return_mean"] = float(
                        np.mean(episode_returns[-20:])
                    )
                records.append(record)
                if writer:
                    writer.write(record)

        if tick % config.eval_interval == 0:
            eval_count += 1
            ev = {"env_steps": tick, **evaluate(learner, config, seed, eval_count)}
            eval_records.append(ev)
            if eval_writer:
                eval_writer.write(ev)
            if run_dir and getattr(learner, "coordination", None) is not None:
                _write_coordination_csv(
                    learner.coordination, run_dir / "coordination", tick
                )

    summary = summarize_run(config, seed, records, eval_records)
    tail_start = config.total_env_steps * 0.8
    tail_returns = [
        r for r, t in zip(episode_returns, episode_ticks) if t > tail_start
    ]
    if tail_returns:
        summary["final_train_return"] = float(np.mean(tail_returns))
        summary["n_tail_episodes"] = len(tail_returns)
    if run_dir:
        writer.close()
        eval_writer.close()
        write_summary(run_dir / "summary.json", summary)
        save_checkpoint(learner, run_dir / "checkpoint.pt")
    return RunResult(run_dir, records, eval_records, summary)


def _write_coordination_csv(coordination, directory: Path, tick: int) -> None:
    """Snapshot of the pre/post-threshold coordination rows at one eval point."""
    directory.mkdir(parents=True, exist_ok=True)
    n = coordination.n_agents
    with open(directory / f"step-{tick:08d}.csv", "w") as fh:
        fh.write("i,j,pre_threshold,thresholded\n")
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                fh.write(
                    f"{i},{j},{coordination.pre_threshold[i, j]:.8f},"
                    f"{coordination.matrix[i, j]:.8f}\n"
                )


def summarize_run(config: ExperimentConfig, seed: int, records: List[dict],
                  eval_records: List[dict]) -> dict:
    summary = {
        "algorithm": config.algorithm,
        "env": config.env.name,
        "seed": seed,
        "n_updates": len(records),
    }
    if eval_records:
        tail = max(1, len(eval_records) // 5)
        summary["final_eval_return"] = float(
            np.mean([r["mean_return"] for r in eval_records[-tail:]])
        )
    if records:
        kls = [r["policy_old_kl_mean"] for r in records if "policy_old_kl_mean" in r]
        if kls:
            summary["mean_policy_old_kl"] = float(np.mean(kls))
        d_ns = [r["d_ns_total"] for r in records if "d_ns_total" in r]
        if d_ns:
            head = max(1, len(d_ns) // 10)
            summary["d_ns_first_tenth"] = float(np.mean(d_ns[:head]))
            summary["d_ns_last_tenth"] = float(np.mean(d_ns[-head:]))
    return summary


def run_experiment(config: ExperimentConfig,
                   out_dir: Optional[Path] = None) -> List[RunResult]:
    """All configured seeds, one run directory per seed."""
    out_dir = Path(out_dir if out_dir is not None else config.out_dir)
    results = []
    for seed in config.seeds:
        run_dir = out_dir / f"seed-{seed}"
        run_dir.mkdir(parents=True, exist_ok=True)
        results.append(run_single(config, seed, run_dir))
    return results


DILEMMA_VARIANTS = {"sep": "spread3-sep", "mix": "spread3-mix", "ful": "spread3-ful"}
DILEMMA_ALGORITHMS = ("baseline", "mamd", "mamd-op")


def dilemma_study(config: ExperimentConfig,
                  out_dir: Optional[Path] = None) -> dict:
    """Compare decomposition schemes on one three-agent coupling variant.

    Runs the unconstrained baseline, the uniform split, and the
    coupling-aware split across the configured seeds and reports the
    seed-averaged final evaluation returns.
    """
    if config.env.name not in DILEMMA_VARIANTS.values():
        raise ValueError(
            f"decomposition study needs a three-agent coupling variant, "
            f"got {config.env.name!r}"
        )
    out_dir = Path(out_dir if out_dir is not None else config.out_dir)
    table: Dict[str, dict] = {}
    for algorithm in DILEMMA_ALGORITHMS:
        algo_config = config.with_overrides(algorithm=algorithm)
        results = run_experiment(algo_config, out_dir / algorithm)
        # tail-of-training episode returns: the curve quantity, heavily
        # averaged (hundreds of episodes), unlike the thin greedy evals
        finals = [
            r.summary.get("final_train_return", r.summary.get("final_eval_return"))
            for r in results
        ]
        table[algorithm] = {
            "final_returns": finals,
            "mean": float(np.mean(finals)),
            "std": float(np.std(finals)),
            "final_eval_returns": [r.summary.get("final_eval_return") for r in results],
        }
    report = {"env": config.env.name, "seeds": list(config.seeds), "results": table}
    write_summary(out_dir / "dilemma_report.json", report)
    return report


def load_run(run_dir: Path) -> RunResult:
    run_dir = Path(run_dir)
    return RunResult(
        run_dir=run_dir,
        records=read_records(run_dir / "metrics.jsonl"),
        eval_records=read_records(run_dir / "eval.jsonl"),
        summary=read_summary(run_dir / "summary.json"),
    )
