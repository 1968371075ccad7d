"""Versioned checkpoint container for learner state."""

from __future__ import annotations

from pathlib import Path

import torch

FORMAT_VERSION = 1


def checkpoint_state(learner) -> dict:
    state = {
        "format_version": FORMAT_VERSION,
        "iteration": learner.iteration,
        "refresh_phase": learner.iteration % learner.config.mirror_descent_delay,
        "epsilon": list(map(float, learner.epsilon)),
        "config": learner.config.to_dict(),
        "policies": [p.state_dict() for p in learner.snapshot.policies],
        "critic": learner.snapshot.critic.state_dict(),
        "target_policies": [p.state_dict() for p in learner.snapshot.target_policies],
        "target_critic": learner.snapshot.target_critic.state_dict(),
        "old_policies": [p.state_dict() for p in learner.snapshot.old_policies],
    }
    if hasattr(learner, "modeling"):
        state["modeling"] = learner.modeling.state_dict()
        state["trdn"] = learner.trdn.state_dict()
    return state


def save_checkpoint(learner, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(checkpoint_state(learner), path)


def load_checkpoint(path, learner) -> dict:
    """Restore net parameters and counters into an already-built learner."""
    state = torch.load(path, weights_only=False)
    if state.get("format_version") != FORMAT_VERSION:
        raise ValueError(
            f"checkpoint format {state.get('format_version')!r} unsupported "
            f"(expected {FORMAT_VERSION})"
        )
    for p, s in zip(learner.snapshot.policies, state["policies"]):
        p.load_state_dict(s)
    learner.snapshot.critic.load_state_dict(state["critic"])
    for p, s in zip(learner.snapshot.target_policies, state["target_policies"]):
        p.load_state_dict(s)
    learner.snapshot.target_critic.load_state_dict(state["target_critic"])
    for p, s in zip(learner.snapshot.old_policies, state["old_policies"]):
        p.load_state_dict(s)
    if "modeling" in state and hasattr(learner, "modeling"):
        learner.modeling.load_state_dict(state["modeling"])
        learner.trdn.load_state_dict(state["trdn"])
    learner.iteration = state["iteration"]
    import numpy as np

    learner.epsilon = np.asarray(state["epsilon"], dtype=np.float64)
    return state
