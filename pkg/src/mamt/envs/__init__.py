"""Environment registry keyed by the ``env.name`` config values."""

from __future__ import annotations

from .base import (
    CouplingGraph,
    Env,
    InvalidActionError,
    PosgSpec,
    TransitionRecord,
    UnsupportedOperationError,
)
from .spread import SpreadEnv
from .tabular import TabularGame, paired_policies

ENV_NAMES = ("spread", "spread3-sep", "spread3-mix", "spread3-ful", "tabular")


def make_env(name: str, horizon: int | None = None) -> Env:
    if name == "tabular":
        return TabularGame()
    kwargs = {} if horizon is None else {"horizon": horizon}
    if name == "spread":
        return SpreadEnv(n_agents=2, **kwargs)
    if name == "spread3-sep":
        return SpreadEnv(n_agents=3, coupling=CouplingGraph.separate(3), **kwargs)
    if name == "spread3-mix":
        return SpreadEnv(n_agents=3, coupling=CouplingGraph.pairs(3, [(0, 2)]), **kwargs)
    if name == "spread3-ful":
        return SpreadEnv(n_agents=3, coupling=CouplingGraph.full(3), **kwargs)
    raise ValueError(f"unknown environment {name!r}; choose one of {ENV_NAMES}")


__all__ = [
    "CouplingGraph",
    "Env",
    "ENV_NAMES",
    "InvalidActionError",
    "PosgSpec",
    "SpreadEnv",
    "TabularGame",
    "TransitionRecord",
    "UnsupportedOperationError",
    "make_env",
    "paired_policies",
]
