import numpy as np
import torch


def finite_difference_grads(scalar_fn, params, h=1e-5):
    """Central-difference gradients of scalar_fn w.r.t. each parameter tensor."""
    grads = []
    for p in params:
        flat = p.data.reshape(-1)
        g = torch.empty_like(flat)
        for k in range(flat.numel()):
            orig = flat[k].item()
            flat[k] = orig + h
            up = scalar_fn()
            flat[k] = orig - h
            down = scalar_fn()
            flat[k] = orig
            g[k] = (up - down) / (2 * h)
        grads.append(g.view_as(p))
    return grads


def max_relative_error(analytic, numeric, floor=1e-8):
    a = torch.cat([g.reshape(-1) for g in analytic])
    n = torch.cat([g.reshape(-1) for g in numeric])
    denom = torch.maximum(a.abs(), n.abs()).clamp_min(floor)
    # ignore entries where both sides are numerically zero
    mask = denom > floor
    if not mask.any():
        return 0.0
    return float(((a - n).abs() / denom)[mask].max())


def random_batch(rng: np.random.Generator, n_agents, obs_dims, n_actions, batch_size,
                 terminal=False):
    return {
        "obs": [rng.normal(size=(batch_size, d)) for d in obs_dims],
        "next_obs": [rng.normal(size=(batch_size, d)) for d in obs_dims],
        "actions": np.stack(
            [rng.integers(0, a, size=batch_size) for a in n_actions], axis=1
        ),
        "rewards": rng.normal(size=(batch_size, n_agents)),
        "dones": np.full((batch_size, n_agents), terminal),
    }
