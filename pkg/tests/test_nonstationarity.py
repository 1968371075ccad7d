import math

import numpy as np
import pytest
import torch

from conftest import finite_difference_grads, max_relative_error
from mamt.nets import CategoricalPolicy, OpponentModelBank
from mamt.nonstationarity import (
    local_ns,
    modeling_loss,
    ns_regression_loss,
    ns_regression_loss_with_aux,
    project_ns,
    system_ns,
)


def make_setup(n=3, obs_dim=4, n_actions=2, seed=0):
    torch.manual_seed(seed)
    policies = [CategoricalPolicy(obs_dim, n_actions, hidden=8) for _ in range(n)]
    bank = OpponentModelBank([obs_dim] * n, [n_actions] * n, hidden=8)
    obs = [torch.randn(6, obs_dim) for _ in range(n)]
    return policies, bank, obs


class TestLocalNs:
    def test_zero_when_models_match_policies(self):
        n = 2
        torch.manual_seed(0)
        policies = [CategoricalPolicy(4, 3, hidden=8) for _ in range(n)]
        bank = OpponentModelBank([4, 4], [3, 3], hidden=8)
        obs = [torch.randn(5, 4), torch.randn(5, 4)]
        # make predictions exactly match: copy the opponent's net and feed same obs
        bank.models["0->1"].load_state_dict(policies[1].net.state_dict(), strict=False)
        bank.models["0->1"].net.load_state_dict(policies[1].net.state_dict())
        obs_same = [obs[1], obs[1]]
        value = local_ns(0, np.array([0.0, 1.0]), bank, policies, obs_same)
        assert value == pytest.approx(0.0, abs=1e-7)

    def test_zero_coordination_row_gives_zero(self):
        policies, bank, obs = make_setup()
        assert local_ns(0, np.zeros(3), bank, policies, obs) == 0.0

    def test_single_coupled_pair_passes_kl_through(self):
        # C = 1 for the single pair; known KL 0.1438 should survive projection
        policies, bank, obs = make_setup(n=2)

        class FixedDist:
            n_actions = 2

            def __init__(self, probs):
                self.probs = torch.tensor(probs)

            def __call__(self, o):
                return self.probs.expand(o.shape[0], 2)

        class FixedBank:
            def predict(self, i, j, o):
                return torch.tensor([0.5, 0.5]).expand(o.shape[0], 2)

        policies = [FixedDist([0.5, 0.5]), FixedDist([0.25, 0.75])]
        value = local_ns(0, np.array([0.0, 1.0]), FixedBank(), policies, obs[:2])
        assert value == pytest.approx(0.14384103622589042, abs=1e-6)

    def test_projection_clamps(self):
        assert project_ns(-0.5) == 0.0
        assert project_ns(3.0, c_max=10.0) == 3.0
        assert project_ns(25.0, c_max=10.0) == 10.0

    def test_projection_applied_in_local_ns(self):
        class HugeBank:
            def predict(self, i, j, o):
                return torch.tensor([1.0 - 1e-8, 1e-8]).expand(o.shape[0], 2)

        class Opposite:
            n_actions = 2

            def __call__(self, o):
                return torch.tensor([1e-8, 1.0 - 1e-8]).expand(o.shape[0], 2)

        obs = [torch.zeros(3, 4), torch.zeros(3, 4)]
        value = local_ns(0, np.array([0.0, 1.0]), HugeBank(), [Opposite(), Opposite()],
                         obs, c_max=10.0)
        assert value == 10.0


class TestSystemNs:
    def test_sum(self):
        assert system_ns([0.1, 0.2, 0.3]) == pytest.approx(0.6)

    def test_zero(self):
        assert system_ns([0.0, 0.0]) == 0.0

    def test_order_invariant(self):
        vals = [0.5, 1.25, 0.01]
        assert system_ns(vals) == pytest.approx(system_ns(vals[::-1]))


class TestModelingLoss:
    def test_perfect_predictions_give_zero(self):
        class PerfectBank:
            def __init__(self, n):
                self.n = n

            def pairs(self):
                for i in range(self.n):
                    for j in range(self.n):
                        if i != j:
                            yield i, j

            def predict(self, i, j, o):
                out = torch.full((o.shape[0], 2), 1e-12)
                out[:, 1] = 1.0
                return out

        obs = [torch.zeros(4, 3)] * 2
        actions = torch.ones(4, 2, dtype=torch.long)
        loss = modeling_loss(PerfectBank(2), obs, actions)
        assert float(loss) == pytest.approx(0.0, abs=1e-9)

    def test_uniform_predictions_give_log_k(self):
        k = 4

        class UniformBank:
            def pairs(self):
                yield 0, 1

            def predict(self, i, j, o):
                return torch.full((o.shape[0], k), 1.0 / k)

        obs = [torch.zeros(5, 3)] * 2
        actions = torch.randint(0, k, (5, 2))
        loss = modeling_loss(UniformBank(), obs, actions)
        assert float(loss) == pytest.approx(math.log(k), abs=1e-6)

    def test_invariant_to_relabeling_unexecuted_actions(self):
        # permuting probabilities among non-executed actions leaves CE unchanged
        class Bank:
            def __init__(self, probs):
                self.probs = probs

            def pairs(self):
                yield 0, 1

            def predict(self, i, j, o):
                return self.probs.expand(o.shape[0], 3)

        obs = [torch.zeros(3, 2)] * 2
        actions = torch.zeros(3, 2, dtype=torch.long)  # executed action 0
        a = Bank(torch.tensor([0.5, 0.3, 0.2]))
        b = Bank(torch.tensor([0.5, 0.2, 0.3]))
        assert float(modeling_loss(a, obs, actions)) == pytest.approx(
            float(modeling_loss(b, obs, actions)), abs=1e-7
        )

    def test_training_reduces_loss_against_frozen_opponent(self):
        torch.manual_seed(0)
        bank = OpponentModelBank([3, 3], [4, 4], hidden=16)
        opt = torch.optim.Adam(bank.parameters(), lr=5e-3)
        rng = np.random.default_rng(0)
        obs_np = rng.normal(size=(128, 3))
        actions_np = rng.integers(0, 4, size=(128, 2))
        obs = [torch.tensor(obs_np, dtype=torch.float32)] * 2
        actions = torch.tensor(actions_np)
        first = None
        for step in range(60):
            loss = modeling_loss(bank, obs, actions)
            if first is None:
                first = float(loss.detach())
            opt.zero_grad()
            loss.backward()
            opt.step()
        assert float(loss.detach()) < first


class TestNsRegressionLoss:
    def test_equal_sums_zero(self):
        khat = torch.tensor([0.4, 0.6])
        d = torch.tensor([0.9, 0.1])
        assert float(ns_regression_loss(khat, d)) == pytest.approx(0.0, abs=1e-12)

    def test_unit_gap(self):
        khat = torch.tensor([1.0, 0.0])
        d = torch.tensor([0.0, 0.0])
        assert float(ns_regression_loss(khat, d)) == pytest.approx(1.0)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            ns_regression_loss(torch.zeros(2), torch.zeros(3))

    def test_aux_term_shapes_per_agent(self):
        khat = torch.tensor([0.4, 0.6])
        d = torch.tensor([0.6, 0.4])
        pure = float(ns_regression_loss(khat, d))
        with_aux = float(ns_regression_loss_with_aux(khat, d, aux_weight=0.1))
        assert pure == pytest.approx(0.0, abs=1e-12)
        assert with_aux == pytest.approx(0.1 * (0.04 + 0.04), abs=1e-6)

    def test_gradient_through_khat_matches_finite_differences(self):
        khat = torch.tensor([0.3, 0.9, 0.1], dtype=torch.double, requires_grad=True)
        d = torch.tensor([0.2, 0.2, 0.2], dtype=torch.double)
        loss = ns_regression_loss(khat, d)
        (grad,) = torch.autograd.grad(loss, khat)

        def scalar():
            return float(ns_regression_loss(khat.detach(), d))

        fd = finite_difference_grads(scalar, [khat.detach()])
        assert max_relative_error([grad], fd) < 1e-6
