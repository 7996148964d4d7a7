import json

import numpy as np
import pytest

from nhmdp.algo.model import build_model, load_model


def _random_stage(rng, num_states, num_actions):
    kernels = rng.dirichlet(2.0 * np.ones(num_states), size=(num_actions, num_states))
    rewards = rng.uniform(-1.0, 1.0, size=(num_actions, num_states))
    return kernels, rewards


@pytest.fixture
def make_random_model():
    """Random valid full-support models: S <= 6, A <= 4, p <= 3 unless given."""
    def factory(seed, num_states=None, num_actions=None, q=0, p=None):
        rng = np.random.default_rng(seed)
        num_states = num_states or int(rng.integers(2, 7))
        num_actions = num_actions or int(rng.integers(1, 5))
        p = p or int(rng.integers(1, 4))
        states = [f"s{i}" for i in range(num_states)]
        actions = [f"a{i}" for i in range(num_actions)]
        prefix = [_random_stage(rng, num_states, num_actions) for _ in range(q)]
        period = [_random_stage(rng, num_states, num_actions) for _ in range(p)]
        return build_model(states, actions, states[0], prefix, period)
    return factory


@pytest.fixture
def iid2_model():
    """Two states, one action, every row [0.5, 0.5], rewards (0, 1)."""
    kernels = np.array([[[0.5, 0.5], [0.5, 0.5]]])
    rewards = np.array([[0.0, 1.0]])
    return build_model(["x0", "x1"], ["a"], "x0", [], [(kernels, rewards)])


@pytest.fixture
def alternating_model():
    """One state whose reward alternates 1, 3."""
    kernels = np.ones((1, 1, 1))
    return build_model(["x"], ["a"], "x", [], [(kernels, np.array([[1.0]])), (kernels, np.array([[3.0]]))])


@pytest.fixture
def swap_model():
    """Two states, action a keeps the state, action b swaps it; c = [[0, 1], [2, 0]] (rows are states)."""
    kernels = np.array([np.eye(2), np.array([[0.0, 1.0], [1.0, 0.0]])])
    rewards = np.array([[0.0, 2.0], [1.0, 0.0]])
    return build_model(["x0", "x1"], ["a", "b"], "x0", [], [(kernels, rewards)])


@pytest.fixture
def half_model():
    """One action, rows [1, 0] and [0.5, 0.5]: Δ = 0.5, K = ∞, reward span 1."""
    kernels = np.array([[[1.0, 0.0], [0.5, 0.5]]])
    rewards = np.array([[0.0, 1.0]])
    return build_model(["x0", "x1"], ["a"], "x0", [], [(kernels, rewards)])


@pytest.fixture
def losing_model():
    """Two actions with the same kernel; action b earns 1 less in every state."""
    kernel = np.array([[0.5, 0.5], [0.3, 0.7]])
    kernels = np.array([kernel, kernel])
    rewards = np.array([[1.0, 2.0], [0.0, 1.0]])
    return build_model(["x0", "x1"], ["a", "b"], "x0", [], [(kernels, rewards)])


@pytest.fixture
def absorbing_model():
    """Every row is the point mass at x0; rewards differ between two periodic stages."""
    kernels = np.array([[[1.0, 0.0], [1.0, 0.0]]])
    return build_model(["x0", "x1"], ["a"], "x0", [],
                       [(kernels, np.array([[0.5, 2.0]])), (kernels, np.array([[1.5, -1.0]]))])


@pytest.fixture
def interval_document():
    return {
        "states": ["x0", "x1"],
        "action_interval": {"grid_points": 11, "endpoint_stages": ["lo", "hi"]},
        "anchor": "x0",
        "period": [{
            "lo": {"kernel": [[0.5, 0.5], [0.5, 0.5]], "reward": [0.0, 1.0]},
            "hi": {"kernel": [[0.499, 0.501], [0.499, 0.501]], "reward": [0.0, 1.0]},
        }],
    }


@pytest.fixture
def interval_model(interval_document):
    """Action parameter a mixes the two endpoint records; the gain under constant a is 0.5 + 0.001·a."""
    return load_model(json.dumps(interval_document))


@pytest.fixture
def log_messages():
    from loguru import logger
    messages = []
    sink_id = logger.add(lambda message: messages.append(str(message)), level="DEBUG")
    yield messages
    logger.remove(sink_id)
