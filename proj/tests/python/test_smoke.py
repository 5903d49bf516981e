import math

import numpy as np
import pytest

rlprobe = pytest.importorskip("rlprobe")


def test_env_names():
    names = rlprobe.env_names()
    assert "cartpole" in names and "reacher" in names


def test_reset_is_deterministic():
    a = rlprobe.Env("cartpole").reset(3)
    b = rlprobe.Env("cartpole").reset(3)
    assert a.shape == (4,)
    np.testing.assert_array_equal(a, b)
    assert np.all(np.abs(a) <= 0.05)


def test_episode_runs_to_done():
    env = rlprobe.Env("acrobot")
    env.reset(0)
    total, steps = 0.0, 0
    while not env.done:
        _, r, _, _ = env.step(steps % 3)
        total += r
        steps += 1
    assert steps == env.max_steps
    assert total == -env.max_steps


def test_continuous_actions():
    env = rlprobe.Env("reacher")
    obs = env.reset(1)
    assert obs.shape == (env.obs_size,) and not env.discrete
    _, r, _, _ = env.step([0.0, 0.0])
    assert r <= 0.0


def test_protocol_and_gap():
    train, test = rlprobe.protocol(3, 2)
    assert train == [0, 1, 2] and test == [1000000, 1000001]
    assert rlprobe.generalization_gap([10.0, 20.0], [5.0] * 4) == 10.0


def test_config_errors():
    with pytest.raises(rlprobe.ConfigError):
        rlprobe.resolve_config({"env": "cartpole", "agent": "ppo", "leraning_rate": "1"})
    text = rlprobe.resolve_config({"env": "cartpole", "agent": "ppo"})
    assert 'env = "cartpole"' in text


def test_train_small_cell():
    rows = rlprobe.train({"env": "cartpole", "agent": "dqn", "train_seeds": "2", "test_seeds": "3",
                          "episodes": "8", "hidden": "8", "dqn.learning_starts": "20"})
    assert len(rows) == 1
    row = rows[0]
    assert row["cell"] == "cartpole-dqn-N2"
    assert math.isclose(row["gap"][0], row["train"][0] - row["test"][0], abs_tol=1e-9)
