import numpy as np
import pytest

from evl_lab.cartpole import (
    CartPoleParams,
    accelerations,
    cartpole_initial_states,
    cartpole_model,
    euler_step,
    failed,
)
from evl_lab.values import States

PARAMS = CartPoleParams()
MODEL = cartpole_model(PARAMS)
LEFT, RIGHT = 0, 1


def test_equilibrium_has_no_acceleration() -> None:
    x_acc, theta_acc = accelerations(PARAMS, np.zeros((1, 4)), np.zeros(1))

    assert x_acc[0] == 0
    assert theta_acc[0] == 0


@pytest.mark.parametrize("theta", (-0.05, -0.01, 0.01, 0.05))
def test_upright_pole_falls_away(theta: float) -> None:
    _, theta_acc = accelerations(PARAMS, np.array([[0.0, 0.0, theta, 0.0]]), np.zeros(1))

    assert np.sign(theta_acc[0]) == np.sign(theta)


def test_pushing_right_accelerates_the_cart_right() -> None:
    x_acc, theta_acc = accelerations(PARAMS, np.zeros((1, 4)), np.array([10.0]))

    assert x_acc[0] > 0
    assert theta_acc[0] < 0


def test_euler_step_uses_current_velocities() -> None:
    state = np.array([[0.1, 0.5, 0.02, -0.3]])

    stepped = euler_step(PARAMS, state, np.zeros(1))

    assert stepped[0, 0] == pytest.approx(0.1 + 0.02 * 0.5)
    assert stepped[0, 2] == pytest.approx(0.02 - 0.02 * 0.3)


def test_noisy_push_spans_the_force_interval() -> None:
    states = np.zeros((100_000, 4))

    after = MODEL.next_state_sampler(states, RIGHT, np.random.default_rng(0))
    x_acc = after[:, 1] / PARAMS.tau

    low, _ = accelerations(PARAMS, np.zeros((1, 4)), np.array([5.0]))
    high, _ = accelerations(PARAMS, np.zeros((1, 4)), np.array([15.0]))

    assert x_acc.min() == pytest.approx(low[0], rel=0.01)
    assert x_acc.max() == pytest.approx(high[0], rel=0.01)
    assert np.all((x_acc >= low[0] - 1e-9) & (x_acc <= high[0] + 1e-9))


def test_left_pushes_left() -> None:
    after = MODEL.next_state_sampler(np.zeros((100, 4)), LEFT, np.random.default_rng(0))

    assert np.all(after[:, 1] < 0)


def test_failure_states_cost_one_and_absorb() -> None:
    states = np.array(
        [
            [2.5, 0.0, 0.0, 0.0],
            [0.0, 0.0, -0.25, 0.0],
            [0.0, 0.0, 0.0, 0.0],
        ]
    )

    assert np.array_equal(failed(PARAMS, states), [True, True, False])
    assert np.array_equal(MODEL.cost(states, LEFT), [1.0, 1.0, 0.0])

    after = MODEL.next_state_sampler(states, RIGHT, np.random.default_rng(0))
    assert np.array_equal(after[:2], states[:2])


def test_next_states_respect_the_bounds() -> None:
    rng = np.random.default_rng(0)
    states = rng.uniform(MODEL.low, MODEL.high, size=(10_000, 4))

    for action in (LEFT, RIGHT):
        assert np.all(MODEL.contains(MODEL.next_state_sampler(states, action, rng)))


def test_state_bounds_extend_past_failure() -> None:
    bounds = PARAMS.state_bounds

    assert bounds.shape == (4, 2)
    assert bounds[0, 1] == pytest.approx(1.25 * 2.4)
    assert bounds[2, 1] == pytest.approx(1.25 * 12 * np.pi / 180)
    assert MODEL.c_max == 1.0
    assert MODEL.gamma == 0.95


def test_initial_states_are_near_upright() -> None:
    states = cartpole_initial_states(1000, np.random.default_rng(0))

    assert states.shape == (1000, 4)
    assert np.all(np.abs(states) <= 0.05)
    assert not failed(PARAMS, states).any()


def test_fixed_seed_gives_identical_trajectories() -> None:
    def trajectory(seed: int) -> States:
        rng = np.random.default_rng(seed)
        states = cartpole_initial_states(10, rng)
        for t in range(20):
            states = MODEL.next_state_sampler(states, t % 2, rng)
        return states

    assert np.array_equal(trajectory(3), trajectory(3))
