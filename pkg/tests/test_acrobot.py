import numpy as np
import pytest

from evl_lab.acrobot import (
    AcrobotParams,
    acrobot_initial_states,
    acrobot_model,
    at_goal,
    energy,
    observe,
    rk4_step,
    unobserve,
    wrap,
)

PARAMS = AcrobotParams()
MODEL = acrobot_model(PARAMS)


def test_actions() -> None:
    assert MODEL.actions == ("torque-1", "torque+0", "torque+1")
    assert MODEL.state_dim == 6


def test_hanging_at_rest_stays_at_rest() -> None:
    model = acrobot_model(AcrobotParams(torque_noise=0.0))
    states = observe(np.zeros((1, 4)))

    for _ in range(10):
        states = model.next_state_sampler(states, 1, np.random.default_rng(0))

    assert np.max(np.abs(states[:, 4:])) <= 1e-12
    assert np.allclose(states[:, :4], [[1.0, 0.0, 1.0, 0.0]])


def test_unactuated_energy_is_conserved() -> None:
    params = AcrobotParams(substeps=20)
    raw = np.array([[1.0, 0.5, 0.0, 0.0]])
    start = energy(params, raw)[0]

    for _ in range(100):
        raw = rk4_step(params, raw, np.zeros(1))

    assert abs(energy(params, raw)[0] - start) <= 1e-4 * abs(start)


def test_observations_stay_on_the_circle() -> None:
    rng = np.random.default_rng(0)
    states = MODEL.sample_states(1000, rng)

    for action in (0, 1, 2, 0, 2):
        states = MODEL.next_state_sampler(states, action, rng)

    assert np.allclose(states[:, 0] ** 2 + states[:, 1] ** 2, 1.0, rtol=0, atol=1e-12)
    assert np.allclose(states[:, 2] ** 2 + states[:, 3] ** 2, 1.0, rtol=0, atol=1e-12)
    assert np.all(MODEL.contains(states))


def test_observe_then_unobserve_recovers_angles() -> None:
    raw = np.array([[0.5, -2.0, 3.0, -7.0], [-3.0, 1.0, 0.0, 0.0]])

    assert np.allclose(unobserve(observe(raw)), raw)


@pytest.mark.parametrize(
    ("angles", "expected"),
    (
        ((0.0, 0.0), False),
        ((np.pi, 0.0), True),
        ((np.pi / 2, 0.0), False),
        ((np.pi, np.pi), False),
    ),
)
def test_goal(angles: tuple[float, float], expected: bool) -> None:
    observations = observe(np.array([[*angles, 0.0, 0.0]]))

    assert bool(at_goal(PARAMS, observations)[0]) is expected


def test_goal_costs_minus_one_and_absorbs() -> None:
    states = observe(np.array([[np.pi, 0.0, 1.0, -1.0], [0.0, 0.0, 0.0, 0.0]]))

    assert np.array_equal(MODEL.cost(states, 0), [-1.0, 0.0])
    assert np.array_equal(MODEL.next_state_sampler(states, 2, np.random.default_rng(0))[0], states[0])


def test_velocities_are_clipped() -> None:
    states = observe(np.array([[0.0, 0.0, PARAMS.max_vel_1, PARAMS.max_vel_2]]))

    after = MODEL.next_state_sampler(states, 2, np.random.default_rng(0))

    assert abs(after[0, 4]) <= PARAMS.max_vel_1
    assert abs(after[0, 5]) <= PARAMS.max_vel_2


def test_wrap() -> None:
    assert np.allclose(wrap(np.array([0.0, np.pi / 2, 3 * np.pi / 2, -3 * np.pi / 2])), [0.0, np.pi / 2, -np.pi / 2, np.pi / 2])


def test_initial_states_hang_down() -> None:
    states = acrobot_initial_states(500, np.random.default_rng(0))
    raw = unobserve(states)

    assert np.all(np.abs(raw) <= 0.1 + 1e-12)
    assert not at_goal(PARAMS, states).any()
