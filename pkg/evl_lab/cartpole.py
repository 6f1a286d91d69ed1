from __future__ import annotations

from typing import Annotated, Literal

import numpy as np
from numpy.random import Generator
from numpy.typing import NDArray
from pydantic import Field

from evl_lab.mdp import MdpModel
from evl_lab.model import Model
from evl_lab.values import States, Vector

ACTIONS = ("left", "right")
DIRECTIONS = (-1.0, 1.0)


class CartPoleParams(Model):
    id: Literal["cartpole"] = "cartpole"
    m_c: Annotated[float, Field(gt=0, description="The mass of the cart.")] = 1.0
    m_p: Annotated[float, Field(gt=0, description="The mass of the pole.")] = 0.1
    l: Annotated[float, Field(gt=0, description="The pole length l in the dynamics (half the physical pole length).")] = 0.5
    g: Annotated[float, Field(gt=0, description="Gravitational acceleration.")] = 9.8
    tau: Annotated[float, Field(gt=0, description="The Euler time step τ.")] = 0.02
    force_mag: Annotated[float, Field(gt=0, description="The magnitude of the force applied by either action.")] = 10.0
    noise_frac: Annotated[
        float,
        Field(ge=0, le=1, description="The applied force is scaled by 1 + Uniform[-noise_frac, noise_frac]."),
    ] = 0.5
    fail_x: Annotated[float, Field(gt=0, description="The cart position beyond which the episode fails.")] = 2.4
    fail_theta: Annotated[float, Field(gt=0, description="The pole angle in radians beyond which the episode fails.")] = (
        12 * np.pi / 180
    )
    x_dot_bound: Annotated[float, Field(gt=0, description="The cart-velocity bound of the state box.")] = 3.0
    theta_dot_bound: Annotated[float, Field(gt=0, description="The pole angular-velocity bound of the state box.")] = 3.5
    bound_margin: Annotated[
        float,
        Field(ge=1, description="The position and angle bounds of the state box as multiples of the failure thresholds."),
    ] = 1.25
    gamma: Annotated[float, Field(gt=0, lt=1, description="The discount factor γ.")] = 0.95

    @property
    def state_bounds(self) -> NDArray[np.float64]:
        return np.array(
            [
                [-self.bound_margin * self.fail_x, self.bound_margin * self.fail_x],
                [-self.x_dot_bound, self.x_dot_bound],
                [-self.bound_margin * self.fail_theta, self.bound_margin * self.fail_theta],
                [-self.theta_dot_bound, self.theta_dot_bound],
            ]
        )


def accelerations(params: CartPoleParams, states: States, force: Vector) -> tuple[Vector, Vector]:
    """(ẍ, θ̈) for each state under the applied force."""
    p = params
    theta, theta_dot = states[:, 2], states[:, 3]
    total = p.m_c + p.m_p
    sin, cos = np.sin(theta), np.cos(theta)

    theta_acc = (p.g * sin + cos * ((-force - p.m_p * p.l * theta_dot**2 * sin) / total)) / (
        p.l * (4 / 3 - p.m_p * cos**2 / total)
    )
    x_acc = (force + p.m_p * p.l * (theta_dot**2 * sin - theta_acc * cos)) / total

    return x_acc, theta_acc


def failed(params: CartPoleParams, states: States) -> NDArray[np.bool_]:
    return (np.abs(states[:, 0]) > params.fail_x) | (np.abs(states[:, 2]) > params.fail_theta)


def euler_step(params: CartPoleParams, states: States, force: Vector) -> States:
    x, x_dot, theta, theta_dot = states.T
    x_acc, theta_acc = accelerations(params, states, force)
    tau = params.tau
    return np.stack(
        [
            x + tau * x_dot,
            x_dot + tau * x_acc,
            theta + tau * theta_dot,
            theta_dot + tau * theta_acc,
        ],
        axis=1,
    )


def cartpole_model(params: CartPoleParams) -> MdpModel:
    """
    Pole balancing on a cart with noisy ±force_mag pushes.

    States past either failure threshold cost 1 per step and are absorbing; every other state costs 0.
    """
    bounds = params.state_bounds

    def cost(states: States, action: int) -> Vector:
        return failed(params, states).astype(np.float64)

    def sampler(states: States, action: int, rng: Generator) -> States:
        noise = rng.uniform(-params.noise_frac, params.noise_frac, size=len(states))
        force = DIRECTIONS[action] * params.force_mag * (1 + noise)
        stepped = np.clip(euler_step(params, states, force), bounds[:, 0], bounds[:, 1])
        return np.where(failed(params, states)[:, None], states, stepped)

    return MdpModel(
        name="cartpole",
        state_bounds=bounds,
        actions=ACTIONS,
        cost=cost,
        next_state_sampler=sampler,
        gamma=params.gamma,
        c_max=1.0,
    )


def cartpole_initial_states(n: int, rng: Generator) -> States:
    return rng.uniform(-0.05, 0.05, size=(n, 4))
