from __future__ import annotations

from typing import Annotated, Literal

import numpy as np
from numpy.random import Generator
from numpy.typing import NDArray
from pydantic import Field

from evl_lab.mdp import MdpModel
from evl_lab.model import Model
from evl_lab.values import States, Vector

# raw states are (θ₁, θ₂, θ̇₁, θ̇₂); observations are (cos θ₁, sin θ₁, cos θ₂, sin θ₂, θ̇₁, θ̇₂)
RawStates = NDArray[np.float64]


class AcrobotParams(Model):
    id: Literal["acrobot"] = "acrobot"
    link_length_1: Annotated[float, Field(gt=0, description="The length of the first link.")] = 1.0
    link_length_2: Annotated[float, Field(gt=0, description="The length of the second link.")] = 1.0
    link_mass_1: Annotated[float, Field(gt=0)] = 1.0
    link_mass_2: Annotated[float, Field(gt=0)] = 1.0
    link_com_1: Annotated[float, Field(gt=0, description="The distance from the first joint to the first link's center of mass.")] = 0.5
    link_com_2: Annotated[float, Field(gt=0, description="The distance from the second joint to the second link's center of mass.")] = 0.5
    link_moi: Annotated[float, Field(gt=0, description="The moment of inertia of each link about its center of mass.")] = 1.0
    g: Annotated[float, Field(gt=0)] = 9.8
    dt: Annotated[float, Field(gt=0, description="The duration of one transition.")] = 0.2
    substeps: Annotated[int, Field(ge=1, description="RK4 steps per transition.")] = 1
    max_vel_1: Annotated[float, Field(gt=0)] = 4 * np.pi
    max_vel_2: Annotated[float, Field(gt=0)] = 9 * np.pi
    torques: Annotated[
        tuple[float, float, float],
        Field(description="The torques applied at the second joint by the three actions."),
    ] = (-1.0, 0.0, 1.0)
    torque_noise: Annotated[
        float,
        Field(ge=0, description="The applied torque is perturbed by Uniform[-torque_noise, torque_noise]."),
    ] = 0.2
    gamma: Annotated[float, Field(gt=0, lt=1, description="The discount factor γ.")] = 0.95

    @property
    def state_bounds(self) -> NDArray[np.float64]:
        return np.array(
            [
                [-1.0, 1.0],
                [-1.0, 1.0],
                [-1.0, 1.0],
                [-1.0, 1.0],
                [-self.max_vel_1, self.max_vel_1],
                [-self.max_vel_2, self.max_vel_2],
            ]
        )


def _mass_terms(p: AcrobotParams, theta2: Vector) -> tuple[Vector, Vector, float]:
    m1, m2, l1, lc1, lc2, inertia = p.link_mass_1, p.link_mass_2, p.link_length_1, p.link_com_1, p.link_com_2, p.link_moi
    d1 = m1 * lc1**2 + m2 * (l1**2 + lc2**2 + 2 * l1 * lc2 * np.cos(theta2)) + 2 * inertia
    d2 = m2 * (lc2**2 + l1 * lc2 * np.cos(theta2)) + inertia
    d3 = m2 * lc2**2 + inertia
    return d1, d2, d3


def derivatives(params: AcrobotParams, raw: RawStates, torque: Vector) -> RawStates:
    p = params
    m1, m2, l1, lc1, lc2 = p.link_mass_1, p.link_mass_2, p.link_length_1, p.link_com_1, p.link_com_2
    theta1, theta2, dtheta1, dtheta2 = raw.T

    d1, d2, d3 = _mass_terms(p, theta2)
    phi2 = m2 * lc2 * p.g * np.cos(theta1 + theta2 - np.pi / 2)
    phi1 = (
        -m2 * l1 * lc2 * dtheta2**2 * np.sin(theta2)
        - 2 * m2 * l1 * lc2 * dtheta2 * dtheta1 * np.sin(theta2)
        + (m1 * lc1 + m2 * l1) * p.g * np.cos(theta1 - np.pi / 2)
        + phi2
    )
    ddtheta2 = (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dtheta1**2 * np.sin(theta2) - phi2) / (d3 - d2**2 / d1)
    ddtheta1 = -(d2 * ddtheta2 + phi1) / d1

    return np.stack([dtheta1, dtheta2, ddtheta1, ddtheta2], axis=1)


def rk4_step(params: AcrobotParams, raw: RawStates, torque: Vector) -> RawStates:
    """One transition of length dt, integrated by `substeps` classical Runge-Kutta steps with the torque held fixed."""
    h = params.dt / params.substeps
    y = raw
    for _ in range(params.substeps):
        k1 = derivatives(params, y, torque)
        k2 = derivatives(params, y + h / 2 * k1, torque)
        k3 = derivatives(params, y + h / 2 * k2, torque)
        k4 = derivatives(params, y + h * k3, torque)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def wrap(angles: Vector) -> Vector:
    """Map angles into [-π, π)."""
    return (angles + np.pi) % (2 * np.pi) - np.pi


def energy(params: AcrobotParams, raw: RawStates) -> Vector:
    """The total mechanical energy, with both links hanging straight down at θ₁ = θ₂ = 0."""
    p = params
    theta1, theta2, dtheta1, dtheta2 = raw.T
    d1, d2, d3 = _mass_terms(p, theta2)

    kinetic = 0.5 * (d1 * dtheta1**2 + 2 * d2 * dtheta1 * dtheta2 + d3 * dtheta2**2)
    potential = -(p.link_mass_1 * p.link_com_1 + p.link_mass_2 * p.link_length_1) * p.g * np.cos(
        theta1
    ) - p.link_mass_2 * p.link_com_2 * p.g * np.cos(theta1 + theta2)

    return kinetic + potential


def observe(raw: RawStates) -> States:
    theta1, theta2, dtheta1, dtheta2 = raw.T
    return np.stack([np.cos(theta1), np.sin(theta1), np.cos(theta2), np.sin(theta2), dtheta1, dtheta2], axis=1)


def unobserve(observations: States) -> RawStates:
    return np.stack(
        [
            np.arctan2(observations[:, 1], observations[:, 0]),
            np.arctan2(observations[:, 3], observations[:, 2]),
            observations[:, 4],
            observations[:, 5],
        ],
        axis=1,
    )


def at_goal(params: AcrobotParams, observations: States) -> NDArray[np.bool_]:
    """The free end is more than one link length above the base: -cos θ₁ - cos(θ₁ + θ₂) > 1."""
    cos1, sin1, cos2, sin2 = observations[:, :4].T
    cos12 = cos1 * cos2 - sin1 * sin2
    return -params.link_length_1 * cos1 - params.link_length_2 * cos12 > params.link_length_1


def acrobot_model(params: AcrobotParams) -> MdpModel:
    """
    The two-link acrobot with only the second joint actuated.

    Reaching the goal earns reward 1, so the cost is -1 at goal states and 0 elsewhere.
    Goal states are absorbing.
    """
    bounds = params.state_bounds

    def cost(states: States, action: int) -> Vector:
        return -at_goal(params, states).astype(np.float64)

    def sampler(states: States, action: int, rng: Generator) -> States:
        noise = rng.uniform(-params.torque_noise, params.torque_noise, size=len(states))
        raw = rk4_step(params, unobserve(states), params.torques[action] + noise)
        raw[:, 0] = wrap(raw[:, 0])
        raw[:, 1] = wrap(raw[:, 1])
        raw[:, 2] = np.clip(raw[:, 2], -params.max_vel_1, params.max_vel_1)
        raw[:, 3] = np.clip(raw[:, 3], -params.max_vel_2, params.max_vel_2)
        return np.where(at_goal(params, states)[:, None], states, observe(raw))

    def state_sampler(n: int, rng: Generator) -> States:
        raw = np.column_stack(
            [
                rng.uniform(-np.pi, np.pi, size=(n, 2)),
                rng.uniform(-params.max_vel_1, params.max_vel_1, size=n),
                rng.uniform(-params.max_vel_2, params.max_vel_2, size=n),
            ]
        )
        return observe(raw)

    return MdpModel(
        name="acrobot",
        state_bounds=bounds,
        actions=tuple(f"torque{t:+g}" for t in params.torques),
        cost=cost,
        next_state_sampler=sampler,
        gamma=params.gamma,
        c_max=1.0,
        state_sampler=state_sampler,
    )


def acrobot_initial_states(n: int, rng: Generator) -> States:
    """Both links hanging down, perturbed by Uniform[-0.1, 0.1] in every raw coordinate."""
    return observe(rng.uniform(-0.1, 0.1, size=(n, 4)))
