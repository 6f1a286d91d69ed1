from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Annotated, Literal

import numpy as np
from numpy.random import Generator
from numpy.typing import NDArray
from pydantic import Field
from scipy.integrate import cumulative_trapezoid

from evl_lab.errors import ConvergenceError
from evl_lab.mdp import MdpModel
from evl_lab.model import Model
from evl_lab.values import GridBasis, States, ValueFn, Vector

logger = logging.getLogger(__name__)

ACTIONS = ("replace", "keep")
REPLACE, KEEP = range(len(ACTIONS))

ORACLE_MAX_SWEEPS = 10_000


class ReplacementParams(Model):
    """
    The optimal replacement problem: a machine's wear grows by exponential increments
    while it is kept, costing c(s) = maint_coeff·s per step, and resets when it is replaced at a fixed cost.
    """

    id: Literal["replacement"] = "replacement"
    gamma: Annotated[float, Field(gt=0, lt=1, description="The discount factor γ.")] = 0.6
    lambda_rate: Annotated[float, Field(gt=0, description="The rate λ of the exponential wear increments.")] = 0.5
    replace_cost: Annotated[float, Field(gt=0, description="The replacement cost C.")] = 30
    maint_coeff: Annotated[float, Field(gt=0, description="The slope of the maintenance cost c(s).")] = 4
    s_max: Annotated[
        float,
        Field(
            gt=0,
            description="The truncation bound of the state space; wear beyond it is folded onto s_max.",
        ),
    ] = 10
    quadrature_nodes: Annotated[
        int,
        Field(ge=3, description="Nodes per state in the trapezoidal rule for the transition expectation."),
    ] = 2001

    @property
    def c_max(self) -> float:
        return max(self.maint_coeff * self.s_max, self.replace_cost)

    def concentrability_bound(self) -> float:
        """The density-ratio bound C_μ of the transition kernel against the uniform distribution on [0, s_max]."""
        return self.lambda_rate * self.s_max / (1 - np.exp(-self.lambda_rate * self.s_max))


@dataclass(frozen=True)
class ExponentialQuadrature:
    """
    Trapezoidal weights for the truncated exponential density on [s₀, s_max]
    with the tail mass e^{-λ(s_max - s₀)} placed on s_max, renormalized to sum to one.
    """

    params: ReplacementParams

    @property
    def tolerance(self) -> float:
        return float((self.params.lambda_rate * self.params.s_max / (self.params.quadrature_nodes - 1)) ** 2)

    def __call__(self, states: States, action: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        p = self.params
        start = np.zeros(len(states)) if action == REPLACE else np.minimum(states[:, 0], p.s_max)

        t = np.linspace(0, 1, p.quadrature_nodes)
        width = p.s_max - start
        nodes = start[:, None] + width[:, None] * t
        h = width / (p.quadrature_nodes - 1)

        weights = p.lambda_rate * np.exp(-p.lambda_rate * (nodes - start[:, None])) * h[:, None]
        weights[:, [0, -1]] /= 2
        weights[:, -1] += np.exp(-p.lambda_rate * width)
        weights /= weights.sum(axis=1, keepdims=True)

        return nodes[:, :, None], weights


def replacement_model(params: ReplacementParams) -> MdpModel:
    def cost(states: States, action: int) -> Vector:
        if action == REPLACE:
            # C + c(0)
            return np.full(len(states), params.replace_cost)
        return params.maint_coeff * states[:, 0]

    def sampler(states: States, action: int, rng: Generator) -> States:
        increments = rng.exponential(1 / params.lambda_rate, size=len(states))
        base = np.zeros(len(states)) if action == REPLACE else states[:, 0]
        return np.minimum(base + increments, params.s_max)[:, None]

    return MdpModel(
        name="replacement",
        state_bounds=np.array([[0.0, params.s_max]]),
        actions=ACTIONS,
        cost=cost,
        next_state_sampler=sampler,
        gamma=params.gamma,
        c_max=params.c_max,
        quadrature=ExponentialQuadrature(params),
    )


def replacement_oracle(params: ReplacementParams, grid_n: int = 2000, tol: float = 1e-6) -> ValueFn:
    """
    The optimal value function v* by value iteration on a uniform grid over [0, s_max].

    The expectation under "keep" from node s_i is λ e^{λ s_i} ∫_{s_i}^{s_max} e^{-λx} v(x) dx
    plus the tail mass on s_max, with the integral taken by a reverse cumulative trapezoid
    so that each sweep costs O(grid_n). Sweeps stop once the sup-change is at most
    tol·(1 - γ)/γ, which puts the fixed-point error below tol.
    """
    if grid_n < 100:
        raise ValueError(f"grid_n must be at least 100, got {grid_n}")
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")

    p = params
    nodes = np.linspace(0, p.s_max, grid_n)
    h = nodes[1] - nodes[0]
    decay = np.exp(-p.lambda_rate * nodes)
    growth = p.lambda_rate * np.exp(p.lambda_rate * nodes)
    tail = np.exp(-p.lambda_rate * (p.s_max - nodes))

    def tail_integral(g: Vector) -> Vector:
        return cumulative_trapezoid(g[::-1], dx=h, initial=0)[::-1]

    # the trapezoid loses a little mass, so normalize to keep the backup an average
    mass = growth * tail_integral(decay) + tail

    def expected(v: Vector) -> Vector:
        return (growth * tail_integral(decay * v) + tail * v[-1]) / mass

    keep_cost = p.maint_coeff * nodes
    replace_cost = p.replace_cost

    threshold = tol * (1 - p.gamma) / p.gamma
    v = np.zeros(grid_n)
    for sweep in range(1, ORACLE_MAX_SWEEPS + 1):
        e = expected(v)
        v_next = np.minimum(replace_cost + p.gamma * e[0], keep_cost + p.gamma * e)
        change = float(np.max(np.abs(v_next - v)))
        v = v_next
        if change <= threshold:
            logger.info(f"Replacement oracle converged after {sweep} sweeps on {grid_n} nodes")
            return ValueFn(basis=GridBasis(nodes=nodes), weights=v)

    raise ConvergenceError(
        f"Replacement oracle did not converge within {ORACLE_MAX_SWEEPS} sweeps (last change {change}, threshold {threshold})"
    )
