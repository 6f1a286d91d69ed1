from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from numpy.random import Generator
from numpy.typing import ArrayLike, NDArray

from evl_lab.engine import Measurements
from evl_lab.mdp import MdpModel, exact_bellman_grid, greedy_actions
from evl_lab.rng import Stream
from evl_lab.values import States, ValueFn, Vector, as_states

logger = logging.getLogger(__name__)

Policy = Callable[[States, Generator], NDArray[np.int64]]

RELATIVE_ERROR_FLOOR = 1e-6
TRUNCATION_FRACTION = 0.01
MAX_EPISODE_STEPS = 1000


def horizon_for(gamma: float, fraction: float = TRUNCATION_FRACTION) -> int:
    """The shortest horizon H with γ^H ≤ fraction, so truncating rollouts there costs at most fraction·v_max."""
    if not 0 < gamma < 1:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    return max(1, math.ceil(math.log(fraction) / math.log(gamma)))


def evaluation_grid(model: MdpModel, size: int) -> States:
    """`size` evenly spaced points per dimension across the state bounds, as a Cartesian product."""
    if size < 1:
        raise ValueError(f"size must be at least 1, got {size}")
    axes = [np.linspace(lo, hi, size) for lo, hi in model.state_bounds]
    return np.array(list(itertools.product(*axes)), dtype=np.float64).reshape(-1, model.state_dim)


def greedy_policy(model: MdpModel, v: ValueFn, m_eval: int) -> Policy:
    def policy(states: States, rng: Generator) -> NDArray[np.int64]:
        return greedy_actions(model, v, states, m_eval, rng)

    return policy


def random_policy(model: MdpModel) -> Policy:
    def policy(states: States, rng: Generator) -> NDArray[np.int64]:
        return rng.integers(0, model.n_actions, size=len(states))

    return policy


def _step(model: MdpModel, states: States, actions: NDArray[np.int64], rng: Generator) -> tuple[Vector, States]:
    costs = np.empty(len(states))
    next_states = np.empty_like(states)
    for a in range(model.n_actions):
        chosen = actions == a
        if chosen.any():
            costs[chosen] = model.cost(states[chosen], a)
            next_states[chosen] = model.next_state_sampler(states[chosen], a, rng)
    return costs, next_states


def discounted_rollouts(
    model: MdpModel,
    policy: Policy,
    starts: States,
    rollouts: int,
    horizon: int,
    rng: Generator,
) -> NDArray[np.float64]:
    """The (n_starts, rollouts) matrix of discounted costs accumulated over `horizon` steps from each start."""
    if rollouts < 1:
        raise ValueError(f"rollouts must be at least 1, got {rollouts}")
    if horizon < 1:
        raise ValueError(f"horizon must be at least 1, got {horizon}")

    states = np.repeat(starts, rollouts, axis=0)
    totals = np.zeros(len(states))
    discount = 1.0
    for _ in range(horizon):
        costs, states = _step(model, states, policy(states, rng), rng)
        totals += discount * costs
        discount *= model.gamma

    return totals.reshape(len(starts), rollouts)


def value_relative_error(v: ValueFn, oracle: ValueFn, states: ArrayLike) -> float:
    """sup_s |v*(s) - v(s)| / |v*(s)| over the states where |v*(s)| is at least 1e-6."""
    grid = as_states(states)
    if len(grid) == 0:
        raise ValueError("Need at least one state to measure a relative error")
    reference = oracle(grid)
    kept = np.abs(reference) >= RELATIVE_ERROR_FLOOR
    if not kept.any():
        raise ValueError("The oracle vanishes at every evaluation state")
    return float(np.max(np.abs(reference[kept] - v(grid)[kept]) / np.abs(reference[kept])))


@dataclass(frozen=True)
class PolicyErrorReport:
    relative_error: float
    truncation_bias: float
    max_stderr: float
    skipped: int


def policy_relative_error(
    model: MdpModel,
    v: ValueFn,
    oracle: ValueFn,
    eval_states: ArrayLike,
    rollouts: int,
    horizon: int,
    rng: Generator,
    m_eval: int = 10,
) -> PolicyErrorReport:
    """
    sup_s |v*(s) - v^π(s)| / |v*(s)| for the policy π that is greedy with respect to v.

    v^π is estimated by averaging `rollouts` discounted rollouts truncated at `horizon`, which biases it
    by at most γ^horizon·v_max. States where |v*(s)| < 1e-6 are skipped.
    """
    grid = as_states(eval_states)
    if len(grid) == 0:
        raise ValueError("eval_states must not be empty")

    reference = oracle(grid)
    kept = np.abs(reference) >= RELATIVE_ERROR_FLOOR
    if not kept.any():
        raise ValueError("The oracle vanishes at every evaluation state")

    returns = discounted_rollouts(model, greedy_policy(model, v, m_eval), grid[kept], rollouts, horizon, rng)
    estimate = returns.mean(axis=1)
    stderr = returns.std(axis=1, ddof=1) / np.sqrt(rollouts) if rollouts > 1 else np.zeros(len(estimate))

    return PolicyErrorReport(
        relative_error=float(np.max(np.abs(reference[kept] - estimate) / np.abs(reference[kept]))),
        truncation_bias=model.gamma**horizon * model.v_max,
        max_stderr=float(np.max(stderr)),
        skipped=int(np.sum(~kept)),
    )


@dataclass(frozen=True, eq=False)
class EvaluationProbe:
    """
    Per-iteration measurements for `run_evl`.

    The Bellman residual sup|v_k - T v_{k-1}| on the held-out states needs the model's quadrature;
    the value and policy errors need an oracle. The policy error is measured every `every` iterations.
    """

    model: MdpModel
    heldout: States = field(repr=False)
    oracle: ValueFn | None = None
    eval_states: States | None = field(default=None, repr=False)
    rollouts: int = 200
    horizon: int | None = None
    m_eval: int = 10
    every: int = 1

    def __call__(self, k: int, previous: ValueFn, current: ValueFn, stream: Stream) -> Measurements:
        bellman = None
        if self.model.quadrature is not None:
            target = exact_bellman_grid(self.model, previous, self.heldout)
            bellman = float(np.max(np.abs(current(self.heldout) - target)))

        if self.oracle is None or self.eval_states is None:
            return Measurements(bellman_residual_sup=bellman)

        policy_error = None
        if k % self.every == 0:
            report = policy_relative_error(
                self.model,
                current,
                self.oracle,
                self.eval_states,
                rollouts=self.rollouts,
                horizon=self.horizon or horizon_for(self.model.gamma),
                rng=stream.generator(),
                m_eval=self.m_eval,
            )
            policy_error = report.relative_error
            logger.debug(f"Policy error at iteration {k}: {report}")

        return Measurements(
            bellman_residual_sup=bellman,
            value_error=value_relative_error(current, self.oracle, self.eval_states),
            policy_error=policy_error,
        )


def episode_lengths(
    model: MdpModel,
    policy: Policy,
    starts: States,
    terminal: Callable[[States], NDArray[np.bool_]],
    rng: Generator,
    max_steps: int = MAX_EPISODE_STEPS,
) -> NDArray[np.int64]:
    """The number of steps each episode runs before reaching a terminal state, capped at `max_steps`."""
    states = np.array(starts, dtype=np.float64)
    lengths = np.zeros(len(states), dtype=np.int64)
    alive = ~terminal(states)

    for _ in range(max_steps):
        if not alive.any():
            break
        _, stepped = _step(model, states[alive], policy(states[alive], rng), rng)
        states[alive] = stepped
        now_alive = alive & ~terminal(states)
        lengths += now_alive
        alive = now_alive

    return lengths
