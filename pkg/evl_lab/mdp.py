from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
from numpy.random import Generator
from numpy.typing import ArrayLike, NDArray

from evl_lab.errors import NumericEvaluationError, UnsupportedOperationError
from evl_lab.rng import Purpose, Stream
from evl_lab.values import States, ValueFn, Vector, as_state, as_states

logger = logging.getLogger(__name__)

CostFn = Callable[[States, int], Vector]
Sampler = Callable[[States, int, Generator], States]
StateSampler = Callable[[int, Generator], States]

MONTE_CARLO_FALLBACK_MIN = 100_000


class Quadrature(Protocol):
    """
    A deterministic rule for E[v(X)] with X ~ Q(·|s, a).

    Called with (n, d) states and an action index, it returns (n, q, d) nodes
    and (n, q) weights that sum to one along the last axis.
    `tolerance` bounds the quadrature error per unit of sup|v|.
    """

    tolerance: float

    def __call__(self, states: States, action: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]: ...


@dataclass(frozen=True)
class MdpModel:
    """
    A discounted, cost-minimizing MDP with a compact box state space and finitely many actions.

    `cost` and `next_state_sampler` work on batches: an (n, d) array of states and one action index.
    """

    name: str
    state_bounds: NDArray[np.float64] = field(repr=False)
    actions: tuple[str, ...]
    cost: CostFn = field(repr=False)
    next_state_sampler: Sampler = field(repr=False)
    gamma: float
    c_max: float
    quadrature: Quadrature | None = field(default=None, repr=False)
    state_sampler: StateSampler | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        bounds = np.array(self.state_bounds, dtype=np.float64)
        bounds.setflags(write=False)
        object.__setattr__(self, "state_bounds", bounds)

        if bounds.ndim != 2 or bounds.shape[1] != 2 or not np.all(bounds[:, 0] <= bounds[:, 1]):
            raise ValueError(f"state_bounds must be a (d, 2) array of closed intervals, got {bounds.tolist()}")
        if not self.actions:
            raise ValueError("An MDP needs at least one action")
        # gamma == 0 is a degenerate model that is only useful in tests
        if not 0 <= self.gamma < 1:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if not self.c_max > 0:
            raise ValueError(f"c_max must be positive, got {self.c_max}")

    @property
    def state_dim(self) -> int:
        return len(self.state_bounds)

    @property
    def low(self) -> Vector:
        return self.state_bounds[:, 0]

    @property
    def high(self) -> Vector:
        return self.state_bounds[:, 1]

    @property
    def v_max(self) -> float:
        return self.c_max / (1 - self.gamma)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    def action_index(self, action: str) -> int:
        return self.actions.index(action)

    def contains(self, states: States) -> NDArray[np.bool_]:
        return np.all((states >= self.low) & (states <= self.high), axis=1)

    def clip(self, states: States) -> States:
        return np.clip(states, self.low, self.high)

    def sample_states(self, n: int, rng: Generator) -> States:
        if self.state_sampler is not None:
            return self.state_sampler(n, rng)
        return rng.uniform(self.low, self.high, size=(n, self.state_dim))

    def checked_cost(self, states: States, action: int) -> Vector:
        costs = self.cost(states, action)
        if np.any(np.abs(costs) > self.c_max):
            i = int(np.argmax(np.abs(costs) > self.c_max))
            raise NumericEvaluationError(
                f"Cost {costs[i]} of action {self.actions[action]!r} at state {states[i].tolist()} exceeds c_max = {self.c_max}"
            )
        return costs


@dataclass(frozen=True, eq=False)
class SampledBackup:
    """N sampled states paired with their empirical Bellman targets."""

    states: States
    targets: Vector
    m_per_backup: int

    def __post_init__(self) -> None:
        if len(self.states) != len(self.targets):
            raise ValueError(f"Got {len(self.states)} states but {len(self.targets)} targets")
        if len(self.states) == 0:
            raise ValueError("A SampledBackup needs at least one state")
        if not np.all(np.isfinite(self.targets)):
            raise NumericEvaluationError("Every backup target must be finite")
        if self.m_per_backup < 1:
            raise ValueError(f"m_per_backup must be at least 1, got {self.m_per_backup}")

    @property
    def n(self) -> int:
        return len(self.states)


def action_values(model: MdpModel, v: ValueFn, states: States, m: int, rng: Generator) -> NDArray[np.float64]:
    """
    The (n, |A|) matrix c(s, a) + (γ/m) Σ v(X_i) with m fresh next-state draws per state and action.

    All states and actions draw from the one generator, in action order.
    """
    if m < 1:
        raise ValueError(f"m must be at least 1, got {m}")

    repeated = np.repeat(states, m, axis=0)
    columns = []
    for a in range(model.n_actions):
        draws = model.next_state_sampler(repeated, a, rng)
        means = _evaluate_at_draws(v, draws, states, m).mean(axis=1)
        columns.append(model.checked_cost(states, a) + model.gamma * means)

    return np.stack(columns, axis=1)


def _evaluate_at_draws(v: ValueFn, draws: States, sources: States, m: int) -> NDArray[np.float64]:
    try:
        return v(draws).reshape(len(sources), m)
    except NumericEvaluationError as e:
        raise NumericEvaluationError(f"Backup from one of the states {sources.tolist()[:5]} failed: {e}") from e


def empirical_bellman_backup(model: MdpModel, v: ValueFn, s: ArrayLike, m: int, rng: Generator) -> float:
    """[T̂_m v](s) = min_a { c(s, a) + (γ/m) Σ_i v(X_i) }, X_i ~ Q(·|s, a) drawn fresh for every action."""
    state = as_state(s)
    return float(action_values(model, v, state, m, rng)[0].min())


def greedy_actions(model: MdpModel, v: ValueFn, states: States, m_eval: int, rng: Generator) -> NDArray[np.int64]:
    """Indices of the minimizing actions; np.argmin breaks ties toward the lowest index."""
    return np.argmin(action_values(model, v, states, m_eval, rng), axis=1)


def greedy_policy_action(model: MdpModel, v: ValueFn, s: ArrayLike, m_eval: int, rng: Generator) -> str:
    return model.actions[int(greedy_actions(model, v, as_state(s), m_eval, rng)[0])]


def sample_backups(
    model: MdpModel,
    v: ValueFn,
    mu_sampler: Callable[[int, Generator], States],
    n: int,
    m: int,
    stream: Stream,
) -> SampledBackup:
    """
    Draw n states from μ and compute their empirical backups.

    Next states for state i and action a come from the substream keyed (NextStates, i, a),
    so the result depends only on the stream, not on evaluation order.
    """
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    if m < 1:
        raise ValueError(f"m must be at least 1, got {m}")

    states = as_states(mu_sampler(n, stream.child(Purpose.States).generator()))

    draws = np.stack(
        [
            np.concatenate(
                [
                    model.next_state_sampler(
                        np.repeat(states[i : i + 1], m, axis=0),
                        a,
                        stream.child(Purpose.NextStates, i, a).generator(),
                    )
                    for i in range(n)
                ]
            )
            for a in range(model.n_actions)
        ]
    )

    q = np.stack(
        [
            model.checked_cost(states, a)
            + model.gamma * _evaluate_at_draws(v, draws[a], states, m).mean(axis=1)
            for a in range(model.n_actions)
        ],
        axis=1,
    )

    return SampledBackup(states=states, targets=q.min(axis=1), m_per_backup=m)


def exact_action_values(
    model: MdpModel,
    v: ValueFn,
    grid: States,
    fallback_m: int | None = None,
    rng: Generator | None = None,
) -> NDArray[np.float64]:
    """
    The (n, |A|) matrix c(s, a) + γ E[v(X)] computed by the model's quadrature,
    or by Monte Carlo with a declared sample size of at least 10⁵ when the model has none.
    """
    if model.quadrature is not None:
        columns = []
        for a in range(model.n_actions):
            nodes, weights = model.quadrature(grid, a)
            values = v(nodes.reshape(-1, model.state_dim)).reshape(weights.shape)
            columns.append(model.checked_cost(grid, a) + model.gamma * np.sum(weights * values, axis=1))
        return np.stack(columns, axis=1)

    if fallback_m is None:
        raise UnsupportedOperationError(
            f"Model {model.name!r} exposes no transition quadrature; declare a Monte Carlo fallback of at least {MONTE_CARLO_FALLBACK_MIN} draws"
        )
    if fallback_m < MONTE_CARLO_FALLBACK_MIN:
        raise ValueError(f"A Monte Carlo fallback needs at least {MONTE_CARLO_FALLBACK_MIN} draws, got {fallback_m}")
    if rng is None:
        raise ValueError("A Monte Carlo fallback needs a random generator")

    logger.warning(f"Using a {fallback_m}-draw Monte Carlo fallback for the exact backup on {model.name!r}")
    return np.concatenate([action_values(model, v, grid[i : i + 1], fallback_m, rng) for i in range(len(grid))])


def exact_bellman_grid(
    model: MdpModel,
    v: ValueFn,
    grid: Sequence[ArrayLike] | ArrayLike,
    fallback_m: int | None = None,
    rng: Generator | None = None,
) -> Vector:
    """[T v](s) = min_a { c(s, a) + γ E[v(X)] } at every grid state."""
    return exact_action_values(model, v, as_states(grid), fallback_m=fallback_m, rng=rng).min(axis=1)
