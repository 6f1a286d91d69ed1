from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Annotated

import numpy as np
from numpy.random import Generator
from numpy.typing import ArrayLike, NDArray
from pydantic import Field

from evl_lab.errors import DominanceError
from evl_lab.model import Model

MIN_DOMINANCE_RUNS = 30
DOMINANCE_Z = 2.0


class DominatingChain(Model):
    """
    The Markov chain on {1, ..., K*} that steps down to max(Y - 1, 1) with probability q
    and resets to K* otherwise, started from Y₀ = K*.
    """

    q: Annotated[float, Field(ge=0, le=1, description="The probability of a good iteration.")]
    k_star: Annotated[int, Field(ge=1, description="The number of consecutive good iterations K* that reach state 1.")]

    @property
    def states(self) -> NDArray[np.int64]:
        return np.arange(1, self.k_star + 1)

    def transition_matrix(self) -> NDArray[np.float64]:
        # rows are from-states
        p = np.zeros((self.k_star, self.k_star))
        for i in range(self.k_star):
            p[i, max(i - 1, 0)] += self.q
            p[i, self.k_star - 1] += 1 - self.q
        return p


def chain_steady_state(chain: DominatingChain) -> NDArray[np.float64]:
    """
    The stationary distribution μ(1) = q^{K*-1}, μ(i) = (1 - q)·q^{K*-i} for 1 < i ≤ K*.
    """
    k, q = chain.k_star, chain.q
    mu = np.array([(1 - q) * q ** (k - i) for i in range(1, k + 1)])
    mu[0] = q ** (k - 1)
    return mu


@dataclass(frozen=True, eq=False)
class ChainSimulation:
    trajectory: NDArray[np.int64]
    occupancy: NDArray[np.float64]

    @property
    def steps(self) -> int:
        return len(self.trajectory)

    @property
    def final(self) -> int:
        return int(self.trajectory[-1])

    def total_variation(self, distribution: ArrayLike) -> float:
        return 0.5 * float(np.sum(np.abs(self.occupancy - np.asarray(distribution))))


def _run(k_star: int, good: NDArray[np.bool_]) -> NDArray[np.int64]:
    """
    Chain states after each step along the last axis, starting from K*.

    After t steps the state is K* minus the number of steps since the last reset, floored at 1.
    """
    t = np.arange(1, good.shape[-1] + 1)
    last_reset = np.maximum.accumulate(np.where(good, 0, t), axis=-1)
    return np.maximum(k_star - (t - last_reset), 1)


def chain_simulate(chain: DominatingChain, steps: int, rng: Generator) -> ChainSimulation:
    """Simulate Y₁..Y_steps from Y₀ = K* and tally the occupancy frequencies of each state."""
    if steps < 1:
        raise ValueError(f"steps must be at least 1, got {steps}")

    trajectory = _run(chain.k_star, rng.random(steps) < chain.q)
    occupancy = np.bincount(trajectory - 1, minlength=chain.k_star) / steps
    return ChainSimulation(trajectory=trajectory, occupancy=occupancy)


def chain_replicas(chain: DominatingChain, k: int, replicas: int, rng: Generator) -> NDArray[np.int64]:
    """Y_k in each of `replicas` independent copies of the chain."""
    if k < 0:
        raise ValueError(f"k must be non-negative, got {k}")
    if k == 0:
        return np.full(replicas, chain.k_star)
    return _run(chain.k_star, rng.random((replicas, k)) < chain.q)[:, -1]


def chain_distribution(chain: DominatingChain, k: int) -> NDArray[np.float64]:
    """The exact distribution of Y_k."""
    start = np.zeros(chain.k_star)
    start[-1] = 1
    return start @ np.linalg.matrix_power(chain.transition_matrix(), k)


def chain_mixing_bound(chain: DominatingChain, delta_prime: float) -> int:
    """⌈log(1/(δ'·(1 - q)·q^{K*-1}))⌉, the number of steps after which the chain is δ'-close to stationarity."""
    if not 0 < chain.q < 1:
        raise ValueError(f"The mixing bound needs 0 < q < 1, got q = {chain.q}")
    if not 0 < delta_prime < 1:
        raise ValueError(f"delta_prime must lie in (0, 1), got {delta_prime}")
    return math.ceil(-(math.log(delta_prime) + math.log1p(-chain.q) + (chain.k_star - 1) * math.log(chain.q)))


class CorollaryRequirements(Model):
    q_min: float
    k_min: int


def corollary_requirements(delta: float, k_star: int) -> CorollaryRequirements:
    """
    The smallest q = (1/2 + δ/2)^{1/(K*-1)} and the iteration count
    K ≥ log(4/((1/2 - δ/2)(1 - q)q^{K*-1})) under which Pr{Y_K = 1} ≥ δ.
    """
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if k_star < 2:
        raise ValueError(f"k_star must be at least 2, got {k_star}")

    q = (0.5 + delta / 2) ** (1 / (k_star - 1))
    if q >= 1:
        raise ValueError(f"delta = {delta} is too close to 1 to leave room for a reset probability")
    k = math.ceil(math.log(4) - math.log(0.5 - delta / 2) - math.log1p(-q) - (k_star - 1) * math.log(q))
    return CorollaryRequirements(q_min=q, k_min=k)


def error_levels(residuals: ArrayLike, eps: float, k_star: int) -> NDArray[np.int64]:
    """
    The error-level trajectories X₀..X_K for each run (row) of per-iteration residuals:
    X₀ = K*, then X steps down to max(X - 1, 1) after a good iteration (residual ≤ ε) and resets to K* after a bad one.
    """
    r = np.atleast_2d(np.asarray(residuals, dtype=np.float64))
    levels = _run(k_star, r <= eps)
    return np.concatenate([np.full((len(r), 1), k_star), levels], axis=1)


def estimate_q(residuals: ArrayLike, eps: float) -> float:
    """
    The smallest per-iteration fraction of good iterations, each pooled across runs (rows).

    The chain dominates the runs only when every iteration succeeds with probability at least q.
    """
    r = np.atleast_2d(np.asarray(residuals, dtype=np.float64))
    if r.size == 0:
        raise ValueError("Need at least one residual to estimate q")
    return float(np.min(np.mean(r <= eps, axis=0)))


@dataclass(frozen=True)
class DominanceRow:
    k: int
    theta: int
    px: float
    py: float
    stderr: float
    flag: bool


@dataclass(frozen=True)
class DominanceReport:
    chain: DominatingChain
    runs: int
    rows: tuple[DominanceRow, ...]

    @property
    def violations(self) -> tuple[DominanceRow, ...]:
        return tuple(r for r in self.rows if r.flag)


def dominance_check(x_traj: ArrayLike, chain: DominatingChain, z: float = DOMINANCE_Z) -> DominanceReport:
    """
    Compare Pr{X_k ≥ θ}, estimated across runs, with the exact Pr{Y_k ≥ θ} for every k and θ ∈ {1..K*}.

    A pair is flagged when the excess Pr{X_k ≥ θ} - Pr{Y_k ≥ θ} is more than z binomial standard errors.
    """
    x = np.atleast_2d(np.asarray(x_traj, dtype=np.int64))
    runs = len(x)
    if runs < MIN_DOMINANCE_RUNS:
        raise DominanceError(f"A dominance check needs at least {MIN_DOMINANCE_RUNS} runs, got {runs}")

    rows = []
    for k in range(x.shape[1]):
        tail_y = np.cumsum(chain_distribution(chain, k)[::-1])[::-1]
        for theta in chain.states:
            px = float(np.mean(x[:, k] >= theta))
            py = float(min(tail_y[theta - 1], 1.0))
            stderr = math.sqrt(max(px * (1 - px), py * (1 - py)) / runs)
            rows.append(
                DominanceRow(
                    k=k,
                    theta=int(theta),
                    px=px,
                    py=py,
                    stderr=stderr,
                    flag=px - py > z * stderr + 1e-12,
                )
            )

    return DominanceReport(chain=chain, runs=runs, rows=tuple(rows))
