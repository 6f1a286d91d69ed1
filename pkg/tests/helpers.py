from collections.abc import Callable

import numpy as np
from numpy.random import Generator

from evl_lab.config import ExperimentSpec
from evl_lab.engine import IterationRecord
from evl_lab.mdp import MdpModel
from evl_lab.values import States, Vector


def deterministic_model(
    cost: Callable[[States, int], Vector],
    step: Callable[[States, int], States] = lambda states, action: states,
    gamma: float = 0.5,
    c_max: float = 2.0,
    n_actions: int = 2,
) -> MdpModel:
    """A model on [0, 1] whose transitions ignore the random generator."""

    def sampler(states: States, action: int, rng: Generator) -> States:
        return step(states, action)

    return MdpModel(
        name="deterministic",
        state_bounds=np.array([[0.0, 1.0]]),
        actions=tuple(f"a{i}" for i in range(n_actions)),
        cost=cost,
        next_state_sampler=sampler,
        gamma=gamma,
        c_max=c_max,
    )


def tiny_spec(**overrides: object) -> ExperimentSpec:
    """A replacement experiment small enough to run end to end in a test."""
    return ExperimentSpec.model_validate(
        {
            "name": "tiny",
            "environment": {"id": "replacement", "quadrature_nodes": 201},
            "algorithm": "fvi-poly",
            "evl": {
                "n_states": 20,
                "m_next": 2,
                "k_iters": 3,
                "fitter": "polynomial",
                "fitter_params": {"kind": "polynomial", "degree": 2},
            },
            "oracle": {"grid_n": 200},
            "evaluation": {"grid_size": 5, "rollouts": 4, "horizon": 5, "heldout_size": 11},
            "seeds": [0, 1],
        }
        | overrides
    )


def record(k: int, **overrides: object) -> IterationRecord:
    fields: dict[str, object] = {
        "k": k,
        "fit_residual_l1": 0.1,
        "fit_residual_l2": 0.2,
        "fit_residual_sup": 0.3,
        "bellman_residual_sup": None,
        "value_error": None,
        "policy_error": None,
        "solver": "lstsq",
        "solver_iterations": 0,
        "condition_number": 1.5,
        "wall_time": 0.01,
    }
    return IterationRecord(**(fields | overrides))  # type: ignore[arg-type]
