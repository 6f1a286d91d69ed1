from __future__ import annotations

from collections.abc import Callable
from enum import Enum
from pathlib import Path
from typing import Annotated, Literal, Union

import numpy as np
from numpy.random import Generator
from numpy.typing import NDArray
from pydantic import Field, model_validator
from typing_extensions import Self, assert_never

from evl_lab.acrobot import AcrobotParams, acrobot_initial_states, acrobot_model, at_goal
from evl_lab.cartpole import CartPoleParams, cartpole_initial_states, cartpole_model, failed
from evl_lab.constants import SPEC_FORMAT
from evl_lab.engine import EvlConfig, EvlSettings, Fitter
from evl_lab.mdp import MdpModel
from evl_lab.model import Model
from evl_lab.replacement import ReplacementParams, replacement_model
from evl_lab.values import States

Environment = Annotated[
    Union[ReplacementParams, CartPoleParams, AcrobotParams],
    Field(discriminator="id"),
]

Seed = Annotated[int, Field(ge=0, lt=2**64)]


class Algorithm(str, Enum):
    EvlRpbf = "evl-rpbf"
    EvlRkhs = "evl-rkhs"
    FviPoly = "fvi-poly"

    @property
    def fitter(self) -> Fitter:
        return {
            Algorithm.EvlRpbf: Fitter.Rpbf,
            Algorithm.EvlRkhs: Fitter.Rkhs,
            Algorithm.FviPoly: Fitter.Polynomial,
        }[self]


class OracleSettings(Model):
    grid_n: Annotated[int, Field(ge=100, description="The number of grid nodes of the brute-force oracle.")] = 2000
    tol: Annotated[float, Field(gt=0, description="The sup-norm fixed-point tolerance of the oracle.")] = 1e-6


class EvaluationSettings(Model):
    grid_size: Annotated[
        int,
        Field(ge=1, description="Evaluation states per dimension for value and policy errors."),
    ] = 21
    rollouts: Annotated[int, Field(ge=1, description="Rollouts per evaluation state.")] = 200
    horizon: Annotated[
        int | None,
        Field(ge=1, description="The rollout truncation horizon; chosen so that γ^H ≤ 0.01 when omitted."),
    ] = None
    m_eval: Annotated[int, Field(ge=1, description="Next-state draws per action when acting greedily.")] = 10
    every: Annotated[int, Field(ge=1, description="Measure the policy error every this many iterations.")] = 1
    heldout_size: Annotated[
        int,
        Field(ge=1, description="Held-out states per dimension for the Bellman residual."),
    ] = 101


class EpisodeSettings(Model):
    episodes: Annotated[int, Field(ge=1, description="Episodes per evaluation of a policy.")] = 100
    max_steps: Annotated[int, Field(ge=1, description="The cap on the length of an episode.")] = 1000
    m_eval: Annotated[int, Field(ge=1, description="Next-state draws per action when acting greedily.")] = 1


class ExperimentSpec(Model):
    format: Literal[1] = SPEC_FORMAT
    name: Annotated[str, Field(min_length=1, description="A name for the experiment family.")]
    environment: Annotated[Environment, Field(description="The MDP and its parameters.")]
    algorithm: Annotated[Algorithm, Field(description="The value-learning algorithm.")]
    evl: Annotated[EvlSettings, Field(description="Sample sizes and the fitting operator.")]
    oracle: Annotated[
        OracleSettings | None,
        Field(description="Brute-force optimal value function, available for the replacement problem only."),
    ] = None
    evaluation: Annotated[EvaluationSettings, Field(description="How errors are measured.")] = EvaluationSettings()
    episodes: Annotated[
        EpisodeSettings | None,
        Field(description="Episode-length evaluation of the final greedy policy and a random baseline."),
    ] = None
    output: Annotated[Path, Field(description="The output directory.")] = Path("runs")
    seeds: Annotated[tuple[Seed, ...], Field(min_length=1, description="One run per seed.")]

    @model_validator(mode="after")
    def check_consistency(self) -> Self:
        fitter = Algorithm(self.algorithm).fitter
        if Fitter(self.evl.fitter) is not fitter:
            raise ValueError(
                f"algorithm {Algorithm(self.algorithm).value!r} needs evl.fitter {fitter.value!r}, got {Fitter(self.evl.fitter).value!r}"
            )
        if self.oracle is not None and not isinstance(self.environment, ReplacementParams):
            raise ValueError(f"No oracle is available for environment {self.environment.id!r}")
        if self.episodes is not None and isinstance(self.environment, ReplacementParams):
            raise ValueError("The replacement problem has no terminal states to measure episodes by")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        return self

    def evl_config(self, seed: int) -> EvlConfig:
        return EvlConfig.model_validate(self.evl.model_dump() | {"seed": seed})

    def build_model(self) -> MdpModel:
        match self.environment:
            case ReplacementParams() as params:
                return replacement_model(params)
            case CartPoleParams() as params:
                return cartpole_model(params)
            case AcrobotParams() as params:
                return acrobot_model(params)
            case never:
                assert_never(never)

    def episode_functions(
        self,
    ) -> tuple[Callable[[int, Generator], States], Callable[[States], NDArray[np.bool_]]]:
        """Initial-state sampler and terminal test for episode evaluation."""
        match self.environment:
            case CartPoleParams() as cartpole:
                return cartpole_initial_states, lambda states: failed(cartpole, states)
            case AcrobotParams() as acrobot:
                return acrobot_initial_states, lambda states: at_goal(acrobot, states)
            case ReplacementParams():
                raise ValueError("The replacement problem has no terminal states")
            case never:
                assert_never(never)
