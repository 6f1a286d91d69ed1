from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass, fields
from enum import Enum
from time import monotonic
from typing import Annotated, Literal, Protocol, Union

import numpy as np
from numpy.random import Generator
from pydantic import Field, model_validator
from typing_extensions import Self, assert_never

from evl_lab.errors import EvlAborted, EvlLabError, FitError
from evl_lab.features import FitterParams, FourierFamily, PolynomialSpec, RkhsSpec, SignFamily, sample_rpbf_basis
from evl_lab.fitting import RPBF_MAX_ITERATIONS, RPBF_TOLERANCE, Fit, RpbfSolver, fit_polynomial, fit_rkhs, fit_rpbf
from evl_lab.mdp import MdpModel, SampledBackup, sample_backups
from evl_lab.model import Model
from evl_lab.rng import Purpose, Stream
from evl_lab.values import States, ValueFn

logger = logging.getLogger(__name__)


class Fitter(str, Enum):
    Rpbf = "rpbf"
    Rkhs = "rkhs"
    Polynomial = "polynomial"


class UniformDistribution(Model):
    """Uniform over a box, by default the model's own state bounds."""

    id: Literal["uniform"] = "uniform"
    bounds: Annotated[
        tuple[tuple[float, float], ...] | None,
        Field(description="Per-dimension (low, high) intervals; the model's state bounds when omitted."),
    ] = None


class ModelDistribution(Model):
    """The model's own state sampler, which falls back to uniform over its bounds."""

    id: Literal["model"] = "model"


StateDistribution = Annotated[
    Union[UniformDistribution, ModelDistribution],
    Field(discriminator="id"),
]


class EvlSettings(Model):
    n_states: Annotated[int, Field(ge=1, description="N, the number of states sampled from μ per iteration.")] = 100
    m_next: Annotated[int, Field(ge=1, description="M, the number of next-state draws per state and action.")] = 5
    j_features: Annotated[
        int | None,
        Field(ge=1, description="J, the number of random basis functions. Only meaningful for RPBF fitting."),
    ] = None
    k_iters: Annotated[int, Field(ge=1, description="K, the number of outer iterations.")] = 20
    fitter: Annotated[Fitter, Field(description="The function-fitting operator.")]
    fitter_params: Annotated[FitterParams, Field(description="The parameters of the fitting operator.")]
    mu: Annotated[StateDistribution, Field(description="The state-sampling distribution μ.")] = UniformDistribution()
    rpbf_solver: Annotated[
        RpbfSolver,
        Field(description="The box-constrained least-squares solver used for RPBF fits."),
    ] = RpbfSolver.Nesterov
    solver_tol: Annotated[
        float,
        Field(gt=0, description="The KKT-residual tolerance of the RPBF solver, relative to the scale of the targets."),
    ] = RPBF_TOLERANCE
    solver_max_iter: Annotated[int, Field(ge=1, description="The iteration cap of the RPBF solver.")] = (
        RPBF_MAX_ITERATIONS
    )
    checkpoint_every: Annotated[
        int,
        Field(ge=0, description="Write a checkpoint every this many iterations; 0 writes only the final one."),
    ] = 0

    @model_validator(mode="after")
    def check_fitter(self) -> Self:
        expected = {
            Fitter.Rpbf: (FourierFamily, SignFamily),
            Fitter.Rkhs: (RkhsSpec,),
            Fitter.Polynomial: (PolynomialSpec,),
        }[Fitter(self.fitter)]
        if not isinstance(self.fitter_params, expected):
            raise ValueError(f"fitter {Fitter(self.fitter).value!r} cannot use fitter_params of kind {self.fitter_params.kind!r}")

        if Fitter(self.fitter) is Fitter.Rpbf and self.j_features is None:
            raise ValueError("j_features is required for RPBF fitting")
        if Fitter(self.fitter) is not Fitter.Rpbf and self.j_features is not None:
            raise ValueError(f"j_features is meaningless for {Fitter(self.fitter).value} fitting")

        return self


class EvlConfig(EvlSettings):
    seed: Annotated[int, Field(ge=0, lt=2**64, description="The root seed of every random stream in the run.")]


@dataclass(frozen=True)
class Measurements:
    bellman_residual_sup: float | None = None
    value_error: float | None = None
    policy_error: float | None = None


class Probe(Protocol):
    """Extra per-iteration measurements against an oracle, made after v_k is fitted."""

    def __call__(self, k: int, previous: ValueFn, current: ValueFn, stream: Stream) -> Measurements: ...


@dataclass(frozen=True)
class IterationRecord:
    k: int
    fit_residual_l1: float
    fit_residual_l2: float
    fit_residual_sup: float
    bellman_residual_sup: float | None
    value_error: float | None
    policy_error: float | None
    solver: str
    solver_iterations: int
    condition_number: float
    wall_time: float


@dataclass(frozen=True)
class RunTrace:
    records: tuple[IterationRecord, ...]

    def __len__(self) -> int:
        return len(self.records)

    @property
    def final(self) -> IterationRecord:
        return self.records[-1]

    def column(self, name: str) -> list[float | int | str | None]:
        if name not in {f.name for f in fields(IterationRecord)}:
            raise KeyError(f"Iteration records have no field {name!r}")
        return [getattr(r, name) for r in self.records]


def state_sampler(model: MdpModel, mu: UniformDistribution | ModelDistribution) -> Callable[[int, Generator], States]:
    match mu:
        case UniformDistribution(bounds=None):
            return lambda n, rng: rng.uniform(model.low, model.high, size=(n, model.state_dim))
        case UniformDistribution(bounds=bounds):
            box = np.array(bounds, dtype=np.float64)
            if box.shape != (model.state_dim, 2):
                raise ValueError(f"μ has {len(box)} bounds but model {model.name!r} has {model.state_dim} state dimensions")
            return lambda n, rng: rng.uniform(box[:, 0], box[:, 1], size=(n, model.state_dim))
        case ModelDistribution():
            return model.sample_states
        case never:
            assert_never(never)


def run_evl(
    model: MdpModel,
    config: EvlConfig,
    v0: ValueFn | None = None,
    probe: Probe | None = None,
    on_iteration: Callable[[IterationRecord], None] | None = None,
    checkpoint: Callable[[ValueFn, int], None] | None = None,
) -> tuple[ValueFn, RunTrace]:
    """
    Iterate v_{k+1} = Π̂ T̂ v_k for `config.k_iters` iterations.

    Every iteration draws fresh states, next states and (for RPBF) basis parameters
    from its own substream of the seed, so the run is reproducible bit for bit.
    Iterates are clamped to [-v_max, v_max].
    """
    mu = state_sampler(model, config.mu)
    root = Stream.from_seed(config.seed)
    clamp = model.v_max

    v = v0 if v0 is not None else ValueFn.zero()
    records: list[IterationRecord] = []

    logger.info(f"Starting {config.k_iters} {Fitter(config.fitter).value} iterations on {model.name!r} with seed {config.seed}")

    for k in range(1, config.k_iters + 1):
        start = monotonic()
        stream = root.child(k)

        try:
            data = sample_backups(model, v, mu, n=config.n_states, m=config.m_next, stream=stream)
            fit = _fit(model, config, data, stream, clamp)

            if not np.all(np.isfinite(fit.value.weights)):
                raise FitError(f"The {Fitter(config.fitter).value} fit produced non-finite weights")

            residuals = fit.value(data.states) - data.targets
            measurements = (
                probe(k, v, fit.value, stream.child(Purpose.Probe)) if probe is not None else Measurements()
            )
        except (EvlLabError, ValueError, ArithmeticError) as e:
            logger.debug(f"Iteration {k} failed: {e!r}")
            raise EvlAborted(iteration=k, trace=tuple(records), reason=str(e)) from e

        v = fit.value
        record = IterationRecord(
            k=k,
            fit_residual_l1=float(np.mean(np.abs(residuals))),
            fit_residual_l2=float(np.sqrt(np.mean(residuals**2))),
            fit_residual_sup=float(np.max(np.abs(residuals))),
            bellman_residual_sup=measurements.bellman_residual_sup,
            value_error=measurements.value_error,
            policy_error=measurements.policy_error,
            solver=fit.diagnostics.solver,
            solver_iterations=fit.diagnostics.iterations,
            condition_number=fit.diagnostics.condition_number,
            wall_time=monotonic() - start,
        )
        records.append(record)
        logger.debug(f"Iteration {k}: {record}")

        if on_iteration is not None:
            on_iteration(record)
        if checkpoint is not None and config.checkpoint_every and k % config.checkpoint_every == 0:
            checkpoint(v, k)

    logger.info(f"Finished {config.k_iters} iterations on {model.name!r} with seed {config.seed}")

    return v, RunTrace(records=tuple(records))


def _fit(model: MdpModel, config: EvlConfig, data: SampledBackup, stream: Stream, clamp: float) -> Fit:
    match config.fitter_params:
        case FourierFamily() | SignFamily() as family:
            assert config.j_features is not None
            basis = sample_rpbf_basis(
                family,
                config.j_features,
                model.state_bounds,
                stream.child(Purpose.Basis).generator(),
            )
            return fit_rpbf(
                basis,
                data,
                c_bound=family.c_bound,
                clamp=clamp,
                solver=config.rpbf_solver,
                tol=config.solver_tol,
                max_iter=config.solver_max_iter,
            )
        case RkhsSpec() as spec:
            return fit_rkhs(spec, data, clamp=clamp)
        case PolynomialSpec() as spec:
            return fit_polynomial(spec, data, clamp=clamp)
        case never:
            assert_never(never)
