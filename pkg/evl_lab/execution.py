from __future__ import annotations

import logging
import shutil
from asyncio import Future, Queue, get_running_loop
from concurrent.futures import Executor
from dataclasses import dataclass, field
from datetime import timedelta
from pathlib import Path
from time import monotonic

import numpy as np

from evl_lab.artifacts import (
    EPISODES_NAME,
    TRACE_NAME,
    VALUE_NAME,
    SeedStatus,
    SeedSummary,
    checkpoint_path,
    seed_dir,
    write_model,
    write_trace,
)
from evl_lab.config import ExperimentSpec
from evl_lab.engine import run_evl
from evl_lab.errors import EvlAborted, EvlLabError
from evl_lab.evaluation import EvaluationProbe, episode_lengths, evaluation_grid, greedy_policy, random_policy
from evl_lab.messages import Message, SeedCompleted, SeedFailed, SeedStarted
from evl_lab.model import Model
from evl_lab.replacement import ReplacementParams, replacement_oracle
from evl_lab.rng import Purpose, Stream
from evl_lab.values import ValueFn

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SeedJob:
    spec: ExperimentSpec
    seed: int
    out_dir: Path


@dataclass(frozen=True)
class SeedOutcome:
    seed: int
    status: SeedStatus
    iterations: int
    summary: SeedSummary
    message: str = ""


class EpisodeReport(Model):
    max_steps: int
    greedy: tuple[int, ...]
    random: tuple[int, ...]
    mean_greedy: float
    mean_random: float


def run_seed(job: SeedJob) -> SeedOutcome:
    """
    Run one seed of an experiment and write its outputs under seed-<seed>/, replacing whatever an earlier run left there.

    This is the unit of work handed to the worker pool, so it must stay a picklable top-level function.
    """
    spec, seed = job.spec, job.seed
    directory = seed_dir(job.out_dir, seed)
    shutil.rmtree(directory, ignore_errors=True)
    directory.mkdir(parents=True, exist_ok=True)

    try:
        model = spec.build_model()
        config = spec.evl_config(seed)

        oracle = None
        if spec.oracle is not None and isinstance(spec.environment, ReplacementParams):
            oracle = replacement_oracle(spec.environment, grid_n=spec.oracle.grid_n, tol=spec.oracle.tol)

        probe = None
        if model.quadrature is not None or oracle is not None:
            probe = EvaluationProbe(
                model=model,
                heldout=evaluation_grid(model, spec.evaluation.heldout_size),
                oracle=oracle,
                eval_states=evaluation_grid(model, spec.evaluation.grid_size) if oracle is not None else None,
                rollouts=spec.evaluation.rollouts,
                horizon=spec.evaluation.horizon,
                m_eval=spec.evaluation.m_eval,
                every=spec.evaluation.every,
            )

        def checkpoint(v: ValueFn, iteration: int) -> None:
            write_model(checkpoint_path(job.out_dir, seed, iteration), v.to_checkpoint(iteration=iteration, seed=seed))

        v, trace = run_evl(model, config, probe=probe, checkpoint=checkpoint)
    except EvlAborted as e:
        write_trace(directory / TRACE_NAME, e.trace)
        logger.warning(f"Seed {seed} aborted: {e}")
        return SeedOutcome(
            seed=seed,
            status=SeedStatus.Failed,
            iterations=len(e.trace),
            summary=SeedSummary(seed=seed, status=SeedStatus.Failed),
            message=str(e),
        )
    except EvlLabError as e:
        logger.warning(f"Seed {seed} failed before its first iteration: {e}")
        return SeedOutcome(
            seed=seed,
            status=SeedStatus.Failed,
            iterations=0,
            summary=SeedSummary(seed=seed, status=SeedStatus.Failed),
            message=str(e),
        )

    write_trace(directory / TRACE_NAME, trace)
    write_model(directory / VALUE_NAME, v.to_checkpoint(iteration=config.k_iters, seed=seed))

    episode_length = random_episode_length = None
    if spec.episodes is not None:
        initial_states, terminal = spec.episode_functions()
        stream = Stream.from_seed(seed).child(0, Purpose.Episodes)
        starts = initial_states(spec.episodes.episodes, stream.child(0).generator())
        greedy = episode_lengths(
            model,
            greedy_policy(model, v, spec.episodes.m_eval),
            starts,
            terminal,
            stream.child(1).generator(),
            max_steps=spec.episodes.max_steps,
        )
        baseline = episode_lengths(
            model,
            random_policy(model),
            starts,
            terminal,
            stream.child(2).generator(),
            max_steps=spec.episodes.max_steps,
        )
        report = EpisodeReport(
            max_steps=spec.episodes.max_steps,
            greedy=tuple(greedy.tolist()),
            random=tuple(baseline.tolist()),
            mean_greedy=float(np.mean(greedy)),
            mean_random=float(np.mean(baseline)),
        )
        write_model(directory / EPISODES_NAME, report)
        episode_length, random_episode_length = float(np.median(greedy)), float(np.median(baseline))

    final = trace.final
    return SeedOutcome(
        seed=seed,
        status=SeedStatus.Succeeded,
        iterations=len(trace),
        summary=SeedSummary(
            seed=seed,
            status=SeedStatus.Succeeded,
            value_error=final.value_error,
            policy_error=final.policy_error,
            bellman_residual_sup=final.bellman_residual_sup,
            fit_residual_sup=final.fit_residual_sup,
            episode_length=episode_length,
            random_episode_length=random_episode_length,
        ),
    )


@dataclass(frozen=True)
class Execution:
    seed: int

    events: Queue[Message] = field(repr=False)

    future: Future[SeedOutcome] = field(repr=False)
    start_time: float

    @classmethod
    async def start(cls, job: SeedJob, executor: Executor, events: Queue[Message]) -> Execution:
        start_time = monotonic()

        future = get_running_loop().run_in_executor(executor, run_seed, job)

        await events.put(SeedStarted(seed=job.seed))

        return cls(seed=job.seed, events=events, future=future, start_time=start_time)

    @property
    def done(self) -> bool:
        return self.future.done()

    def cancel(self) -> None:
        self.future.cancel()

    async def wait(self) -> SeedOutcome:
        try:
            outcome = await self.future
        except Exception as e:
            logger.exception(f"Seed {self.seed} crashed")
            outcome = SeedOutcome(
                seed=self.seed,
                status=SeedStatus.Failed,
                iterations=0,
                summary=SeedSummary(seed=self.seed, status=SeedStatus.Failed),
                message=f"{type(e).__name__}: {e}",
            )

        duration = timedelta(seconds=monotonic() - self.start_time)

        match SeedStatus(outcome.status):
            case SeedStatus.Succeeded:
                await self.events.put(
                    SeedCompleted(
                        seed=self.seed,
                        duration=duration,
                        iterations=outcome.iterations,
                        value_error=outcome.summary.value_error,
                    )
                )
            case SeedStatus.Failed:
                await self.events.put(
                    SeedFailed(
                        seed=self.seed,
                        duration=duration,
                        iterations=outcome.iterations,
                        reason=outcome.message,
                    )
                )

        return outcome
