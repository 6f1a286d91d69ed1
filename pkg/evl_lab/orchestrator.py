from __future__ import annotations

import signal
from asyncio import Queue, Task, create_task, gather, sleep
from collections.abc import Sequence
from concurrent.futures import Executor, ProcessPoolExecutor, ThreadPoolExecutor
from pathlib import Path

from rich.console import Console

from evl_lab.config import ExperimentSpec
from evl_lab.execution import Execution, SeedJob, SeedOutcome
from evl_lab.messages import Heartbeat, Message, Quit, SeedCompleted, SeedFailed, SeedStarted
from evl_lab.renderer import Renderer
from evl_lab.state import RunState


def make_executor(jobs: int) -> Executor:
    # a single job runs in-process, which keeps logging and debugging simple
    if jobs == 1:
        return ThreadPoolExecutor(max_workers=1)
    return ProcessPoolExecutor(max_workers=jobs)


class Orchestrator:
    def __init__(self, spec: ExperimentSpec, seeds: Sequence[int], out_dir: Path, jobs: int, console: Console):
        self.spec = spec
        self.seeds = tuple(seeds)
        self.out_dir = out_dir
        self.jobs = max(jobs, 1)
        self.console = console

        self.state = RunState.from_seeds(self.seeds)
        self.renderer = Renderer(state=self.state, console=console)

        self.inbox: Queue[Message] = Queue()

        self.executions: dict[int, Execution] = {}
        self.waiters: dict[int, Task[SeedOutcome]] = {}
        self.heartbeat: Task[None] | None = None

    async def run(self) -> dict[int, SeedOutcome]:
        if not self.seeds:
            return {}

        with make_executor(self.jobs) as executor, self.renderer:
            try:
                await self.start_heartbeat()
                await self.start_ready_seeds(executor)

                await self.handle_messages(executor)
            finally:
                self.renderer.handle_shutdown_start()

                if self.heartbeat is not None:
                    self.heartbeat.cancel()

                for execution in self.executions.values():
                    if not execution.done:
                        execution.cancel()

                await gather(*self.waiters.values(), return_exceptions=True)

                self.renderer.handle_shutdown_end()

        return {
            seed: waiter.result()
            for seed, waiter in self.waiters.items()
            if waiter.done() and not waiter.cancelled() and waiter.exception() is None
        }

    async def handle_messages(self, executor: Executor) -> None:
        signal.signal(signal.SIGINT, lambda sig, frame: self.inbox.put_nowait(Quit()))

        while True:
            match message := await self.inbox.get():
                case SeedStarted(seed=seed):
                    self.state.mark_running(seed)

                case SeedCompleted(seed=seed):
                    self.state.mark_success(seed)

                case SeedFailed(seed=seed):
                    self.state.mark_failure(seed)

                case Quit():
                    return

            await self.start_ready_seeds(executor)

            self.renderer.handle_message(message)

            if self.state.all_done():
                return

    async def start_heartbeat(self) -> None:
        async def heartbeat() -> None:
            while True:
                await sleep(1 / 10)
                await self.inbox.put(Heartbeat())

        self.heartbeat = create_task(heartbeat())

    async def start_ready_seeds(self, executor: Executor) -> None:
        for seed in self.state.ready_seeds(capacity=self.jobs):
            if seed in self.executions:
                continue

            # counts against capacity until its start message arrives
            self.state.mark_running(seed)

            e = await Execution.start(
                job=SeedJob(spec=self.spec, seed=seed, out_dir=self.out_dir),
                executor=executor,
                events=self.inbox,
            )
            self.executions[seed] = e
            self.waiters[seed] = create_task(e.wait())
