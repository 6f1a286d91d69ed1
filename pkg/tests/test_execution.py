import json
from asyncio import Queue
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import pytest

from evl_lab.artifacts import SeedStatus, read_trace
from evl_lab.config import ExperimentSpec
from evl_lab.execution import Execution, SeedJob, run_seed
from evl_lab.messages import Message, SeedCompleted, SeedFailed, SeedStarted
from evl_lab.values import Checkpoint
from tests.helpers import tiny_spec


def test_run_seed_writes_outputs(tmp_path: Path) -> None:
    outcome = run_seed(SeedJob(spec=tiny_spec(), seed=0, out_dir=tmp_path))

    assert outcome.status == SeedStatus.Succeeded
    assert outcome.iterations == 3
    assert outcome.summary.value_error is not None
    assert outcome.summary.bellman_residual_sup is not None

    trace = read_trace(tmp_path / "seed-0" / "trace.csv")
    assert trace["iteration"].tolist() == [1, 2, 3]

    checkpoint = Checkpoint.model_validate_json((tmp_path / "seed-0" / "value.json").read_text())
    assert checkpoint.iteration == 3
    assert checkpoint.seed == 0
    assert checkpoint.kind == "polynomial"


def test_run_seed_is_reproducible(tmp_path: Path) -> None:
    run_seed(SeedJob(spec=tiny_spec(), seed=4, out_dir=tmp_path / "a"))
    run_seed(SeedJob(spec=tiny_spec(), seed=4, out_dir=tmp_path / "b"))

    for name in ("trace.csv", "value.json"):
        assert (tmp_path / "a" / "seed-4" / name).read_bytes() == (tmp_path / "b" / "seed-4" / name).read_bytes()


def test_run_seed_writes_periodic_checkpoints(tmp_path: Path) -> None:
    spec = tiny_spec()
    spec = spec.model_copy(update={"evl": spec.evl.model_copy(update={"checkpoint_every": 1})})

    run_seed(SeedJob(spec=spec, seed=0, out_dir=tmp_path))

    assert sorted(p.name for p in (tmp_path / "seed-0" / "checkpoints").iterdir()) == [
        "iter-0001.json",
        "iter-0002.json",
        "iter-0003.json",
    ]


def test_run_seed_evaluates_episodes(tmp_path: Path) -> None:
    spec = tiny_spec(
        environment={"id": "cartpole"},
        oracle=None,
        episodes={"episodes": 4, "max_steps": 20},
    )

    outcome = run_seed(SeedJob(spec=spec, seed=0, out_dir=tmp_path))

    report = json.loads((tmp_path / "seed-0" / "episodes.json").read_text())
    assert len(report["greedy"]) == len(report["random"]) == 4
    assert all(0 <= length <= 20 for length in report["greedy"] + report["random"])
    assert outcome.summary.episode_length is not None
    assert outcome.summary.value_error is None


def test_run_seed_clears_outputs_of_an_earlier_run(tmp_path: Path) -> None:
    stale = tmp_path / "seed-0" / "checkpoints" / "iter-0099.json"
    stale.parent.mkdir(parents=True)
    stale.write_text("{}")

    run_seed(SeedJob(spec=tiny_spec(), seed=0, out_dir=tmp_path))

    assert not stale.exists()
    assert (tmp_path / "seed-0" / "trace.csv").is_file()


@pytest.mark.slow
def test_greedy_cartpole_policy_balances_at_least_twice_as_long_as_random(tmp_path: Path) -> None:
    spec = ExperimentSpec.from_file(Path(__file__).parent.parent / "docs" / "examples" / "cartpole.json")

    outcomes = [run_seed(SeedJob(spec=spec, seed=seed, out_dir=tmp_path)) for seed in spec.seeds]

    assert all(o.status == SeedStatus.Succeeded for o in outcomes)
    greedy = np.median([o.summary.episode_length for o in outcomes])
    random = np.median([o.summary.random_episode_length for o in outcomes])
    assert greedy >= 2 * random


async def test_execution_lifecycle(tmp_path: Path) -> None:
    q: Queue[Message] = Queue()

    with ThreadPoolExecutor(max_workers=1) as executor:
        ex = await Execution.start(job=SeedJob(spec=tiny_spec(), seed=1, out_dir=tmp_path), executor=executor, events=q)
        outcome = await ex.wait()

    assert ex.done
    assert outcome.seed == 1

    msg = await q.get()

    assert isinstance(msg, SeedStarted)
    assert msg.seed == 1

    msg = await q.get()

    assert isinstance(msg, SeedCompleted)
    assert msg.seed == 1
    assert msg.iterations == 3
    assert msg.value_error == outcome.summary.value_error
    assert msg.duration.total_seconds() > 0


async def test_execution_crash_is_reported(tmp_path: Path) -> None:
    blocker = tmp_path / "not-a-directory"
    blocker.write_text("")
    q: Queue[Message] = Queue()

    with ThreadPoolExecutor(max_workers=1) as executor:
        ex = await Execution.start(job=SeedJob(spec=tiny_spec(), seed=0, out_dir=blocker), executor=executor, events=q)
        outcome = await ex.wait()

    assert outcome.status == SeedStatus.Failed
    assert outcome.iterations == 0

    assert isinstance(await q.get(), SeedStarted)

    msg = await q.get()

    assert isinstance(msg, SeedFailed)
    assert msg.reason == outcome.message
    assert "Error" in msg.reason
