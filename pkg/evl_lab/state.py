from __future__ import annotations

from collections import defaultdict
from collections.abc import Collection, Iterable, Mapping
from dataclasses import dataclass
from enum import Enum


@dataclass(frozen=True)
class RunState:
    statuses: dict[int, Status]

    @classmethod
    def from_seeds(cls, seeds: Iterable[int]) -> RunState:
        return RunState(statuses={seed: Status.Pending for seed in seeds})

    def seeds_by_status(self) -> Mapping[Status, Collection[int]]:
        d = defaultdict(list)
        for seed, s in self.statuses.items():
            d[s].append(seed)
        return d

    def ready_seeds(self, capacity: int) -> Collection[int]:
        running = sum(1 for s in self.statuses.values() if s is Status.Running)
        pending = [seed for seed, s in self.statuses.items() if s is Status.Pending]
        return tuple(pending[: max(capacity - running, 0)])

    def mark_success(self, *seeds: int) -> None:
        self.mark(*seeds, status=Status.Succeeded)

    def mark_failure(self, *seeds: int) -> None:
        self.mark(*seeds, status=Status.Failed)

    def mark_running(self, *seeds: int) -> None:
        self.mark(*seeds, status=Status.Running)

    def mark(self, *seeds: int, status: Status) -> None:
        for seed in seeds:
            self.statuses[seed] = status

    def all_done(self) -> bool:
        return all(status in (Status.Succeeded, Status.Failed) for status in self.statuses.values())


class Status(Enum):
    Pending = "pending"
    Running = "running"
    Succeeded = "succeeded"
    Failed = "failed"
