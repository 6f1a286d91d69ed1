from datetime import datetime, timedelta

from pydantic import Field

from evl_lab.model import Model


class Message(Model):
    timestamp: datetime = Field(default_factory=datetime.now)


class SeedStarted(Message):
    seed: int


class SeedCompleted(Message):
    seed: int
    duration: timedelta
    iterations: int
    value_error: float | None = None


class SeedFailed(Message):
    seed: int
    duration: timedelta
    iterations: int
    reason: str


class Heartbeat(Message):
    pass


class Quit(Message):
    pass
