from __future__ import annotations

from types import TracebackType
from typing import Type

from rich.console import Console, Group, RenderableType
from rich.live import Live
from rich.rule import Rule
from rich.style import Style
from rich.table import Table
from rich.text import Text
from typing_extensions import assert_never

from evl_lab.messages import Message, SeedCompleted, SeedFailed, SeedStarted
from evl_lab.state import RunState, Status

prefix_format = "{timestamp:%H:%M:%S} seed {seed}  "
internal_format = "{timestamp:%H:%M:%S}"

STATUS_TO_STYLE = {
    Status.Running: Style(color="cyan"),
    Status.Pending: Style(color="yellow"),
    Status.Succeeded: Style(color="green"),
    Status.Failed: Style(color="red"),
}


class Renderer:
    def __init__(self, state: RunState, console: Console):
        self.state = state
        self.console = console

        self.live = Live(console=console, auto_refresh=False)

    def __enter__(self) -> None:
        self.live.start(refresh=True)

    def __exit__(
        self,
        exc_type: Type[BaseException] | None,
        exc_val: BaseException | None,
        exc_tb: TracebackType | None,
    ) -> None:
        self.live.stop()

    def handle_message(self, message: Message) -> None:
        match message:
            case SeedStarted() | SeedCompleted() | SeedFailed() as msg:
                self.handle_lifecycle_message(msg)

        self.update(message)

    def info(self, event: Message) -> RenderableType:
        table = Table.grid(padding=(1, 1, 0, 0), expand=False)

        status_table = Table.grid(padding=(2, 2, 0, 0), expand=False)

        seeds_by_status = self.state.seeds_by_status()
        displays = []
        for status in (Status.Running, Status.Pending, Status.Succeeded, Status.Failed):
            seeds = seeds_by_status[status]
            if seeds:
                displays.append(
                    Text.assemble(
                        (status.value.capitalize(), STATUS_TO_STYLE[status]),
                        f" {len(seeds)}",
                    )
                )

        status_table.add_row(*displays)

        table.add_row(
            internal_format.format_map({"timestamp": event.timestamp}),
            status_table,
        )

        return Group(
            Rule(style=Style(color="green" if seeds_by_status[Status.Running] else "yellow")),
            table,
        )

    def handle_lifecycle_message(self, message: SeedStarted | SeedCompleted | SeedFailed) -> None:
        prefix = Text(
            prefix_format.format_map({"seed": message.seed, "timestamp": message.timestamp}),
            style=Style(dim=True),
        )

        parts: tuple[str | tuple[str, str] | Text, ...]

        match message:
            case SeedStarted():
                parts = ("started",)
            case SeedCompleted(iterations=iterations, duration=duration, value_error=value_error):
                parts = (
                    ("succeeded", "green"),
                    f" after {iterations} iterations in {duration.total_seconds():.3f} seconds",
                    f" (value error {value_error:.4f})" if value_error is not None else "",
                )
            case SeedFailed(iterations=iterations, duration=duration, reason=reason):
                parts = (
                    ("failed", "red"),
                    f" after {iterations} iterations in {duration.total_seconds():.3f} seconds: {reason}",
                )
            case _:
                assert_never(message)

        g = Table.grid()
        g.add_row(prefix, Text.assemble(*parts))

        self.console.print(g)

    def handle_shutdown_start(self) -> None:
        self.live.update(Group(Rule(), Text("Shutting down...")), refresh=True)

    def handle_shutdown_end(self) -> None:
        self.live.update(Rule(), refresh=True)

    def update(self, message: Message) -> None:
        self.live.update(self.info(message), refresh=True)
