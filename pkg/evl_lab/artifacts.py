from __future__ import annotations

import csv
import hashlib
import io
import os
import platform
from collections.abc import Iterable, Mapping, Sequence
from enum import Enum
from pathlib import Path
from tempfile import NamedTemporaryFile
from typing import Annotated, Literal

import numpy as np
import scipy
from more_itertools import partition
from numpy.typing import NDArray
from pydantic import Field, ValidationError

from evl_lab.constants import MANIFEST_FORMAT, __version__
from evl_lab.engine import IterationRecord, RunTrace
from evl_lab.errors import ArtifactError
from evl_lab.model import Model

MANIFEST_NAME = "manifest.json"
SUMMARY_NAME = "summary.json"
SPEC_NAME = "spec.json"
TRACE_NAME = "trace.csv"
VALUE_NAME = "value.json"
EPISODES_NAME = "episodes.json"

TRACE_COLUMNS = (
    "iteration",
    "fit_residual_l1",
    "fit_residual_l2",
    "fit_residual_sup",
    "bellman_residual_sup",
    "value_error",
    "policy_error",
    "solver_iterations",
    "condition_number",
)


def git_blob_hash(data: bytes | str) -> str:
    """The object id git would give this content as a blob."""
    b = data if isinstance(data, bytes) else data.encode()
    return hashlib.sha1(b"blob %d\0" % len(b) + b).hexdigest()


def format_float(x: float | int | None) -> str:
    """17 significant digits, enough to round-trip any double; missing values are empty."""
    if x is None:
        return ""
    if isinstance(x, int):
        return str(x)
    return format(x, ".17g")


def atomic_write(path: Path, data: bytes | str) -> None:
    """Write to a temporary file in the destination directory, then rename it into place."""
    path.parent.mkdir(parents=True, exist_ok=True)
    b = data if isinstance(data, bytes) else data.encode()

    with NamedTemporaryFile(dir=path.parent, prefix=f".{path.name}.", delete=False) as f:
        f.write(b)
        f.flush()
        os.fsync(f.fileno())
        tmp = Path(f.name)

    try:
        tmp.replace(path)
    except OSError:
        tmp.unlink(missing_ok=True)
        raise


def write_model(path: Path, model: Model) -> None:
    atomic_write(path, model.model_dump_json(indent=2) + "\n")


def seed_dir(out_dir: Path, seed: int) -> Path:
    return out_dir / f"seed-{seed}"


def checkpoint_path(out_dir: Path, seed: int, iteration: int) -> Path:
    return seed_dir(out_dir, seed) / "checkpoints" / f"iter-{iteration:04d}.json"


def trace_rows(records: Iterable[IterationRecord]) -> list[list[str]]:
    return [
        [
            str(r.k),
            format_float(r.fit_residual_l1),
            format_float(r.fit_residual_l2),
            format_float(r.fit_residual_sup),
            format_float(r.bellman_residual_sup),
            format_float(r.value_error),
            format_float(r.policy_error),
            str(r.solver_iterations),
            format_float(r.condition_number),
        ]
        for r in records
    ]


def write_trace(path: Path, trace: RunTrace | Sequence[IterationRecord]) -> None:
    """Write the per-iteration trace as CSV; wall times are left out so the file depends only on the spec and seed."""
    records = trace.records if isinstance(trace, RunTrace) else trace

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    writer.writerows(trace_rows(records))

    atomic_write(path, buffer.getvalue())


def read_trace(path: Path) -> dict[str, NDArray[np.float64]]:
    """The columns of a trace CSV as float arrays, with missing values as NaN."""
    try:
        text = path.read_text()
    except OSError as e:
        raise ArtifactError(f"Could not read trace {path}: {e}") from e

    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != TRACE_COLUMNS:
        raise ArtifactError(f"{path} is not a trace file: expected the header {','.join(TRACE_COLUMNS)}")

    try:
        columns = np.array([[float(v) if v else np.nan for v in row] for row in rows[1:]], dtype=np.float64)
    except ValueError as e:
        raise ArtifactError(f"{path} contains a malformed value: {e}") from e

    columns = columns.reshape(len(rows) - 1, len(TRACE_COLUMNS))
    return {name: columns[:, i] for i, name in enumerate(TRACE_COLUMNS)}


class SeedStatus(str, Enum):
    Succeeded = "succeeded"
    Failed = "failed"


class SeedEntry(Model):
    seed: int
    status: SeedStatus
    iterations: Annotated[int, Field(ge=0, description="Completed iterations.")]
    message: str = ""


class ArtifactEntry(Model):
    path: Annotated[str, Field(description="The artifact's path relative to the run directory, with forward slashes.")]
    hash: Annotated[str, Field(description="The git blob hash of the artifact's contents.")]


class Manifest(Model):
    format: Literal[1] = MANIFEST_FORMAT
    name: str
    spec_hash: str
    versions: dict[str, str]
    seeds: tuple[SeedEntry, ...]
    partial: Annotated[bool, Field(description="Whether any seed failed, leaving its outputs incomplete.")]
    artifacts: tuple[ArtifactEntry, ...]


def versions() -> dict[str, str]:
    return {
        "evl-lab": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
        "scipy": scipy.__version__,
    }


def build_manifest(out_dir: Path, name: str, spec_json: str, seeds: Iterable[SeedEntry]) -> Manifest:
    """
    Hash the run-level files and everything under this run's seed directories.

    Other files in `out_dir`, such as seed directories or reports left by earlier runs, are not listed.
    """
    entries = tuple(sorted(seeds, key=lambda s: s.seed))
    candidates = [out_dir / SPEC_NAME, out_dir / SUMMARY_NAME]
    for entry in entries:
        candidates.extend(seed_dir(out_dir, entry.seed).rglob("*"))
    files = sorted(p for p in candidates if p.is_file() and not p.name.startswith("."))
    return Manifest(
        name=name,
        spec_hash=git_blob_hash(spec_json),
        versions=versions(),
        seeds=entries,
        partial=any(SeedStatus(s.status) is SeedStatus.Failed for s in entries),
        artifacts=tuple(ArtifactEntry(path=p.relative_to(out_dir).as_posix(), hash=git_blob_hash(p.read_bytes())) for p in files),
    )


def load_manifest(out_dir: Path) -> Manifest:
    path = out_dir / MANIFEST_NAME
    try:
        return Manifest.model_validate_json(path.read_text())
    except OSError as e:
        raise ArtifactError(f"Could not read manifest {path}: {e}") from e
    except ValidationError as e:
        raise ArtifactError(f"Manifest {path} is corrupt: {e}") from e


def verify_manifest(out_dir: Path) -> list[str]:
    """Problems found re-hashing every artifact the manifest lists; empty when everything matches."""
    manifest = load_manifest(out_dir)

    def intact(entry: ArtifactEntry) -> bool:
        path = out_dir / entry.path
        return path.is_file() and git_blob_hash(path.read_bytes()) == entry.hash

    broken, _ = partition(intact, manifest.artifacts)

    return [
        f"{entry.path}: missing" if not (out_dir / entry.path).is_file() else f"{entry.path}: content hash mismatch"
        for entry in broken
    ]


def median_or_none(values: Iterable[float | None]) -> float | None:
    present = [v for v in values if v is not None and np.isfinite(v)]
    return float(np.median(present)) if present else None


class SeedSummary(Model):
    seed: int
    status: SeedStatus
    value_error: float | None = None
    policy_error: float | None = None
    bellman_residual_sup: float | None = None
    fit_residual_sup: float | None = None
    episode_length: float | None = None
    random_episode_length: float | None = None


class Summary(Model):
    name: str
    algorithm: str
    environment: str
    median_value_error: float | None
    median_policy_error: float | None
    median_bellman_residual_sup: float | None
    median_fit_residual_sup: float | None
    median_episode_length: float | None
    median_random_episode_length: float | None
    seeds: tuple[SeedSummary, ...]

    @classmethod
    def from_seeds(cls, name: str, algorithm: str, environment: str, seeds: Iterable[SeedSummary]) -> Summary:
        entries = tuple(sorted(seeds, key=lambda s: s.seed))
        succeeded = [s for s in entries if SeedStatus(s.status) is SeedStatus.Succeeded]
        return cls(
            name=name,
            algorithm=algorithm,
            environment=environment,
            median_value_error=median_or_none(s.value_error for s in succeeded),
            median_policy_error=median_or_none(s.policy_error for s in succeeded),
            median_bellman_residual_sup=median_or_none(s.bellman_residual_sup for s in succeeded),
            median_fit_residual_sup=median_or_none(s.fit_residual_sup for s in succeeded),
            median_episode_length=median_or_none(s.episode_length for s in succeeded),
            median_random_episode_length=median_or_none(s.random_episode_length for s in succeeded),
            seeds=entries,
        )


def per_seed_columns(out_dir: Path, column: str) -> Mapping[int, NDArray[np.float64]]:
    """
    One trace column per seed of a run directory, keyed by seed.

    When the directory has a manifest only the seeds it lists are read; otherwise every seed-* directory is.
    """
    if column not in TRACE_COLUMNS:
        raise ArtifactError(f"Traces have no column {column!r}")

    if (out_dir / MANIFEST_NAME).is_file():
        seeds = [s.seed for s in load_manifest(out_dir).seeds]
        traces = [p for p in (seed_dir(out_dir, s) / TRACE_NAME for s in seeds) if p.is_file()]
    else:
        traces = sorted(out_dir.glob(f"seed-*/{TRACE_NAME}"))
    if not traces:
        raise ArtifactError(f"No traces found under {out_dir}")

    columns = {}
    for path in traces:
        try:
            seed = int(path.parent.name.removeprefix("seed-"))
        except ValueError as e:
            raise ArtifactError(f"Unexpected seed directory {path.parent}") from e
        columns[seed] = read_trace(path)[column]
    return dict(sorted(columns.items()))
