from __future__ import annotations

import asyncio
import csv
import io
import json
import logging
import os
from enum import Enum
from pathlib import Path
from time import monotonic
from typing import Optional

import numpy as np
import typer.rich_utils as ru
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.text import Text
from typer import Exit, Option, Typer

from evl_lab.artifacts import (
    MANIFEST_NAME,
    SPEC_NAME,
    SUMMARY_NAME,
    SeedEntry,
    Summary,
    atomic_write,
    build_manifest,
    format_float,
    per_seed_columns,
    verify_manifest,
    write_model,
)
from evl_lab.bounds import ComplexityInputs, Norm, Variant, complexity_rkhs, complexity_rpbf
from evl_lab.chain import (
    DominatingChain,
    chain_mixing_bound,
    chain_replicas,
    chain_simulate,
    chain_steady_state,
    corollary_requirements,
    dominance_check,
    error_levels,
    estimate_q,
)
from evl_lab.config import ExperimentSpec
from evl_lab.constants import THREADS_ENVVAR
from evl_lab.errors import ArtifactError, ComplexityError, DominanceError
from evl_lab.orchestrator import Orchestrator
from evl_lab.rng import Stream

ru.STYLE_HELPTEXT = ""

cli = Typer(pretty_exceptions_enable=False, no_args_is_help=True)

logger = logging.getLogger(__name__)


class Method(str, Enum):
    Rpbf = "rpbf"
    Rkhs = "rkhs"


class VariantChoice(str, Enum):
    Display = "theorem-display"
    Appendix = "appendix-derivation"
    Both = "both"


@cli.callback()
def main(
    log_level: str = Option(
        default="WARNING",
        help="The level of library log messages to show on stderr.",
    ),
) -> None:
    """Empirical value learning experiments and analysis tools."""
    logging.basicConfig(
        level=log_level.upper(),
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), rich_tracebacks=True)],
        force=True,
    )


def print_validation_error(console: Console, e: ValidationError) -> None:
    for err in e.errors():
        loc = ".".join(map(str, err["loc"]))
        msg = err["msg"]
        console.print(f"[red]ERROR[/red] {loc} -> {msg}")


def load_spec(console: Console, path: Path) -> ExperimentSpec:
    try:
        return ExperimentSpec.from_file(path)
    except ValidationError as e:
        print_validation_error(console, e)
        raise Exit(code=2)
    except NotImplementedError as e:
        console.print(Text(str(e), style="red"))
        raise Exit(code=2)


def job_limit(jobs: int) -> int:
    cap = os.environ.get(THREADS_ENVVAR)
    if cap is None:
        return max(jobs, 1)
    try:
        return max(min(jobs, int(cap)), 1)
    except ValueError:
        logger.warning(f"Ignoring {THREADS_ENVVAR}={cap!r}, which is not an integer")
        return max(jobs, 1)


@cli.command()
def run(
    spec: Path = Option(
        ...,
        exists=True,
        readable=True,
        dir_okay=False,
        help="The experiment spec (JSON or YAML).",
    ),
    out: Optional[Path] = Option(
        default=None,
        help="The output directory. Defaults to the spec's output.",
    ),
    jobs: int = Option(
        default=1,
        min=1,
        help=f"How many seeds to run in parallel. Capped by ${THREADS_ENVVAR}.",
    ),
    seed_offset: int = Option(
        default=0,
        min=0,
        help="Added to every seed in the spec.",
    ),
    verify: bool = Option(
        default=False,
        help="Re-hash every artifact against the manifest after writing it.",
    ),
) -> None:
    """Run every seed of an experiment, writing traces, checkpoints, a summary and a manifest."""
    start_time = monotonic()

    console = Console()

    parsed = load_spec(console, spec)
    out_dir = out or parsed.output
    seeds = tuple(s + seed_offset for s in parsed.seeds)

    spec_json = parsed.model_dump_json(indent=2) + "\n"
    atomic_write(out_dir / SPEC_NAME, spec_json)

    orchestrator = Orchestrator(spec=parsed, seeds=seeds, out_dir=out_dir, jobs=job_limit(jobs), console=console)

    try:
        outcomes = asyncio.run(orchestrator.run())
    except KeyboardInterrupt:
        raise Exit(code=130)

    summary = Summary.from_seeds(
        name=parsed.name,
        algorithm=parsed.algorithm,
        environment=parsed.environment.id,
        seeds=(o.summary for o in outcomes.values()),
    )
    write_model(out_dir / SUMMARY_NAME, summary)

    entries = [
        SeedEntry(seed=o.seed, status=o.status, iterations=o.iterations, message=o.message)
        for o in outcomes.values()
    ]
    missing = set(seeds) - set(outcomes)
    entries.extend(SeedEntry(seed=s, status="failed", iterations=0, message="did not finish") for s in missing)

    manifest = build_manifest(out_dir, name=parsed.name, spec_json=spec_json, seeds=entries)
    write_model(out_dir / MANIFEST_NAME, manifest)

    console.print(Text(f"Finished {len(seeds)} seeds in {monotonic() - start_time:.3f} seconds."))

    if verify:
        problems = verify_manifest(out_dir)
        for problem in problems:
            console.print(f"[red]MISMATCH[/red] {problem}")
        if problems:
            raise Exit(code=1)

    if manifest.partial:
        console.print(Text("Some seeds failed; their outputs are partial.", style="red"))
        raise Exit(code=1)


@cli.command()
def bounds(
    epsilon: Optional[float] = Option(default=None, help="The target accuracy ε."),
    delta: Optional[float] = Option(default=None, help="The failure probability δ."),
    v_max: Optional[float] = Option(default=None, help="The bound on the value functions."),
    gamma: Optional[float] = Option(default=None, help="The discount factor."),
    c_rho_mu: float = Option(default=1.0, help="The concentrability coefficient C_ρ,μ."),
    c_const: float = Option(default=1.0, help="The weight bound C of the RPBF class."),
    n_actions: int = Option(default=2, help="The number of actions."),
    c_k: float = Option(default=1.0, help="The kernel constant C_K."),
    kappa: float = Option(default=1.0, help="The kernel bound κ."),
    inputs: Optional[Path] = Option(
        default=None,
        exists=True,
        readable=True,
        dir_okay=False,
        help="Read the calculator inputs from a JSON or YAML file instead of flags.",
    ),
    method: Method = Option(default=Method.Rpbf, help="Which algorithm's sample complexity to compute."),
    norm: Norm = Option(default=Norm.L1, help="The error norm for RPBF."),
    variant: VariantChoice = Option(default=VariantChoice.Both, help="Which evaluation of the RPBF formulas."),
) -> None:
    """Print the sample sizes N, M, J, K* and K_min that the error guarantees call for."""
    console = Console()

    try:
        if inputs is not None:
            parsed = ComplexityInputs.from_file(inputs)
        else:
            parsed = ComplexityInputs.model_validate(
                {
                    "epsilon": epsilon,
                    "delta": delta,
                    "v_max": v_max,
                    "gamma": gamma,
                    "c_rho_mu": c_rho_mu,
                    "c_const": c_const,
                    "n_actions": n_actions,
                    "c_k": c_k,
                    "kappa": kappa,
                }
            )
    except ValidationError as e:
        print_validation_error(console, e)
        raise Exit(code=2)

    try:
        match method:
            case Method.Rpbf:
                variants = (Variant.Display, Variant.Appendix) if variant is VariantChoice.Both else (Variant(variant.value),)
                results = [complexity_rpbf(parsed, norm=norm, variant=v).model_dump(mode="json") for v in variants]
            case Method.Rkhs:
                results = [complexity_rkhs(parsed).model_dump(mode="json")]
    except ComplexityError as e:
        console.print(Text(str(e), style="red"))
        raise Exit(code=1)

    console.print_json(json.dumps({"inputs": parsed.model_dump(mode="json"), "results": results}))


@cli.command()
def chain(
    q: float = Option(..., min=0, max=1, help="The probability of a good iteration."),
    k_star: int = Option(..., min=1, help="K*, the number of states of the chain."),
    steps: int = Option(default=1_000_000, min=1, help="The length of the simulated trajectory."),
    replicas: int = Option(default=100_000, min=1, help="Independent chains used to check the mixing bound."),
    seed: int = Option(default=0, min=0, help="The random seed."),
    delta_prime: float = Option(default=0.1, help="The distance to stationarity δ' for the mixing bound."),
    delta: Optional[float] = Option(default=None, help="Also report the q and K that guarantee Pr{Y_K = 1} ≥ δ."),
    out: Path = Option(default=Path("chain"), help="The output directory for the occupancy CSV and JSON report."),
) -> None:
    """Compare a simulated dominating chain with its stationary distribution and mixing bound."""
    console = Console()

    dominating = DominatingChain(q=q, k_star=k_star)
    stream = Stream.from_seed(seed)

    steady = chain_steady_state(dominating)
    simulation = chain_simulate(dominating, steps, stream.child(0).generator())

    report: dict[str, object] = {
        "q": q,
        "k_star": k_star,
        "steps": steps,
        "seed": seed,
        "steady_state": steady.tolist(),
        "occupancy": simulation.occupancy.tolist(),
        "total_variation": simulation.total_variation(steady),
    }

    if 0 < q < 1:
        k = chain_mixing_bound(dominating, delta_prime)
        finals = chain_replicas(dominating, k, replicas, stream.child(1).generator())
        report |= {
            "delta_prime": delta_prime,
            "mixing_bound": k,
            "replicas": replicas,
            "pr_y_k_equals_1": float(np.mean(finals == 1)),
            "mu_1": float(steady[0]),
        }

    if delta is not None:
        try:
            report["corollary"] = corollary_requirements(delta, k_star).model_dump()
        except ValueError as e:
            console.print(Text(str(e), style="red"))
            raise Exit(code=2)

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(("state", "steady_state", "occupancy"))
    for state, (mu, freq) in enumerate(zip(steady, simulation.occupancy), start=1):
        writer.writerow((state, format_float(float(mu)), format_float(float(freq))))

    atomic_write(out / "occupancy.csv", buffer.getvalue())
    atomic_write(out / "report.json", json.dumps(report, indent=2) + "\n")

    console.print_json(json.dumps(report))


@cli.command()
def dominance(
    run_dir: Path = Option(..., exists=True, file_okay=False, help="The output directory of a run."),
    k_star: int = Option(..., min=1, help="K*, the number of states of the dominating chain."),
    epsilon: Optional[float] = Option(
        default=None,
        help="The residual threshold of a good iteration. Defaults to the median residual across runs.",
    ),
    metric: str = Option(
        default="bellman_residual_sup",
        help="The trace column to threshold; falls back to fit_residual_sup when the runs did not record it.",
    ),
    burn_in: int = Option(default=0, min=0, help="Leading iterations to drop before the error levels start at K*."),
    out: Optional[Path] = Option(default=None, help="The report CSV. Defaults to dominance.csv in the run directory."),
) -> None:
    """Check empirically that the runs' error levels are stochastically dominated by the chain."""
    console = Console()

    try:
        columns = per_seed_columns(run_dir, metric)
        if any(np.isnan(c).any() for c in columns.values()) and metric != "fit_residual_sup":
            logger.warning(f"Some traces did not record {metric}; using fit_residual_sup instead")
            metric = "fit_residual_sup"
            columns = per_seed_columns(run_dir, metric)
    except ArtifactError as e:
        console.print(Text(str(e), style="red"))
        raise Exit(code=1)

    lengths = {len(c) for c in columns.values()}
    if len(lengths) != 1:
        console.print(Text(f"Traces have differing lengths {sorted(lengths)}; were some runs partial?", style="red"))
        raise Exit(code=1)

    residuals = np.stack(list(columns.values()))[:, burn_in:]
    if residuals.shape[1] == 0:
        console.print(Text(f"A burn-in of {burn_in} leaves no iterations to check", style="red"))
        raise Exit(code=1)
    eps = float(np.median(residuals)) if epsilon is None else epsilon
    q = estimate_q(residuals, eps)

    try:
        report = dominance_check(error_levels(residuals, eps, k_star), DominatingChain(q=q, k_star=k_star))
    except DominanceError as e:
        console.print(Text(str(e), style="red"))
        raise Exit(code=1)

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(("k", "theta", "px", "py", "stderr", "flag"))
    for row in report.rows:
        writer.writerow(
            (row.k, row.theta, format_float(row.px), format_float(row.py), format_float(row.stderr), int(row.flag))
        )
    atomic_write(out or run_dir / "dominance.csv", buffer.getvalue())

    console.print_json(
        json.dumps(
            {
                "metric": metric,
                "epsilon": eps,
                "q": q,
                "k_star": k_star,
                "burn_in": burn_in,
                "runs": report.runs,
                "violations": len(report.violations),
            }
        )
    )


@cli.command("verify")
def verify_command(
    run_dir: Path = Option(..., exists=True, file_okay=False, help="The output directory of a run."),
) -> None:
    """Re-hash every artifact listed in a run's manifest."""
    console = Console()

    try:
        problems = verify_manifest(run_dir)
    except ArtifactError as e:
        console.print(Text(str(e), style="red"))
        raise Exit(code=1)

    for problem in problems:
        console.print(f"[red]MISMATCH[/red] {problem}")

    if problems:
        raise Exit(code=1)

    console.print(Text("All artifacts match the manifest.", style="green"))


@cli.command()
def schema() -> None:
    """Print the JSON schema of experiment specs."""
    Console().print_json(json.dumps(ExperimentSpec.model_json_schema()))
