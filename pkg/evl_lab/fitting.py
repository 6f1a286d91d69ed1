from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import LinAlgError, cho_factor, cho_solve, eigvalsh
from scipy.optimize import lsq_linear

from evl_lab.errors import FitError, NumericEvaluationError
from evl_lab.features import PolynomialSpec, RkhsSpec
from evl_lab.mdp import SampledBackup
from evl_lab.values import Basis, KernelBasis, PolynomialBasis, ValueFn, Vector

logger = logging.getLogger(__name__)

RPBF_TOLERANCE = 1e-8
RPBF_MAX_ITERATIONS = 100_000
POLISH_EVERY = 50


class RpbfSolver(str, Enum):
    Nesterov = "nesterov"
    Bvls = "bvls"


@dataclass(frozen=True)
class FitDiagnostics:
    solver: str
    iterations: int
    residual: float
    condition_number: float
    active_constraints: int = 0


@dataclass(frozen=True, eq=False)
class Fit:
    value: ValueFn
    diagnostics: FitDiagnostics


def condition_number(singular_values: NDArray[np.float64]) -> float:
    """
    The 2-norm condition number, capped at 1/eps so that rank deficiency is reported as a finite number.
    """
    largest = float(np.max(singular_values, initial=0.0))
    if largest == 0:
        return 1 / np.finfo(np.float64).eps
    smallest = max(float(np.min(singular_values)), np.finfo(np.float64).eps * largest)
    return largest / smallest


def _check_design(design: NDArray[np.float64], data: SampledBackup) -> None:
    bad = ~np.isfinite(design)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise NumericEvaluationError(f"Basis function {j} evaluated to {design[i, j]} at state {data.states[i].tolist()}")


def box_kkt_residual(
    design: NDArray[np.float64],
    targets: Vector,
    weights: Vector,
    bound: float,
) -> float:
    """
    Max-norm of the projected gradient of (1/N)‖Φα − y‖² over the box ‖α‖∞ ≤ bound.

    Zero exactly at the constrained minimizer: free coordinates have zero partial derivative
    and coordinates on the boundary have a partial derivative pointing out of the box.
    """
    gradient = 2 * design.T @ (design @ weights - targets) / len(targets)
    projected = np.where(
        (weights >= bound) & (gradient < 0) | (weights <= -bound) & (gradient > 0),
        0.0,
        gradient,
    )
    return float(np.max(np.abs(projected), initial=0.0))


def fit_rpbf(
    basis: Basis,
    data: SampledBackup,
    c_bound: float,
    clamp: float | None = None,
    solver: RpbfSolver = RpbfSolver.Nesterov,
    tol: float = RPBF_TOLERANCE,
    max_iter: int = RPBF_MAX_ITERATIONS,
) -> Fit:
    """
    Minimize (1/N) Σ_n (Σ_j α_j φ(s_n; θ_j) − ṽ(s_n))² subject to ‖α‖∞ ≤ C/J.

    The default solver is projected gradient with Nesterov momentum and adaptive restarts,
    step 1/L with L the largest eigenvalue of the Hessian, started from the clipped
    unconstrained least-squares solution. Every few steps the coordinates off the bound are re-solved
    exactly, which ends the run once the active set is right. `tol` bounds the projected gradient
    relative to its largest possible size at zero. `bvls` hands the problem to scipy's
    bounded-variable least squares instead.
    """
    if c_bound <= 0:
        raise ValueError(f"c_bound must be positive, got {c_bound}")

    design = basis.design(data.states)
    _check_design(design, data)

    j = basis.cardinality
    bound = c_bound / j
    targets = data.targets

    match RpbfSolver(solver):
        case RpbfSolver.Nesterov:
            weights, iterations = _projected_gradient(design, targets, bound, tol=tol, max_iter=max_iter)
        case RpbfSolver.Bvls:
            result = lsq_linear(
                design / np.sqrt(data.n),
                targets / np.sqrt(data.n),
                bounds=(-bound, bound),
                method="bvls",
                tol=tol,
            )
            weights, iterations = np.clip(result.x, -bound, bound), int(result.nit)

    diagnostics = FitDiagnostics(
        solver=RpbfSolver(solver).value,
        iterations=iterations,
        residual=box_kkt_residual(design, targets, weights, bound),
        condition_number=condition_number(np.linalg.svd(design, compute_uv=False)),
        active_constraints=int(np.sum(np.isclose(np.abs(weights), bound, rtol=0, atol=1e-12 * max(bound, 1)))),
    )
    logger.debug(f"RPBF fit with J = {j} on N = {data.n} states: {diagnostics}")

    return Fit(value=ValueFn(basis=basis, weights=weights, clamp=clamp), diagnostics=diagnostics)


def _projected_gradient(
    design: NDArray[np.float64],
    targets: Vector,
    bound: float,
    tol: float,
    max_iter: int,
) -> tuple[Vector, int]:
    n = len(targets)
    gram = design.T @ design / n
    moment = design.T @ targets / n

    lipschitz = 2 * float(eigvalsh(gram)[-1])

    unconstrained, *_ = np.linalg.lstsq(design, targets, rcond=None)
    x = np.clip(unconstrained, -bound, bound)
    if lipschitz <= 0:
        # every feature vanishes on the data, so every feasible point is optimal
        return x, 0

    # ‖∇f(0)‖ is at most this, so the tolerance is relative to the scale of the problem
    scale = np.sqrt(2 * lipschitz) * float(np.linalg.norm(targets)) / np.sqrt(n)
    threshold = tol * max(scale, np.finfo(np.float64).tiny)

    def gradient(a: Vector) -> Vector:
        return 2 * (gram @ a - moment)

    def step(a: Vector) -> Vector:
        return np.clip(a - gradient(a) / lipschitz, -bound, bound)

    def converged(a: Vector) -> bool:
        return float(np.max(np.abs(a - step(a)), initial=0.0)) * lipschitz <= threshold

    y = x
    t = 1.0
    for iteration in range(1, max_iter + 1):
        if converged(x):
            return x, iteration - 1
        if (iteration - 1) % POLISH_EVERY == 0:
            polished = _polish(design, targets, x, bound)
            if polished is not None and converged(polished):
                return polished, iteration

        x_next = step(y)
        t_next = (1 + np.sqrt(1 + 4 * t * t)) / 2
        if np.dot(y - x_next, x_next - x) > 0:
            # momentum is pointing uphill
            y, t = x_next, 1.0
        else:
            y = x_next + ((t - 1) / t_next) * (x_next - x)
            t = t_next
        x = x_next

    logger.warning(f"Projected-gradient solver stopped at its cap of {max_iter} iterations before reaching tolerance {tol}")
    return x, max_iter


def _polish(design: NDArray[np.float64], targets: Vector, x: Vector, bound: float) -> Vector | None:
    """
    Least squares over the coordinates of `x` strictly inside the box, with the others held at the bound.

    None when that solution leaves the box.
    """
    pinned = np.abs(x) >= bound
    candidate = np.where(pinned, np.sign(x) * bound, 0.0)
    free = ~pinned
    if free.any():
        solution, *_ = np.linalg.lstsq(design[:, free], targets - design @ candidate, rcond=None)
        candidate[free] = solution
    if np.max(np.abs(candidate), initial=0.0) > bound:
        return None
    return candidate


def fit_rkhs(spec: RkhsSpec, data: SampledBackup, clamp: float | None = None) -> Fit:
    """
    Regularized least squares in the kernel's RKHS.

    By the representer theorem the minimizer is Σ_n α_n K(s_n, ·) with
    ([K(s_i, s_j)] + λN·I) α = ṽ, which is positive definite and solved by Cholesky.
    """
    gram = spec.kernel.gram(data.states, data.states)

    bad = ~np.isfinite(gram)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise NumericEvaluationError(
            f"Kernel evaluated to {gram[i, j]} at the state pair {data.states[i].tolist()}, {data.states[j].tolist()}"
        )

    system = gram + spec.regularization * data.n * np.eye(data.n)
    try:
        factor = cho_factor(system, lower=True)
    except LinAlgError as e:
        raise FitError(f"Cholesky factorization of the regularized {data.n}×{data.n} Gram matrix failed: {e}") from e

    weights = cho_solve(factor, data.targets)

    scale = np.linalg.norm(data.targets)
    residual = float(np.linalg.norm(system @ weights - data.targets) / (scale if scale > 0 else 1.0))
    eigenvalues = eigvalsh(system)

    diagnostics = FitDiagnostics(
        solver="cholesky",
        iterations=1,
        residual=residual,
        condition_number=condition_number(np.abs(eigenvalues)),
    )
    logger.debug(f"RKHS fit on N = {data.n} states: {diagnostics}")

    return Fit(
        value=ValueFn(basis=KernelBasis(kernel=spec.kernel, centers=data.states.copy()), weights=weights, clamp=clamp),
        diagnostics=diagnostics,
    )


def fit_polynomial(spec: PolynomialSpec, data: SampledBackup, clamp: float | None = None) -> Fit:
    """
    Ordinary least squares on monomials up to total degree `spec.degree`.

    Falls back to ridge-regularized normal equations with the ridge floor
    when the design is rank deficient or has no more rows than columns.
    """
    shift = data.states.mean(axis=0)
    scale = data.states.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    basis = PolynomialBasis(degree=spec.degree, shift=shift, scale=scale)

    design = basis.design(data.states)
    _check_design(design, data)

    singular_values = np.linalg.svd(design, compute_uv=False)
    rank = int(np.sum(singular_values > singular_values.max(initial=0.0) * max(design.shape) * np.finfo(np.float64).eps))

    if data.n > basis.cardinality and rank == basis.cardinality:
        weights, *_ = np.linalg.lstsq(design, data.targets, rcond=None)
        solver = "lstsq"
    else:
        logger.debug(f"Polynomial design of rank {rank} with {basis.cardinality} monomials; using the ridge floor {spec.ridge}")
        weights = np.linalg.solve(
            design.T @ design + spec.ridge * np.eye(basis.cardinality),
            design.T @ data.targets,
        )
        solver = "ridge"

    diagnostics = FitDiagnostics(
        solver=solver,
        iterations=1,
        residual=float(np.sqrt(np.mean((design @ weights - data.targets) ** 2))),
        condition_number=condition_number(singular_values),
    )

    return Fit(value=ValueFn(basis=basis, weights=weights, clamp=clamp), diagnostics=diagnostics)
