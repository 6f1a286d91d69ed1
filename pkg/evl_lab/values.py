from __future__ import annotations

from abc import ABC, abstractmethod
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from itertools import combinations_with_replacement
from typing import Annotated, Any, ClassVar, Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import Field, TypeAdapter

from evl_lab.constants import CHECKPOINT_FORMAT
from evl_lab.errors import NumericEvaluationError
from evl_lab.kernels import Kernel
from evl_lab.model import Model

States = NDArray[np.float64]
Vector = NDArray[np.float64]


class ValueKind(str, Enum):
    Rpbf = "rpbf"
    Rkhs = "rkhs"
    Polynomial = "polynomial"
    TabularGrid = "tabular-grid"
    Constant = "constant"


def as_states(states: ArrayLike) -> States:
    """
    Coerce a sequence of states to an (n, d) array.
    A flat sequence is read as n one-dimensional states.
    """
    arr = np.asarray(states, dtype=np.float64)
    if arr.ndim == 0:
        return arr.reshape(1, 1)
    if arr.ndim == 1:
        return arr[:, None]
    if arr.ndim == 2:
        return arr
    raise ValueError(f"States must be at most two-dimensional, got shape {arr.shape}")


def as_state(state: ArrayLike) -> States:
    """Coerce a single state (scalar or vector) to a (1, d) array."""
    return np.atleast_1d(np.asarray(state, dtype=np.float64))[None, :]


class Basis(ABC):
    kind: ClassVar[ValueKind]

    @property
    @abstractmethod
    def cardinality(self) -> int:
        raise NotImplementedError

    @abstractmethod
    def design(self, states: States) -> NDArray[np.float64]:
        """The (n, cardinality) matrix of basis functions evaluated at the states."""
        raise NotImplementedError

    @abstractmethod
    def to_json(self) -> dict[str, Any]:
        raise NotImplementedError

    def evaluate(self, states: States, weights: Vector) -> Vector:
        return self.design(states) @ weights


@dataclass(frozen=True, eq=False)
class FourierBasis(Basis):
    """Random Fourier features cos(⟨ω_j, s⟩ + b_j)."""

    kind: ClassVar[ValueKind] = ValueKind.Rpbf
    family: ClassVar[str] = "fourier"

    omegas: NDArray[np.float64]
    offsets: Vector

    @property
    def cardinality(self) -> int:
        return len(self.offsets)

    def design(self, states: States) -> NDArray[np.float64]:
        return np.cos(states @ self.omegas.T + self.offsets)

    def to_json(self) -> dict[str, Any]:
        return {
            "family": self.family,
            "omegas": self.omegas.tolist(),
            "offsets": self.offsets.tolist(),
        }


@dataclass(frozen=True, eq=False)
class SignBasis(Basis):
    """Random threshold features sign(s_k - t)."""

    kind: ClassVar[ValueKind] = ValueKind.Rpbf
    family: ClassVar[str] = "sign"

    dims: NDArray[np.int64]
    thresholds: Vector

    @property
    def cardinality(self) -> int:
        return len(self.thresholds)

    def design(self, states: States) -> NDArray[np.float64]:
        return np.sign(states[:, self.dims] - self.thresholds)

    def to_json(self) -> dict[str, Any]:
        return {
            "family": self.family,
            "dims": self.dims.tolist(),
            "thresholds": self.thresholds.tolist(),
        }


@dataclass(frozen=True, eq=False)
class KernelBasis(Basis):
    kind: ClassVar[ValueKind] = ValueKind.Rkhs

    kernel: Kernel
    centers: States

    @property
    def cardinality(self) -> int:
        return len(self.centers)

    def design(self, states: States) -> NDArray[np.float64]:
        return self.kernel.gram(states, self.centers)

    def to_json(self) -> dict[str, Any]:
        return {
            "kernel": self.kernel.model_dump(),
            "centers": self.centers.tolist(),
        }


@dataclass(frozen=True, eq=False)
class PolynomialBasis(Basis):
    """
    Monomials of total degree at most `degree` in the standardized state (s - shift) / scale.
    Standardizing leaves the function space unchanged.
    """

    kind: ClassVar[ValueKind] = ValueKind.Polynomial

    degree: int
    shift: Vector
    scale: Vector

    @cached_property
    def exponents(self) -> NDArray[np.int64]:
        return monomial_exponents(dim=len(self.shift), degree=self.degree)

    @property
    def cardinality(self) -> int:
        return len(self.exponents)

    def design(self, states: States) -> NDArray[np.float64]:
        z = (states - self.shift) / self.scale
        return np.prod(z[:, None, :] ** self.exponents[None, :, :], axis=2)

    def to_json(self) -> dict[str, Any]:
        return {
            "degree": self.degree,
            "shift": self.shift.tolist(),
            "scale": self.scale.tolist(),
        }


def monomial_exponents(dim: int, degree: int) -> NDArray[np.int64]:
    rows = []
    for total in range(degree + 1):
        for combo in combinations_with_replacement(range(dim), total):
            row = np.zeros(dim, dtype=np.int64)
            for d in combo:
                row[d] += 1
            rows.append(row)
    return np.array(rows, dtype=np.int64).reshape(len(rows), dim)


@dataclass(frozen=True, eq=False)
class GridBasis(Basis):
    """Piecewise-linear interpolation between the values stored at one-dimensional grid nodes."""

    kind: ClassVar[ValueKind] = ValueKind.TabularGrid

    nodes: Vector
    rule: Literal["linear"] = "linear"

    @property
    def cardinality(self) -> int:
        return len(self.nodes)

    def design(self, states: States) -> NDArray[np.float64]:
        return np.stack(
            [np.interp(states[:, 0], self.nodes, unit) for unit in np.eye(len(self.nodes))],
            axis=1,
        )

    def evaluate(self, states: States, weights: Vector) -> Vector:
        return np.interp(states[:, 0], self.nodes, weights)

    def to_json(self) -> dict[str, Any]:
        return {
            "nodes": self.nodes.tolist(),
            "rule": self.rule,
        }


@dataclass(frozen=True, eq=False)
class ConstantBasis(Basis):
    kind: ClassVar[ValueKind] = ValueKind.Constant

    @property
    def cardinality(self) -> int:
        return 1

    def design(self, states: States) -> NDArray[np.float64]:
        return np.ones((len(states), 1))

    def to_json(self) -> dict[str, Any]:
        return {}


@dataclass(frozen=True, eq=False)
class ValueFn:
    """
    A fitted value-function estimate: a basis descriptor and its weights.

    Immutable after construction, so it can be shared read-only between workers.
    """

    basis: Basis
    weights: Vector = field(repr=False)
    clamp: float | None = None

    def __post_init__(self) -> None:
        weights = np.array(self.weights, dtype=np.float64)
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)

        if weights.shape != (self.basis.cardinality,):
            raise ValueError(
                f"A {self.kind.value} basis of cardinality {self.basis.cardinality} needs that many weights, got shape {weights.shape}"
            )
        if self.clamp is not None and not self.clamp > 0:
            raise ValueError(f"clamp must be positive, got {self.clamp}")

    @classmethod
    def constant(cls, value: float, clamp: float | None = None) -> ValueFn:
        return cls(basis=ConstantBasis(), weights=np.array([value]), clamp=clamp)

    @classmethod
    def zero(cls) -> ValueFn:
        return cls.constant(0.0)

    @property
    def kind(self) -> ValueKind:
        return self.basis.kind

    def __call__(self, states: States) -> Vector:
        values = self.basis.evaluate(states, self.weights)

        bad = ~np.isfinite(values)
        if bad.any():
            i = int(np.argmax(bad))
            raise NumericEvaluationError(
                f"Value function of kind {self.kind.value} evaluated to {values[i]} at state {states[i].tolist()}"
            )

        if self.clamp is not None:
            values = np.clip(values, -self.clamp, self.clamp)

        return values

    def to_checkpoint(self, iteration: int, seed: int) -> Checkpoint:
        return Checkpoint(
            kind=self.kind,
            basis=self.basis.to_json(),
            weights=tuple(self.weights.tolist()),
            clamp=self.clamp,
            iteration=iteration,
            seed=seed,
        )


def evaluate_value_fn(v: ValueFn, states: Sequence[ArrayLike] | ArrayLike) -> Vector:
    """Pointwise evaluation of `v` at each state, with its clamp applied."""
    return v(as_states(states))


class Checkpoint(Model):
    format: Literal[1] = CHECKPOINT_FORMAT
    kind: ValueKind
    basis: dict[str, Any]
    weights: tuple[float, ...]
    clamp: Annotated[float | None, Field(gt=0)] = None
    iteration: Annotated[int, Field(ge=0)]
    seed: Annotated[int, Field(ge=0)]

    def to_value_fn(self) -> ValueFn:
        return ValueFn(
            basis=basis_from_json(ValueKind(self.kind), self.basis),
            weights=np.array(self.weights),
            clamp=self.clamp,
        )


_kernel_adapter: TypeAdapter[Kernel] = TypeAdapter(Kernel)


def basis_from_json(kind: ValueKind, data: Mapping[str, Any]) -> Basis:
    match kind:
        case ValueKind.Rpbf:
            match data["family"]:
                case "fourier":
                    return FourierBasis(
                        omegas=np.array(data["omegas"], dtype=np.float64),
                        offsets=np.array(data["offsets"], dtype=np.float64),
                    )
                case "sign":
                    return SignBasis(
                        dims=np.array(data["dims"], dtype=np.int64),
                        thresholds=np.array(data["thresholds"], dtype=np.float64),
                    )
                case family:
                    raise ValueError(f"Unknown feature family {family!r}")
        case ValueKind.Rkhs:
            return KernelBasis(
                kernel=_kernel_adapter.validate_python(data["kernel"]),
                centers=np.array(data["centers"], dtype=np.float64),
            )
        case ValueKind.Polynomial:
            return PolynomialBasis(
                degree=int(data["degree"]),
                shift=np.array(data["shift"], dtype=np.float64),
                scale=np.array(data["scale"], dtype=np.float64),
            )
        case ValueKind.TabularGrid:
            return GridBasis(nodes=np.array(data["nodes"], dtype=np.float64))
        case ValueKind.Constant:
            return ConstantBasis()

    raise ValueError(f"Unknown value-function kind {kind!r}")
