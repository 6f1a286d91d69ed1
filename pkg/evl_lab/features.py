from __future__ import annotations

from typing import Annotated, Literal, Union

import numpy as np
from numpy.random import Generator
from numpy.typing import NDArray
from pydantic import Field

from evl_lab.kernels import GaussianKernel, Kernel
from evl_lab.model import Model
from evl_lab.values import Basis, FourierBasis, SignBasis

CBound = Annotated[
    float,
    Field(
        gt=0,
        description="The constant C in the weight box ‖α‖∞ ≤ C/J.",
    ),
]


class FourierFamily(Model):
    """
    φ(s; ω, b) = cos(⟨ω, s⟩ + b) with ω ~ Normal(0, σ²I) and b ~ Uniform[-π, π].

    With `standardize`, ω is drawn for the state rescaled to [-1, 1] in every dimension
    and folded back into raw-state frequencies and offsets.
    """

    kind: Literal["fourier"] = "fourier"
    omega_variance: Annotated[
        float,
        Field(
            gt=0,
            description="The variance σ² of each component of ω.",
        ),
    ] = 1.0
    standardize: Annotated[
        bool,
        Field(description="Draw ω for states rescaled to [-1, 1] per dimension rather than for raw states."),
    ] = False
    c_bound: CBound = 1e4

    def sample(self, j: int, bounds: NDArray[np.float64], rng: Generator) -> FourierBasis:
        dim = len(bounds)
        omegas = rng.normal(0.0, np.sqrt(self.omega_variance), size=(j, dim))
        offsets = rng.uniform(-np.pi, np.pi, size=j)
        if self.standardize:
            center = (bounds[:, 0] + bounds[:, 1]) / 2
            # a zero-width dimension is constant, so its frequencies are left alone
            half_width = np.where(bounds[:, 1] > bounds[:, 0], (bounds[:, 1] - bounds[:, 0]) / 2, 1.0)
            omegas = omegas / half_width
            offsets = offsets - omegas @ center
        return FourierBasis(omegas=omegas, offsets=offsets)


class SignFamily(Model):
    """φ(s; k, t) = sign(s_k - t) with k uniform over the dimensions and t uniform over that dimension's interval."""

    kind: Literal["sign"] = "sign"
    c_bound: CBound = 1e4

    def sample(self, j: int, bounds: NDArray[np.float64], rng: Generator) -> SignBasis:
        dims = rng.integers(0, len(bounds), size=j)
        thresholds = rng.uniform(bounds[dims, 0], bounds[dims, 1])
        return SignBasis(dims=dims, thresholds=thresholds)


RpbfFamily = Annotated[
    Union[FourierFamily, SignFamily],
    Field(discriminator="kind"),
]


class RkhsSpec(Model):
    kind: Literal["rkhs"] = "rkhs"
    kernel: Annotated[
        Kernel,
        Field(description="The positive-semidefinite kernel K."),
    ] = GaussianKernel()
    regularization: Annotated[
        float,
        Field(
            gt=0,
            description="The regularizer λ in the penalty λ‖f‖².",
        ),
    ] = 1e-2

    @property
    def kappa(self) -> float:
        return self.kernel.kappa


class PolynomialSpec(Model):
    kind: Literal["polynomial"] = "polynomial"
    degree: Annotated[int, Field(ge=0, description="The maximum total degree of the monomials.")] = 4
    ridge: Annotated[
        float,
        Field(
            gt=0,
            description="The ridge floor used when the least-squares problem is rank deficient.",
        ),
    ] = 1e-8


FitterParams = Annotated[
    Union[FourierFamily, SignFamily, RkhsSpec, PolynomialSpec],
    Field(discriminator="kind"),
]


def sample_rpbf_basis(family: FourierFamily | SignFamily, j: int, bounds: NDArray[np.float64], rng: Generator) -> Basis:
    """Draw θ₁..θ_J iid from the family's parameter distribution ν."""
    if j < 1:
        raise ValueError(f"j must be at least 1, got {j}")
    return family.sample(j, np.asarray(bounds, dtype=np.float64), rng)
