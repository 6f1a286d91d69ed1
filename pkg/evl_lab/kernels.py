from __future__ import annotations

from typing import Annotated, Literal, Union

import numpy as np
from numpy.typing import NDArray
from pydantic import Field
from scipy.spatial.distance import cdist

from evl_lab.model import Model


class GaussianKernel(Model):
    kind: Literal["gaussian"] = "gaussian"
    inverse_bandwidth: Annotated[
        float,
        Field(
            gt=0,
            description="The inverse squared bandwidth 1/σ² in exp(-‖x-y‖²/(2σ²)).",
        ),
    ] = 0.01

    @property
    def kappa(self) -> float:
        return 1.0

    def gram(self, x: NDArray[np.float64], y: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.exp(-0.5 * self.inverse_bandwidth * cdist(x, y, "sqeuclidean"))


class LaplacianKernel(Model):
    kind: Literal["laplacian"] = "laplacian"
    scale: Annotated[
        float,
        Field(gt=0, description="The scale γ in exp(-γ‖x-y‖₁)."),
    ] = 1.0

    @property
    def kappa(self) -> float:
        return 1.0

    def gram(self, x: NDArray[np.float64], y: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.exp(-self.scale * cdist(x, y, "cityblock"))


class ExponentialKernel(Model):
    kind: Literal["exponential"] = "exponential"
    scale: Annotated[
        float,
        Field(gt=0, description="The scale γ in exp(-γ‖x-y‖₂)."),
    ] = 1.0

    @property
    def kappa(self) -> float:
        return 1.0

    def gram(self, x: NDArray[np.float64], y: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.exp(-self.scale * cdist(x, y, "euclidean"))


Kernel = Annotated[
    Union[GaussianKernel, LaplacianKernel, ExponentialKernel],
    Field(discriminator="kind"),
]
