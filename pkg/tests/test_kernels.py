import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from pydantic import TypeAdapter, ValidationError

from evl_lab.kernels import ExponentialKernel, GaussianKernel, Kernel, LaplacianKernel

KERNELS = (
    GaussianKernel(),
    GaussianKernel(inverse_bandwidth=4.0),
    LaplacianKernel(scale=0.5),
    ExponentialKernel(scale=2.0),
)


@pytest.mark.parametrize("kernel", KERNELS)
def test_gram_is_symmetric_and_psd(kernel: GaussianKernel | LaplacianKernel | ExponentialKernel) -> None:
    x = np.random.default_rng(0).uniform(-3, 3, size=(40, 2))

    gram = kernel.gram(x, x)

    assert np.allclose(gram, gram.T, rtol=0, atol=1e-12)
    assert np.linalg.eigvalsh(gram).min() >= -1e-8
    assert np.allclose(np.diag(gram), kernel.kappa**2)


@given(
    x=st.lists(st.floats(-10, 10), min_size=3, max_size=3),
    y=st.lists(st.floats(-10, 10), min_size=3, max_size=3),
)
def test_kernels_are_symmetric_and_bounded(x: list[float], y: list[float]) -> None:
    a, b = np.array([x]), np.array([y])
    for kernel in KERNELS:
        k_ab = kernel.gram(a, b)[0, 0]
        assert k_ab == pytest.approx(kernel.gram(b, a)[0, 0], abs=1e-12)
        assert 0 <= k_ab <= kernel.kappa**2


@pytest.mark.parametrize(
    ("kernel", "distance", "expected"),
    (
        (GaussianKernel(inverse_bandwidth=0.01), 10.0, np.exp(-0.5)),
        (GaussianKernel(inverse_bandwidth=1.0), 0.0, 1.0),
        (LaplacianKernel(scale=1.0), 2.0, np.exp(-2.0)),
        (ExponentialKernel(scale=0.5), 2.0, np.exp(-1.0)),
    ),
)
def test_kernel_values(
    kernel: GaussianKernel | LaplacianKernel | ExponentialKernel, distance: float, expected: float
) -> None:
    assert kernel.gram(np.array([[0.0]]), np.array([[distance]]))[0, 0] == pytest.approx(expected)


def test_laplacian_uses_the_one_norm() -> None:
    assert LaplacianKernel(scale=1.0).gram(np.zeros((1, 2)), np.ones((1, 2)))[0, 0] == pytest.approx(np.exp(-2.0))


@pytest.mark.parametrize(
    ("raw", "expected"),
    (
        ({"kind": "gaussian"}, GaussianKernel()),
        ({"kind": "gaussian", "inverse_bandwidth": 2}, GaussianKernel(inverse_bandwidth=2)),
        ({"kind": "laplacian", "scale": 3}, LaplacianKernel(scale=3)),
        ({"kind": "exponential"}, ExponentialKernel()),
    ),
)
def test_kernels_parse_by_kind(raw: dict[str, object], expected: object) -> None:
    assert TypeAdapter(Kernel).validate_python(raw) == expected


@pytest.mark.parametrize(
    "raw",
    (
        {"kind": "polynomial"},
        {"kind": "gaussian", "inverse_bandwidth": 0},
        {"kind": "laplacian", "scale": -1},
    ),
)
def test_invalid_kernels_are_rejected(raw: dict[str, object]) -> None:
    with pytest.raises(ValidationError):
        TypeAdapter(Kernel).validate_python(raw)
