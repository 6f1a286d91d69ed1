import numpy as np
import pytest
from pydantic import TypeAdapter, ValidationError

from evl_lab.features import FitterParams, FourierFamily, PolynomialSpec, RkhsSpec, SignFamily, sample_rpbf_basis
from evl_lab.kernels import GaussianKernel, LaplacianKernel
from evl_lab.values import FourierBasis, SignBasis

BOUNDS = np.array([[0.0, 10.0], [-1.0, 1.0]])


def test_fourier_basis_has_j_features_with_offsets_in_range() -> None:
    basis = sample_rpbf_basis(FourierFamily(), 5, BOUNDS, np.random.default_rng(0))

    assert isinstance(basis, FourierBasis)
    assert basis.cardinality == 5
    assert basis.omegas.shape == (5, 2)
    assert np.all(np.abs(basis.offsets) <= np.pi)


def test_fourier_offsets_are_centered() -> None:
    basis = sample_rpbf_basis(FourierFamily(), 10_000, BOUNDS, np.random.default_rng(0))

    assert isinstance(basis, FourierBasis)
    assert abs(np.mean(basis.offsets)) <= 0.05


def test_fourier_frequency_variance() -> None:
    basis = sample_rpbf_basis(FourierFamily(omega_variance=0.01), 10_000, BOUNDS, np.random.default_rng(0))

    assert isinstance(basis, FourierBasis)
    assert np.var(basis.omegas) == pytest.approx(0.01, rel=0.05)


def test_standardized_features_see_every_dimension_at_the_same_scale() -> None:
    raw = sample_rpbf_basis(FourierFamily(), 7, BOUNDS, np.random.default_rng(5))
    standardized = sample_rpbf_basis(FourierFamily(standardize=True), 7, BOUNDS, np.random.default_rng(5))
    assert isinstance(raw, FourierBasis)
    assert isinstance(standardized, FourierBasis)

    states = np.random.default_rng(6).uniform(BOUNDS[:, 0], BOUNDS[:, 1], size=(20, 2))
    unit = (states - BOUNDS.mean(axis=1)) / (np.diff(BOUNDS, axis=1)[:, 0] / 2)

    assert np.allclose(standardized.design(states), raw.design(unit), rtol=0, atol=1e-12)
    assert np.allclose(standardized.omegas, raw.omegas / [5.0, 1.0])


def test_sign_thresholds_lie_in_their_dimension() -> None:
    basis = sample_rpbf_basis(SignFamily(), 1000, BOUNDS, np.random.default_rng(0))

    assert isinstance(basis, SignBasis)
    assert set(basis.dims.tolist()) == {0, 1}
    assert np.all(basis.thresholds >= BOUNDS[basis.dims, 0])
    assert np.all(basis.thresholds <= BOUNDS[basis.dims, 1])


@pytest.mark.parametrize("family", (FourierFamily(), SignFamily()))
def test_features_are_bounded_by_one(family: FourierFamily | SignFamily) -> None:
    rng = np.random.default_rng(1)
    basis = sample_rpbf_basis(family, 50, BOUNDS, rng)
    states = rng.uniform(BOUNDS[:, 0], BOUNDS[:, 1], size=(500, 2))

    assert np.all(np.abs(basis.design(states)) <= 1)


@pytest.mark.parametrize("family", (FourierFamily(), SignFamily()))
def test_same_seed_gives_same_basis(family: FourierFamily | SignFamily) -> None:
    a = sample_rpbf_basis(family, 7, BOUNDS, np.random.default_rng(3))
    b = sample_rpbf_basis(family, 7, BOUNDS, np.random.default_rng(3))

    states = np.random.default_rng(4).uniform(-1, 1, size=(10, 2))
    assert np.array_equal(a.design(states), b.design(states))


def test_basis_needs_at_least_one_feature() -> None:
    with pytest.raises(ValueError):
        sample_rpbf_basis(FourierFamily(), 0, BOUNDS, np.random.default_rng(0))


def test_rkhs_kappa_comes_from_the_kernel() -> None:
    assert RkhsSpec(kernel=LaplacianKernel()).kappa == 1.0


@pytest.mark.parametrize(
    ("raw", "expected"),
    (
        ({"kind": "fourier", "omega_variance": 0.01}, FourierFamily(omega_variance=0.01)),
        ({"kind": "sign", "c_bound": 10}, SignFamily(c_bound=10)),
        (
            {"kind": "rkhs", "kernel": {"kind": "gaussian", "inverse_bandwidth": 0.01}, "regularization": 0.1},
            RkhsSpec(kernel=GaussianKernel(inverse_bandwidth=0.01), regularization=0.1),
        ),
        ({"kind": "polynomial", "degree": 4}, PolynomialSpec(degree=4)),
    ),
)
def test_fitter_params_parse_by_kind(raw: dict[str, object], expected: object) -> None:
    assert TypeAdapter(FitterParams).validate_python(raw) == expected


@pytest.mark.parametrize(
    "raw",
    (
        {"kind": "fourier", "omega_variance": 0},
        {"kind": "sign", "c_bound": -1},
        {"kind": "rkhs", "regularization": 0},
        {"kind": "polynomial", "degree": -1},
        {"kind": "splines"},
    ),
)
def test_invalid_fitter_params_are_rejected(raw: dict[str, object]) -> None:
    with pytest.raises(ValidationError):
        TypeAdapter(FitterParams).validate_python(raw)
