import numpy as np
import pytest
from numpy.typing import NDArray

from evl_lab.errors import NumericEvaluationError
from evl_lab.kernels import GaussianKernel, LaplacianKernel
from evl_lab.values import (
    Checkpoint,
    ConstantBasis,
    FourierBasis,
    GridBasis,
    KernelBasis,
    PolynomialBasis,
    SignBasis,
    ValueFn,
    as_state,
    as_states,
    evaluate_value_fn,
    monomial_exponents,
)

rng = np.random.default_rng(1)

FOURIER = FourierBasis(omegas=rng.normal(size=(4, 2)), offsets=rng.uniform(-np.pi, np.pi, size=4))


@pytest.mark.parametrize(
    ("raw", "shape"),
    (
        (3.0, (1, 1)),
        ([1.0, 2.0, 3.0], (3, 1)),
        ([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]], (3, 2)),
    ),
)
def test_as_states_shapes(raw: object, shape: tuple[int, int]) -> None:
    assert as_states(raw).shape == shape  # type: ignore[arg-type]


def test_as_states_rejects_three_dimensions() -> None:
    with pytest.raises(ValueError):
        as_states(np.zeros((2, 2, 2)))


def test_as_state_reads_a_vector_as_one_state() -> None:
    assert as_state([1.0, 2.0, 3.0]).shape == (1, 3)


def test_constant_value_fn() -> None:
    assert np.array_equal(evaluate_value_fn(ValueFn.constant(2.5), [0.0, 4.0, 9.0]), [2.5, 2.5, 2.5])


def test_single_center_rkhs_value_at_its_center() -> None:
    kernel = LaplacianKernel(scale=0.3)
    v = ValueFn(basis=KernelBasis(kernel=kernel, centers=np.array([[1.5]])), weights=np.array([0.7]))

    assert evaluate_value_fn(v, [1.5])[0] == pytest.approx(0.7 * kernel.gram(np.array([[1.5]]), np.array([[1.5]]))[0, 0])


def test_rpbf_value_matches_direct_sum() -> None:
    weights = np.array([0.5, -1.0, 2.0, 0.25])
    v = ValueFn(basis=FOURIER, weights=weights)
    states = np.random.default_rng(2).uniform(-2, 2, size=(10, 2))

    direct = [sum(w * np.cos(omega @ s + b) for w, omega, b in zip(weights, FOURIER.omegas, FOURIER.offsets)) for s in states]

    assert np.allclose(v(states), direct, rtol=0, atol=1e-12)


def test_sign_basis_design() -> None:
    basis = SignBasis(dims=np.array([0, 1]), thresholds=np.array([0.5, -1.0]))

    assert np.array_equal(basis.design(np.array([[0.0, 0.0], [1.0, -2.0]])), [[-1.0, 1.0], [1.0, -1.0]])


def test_clamp_is_symmetric() -> None:
    v = ValueFn(basis=PolynomialBasis(degree=1, shift=np.zeros(1), scale=np.ones(1)), weights=np.array([0.0, 10.0]), clamp=5.0)

    assert np.array_equal(evaluate_value_fn(v, [-1.0, 0.2, 1.0]), [-5.0, 2.0, 5.0])


def test_non_finite_values_raise() -> None:
    with pytest.raises(NumericEvaluationError, match="state"):
        evaluate_value_fn(ValueFn.constant(np.inf), [1.0])


@pytest.mark.parametrize(
    ("weights", "clamp"),
    (
        (np.zeros(3), None),
        (np.zeros(4), 0.0),
        (np.zeros(4), -1.0),
    ),
)
def test_invalid_value_fns_are_rejected(weights: NDArray[np.float64], clamp: float | None) -> None:
    with pytest.raises(ValueError):
        ValueFn(basis=FOURIER, weights=weights, clamp=clamp)


def test_weights_are_read_only() -> None:
    v = ValueFn(basis=FOURIER, weights=np.ones(4))

    with pytest.raises(ValueError):
        v.weights[0] = 2.0


@pytest.mark.parametrize(
    ("dim", "degree", "count"),
    (
        (1, 0, 1),
        (1, 4, 5),
        (2, 2, 6),
        (4, 4, 70),
        (6, 4, 210),
    ),
)
def test_monomial_counts(dim: int, degree: int, count: int) -> None:
    exponents = monomial_exponents(dim=dim, degree=degree)

    assert exponents.shape == (count, dim)
    assert exponents.sum(axis=1).max() == degree
    assert len({tuple(e) for e in exponents}) == count


def test_polynomial_basis_is_standardized() -> None:
    basis = PolynomialBasis(degree=2, shift=np.array([5.0]), scale=np.array([2.0]))

    assert np.allclose(basis.design(np.array([[5.0], [7.0]])), [[1.0, 0.0, 0.0], [1.0, 1.0, 1.0]])


def test_grid_design_agrees_with_interpolation() -> None:
    basis = GridBasis(nodes=np.linspace(0, 10, 11))
    weights = np.arange(11, dtype=np.float64) ** 2
    states = np.array([[0.0], [2.5], [9.9], [10.0]])

    assert np.allclose(basis.design(states) @ weights, basis.evaluate(states, weights))
    assert basis.evaluate(states, weights)[1] == pytest.approx(6.5)


@pytest.mark.parametrize(
    "v",
    (
        ValueFn(basis=FOURIER, weights=np.array([1.0, 2.0, 3.0, 4.0]), clamp=10.0),
        ValueFn(basis=SignBasis(dims=np.array([1, 0]), thresholds=np.array([0.1, 0.2])), weights=np.array([1.0, -1.0])),
        ValueFn(basis=KernelBasis(kernel=GaussianKernel(), centers=np.array([[0.0, 1.0], [2.0, 3.0]])), weights=np.array([0.5, 0.25])),
        ValueFn(basis=PolynomialBasis(degree=2, shift=np.array([1.0, 2.0]), scale=np.array([3.0, 4.0])), weights=np.arange(6.0)),
        ValueFn(basis=GridBasis(nodes=np.array([0.0, 1.0, 2.0])), weights=np.array([3.0, 1.0, 2.0])),
        ValueFn(basis=ConstantBasis(), weights=np.array([7.0])),
    ),
)
def test_checkpoints_restore_the_same_function(v: ValueFn) -> None:
    restored = Checkpoint.model_validate_json(v.to_checkpoint(iteration=3, seed=11).model_dump_json()).to_value_fn()

    states = np.random.default_rng(4).uniform(0, 2, size=(20, 2))

    assert restored.kind == v.kind
    assert restored.clamp == v.clamp
    assert np.array_equal(restored(states), v(states))


def test_checkpoint_fields() -> None:
    checkpoint = ValueFn.constant(1.0, clamp=2.0).to_checkpoint(iteration=5, seed=9)

    assert checkpoint.format == 1
    assert checkpoint.kind == "constant"
    assert checkpoint.iteration == 5
    assert checkpoint.seed == 9
