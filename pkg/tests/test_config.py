from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

from evl_lab.config import Algorithm, ExperimentSpec
from evl_lab.engine import Fitter
from evl_lab.features import PolynomialSpec
from tests.helpers import tiny_spec

ROOT = Path(__file__).parent.parent
EXAMPLES = sorted((ROOT / "docs" / "examples").iterdir())


@pytest.mark.parametrize("example", EXAMPLES)
def test_examples_load_and_build(example: Path) -> None:
    spec = ExperimentSpec.from_file(example)
    model = spec.build_model()

    assert model.name == spec.environment.id
    for seed in spec.seeds:
        assert spec.evl_config(seed).seed == seed


def test_bundled_replacement_example() -> None:
    spec = ExperimentSpec.from_file(ROOT / "docs" / "examples" / "replacement_fig1.json")

    assert spec.algorithm == Algorithm.EvlRpbf
    assert (spec.evl.n_states, spec.evl.m_next, spec.evl.j_features, spec.evl.k_iters) == (100, 5, 5, 20)
    assert spec.environment.gamma == 0.6
    assert spec.oracle is not None
    assert len(spec.seeds) == 10


@pytest.mark.parametrize(
    ("algorithm", "fitter"),
    (
        (Algorithm.EvlRpbf, Fitter.Rpbf),
        (Algorithm.EvlRkhs, Fitter.Rkhs),
        (Algorithm.FviPoly, Fitter.Polynomial),
    ),
)
def test_algorithm_fitter(algorithm: Algorithm, fitter: Fitter) -> None:
    assert algorithm.fitter is fitter


def test_evl_config_carries_the_settings() -> None:
    config = tiny_spec().evl_config(7)

    assert config.seed == 7
    assert config.n_states == 20
    assert config.fitter_params == PolynomialSpec(degree=2)


@pytest.mark.parametrize(
    ("overrides", "match"),
    (
        ({"algorithm": "evl-rpbf"}, "needs evl.fitter 'rpbf'"),
        ({"environment": {"id": "cartpole"}}, "No oracle"),
        ({"episodes": {}}, "no terminal states"),
        ({"seeds": [1, 2, 1]}, "distinct"),
        ({"seeds": []}, "at least 1"),
        ({"seeds": [-1]}, "greater than or equal to 0"),
        ({"format": 2}, "Input should be 1"),
        ({"surprise": True}, "Extra inputs"),
    ),
)
def test_invalid_specs(overrides: dict[str, object], match: str) -> None:
    with pytest.raises(ValidationError, match=match):
        tiny_spec(**overrides)


def test_environment_discriminator() -> None:
    spec = tiny_spec(environment={"id": "acrobot"}, oracle=None, episodes={"episodes": 3})

    assert spec.build_model().actions == ("torque-1", "torque+0", "torque+1")

    initial_states, terminal = spec.episode_functions()
    states = initial_states(4, np.random.default_rng(0))
    assert states.shape == (4, 6)
    assert not terminal(states).any()


def test_replacement_has_no_episodes() -> None:
    with pytest.raises(ValueError):
        tiny_spec().episode_functions()


def test_unsupported_file_type(tmp_path: Path) -> None:
    path = tmp_path / "spec.txt"
    path.write_text("name: tiny")

    with pytest.raises(NotImplementedError):
        ExperimentSpec.from_file(path)


def test_schema_names_the_environments() -> None:
    schema = ExperimentSpec.model_json_schema()

    assert {"ReplacementParams", "CartPoleParams", "AcrobotParams"} <= set(schema["$defs"])
