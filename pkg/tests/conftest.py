import pytest

from evl_lab.mdp import MdpModel
from evl_lab.replacement import ReplacementParams, replacement_model, replacement_oracle
from evl_lab.values import ValueFn


@pytest.fixture(scope="session")
def replacement_params() -> ReplacementParams:
    return ReplacementParams()


@pytest.fixture(scope="session")
def replacement(replacement_params: ReplacementParams) -> MdpModel:
    return replacement_model(replacement_params)


@pytest.fixture(scope="session")
def oracle(replacement_params: ReplacementParams) -> ValueFn:
    return replacement_oracle(replacement_params)
