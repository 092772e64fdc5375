import pytest

from tracesmc.desugar import desugar
from tracesmc.models import load_model
from tracesmc.parser import parse


def prog(src: str):
    return desugar(parse(src))


@pytest.fixture
def geometric():
    return load_model("geometric")


@pytest.fixture
def beta_obs():
    return load_model("beta_obs")
