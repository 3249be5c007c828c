import logging
import random
from pathlib import Path

import pytest
from hypothesis import settings

from splc.lang import parse
from splc.spl import cfg_of

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

settings.register_profile("ci", deadline=None, max_examples=100)
settings.load_profile("ci")

REGALOC = (FIXTURES / "fig_regaloc.spl").read_text()
FIG_EX = (FIXTURES / "fig_ex.spl").read_text()
DECOMPO = ("while x >= 1 do if x >= y then x := x - y; break "
           "else y := y - x; continue fi od")


@pytest.fixture(autouse=True)
def _quiet_lifetime_warnings():
    # disconnected-lifetime diagnostics are expected on random programs
    logging.getLogger("splc.liveness").setLevel(logging.ERROR)
    yield


def build(source: str):
    return cfg_of(parse(source))


def seeded(n: int, base: int = 0):
    """``n`` independent RNGs with reproducible seeds."""
    return [random.Random(base + i) for i in range(n)]


@pytest.fixture
def regaloc():
    return build(REGALOC)


@pytest.fixture
def fig_ex():
    return build(FIG_EX)
