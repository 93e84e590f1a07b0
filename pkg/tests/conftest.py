import os
import sys

import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

from soficlab.permcore import PartialPerm, Perm  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


@st.composite
def partial_perms(draw, d=None, max_d=12):
    if d is None:
        d = draw(st.integers(1, max_d))
    perm = draw(st.permutations(range(d)))
    mask = draw(st.lists(st.booleans(), min_size=d, max_size=d))
    return PartialPerm([y if m else -1 for y, m in zip(perm, mask)])


@st.composite
def perms(draw, d=None, max_d=12):
    if d is None:
        d = draw(st.integers(1, max_d))
    return Perm(list(draw(st.permutations(range(d)))))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
