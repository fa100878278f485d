import functools

import numpy as np
import pytest

from noetherquant.cases import load_case

ODE_CASES = ("lienard", "inverted", "harmonic-oscillator", "free-particle")


@functools.cache
def case(name):
    return load_case(name)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
