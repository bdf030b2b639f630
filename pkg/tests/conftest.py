import functools

import numpy as np
import pytest

from johnwidths import DomainSpec, prepare_domain, rasterize


@functools.lru_cache(maxsize=None)
def prepared(family: str, L: int, weight: str = "side", **params):
    spec = DomainSpec(family, dict(params), 2)
    return prepare_domain(spec, L, weight=weight)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def square_mask(L):
    return rasterize(DomainSpec("cube", {}, 2), L)
