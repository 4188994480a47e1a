import functools

import pytest

from hho_wave.cli import build_operator


@functools.lru_cache(maxsize=None)
def cached_operator(n: int, k: int, variant: str):
    """Shared assembled operators; building the big ones dominates test time."""
    return build_operator(n, k, variant)


@pytest.fixture(scope="session")
def operator():
    return cached_operator
