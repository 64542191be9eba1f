import functools

import pytest

from flatdimers.graph import build_graph, enumerate_matchings
from flatdimers.kasteleyn import build_K
from flatdimers.surface import load_surface


@functools.lru_cache(maxsize=None)
def graph(family, n, sname=None):
    return build_graph(family, n, load_surface(sname) if sname else None)


@functools.lru_cache(maxsize=None)
def kmatrix(family, n, sname=None):
    return build_K(graph(family, n, sname))


@functools.lru_cache(maxsize=None)
def covers(family, n, sname=None):
    return tuple(enumerate_matchings(graph(family, n, sname)))


@pytest.fixture(scope="session")
def pillow():
    return load_surface("pillow_g2")


@pytest.fixture(scope="session")
def torus():
    return load_surface("unit_torus")
