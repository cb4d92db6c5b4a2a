"""Shared fixtures: cached graphs, forms and eigenbases per (fractal, level, bc)."""

from __future__ import annotations

import numpy as np
import pytest

from fractalwave import (
    BoundaryCondition,
    assemble,
    build_graph,
    eigendecompose,
    gasket_spec,
    interval_spec,
)

_SPECS = {"sg": gasket_spec(), "interval": interval_spec()}


def pytest_addoption(parser):
    parser.addoption(
        "--bless",
        action="store_true",
        default=False,
        help="regenerate golden files instead of comparing against them",
    )


@pytest.fixture(scope="session")
def bless(request):
    return request.config.getoption("--bless")


@pytest.fixture(scope="session")
def graph_of():
    cache = {}

    def get(kind: str, level: int, bc: str = "neumann"):
        key = (kind, level, bc)
        if key not in cache:
            cache[key] = build_graph(_SPECS[kind], level, BoundaryCondition(bc))
        return cache[key]

    return get


@pytest.fixture(scope="session")
def form_of(graph_of):
    cache = {}

    def get(kind: str, level: int, bc: str = "neumann"):
        key = (kind, level, bc)
        if key not in cache:
            cache[key] = assemble(_SPECS[kind], graph_of(kind, level, bc))
        return cache[key]

    return get


@pytest.fixture(scope="session")
def basis_of(graph_of, form_of):
    cache = {}

    def get(kind: str, level: int, bc: str = "neumann"):
        key = (kind, level, bc)
        if key not in cache:
            g = graph_of(kind, level, bc)
            cache[key] = eigendecompose(form_of(kind, level, bc), g.boundary)
        return cache[key]

    return get


@pytest.fixture()
def rng():
    return np.random.default_rng(0xFACADE)
