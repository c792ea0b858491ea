"""Shared fixtures: the 15.a1 pipeline built once per session.

The expensive objects (full coefficient store, period table, symbol store,
the M = 10^4 scan, and the Petersson quadrature) are session-scoped so the
acceptance suite and the unit tests share one build.
"""
import pytest

from modsym.eigenform import CurveSpec, build_eigenform
from modsym.periods import build_period_table
from modsym.scanstats import ScanSpec, SymbolStore, scan
from modsym.theory import (
    default_fixture_path,
    load_lvalue_fixture,
    petersson_quadrature,
    slope_from_L,
)

CURVE_15A1 = (1, 1, 1, -10, -10)
Q = 15


@pytest.fixture(scope="session")
def form15():
    return build_eigenform(CurveSpec(*CURVE_15A1, q=Q), n_max=100000)


@pytest.fixture(scope="session")
def form15_small():
    """Short coefficient store for cache and refusal tests."""
    return build_eigenform(CurveSpec(*CURVE_15A1, q=Q), n_max=3000)


@pytest.fixture(scope="session")
def table15(form15):
    return build_period_table(form15, tol=1e-12)


@pytest.fixture(scope="session")
def store15(table15):
    return SymbolStore(table15)


@pytest.fixture(scope="session")
def lfix():
    """(L1, L1p) from the packaged symmetric-square fixture."""
    return load_lvalue_fixture(default_fixture_path())


@pytest.fixture(scope="session")
def slopes15(lfix):
    """(slope_paper, slope_real) from the fixture value."""
    return slope_from_L(Q, lfix[0])


@pytest.fixture(scope="session")
def petersson15(form15):
    return petersson_quadrature(form15, tol=1e-5)


@pytest.fixture(scope="session")
def rows10k(store15):
    """Full all-class scan to M = 10^4 with the default moment depth."""
    return scan(ScanSpec(q=Q, m_max=10000), store15)
