import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from potlab.space import WeightedGraphSpace, build_grid_space, random_graph_space

settings.register_profile(
    "default", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@st.composite
def graph_spaces(draw, n_min=2, n_max=9, lengths=True):
    """Random connected weighted graphs with a nonempty Dirichlet boundary."""
    n = draw(st.integers(n_min, n_max))
    nb = draw(st.integers(1, 3))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    g = random_graph_space(n, nb, 0.35, rng)
    if not lengths:
        return g
    ell = rng.uniform(0.5, 2.0, size=g.n_edges)
    return WeightedGraphSpace(g.interior_mask, g.mu, g.edges, g.weight, ell)


@pytest.fixture(scope="session")
def cube6():
    return build_grid_space(3, 6)


@pytest.fixture(scope="session")
def cube8():
    return build_grid_space(3, 8)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(lines):
        terminalreporter.write_line(lines[k])
