import numpy as np
import pytest
from hypothesis import given, strategies as st

from potlab import space as spc
from potlab.errors import EmptyBoundary, NoAdmissibleBalls, PotlabError

from conftest import graph_spaces


def test_grid_sizes():
    s = spc.build_grid_space(3, 8)
    assert s.n_vertices == 512 and s.n == 216
    assert np.all(s.measure == 1.0)
    # boundary-to-boundary edges are dropped
    assert np.all(s.interior_mask[s.edges].any(axis=1))


def test_grid_without_shell_has_no_boundary():
    s = spc.build_grid_space(2, 4, dirichlet_shell=False)
    assert s.boundary.size == 0
    with pytest.raises(EmptyBoundary):
        s.require_boundary()


def test_constructor_validation():
    mask = np.array([False, True])
    with pytest.raises(PotlabError):
        spc.WeightedGraphSpace(mask, [0, 1.0], [[0, 1]], -1.0, 1.0)
    with pytest.raises(PotlabError):
        spc.WeightedGraphSpace(mask, [0, 1.0], [[1, 1]], 1.0, 1.0)
    with pytest.raises(PotlabError):
        spc.WeightedGraphSpace(mask, [0, 0.0], [[0, 1]], 1.0, 1.0)


def test_roundtrip(tmp_path):
    s = spc.random_graph_space(7, 2, 0.4, np.random.default_rng(3))
    p = tmp_path / "s.json"
    s.save(p)
    t = spc.WeightedGraphSpace.load(p)
    assert np.array_equal(t.edges, s.edges) and np.array_equal(t.mu, s.mu) and np.array_equal(t.weight, s.weight)


def test_path_balls_and_doubling():
    s = spc.path_space(21)
    c = s.center_vertex()
    assert spc.ball(s, c, 3).size == 7
    prof = spc.estimate_doubling(s, [1, 2, 4, 8], nu=1.0, centers=[c])
    # V(r) = 2r + 1 on the path: worst κ is V(8)/(8 V(1)) = 17/24, clipped at 1
    assert prof.kappa == pytest.approx(1.0)
    assert prof.gamma == pytest.approx(2.0)


def test_grid_balls_are_l1_balls():
    s = spc.build_grid_space(3, 9)
    c = s.center_vertex()
    B = spc.ball(s, c, 2)
    X = s.interior_coords
    assert set(B.members) == set(np.flatnonzero(np.abs(X - X[c]).sum(1) <= 2))


def test_balls_within_rejects_everything():
    s = spc.build_grid_space(3, 5)
    with pytest.raises(NoAdmissibleBalls):
        spc.balls_within(s, s.inner_region(0.5), [10.0])


@given(graph_spaces(), st.integers(0, 2**31))
def test_poincare_constant_holds_for_random_fields(s, seed):
    rng = np.random.default_rng(seed)
    res = spc.estimate_poincare(s, [1.0, 2.0])
    for B in spc.balls(s, range(s.n), [1.0, 2.0]):
        if np.isinf(res.lam):
            break
        m = spc.poincare_holds(s, B, res.lam, rng.standard_normal(s.n))
        assert m >= -1e-9 * (1 + abs(m))


@given(graph_spaces(), st.data())
def test_dirichlet_eigenvalue_domain_monotone(s, data):
    U = data.draw(st.lists(st.integers(0, s.n - 1), min_size=1, max_size=s.n, unique=True))
    V = sorted(set(U) | {data.draw(st.integers(0, s.n - 1))})
    assert spc.dirichlet_lambda1(s, V) <= spc.dirichlet_lambda1(s, U) * (1 + 1e-10)
