import numpy as np
import pytest
from hypothesis import given, strategies as st

from potlab import mv
from potlab.errors import PotlabError
from potlab.space import path_space

from conftest import graph_spaces


def test_three_path_form_constant():
    # ⟨V, φψ⟩ = φψ and ‖dφ‖² = 2φ²: A = 1/2
    s = path_space(1)
    assert mv.form_constant_A(s, mv.Potential.function([1.0])) == pytest.approx(0.5)


def test_potential_validation():
    with pytest.raises(PotlabError):
        mv.Potential("function")
    with pytest.raises(PotlabError):
        mv.Potential("bogus", f=np.ones(2))
    s = path_space(3)
    with pytest.raises(PotlabError):
        mv.Potential.function(np.ones(2)).functional(s)


def test_potential_roundtrip():
    V = mv.Potential.divergence([1.0, -2.0, 0.5])
    W = mv.Potential.from_dict(V.to_dict())
    assert W.kind == V.kind and np.array_equal(W.theta0, V.theta0)


@given(graph_spaces(), st.integers(0, 2**31))
def test_forward_inequality_random_theta(s, seed):
    theta0 = np.random.default_rng(seed).standard_normal(s.n_edges)
    rep = mv.mv_verify(s, mv.Potential.divergence(theta0), family=mv.local_ball_family(s, spread=1.0))
    assert rep.A <= 2 * np.sqrt(rep.B) * (1 + 1e-9)
    assert rep.residual <= 1e-10


@given(graph_spaces(), st.integers(0, 2**31), st.floats(-50, 50).filter(lambda x: abs(x) > 1e-3))
def test_A_and_B_homogeneity(s, seed, lam):
    f = np.random.default_rng(seed).standard_normal(s.n)
    A = mv.form_constant_A(s, mv.Potential.function(f))
    assert mv.form_constant_A(s, mv.Potential.function(lam * f)) == pytest.approx(abs(lam) * A, rel=1e-8)
    th = mv.representing_form(s, mv.Potential.function(f))
    B = mv.multiplier_constant_B(s, th)
    assert mv.multiplier_constant_B(s, lam * th) == pytest.approx(lam**2 * B, rel=1e-8)


@given(graph_spaces(), st.integers(0, 2**31))
def test_theta_represents_potential(s, seed):
    f = np.random.default_rng(seed).standard_normal(s.n)
    V = mv.Potential.function(f)
    assert mv.representation_residual(s, V, mv.representing_form(s, V)) <= 1e-10


def test_decay_probe_support_check(cube8):
    o = cube8.center_vertex()
    beta = np.ones(cube8.n_edges)
    with pytest.raises(PotlabError):
        mv.decay_estimate_probe(cube8, beta, o, 1.0)
    assert mv.decay_estimate_probe(cube8, np.zeros(cube8.n_edges), o, 1.0).vacuous
