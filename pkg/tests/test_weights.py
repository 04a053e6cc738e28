import numpy as np
import pytest
from hypothesis import given, strategies as st

from potlab import calculus as calc
from potlab import weights as wt
from potlab.errors import NotApplicable, PotlabError
from potlab.potential import capacity
from potlab.space import Ball, ball, balls, path_space

from conftest import graph_spaces


def test_a1_two_vertex_ball():
    s = path_space(2)
    B = Ball(0, 1.0, np.array([0, 1]))
    assert wt.a1_constant(s, np.array([1.0, 3.0]), [B]).constant == pytest.approx(2.0)


def test_a1_rejects_nonpositive_weight():
    s = path_space(2)
    with pytest.raises(PotlabError):
        wt.a1_constant(s, np.array([1.0, 0.0]), [Ball(0, 1.0, np.array([0, 1]))])


@given(graph_spaces(), st.integers(0, 2**31), st.floats(1e-3, 1e3))
def test_a1_scale_invariant_and_at_least_one(s, seed, lam):
    rng = np.random.default_rng(seed)
    om = np.exp(rng.uniform(-2, 2, s.n))
    fam = balls(s, range(s.n), [0.0, 1.0, 2.0])
    c1 = wt.a1_constant(s, om, fam).constant
    assert c1 >= 1 - 1e-12
    assert wt.a1_constant(s, lam * om, fam).constant == pytest.approx(c1, rel=1e-12)


@given(graph_spaces(), st.integers(0, 2**31), st.sampled_from([1.5, 2.0, 3.0]))
def test_reverse_holder_and_derived_bounds(s, seed, r):
    om = np.exp(np.random.default_rng(seed).uniform(-1, 1, s.n))
    fam = balls(s, range(s.n), [0.0, 1.0, 2.0])
    assert wt.reverse_holder_check(s, om, r, fam).passed
    assert wt.a1_derived_properties(s, om, fam).passed


def test_green_a1_finite(cube8):
    o = cube8.center_vertex()
    G = calc.green_columns(cube8, [o])[:, 0]
    fam = [ball(cube8, o, r) for r in (1.0, 2.0)]
    for tau in (0.5, 1.0, 2.0):
        assert 1 <= wt.a1_constant(cube8, G**tau, fam).constant < np.inf


def test_improved_exponent_formula():
    assert wt.improved_exponent(4.0, 3.0) == pytest.approx(1.25)
    with pytest.raises(NotApplicable):
        wt.improved_exponent(4.0, 2.0)


def test_choose_q_not_applicable():
    prof = wt.HarnackProfile(2.0, 0.1, 2.25, 1.0)
    with pytest.raises(NotApplicable):
        wt.choose_q(prof)
    assert wt.choose_q(wt.HarnackProfile(2.0, 0.9, 3.0, 1.0)) == 3.0


def test_harmonic_samples_are_harmonic(cube8):
    c = cube8.center_vertex()
    dom, S = wt.harmonic_samples(cube8, c, 1.0, 3, np.random.default_rng(0))
    Lf = wt._full_stiffness(cube8)
    for psi in S:
        assert np.allclose((Lf @ psi)[cube8.interior[dom]], 0, atol=1e-10)
        assert psi[cube8.interior[dom]].min() > 0


def test_hodge_norm_delta_zero_and_duality(cube6):
    h = capacity(cube6, [cube6.center_vertex()]).h
    rows = wt.weighted_hodge_sweep(cube6, h, [0.0, 0.5, -0.5])
    assert rows[0].norm == pytest.approx(1.0, abs=1e-9)
    assert rows[1].norm == pytest.approx(rows[2].norm, rel=1e-8)
    assert all(r.norm**2 <= r.bound * (1 + 1e-9) for r in rows)


@given(graph_spaces(n_min=3), st.integers(0, 2**31), st.floats(0.05, 0.9))
def test_hodge_duality_on_random_graphs(s, seed, delta):
    h = np.exp(np.random.default_rng(seed).uniform(-1, 1, s.n))
    a = wt.hodge_weighted_norm(s, h, delta).value
    b = wt.hodge_weighted_norm(s, h, -delta).value
    assert a == pytest.approx(b, rel=1e-7)


def test_sweep_rejects_delta_one(cube6):
    with pytest.raises(PotlabError):
        wt.weighted_hodge_sweep(cube6, np.ones(cube6.n), [1.0])


@given(st.integers(0, 2**31), st.sampled_from([0.25, 0.5, 1.0]))
def test_weighted_energy_inequality(seed, delta):
    s = path_space(6)
    h = capacity(s, [2, 3]).h
    beta = np.random.default_rng(seed).standard_normal(s.n_edges)
    lhs, rhs = wt.weighted_energy_terms(s, h, delta, beta)
    assert lhs <= rhs + 1e-10 * max(abs(rhs), 1.0)
