import numpy as np
import pytest
from hypothesis import given, strategies as st

from potlab import trace as tr
from potlab.errors import PotlabError, TailDiverges
from potlab.space import ball, path_space, random_graph_space

from conftest import graph_spaces


def test_three_path_oracle():
    # G = 1/2 on a single interior vertex with q = 1: every constant equals 1/2
    s = path_space(1)
    q = np.array([1.0])
    assert tr.trace_c1(s, q) == pytest.approx(0.5)
    assert tr.opnorm_sq(s, q) == pytest.approx(0.5)
    assert tr.trace_c3(s, q, "exhaustive") == pytest.approx(0.5)
    assert tr.trace_c4_c5(s, q, "exhaustive") == pytest.approx((0.5, 0.5))


def test_zero_potential_gives_zero_constants():
    s = path_space(4)
    q = np.zeros(4)
    assert tr.trace_c1(s, q) == 0.0
    assert tr.opnorm_sq(s, q) == 0.0
    assert tr.trace_c3(s, q, "exhaustive") == 0.0
    assert tr.trace_c4_c5(s, q, "exhaustive") == (0.0, 0.0)


def test_negative_q_rejected():
    with pytest.raises(PotlabError):
        tr.trace_c1(path_space(2), np.array([1.0, -1.0]))


def test_exhaustive_guard_message():
    s = random_graph_space(20, 2, 0.2, np.random.default_rng(0))
    with pytest.raises(PotlabError, match=r"exhaustive family limited to ≤ 14 interior vertices \(got 20\)"):
        tr.exhaustive_family(s)


@given(graph_spaces(n_max=8), st.integers(0, 2**31))
def test_chain_on_random_graphs(s, seed):
    rng = np.random.default_rng(seed)
    q = rng.random(s.n) * (rng.random(s.n) < 0.7)
    rep = tr.verify_trace_chain(s, q, family="exhaustive")
    assert rep.passed, rep.verdicts


@given(graph_spaces(n_max=8), st.integers(0, 2**31), st.floats(1e-3, 1e3))
def test_constants_are_homogeneous(s, seed, lam):
    q = np.random.default_rng(seed).random(s.n)
    fam = tr.exhaustive_family(s)
    assert tr.trace_c1(s, lam * q) == pytest.approx(lam * tr.trace_c1(s, q), rel=1e-9)
    assert tr.trace_c3(s, lam * q, fam) == pytest.approx(lam * tr.trace_c3(s, q, fam), rel=1e-12)
    c4, c5 = tr.trace_c4_c5(s, q, fam)
    c4l, c5l = tr.trace_c4_c5(s, lam * q, fam)
    assert c4l == pytest.approx(lam * c4, rel=1e-9)
    assert c5l == pytest.approx(lam * c5, rel=1e-9)


@given(graph_spaces(n_max=8), st.integers(0, 2**31))
def test_c1_monotone_in_q(s, seed):
    rng = np.random.default_rng(seed)
    q1 = rng.random(s.n)
    q2 = q1 + rng.random(s.n)
    assert tr.trace_c1(s, q1) <= tr.trace_c1(s, q2) * (1 + 1e-12)


def test_ball_family_dedupes(cube6):
    fam = tr.ball_family(cube6)
    keys = {tuple(U) for U in fam.sets}
    assert len(keys) == len(fam)
    assert np.all(fam.caps > 0)


def test_family_c3_below_c1_on_cube(cube6):
    rng = np.random.default_rng(0)
    for _ in range(3):
        q = rng.random(cube6.n)
        rep = tr.verify_trace_chain(cube6, q)
        assert rep.passed, rep.verdicts


def test_tracefk_homogeneous_and_nu_guard(cube6):
    q = np.zeros(cube6.n)
    q[ball(cube6, cube6.center_vertex(), 1.0).members] = 1.0
    a = tr.traceFK_sufficient(cube6, q)
    b = tr.traceFK_sufficient(cube6, 3 * q)
    assert b.A == pytest.approx(3 * a.A, rel=1e-9)
    assert b.C1 == pytest.approx(3 * a.C1, rel=1e-9)
    with pytest.raises(TailDiverges):
        tr.traceFK_sufficient(cube6, q, nu_amb=2.0)


def test_tracedp_comparable(cube6):
    q = np.random.default_rng(3).random(cube6.n)
    dp = tr.traceDP_conditions(cube6, q)
    assert dp.comparable
    assert all(np.isfinite([dp.C_ii, dp.C_iii, dp.C_iv]))
