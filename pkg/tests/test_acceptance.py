"""Acceptance battery: one PASS/FAIL line per criterion, printed in the terminal summary.

Run alone with ``pytest tests/test_acceptance.py -v``; the grid refinement
checks build 8³, 16³ and 24³ boxes and take a few minutes in total.
"""
import json

import numpy as np
import pytest

from potlab import calculus as calc
from potlab import kernelcloud as kc
from potlab import mv
from potlab import potential as pot
from potlab import trace as tr
from potlab import weights as wt
from potlab.cli import main
from potlab.space import ball, balls_within, build_grid_space, random_graph_space

pytestmark = pytest.mark.slow

SIDES = (8, 16, 24)
LINES: dict[int, str] = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    LINES[criterion] = f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}"


def spread(values) -> float:
    v = np.asarray(values, dtype=float)
    return float(v.max() / v.min())


def fmt(values, digits=4) -> str:
    return "/".join(f"{x:.{digits}g}" for x in values)


@pytest.fixture(scope="session")
def boxes():
    return {n: build_grid_space(3, n) for n in SIDES}


@pytest.fixture(scope="session")
def center_eq(boxes):
    """Equilibrium data of the radius-2 ball around the centre of each box."""
    return {n: pot.capacity(s, ball(s, s.center_vertex(), 2.0).members) for n, s in boxes.items()}


@pytest.fixture(scope="session")
def green_o(boxes):
    return {n: calc.green_columns(s, [s.center_vertex()])[:, 0] for n, s in boxes.items()}


# ---- 1: weighted Hodge bound -------------------------------------------------------------
def test_hodge_bound(boxes, center_eq):
    s, h = boxes[16], center_eq[16].h
    deltas = [0.0, 0.25, -0.25, 0.5, -0.5, 0.75, -0.75]
    rows = wt.weighted_hodge_sweep(s, h, deltas)
    bound_ok = all(r.norm**2 <= r.bound * 1.25 for r in rows)
    unit_ok = abs(rows[0].norm - 1.0) <= 1e-9
    rng = np.random.default_rng(0)
    worst = -np.inf
    for _ in range(20):
        beta = rng.standard_normal(s.n_edges)
        for delta in (0.25, 0.5, 0.75):
            lhs, rhs = wt.weighted_energy_terms(s, h, delta, beta)
            worst = max(worst, (lhs - rhs) / max(abs(rhs), 1.0))
    energy_ok = worst <= 1e-10
    ok = bound_ok and unit_ok and energy_ok
    record(1, ok, f"max norm²/bound={max(r.slack for r in rows):.4f} (limit 1.25), "
                  f"|norm(0)-1|={abs(rows[0].norm - 1):.1e}, energy inequality worst rel. excess={worst:.1e}")
    assert ok


# ---- 2: improved exponent ------------------------------------------------------------------
def test_improved_exponent(boxes, center_eq):
    big = boxes[24]
    o = big.center_vertex()
    R = 2.0
    centers = wt.admissible_centers(big, R)
    centers = centers[np.argsort(big.dist_rows([o])[0][centers], kind="stable")][:5]
    prof = wt.harnack_estimate(big, centers, R, 100, seed=0)
    q = wt.choose_q(prof)
    nu = wt.fitted_nu(big)
    tau = wt.improved_exponent(q, nu)
    norms = [wt.hodge_weighted_norm(boxes[n], center_eq[n].h, tau).value for n in SIDES]
    ok = bool(np.all(np.isfinite(norms))) and spread(norms) < 1.5
    record(2, ok, f"q={q:g} (alpha={prof.holder_alpha:.3f}, p+={prof.rh_exponent_pplus:g}), nu={nu:.4f}, "
                  f"tau+={tau:.4f}, norms 8/16/24={fmt(norms)}, max/min={spread(norms):.3f} (limit 1.5)")
    assert ok


# ---- 3: energy of powers of the equilibrium potential -----------------------------------
def test_equilibrium_energy(boxes, center_eq):
    taus = (0.6, 1.0, 2.0, 4.0)
    ratios = {n: [pot.htau_energy_check(boxes[n], center_eq[n], t).ratio for t in taus] for n in SIDES}
    bound_ok = max(ratios[16]) <= 1.25
    exact_ok = abs(ratios[16][1] - 1.0) <= 1e-12
    trend_ok = all(ratios[8][k] >= ratios[16][k] - 1e-12 and ratios[16][k] >= ratios[24][k] - 1e-12
                   for k in range(len(taus)))
    ok = bound_ok and exact_ok and trend_ok
    trend = "; ".join(f"tau={t:g}: {fmt([ratios[n][k] for n in SIDES])}" for k, t in enumerate(taus))
    record(3, ok, f"16³ max ratio={max(ratios[16]):.4f} (limit 1.25), |ratio(1)-1|={abs(ratios[16][1] - 1):.1e}, "
                  f"non-increasing 8->24: {trend_ok} [{trend}]")
    assert ok


# ---- 4: Hardy --------------------------------------------------------------------------------
def test_hardy(boxes, center_eq):
    s, h = boxes[16], center_eq[16].h
    res = [pot.hardy_constant(s, h, d) for d in (0.0, 0.5, -1.0)]
    bound_ok = all(r.constant <= r.continuum_bound * 1.5 for r in res)
    flat = pot.hardy_constant(s, np.full(s.n_vertices, 3.0), 0.5).constant
    ok = bound_ok and flat == 0.0
    record(4, ok, "constant/limit: " + ", ".join(f"delta={r.delta:g}: {r.constant:.4f}/{1.5 * r.continuum_bound:g}"
                                               for r in res) + f"; constant h gives {flat}")
    assert ok


# ---- 5: superharmonicity -----------------------------------------------------------------
def test_superharmonicity(boxes, center_eq, green_o):
    s = boxes[16]
    worst, ok = np.inf, True
    for tau in (0.25, 0.5, 1.0):
        for f in (center_eq[16].h ** tau, green_o[16] ** tau):
            rep = pot.is_superharmonic(s, f, (0.1, 1.0, 10.0), rtol=1e-12)
            ok &= rep.passed
            worst = min(worst, min(rep.heat_margins.values()) / np.abs(f).max())
    record(5, ok, f"min_t,x (f - e^(-t Delta) f)/max f = {worst:.3e} (tolerance -1e-12)")
    assert ok


# ---- 6: trace chain -------------------------------------------------------------------------
def test_trace_chain(boxes):
    rng = np.random.default_rng(0)
    failures, ratios = [], []
    for i in range(50):
        n = int(rng.integers(3, 13))
        g = random_graph_space(n, int(rng.integers(1, 4)), 0.4, rng)
        fam = tr.exhaustive_family(g)
        for _ in range(3):
            q = rng.random(n) * (rng.random(n) < 0.7)
            rep = tr.verify_trace_chain(g, q, family=fam, rtol=1e-9)
            if not rep.passed:
                failures.append((i, [k for k, v in rep.verdicts.items() if not v]))
            if rep.constants.C3_exhaustive > 0:
                ratios.append(rep.constants.C1 / rep.constants.C3_exhaustive)
    s = boxes[16]
    balls_fam = tr.ball_family(s)
    grid_bad = 0
    for _ in range(20):
        q = rng.random(s.n)
        c3 = tr.trace_c3(s, q, balls_fam + tr.sublevel_family(s, q))
        grid_bad += not c3 <= tr.trace_c1(s, q) * (1 + 1e-9)
    ok = not failures and grid_bad == 0
    record(6, ok, f"random suite: {len(failures)} failing instances, C1/C3 in [{min(ratios):.3f}, {max(ratios):.3f}] "
                  f"(limit 4); 16³ family C3<=C1 violations: {grid_bad}/20")
    assert ok


# ---- 7: A1 constants of powers of the Green function ------------------------------------
def test_green_a1(boxes, green_o):
    taus = (0.5, 1.0, 2.0, 3.5)
    consts = {}
    for n in SIDES:
        s = boxes[n]
        fam = balls_within(s, s.inner_region(0.5), np.arange(1, n // 2 + 1, dtype=float))
        consts[n] = [wt.a1_constant(s, green_o[n] ** t, fam).constant for t in taus]
    stable = {t: spread([consts[n][k] for n in SIDES]) for k, t in enumerate(taus[:3])}
    growing = consts[8][3] < consts[16][3] < consts[24][3]
    ok = all(np.isfinite(consts[n]).all() for n in SIDES) and all(v < 1.5 for v in stable.values()) and growing
    detail = "; ".join(f"tau={t:g}: {fmt([consts[n][k] for n in SIDES])} (max/min {stable[t]:.3f})"
                       for k, t in enumerate(taus[:3]))
    record(7, ok, f"{detail}; tau=3.5 increasing: {growing} ({fmt([consts[n][3] for n in SIDES])})")
    assert ok


# ---- 8: cloud inequalities -----------------------------------------------------------------
def test_cloud_inequalities():
    rng = np.random.default_rng(0)
    clouds = [kc.lattice_cloud(1, 200, 1.5), kc.lattice_cloud(2, 14, 2.5), kc.lattice_cloud(3, 6, 3.0)]
    ok, parts = True, []
    for cl in clouds:
        km = kc.assemble_k(cl)
        ks = kc.check_lemma_ks(km)
        kk = kc.check_lemma_kk(km, [rng.random(cl.n) * (rng.random(cl.n) < 0.5) for _ in range(50)])
        q = np.zeros(cl.n)
        q[np.argsort(cl.metric[cl.n // 2], kind="stable")[:5]] = 1.0
        gts = [kc.genetrace_conditions(cl, km, q), kc.genetrace_conditions(cl, km, rng.random(cl.n))]
        ok &= ks.passed and kk.passed and all(g.passed for g in gts)
        parts.append(f"n={cl.n} gamma={cl.doubling.gamma:.3g} quasi-symmetry={ks.passed} product-bound={kk.passed} "
                     f"genetrace={all(g.passed for g in gts)}")
    record(8, ok, "; ".join(parts))
    assert ok


# ---- 9: heat-type integral against the radial kernel --------------------------------------
def test_kernel_comparison(boxes):
    rng = np.random.default_rng(0)
    s = boxes[16]
    region = s.inner_region(0.5)
    prof = calc.graph_volume_profile(s, region, 3.0)
    dist = s.dist_rows(region)
    i, j = rng.integers(region.size, size=100), rng.integers(s.n, size=100)
    graph_pairs = [(int(a), float(dist[a, b])) for a, b in zip(i, j) if dist[a, b] > 0]
    power_pairs = [(0, float(d)) for d in np.exp(rng.uniform(np.log(0.1), np.log(100), 100))]
    ok, parts = True, []
    for D in (2.0, 4.0):
        for sx in (0.5, 1.0):
            for name, p, pairs in (("r^3", kc.PowerProfile(3.0), power_pairs), ("16³", prof, graph_pairs)):
                rep = kc.estikernel_quadrature(p, D, sx, pairs)
                ok &= rep.passed
                parts.append(f"{name} D={D:g} s={sx:g}: [{rep.c_emp:.3f},{rep.C_emp:.3f}] in [{rep.c:.3f},{rep.C:.3g}]")
    record(9, ok, "; ".join(parts))
    assert ok


# ---- 10: Maz'ya–Verbitsky -------------------------------------------------------------------
def _mv_family(s):
    c = s.center_vertex()
    X = s.interior_coords
    row = s.dist_rows([c])[0]
    E = s.coords[s.edges[:, 1]] - s.coords[s.edges[:, 0]]
    mid = 0.5 * (s.coords[s.edges[:, 1]] + s.coords[s.edges[:, 0]])
    theta0 = ((np.abs(E[:, 0]) > 0) & (np.abs(mid - X[c]).sum(1) <= 2)).astype(float)
    shift = np.array([3.0, 0.0, 0.0])
    sign = ((np.abs(X - (X[c] + shift)).sum(1) <= 1).astype(float)
            - (np.abs(X - (X[c] - shift)).sum(1) <= 1).astype(float))
    return {"function": mv.Potential.function((row <= 2).astype(float)),
            "divergence": mv.Potential.divergence(theta0),
            "sign-changing": mv.Potential.function(sign)}


def test_mazya_verbitsky(boxes):
    s = boxes[16]
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(100):
        V = mv.Potential.divergence(rng.standard_normal(s.n_edges))
        A = mv.form_constant_A(s, V)
        B = mv.multiplier_constant_B(s, mv.representing_form(s, V))
        worst = max(worst, A / (2 * np.sqrt(B)))
    forward_ok = worst <= 1 + 1e-9
    rev, cps = {}, {}
    for n in SIDES:
        fam = mv.local_ball_family(boxes[n])
        for name, V in _mv_family(boxes[n]).items():
            rep = mv.mv_verify(boxes[n], V, fam)
            rev.setdefault(name, []).append(rep.ratio_reverse)
            cps.setdefault(name, []).append(rep.C_prime)
    reverse_ok = all(spread(v) <= 2 for v in rev.values())
    cprime_ok = all(np.isfinite(v).all() and min(v) > 0 for v in cps.values())
    ok = forward_ok and reverse_ok and cprime_ok
    detail = "; ".join(f"{k}: B/A² {fmt(rev[k], 3)} C' {fmt(cps[k], 3)}" for k in rev)
    record(10, ok, f"max A/(2√B) over 100 random θ={worst:.4f}; {detail}")
    assert ok


# ---- 11: Green estimates ------------------------------------------------------------------
def test_green_estimates(boxes):
    est = {n: calc.check_green_estimates(boxes[n], 3.0) for n in SIDES}
    r = {n: est[n].ratio for n in SIDES}
    ok = r[16] <= 50 and 0.5 <= r[24] / r[16] <= 2 and all(e.certified for e in est.values())
    record(11, ok, f"C/c on 8/16/24 = {fmt([r[n] for n in SIDES])} (limit 50 on 16³), "
                   f"16->24 change x{r[24] / r[16]:.3f} (limit 2), lower bounds certified: "
                   f"{all(e.certified for e in est.values())}")
    assert ok


# ---- 12: determinism ------------------------------------------------------------------------
def test_determinism(tmp_path):
    paths = [tmp_path / f"run{k}.json" for k in range(2)]
    codes = [main(["suite", "--seed", "11", "--out", str(p)]) for p in paths]
    same = paths[0].read_bytes() == paths[1].read_bytes()
    ok = codes == [0, 0] and same and json.loads(paths[0].read_text())["passed"]
    record(12, ok, f"suite exit codes {codes}, byte-identical: {same}")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
