"""Muckenhoupt-type weight checks, harmonic-function estimators and weighted Hodge norms."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .calculus import assemble, edge_lift, hodge_potential, hodge_project, weighted_op_norm
from .errors import NotApplicable, NoAdmissibleBalls, PotlabError
from .space import Ball, WeightedGraphSpace, ball, estimate_doubling


def _check_weight(omega) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    if np.any(~(omega > 0)) or np.any(~np.isfinite(omega)):
        raise PotlabError("weight must be positive and finite")
    return omega


def ball_mean(space: WeightedGraphSpace, f: np.ndarray, B: Ball) -> float:
    mu = space.measure[B.members]
    return float(mu @ f[B.members] / mu.sum())


# ---- A1 -------------------------------------------------------------------------------
@dataclass(frozen=True)
class A1Result:
    constant: float
    worst: Ball | None
    per_ball: np.ndarray


def a1_constant(space: WeightedGraphSpace, omega, ball_family) -> A1Result:
    """max over balls of (μ-mean of ω on B) / (min of ω on B)."""
    omega = _check_weight(omega)
    vals = np.array([ball_mean(space, omega, B) / omega[B.members].min() for B in ball_family])
    i = int(np.argmax(vals))
    return A1Result(float(vals[i]), ball_family[i], vals)


def doubled(space: WeightedGraphSpace, B: Ball) -> Ball:
    return ball(space, B.center, 2 * B.radius)


@dataclass(frozen=True)
class A1Derived:
    C: float  # A1 constant over the balls and their doubles
    D_i: float  # sup ω(2B)/ω(B)
    D_iii: float  # sup inf_B ω / inf_{2B} ω
    gamma_balls: float  # sup μ(2B)/μ(B) over the scanned balls
    bound: float  # C · gamma_balls, which dominates both D's
    ii_holds: bool

    @property
    def passed(self) -> bool:
        return self.ii_holds and self.D_i <= self.bound * (1 + 1e-12) and self.D_iii <= self.bound * (1 + 1e-12)


def a1_derived_properties(space: WeightedGraphSpace, omega, ball_family) -> A1Derived:
    """Doubling of ω-mass and of infima for an A1 weight, with the bound C·sup μ(2B)/μ(B).

    For every ball: ω(2B) ≤ μ(2B) C inf_{2B} ω ≤ C (μ(2B)/μ(B)) ω(B), and
    inf_B ω ≤ ⨏_B ω ≤ (μ(2B)/μ(B)) ⨏_{2B} ω ≤ C (μ(2B)/μ(B)) inf_{2B} ω.
    """
    omega = _check_weight(omega)
    doubles = [doubled(space, B) for B in ball_family]
    C = a1_constant(space, omega, list(ball_family) + doubles).constant
    mu = space.measure
    Di = Diii = g = 0.0
    ii = True
    for B, B2 in zip(ball_family, doubles):
        m1, m2 = mu[B.members], mu[B2.members]
        w1, w2 = omega[B.members], omega[B2.members]
        Di = max(Di, float(m2 @ w2 / (m1 @ w1)))
        Diii = max(Diii, float(w1.min() / w2.min()))
        g = max(g, float(m2.sum() / m1.sum()))
        mean = float(m1 @ w1 / m1.sum())
        ii &= w1.min() <= mean * (1 + 1e-12) and mean <= C * w1.min() * (1 + 1e-12)
    return A1Derived(C, Di, Diii, g, C * g, bool(ii))


@dataclass(frozen=True)
class ReverseHolder:
    constant: float  # sup (⨏ω^r)^{1/r} / ⨏ω
    a1_of_power: float  # A1 constant of ω^r on the same balls
    bound: float  # a1_of_power^{1/r}
    passed: bool


def reverse_holder_check(space: WeightedGraphSpace, omega, r: float, ball_family) -> ReverseHolder:
    """Reverse Hölder constant of ω at exponent r, against the A1 constant of ω^r."""
    if r <= 1:
        raise PotlabError("reverse Hölder exponent must exceed 1")
    omega = _check_weight(omega)
    C = a1_constant(space, omega**r, ball_family).constant
    worst = 0.0
    for B in ball_family:
        worst = max(worst, ball_mean(space, omega**r, B) ** (1 / r) / ball_mean(space, omega, B))
    bound = C ** (1 / r)
    return ReverseHolder(worst, C, bound, worst <= bound * (1 + 1e-9))


# ---- harmonic samples ---------------------------------------------------------------------
def _full_stiffness(space: WeightedGraphSpace) -> sp.csr_matrix:
    N = space.n_vertices
    u, v = space.edges[:, 0], space.edges[:, 1]
    c = space.weight / space.length
    A = sp.coo_matrix((c, (u, v)), shape=(N, N)).tocsr()
    A = A + A.T
    return (sp.diags(np.asarray(A.sum(axis=1)).ravel()) - A).tocsr()


def harmonic_samples(space: WeightedGraphSpace, center: int, radius: float, n_samples: int,
                     rng: np.random.Generator, data_range=(1.0, 100.0)) -> tuple[np.ndarray, np.ndarray]:
    """Functions harmonic on the closed ball B(center, radius) with log-uniform positive data on its rim.

    Returns (domain, samples) where ``domain`` are interior indices of the
    ball and ``samples`` is (n_samples, n) with values on the ball and its
    interior rim (zero elsewhere).
    """
    dom = ball(space, center, radius).members
    if np.any(space.touches_boundary[dom]) and space.boundary_distance[center] <= radius:
        raise NoAdmissibleBalls("harmonic domain reaches the Dirichlet boundary")
    Lf = _full_stiffness(space)
    dom_v = space.interior[dom]
    in_dom = np.zeros(space.n_vertices, dtype=bool)
    in_dom[dom_v] = True
    nbrs = np.unique(Lf[dom_v].indices)
    rim_v = nbrs[~in_dom[nbrs]]
    lu = splu(Lf[dom_v][:, dom_v].tocsc())
    coupling = Lf[dom_v][:, rim_v]
    lo, hi = np.log(data_range[0]), np.log(data_range[1])
    out = np.zeros((n_samples, space.n_vertices))
    for k in range(n_samples):
        g = np.exp(rng.uniform(lo, hi, size=rim_v.size))
        out[k, rim_v] = g
        out[k, dom_v] = lu.solve(-(coupling @ g))
    return dom, out


def vertex_gradient_sq(space: WeightedGraphSpace, psi_full: np.ndarray, where: np.ndarray) -> np.ndarray:
    """|dψ|²(v) = (1/2μ_v) Σ_{e∋v} w_e ℓ_e (dψ)_e² at interior vertices ``where`` (ψ given on all vertices)."""
    u, v = space.edges[:, 0], space.edges[:, 1]
    de2 = ((psi_full[v] - psi_full[u]) / space.length) ** 2
    contrib = 0.5 * space.weight * space.length * de2
    acc = np.zeros(space.n_vertices)
    np.add.at(acc, u, contrib)
    np.add.at(acc, v, contrib)
    verts = space.interior[where]
    return acc[verts] / space.mu[verts]


@dataclass(frozen=True)
class HarnackProfile:
    harnack_C: float
    holder_alpha: float
    rh_exponent_pplus: float
    grad_decay_C: float
    n_balls: int = 0
    n_samples: int = 0
    rh_ratios: dict = field(default_factory=dict)  # p -> worst reverse-Hölder ratio


P_GRID = tuple(np.arange(2.25, 4.0001, 0.25))


def admissible_centers(space: WeightedGraphSpace, radius: float) -> np.ndarray:
    """Interior vertices whose 3-fold ball stays strictly inside the interior."""
    return np.flatnonzero(space.boundary_distance > 3 * radius)


def harnack_estimate(space: WeightedGraphSpace, centers, radius: float, n_harmonics: int, seed: int = 0,
                     rh_cap: float = 10.0) -> HarnackProfile:
    """Empirical Harnack, Hölder, gradient-decay and gradient reverse-Hölder constants."""
    centers = np.asarray(centers, dtype=np.int64)
    if centers.size == 0:
        raise NoAdmissibleBalls("no admissible balls: 3B must fit inside the interior")
    bad = centers[space.boundary_distance[centers] <= 3 * radius]
    if bad.size:
        raise NoAdmissibleBalls(f"3B leaves the interior for {bad.size} center(s)")
    rng = np.random.default_rng(seed)
    R = float(radius)
    harnack = 1.0
    alphas = []
    decay = 1.0
    rh = {p: 0.0 for p in P_GRID}
    per_center = max(1, int(np.ceil(n_harmonics / centers.size)))
    mu = space.measure
    for c in centers:
        dom, samples = harmonic_samples(space, c, 3 * R, per_center, rng)
        row = space.dist_rows([c])[0]
        radii = np.unique(row[dom])
        radii = radii[(radii > 0) & (radii <= 2 * R)]
        B = np.flatnonzero(row <= R)
        B2 = np.flatnonzero(row <= 2 * R)
        for psi in samples:
            vals = psi[space.interior]
            harnack = max(harnack, vals[B].max() / vals[B].min())
            sup2 = np.abs(vals[B2]).max()
            rs = radii[radii <= R]
            osc = np.array([np.ptp(vals[row <= r]) for r in rs]) / sup2
            good = osc > 0
            if good.sum() >= 2:
                slope = np.polyfit(np.log(rs[good] / R), np.log(osc[good]), 1)[0]
                alphas.append(slope)
            g2 = vertex_gradient_sq(space, psi, np.arange(space.n))
            means = np.array([(mu[row <= r] @ g2[row <= r]) / mu[row <= r].sum() for r in radii])
            alpha_now = min(max(alphas[-1] if alphas else 1.0, 1e-3), 1.0)
            th = radii / R
            scaled = th ** (2 - 2 * alpha_now) * means
            # sup over θ1 ≤ θ2 of scaled(θ1)/scaled(θ2)
            suffix_min = np.minimum.accumulate(scaled[::-1])[::-1]
            decay = max(decay, float((scaled / suffix_min).max()))
            m2B = mu[B2] @ g2[B2] / mu[B2].sum()
            for p in P_GRID:
                lhs = (mu[B] @ g2[B] ** (p / 2) / mu[B].sum()) ** (2 / p)
                rh[p] = max(rh[p], float(lhs / m2B)) if m2B > 0 else rh[p]
    alpha = float(min(1.0, max(min(alphas), 1e-6))) if alphas else 1.0
    ok = [p for p in P_GRID if rh[p] <= rh_cap]
    pplus = float(max(ok)) if ok else 2.0
    return HarnackProfile(float(harnack), alpha, pplus, float(decay), int(centers.size),
                          int(per_center * centers.size), {float(k): v for k, v in rh.items()})


def choose_q(profile: HarnackProfile) -> float:
    """Largest q on the grid with 2 < q ≤ p₊ and q(1-α) < 2."""
    ok = [p for p in P_GRID if p <= profile.rh_exponent_pplus and p * (1 - profile.holder_alpha) < 2]
    if not ok:
        raise NotApplicable(f"no exponent q satisfies the constraints for {profile}")
    return float(max(ok))


def improved_exponent(q: float, nu: float) -> float:
    """τ₊ = 1 + δ/2 with δ = (q-2)/q · 1/(ν-2)."""
    if nu <= 2:
        raise NotApplicable("improved exponent needs nu > 2")
    return 1.0 + 0.5 * (q - 2) / q / (nu - 2)


@dataclass(frozen=True)
class WeightedGradientRH:
    q: float
    green_C: float
    h_C: dict  # tau -> constant


def green_weighted_gradient_rh(space: WeightedGraphSpace, G_o: np.ndarray, h: np.ndarray, centers, radius: float,
                               samples: int, q: float, taus=(0.5, 1.0), seed: int = 0) -> WeightedGradientRH:
    """Best constants of the G_o- and h^τ-weighted gradient reverse-Hölder inequalities."""
    if q <= 2:
        raise NotApplicable("q must exceed 2")
    rng = np.random.default_rng(seed)
    mu = space.measure
    Cg = 0.0
    Ch = {float(t): 0.0 for t in taus}
    per_center = max(1, int(np.ceil(samples / len(centers))))
    for c in np.asarray(centers, dtype=np.int64):
        _, S = harmonic_samples(space, c, 3 * radius, per_center, rng)
        row = space.dist_rows([c])[0]
        B, B2 = np.flatnonzero(row <= radius), np.flatnonzero(row <= 2 * radius)
        mB, m2B = mu[B], mu[B2]
        for psi in S:
            g2 = vertex_gradient_sq(space, psi, np.arange(space.n))
            if not np.any(g2[B2] > 0):
                continue
            avg2 = m2B @ g2[B2] / m2B.sum()
            lhs = (mB @ (G_o[B] * g2[B] ** (q / 2))) / mB.sum()
            Cg = max(Cg, float(lhs / (G_o[B].min() * avg2 ** (q / 2))))
            for t in taus:
                w = h**t
                l = (mB @ (w[B] * g2[B] ** (q / 2))) / (mB @ w[B])
                r = ((m2B @ (w[B2] * g2[B2])) / (m2B @ w[B2])) ** (q / 2)
                Ch[float(t)] = max(Ch[float(t)], float(l / r))
    return WeightedGradientRH(float(q), Cg, Ch)


def fitted_nu(space: WeightedGraphSpace, radii=None, region_fraction: float = 0.5) -> float:
    """Volume-growth exponent fitted on balls centred in the inner region that avoid the boundary.

    By default the fit uses the upper half of the largest admissible radius,
    where the local slope of log V against log r is closest to its asymptote.
    """
    region = space.inner_region(region_fraction)
    if radii is None:
        rmax = float(space.boundary_distance[region].max()) - 1
        if rmax < 2:
            raise NoAdmissibleBalls("space too small to fit a volume exponent")
        radii = np.arange(np.ceil(rmax / 2), rmax + 1)
    rmax = float(np.max(radii))
    centers = region[space.boundary_distance[region] > rmax]
    if centers.size == 0:
        raise NoAdmissibleBalls("no inner center carries an untruncated ball of the largest radius")
    return estimate_doubling(space, radii, centers=centers).nu


# ---- weighted Hodge norms -----------------------------------------------------------------
def hodge_weighted_norm(space: WeightedGraphSpace, h: np.ndarray, delta: float, method: str = "lanczos",
                        tol: float = 1e-9, seed: int = 0):
    """Norm of Π on edge fields with inner product Σ w ℓ ω_e β², ω_e the edge lift of h^δ."""
    omega_e = edge_lift(space, np.asarray(h, dtype=float) ** delta)
    asm = assemble(space)
    P = lambda b: hodge_project(space, b)  # noqa: E731
    return weighted_op_norm(P, asm.edge_ip, omega_e, tol=tol, seed=seed, method=method)


@dataclass(frozen=True)
class HodgeRow:
    delta: float
    norm: float
    bound: float | None  # ((1+|δ|)/(1-|δ|))² for |δ| < 1
    slack: float | None  # norm² / bound
    converged: bool


def weighted_hodge_sweep(space: WeightedGraphSpace, h: np.ndarray, deltas, method: str = "lanczos") -> list[HodgeRow]:
    rows = []
    for dl in deltas:
        if not -1 < dl <= 1.5 or dl == 1:
            raise PotlabError(f"delta must lie in (-1, 1) or (1, 1.5] (got {dl})")
        est = hodge_weighted_norm(space, h, dl, method=method)
        bound = ((1 + abs(dl)) / (1 - abs(dl))) ** 2 if abs(dl) < 1 else None
        slack = est.value**2 / bound if bound else None
        rows.append(HodgeRow(float(dl), est.value, bound, slack, est.converged))
    return rows


def weighted_energy_terms(space: WeightedGraphSpace, h: np.ndarray, delta: float, beta: np.ndarray) -> tuple[float, float]:
    """(∫ |dφ|²_adj h^δ dμ, ∫ φ Δφ h^δ dμ) for φ solving Δφ = d*_μ β.

    |dφ|²_adj is the half-edge vertex aggregation of the edge energy.
    """
    phi = hodge_potential(space, beta)
    asm = assemble(space)
    w = np.asarray(h, dtype=float) ** delta
    full = np.zeros(space.n_vertices)
    full[space.interior] = phi
    g2 = vertex_gradient_sq(space, full, np.arange(space.n))
    lhs = float(np.sum(asm.mu * g2 * w))
    rhs = float(np.sum(phi * (asm.L @ phi) * w))
    return lhs, rhs
