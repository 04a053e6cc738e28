"""Capacities, equilibrium potentials and inequalities built on them."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .calculus import assemble, edge_lift, energy, generalized_top, green_columns, heat, weighted_stiffness
from .errors import PotlabError
from .space import WeightedGraphSpace


@dataclass(eq=False)
class EquilibriumData:
    U: np.ndarray
    h: np.ndarray
    cap: float
    nu_U: np.ndarray  # μ Δh, a measure carried by U

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.nu_U > 1e-12)


def _as_set(space: WeightedGraphSpace, U) -> np.ndarray:
    U = np.unique(np.asarray(U, dtype=np.int64).ravel())
    if U.size == 0:
        raise PotlabError("U must be nonempty")
    if U.min() < 0 or U.max() >= space.n:
        raise PotlabError("U must consist of interior vertices")
    return U


def capacity(space: WeightedGraphSpace, U) -> EquilibriumData:
    """Equilibrium potential of U: h = 1 on U, 0 on the boundary, harmonic elsewhere."""
    space.require_boundary()
    U = _as_set(space, U)
    L = assemble(space).L
    h = np.zeros(space.n)
    h[U] = 1.0
    free = np.setdiff1d(np.arange(space.n), U)
    if free.size:
        L = L.tocsr()
        rhs = -(L[free][:, U] @ np.ones(U.size))
        h[free] = spsolve(L[free][:, free].tocsc(), rhs)
    nu = L @ h
    nu[free] = 0.0  # harmonic off U up to round-off
    return EquilibriumData(U, h, float(h @ (L @ h)), nu)


def capacity_value(space: WeightedGraphSpace, U, G_block: np.ndarray | None = None) -> float:
    """cap(U) = 1ᵀ G_UU⁻¹ 1, using the Green matrix block when small."""
    U = _as_set(space, U)
    if G_block is None:
        if U.size > 400:
            return capacity(space, U).cap
        G_block = green_columns(space, U)[U]
    one = np.ones(U.size)
    return float(one @ np.linalg.solve(G_block, one))


def capacities(space: WeightedGraphSpace, sets, union_limit: int = 3000) -> np.ndarray:
    """Capacities of many sets, sharing Green columns when the union of the sets is small."""
    sets = [_as_set(space, U) for U in sets]
    if not sets:
        return np.zeros(0)
    union = np.unique(np.concatenate(sets))
    if union.size <= union_limit and max(U.size for U in sets) <= 400:
        cols = green_columns(space, union)
        pos = np.searchsorted(union, np.arange(space.n))
        out = []
        for U in sets:
            block = cols[U][:, pos[U]]
            out.append(capacity_value(space, U, block))
        return np.asarray(out)
    return np.asarray([capacity(space, U).cap if U.size > 400 else capacity_value(space, U) for U in sets])


# ---- superharmonicity ------------------------------------------------------------------
@dataclass(frozen=True)
class SuperharmonicReport:
    passed: bool
    worst_margin: float  # min over tests of the (scaled) slack; negative = violation
    laplacian_margin: float
    heat_margins: dict
    argmin: int


def is_superharmonic(space: WeightedGraphSpace, f: np.ndarray, t_samples=(0.1, 1.0, 10.0),
                     rtol: float = 1e-10) -> SuperharmonicReport:
    """Δf ≥ -tol pointwise and e^{-tΔ}f ≤ f + tol for each sampled t, with tol = rtol ‖f‖_∞."""
    f = np.asarray(f, dtype=float)
    scale = max(float(np.abs(f).max()), 1e-300)
    tol = rtol * scale
    lap = assemble(space).laplacian @ f
    lap_margin = float(lap.min())
    worst = lap_margin + tol
    arg = int(np.argmin(lap))
    heat_m = {}
    for t in t_samples:
        slack = f - heat(space, t, f)
        m = float(slack.min())
        heat_m[float(t)] = m
        if m + tol < worst:
            worst, arg = m + tol, int(np.argmin(slack))
    return SuperharmonicReport(worst >= 0, worst - tol, lap_margin, heat_m, arg)


# ---- energy of powers of h -----------------------------------------------------------------
@dataclass(frozen=True)
class HtauEnergy:
    tau: float
    lhs: float
    rhs: float

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs


def htau_energy_check(space: WeightedGraphSpace, eq: EquilibriumData, tau: float) -> HtauEnergy:
    """‖d h^τ‖² against τ²/(2τ-1) cap(U)."""
    if tau <= 0.5:
        raise PotlabError("energy bound needs tau > 1/2")
    lhs = energy(space, np.clip(eq.h, 0, None) ** tau)
    return HtauEnergy(float(tau), lhs, tau**2 / (2 * tau - 1) * eq.cap)


# ---- Hardy inequality ---------------------------------------------------------------------
def _edge_values(space: WeightedGraphSpace, h: np.ndarray):
    """(h at tail, h at head, edge lift of h) for h on the interior (zero on the boundary) or on all vertices."""
    if h.shape == (space.n_vertices,):
        u, v = space.edges[:, 0], space.edges[:, 1]
        return h[u], h[v], np.sqrt(h[u] * h[v])
    a, b = space.edge_ends
    ha = np.where(a >= 0, h[np.clip(a, 0, None)], 0.0)
    hb = np.where(b >= 0, h[np.clip(b, 0, None)], 0.0)
    return ha, hb, edge_lift(space, h)


def hardy_density(space: WeightedGraphSpace, h: np.ndarray) -> np.ndarray:
    """Vertex density of |dh|²/h²: each edge carries (h_u - h_v)²/(ℓ² h_e²), split half to each interior end.

    h_e is the geometric mean; with h given on the interior only, boundary
    values are 0 and edges touching the boundary use the interior value.
    """
    h = np.asarray(h, dtype=float)
    a, b = space.edge_ends
    ha, hb, he = _edge_values(space, h)
    dens = (ha - hb) ** 2 / (space.length**2 * he**2)
    contrib = 0.5 * space.weight * space.length * dens
    rho = np.zeros(space.n)
    np.add.at(rho, a[a >= 0], contrib[a >= 0])
    np.add.at(rho, b[b >= 0], contrib[b >= 0])
    return rho / space.measure


@dataclass(frozen=True)
class HardyResult:
    delta: float
    constant: float
    continuum_bound: float
    h_superharmonic: bool


def hardy_constant(space: WeightedGraphSpace, h: np.ndarray, delta: float) -> HardyResult:
    """Best constant in ∫ (|dh|²/h²) φ² h^δ dμ ≤ K ∫ |dφ|² h^δ dμ.

    ``h`` lives on the interior (Dirichlet value 0 outside) or on every vertex.
    """
    h = np.asarray(h, dtype=float)
    if delta >= 1:
        raise PotlabError("Hardy inequality needs delta < 1")
    full = h.shape == (space.n_vertices,)
    if not full and h.shape != (space.n,):
        raise PotlabError("h must be given on the interior or on every vertex")
    if np.any(~(h > 0)):
        raise PotlabError("h must be positive")
    h_int = h[space.interior] if full else h
    sh = is_superharmonic(space, h_int, t_samples=()).passed
    num = space.measure * hardy_density(space, h) * h_int**delta
    K = weighted_stiffness(space, _edge_values(space, h)[2] ** delta)
    const = generalized_top(space, num, stiffness=K)
    return HardyResult(float(delta), max(const, 0.0), (2.0 / (1.0 - delta)) ** 2, sh)


# ---- parabolicity ---------------------------------------------------------------------------
def parabolicity_diagnostic(space: WeightedGraphSpace, core, far, omega: np.ndarray | None = None) -> float:
    """inf Σ_e ω_e (w_e/ℓ_e)(χ_u - χ_v)² over χ = 1 on ``core`` and 0 on ``far`` and the boundary.

    Works on spaces with or without a Dirichlet boundary; ``core``/``far``
    are interior indices and ``omega`` a positive interior vertex weight.
    """
    core = np.unique(np.asarray(core, dtype=np.int64))
    far = np.unique(np.asarray(far, dtype=np.int64))
    if core.size == 0:
        raise PotlabError("core set K must be nonempty")
    if np.intersect1d(core, far).size:
        raise PotlabError("core and far sets overlap")
    N = space.n_vertices
    ew = np.ones(space.n_edges) if omega is None else edge_lift(space, omega)
    c = ew * space.weight / space.length
    u, v = space.edges[:, 0], space.edges[:, 1]
    A = sp.coo_matrix((c, (u, v)), shape=(N, N)).tocsr()
    A = A + A.T
    Lf = (sp.diags(np.asarray(A.sum(axis=1)).ravel()) - A).tocsr()
    fixed_one = space.interior[core]
    fixed_zero = np.union1d(space.interior[far], space.boundary)
    chi = np.zeros(N)
    chi[fixed_one] = 1.0
    free = np.setdiff1d(np.arange(N), np.union1d(fixed_one, fixed_zero))
    if free.size:
        rhs = -(Lf[free][:, fixed_one] @ np.ones(fixed_one.size))
        chi[free] = spsolve(Lf[free][:, free].tocsc(), rhs)
    return float(chi @ (Lf @ chi))
