"""Trace-inequality constants and the capacitary test-set families they are scanned over.

For q ≥ 0 and a set U, with g = μ q 1_U:
    q(U) = Σ g,  E(U) = gᵀ G g = ‖Δ^{-1/2}(q 1_U)‖²,  cap(U) = 1ᵀ G_UU⁻¹ 1.
C3 = sup q(U)/cap(U),  C4 = sup E(U)/q(U),  C5 = sqrt(sup E(U)/cap(U)).
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import LinearOperator, eigsh

from .calculus import assemble, frac_power_apply, generalized_top, green_apply, green_columns, graph_volume_profile
from .errors import PotlabError, TailDiverges
from .potential import capacity
from .space import WeightedGraphSpace, distinct_radii

log = logging.getLogger(__name__)

EXHAUSTIVE_LIMIT = 14
FAMILIES = ("balls", "balls_and_sublevels", "exhaustive")


def _check_q(space: WeightedGraphSpace, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (space.n,):
        raise PotlabError(f"q must have one value per interior vertex ({space.n})")
    if np.any(q < 0) or not np.all(np.isfinite(q)):
        raise PotlabError("q must be nonnegative and finite")
    return q


# ---- C1 ----------------------------------------------------------------------------------
def trace_c1(space: WeightedGraphSpace, q) -> float:
    """Best C in Σ q φ² μ ≤ C ‖dφ‖²: top eigenvalue of μq φ = λ L φ."""
    space.require_boundary()
    q = _check_q(space, q)
    return max(generalized_top(space, space.measure * q), 0.0)


def opnorm_sq(space: WeightedGraphSpace, q) -> float:
    """‖√q Δ^{-1/2}‖² computed as the top eigenvalue of √(μq) L⁻¹ √(μq)."""
    space.require_boundary()
    q = _check_q(space, q)
    if not np.any(q):
        return 0.0
    asm = assemble(space)
    r = np.sqrt(space.measure * q)
    if asm.dense_ok and space.n <= 1500:
        return float(sla.eigvalsh(r[:, None] * asm.green_matrix * r[None, :])[-1])
    op = LinearOperator((space.n, space.n), matvec=lambda x: r * asm.solve_L(r * x), dtype=float)
    return float(eigsh(op, k=1, which="LA", v0=r.copy(), tol=1e-13, return_eigenvectors=False)[0])


# ---- test-set families ---------------------------------------------------------------------
@dataclass(eq=False)
class SetFamily:
    """Test sets (sorted interior-index arrays) with their capacities."""

    descriptor: str
    sets: list
    caps: np.ndarray

    def __len__(self) -> int:
        return len(self.sets)

    def __add__(self, other: "SetFamily") -> "SetFamily":
        return SetFamily(f"{self.descriptor}+{other.descriptor}", self.sets + other.sets,
                         np.r_[self.caps, other.caps])


def set_capacities(space: WeightedGraphSpace, sets) -> np.ndarray:
    """cap(U) for each set, from Green-matrix blocks when available, else by a Dirichlet solve."""
    asm = assemble(space)
    dense = asm.dense_ok
    out = np.empty(len(sets))
    for k, U in enumerate(sets):
        if (dense and U.size <= 1500) or U.size <= 32:
            block = asm.green_matrix[np.ix_(U, U)] if dense else green_columns(space, U)[U]
            one = np.ones(U.size)
            out[k] = one @ sla.cho_solve(sla.cho_factor(block), one)
        else:
            out[k] = capacity(space, U).cap
    return out


def _dedupe(sets):
    seen, out = set(), []
    for U in sets:
        key = U.tobytes()
        if key not in seen:
            seen.add(key)
            out.append(U)
    return out


def ball_family(space: WeightedGraphSpace, radii=None, centers=None, max_centers: int = 512) -> SetFamily:
    """Closed balls around interior vertices.

    Small spaces get every center and every distinct radius.  Larger ones use
    evenly spaced centers and the radii {0} ∪ {2^k}.
    """
    space.require_boundary()
    if centers is None:
        centers = np.arange(space.n)
        if space.n > max_centers:
            centers = np.unique(np.linspace(0, space.n - 1, max_centers).round().astype(np.int64))
    centers = np.asarray(centers, dtype=np.int64)
    rows = space.dist_rows(centers)
    if radii is None:
        if space.n <= 200:
            radii = np.r_[0.0, distinct_radii(space, centers)]
        else:
            top = float(rows[np.isfinite(rows)].max())
            radii = np.r_[0.0, 2.0 ** np.arange(0, np.floor(np.log2(max(top, 1))) + 1)]
    sets = _dedupe([np.flatnonzero(row <= r) for row in rows for r in radii])
    return SetFamily(f"balls[{centers.size} centers x {len(radii)} radii]", sets, set_capacities(space, sets))


def superlevel_sets(values: np.ndarray, max_levels: int | None = None) -> list:
    """{values ≥ t} for the distinct values t (or for ~max_levels of them, geometric in set size)."""
    order = np.argsort(-values, kind="stable")
    v = values[order]
    ends = np.flatnonzero(np.r_[v[1:] != v[:-1], True]) + 1  # prefix lengths closed under ties
    if max_levels is not None and ends.size > max_levels:
        want = np.unique(np.geomspace(1, values.size, max_levels).round().astype(np.int64))
        ends = np.unique(ends[np.minimum(np.searchsorted(ends, want), ends.size - 1)])
    return [np.sort(order[:e]) for e in ends]


def sublevel_family(space: WeightedGraphSpace, q, max_levels: int | None = None) -> SetFamily:
    """Superlevel sets of Δ^{-1/2}q and of Δ⁻¹q (the sets the capacitary proof tests on)."""
    q = _check_q(space, q)
    if max_levels is None and space.n > 600:
        max_levels = 64
    sets = []
    if np.any(q):
        for f in (frac_power_apply(space, -0.5, q), green_apply(space, q)):
            sets += superlevel_sets(np.round(f, 14), max_levels)
    sets = _dedupe(sets)
    return SetFamily("sublevels", sets, set_capacities(space, sets))


def exhaustive_family(space: WeightedGraphSpace) -> SetFamily:
    """Every nonempty subset of the interior, capacities computed in batches per subset size."""
    n = space.n
    if n > EXHAUSTIVE_LIMIT:
        raise PotlabError(f"exhaustive family limited to ≤ {EXHAUSTIVE_LIMIT} interior vertices (got {n})")
    space.require_boundary()
    G = assemble(space).green_matrix
    sets, caps = [], []
    for k in range(1, n + 1):
        combos = np.array(list(itertools.combinations(range(n), k)), dtype=np.int64)
        blocks = G[combos[:, :, None], combos[:, None, :]]
        sol = np.linalg.solve(blocks, np.ones((combos.shape[0], k, 1)))
        caps.append(sol.sum(axis=(1, 2)))
        sets += list(combos)
    return SetFamily(f"exhaustive[{2**n - 1} subsets]", sets, np.concatenate(caps))


def build_family(space: WeightedGraphSpace, q, family: str) -> SetFamily:
    if family == "balls":
        return ball_family(space)
    if family == "balls_and_sublevels":
        return ball_family(space) + sublevel_family(space, q)
    if family == "exhaustive":
        return exhaustive_family(space)
    raise PotlabError(f"unknown family {family!r}; choose from {FAMILIES}")


# ---- family scans ----------------------------------------------------------------------------
@dataclass(frozen=True)
class FamilyScan:
    qU: np.ndarray
    energy: np.ndarray
    caps: np.ndarray


def scan_family(space: WeightedGraphSpace, q, fam: SetFamily) -> FamilyScan:
    q = _check_q(space, q)
    if len(fam) == 0:
        raise PotlabError("test-set family is empty")
    asm = assemble(space)
    g = space.measure * q
    qU = np.array([g[U].sum() for U in fam.sets])
    if asm.dense_ok:
        G = asm.green_matrix
        E = np.empty(len(fam))
        big = []
        for k, U in enumerate(fam.sets):
            if U.size <= 200:
                E[k] = g[U] @ G[np.ix_(U, U)] @ g[U]
            else:
                big.append(k)
        for start in range(0, len(big), 256):  # large sets: one matrix product per chunk
            chunk = big[start:start + 256]
            M = np.zeros((space.n, len(chunk)))
            for j, k in enumerate(chunk):
                M[fam.sets[k], j] = g[fam.sets[k]]
            E[chunk] = np.einsum("ij,ij->j", M, G @ M)
    else:
        E = np.empty(len(fam))
        for k, U in enumerate(fam.sets):
            gu = np.zeros(space.n)
            gu[U] = g[U]
            E[k] = gu @ asm.solve_L(gu)
    return FamilyScan(qU, E, fam.caps)


def _sup(num, den):
    ok = den > 0
    if not ok.any():
        return 0.0, -1
    r = np.where(ok, num / np.where(ok, den, 1.0), -np.inf)
    k = int(np.argmax(r))
    return max(float(r[k]), 0.0), k


def trace_c3(space: WeightedGraphSpace, q, family: str | SetFamily = "balls_and_sublevels") -> float:
    """sup over the family of q(U)/cap(U)."""
    fam = family if isinstance(family, SetFamily) else build_family(space, q, family)
    sc = scan_family(space, q, fam)
    return _sup(sc.qU, sc.caps)[0]


def trace_c4_c5(space: WeightedGraphSpace, q, family: str | SetFamily = "balls_and_sublevels") -> tuple[float, float]:
    """(sup E(U)/q(U), sqrt(sup E(U)/cap(U))); sets where q vanishes are skipped for C4."""
    fam = family if isinstance(family, SetFamily) else build_family(space, q, family)
    sc = scan_family(space, q, fam)
    skipped = int(np.sum(sc.qU <= 0))
    if skipped:
        log.debug("C4 scan skipped %d sets carrying no q-mass", skipped)
    return _sup(sc.energy, sc.qU)[0], float(np.sqrt(_sup(sc.energy, sc.caps)[0]))


# ---- the chain --------------------------------------------------------------------------------
@dataclass(frozen=True)
class TraceConstants:
    C1: float
    opnorm_sq: float
    C3_family: float
    C3_exhaustive: float | None
    C4: float
    C5: float
    family_descriptor: str


@dataclass(frozen=True)
class TraceReport:
    constants: TraceConstants
    verdicts: dict
    argmax_sets: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())


def _le(a: float, b: float, rtol: float) -> bool:
    return a <= b + rtol * max(abs(a), abs(b), 1e-300)


def verify_trace_chain(space: WeightedGraphSpace, q, family: str | SetFamily = "balls_and_sublevels",
                       exhaustive: bool | None = None, rtol: float = 1e-9) -> TraceReport:
    """All trace constants for q together with the verdicts of their comparison chain.

    On a fixed family every set satisfies q(U) ≤ √(E cap) and E ≤ ‖√qΔ^{-1/2}‖² q(U), which gives
    C3 ≤ C5 ≤ C4 ≤ opnorm_sq = C1; on all subsets additionally C1 ≤ 4 C3.
    """
    q = _check_q(space, q)
    fam = family if isinstance(family, SetFamily) else build_family(space, q, family)
    sc = scan_family(space, q, fam)
    C1, op = trace_c1(space, q), opnorm_sq(space, q)
    C3, k3 = _sup(sc.qU, sc.caps)
    C4, k4 = _sup(sc.energy, sc.qU)
    C5sq, k5 = _sup(sc.energy, sc.caps)
    C5 = float(np.sqrt(C5sq))
    if exhaustive is None:
        exhaustive = space.n <= 12
    C3x = None
    verdicts = {
        "opnorm_sq=C1": abs(op - C1) <= rtol * max(C1, 1e-300) or (C1 == 0 and op == 0),
        "C3<=C5": _le(C3, C5, rtol),
        "C5<=C4": _le(C5, C4, rtol),
        "C4<=opnorm_sq": _le(C4, op, rtol),
        "C3_family<=C1": _le(C3, C1, rtol),
    }
    if exhaustive:
        ex = fam if fam.descriptor.startswith("exhaustive") else exhaustive_family(space)
        sx = sc if ex is fam else scan_family(space, q, ex)
        C3x = _sup(sx.qU, sx.caps)[0]
        verdicts["C3_exhaustive<=C1"] = _le(C3x, C1, rtol)
        verdicts["C1<=4*C3_exhaustive"] = _le(C1, 4 * C3x, rtol)
    argmax = {name: (fam.sets[k].tolist() if k >= 0 else []) for name, k in (("C3", k3), ("C4", k4), ("C5", k5))}
    consts = TraceConstants(C1, op, C3, C3x, C4, C5, fam.descriptor)
    return TraceReport(consts, verdicts, argmax)


# ---- sufficient conditions through radial averages ---------------------------------------------
def _radial_kernel(space: WeightedGraphSpace, nu_amb: float, R_cut=None, p: float = 0.0) -> np.ndarray:
    """K(x, y) = ∫_{d(x,y)}^∞ r^p dr / V(x, r) on all interior pairs."""
    if nu_amb <= 2:
        raise TailDiverges(f"radial averages need nu_amb > 2 (got {nu_amb:g})")
    prof = graph_volume_profile(space, np.arange(space.n), nu_amb, R_cut)
    dist = space.dist_rows(np.arange(space.n))
    return np.stack([prof.radial_integral(i, dist[i], p) for i in range(space.n)])


@dataclass(frozen=True)
class TraceFK:
    A: float  # sup_B ∫_B (K(q 1_B))² dμ / q(B)
    C1: float
    ratio: float  # C1 / A, the empirical factor in C1 ≤ Ĉ A
    worst_ball: tuple


def traceFK_sufficient(space: WeightedGraphSpace, q, ball_fam: SetFamily | None = None, nu_amb: float = 3.0,
                       R_cut=None) -> TraceFK:
    """Best A in ∫_B [∫₀^∞ ⨏_{B(x,r)} q1_B dμ dr]² dμ(x) ≤ A q(B) over a ball family."""
    q = _check_q(space, q)
    K = _radial_kernel(space, nu_amb, R_cut)
    fam = ball_family(space) if ball_fam is None else ball_fam
    mu = space.measure
    A, worst = 0.0, ()
    for U in fam.sets:
        gU = (mu * q)[U]
        qb = gU.sum()
        if qb <= 0:
            continue
        inner = K[np.ix_(U, U)] @ gU
        val = float(mu[U] @ inner**2 / qb)
        if val > A:
            A, worst = val, tuple(U.tolist())
    C1 = trace_c1(space, q)
    return TraceFK(A, C1, C1 / A if A > 0 else 0.0, worst)


@dataclass(frozen=True)
class TraceDP:
    C_ii: float  # max Δ^{-1/2}(Q²) / Q
    C_iii: float  # sup_B ∫_B |Δ^{-1/2}(q1_B)|² dμ / q(B)
    C_iv: float  # max K(Q̃²) / Q̃
    ratio_min: float  # min Q / Q̃
    ratio_max: float
    kernel_ratio_min: float  # bounds of Δ^{-1/2}(x,y) / K(x,y) over all pairs
    kernel_ratio_max: float

    @property
    def comparable(self) -> bool:
        tol = 1e-10
        return (self.ratio_min >= self.kernel_ratio_min * (1 - tol)
                and self.ratio_max <= self.kernel_ratio_max * (1 + tol))


def traceDP_conditions(space: WeightedGraphSpace, q, nu_amb: float = 3.0, ball_fam: SetFamily | None = None,
                       R_cut=None) -> TraceDP:
    """Pointwise conditions on Q = Δ^{-1/2}q and Q̃ = Kq, and their comparability.

    Q̃(x) = ∫₀^∞ ⨏_{B(x,r)} q dμ dr = Σ_y K(x,y) q(y) μ(y).  Since both Q and
    Q̃ are positive combinations of the same q μ, the ratio Q/Q̃ lies between
    the extreme kernel ratios, which is what ``comparable`` certifies.
    """
    q = _check_q(space, q)
    mu = space.measure
    K = _radial_kernel(space, nu_amb, R_cut)
    asm = assemble(space)
    H = asm.spectral.kernel(lambda lam: lam**-0.5)  # kernel of Δ^{-1/2}
    Q = H @ (mu * q)
    Qt = K @ (mu * q)
    supp = Q > 0
    if not supp.any():
        return TraceDP(0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0)
    C_ii = float(np.max((H @ (mu * Q**2))[supp] / Q[supp]))
    C_iv = float(np.max((K @ (mu * Qt**2))[supp] / Qt[supp]))
    fam = ball_family(space) if ball_fam is None else ball_fam
    C_iii = 0.0
    for U in fam.sets:
        g = np.zeros(space.n)
        g[U] = (mu * q)[U]
        if g.sum() <= 0:
            continue
        Hg = H[U] @ g
        C_iii = max(C_iii, float(mu[U] @ Hg**2 / g.sum()))
    kr = H / K
    rq = Q[supp] / Qt[supp]
    return TraceDP(C_ii, C_iii, C_iv, float(rq.min()), float(rq.max()), float(kr.min()), float(kr.max()))
