"""Weighted graphs with a Dirichlet boundary, metric balls, and volume-growth scans.

Conventions used across the package:

* A field on vertices is a float array indexed by *interior* vertex (length
  ``space.n``); boundary values are implicitly zero.
* Vertex sets (balls, test sets ``U``) are sorted arrays of interior indices.
* Edge fields are float arrays indexed by the active edges of the space (edges
  with both endpoints on the boundary are dropped when the space is built).
"""
from __future__ import annotations

import itertools
import json
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse import csgraph

from .errors import EmptyBoundary, NoAdmissibleBalls, PotlabError

# Above this many interior vertices the all-pairs metric is not cached.
FULL_METRIC_LIMIT = 6000


@dataclass(frozen=True, eq=False)
class WeightedGraphSpace:
    """Finite weighted graph; ``interior_mask[v] == False`` marks a Dirichlet vertex."""

    interior_mask: np.ndarray
    mu: np.ndarray  # per vertex, only interior entries are used
    edges: np.ndarray  # (E, 2) vertex ids, oriented u -> v
    weight: np.ndarray
    length: np.ndarray
    coords: np.ndarray | None = None
    labels: tuple | None = None
    metric_mode: str = "graph"

    def __post_init__(self):
        mask = np.asarray(self.interior_mask, dtype=bool)
        N = mask.size
        mu = np.asarray(self.mu, dtype=float).reshape(-1)
        if mu.size != N:
            raise PotlabError(f"mu has {mu.size} entries for {N} vertices")
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        w = np.broadcast_to(np.asarray(self.weight, dtype=float), (len(edges),)).copy()
        ell = np.broadcast_to(np.asarray(self.length, dtype=float), (len(edges),)).copy()
        if len(edges) and (edges.min() < 0 or edges.max() >= N):
            raise PotlabError("edge endpoint out of range")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise PotlabError("self-loops are not allowed")
        if np.any(~(w > 0)) or np.any(~np.isfinite(w)):
            raise PotlabError("conductances must be positive and finite")
        if np.any(~(ell > 0)) or np.any(~np.isfinite(ell)):
            raise PotlabError("edge lengths must be positive and finite")
        if np.any(~(mu[mask] > 0)) or np.any(~np.isfinite(mu[mask])):
            raise PotlabError("interior measure must be positive and finite")
        if not mask.any():
            raise PotlabError("space has no interior vertex")
        keep = mask[edges[:, 0]] | mask[edges[:, 1]]
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("interior_mask", mask)
        set_("mu", mu)
        set_("edges", edges[keep])
        set_("weight", w[keep])
        set_("length", ell[keep])
        if self.coords is not None:
            set_("coords", np.asarray(self.coords, dtype=float).reshape(N, -1))
        if self.labels is not None:
            set_("labels", tuple(self.labels))

    # ---- sizes and index maps -------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return self.interior_mask.size

    @cached_property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(self.interior_mask)

    @cached_property
    def boundary(self) -> np.ndarray:
        return np.flatnonzero(~self.interior_mask)

    @property
    def n(self) -> int:
        return self.interior.size

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def to_interior(self) -> np.ndarray:
        """Vertex id -> interior index (-1 on the boundary)."""
        idx = np.full(self.n_vertices, -1, dtype=np.int64)
        idx[self.interior] = np.arange(self.n)
        return idx

    @cached_property
    def measure(self) -> np.ndarray:
        """μ on interior vertices."""
        return self.mu[self.interior]

    @cached_property
    def edge_ends(self) -> tuple[np.ndarray, np.ndarray]:
        """Interior indices of edge tails and heads (-1 where the end is a boundary vertex)."""
        t = self.to_interior
        return t[self.edges[:, 0]], t[self.edges[:, 1]]

    @property
    def interior_coords(self) -> np.ndarray | None:
        return None if self.coords is None else self.coords[self.interior]

    # ---- metric ---------------------------------------------------------------
    @cached_property
    def _length_graph(self) -> sp.csr_matrix:
        N = self.n_vertices
        u, v = self.edges[:, 0], self.edges[:, 1]
        A = sp.coo_matrix((self.length, (u, v)), shape=(N, N)).tocsr()
        return A.maximum(A.T).tocsr()

    def dist_rows(self, sources) -> np.ndarray:
        """Distances from interior vertices ``sources`` to every interior vertex.

        Paths may pass through boundary vertices.
        """
        sources = np.atleast_1d(np.asarray(sources, dtype=np.int64))
        if "metric" in self.__dict__:
            return self.metric[sources]
        out = np.empty((sources.size, self.n))
        for lo in range(0, sources.size, 512):
            chunk = self.interior[sources[lo:lo + 512]]
            D = csgraph.dijkstra(self._length_graph, directed=False, indices=chunk)
            out[lo:lo + 512] = D[:, self.interior]
        return out

    @cached_property
    def metric(self) -> np.ndarray:
        if self.n > FULL_METRIC_LIMIT:
            raise PotlabError(f"all-pairs metric not cached above {FULL_METRIC_LIMIT} interior vertices; use dist_rows")
        return self.dist_rows(np.arange(self.n))

    @cached_property
    def boundary_distance(self) -> np.ndarray:
        """Distance from each interior vertex to the nearest boundary vertex (inf if none)."""
        if self.boundary.size == 0:
            return np.full(self.n, np.inf)
        D = csgraph.dijkstra(self._length_graph, directed=False, indices=self.boundary, min_only=True)
        return D[self.interior]

    def inner_region(self, fraction: float = 0.5) -> np.ndarray:
        """Interior vertices at least ``fraction`` of the maximal depth away from the boundary."""
        bd = self.boundary_distance
        return np.flatnonzero(bd >= fraction * bd.max())

    # ---- structure checks -----------------------------------------------------
    @cached_property
    def _components(self) -> tuple[int, np.ndarray]:
        a, b = self.edge_ends
        m = (a >= 0) & (b >= 0)
        n = self.n
        A = sp.coo_matrix((np.ones(m.sum()), (a[m], b[m])), shape=(n, n))
        return csgraph.connected_components(A, directed=False)

    @cached_property
    def touches_boundary(self) -> np.ndarray:
        a, b = self.edge_ends
        hit = np.zeros(self.n, dtype=bool)
        hit[a[b < 0]] = True
        hit[b[a < 0]] = True
        return hit

    def require_boundary(self) -> None:
        """Raise EmptyBoundary unless every interior component reaches the boundary."""
        if self.boundary.size == 0 or not self.touches_boundary.any():
            raise EmptyBoundary("space has no Dirichlet boundary; Green-based operations are undefined")
        ncomp, lab = self._components
        reached = np.zeros(ncomp, dtype=bool)
        reached[lab[self.touches_boundary]] = True
        if not reached.all():
            raise EmptyBoundary(f"{int((~reached).sum())} interior component(s) do not reach the boundary")

    @property
    def is_nonparabolic(self) -> bool:
        try:
            self.require_boundary()
        except EmptyBoundary:
            return False
        return True

    def vertex_ids(self, interior_idx) -> list:
        """Labels of interior vertices (for reports)."""
        verts = self.interior[np.asarray(interior_idx, dtype=np.int64)]
        if self.labels is None:
            return [int(v) for v in verts]
        return [self.labels[v] for v in verts]

    def center_vertex(self) -> int:
        """Interior index closest to the coordinate centroid (or deepest vertex without coords)."""
        if self.coords is None:
            return int(np.argmax(self.boundary_distance))
        c = self.interior_coords
        mid = (self.coords.min(axis=0) + self.coords.max(axis=0)) / 2
        return int(np.lexsort((np.arange(self.n), np.linalg.norm(c - mid, axis=1)))[0])

    # ---- serialization --------------------------------------------------------
    def to_dict(self) -> dict:
        labels = list(self.labels) if self.labels is not None else list(range(self.n_vertices))
        doc = {
            "vertices": labels,
            "interior_mask": [bool(b) for b in self.interior_mask],
            "mu": [float(m) if b else 0.0 for m, b in zip(self.mu, self.interior_mask)],
            "edges": [
                {"u": labels[u], "v": labels[v], "w": float(w), "len": float(ell)}
                for (u, v), w, ell in zip(self.edges.tolist(), self.weight, self.length)
            ],
            "metric_mode": self.metric_mode,
        }
        if self.coords is not None:
            doc["coords"] = self.coords.tolist()
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "WeightedGraphSpace":
        try:
            labels = list(doc["vertices"])
            index = {lab: i for i, lab in enumerate(labels)}
            edges = [(index[e["u"]], index[e["v"]]) for e in doc["edges"]]
            w = [float(e.get("w", 1.0)) for e in doc["edges"]]
            ell = [float(e.get("len", 1.0)) for e in doc["edges"]]
            mask = np.asarray(doc["interior_mask"], dtype=bool)
            mu = np.asarray(doc["mu"], dtype=float)
        except (KeyError, TypeError) as exc:
            raise PotlabError(f"malformed space document: {exc!r}") from exc
        coords = doc.get("coords")
        return cls(
            interior_mask=mask,
            mu=np.where(mask, mu, 0.0),
            edges=np.asarray(edges, dtype=np.int64).reshape(-1, 2),
            weight=np.asarray(w),
            length=np.asarray(ell),
            coords=None if coords is None else np.asarray(coords, dtype=float),
            labels=None if labels == list(range(len(labels))) else tuple(labels),
            metric_mode=doc.get("metric_mode", "graph"),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True))

    @classmethod
    def load(cls, path) -> "WeightedGraphSpace":
        return cls.from_dict(json.loads(Path(path).read_text()))


def build_grid_space(dim: int, side: int, dirichlet_shell: bool = True) -> WeightedGraphSpace:
    """Integer box ``{0..side-1}^dim`` with unit data; the outer layer is boundary if requested."""
    if dim not in (1, 2, 3):
        raise PotlabError(f"dim must be 1, 2 or 3 (got {dim})")
    if side < 3:
        raise PotlabError(f"side must be at least 3 (got {side})")
    shape = (side,) * dim
    coords = np.stack(np.unravel_index(np.arange(side**dim), shape), axis=1)
    ids = np.arange(side**dim).reshape(shape)
    edges = []
    for ax in range(dim):
        lo = [slice(None)] * dim
        hi = [slice(None)] * dim
        lo[ax] = slice(0, side - 1)
        hi[ax] = slice(1, side)
        edges.append(np.stack([ids[tuple(lo)].ravel(), ids[tuple(hi)].ravel()], axis=1))
    edges = np.concatenate(edges)
    if dirichlet_shell:
        mask = np.all((coords > 0) & (coords < side - 1), axis=1)
    else:
        mask = np.ones(side**dim, dtype=bool)
    return WeightedGraphSpace(
        interior_mask=mask,
        mu=mask.astype(float),
        edges=edges,
        weight=1.0,
        length=1.0,
        coords=coords.astype(float),
        metric_mode="graph",
    )


def path_space(n_interior: int, mu=1.0, weight=1.0) -> WeightedGraphSpace:
    """Path with ``n_interior`` interior vertices and one boundary vertex at each end."""
    N = n_interior + 2
    mask = np.ones(N, dtype=bool)
    mask[[0, -1]] = False
    mu_v = np.zeros(N)
    mu_v[1:-1] = mu
    edges = np.stack([np.arange(N - 1), np.arange(1, N)], axis=1)
    return WeightedGraphSpace(mask, mu_v, edges, weight, 1.0, coords=np.arange(N, dtype=float)[:, None])


def random_graph_space(n_interior: int, n_boundary: int, p: float, rng: np.random.Generator,
                       mu_range=(0.5, 2.0), w_range=(0.5, 2.0)) -> WeightedGraphSpace:
    """Random connected graph: a random spanning tree plus Erdős–Rényi extras; every boundary
    vertex is attached to at least one interior vertex."""
    n = n_interior
    order = rng.permutation(n)
    edges = {tuple(sorted((int(order[i]), int(order[rng.integers(i)])))) for i in range(1, n)}
    for i, j in itertools.combinations(range(n), 2):
        if rng.random() < p:
            edges.add((i, j))
    for b in range(n, n + n_boundary):
        k = 1 + rng.integers(2)
        for i in rng.choice(n, size=min(k, n), replace=False):
            edges.add((int(i), b))
    edges = np.array(sorted(edges), dtype=np.int64)
    mask = np.arange(n + n_boundary) < n
    mu = np.where(mask, rng.uniform(*mu_range, size=n + n_boundary), 0.0)
    w = rng.uniform(*w_range, size=len(edges))
    return WeightedGraphSpace(mask, mu, edges, w, 1.0)


# ---- balls ---------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class Ball:
    center: int
    radius: float
    members: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.members.size


def ball(space: WeightedGraphSpace, center: int, radius: float, dist_row: np.ndarray | None = None) -> Ball:
    """Closed ball of interior vertices around an interior vertex."""
    row = space.dist_rows([center])[0] if dist_row is None else dist_row
    return Ball(int(center), float(radius), np.flatnonzero(row <= radius))


def balls(space: WeightedGraphSpace, centers, radii) -> list[Ball]:
    centers = np.asarray(centers, dtype=np.int64)
    rows = space.dist_rows(centers)
    return [ball(space, c, r, row) for c, row in zip(centers, rows) for r in radii]


def balls_within(space: WeightedGraphSpace, region, radii, centers=None) -> list[Ball]:
    """Closed balls whose members all lie in ``region`` (interior indices).

    Centers default to the region itself. Balls sticking out of the region are
    skipped; raises NoAdmissibleBalls if nothing is left.
    """
    region = np.asarray(region, dtype=np.int64)
    inside = np.zeros(space.n, dtype=bool)
    inside[region] = True
    centers = region if centers is None else np.asarray(centers, dtype=np.int64)
    rows = space.dist_rows(centers)
    out = []
    for c, row in zip(centers, rows):
        for r in radii:
            mem = np.flatnonzero(row <= r)
            # the ball must also not reach the boundary through a shorter route
            if inside[mem].all() and space.boundary_distance[c] > r:
                out.append(Ball(int(c), float(r), mem))
    if not out:
        raise NoAdmissibleBalls("no ball of the requested radii fits in the region")
    return out


def distinct_radii(space: WeightedGraphSpace, centers=None, positive: bool = True) -> np.ndarray:
    """Sorted distinct distances from ``centers`` (all interior vertices by default)."""
    centers = np.arange(space.n) if centers is None else centers
    r = np.unique(np.round(space.dist_rows(centers), 12))
    return r[r > 0] if positive else r


# ---- doubling ------------------------------------------------------------------
@dataclass(frozen=True)
class DoublingProfile:
    kappa: float
    nu: float
    gamma: float
    nu_fitted: bool = False
    lambda_poincare: float | None = None
    fk_b: float | None = None

    def with_(self, **kw) -> "DoublingProfile":
        from dataclasses import replace
        return replace(self, **kw)


def ball_masses(space: WeightedGraphSpace, centers, radii) -> np.ndarray:
    """Matrix V[i, j] = μ(B(centers[i], radii[j]))."""
    rows = space.dist_rows(centers)
    mu = space.measure
    radii = np.asarray(radii, dtype=float)
    return np.stack([(mu[None, :] * (rows <= r)).sum(axis=1) for r in radii], axis=1)


def fit_volume_exponent(radii, masses) -> float:
    """Least-squares slope of log V against log r over every (center, radius) sample."""
    radii = np.asarray(radii, dtype=float)
    x = np.broadcast_to(np.log(radii), masses.shape).ravel()
    y = np.log(masses).ravel()
    A = np.stack([x, np.ones_like(x)], axis=1)
    slope, _ = np.linalg.lstsq(A, y, rcond=None)[0]
    return float(slope)


def doubling_kappa(radii, masses, nu: float) -> float:
    """Smallest κ with V(R) ≤ κ (R/r)^ν V(r) for all scanned r ≤ R on every row."""
    radii = np.asarray(radii, dtype=float)
    logV = np.log(masses)
    logr = np.log(radii)
    # pairwise over radius indices: log V(R) - log V(r) - ν (log R - log r)
    diff = logV[:, None, :] - logV[:, :, None] - nu * (logr[None, :] - logr[:, None])[None]
    iu = np.triu_indices(radii.size)
    return float(max(1.0, np.exp(diff[:, iu[0], iu[1]].max())))


def estimate_doubling(space: WeightedGraphSpace, radii_grid, nu: float | None = None, centers=None) -> DoublingProfile:
    radii = np.asarray(radii_grid, dtype=float)
    if radii.size == 0 or np.any(radii <= 0) or np.any(np.diff(radii) < 0):
        raise PotlabError("radii_grid must be nonempty, positive and sorted")
    centers = np.arange(space.n) if centers is None else np.asarray(centers)
    masses = ball_masses(space, centers, radii)
    fitted = nu is None
    if fitted:
        nu = fit_volume_exponent(radii, masses) if radii.size > 1 else 1.0
    kappa = doubling_kappa(radii, masses, nu)
    return DoublingProfile(kappa=kappa, nu=float(nu), gamma=kappa * 2.0**nu, nu_fitted=fitted)


# ---- Poincaré ------------------------------------------------------------------
def _ball_stiffness(space: WeightedGraphSpace, members: np.ndarray) -> np.ndarray:
    """Dense Neumann stiffness of the subgraph induced by ``members`` (interior indices)."""
    a, b = space.edge_ends
    loc = np.full(space.n + 1, -1, dtype=np.int64)  # slot -1 maps boundary ends to -1
    loc[members] = np.arange(members.size)
    la, lb = loc[a], loc[b]
    m = (la >= 0) & (lb >= 0)
    c = space.weight[m] / space.length[m]
    k = members.size
    L = np.zeros((k, k))
    np.add.at(L, (la[m], lb[m]), -c)
    np.add.at(L, (lb[m], la[m]), -c)
    np.add.at(L, (la[m], la[m]), c)
    np.add.at(L, (lb[m], lb[m]), c)
    return L


@dataclass(frozen=True)
class PoincareResult:
    lam: float
    worst: Ball | None
    per_ball: np.ndarray  # λ contribution of each scanned ball
    disconnected: list = field(default_factory=list)


def ball_poincare(space: WeightedGraphSpace, B: Ball) -> float:
    """Largest ratio of the mean-zero mass form to the ball energy, divided by r²."""
    k = B.size
    if k <= 1:
        return 0.0
    L = _ball_stiffness(space, B.members)
    mu = space.measure[B.members]
    # generalized eigenvalues of (L, M); the first is 0 (constants), the second is the gap
    vals = sla.eigh(L, np.diag(mu), eigvals_only=True, subset_by_index=[0, 1])
    gap = vals[1]
    if gap <= 1e-12 * max(1.0, np.abs(np.diag(L)).max() / mu.min()):
        return np.inf
    return 1.0 / (gap * max(B.radius, 1e-300) ** 2)


def estimate_poincare(space: WeightedGraphSpace, radii_grid, centers=None) -> PoincareResult:
    centers = np.arange(space.n) if centers is None else np.asarray(centers)
    family = balls(space, centers, radii_grid)
    vals = np.array([ball_poincare(space, B) for B in family])
    bad = [B for B, v in zip(family, vals) if np.isinf(v)]
    i = int(np.argmax(vals))
    return PoincareResult(float(vals[i]), family[i], vals, bad)


def poincare_holds(space: WeightedGraphSpace, B: Ball, lam: float, phi: np.ndarray) -> float:
    """Margin λ r² E_B(φ) − Σ_B μ(φ−φ_B)² for one test field on the ball (≥ 0 when it holds)."""
    f = phi[B.members]
    mu = space.measure[B.members]
    var = float(mu @ (f - (mu @ f) / mu.sum()) ** 2)
    energy = float(f @ _ball_stiffness(space, B.members) @ f)
    return lam * B.radius**2 * energy - var


# ---- Dirichlet eigenvalues and Faber–Krahn --------------------------------------
def dirichlet_lambda1(space: WeightedGraphSpace, U) -> float:
    """Lowest eigenvalue of Δ on fields vanishing outside ``U`` (interior indices)."""
    from .calculus import assemble

    U = np.unique(np.asarray(U, dtype=np.int64))
    if U.size == 0:
        raise PotlabError("U must be nonempty")
    asm = assemble(space)
    L = asm.L[U][:, U]
    mu = space.measure[U]
    if U.size <= 1500:
        return float(sla.eigh(L.toarray(), np.diag(mu), eigvals_only=True, subset_by_index=[0, 0])[0])
    from scipy.sparse.linalg import eigsh

    v0 = np.ones(U.size)
    val = eigsh(L.tocsc(), k=1, M=sp.diags(mu).tocsc(), sigma=0, which="LM", v0=v0, return_eigenvectors=False)
    return float(val[0])


def grow_connected_subset(space: WeightedGraphSpace, members: np.ndarray, target: int,
                          rng: np.random.Generator) -> np.ndarray:
    """Random connected subset of ``members`` grown breadth-first from a random seed vertex."""
    allowed = np.zeros(space.n, dtype=bool)
    allowed[members] = True
    adj = _interior_adjacency(space)
    start = int(rng.choice(members))
    chosen = [start]
    seen = {start}
    frontier = deque([start])
    while frontier and len(chosen) < target:
        v = frontier.popleft()
        nbrs = adj.indices[adj.indptr[v]:adj.indptr[v + 1]]
        for u in rng.permutation(nbrs):
            u = int(u)
            if allowed[u] and u not in seen:
                seen.add(u)
                chosen.append(u)
                frontier.append(u)
                if len(chosen) >= target:
                    break
    return np.sort(np.asarray(chosen, dtype=np.int64))


def _interior_adjacency(space: WeightedGraphSpace) -> sp.csr_matrix:
    a, b = space.edge_ends
    m = (a >= 0) & (b >= 0)
    n = space.n
    A = sp.coo_matrix((np.ones(m.sum()), (a[m], b[m])), shape=(n, n)).tocsr()
    return (A + A.T).tocsr()


@dataclass(frozen=True)
class FaberKrahnResult:
    b: float
    worst_ball: Ball
    worst_subset: np.ndarray


def check_faber_krahn(space: WeightedGraphSpace, profile: DoublingProfile, ball_family, subsets_per_ball: int = 32,
                      seed: int = 0) -> FaberKrahnResult:
    """Largest b with b r⁻² (μ(U)/μ(B))^{-2/ν} ≤ λ₁(U) over sampled connected U ⊆ B (U = B included)."""
    rng = np.random.default_rng(seed)
    nu = profile.nu
    best = (np.inf, None, None)
    for B in ball_family:
        muB = space.measure[B.members].sum()
        subsets = [B.members]
        for _ in range(subsets_per_ball):
            subsets.append(grow_connected_subset(space, B.members, int(rng.integers(1, B.size + 1)), rng))
        for U in subsets:
            ratio = space.measure[U].sum() / muB
            b = B.radius**2 * dirichlet_lambda1(space, U) * ratio ** (2.0 / nu)
            if b < best[0]:
                best = (b, B, U)
    if best[1] is None:
        raise NoAdmissibleBalls("empty ball family")
    return FaberKrahnResult(float(best[0]), best[1], best[2])
