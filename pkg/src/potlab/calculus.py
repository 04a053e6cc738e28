"""Discrete exterior calculus on a WeightedGraphSpace.

Edge e = (u -> v) carries ``dφ(e) = (φ_v - φ_u) / ℓ_e`` and the edge inner
product ``<α, β> = Σ_e w_e ℓ_e α_e β_e``.  With ``D`` the matrix of ``d`` this
gives the stiffness ``L = Dᵀ diag(wℓ) D`` (energy ``Σ (w/ℓ)(φ_u - φ_v)²``),
``Δ = M⁻¹ L`` and ``d*_μ β = M⁻¹ Dᵀ diag(wℓ) β``.
"""
from __future__ import annotations

import warnings
import weakref
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, eigsh, expm_multiply, splu

from .errors import PotlabError, TailDiverges
from .kernelcloud import VolumeProfile
from .space import WeightedGraphSpace

DENSE_LIMIT = 4000
_CACHE: "weakref.WeakKeyDictionary[WeightedGraphSpace, Assembly]" = weakref.WeakKeyDictionary()


@dataclass(eq=False)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenfields: np.ndarray  # columns, μ-orthonormal
    mu: np.ndarray

    def apply(self, g, f: np.ndarray) -> np.ndarray:
        """Σ_k g(λ_k) <f, u_k>_μ u_k for a vectorised spectral multiplier ``g``."""
        U = self.eigenfields
        coef = U.T @ (self.mu * f) if f.ndim == 1 else U.T @ (self.mu[:, None] * f)
        gl = g(self.eigenvalues)
        return U @ (gl * coef if f.ndim == 1 else gl[:, None] * coef)

    def kernel(self, g) -> np.ndarray:
        """Dense kernel Σ_k g(λ_k) u_k(x) u_k(y)."""
        U = self.eigenfields
        return (U * g(self.eigenvalues)) @ U.T


class Assembly:
    """Sparse operators of a space plus lazily cached factorizations."""

    def __init__(self, space: WeightedGraphSpace):
        self.space = space
        a, b = space.edge_ends
        E, n = space.n_edges, space.n
        inv_len = 1.0 / space.length
        rows = np.concatenate([np.arange(E)[b >= 0], np.arange(E)[a >= 0]])
        cols = np.concatenate([b[b >= 0], a[a >= 0]])
        vals = np.concatenate([inv_len[b >= 0], -inv_len[a >= 0]])
        self.D = sp.csr_matrix((vals, (rows, cols)), shape=(E, n))
        self.edge_ip = space.weight * space.length
        self.mu = space.measure
        L = (self.D.T @ sp.diags(self.edge_ip) @ self.D).tocsc()
        L.sum_duplicates()
        self.L = ((L + L.T) * 0.5).tocsc()

    @cached_property
    def lu(self):
        self.space.require_boundary()
        return splu(self.L, permc_spec="MMD_AT_PLUS_A")

    def solve_L(self, rhs: np.ndarray) -> np.ndarray:
        """L⁻¹ rhs (columns allowed)."""
        return self.lu.solve(np.asarray(rhs, dtype=float))

    @cached_property
    def spectral(self) -> SpectralDecomposition:
        self.space.require_boundary()
        n = self.space.n
        if n > DENSE_LIMIT:
            raise PotlabError(f"full spectral decomposition limited to {DENSE_LIMIT} interior vertices (n={n})")
        s = 1.0 / np.sqrt(self.mu)
        S = self.L.toarray() * s[:, None] * s[None, :]
        lam, V = sla.eigh(S)
        return SpectralDecomposition(lam, V * s[:, None], self.mu)

    @property
    def dense_ok(self) -> bool:
        return self.space.n <= DENSE_LIMIT

    @cached_property
    def green_matrix(self) -> np.ndarray:
        """G = L⁻¹ as a dense matrix (so that u = G (μ f) solves Δu = f)."""
        if not self.dense_ok:
            raise PotlabError(f"dense Green matrix limited to {DENSE_LIMIT} interior vertices; use green_columns")
        return self.spectral.kernel(lambda lam: 1.0 / lam)

    @cached_property
    def laplacian(self) -> sp.csr_matrix:
        return (sp.diags(1.0 / self.mu) @ self.L).tocsr()


def assemble(space: WeightedGraphSpace) -> Assembly:
    asm = _CACHE.get(space)
    if asm is None:
        asm = Assembly(space)
        _CACHE[space] = asm
    return asm


# ---- first-order operators ---------------------------------------------------------
def d(space: WeightedGraphSpace, phi: np.ndarray) -> np.ndarray:
    return assemble(space).D @ np.asarray(phi, dtype=float)


def codiff(space: WeightedGraphSpace, beta: np.ndarray) -> np.ndarray:
    """d*_μ, the adjoint of d between the edge inner product and ℓ²(μ)."""
    asm = assemble(space)
    return (asm.D.T @ (asm.edge_ip * np.asarray(beta, dtype=float))) / asm.mu


def edge_inner(space: WeightedGraphSpace, a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sum(space.weight * space.length * a * b))


def mu_inner(space: WeightedGraphSpace, f: np.ndarray, g: np.ndarray) -> float:
    return float(np.sum(space.measure * f * g))


def energy(space: WeightedGraphSpace, phi: np.ndarray) -> float:
    """‖dφ‖² in the edge inner product."""
    g = d(space, phi)
    return edge_inner(space, g, g)


def laplacian(space: WeightedGraphSpace) -> sp.csr_matrix:
    """Sparse matrix of Δ = M⁻¹L on interior fields."""
    return assemble(space).laplacian


def spectral(space: WeightedGraphSpace) -> SpectralDecomposition:
    return assemble(space).spectral


def smallest_eigenvalue(space: WeightedGraphSpace) -> float:
    asm = assemble(space)
    if asm.dense_ok:
        return float(asm.spectral.eigenvalues[0])
    val = eigsh(asm.L, k=1, M=sp.diags(asm.mu).tocsc(), sigma=0, which="LM",
                v0=np.ones(space.n), return_eigenvectors=False)
    return float(val[0])


# ---- semigroup, Green operator, fractional powers ------------------------------------
def heat(space: WeightedGraphSpace, t: float, f: np.ndarray) -> np.ndarray:
    """e^{-tΔ} f."""
    if t < 0:
        raise PotlabError("heat semigroup needs t >= 0")
    f = np.asarray(f, dtype=float)
    if t == 0:
        return f.copy()
    asm = assemble(space)
    if asm.dense_ok:
        return asm.spectral.apply(lambda lam: np.exp(-t * lam), f)
    return expm_multiply(-t * asm.laplacian, f)


def heat_kernel(space: WeightedGraphSpace, t: float, x, y) -> np.ndarray:
    """P(t, x, y) for index arrays x, y (broadcast); e^{-tΔ}f(x) = Σ_y P(t,x,y) f(y) μ(y)."""
    if t < 0:
        raise PotlabError("heat kernel needs t >= 0")
    x, y = np.broadcast_arrays(np.asarray(x), np.asarray(y))
    asm = assemble(space)
    if asm.dense_ok:
        U = asm.spectral.eigenfields
        e = np.exp(-t * asm.spectral.eigenvalues)
        return np.einsum("...k,k,...k->...", U[x], e, U[y])
    out = np.empty(x.shape)
    for yy in np.unique(y):
        delta = np.zeros(space.n)
        delta[yy] = 1.0 / asm.mu[yy]
        col = heat(space, t, delta)
        out[y == yy] = col[x[y == yy]]
    return out


def green(space: WeightedGraphSpace) -> np.ndarray:
    """Dense Green kernel G(x, y)."""
    return assemble(space).green_matrix


def green_columns(space: WeightedGraphSpace, cols) -> np.ndarray:
    """Columns G[:, cols] via the cached sparse factorization."""
    asm = assemble(space)
    cols = np.atleast_1d(np.asarray(cols, dtype=np.int64))
    if "green_matrix" in asm.__dict__:
        return asm.green_matrix[:, cols]
    E = np.zeros((space.n, cols.size))
    E[cols, np.arange(cols.size)] = 1.0
    return asm.solve_L(E)


def green_apply(space: WeightedGraphSpace, f: np.ndarray) -> np.ndarray:
    """Solve Δu = f (Dirichlet data 0)."""
    asm = assemble(space)
    return asm.solve_L(asm.mu * np.asarray(f, dtype=float))


def frac_power_apply(space: WeightedGraphSpace, s: float, f: np.ndarray) -> np.ndarray:
    """Δ^s f for s in [-1, 1]."""
    if not -1.0 <= s <= 1.0:
        raise PotlabError("fractional power must lie in [-1, 1]")
    f = np.asarray(f, dtype=float)
    if s == 0:
        return f.copy()
    if s == -1:
        return green_apply(space, f)
    if s == 1:
        return laplacian(space) @ f
    asm = assemble(space)
    if asm.dense_ok:
        return asm.spectral.apply(lambda lam: lam**s, f)
    return _lanczos_function(space, lambda lam: lam**s, f)


def _lanczos_function(space: WeightedGraphSpace, g, f: np.ndarray, tol: float = 1e-12, max_steps: int = 400) -> np.ndarray:
    """g(Δ) f by Lanczos on the μ-symmetrised operator with full reorthogonalisation."""
    asm = assemble(space)
    s = np.sqrt(asm.mu)
    A = sp.diags(1 / s) @ asm.L @ sp.diags(1 / s)
    b = s * f
    nb = np.linalg.norm(b)
    if nb == 0:
        return np.zeros_like(f)
    Q = [b / nb]
    alpha, beta = [], []
    prev = None
    for k in range(max_steps):
        w = A @ Q[-1]
        alpha.append(Q[-1] @ w)
        w -= alpha[-1] * Q[-1] + (beta[-1] * Q[-2] if beta else 0)
        Qm = np.array(Q)
        w -= Qm.T @ (Qm @ w)
        T = np.diag(alpha) + np.diag(beta, 1) + np.diag(beta, -1)
        lam, V = np.linalg.eigh(T)
        approx = nb * (Qm.T @ (V @ (g(lam) * V[0])))
        if prev is not None and np.linalg.norm(approx - prev) <= tol * np.linalg.norm(approx):
            break
        prev = approx
        bn = np.linalg.norm(w)
        if bn < 1e-14 * nb:
            break
        beta.append(bn)
        Q.append(w / bn)
    return approx / s


# ---- Hodge projector ------------------------------------------------------------------
def hodge_potential(space: WeightedGraphSpace, beta: np.ndarray) -> np.ndarray:
    """φ solving Δφ = d*_μ β."""
    asm = assemble(space)
    return asm.solve_L(asm.D.T @ (asm.edge_ip * np.asarray(beta, dtype=float)))


def hodge_project(space: WeightedGraphSpace, beta: np.ndarray) -> np.ndarray:
    """Π β = d Δ⁻¹ d*_μ β, the orthogonal projection onto exact edge fields."""
    return assemble(space).D @ hodge_potential(space, beta)


def hodge_matrix(space: WeightedGraphSpace) -> np.ndarray:
    """Dense Π (small spaces; test oracle)."""
    asm = assemble(space)
    G = np.linalg.inv(asm.L.toarray())
    Dd = asm.D.toarray()
    return Dd @ G @ Dd.T * asm.edge_ip[None, :]


# ---- weighted operator norms ----------------------------------------------------------
@dataclass(frozen=True)
class NormEstimate:
    value: float
    iterations: int
    converged: bool


def weighted_op_norm(apply, ip_weight: np.ndarray, omega: np.ndarray, *, adjoint=None, tol: float = 1e-9,
                     max_iter: int = 100_000, seed: int = 0, method: str = "power") -> NormEstimate:
    """Norm of ``apply`` on ℓ²(ω · ip_weight).

    ``ip_weight`` is the measure of the unweighted inner product (μ on
    vertices, wℓ on edges).  ``adjoint`` is the adjoint of ``apply`` in the
    unweighted inner product; omit it for self-adjoint operators.  In
    orthonormal coordinates the operator is X = Ω^{1/2} T Ω^{-1/2} and we
    iterate on X*X.
    """
    omega = np.asarray(omega, dtype=float)
    ipw = np.asarray(ip_weight, dtype=float)
    if np.any(~(omega > 0)):
        raise PotlabError("weight must be positive")
    adjoint = apply if adjoint is None else adjoint
    r = np.sqrt(omega * ipw)  # orthonormal coordinate scaling

    def X(y):
        return r * apply(y / r)

    def Xt(z):
        # Euclidean transpose of X: Tᵀ = diag(ipw) T* diag(ipw)⁻¹
        return ipw * adjoint(r * z / ipw) / r

    def XtX(y):
        return Xt(X(y))

    n = omega.size
    rng = np.random.default_rng(seed)
    if method == "lanczos":
        op = LinearOperator((n, n), matvec=XtX, dtype=float)
        val = eigsh(op, k=1, which="LA", v0=rng.standard_normal(n) + 1.0, tol=tol * 1e-2,
                    return_eigenvectors=False, maxiter=max_iter)
        return NormEstimate(float(np.sqrt(max(val[0], 0.0))), -1, True)
    if method != "power":
        raise PotlabError(f"unknown norm method {method!r}")
    v = rng.standard_normal(n) + 1.0
    v /= np.linalg.norm(v)
    rho = 0.0
    for it in range(1, max_iter + 1):
        w = XtX(v)
        rho_new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0:
            return NormEstimate(0.0, it, True)
        v = w / nw
        if abs(rho_new - rho) <= tol * abs(rho_new):
            return NormEstimate(float(np.sqrt(max(rho_new, 0.0))), it, True)
        rho = rho_new
    warnings.warn("power iteration hit its cap; returning a lower bound", RuntimeWarning, stacklevel=2)
    return NormEstimate(float(np.sqrt(max(rho, 0.0))), max_iter, False)


# ---- generalized eigenvalues against the stiffness ---------------------------------------
def edge_lift(space: WeightedGraphSpace, omega: np.ndarray) -> np.ndarray:
    """Vertex weight -> edge weight: geometric mean on interior edges, the interior
    endpoint's value on edges that touch the boundary."""
    omega = np.asarray(omega, dtype=float)
    a, b = space.edge_ends
    wa = np.where(a >= 0, omega[np.clip(a, 0, None)], np.nan)
    wb = np.where(b >= 0, omega[np.clip(b, 0, None)], np.nan)
    both = (a >= 0) & (b >= 0)
    return np.where(both, np.sqrt(np.where(both, wa * wb, 1.0)), np.where(a >= 0, wa, wb))


def weighted_stiffness(space: WeightedGraphSpace, edge_weight: np.ndarray) -> sp.csc_matrix:
    """Dᵀ diag(wℓ ω_e) D: the stiffness of the ω-weighted Dirichlet energy."""
    asm = assemble(space)
    K = (asm.D.T @ sp.diags(asm.edge_ip * edge_weight) @ asm.D).tocsc()
    return ((K + K.T) * 0.5).tocsc()


def generalized_top(space: WeightedGraphSpace, a: np.ndarray, stiffness=None, which: str = "LA",
                    dense_limit: int = 600) -> float:
    """Extreme eigenvalue of diag(a) x = λ K x, where K is the stiffness (default L).

    ``which='LA'`` gives the largest, ``'LM'`` the largest in magnitude
    (returned with its sign).  Equivalently sup of Σ a φ² / φᵀKφ.
    """
    a = np.asarray(a, dtype=float)
    if not np.any(a):
        return 0.0
    asm = assemble(space)
    K = asm.L if stiffness is None else stiffness
    n = space.n
    if n <= dense_limit:
        vals = sla.eigh(np.diag(a), K.toarray(), eigvals_only=True)
        return float(vals[-1] if which == "LA" else vals[np.argmax(np.abs(vals))])
    lu = asm.lu if stiffness is None else splu(K.tocsc(), permc_spec="MMD_AT_PLUS_A")
    Minv = LinearOperator((n, n), matvec=lu.solve, dtype=float)
    v0 = np.ones(n)
    vals = eigsh(sp.diags(a).tocsr(), k=1, M=K, Minv=Minv, which=which, v0=v0, tol=1e-13,
                 return_eigenvectors=False)
    return float(vals[0])


# ---- volume profiles and kernel estimates ---------------------------------------------
def graph_volume_profile(space: WeightedGraphSpace, sources, nu_amb: float, R_cut=None) -> VolumeProfile:
    """Ball masses around interior ``sources`` with a power-law tail of exponent ``nu_amb``.

    The empirical part of each source runs up to its own cut radius, by
    default one less than its distance to the boundary (at least 1), so that
    no empirical ball is truncated by the Dirichlet shell.
    """
    sources = np.atleast_1d(np.asarray(sources, dtype=np.int64))
    if R_cut is None:
        R_cut = np.maximum(space.boundary_distance[sources] - 1.0, 1.0)
        R_cut = np.where(np.isfinite(R_cut), R_cut, np.inf)
        if np.any(~np.isfinite(R_cut)):
            raise PotlabError("R_cut must be given on spaces without a boundary")
    return VolumeProfile(space.dist_rows(sources), space.measure, R_cut, nu_amb)


@dataclass(frozen=True)
class GaussianBounds:
    c: float  # largest c with c/V(x,√t) e^{-d²/(ct)} ≤ P(t,x,y)
    C: float  # smallest C with P(t,x,y) ≤ C/V(x,√t) e^{-d²/(5t)}
    c_ball: float  # largest c′ with c′/V(x,√t) ≤ P(t,x,y) whenever d(x,y) ≤ √t
    t_range: tuple  # (min, max) of the scanned times after clipping to diam²
    n_samples: int


def check_gaussian_bounds(space: WeightedGraphSpace, profile: VolumeProfile, t_grid, pairs) -> GaussianBounds:
    """Best constants of the two-sided Gaussian heat-kernel bounds over sampled pairs and times.

    ``pairs`` holds (source index into ``profile``, x, y) triples of which x is
    the interior vertex the profile source refers to.  Times beyond diam² are
    dropped since the Dirichlet decay e^{-λ₁t} takes over there.
    """
    from scipy.special import lambertw

    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid <= 0):
        raise PotlabError("t_grid must be positive")
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 3)
    src, x, y = pairs.T
    dist = space.dist_rows(np.unique(x))
    row_of = {v: k for k, v in enumerate(np.unique(x))}
    d = np.array([dist[row_of[a], b] for a, b in zip(x, y)])
    diam2 = float(np.max(dist[np.isfinite(dist)])) ** 2
    ts = t_grid[t_grid <= max(diam2, t_grid.min())]
    c = C = c_ball = np.inf
    C = 0.0
    for t in ts:
        P = heat_kernel(space, t, x, y)
        V = np.array([float(profile.volume(i, np.sqrt(t))) for i in src])
        y_ = P * V
        a = d**2 / t
        C = max(C, float(np.max(y_ * np.exp(a / 5))))
        with np.errstate(divide="ignore"):
            ci = np.where(a > 0, a / np.real(lambertw(a / np.maximum(y_, 1e-300))), y_)
        c = min(c, float(ci.min()))
        near = d <= np.sqrt(t)
        if near.any():
            c_ball = min(c_ball, float(y_[near].min()))
    return GaussianBounds(c, C, c_ball, (float(ts.min()), float(ts.max())), int(len(pairs) * len(ts)))


def fractional_kernel(space: WeightedGraphSpace, s: float, cols=None) -> np.ndarray:
    """Kernel columns of Δ^{-s} (s = 1 uses sparse solves when the space is large)."""
    asm = assemble(space)
    if s == 1:
        return asm.green_matrix if cols is None and asm.dense_ok else green_columns(
            space, np.arange(space.n) if cols is None else cols)
    if not asm.dense_ok:
        raise PotlabError(f"kernel of Δ^-s for s != 1 needs n <= {DENSE_LIMIT}")
    K = asm.spectral.kernel(lambda lam: lam ** (-s))
    return K if cols is None else K[:, np.asarray(cols)]


@dataclass(frozen=True)
class GreenEstimates:
    s: float
    c: float  # two-sided constants: c R ≤ G ≤ C R over region pairs
    C: float
    c3: float  # best c in G ≥ c d^{2s} / V(x, d), d > 0
    c3_floor: float  # c (2^{2s}-1)/(2s γ), a lower bound for c3 implied by c
    c0: float  # best c in inf_{B(x,r)} G(x, ·) ≥ c R(x, r)
    gamma: float
    n_pairs: int

    @property
    def ratio(self) -> float:
        return self.C / self.c

    @property
    def certified(self) -> bool:
        tol = 1e-12
        return self.c3 >= self.c3_floor * (1 - tol) and self.c0 >= self.c * (1 - tol)


def check_green_estimates(space: WeightedGraphSpace, nu_amb: float, region=None, s: float = 1.0,
                          R_cut=None) -> GreenEstimates:
    """Compare the kernel of Δ^{-s} with ∫_{d(x,y)}^∞ r^{2s-1} dr / V(x, r) on region pairs."""
    if not 0 < s <= 1:
        raise PotlabError("exponent s must lie in (0, 1]")
    if nu_amb <= 2 * s:
        raise TailDiverges(f"comparison integral diverges: need nu_amb > {2 * s:g} (got {nu_amb:g})")
    region = space.inner_region(0.5) if region is None else np.asarray(region, dtype=np.int64)
    prof = graph_volume_profile(space, region, nu_amb, R_cut)
    K = fractional_kernel(space, s, region)[region]  # symmetric block on region × region
    full_rows = space.dist_rows(region)
    dist = full_rows[:, region]
    p = 2 * s - 1
    R = np.stack([prof.radial_integral(i, dist[i], p) for i in range(region.size)])
    ratio = K / R
    c, C = float(ratio.min()), float(ratio.max())
    V_d = np.stack([prof.volume(i, dist[i]) for i in range(region.size)])
    pos = dist > 0
    c3 = float((K * V_d / np.where(pos, dist, 1.0) ** (2 * s))[pos].min()) if pos.any() else np.inf
    gamma = prof.doubling_kappa(nu_amb) * 2**nu_amb
    c3_floor = c * (2 ** (2 * s) - 1) / (2 * s * gamma)
    c0 = np.inf
    for i in range(region.size):
        order = np.argsort(dist[i], kind="stable")
        dd = np.round(dist[i][order], 12)
        running_min = np.minimum.accumulate(K[i][order])
        last = np.r_[dd[1:] != dd[:-1], True]
        radii = dd[last]
        # keep balls lying entirely in the region
        n_full = np.searchsorted(np.sort(np.round(full_rows[i], 12)), radii, side="right")
        ok = n_full == np.flatnonzero(last) + 1
        if ok.any():
            c0 = min(c0, float((running_min[last][ok] / prof.radial_integral(i, radii[ok], p)).min()))
    return GreenEstimates(float(s), c, C, c3, float(c3_floor), float(c0), float(gamma), int(K.size))
