"""Metric-measure clouds, volume profiles and the averaging operator K.

A volume profile V(x, r) is the closed-ball mass for r ≤ R_cut and continues
as V(x, R_cut) (r / R_cut)^ν beyond (R_cut may differ per source).  Because V
is piecewise constant up to R_cut and a power law after, every radial integral ∫_d^∞ r^p / V(x, r) dr is
evaluated exactly, piece by piece.

K acts on fields through the measure: (K f)(x) = Σ_y K(x, y) f(y) μ(y) with
K(x, y) = ∫_{d(x,y)}^∞ dτ / V(x, τ).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import integrate
from scipy.spatial.distance import cdist

from .errors import PotlabError, TailDiverges

ROUND = 12  # decimals used to merge numerically equal distances


class VolumeProfile:
    """Empirical ball masses for a set of source points, with a power-law tail.

    ``dist`` holds distances from each source (rows) to every point of the
    underlying set; ``mass`` is the point measure; ``R_cut`` is a scalar or
    one radius per source.
    """

    def __init__(self, dist: np.ndarray, mass: np.ndarray, R_cut, nu: float):
        dist = np.round(np.asarray(dist, dtype=float), ROUND)
        self.R_cuts = np.broadcast_to(np.asarray(R_cut, dtype=float), (dist.shape[0],)).copy()
        if not np.all(self.R_cuts > 0):
            raise PotlabError("R_cut must be positive")
        if not nu > 0:
            raise PotlabError("nu_amb must be positive")
        mass = np.asarray(mass, dtype=float)
        self.R_cut = float(self.R_cuts.max())
        self.nu = float(nu)
        self.breaks: list[np.ndarray] = []
        self.masses: list[np.ndarray] = []
        for row, Rc in zip(dist, self.R_cuts):
            order = np.argsort(row, kind="stable")
            r, m = row[order], np.cumsum(mass[order])
            last = np.r_[r[1:] != r[:-1], True]  # last index of each distinct radius
            b, c = r[last], m[last]
            keep = b <= Rc
            if b[0] > 0:
                raise PotlabError("every source must be a point of the set (distance 0 to itself)")
            self.breaks.append(b[keep])
            self.masses.append(c[keep])
        self.V_cut = np.array([c[-1] for c in self.masses])
        self._suffix: dict[tuple[int, float], np.ndarray] = {}

    @property
    def n_sources(self) -> int:
        return len(self.breaks)

    # ---- point evaluations --------------------------------------------------------
    def volume(self, i: int, r, left: bool = False) -> np.ndarray:
        """V(x_i, r) (or its left limit V(x_i, r⁻))."""
        r = np.asarray(r, dtype=float)
        b, m = self.breaks[i], self.masses[i]
        side = "left" if left else "right"
        j = np.searchsorted(b, np.round(r, ROUND), side=side) - 1
        emp = np.where(j >= 0, m[np.clip(j, 0, None)], 0.0)
        Rc = self.R_cuts[i]
        tail = self.V_cut[i] * (np.maximum(r, Rc) / Rc) ** self.nu
        return np.where(r > Rc, tail, emp)

    def _check_tail(self, p: float) -> None:
        if not self.nu > p + 1:
            raise TailDiverges(f"∫ r^{p:g}/V dr diverges: need nu_amb > {p + 1:g} (got {self.nu:g})")

    def _tail(self, i: int, a, p: float) -> np.ndarray:
        Rc, nu = self.R_cuts[i], self.nu
        return Rc**nu * np.asarray(a, dtype=float) ** (p + 1 - nu) / (self.V_cut[i] * (nu - p - 1))

    def _suffix_table(self, i: int, p: float) -> np.ndarray:
        key = (i, p)
        if key not in self._suffix:
            b, m = self.breaks[i], self.masses[i]
            nxt = np.r_[b[1:], self.R_cuts[i]]
            seg = (nxt ** (p + 1) - b ** (p + 1)) / ((p + 1) * m)
            self._suffix[key] = np.r_[np.cumsum(seg[::-1])[::-1], 0.0]
        return self._suffix[key]

    def radial_integral(self, i: int, d, p: float = 0.0) -> np.ndarray:
        """∫_d^∞ r^p / V(x_i, r) dr, exact (p > -1)."""
        if p <= -1:
            raise PotlabError("radial integral needs p > -1")
        self._check_tail(p)
        d = np.asarray(d, dtype=float)
        b, m = self.breaks[i], self.masses[i]
        F = self._suffix_table(i, p)
        Rc = self.R_cuts[i]
        nxt = np.r_[b[1:], Rc]
        dd = np.minimum(d, Rc)
        j = np.searchsorted(b, np.round(dd, ROUND), side="right") - 1
        j = np.clip(j, 0, b.size - 1)
        head = (nxt[j] ** (p + 1) - dd ** (p + 1)) / ((p + 1) * m[j]) + F[j + 1] + self._tail(i, Rc, p)
        return np.where(d >= Rc, self._tail(i, np.maximum(d, Rc), p), head)

    def heat_integral(self, i: int, d: float, D: float, s: float, epsrel: float = 1e-10) -> float:
        """∫₀^∞ exp(-d²/(D t)) t^{s-1} / V(x_i, √t) dt by adaptive quadrature on each piece."""
        self._check_tail(2 * s - 1)
        a = float(d) ** 2 / D
        b, m = self.breaks[i], self.masses[i]
        Rc = self.R_cuts[i]
        edges = np.r_[b, Rc] ** 2
        total = 0.0
        for lo, hi, mj in zip(edges[:-1], edges[1:], m):
            if hi <= lo:
                continue
            total += _piece(a, s, lo, hi, epsrel) / mj
        Rc2 = Rc**2
        scale = Rc**self.nu / self.V_cut[i]
        total += scale * _tail_piece(a, s - self.nu / 2, Rc2, epsrel)
        return total

    def doubling_kappa(self, nu: float | None = None) -> float:
        """Smallest κ with V(x,R) ≤ κ (R/r)^ν V(x,r) for all 0 < r ≤ R and every source.

        Over a piece [b_i, b_{i+1}) of r the worst case is r → b_{i+1}⁻; for R
        the worst case is a breakpoint; the power-law tail adds nothing.
        """
        nu = self.nu if nu is None else nu
        kappa = 1.0
        for b, m, Rc in zip(self.breaks, self.masses, self.R_cuts):
            if b.size < 2:
                continue
            right = np.r_[b[1:], Rc]  # right end of each r-piece
            # pairs i < j: m_j/m_i (right_i / b_j)^ν
            ratio = (m[None, :] / m[:, None]) * (right[:, None] / np.where(b > 0, b, np.inf)[None, :]) ** nu
            iu = np.triu_indices(b.size, 1)
            kappa = max(kappa, float(ratio[iu].max()))
        return kappa

    def cross_kappa(self, dist_sources: np.ndarray, nu: float | None = None) -> float:
        """Smallest κ with V(x,r) ≤ κ (1 + d(x,y)/r)^ν V(y,r) over all source pairs and r > 0.

        ``dist_sources`` is the source-to-source distance matrix.  Between grid
        points (breakpoints and cut radii) each ratio is monotone in r, so its
        sup is a one-sided limit at a grid point or the r → ∞ limit.
        """
        nu = self.nu if nu is None else nu
        grid = np.unique(np.concatenate(self.breaks))
        grid = np.unique(np.r_[grid[grid > 0], self.R_cuts])
        Vl = np.stack([self.volume(i, grid, left=True) for i in range(self.n_sources)])
        Vr = np.stack([self.volume(i, grid) for i in range(self.n_sources)])
        kappa = 1.0
        for x in range(self.n_sources):
            pen = (1.0 + dist_sources[x][:, None] / grid[None, :]) ** nu
            kappa = max(kappa, float((Vl[x][None, :] / (Vl * pen)).max()), float((Vr[x][None, :] / (Vr * pen)).max()))
        growth = self.V_cut / self.R_cuts**self.nu  # V(x, r) / r^ν for large r
        kappa = max(kappa, float(growth.max() / growth.min()))
        return kappa


def _piece(a: float, s: float, lo: float, hi: float, epsrel: float) -> float:
    """∫_lo^hi exp(-a/t) t^{s-1} dt."""
    if a == 0.0:
        return (hi**s - lo**s) / s
    f = lambda t: np.exp(-a / t) * t ** (s - 1)  # noqa: E731
    pts = [a] if lo < a < hi else None
    val, _ = integrate.quad(f, lo, hi, epsrel=epsrel, epsabs=0.0, limit=200, points=pts)
    return val


def _tail_piece(a: float, e: float, T: float, epsrel: float) -> float:
    """∫_T^∞ exp(-a/t) t^{e-1} dt for e < 0."""
    if a == 0.0:
        return -(T**e) / e
    f = lambda t: np.exp(-a / t) * t ** (e - 1)  # noqa: E731
    if a > T:
        v1, _ = integrate.quad(f, T, a, epsrel=epsrel, epsabs=0.0, limit=200)
        v2, _ = integrate.quad(f, a, np.inf, epsrel=epsrel, epsabs=0.0, limit=200)
        return v1 + v2
    val, _ = integrate.quad(f, T, np.inf, epsrel=epsrel, epsabs=0.0, limit=200)
    return val


@dataclass(frozen=True)
class PowerProfile:
    """V(x, r) = c r^ν for every x (doubling with κ = 1)."""

    nu: float
    c: float = 1.0

    def volume(self, i, r, left=False):
        return self.c * np.asarray(r, dtype=float) ** self.nu

    def radial_integral(self, i, d, p=0.0):
        if not self.nu > p + 1:
            raise TailDiverges(f"need nu > {p + 1:g}")
        d = np.asarray(d, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(d > 0, d ** (p + 1 - self.nu) / (self.c * (self.nu - p - 1)), np.inf)

    def heat_integral(self, i, d, D, s, epsrel=1e-10):
        if not self.nu > 2 * s:
            raise TailDiverges(f"need nu > {2 * s:g}")
        a = float(d) ** 2 / D
        if a == 0:
            return np.inf
        e = s - self.nu / 2
        f = lambda t: np.exp(-a / t) * t ** (e - 1)  # noqa: E731
        v1, _ = integrate.quad(f, 0, a, epsrel=epsrel, epsabs=0.0, limit=200)
        v2, _ = integrate.quad(f, a, np.inf, epsrel=epsrel, epsabs=0.0, limit=200)
        return (v1 + v2) / self.c

    def doubling_kappa(self, nu=None):
        nu = self.nu if nu is None else nu
        if nu < self.nu:
            return np.inf
        return 1.0


# ---- clouds ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class MetricMeasureCloud:
    metric: np.ndarray
    mass: np.ndarray
    R_cut: float
    nu_amb: float
    coords: np.ndarray | None = None
    metric_mode: str = "explicit"

    def __post_init__(self):
        M = np.asarray(self.metric, dtype=float)
        mass = np.asarray(self.mass, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] != mass.size:
            raise PotlabError("metric must be square and match the mass vector")
        if np.any(~(mass > 0)):
            raise PotlabError("point masses must be positive")
        if not np.allclose(M, M.T) or np.any(np.diag(M) != 0) or np.any(M[~np.eye(len(M), dtype=bool)] <= 0):
            raise PotlabError("metric must be symmetric with zero diagonal and positive off-diagonal")
        object.__setattr__(self, "metric", M)
        object.__setattr__(self, "mass", mass)

    @property
    def n(self) -> int:
        return self.mass.size

    @cached_property
    def profile(self) -> VolumeProfile:
        return VolumeProfile(self.metric, self.mass, self.R_cut, self.nu_amb)

    @cached_property
    def doubling(self) -> "CloudDoubling":
        """κ certified for both the one-point doubling and the cross-volume bound at ν = ν_amb."""
        k_d = self.profile.doubling_kappa()
        k_c = self.profile.cross_kappa(self.metric)
        kappa = max(k_d, k_c)
        return CloudDoubling(kappa=kappa, nu=self.nu_amb, gamma=kappa * 2.0**self.nu_amb,
                             kappa_doubling=k_d, kappa_cross=k_c)

    def to_dict(self) -> dict:
        doc = {"mass": self.mass.tolist(), "R_cut": self.R_cut, "nu_amb": self.nu_amb, "points": list(range(self.n))}
        if self.coords is not None and self.metric_mode in ("euclidean", "cityblock", "chebyshev"):
            doc.update(coords=self.coords.tolist(), metric_mode=self.metric_mode)
        else:
            doc["metric"] = self.metric.tolist()
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "MetricMeasureCloud":
        try:
            if "metric" in doc:
                metric = np.asarray(doc["metric"], dtype=float)
                coords, mode = None, "explicit"
            else:
                coords = np.asarray(doc["coords"], dtype=float)
                mode = doc.get("metric_mode", "euclidean")
                metric = cdist(coords, coords, metric=mode)
            return cls(metric, np.asarray(doc["mass"], dtype=float), float(doc["R_cut"]), float(doc["nu_amb"]),
                       coords, mode)
        except (KeyError, TypeError, ValueError) as exc:
            raise PotlabError(f"malformed cloud document: {exc!r}") from exc

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True))

    @classmethod
    def load(cls, path) -> "MetricMeasureCloud":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class CloudDoubling:
    kappa: float
    nu: float
    gamma: float
    kappa_doubling: float
    kappa_cross: float


def lattice_cloud(dim: int, side: int, nu_amb: float, metric_mode: str = "euclidean", mass=None,
                  R_cut: float | None = None) -> MetricMeasureCloud:
    """Points of {0..side-1}^dim with unit masses; R_cut defaults to half the diameter."""
    grids = np.meshgrid(*[np.arange(side, dtype=float)] * dim, indexing="ij")
    coords = np.stack([g.ravel() for g in grids], axis=1)
    metric = cdist(coords, coords, metric=metric_mode)
    mass = np.ones(len(coords)) if mass is None else np.broadcast_to(mass, (len(coords),)).astype(float)
    R_cut = metric.max() / 2 if R_cut is None else R_cut
    return MetricMeasureCloud(metric, mass, float(R_cut), float(nu_amb), coords, metric_mode)


# ---- the kernel -----------------------------------------------------------------------
@dataclass(eq=False)
class KernelMatrix:
    K: np.ndarray
    K_half: np.ndarray
    gamma: float
    mass: np.ndarray

    def apply(self, f: np.ndarray) -> np.ndarray:
        return self.K @ (self.mass * f)

    def apply_adjoint(self, f: np.ndarray) -> np.ndarray:
        return self.K.T @ (self.mass * f)


def kernel_rows(profile: VolumeProfile, dist: np.ndarray, p: float = 0.0) -> np.ndarray:
    """Matrix [∫_{d(x_i, y)}^∞ r^p / V(x_i, r) dr]_{i, y}."""
    return np.stack([profile.radial_integral(i, dist[i], p) for i in range(profile.n_sources)])


def assemble_k(cloud: MetricMeasureCloud) -> KernelMatrix:
    if cloud.nu_amb <= 1:
        raise TailDiverges(f"K needs nu_amb > 1 (got {cloud.nu_amb:g})")
    prof = cloud.profile
    K = kernel_rows(prof, cloud.metric)
    Kh = kernel_rows(prof, cloud.metric / 2)
    return KernelMatrix(K, Kh, cloud.doubling.gamma, cloud.mass)


def kernel_apply_direct(cloud: MetricMeasureCloud, f: np.ndarray, x: int) -> float:
    """(K f)(x) = ∫₀^∞ ⨏_{B(x,τ)} f dμ dτ, integrating the piecewise-constant ball average."""
    prof = cloud.profile
    row = np.round(cloud.metric[x], ROUND)
    b = prof.breaks[x]
    Rc = prof.R_cuts[x]
    nxt = np.r_[b[1:], Rc]
    total = 0.0
    for lo, hi in zip(b, nxt):
        inside = row <= lo
        total += (hi - lo) * float(np.sum(f[inside] * cloud.mass[inside])) / prof.volume(x, lo)
    inside = row <= Rc
    total += float(np.sum(f[inside] * cloud.mass[inside])) * float(prof.radial_integral(x, Rc))
    far = ~inside
    if far.any():
        # points beyond R_cut enter the ball average only once τ ≥ d(x, y)
        total += float(np.sum(f[far] * cloud.mass[far] * prof.radial_integral(x, cloud.metric[x][far])))
    return total


@dataclass(frozen=True)
class KsReport:
    worst_sym: float  # max K(x,y) / (γ K(y,x))
    worst_half: float  # max K_{1/2}(x,y) / (γ K(x,y))
    margin: float  # min over both of γ·rhs − lhs (absolute)
    scale: float
    passed: bool


def check_lemma_ks(km: KernelMatrix, rtol: float = 1e-12) -> KsReport:
    g = km.gamma
    K, Kh = km.K, km.K_half
    r1 = K / (g * K.T)
    r2 = Kh / (g * K)
    m = min(float((g * K.T - K).min()), float((g * K - Kh).min()))
    scale = float(K.max())
    return KsReport(float(r1.max()), float(r2.max()), m, scale, m >= -rtol * scale)


@dataclass(frozen=True)
class KKReport:
    worst_ratio: float  # max |Kf|² / (2γ³ K(fKf))
    margin: float  # min of rhs − lhs, relative to the largest rhs
    passed: bool


def check_lemma_kk(km: KernelMatrix, f_samples, rtol: float = 1e-12) -> KKReport:
    worst, margin = 0.0, np.inf
    c = 2 * km.gamma**3
    for f in f_samples:
        f = np.asarray(f, dtype=float)
        if np.any(f < 0):
            raise PotlabError("kernel product inequality needs f >= 0")
        Kf = km.apply(f)
        lhs = Kf**2
        rhs = c * km.apply(f * Kf)
        scale = max(float(rhs.max()), 1e-300)
        margin = min(margin, float((rhs - lhs).min()) / scale)
        with np.errstate(invalid="ignore", divide="ignore"):
            r = np.where(rhs > 0, lhs / rhs, 0.0)
        worst = max(worst, float(r.max()))
    return KKReport(worst, margin, margin >= -rtol)


# ---- the four-way trace equivalence -------------------------------------------------------
@dataclass
class GenetraceReport:
    gamma: float
    norm_Ksqrtq_sq: float
    norm_KQ: float
    C: float
    C_prime: float
    C_prime_ball: tuple
    chain: dict = field(default_factory=dict)  # name -> (lhs, rhs, passed)
    qB_worst_ratio: float = 0.0
    qB_passed: bool = True

    @property
    def passed(self) -> bool:
        return all(v[2] for v in self.chain.values()) and self.qB_passed


def _sym(km: KernelMatrix, g: np.ndarray) -> np.ndarray:
    """Orthonormal-coordinate matrix of f ↦ K(g f) on L²(μ)."""
    s = np.sqrt(km.mass)
    return s[:, None] * km.K * (g * s)[None, :]


def ball_energy_scan(K: np.ndarray, mass: np.ndarray, q: np.ndarray, dist_row: np.ndarray):
    """For the nested closed balls around one center, return (radii, ∫_B |K(q1_B)|² dμ, ∫_B q dμ).

    Balls are the distinct prefixes of the points sorted by distance.
    """
    order = np.argsort(np.round(dist_row, ROUND), kind="stable")
    r = np.round(dist_row[order], ROUND)
    qm = (q * mass)[order]
    V = np.cumsum(K[np.ix_(order, order)] * qm[None, :], axis=1)  # K(q 1_{first m+1})(z)
    W = np.cumsum(mass[order][:, None] * V**2, axis=0)
    energy = np.diagonal(W)
    qB = np.cumsum(qm)
    last = np.r_[r[1:] != r[:-1], True]
    return r[last], energy[last], qB[last]


def genetrace_conditions(cloud: MetricMeasureCloud, km: KernelMatrix, q: np.ndarray,
                         tail_factors=(2.0, 4.0, 8.0), rtol: float = 1e-12) -> GenetraceReport:
    q = np.asarray(q, dtype=float)
    if np.any(q < 0):
        raise PotlabError("q must be nonnegative")
    g = km.gamma
    mass = km.mass
    prof = cloud.profile
    n1 = float(np.linalg.norm(_sym(km, np.sqrt(q)), 2) ** 2)
    Q = km.apply(q)
    n2 = float(np.linalg.norm(_sym(km, Q), 2))
    KQ2 = km.apply(Q**2)
    supp = Q > 0
    C = float((KQ2[supp] / Q[supp]).max()) if supp.any() else 0.0

    # condition iv): every closed ball is a distance-sorted prefix, so the scan is exhaustive
    Cp, arg = 0.0, (None, None)
    ball_data = []
    for x in range(cloud.n):
        radii, en, qb = ball_energy_scan(km.K, mass, q, cloud.metric[x])
        ok = qb > 0
        if ok.any():
            ratio = en[ok] / qb[ok]
            k = int(np.argmax(ratio))
            if ratio[k] > Cp:
                Cp, arg = float(ratio[k]), (x, float(radii[ok][k]))
        ball_data.append((radii, qb))

    # per-ball mean bound at the strongest radius of each piece
    worst = 0.0
    for x, (radii, qb) in enumerate(ball_data):
        b = radii
        # a ball is the same set for s in [b_k, b_{k+1}); the bound is tightest as s → b_{k+1}⁻
        s_right = np.r_[b[1:], np.inf]
        s_right = np.minimum(s_right, np.maximum(cloud.R_cut, b))
        pos = b > 0
        mean = qb / prof.volume(x, b)
        ratio = mean[pos] * s_right[pos] ** 2 / max(g**6 * Cp, 1e-300)
        if ratio.size:
            worst = max(worst, float(ratio.max()))
        for t in tail_factors:
            s = t * cloud.R_cut
            inside = cloud.metric[x] <= s
            mean = float((q * mass)[inside].sum()) / float(prof.volume(x, s))
            worst = max(worst, mean * s**2 / max(g**6 * Cp, 1e-300))
    qB_ok = worst <= 1 + rtol if Cp > 0 else not np.any(q > 0)

    scale = max(n1, n2, C, Cp, 1e-300)
    chain = {
        "C_prime<=norm_Ksqrtq_sq": (Cp, n1),
        "norm_Ksqrtq_sq<=2g7_norm_KQ": (n1, 2 * g**7 * n2),
        "norm_KQ<=2g5_C": (n2, 2 * g**5 * C),
        "C<=(g+g10)_C_prime": (C, (g + g**10) * Cp),
    }
    chain = {k: (lhs, rhs, lhs <= rhs + rtol * scale) for k, (lhs, rhs) in chain.items()}
    return GenetraceReport(g, n1, n2, C, Cp, arg, chain, worst, bool(qB_ok))


# ---- kernel comparison ------------------------------------------------------------------
def estikernel_constants(kappa: float, nu: float, D: float, s: float) -> tuple[float, float]:
    """Explicit sandwich constants c = 2e^{-1/D}, C = 2 + κ2^{ν+1}∫₀¹ e^{-1/(Dt)} t^{s-ν/2-1} dt."""
    J, _ = integrate.quad(lambda t: np.exp(-1.0 / (D * t)) * t ** (s - nu / 2 - 1), 0, 1, epsrel=1e-12, limit=200)
    return 2 * np.exp(-1.0 / D), 2 + kappa * 2 ** (nu + 1) * J


@dataclass
class EstikernelReport:
    D: float
    s: float
    kappa: float
    nu: float
    c: float
    C: float
    ratios: np.ndarray  # heat integral / radial integral per pair
    passed: bool

    @property
    def c_emp(self) -> float:
        return float(self.ratios.min())

    @property
    def C_emp(self) -> float:
        return float(self.ratios.max())


def estikernel_quadrature(profile, D: float, s: float, pairs, kappa: float | None = None,
                          nu: float | None = None, rtol: float = 1e-8) -> EstikernelReport:
    """Check c R ≤ H ≤ C R for (source index, distance) pairs.

    H is the heat-type integral, R the radial integral with exponent 2s - 1.
    """
    nu = profile.nu if nu is None else nu
    kappa = profile.doubling_kappa(nu) if kappa is None else kappa
    if not nu > 2 * s:
        raise TailDiverges(f"estikernel needs nu_amb > 2s (nu={nu:g}, s={s:g})")
    c, C = estikernel_constants(kappa, nu, D, s)
    ratios = []
    for i, dist in pairs:
        R = float(profile.radial_integral(i, dist, 2 * s - 1))
        H = float(profile.heat_integral(i, dist, D, s))
        ratios.append(H / R)
    ratios = np.asarray(ratios)
    ok = bool(np.all(ratios >= c * (1 - rtol)) and np.all(ratios <= C * (1 + rtol)))
    return EstikernelReport(D, s, kappa, nu, c, C, ratios, ok)
