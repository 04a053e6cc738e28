"""Potentials V, their form constant A, the representing form θ = dΔ⁻¹V and its multiplier constant B."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calculus import assemble, generalized_top, green_columns
from .errors import PotlabError
from .space import WeightedGraphSpace
from .trace import SetFamily, ball_family


@dataclass(frozen=True, eq=False)
class Potential:
    """V given either by a density f (⟨V,φ⟩ = Σ f φ μ) or as d*_μθ₀ (⟨V,φ⟩ = ⟨θ₀, dφ⟩)."""

    kind: str
    f: np.ndarray | None = None
    theta0: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "function":
            if self.f is None or self.theta0 is not None:
                raise PotlabError("function potential needs f and no theta0")
        elif self.kind == "divergence_form":
            if self.theta0 is None or self.f is not None:
                raise PotlabError("divergence-form potential needs theta0 and no f")
        else:
            raise PotlabError(f"unknown potential kind {self.kind!r}")

    @classmethod
    def function(cls, f) -> "Potential":
        return cls("function", f=np.asarray(f, dtype=float))

    @classmethod
    def divergence(cls, theta0) -> "Potential":
        return cls("divergence_form", theta0=np.asarray(theta0, dtype=float))

    def functional(self, space: WeightedGraphSpace) -> np.ndarray:
        """Vector v with ⟨V, φ⟩ = v · φ."""
        asm = assemble(space)
        if self.kind == "function":
            if self.f.shape != (space.n,):
                raise PotlabError("f must have one value per interior vertex")
            return asm.mu * self.f
        if self.theta0.shape != (space.n_edges,):
            raise PotlabError("theta0 must have one value per edge")
        return asm.D.T @ (asm.edge_ip * self.theta0)

    def to_dict(self) -> dict:
        vals = self.f if self.kind == "function" else self.theta0
        return {"kind": self.kind, "values": vals.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "Potential":
        kind = doc.get("kind")
        if kind == "function":
            return cls.function(doc["values"])
        if kind == "divergence_form":
            return cls.divergence(doc["values"])
        raise PotlabError(f"unknown potential kind {kind!r}")


def form_constant_A(space: WeightedGraphSpace, V: Potential) -> float:
    """Best A in |⟨V, φψ⟩| ≤ A ‖dφ‖ ‖dψ‖: largest |λ| of diag(v) x = λ L x."""
    space.require_boundary()
    v = V.functional(space)
    return abs(generalized_top(space, v, which="LM"))


def representing_form(space: WeightedGraphSpace, V: Potential) -> np.ndarray:
    """θ = dφ_V with L φ_V = v, so that ⟨θ, dφ⟩ = ⟨V, φ⟩ for every φ."""
    space.require_boundary()
    asm = assemble(space)
    phi = asm.solve_L(V.functional(space))
    return asm.D @ phi


def representation_residual(space: WeightedGraphSpace, V: Potential, theta: np.ndarray) -> float:
    """max_x |⟨θ, d1_x⟩ - ⟨V, 1_x⟩| relative to the size of V, over the vertex basis."""
    asm = assemble(space)
    v = V.functional(space)
    lhs = asm.D.T @ (asm.edge_ip * theta)
    return float(np.abs(lhs - v).max() / max(np.abs(v).max(), 1e-300))


def theta_density(space: WeightedGraphSpace, theta: np.ndarray) -> np.ndarray:
    """|θ|²(v) = (1/2μ_v) Σ_{e∋v} w_e ℓ_e θ_e² (half of each edge to each interior endpoint)."""
    a, b = space.edge_ends
    contrib = 0.5 * space.weight * space.length * np.asarray(theta, dtype=float) ** 2
    acc = np.zeros(space.n)
    np.add.at(acc, a[a >= 0], contrib[a >= 0])
    np.add.at(acc, b[b >= 0], contrib[b >= 0])
    return acc / space.measure


def multiplier_constant_B(space: WeightedGraphSpace, theta: np.ndarray) -> float:
    """Best B in Σ |θ|² φ² μ ≤ B ‖dφ‖²."""
    space.require_boundary()
    return max(generalized_top(space, space.measure * theta_density(space, theta)), 0.0)


@dataclass(frozen=True)
class MVReport:
    A: float
    theta: np.ndarray
    B: float
    ratio_forward: float  # A / (2√B), at most 1
    ratio_reverse: float  # B / A²
    C_prime: float  # sup over the ball family of ∫_U |θ|² dμ / (A² cap U)
    residual: float
    family_descriptor: str

    @property
    def forward_holds(self) -> bool:
        return self.ratio_forward <= 1 + 1e-9


def local_ball_family(space: WeightedGraphSpace, center: int | None = None, spread: float = 2.0,
                      radii=(0.0, 1.0, 2.0, 4.0, 8.0)) -> SetFamily:
    """Balls of the given radii around every vertex within ``spread`` of ``center`` (default the middle)."""
    center = space.center_vertex() if center is None else center
    row = space.dist_rows([center])[0]
    return ball_family(space, radii=np.asarray(radii, dtype=float), centers=np.flatnonzero(row <= spread))


def mv_verify(space: WeightedGraphSpace, V: Potential, family: SetFamily | None = None) -> MVReport:
    A = form_constant_A(space, V)
    theta = representing_form(space, V)
    B = multiplier_constant_B(space, theta)
    fam = local_ball_family(space) if family is None else family
    dens = space.measure * theta_density(space, theta)
    Cp = 0.0
    if A > 0:
        for U, cap in zip(fam.sets, fam.caps):
            Cp = max(Cp, float(dens[U].sum() / (A**2 * cap)))
    fwd = A / (2 * np.sqrt(B)) if B > 0 else (0.0 if A == 0 else np.inf)
    rev = B / A**2 if A > 0 else 0.0
    return MVReport(A, theta, B, float(fwd), float(rev), Cp, representation_residual(space, V, theta),
                    fam.descriptor)


# ---- decay of Hodge potentials ---------------------------------------------------------------
@dataclass(frozen=True)
class DecayProbe:
    exponent: float  # fitted e in |φ_β| ≈ C G_o^e far from the support
    p_max: float  # 2e - 1: largest p with ∫ G_o^{-p} |Πβ|² dμ finite under that decay
    n_points: int
    vacuous: bool


def decay_estimate_probe(space: WeightedGraphSpace, beta: np.ndarray, o: int, R: float,
                         far_factor: float = 6.0, buffer: float = 2.0) -> DecayProbe:
    """Fit log|φ_β| against log G_o outside B(o, far_factor·R), away from the boundary by ``buffer``."""
    beta = np.asarray(beta, dtype=float)
    row = space.dist_rows([o])[0]
    a, b = space.edge_ends
    ends = np.r_[a[(beta != 0) & (a >= 0)], b[(beta != 0) & (b >= 0)]]
    if ends.size and row[ends].max() > R:
        raise PotlabError("beta must be supported in B(o, R)")
    if not np.any(beta):
        return DecayProbe(np.nan, np.nan, 0, True)
    asm = assemble(space)
    phi = asm.solve_L(asm.D.T @ (asm.edge_ip * beta))
    G_o = green_columns(space, [o])[:, 0]
    far = (row >= far_factor * R) & (space.boundary_distance >= buffer) & (np.abs(phi) > 0)
    if far.sum() < 3:
        raise PotlabError("support too large for the space: no points beyond the far radius")
    e = float(np.polyfit(np.log(G_o[far]), np.log(np.abs(phi[far])), 1)[0])
    return DecayProbe(e, 2 * e - 1, int(far.sum()), False)
