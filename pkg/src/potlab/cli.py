"""Command-line entry point: ``potlab <command> [--config cfg.json] [--seed N] [--out path] [--threads n]``.

Exit codes: 0 when every checked invariant holds, 2 when one fails (named on
stderr), 1 on input errors.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import calculus, kernelcloud, mv, potential, space as spc, trace, weights
from .errors import PotlabError
from .report import build_report, render, render_csv, write_text

COMMANDS = ("gen-space", "analyze", "green", "capacity", "hodge-sweep", "weights", "trace", "cloud",
            "estikernel", "mv", "suite")

DEFAULTS = {
    "gen-space": {"kind": "grid", "dim": 3, "side": 8, "dirichlet_shell": True, "n_interior": 10,
                  "n_boundary": 2, "p": 0.3},
    "analyze": {"radii": [1, 2, 4], "subsets_per_ball": 8},
    "green": {"nu_amb": 3.0, "s": 1.0, "region_fraction": 0.5, "t_grid": [1, 2, 4, 8, 16], "n_pairs": 50},
    "capacity": {"center": "center", "radius": 2.0, "tau_list": [0.6, 1.0, 2.0, 4.0], "tolerance": 0.25},
    "hodge-sweep": {"delta_list": [0.0, 0.5, -0.5], "center": "center", "radius": 2.0, "equilibrium": None,
                    "method": "lanczos", "tolerance": 0.25},
    "weights": {"tau_list": [0.5, 1.0, 2.0], "radii": None, "rh_exponent": 2.0, "harnack_radius": 1.0,
                "n_harmonics": 20, "n_centers": 4},
    "trace": {"q": "random", "family": "balls_and_sublevels", "n_q": 1},
    "cloud": {"dim": 1, "side": 60, "nu_amb": 1.5, "metric_mode": "euclidean", "cloud_path": None, "n_f": 10},
    "estikernel": {"profile": "power", "nu_amb": 3.0, "D_list": [2.0, 4.0], "s_list": [0.5, 1.0], "n_pairs": 20},
    "mv": {"potential": "function", "potential_path": None, "radius": 2.0},
    "suite": {"side": 6},
}


class InvariantFailure(Exception):
    def __init__(self, names):
        super().__init__(", ".join(names))
        self.names = names


# ---- helpers -----------------------------------------------------------------------------------
def _load_space(cfg: dict) -> spc.WeightedGraphSpace:
    path = cfg.get("space_path")
    if not path:
        raise PotlabError("missing space: pass --space or set space_path in the config")
    if not Path(path).is_file():
        raise PotlabError(f"space file not found: {path}")
    try:
        return spc.WeightedGraphSpace.load(path)
    except json.JSONDecodeError as exc:
        raise PotlabError(f"space file is not valid JSON: {exc}") from exc


def _vertex(space, spec) -> int:
    if spec == "center":
        return space.center_vertex()
    if isinstance(spec, int) and 0 <= spec < space.n:
        return spec
    raise PotlabError(f"vertex must be 'center' or an interior index in [0, {space.n})")


def _verdicts_or_raise(verdicts: dict) -> None:
    bad = [k for k, v in verdicts.items() if not v]
    if bad:
        raise InvariantFailure(bad)


# ---- commands ----------------------------------------------------------------------------------
def cmd_gen_space(p: dict, seed: int, cfg: dict):
    kind = p["kind"]
    if kind == "grid":
        sp_ = spc.build_grid_space(int(p["dim"]), int(p["side"]), bool(p["dirichlet_shell"]))
    elif kind == "path":
        sp_ = spc.path_space(int(p["n_interior"]))
    elif kind == "random":
        sp_ = spc.random_graph_space(int(p["n_interior"]), int(p["n_boundary"]), float(p["p"]),
                                     np.random.default_rng(seed))
    else:
        raise PotlabError(f"unknown space kind {kind!r} (grid, path, random)")
    if not cfg.get("output_path"):
        raise PotlabError("gen-space needs --out for the space file")
    sp_.save(cfg["output_path"])
    return None, {"n_interior": sp_.n, "n_vertices": sp_.n_vertices, "n_edges": sp_.n_edges}, {}


def cmd_analyze(p, seed, cfg):
    s = _load_space(cfg)
    radii = sorted(float(r) for r in p["radii"])
    prof = spc.estimate_doubling(s, radii)
    res = {"n_interior": s.n, "n_edges": s.n_edges, "nonparabolic": s.is_nonparabolic, "doubling": prof}
    poin = spc.estimate_poincare(s, radii)
    res["poincare_lambda"] = poin.lam
    fam = spc.balls(s, np.arange(s.n), radii)
    fk = spc.check_faber_krahn(s, prof, fam, int(p["subsets_per_ball"]), seed=seed)
    res["faber_krahn_b"] = fk.b
    return s, res, {"nonparabolic": s.is_nonparabolic}


def cmd_green(p, seed, cfg):
    s = _load_space(cfg)
    region = s.inner_region(float(p["region_fraction"]))
    est = calculus.check_green_estimates(s, float(p["nu_amb"]), region=region, s=float(p["s"]))
    rng = np.random.default_rng(seed)
    n = min(int(p["n_pairs"]), region.size)
    xs = rng.choice(region, size=n, replace=True)
    ys = rng.choice(region, size=n, replace=True)
    prof = calculus.graph_volume_profile(s, xs, float(p["nu_amb"]))
    gb = calculus.check_gaussian_bounds(s, prof, p["t_grid"], np.stack([np.arange(n), xs, ys], axis=1))
    res = {"green": est, "C_over_c": est.ratio, "gaussian": gb}
    return s, res, {"green_lower_bounds_certified": est.certified}


def _equilibrium(s, p):
    c = _vertex(s, p["center"])
    U = spc.ball(s, c, float(p["radius"])).members
    return potential.capacity(s, U)


def cmd_capacity(p, seed, cfg):
    s = _load_space(cfg)
    eq = _equilibrium(s, p)
    rows = [potential.htau_energy_check(s, eq, float(t)) for t in p["tau_list"]]
    tol = float(p["tolerance"])
    verdicts = {"htau_ratio<=1+tol": all(r.ratio <= 1 + tol for r in rows)}
    if any(r.tau == 1.0 for r in rows):
        verdicts["htau_ratio_at_1==1"] = all(abs(r.ratio - 1) <= 1e-12 for r in rows if r.tau == 1.0)
    sh = potential.is_superharmonic(s, eq.h)
    verdicts["h_superharmonic"] = sh.passed
    res = {"U": s.vertex_ids(eq.U), "cap": eq.cap, "h": eq.h, "nu_U_total": float(eq.nu_U.sum()),
           "htau": [{"tau": r.tau, "lhs": r.lhs, "rhs": r.rhs, "ratio": r.ratio} for r in rows]}
    return s, res, verdicts


def cmd_hodge_sweep(p, seed, cfg):
    s = _load_space(cfg)
    if p.get("equilibrium"):
        doc = json.loads(Path(p["equilibrium"]).read_text())
        try:
            h = np.asarray(doc["results"]["h"], dtype=float)
        except (KeyError, TypeError) as exc:
            raise PotlabError("equilibrium file must be a capacity report with results.h") from exc
        if h.shape != (s.n,):
            raise PotlabError("stored equilibrium potential does not match the space")
    else:
        h = _equilibrium(s, p).h
    rows = weights.weighted_hodge_sweep(s, h, [float(d) for d in p["delta_list"]], method=p["method"])
    tol = float(p["tolerance"])
    verdicts = {"hodge_norm_sq<=bound*(1+tol)": all(r.bound is None or r.norm**2 <= r.bound * (1 + tol)
                                                  for r in rows),
                "norm_converged": all(r.converged for r in rows)}
    csv = render_csv(["delta", "norm", "bound", "slack"], [(r.delta, r.norm, r.bound, r.slack) for r in rows])
    return s, {"rows": rows}, verdicts, csv


def cmd_weights(p, seed, cfg):
    s = _load_space(cfg)
    o = s.center_vertex()
    G = calculus.green_columns(s, [o])[:, 0]
    region = s.inner_region(0.5)
    radii = p["radii"] or list(range(1, max(2, int(s.boundary_distance.max()) // 2 + 1)))
    fam = spc.balls_within(s, region, [float(r) for r in radii])
    res, verdicts = {"n_balls": len(fam), "a1": {}}, {}
    for t in p["tau_list"]:
        a1 = weights.a1_constant(s, G ** float(t), fam)
        der = weights.a1_derived_properties(s, G ** float(t), fam)
        res["a1"][str(float(t))] = {"constant": a1.constant, "derived": der}
        verdicts[f"a1_derived_tau={float(t):g}"] = der.passed
    r = float(p["rh_exponent"])
    rh = weights.reverse_holder_check(s, G, r, fam)
    res["reverse_holder"] = rh
    verdicts["reverse_holder"] = rh.passed
    R = float(p["harnack_radius"])
    centers = weights.admissible_centers(s, R)
    if centers.size:
        centers = centers[np.argsort(s.dist_rows([o])[0][centers], kind="stable")][: int(p["n_centers"])]
        res["harnack"] = weights.harnack_estimate(s, centers, R, int(p["n_harmonics"]), seed=seed)
        verdicts["harnack_C>=1"] = res["harnack"].harnack_C >= 1
    else:
        res["harnack"] = "no admissible balls"
    return s, res, verdicts


def _make_q(s, spec, rng):
    if isinstance(spec, list):
        return np.asarray(spec, dtype=float)
    if spec == "random":
        return rng.random(s.n)
    if spec == "ball":
        q = np.zeros(s.n)
        q[spc.ball(s, s.center_vertex(), 2.0).members] = 1.0
        return q
    raise PotlabError("q must be 'random', 'ball' or a list of values")


def cmd_trace(p, seed, cfg):
    s = _load_space(cfg)
    family = p["family"]
    if family not in trace.FAMILIES:
        raise PotlabError(f"unknown family {family!r}; choose from {trace.FAMILIES}")
    if family == "exhaustive" and s.n > trace.EXHAUSTIVE_LIMIT:
        raise PotlabError(f"exhaustive family limited to ≤ {trace.EXHAUSTIVE_LIMIT} interior vertices")
    rng = np.random.default_rng(seed)
    base = trace.ball_family(s) if family != "exhaustive" else trace.exhaustive_family(s)
    out, verdicts = [], {}
    for k in range(int(p["n_q"])):
        q = _make_q(s, p["q"], rng)
        fam = base + trace.sublevel_family(s, q) if family == "balls_and_sublevels" else base
        rep = trace.verify_trace_chain(s, q, family=fam)
        out.append({"constants": rep.constants, "verdicts": rep.verdicts, "argmax_sets": rep.argmax_sets})
        for name, v in rep.verdicts.items():
            verdicts[name] = verdicts.get(name, True) and v
    return s, {"family": family, "runs": out}, verdicts


def _cloud(p):
    if p.get("cloud_path"):
        return kernelcloud.MetricMeasureCloud.load(p["cloud_path"])
    return kernelcloud.lattice_cloud(int(p["dim"]), int(p["side"]), float(p["nu_amb"]), p["metric_mode"])


def cmd_cloud(p, seed, cfg):
    cl = _cloud(p)
    km = kernelcloud.assemble_k(cl)
    rng = np.random.default_rng(seed)
    ks = kernelcloud.check_lemma_ks(km)
    kk = kernelcloud.check_lemma_kk(km, [rng.random(cl.n) for _ in range(int(p["n_f"]))])
    gt = kernelcloud.genetrace_conditions(cl, km, rng.random(cl.n))
    res = {"n_points": cl.n, "doubling": cl.doubling, "Ks": ks, "KK": kk,
           "genetrace": {"C": gt.C, "C_prime": gt.C_prime, "chain": gt.chain, "qB_worst_ratio": gt.qB_worst_ratio}}
    return None, res, {"kernel_quasi_symmetric": ks.passed, "kernel_product_bound": kk.passed, "genetrace_chain": gt.passed}


def cmd_estikernel(p, seed, cfg):
    rng = np.random.default_rng(seed)
    n = int(p["n_pairs"])
    nu = float(p["nu_amb"])
    if p["profile"] == "power":
        prof = kernelcloud.PowerProfile(nu)
        pairs = [(0, float(d)) for d in np.exp(rng.uniform(np.log(0.1), np.log(100), size=n))]
    elif p["profile"] == "space":
        s = _load_space(cfg)
        region = s.inner_region(0.5)
        prof = calculus.graph_volume_profile(s, region, nu)
        dist = s.dist_rows(region)
        i = rng.integers(region.size, size=n)
        j = rng.integers(s.n, size=n)
        pairs = [(int(a), float(dist[a, b])) for a, b in zip(i, j)]
    else:
        raise PotlabError("profile must be 'power' or 'space'")
    out, ok = [], True
    for D in p["D_list"]:
        for sx in p["s_list"]:
            rep = kernelcloud.estikernel_quadrature(prof, float(D), float(sx), pairs)
            out.append({"D": rep.D, "s": rep.s, "c": rep.c, "C": rep.C, "c_emp": rep.c_emp, "C_emp": rep.C_emp,
                        "passed": rep.passed})
            ok &= rep.passed
    return None, {"reports": out}, {"estikernel_sandwich": ok}


def _builtin_potential(s, kind, radius):
    row = s.dist_rows([s.center_vertex()])[0]
    if kind == "function":
        return mv.Potential.function((row <= radius).astype(float))
    if kind == "divergence":
        a, b = s.edge_ends
        inside = (a >= 0) & (b >= 0)
        near = np.zeros(s.n_edges, dtype=bool)
        near[inside] = (row[a[inside]] <= radius) & (row[b[inside]] <= radius)
        return mv.Potential.divergence(near.astype(float))
    raise PotlabError("built-in potential must be 'function' or 'divergence'")


def cmd_mv(p, seed, cfg):
    s = _load_space(cfg)
    if p.get("potential_path"):
        V = mv.Potential.from_dict(json.loads(Path(p["potential_path"]).read_text()))
    elif isinstance(p["potential"], dict):
        V = mv.Potential.from_dict(p["potential"])
    else:
        V = _builtin_potential(s, p["potential"], float(p["radius"]))
    rep = mv.mv_verify(s, V)
    res = {"A": rep.A, "B": rep.B, "ratio_forward": rep.ratio_forward, "ratio_reverse": rep.ratio_reverse,
           "C_prime": rep.C_prime, "residual": rep.residual, "family": rep.family_descriptor, "theta": rep.theta}
    return s, res, {"forward_A<=2sqrtB": rep.forward_holds, "theta_represents_V": rep.residual <= 1e-10}


def cmd_suite(p, seed, cfg):
    """A small fixed battery on a side-``side`` cube and a 10-vertex random graph."""
    side = int(p["side"])
    s = spc.build_grid_space(3, side)
    rng = np.random.default_rng(seed)
    res, verdicts = {}, {}
    eq = potential.capacity(s, spc.ball(s, s.center_vertex(), 1.0).members)
    rows = weights.weighted_hodge_sweep(s, eq.h, [0.0, 0.5, -0.5])
    res["hodge"] = rows
    verdicts["hodge_bound"] = all(r.bound is None or r.norm**2 <= r.bound * 1.25 for r in rows)
    ht = [potential.htau_energy_check(s, eq, t) for t in (0.6, 1.0, 2.0)]
    res["htau"] = [(r.tau, r.ratio) for r in ht]
    verdicts["htau_at_1"] = abs(ht[1].ratio - 1) <= 1e-12
    g = spc.random_graph_space(10, 2, 0.3, rng)
    q = rng.random(g.n)
    rep = trace.verify_trace_chain(g, q, family="exhaustive")
    res["trace"] = {"constants": rep.constants, "verdicts": rep.verdicts}
    verdicts["trace_chain"] = rep.passed
    theta0 = rng.standard_normal(s.n_edges)
    m = mv.mv_verify(s, mv.Potential.divergence(theta0))
    res["mv"] = {"A": m.A, "B": m.B, "ratio_forward": m.ratio_forward}
    verdicts["mv_forward"] = m.forward_holds
    cl = kernelcloud.lattice_cloud(1, 40, 1.5)
    km = kernelcloud.assemble_k(cl)
    res["cloud_Ks"] = kernelcloud.check_lemma_ks(km)
    verdicts["kernel_quasi_symmetric"] = res["cloud_Ks"].passed
    return None, res, verdicts


HANDLERS = {
    "gen-space": cmd_gen_space, "analyze": cmd_analyze, "green": cmd_green, "capacity": cmd_capacity,
    "hodge-sweep": cmd_hodge_sweep, "weights": cmd_weights, "trace": cmd_trace, "cloud": cmd_cloud,
    "estikernel": cmd_estikernel, "mv": cmd_mv, "suite": cmd_suite,
}


# ---- config and dispatch ------------------------------------------------------------------------
def resolve_config(args) -> dict:
    cfg = {"params": {}}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise PotlabError(f"config file not found: {path}")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise PotlabError(f"malformed config: {exc}") from exc
        if not isinstance(doc, dict):
            raise PotlabError("malformed config: top level must be an object")
        cfg.update({k: v for k, v in doc.items() if k != "params"})
        cfg["params"] = dict(doc.get("params", {}))
    for item in args.set or []:
        if "=" not in item:
            raise PotlabError(f"--set expects key=value (got {item!r})")
        k, v = item.split("=", 1)
        try:
            cfg["params"][k] = json.loads(v)
        except json.JSONDecodeError:
            cfg["params"][k] = v
    if args.space:
        cfg["space_path"] = args.space
    if args.out:
        cfg["output_path"] = args.out
    cfg["seed"] = int(args.seed if args.seed is not None else cfg.get("seed", 0))
    if not 0 <= cfg["seed"] < 2**64:
        raise PotlabError("seed must be a 64-bit unsigned integer")
    unknown = set(cfg["params"]) - set(DEFAULTS[args.command])
    if unknown:
        raise PotlabError(f"unknown parameter(s) for {args.command}: {sorted(unknown)}")
    cfg["params"] = {**DEFAULTS[args.command], **cfg["params"]}
    cfg["command"] = args.command
    return cfg


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="potlab", description="Discrete potential-theory workbench.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON config file")
    ap.add_argument("--space", help="space file (overrides space_path)")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--out", help="output path (report, or the space file for gen-space)")
    ap.add_argument("--threads", type=int, default=None, help="BLAS threads (fallback: $POTLAB_THREADS)")
    ap.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one parameter (JSON value)")
    return ap


def run(cfg: dict) -> tuple[int, dict | None]:
    """Execute a resolved config; returns (exit code, report)."""
    handler = HANDLERS[cfg["command"]]
    out = handler(cfg["params"], cfg["seed"], cfg)
    _, results, verdicts = out[:3]
    if cfg["command"] == "gen-space":
        return 0, None
    report = build_report(cfg["command"], {k: v for k, v in cfg.items() if k != "output_path"}, results, verdicts)
    if len(out) > 3 and cfg.get("output_path"):
        Path(cfg["output_path"]).with_suffix(".csv").write_text(out[3], encoding="utf-8")
    write_text(cfg.get("output_path"), render(report))
    _verdicts_or_raise(verdicts)
    return 0, report


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    threads = args.threads
    if threads is None and os.environ.get("POTLAB_THREADS"):
        try:
            threads = int(os.environ["POTLAB_THREADS"])
        except ValueError:
            print("error: POTLAB_THREADS must be an integer", file=sys.stderr)
            return 1
    try:
        cfg = resolve_config(args)
        with threadpool_limits(limits=threads):
            code, _ = run(cfg)
        return code
    except InvariantFailure as exc:
        print(f"invariant failed: {exc}", file=sys.stderr)
        return 2
    except PotlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
