"""Experiment drivers behind ``sconclab run``.

Every driver takes a resolved :class:`ExperimentConfig` and an output directory, writes its data
files there and returns ``(results, passed)``; the CLI wraps the results into ``report.json``.
Reports contain no timing or host information so reruns are byte-identical.
"""

from __future__ import annotations

import filecmp
import math
import tempfile
from pathlib import Path
from typing import Callable

import numpy as np

from . import io
from .config import ExperimentConfig, parse_box, parse_vector
from .errors import ConfigError, CriticalTimeExceeded, NoPathFoundAtResolution
from .evolution import (
    c11_certificate,
    estimate_critical_time,
    fundamental_solution,
    maximizer_radius,
    negative_operator,
    positive_operator,
    regularity_probe,
    verify_inf_representation,
)
from .flow import diffeo_window, flow_endpoint, flow_map, hamiltonian_flow, monodromy, symplectic_defect, variational_flow
from .grids import Grid
from .pseudograph import verify_arnaud
from .semiconcave import FUNCTIONS, make_function
from .tonelli import SYSTEMS, DomainSpec, make_system
from .topology import box_counting_dimension, broken_line_path, classify_grid, connectivity_report, path_is_valid

EXPERIMENTS: dict = {}


def experiment(name: str, description: str):
    def deco(fn):
        EXPERIMENTS[name] = (fn, description)
        return fn
    return deco


# ---------------------------------------------------------------------------
# resolution helpers


def infer_dim(cfg: ExperimentConfig, params: dict = None) -> int:
    params = cfg.params if params is None else params
    for src in (cfg.phi, cfg.system):
        if "d" in src:
            return int(src["d"])
    if "box" in params:
        return len(parse_box(params["box"])[0])
    if "a" in params:
        return len(parse_vector(params["a"], "a"))
    return 1


def build_phi(spec: dict, d: int):
    spec = dict(spec)
    name = spec.pop("name", None)
    if name not in FUNCTIONS:
        raise ConfigError(f"phi.name: unknown function {name!r}; known: {sorted(FUNCTIONS)}")
    spec.setdefault("d", d)
    if "box" in spec:
        lo, hi = parse_box(spec.pop("box"), "phi.box")
        spec["domain"] = DomainSpec.box(lo, hi)
    try:
        return make_function(name, **spec)
    except TypeError as exc:
        raise ConfigError(f"phi: bad parameters for {name!r}: {exc}") from None


def build_system(spec: dict, d: int):
    spec = dict(spec)
    name = spec.pop("name", None)
    if name not in SYSTEMS:
        raise ConfigError(f"system.name: unknown system {name!r}; known: {sorted(SYSTEMS)}")
    spec.setdefault("d", d)
    if "box" in spec:
        lo, hi = parse_box(spec.pop("box"), "system.box")
        spec["domain"] = DomainSpec.box(lo, hi)
    for key in ("n", "label"):
        spec.pop(key, None)
    try:
        return make_system(name, **spec)
    except TypeError as exc:
        raise ConfigError(f"system: bad parameters for {name!r}: {exc}") from None


def _grid_from(params: dict, key: str, default_box: str, h: float) -> Grid:
    lo, hi = parse_box(params.get(key, default_box), key)
    return Grid.uniform(lo, hi, h)


def _default_box(d: int, half: float) -> str:
    return "x".join([f"{-half},{half}"] * d)


def _f(x) -> float:
    return float(x)


# ---------------------------------------------------------------------------
# experiments


@experiment("verify-arnaud", "flowed gradient graph of T̆_0^t phi vs the pseudo-graph of phi (Hausdorff)")
def run_verify_arnaud(cfg: ExperimentConfig, out: Path):
    results = []
    parts = [("main", cfg.params, cfg.phi, cfg.system)]
    if isinstance(cfg.params.get("d2"), dict):
        sub = dict(cfg.params["d2"])
        parts.append(("d2", sub, dict(cfg.phi, **sub.pop("phi", {}), d=2), dict(cfg.system, **sub.pop("system", {}), d=2)))
    ok = True
    for label, params, phi_spec, sys_spec in parts:
        d = int(phi_spec.get("d", infer_dim(cfg, params)))
        phi = build_phi(phi_spec, d)
        system = build_system(sys_spec, d)
        t = float(params.get("t", 0.5))
        h = float(params.get("h", 0.01))
        window = _grid_from(params, "box", _default_box(d, 1.0), h)
        y_grid = None
        if "y_box" in params:
            y_grid = _grid_from(params, "y_box", "", float(params.get("y_h", h)))
        try:
            rep = verify_arnaud(
                phi, system, t, window,
                fiber_samples=int(params.get("fiber_samples", 100)),
                tol=float(params.get("tol", 0.02)),
                mode=str(params.get("mode", "symmetric")),
                fiber_spacing=params.get("fiber_spacing"),
                y_grid=y_grid,
                guard=bool(params.get("guard", True)),
            )
        except CriticalTimeExceeded as exc:
            results.append({"part": label, "error": "CriticalTimeExceeded", "message": str(exc), "pass": False})
            ok = False
            continue
        A, B = rep.pop("_clouds")
        A.to_csv(out / f"{label}_flowed_graph.csv")
        B.to_csv(out / f"{label}_pseudograph.csv")
        rep.update({"part": label, "phi": phi.name, "system": system.name, "d": d})
        results.append(rep)
        ok &= rep["pass"]
    return {"parts": results}, ok


def _closed_form(name: str, xs: np.ndarray, t: float):
    x = xs[:, 0]
    if name == "neg-norm-sup":  # T̆_0^t(-|x|) under H = p^2/2
        return np.where(np.abs(x) <= t, -x * x / (2 * t), -np.abs(x) + t / 2)
    if name == "neg-norm-inf":  # T_0^t(-|x|)
        return -np.abs(x) - t / 2
    raise ConfigError(f"params.oracle: unknown oracle {name!r}")


@experiment("evolve", "positive/negative Lax-Oleinik evolution on a grid, optionally against a closed form")
def run_evolve(cfg: ExperimentConfig, out: Path):
    p = cfg.params
    d = infer_dim(cfg)
    phi, system = build_phi(cfg.phi, d), build_system(cfg.system, d)
    t1 = float(p.get("t1", 0.0))
    t2 = float(p.get("t2", t1 + float(p.get("t", 1.0))))
    lo, hi = parse_box(p.get("box", _default_box(d, 2.0)))
    if "n_points" in p and d == 1:
        xs = np.linspace(lo[0], hi[0], int(p["n_points"]))[:, None]
        grid = Grid.uniform(lo, hi, (hi[0] - lo[0]) / (int(p["n_points"]) - 1))
    else:
        grid = Grid.uniform(lo, hi, float(p.get("h_x", 0.01)))
        xs = grid.points()
    op = str(p.get("operator", "positive"))
    h = float(p.get("h", 0.01))
    if op == "positive":
        res = positive_operator(phi, system, t1, t2, xs, h=h)
    elif op == "negative":
        res = negative_operator(phi, system, t1, t2, xs, h=h)
    else:
        raise ConfigError("params.operator must be 'positive' or 'negative'")
    io.write_grid_function(out / "values.csv", xs, res.values, {"y": res.maximizers})
    io.write_json(io.operator_report(op, t1, t2, grid, res.values, res.maximizers), out / "operator.json")
    cert = c11_certificate(grid.reshape(res.values), grid.spacing)
    results = {"operator": op, "t1": t1, "t2": t2, "n_points": len(xs), "c11": cert.as_dict()}
    ok = True
    if "oracle" in p:
        err = float(np.abs(res.values - _closed_form(str(p["oracle"]), xs, t2 - t1)).max())
        tol = float(p.get("tol", 1e-4))
        results.update({"oracle": p["oracle"], "max_error": err, "tol": tol})
        ok = err <= tol
    results["pass"] = ok
    return results, ok


def _t_grid(p: dict):
    tg = p.get("t_grid", [0.1, 1.0, 0.1])
    if isinstance(tg, list) and len(tg) == 3 and not p.get("t_grid_explicit", False):
        start, stop, step = map(float, tg)
        return np.round(np.arange(start, stop + 0.5 * step, step), 12)
    return np.asarray(tg, float)


@experiment("critical-time", "bracket t_phi; certificate at a safe time and failure at a late time")
def run_critical_time(cfg: ExperimentConfig, out: Path):
    p = cfg.params
    d = infer_dim(cfg)
    phi, system = build_phi(cfg.phi, d), build_system(cfg.system, d)
    h = float(p.get("h", 0.01))
    x_grid = _grid_from(p, "box", _default_box(d, 1.5), h)
    y_grid = Grid.uniform(phi.domain.lower, phi.domain.upper, float(p.get("y_h", h)))
    est = estimate_critical_time(phi, system, _t_grid(p), x_grid, y_grid, tol=float(p.get("tol", 0.05)),
                                 cap=p.get("cap"))
    results = {"estimate": est.as_dict()}
    ok = True
    if "t_pass" in p:
        r = regularity_probe(phi, system, float(p["t_pass"]), x_grid, y_grid)
        results["at_t_pass"] = {"t": r["t"], "certificate": r["certificate"], "nonunique": r["nonunique"], "fail": r["fail"]}
        ok &= not r["fail"]
        io.write_grid_function(out / "t_pass_values.csv", x_grid.points(), r["values"], {"y": r["maximizers"]})
    if "t_fail" in p:
        r = regularity_probe(phi, system, float(p["t_fail"]), x_grid, y_grid)
        results["at_t_fail"] = {"t": r["t"], "certificate": r["certificate"], "nonunique": r["nonunique"], "fail": r["fail"]}
        ok &= r["fail"]
        io.write_grid_function(out / "t_fail_values.csv", x_grid.points(), r["values"], {"y": r["maximizers"]})
    if "expect_lower" in p:
        ok &= est.t_phi_lower >= float(p["expect_lower"]) - 1e-12
    if "expect_upper" in p:
        ok &= est.t_phi_upper <= float(p["expect_upper"]) + 1e-12
    results["pass"] = bool(ok)
    return results, bool(ok)


@experiment("inf-repr", "T̆ phi against the infimum of T̆ f over touching quadratics")
def run_inf_repr(cfg: ExperimentConfig, out: Path):
    p = cfg.params
    d = infer_dim(cfg)
    system = build_system(cfg.system, d)
    names = p.get("phis", [cfg.phi.get("name")])
    t1 = float(p.get("t1", 0.0))
    t2 = t1 + float(p.get("t", 0.2))
    lo, hi = parse_box(p.get("box", _default_box(d, 2.0)))
    xs = np.linspace(lo[0], hi[0], int(p.get("n_points", 401)))[:, None] if d == 1 else Grid.uniform(lo, hi, float(p.get("h_x", 0.05))).points()
    tol = float(p.get("tol", 5e-3))
    results, ok = [], True
    for name in names:
        spec = dict(cfg.phi) if name == cfg.phi.get("name") else {"name": name}
        phi = build_phi(spec, d)
        rep = verify_inf_representation(phi, system, t1, t2, xs, h=float(p.get("h", 0.01)),
                                        fiber_samples=int(p.get("fiber_samples", 201)))
        io.write_grid_function(out / f"{name}_inf_repr.csv", xs, rep.pop("values"), {"inf": rep.pop("inf_values"),
                                                                                   "y": rep.pop("maximizers")})
        rep.update({"phi": name, "tol": tol, "pass": rep["max_deviation"] < tol})
        ok &= rep["pass"]
        results.append(rep)
    return {"functions": results}, ok


@experiment("localize", "maximizers of the positive operator stay within lambda_l * t + 2h of x")
def run_localize(cfg: ExperimentConfig, out: Path):
    p = cfg.params
    d = infer_dim(cfg)
    phi = build_phi(cfg.phi, d)
    lip = float(p.get("lipschitz", phi.lipschitz_estimate()))
    systems = p.get("systems", [dict(cfg.system)])
    h = float(p.get("h", 0.01))
    t_max = float(p.get("t_max", 0.5))
    lo, hi = parse_box(p.get("box", _default_box(d, 2.0)))
    rng = np.random.default_rng(cfg.seed)
    results, ok = [], True
    rows = []
    for spec in systems:
        system = build_system(spec, d)
        n = int(spec.get("n", p.get("n", 500)))
        bound = maximizer_radius(system, lip, 0.0, t_max)
        xs = rng.uniform(lo, hi, size=(n, d))
        ts = rng.uniform(0.0, t_max, size=n)
        ts = np.maximum(ts, 1e-3)
        y_grid = Grid.uniform(phi.domain.lower, phi.domain.upper, h)
        worst, viol = -np.inf, 0
        for x, t in zip(xs, ts):
            res = positive_operator(phi, system, 0.0, float(t), x[None], y_grid,
                                    knots=int(p.get("knots", 16)))
            dist = float(np.linalg.norm(system.domain.displacement(x, res.maximizers[0])))
            allowed = bound.lam * t + 2 * h
            viol += dist > allowed
            worst = max(worst, dist - allowed)
            rows.append([spec.get("label", system.name), float(t), *map(float, x), *map(float, res.maximizers[0]), dist, allowed])
        results.append({"system": spec.get("label", system.name), "n": n, "bound": bound.as_dict(),
                        "violations": int(viol), "worst_margin": float(worst)})
        ok &= viol == 0
    header = ["system", "t"] + [f"x{i}" for i in range(d)] + [f"y{i}" for i in range(d)] + ["distance", "allowed"]
    io.write_csv(out / "localization.csv", header, rows)
    return {"lipschitz": lip, "systems": results}, ok


@experiment("flow", "energy drift, variational Jacobian vs finite differences, free-system X_p, symplecticity")
def run_flow(cfg: ExperimentConfig, out: Path):
    p = cfg.params
    d = infer_dim(cfg)
    system = build_system(cfg.system, d)
    x0 = np.array(parse_vector(p.get("x0", [0.5] * d)))
    p0 = np.array(parse_vector(p.get("p0", [1.0] * d)))
    T = float(p.get("T", 1.0))
    dt = float(p.get("dt", 1e-3))
    steps = int(math.ceil(T / dt - 1e-9))
    traj = hamiltonian_flow(system, 0.0, T, x0, p0, steps, direction="forward")
    traj.to_csv(out / "trajectory.csv")
    drift = traj.energy_drift()
    drift_tol = float(p.get("drift_tol", 1e-7))
    # Jacobian of the flow map vs central differences
    bump = float(p.get("fd_step", 1e-5))
    t1, t2 = float(p.get("t1", 0.0)), float(p.get("t2", 1.0))
    vs = variational_flow(system, t1, t2, x0, p0)
    fd = np.empty((d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = bump
        fd[:, j] = (flow_map(system, x0, t1, t2, p0 + e) - flow_map(system, x0, t1, t2, p0 - e)) / (2 * bump)
    jac_err = float(np.abs(vs.X_p - fd).max())
    jac_tol = float(p.get("jac_tol", 1e-5))
    M = monodromy(system, t1, t2, x0, p0)
    sym = symplectic_defect(M)
    free = build_system({"name": "free"}, d)
    fv = variational_flow(free, t1, t2, x0, p0)
    free_err = float(np.abs(fv.X_p + (t2 - t1) * np.eye(d)).max())
    win = diffeo_window(free, x0, float(p.get("R", 2.0)))
    sys_win = diffeo_window(system, x0, float(p.get("R", 2.0)))
    ok = (drift < drift_tol and jac_err < jac_tol and free_err <= 1e-14 and sym < 1e-6 and win.c_R == 1.0
          and all(pr["ok"] for pr in win.probes))
    results = {
        "energy_drift": drift, "drift_tol": drift_tol, "integrator": traj.method,
        "jacobian_error": jac_err, "jacobian_tol": jac_tol, "X_p": vs.X_p, "X_p_fd": fd,
        "symplectic_defect": sym,
        "free_X_p_error": free_err, "free_window": win.as_dict(), "system_window": sys_win.as_dict(),
        "pass": bool(ok),
    }
    return results, bool(ok)


@experiment("dim", "box-counting dimension of a sampled singular set, and labels at known singular abscissae")
def run_dim(cfg: ExperimentConfig, out: Path):
    p = cfg.params
    d = infer_dim(cfg)
    phi = build_phi(cfg.phi, d)
    h = float(p.get("h", 2.0 ** -10))
    grid = _grid_from(p, "box", _default_box(d, 1.0), h)
    sg = classify_grid(phi, grid)
    k = int(p.get("k", 1))
    pts = sg.singular_points(k)
    j0, j1 = p.get("scale_exponents", [2, 10])
    scales = [2.0 ** -j for j in range(int(j0), int(j1) + 1)]
    est, resid, counts = box_counting_dimension(pts, scales)
    expected = float(p.get("expected", d - k))
    tol = float(p.get("tol", 0.2))
    ok = abs(est - expected) <= tol
    results = {"k": k, "estimate": est, "fit_residual": resid, "counts": {str(e): c for e, c in counts.items()},
               "expected": expected, "tol": tol, "n_points": int(len(pts)), "strata_counts": sg.counts()}
    if "abscissae" in p:
        nodes = grid.points()
        checks = []
        for a in p["abscissae"]:
            sel = np.abs(nodes[:, 0] - float(a)) <= 1e-12
            labs = np.unique(sg.labels[sel]).tolist()
            checks.append({"x1": float(a), "nodes": int(sel.sum()), "labels": labs,
                           "pass": bool(sel.any() and labs == [k])})
        results["abscissa_labels"] = checks
        ok &= all(c["pass"] for c in checks)
    io.write_csv(out / "singular_points.csv", [f"x{i}" for i in range(d)], (list(map(float, r)) for r in pts))
    results["pass"] = bool(ok)
    return results, bool(ok)


@experiment("strata", "stratum labels on a grid plus component counts of the Sigma^{<=k} masks")
def run_strata(cfg: ExperimentConfig, out: Path):
    p = cfg.params
    d = infer_dim(cfg)
    phi = build_phi(cfg.phi, d)
    grid = _grid_from(p, "box", _default_box(d, 1.0), float(p.get("h", 0.01)))
    sg = classify_grid(phi, grid)
    sg.to_csv(out / "strata.csv")
    comps = {str(k): connectivity_report(sg, k) for k in range(d + 1)}
    io.write_json(comps, out / "components.json")
    return {"counts": sg.counts(), "components": {k: v["components"] for k, v in comps.items()},
            "interfaces": int(len(sg.crossings)), "pass": True}, True


@experiment("path", "broken-line path between two points avoiding Sigma^{>=2}")
def run_path(cfg: ExperimentConfig, out: Path):
    p = cfg.params
    d = infer_dim(cfg)
    phi = build_phi(cfg.phi, d)
    a = parse_vector(p.get("a", [-1.0] + [0.0] * (d - 1)), "a")
    b = parse_vector(p.get("b", [1.0] + [0.0] * (d - 1)), "b")
    tol = float(p.get("tol", 1e-3))
    try:
        line = broken_line_path(phi, a, b, p.get("r"), int(p.get("n_samples", 10)), cfg.seed, tol)
    except NoPathFoundAtResolution as exc:
        return {"error": "NoPathFoundAtResolution", "message": str(exc), "failure_density": exc.failure_density,
                "pass": False}, False
    res = line.as_dict()
    res["valid_refined"] = path_is_valid(phi, line, tol)
    res["bisector_residual"] = float(abs((line.z - 0.5 * (line.a + line.b)) @ (line.b - line.a)))
    io.write_json(res, out / "path.json")
    res["pass"] = bool(res["valid_refined"])
    return res, res["pass"]


@experiment("topology", "broken-line seed sweep and connectivity of stratum masks")
def run_topology(cfg: ExperimentConfig, out: Path):
    p = cfg.params
    ok = True
    results = {}
    path_p = p.get("path", {})
    if path_p:
        phi = build_phi(path_p.get("phi", cfg.phi), 2)
        a, b = parse_vector(path_p.get("a", "-1,0")), parse_vector(path_p.get("b", "1,0"))
        n_seeds = int(path_p.get("seeds", 100))
        n_samples = int(path_p.get("n_samples", 10))
        tol = float(path_p.get("tol", 1e-3))
        refine = int(path_p.get("validate_refine", 10))
        succ, attempts, valid, bis = 0, [], True, 0.0
        rows = []
        for seed in range(cfg.seed, cfg.seed + n_seeds):
            try:
                line = broken_line_path(phi, a, b, path_p.get("r"), n_samples, seed, tol)
            except NoPathFoundAtResolution:
                rows.append([seed, "", "", 0])
                continue
            succ += 1
            attempts.append(line.attempts)
            valid &= path_is_valid(phi, line, tol, refine)
            bis = max(bis, float(abs((line.z - 0.5 * (line.a + line.b)) @ (line.b - line.a))))
            rows.append([seed, *map(float, line.z), line.attempts])
        io.write_csv(out / "paths.csv", ["seed", "z0", "z1", "attempts"], rows)
        rate = succ / n_seeds
        results["path"] = {"seeds": n_seeds, "success_rate": rate, "max_attempts": max(attempts) if attempts else None,
                           "all_refined_valid": bool(valid), "validate_refine": refine, "max_bisector_residual": bis, "n_samples": n_samples}
        ok &= rate == 1.0 and valid and bis <= 1e-12
    conn = []
    for c in p.get("connectivity", []):
        phi = build_phi(c["phi"], 2)
        grid = _grid_from(c, "box", _default_box(2, 1.0), float(c.get("h", 0.01)))
        sg = classify_grid(phi, grid)
        rep = connectivity_report(sg, int(c["k"]))
        entry = {"phi": c["phi"].get("name"), "k": int(c["k"]), "components": rep["components"],
                 "sizes": rep["sizes"][:20]}
        if "expect" in c:
            entry["expect"] = int(c["expect"])
            entry["pass"] = rep["components"] == int(c["expect"])
        if "expect_min" in c:
            entry["expect_min"] = int(c["expect_min"])
            entry["pass"] = rep["components"] >= int(c["expect_min"])
        ok &= entry.get("pass", True)
        conn.append(entry)
    results["connectivity"] = conn
    results["pass"] = bool(ok)
    return results, bool(ok)


@experiment("cross-method", "direct action minimisation vs characteristic shooting for h(t1,t2,x,y)")
def run_cross_method(cfg: ExperimentConfig, out: Path):
    p = cfg.params
    d = infer_dim(cfg)
    system = build_system(cfg.system, d)
    n = int(p.get("n", 100))
    t_max = float(p.get("t_max", 0.3))
    t_min = float(p.get("t_min", 0.05))
    lo, hi = parse_box(p.get("box", _default_box(d, 1.0)))
    knots = int(p.get("knots", 64))
    tol = float(p.get("tol", 1e-4))
    rng = np.random.default_rng(cfg.seed)
    rows, worst, failures = [], 0.0, 0
    for _ in range(n):
        x = rng.uniform(lo, hi)
        y = rng.uniform(lo, hi)
        t = float(rng.uniform(t_min, t_max))
        try:
            hd, _ = fundamental_solution(system, 0.0, t, x, y, knots, "direct")
            hs, _ = fundamental_solution(system, 0.0, t, x, y, method="shooting")
            diff = abs(hd - hs)
        except Exception as exc:  # reported, counted as failure
            failures += 1
            rows.append([t, *map(float, x), *map(float, y), float("nan"), float("nan"), type(exc).__name__])
            continue
        worst = max(worst, diff)
        rows.append([t, *map(float, x), *map(float, y), hd, hs, ""])
    header = ["t"] + [f"x{i}" for i in range(d)] + [f"y{i}" for i in range(d)] + ["direct", "shooting", "error"]
    io.write_csv(out / "pairs.csv", header, rows)
    ok = failures == 0 and worst <= tol
    return {"n": n, "max_abs_difference": worst, "tol": tol, "failures": failures, "knots": knots,
            "pass": bool(ok)}, bool(ok)


@experiment("determinism", "rerun shipped configs twice and compare report.json byte for byte")
def run_determinism(cfg: ExperimentConfig, out: Path):
    from .cli import execute  # local import: the CLI layer depends on this module

    base = Path(cfg.source).parent if cfg.source else Path.cwd()
    results, ok = [], True
    for rel in cfg.params.get("configs", []):
        path = Path(rel)
        if not path.is_absolute():
            path = (base / path) if (base / path).exists() else Path(rel)
        with tempfile.TemporaryDirectory() as tmp:
            r1 = Path(tmp) / "a"
            r2 = Path(tmp) / "b"
            execute(str(path), out=str(r1), quiet=True)
            execute(str(path), out=str(r2), quiet=True)
            same = filecmp.cmp(r1 / "report.json", r2 / "report.json", shallow=False)
            csv_same = all(filecmp.cmp(f, r2 / f.name, shallow=False) for f in sorted(r1.glob("*.csv")))
        results.append({"config": Path(rel).name, "report_identical": bool(same), "csv_identical": bool(csv_same)})
        ok &= same and csv_same
    return {"configs": results, "pass": bool(ok)}, bool(ok)


def run(cfg: ExperimentConfig, out: Path):
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment: unknown experiment {cfg.experiment!r}; known: {sorted(EXPERIMENTS)}")
    fn: Callable = EXPERIMENTS[cfg.experiment][0]
    out.mkdir(parents=True, exist_ok=True)
    return fn(cfg, out)
