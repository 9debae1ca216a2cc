"""Fundamental solutions, Lax-Oleinik operators and their regularity diagnostics.

``h(t1, t2, x, y)`` is the least action of curves from ``x`` at ``t1`` to ``y`` at ``t2``.
The negative operator is ``T phi(x) = min_y phi(y) + h(t1, t2, y, x)``, the positive one
``T̆ phi(x) = max_y phi(y) - h(t1, t2, x, y)``. Both are evaluated by a global grid scan
followed by a vectorised zoom refinement, so multimodal objectives past the critical
time are handled by construction.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import LocalizationViolated, MissingConstants, NoConvergence, OutsideWindow, ShootingNotDiffeo
from .flow import integrate, invert_flow_map, variational_flow
from .grids import Grid
from .semiconcave import MarginalFunction, QuadraticFamily
from .tonelli import TonelliSystem

DEFAULT_KNOTS = 64
SCAN_KNOTS = 16
GRAD_TOL = 1e-8
NONUNIQUE_SPACING_FACTOR = 10.0
NONUNIQUE_VALUE_TOL = 1e-7
_SCAN_BLOCK = 4_000_000


# ---------------------------------------------------------------------------
# curves and the discrete action


@dataclass
class CurvePath:
    times: np.ndarray  # (N+1,)
    points: np.ndarray  # (N+1, d)
    costates: Optional[np.ndarray]
    action: float
    method: str
    iterations: int = 0

    def as_dict(self) -> dict:
        return {
            "times": self.times.tolist(),
            "points": self.points.tolist(),
            "costates": None if self.costates is None else self.costates.tolist(),
            "action": self.action,
            "method": self.method,
            "iterations": self.iterations,
        }


def trapezoid_action(system: TonelliSystem, times, points) -> np.ndarray:
    """``sum_i dt/2 [L(s_i, q_i, v_i) + L(s_{i+1}, q_{i+1}, v_i)]`` with ``v_i`` the segment slope.

    ``points`` has shape ``(..., N+1, d)``.
    """
    times = np.asarray(times, float)
    q = np.asarray(points, float)
    dt = np.diff(times)
    v = np.diff(q, axis=-2) / dt[:, None]
    a = system.L(times[:-1], q[..., :-1, :], v)
    b = system.L(times[1:], q[..., 1:, :], v)
    return np.sum(0.5 * dt * (a + b), axis=-1)


def _action_derivatives(system, s, q, delta):
    """Value, gradient ``(B, N+1, d)`` and block-tridiagonal Hessian of the trapezoidal action."""
    v = (q[:, 1:] - q[:, :-1]) / delta
    A = system.lagrangian(s[:-1], q[:, :-1], v)
    Bj = system.lagrangian(s[1:], q[:, 1:], v)
    value = np.sum(0.5 * delta * (A.value + Bj.value), axis=-1)
    mom = 0.5 * (A.dv + Bj.dv)
    g_left = 0.5 * delta * A.dx - mom
    g_right = 0.5 * delta * Bj.dx + mom
    B, n1, d = q.shape
    grad = np.zeros_like(q)
    grad[:, :-1] += g_left
    grad[:, 1:] += g_right
    Avx = np.swapaxes(A.dxv, -1, -2)
    Bvx = np.swapaxes(Bj.dxv, -1, -2)
    vv = (A.dvv + Bj.dvv) / (2.0 * delta)
    diag_left = 0.5 * delta * A.dxx - 0.5 * A.dxv - 0.5 * Avx + vv
    diag_right = 0.5 * delta * Bj.dxx + 0.5 * Bj.dxv + 0.5 * Bvx + vv
    off = 0.5 * A.dxv - 0.5 * Bvx - vv  # block (i, i+1)
    diag = np.zeros((B, n1, d, d))
    diag[:, :-1] += diag_left
    diag[:, 1:] += diag_right
    return value, grad, diag, off, g_left, g_right


def _assemble_interior(diag, off):
    """Dense Hessian restricted to interior knots 1..N-1, shape ``(B, (N-1)d, (N-1)d)``."""
    B, n1, d, _ = diag.shape
    m = n1 - 2
    Hm = np.zeros((B, m, d, m, d))
    idx = np.arange(m)
    Hm[:, idx, :, idx, :] = np.moveaxis(diag[:, 1:-1], 0, 1)
    if m > 1:
        o = off[:, 1:-1]  # blocks (i, i+1) for interior i = 1..N-2
        Hm[:, idx[:-1], :, idx[1:], :] = np.moveaxis(o, 0, 1)
        Hm[:, idx[1:], :, idx[:-1], :] = np.moveaxis(np.swapaxes(o, -1, -2), 0, 1)
    return Hm.reshape(B, m * d, m * d)


def _lift(system, x, y):
    """Endpoint ``y`` lifted to the covering space nearest to ``x`` on tori."""
    if system.domain.is_torus:
        return x + system.domain.displacement(x, y)
    return y


def direct_action_batch(system: TonelliSystem, t1: float, t2: float, X, Y, knots: int = DEFAULT_KNOTS,
                        tol: float = GRAD_TOL, max_iter: int = 60, q0=None, raise_on_fail: bool = True):
    """Minimise the trapezoidal action for a batch of endpoint pairs with damped Newton.

    Returns ``(values (B,), knots (B, N+1, d), iterations)``.
    """
    if not t2 > t1:
        raise ValueError("need t1 < t2")
    if knots < 2:
        raise ValueError("need at least 2 knot intervals")
    X = np.atleast_2d(np.asarray(X, float))
    Y = np.atleast_2d(np.asarray(Y, float))
    X, Y = np.broadcast_arrays(X, Y)
    Y = _lift(system, X, Y)
    B, d = X.shape
    N = int(knots)
    s = np.linspace(t1, t2, N + 1)
    delta = (t2 - t1) / N
    lam = np.linspace(0.0, 1.0, N + 1)[None, :, None]
    q = X[:, None, :] * (1 - lam) + Y[:, None, :] * lam if q0 is None else np.array(q0, float)
    q[:, 0], q[:, -1] = X, Y
    if N == 1:
        val = trapezoid_action(system, s, q)
        return val, q, 0
    damping = np.zeros(B)
    it = 0
    for it in range(1, max_iter + 1):
        val, grad, diag, off, _, _ = _action_derivatives(system, s, q, delta)
        g = grad[:, 1:-1].reshape(B, -1)
        gnorm = np.abs(g).max(axis=1)
        active = gnorm >= tol
        if not np.any(active):
            break
        a = np.flatnonzero(active)
        Hm = _assemble_interior(diag[a], off[a])
        scale = np.abs(np.diagonal(Hm, axis1=1, axis2=2)).max(axis=1)
        Hm = Hm + (damping[a] * scale)[:, None, None] * np.eye(Hm.shape[-1])
        try:
            step = np.linalg.solve(Hm, -g[a][..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = np.stack([np.linalg.lstsq(h, -gg, rcond=None)[0] for h, gg in zip(Hm, g[a])])
        # backtracking on the action for the active problems
        alpha = np.ones(len(a))
        base = val[a]
        for _ in range(30):
            trial = q[a].copy()
            trial[:, 1:-1] += (alpha[:, None] * step).reshape(len(a), N - 1, d)
            tv = trapezoid_action(system, s, trial)
            bad = ~(tv <= base + 1e-14 * (1 + np.abs(base))) | ~np.isfinite(tv)
            if not np.any(bad):
                break
            alpha = np.where(bad, 0.5 * alpha, alpha)
        q[a] = trial
        # indefinite or poorly scaled Hessians: raise damping when the full step was rejected
        damping[a] = np.where(alpha < 1.0, np.maximum(10 * damping[a], 1e-8), 0.1 * damping[a])
    val, grad, *_ = _action_derivatives(system, s, q, delta)
    gnorm = np.abs(grad[:, 1:-1].reshape(B, -1)).max(axis=1)
    if raise_on_fail and np.any(gnorm >= 10 * tol):
        raise NoConvergence(f"action minimisation stalled, max gradient {gnorm.max():.3e}", best=(val, q))
    return val, q, it


def _discrete_costates(system, s, q, delta):
    _, _, _, _, g_left, g_right = _action_derivatives(system, s, q[None], delta)
    p = np.empty_like(q)
    p[0] = -g_left[0, 0]
    p[1:] = g_right[0]
    return p


def fundamental_solution(system: TonelliSystem, t1: float, t2: float, x, y, knots: int = DEFAULT_KNOTS,
                         method: str = "direct", steps: Optional[int] = None, p0=None):
    """``h(t1, t2, x, y)`` and its minimising curve, by direct action minimisation or shooting."""
    if not t2 > t1:
        raise ValueError("need t1 < t2")
    x = np.atleast_1d(np.asarray(x, float))
    y = np.atleast_1d(np.asarray(y, float))
    if method == "direct":
        val, q, it = direct_action_batch(system, t1, t2, x[None], y[None], knots)
        s = np.linspace(t1, t2, knots + 1)
        p = _discrete_costates(system, s, q[0], (t2 - t1) / knots)
        return float(val[0]), CurvePath(s, q[0], p, float(val[0]), "direct", it)
    if method == "shooting":
        return _shooting(system, t1, t2, x, y, steps, p0)
    raise ValueError("method must be 'direct' or 'shooting'")


def _shooting(system, t1, t2, x, y, steps, p0):
    tau = t2 - t1
    y = _lift(system, x, y)
    try:
        p, it = invert_flow_map(system, y, t1, t2, x, p0=p0, steps=steps, method="rk4", tol=1e-13, max_iter=20)
    except OutsideWindow as exc:
        raise NoConvergence(f"shooting failed: {exc}") from exc
    vs = variational_flow(system, t1, t2, y, p, steps, method="rk4")
    sym = -0.5 * (vs.X_p + vs.X_p.T) / tau
    if np.linalg.eigvalsh(sym).min() <= 0:
        raise ShootingNotDiffeo(f"-X_p/tau is not positive definite for t2 - t1 = {tau}")
    res = integrate(system, t2, t1, y, p, steps, "rk4", record=True, with_action=True)
    value = -float(res["action"])
    traj = res["trajectory"]
    return value, CurvePath(traj.t[::-1].copy(), traj.x[::-1].copy(), traj.p[::-1].copy(), value, "shooting", it)


# ---------------------------------------------------------------------------
# kernels h(t1, t2, x, y) on batches


def make_kernel(system: TonelliSystem, t1: float, t2: float, knots: int = SCAN_KNOTS, reverse: bool = False):
    """Callable ``(xs (M, d), ys (M, K, d)) -> h`` values ``(M, K)``.

    ``reverse=False`` gives ``h(t1, t2, x, y)``; ``reverse=True`` gives ``h(t1, t2, y, x)``.
    """
    if system.fundamental is not None:
        def kern(xs, ys):
            xb = np.broadcast_to(xs[:, None, :], ys.shape)
            return system.fundamental(t1, t2, ys, xb) if reverse else system.fundamental(t1, t2, xb, ys)
        return kern

    def kern(xs, ys):
        M, K, d = ys.shape
        xb = np.broadcast_to(xs[:, None, :], ys.shape).reshape(-1, d)
        yb = ys.reshape(-1, d)
        out = np.empty(len(xb))
        chunk = max(1, 200_000 // (knots * d * d + 1))
        for s in range(0, len(xb), chunk):
            a, b = xb[s:s + chunk], yb[s:s + chunk]
            src, dst = (b, a) if reverse else (a, b)
            out[s:s + chunk] = direct_action_batch(system, t1, t2, src, dst, knots, tol=1e-10, raise_on_fail=False)[0]
        return out.reshape(M, K)

    return kern


# ---------------------------------------------------------------------------
# grid scan + zoom refinement


def _zoom_offsets(d: int) -> np.ndarray:
    offs = np.array(list(itertools.product(range(-2, 3), repeat=d)), float)
    centre = np.all(offs == 0, axis=1)
    return np.vstack([offs[centre], offs[~centre]])  # centre first: ties keep it


def zoom_refine(objective, xs, y0, delta, lower, upper, iters: int = 48):
    """Maximise ``objective(xs, ys)`` locally from ``y0`` by shrinking 5^d stencils."""
    xs = np.atleast_2d(xs)
    y = np.array(y0, float)
    d = y.shape[-1]
    offs = _zoom_offsets(d)
    step = np.broadcast_to(np.asarray(delta, float), (d,)).copy()
    lo, hi = np.asarray(lower, float), np.asarray(upper, float)
    best = objective(xs, y[:, None, :])[:, 0]
    for _ in range(iters):
        cand = np.clip(y[:, None, :] + offs[None] * (0.5 * step), lo, hi)
        vals = objective(xs, cand)
        k = np.argmax(vals, axis=1)
        rows = np.arange(len(y))
        improve = vals[rows, k] > best
        y = np.where(improve[:, None], cand[rows, k], y)
        best = np.where(improve, vals[rows, k], best)
        step *= 0.5
        if np.all(step < 1e-11 * (1.0 + np.abs(y).max())):
            break
    return best, y


def scan_maximize(objective, xs, grid: Grid, refine: bool = True, zoom_iters: int = 48, grid_objective=None):
    """Global maximum of ``objective(x, y)`` over grid nodes ``y`` for every row of ``xs``.

    ``grid_objective(x_rows, nodes)`` may supply the scan values directly (e.g. with cached data terms).
    """
    xs = np.atleast_2d(np.asarray(xs, float))
    pts = grid.points()
    G = len(pts)
    M = len(xs)
    best_val = np.empty(M)
    best_y = np.empty((M, grid.dim))
    rows = max(1, _SCAN_BLOCK // max(G, 1))
    for s in range(0, M, rows):
        xc = xs[s:s + rows]
        nodes = np.broadcast_to(pts, (len(xc),) + pts.shape)
        vals = objective(xc, nodes) if grid_objective is None else grid_objective(xc, nodes)
        k = np.argmax(vals, axis=1)
        best_val[s:s + rows] = vals[np.arange(len(xc)), k]
        best_y[s:s + rows] = pts[k]
    if refine:
        best_val, best_y = zoom_refine(objective, xs, best_y, grid.spacing, grid.lower, grid.upper, zoom_iters)
    return best_val, best_y


# ---------------------------------------------------------------------------
# Lax-Oleinik operators


@dataclass
class LocalizationBound:
    lipschitz: float
    lam: float
    window: tuple
    components: dict = field(default_factory=dict)

    def radius(self, t: float) -> float:
        return self.lam * t

    def as_dict(self) -> dict:
        return {"lipschitz": self.lipschitz, "lambda": self.lam, "window": list(self.window), "components": self.components}


def default_y_grid(phi: MarginalFunction, h: float) -> Grid:
    return Grid.uniform(phi.domain.lower, phi.domain.upper, h)


def _phi_values(phi, ys):
    shape = ys.shape[:-1]
    return phi(ys.reshape(-1, ys.shape[-1]), check=False).reshape(shape)


@dataclass
class OperatorResult:
    values: np.ndarray
    maximizers: np.ndarray
    operator: str
    t1: float
    t2: float
    y_grid: Grid


def positive_operator(phi, system: TonelliSystem, t1: float, t2: float, xs, y_grid: Optional[Grid] = None,
                      h: float = 0.01, localization: Optional[LocalizationBound] = None, refine: bool = True,
                      knots: int = SCAN_KNOTS) -> OperatorResult:
    """``T̆ phi(x) = max_y phi(y) - h(t1, t2, x, y)`` for every row of ``xs``."""
    if not t2 > t1:
        raise ValueError("need t1 < t2")
    xs = np.atleast_2d(np.asarray(xs, float))
    grid = y_grid or default_y_grid(phi, h)
    kern = make_kernel(system, t1, t2, knots)

    def objective(x, y):
        return _phi_values(phi, y) - kern(x, y)

    phi_nodes = phi(grid.points(), check=False)
    vals, ys = scan_maximize(objective, xs, grid, refine, grid_objective=lambda x, y: phi_nodes - kern(x, y))
    if localization is not None:
        disp = np.linalg.norm(system.domain.displacement(xs, ys), axis=-1)
        bound = localization.radius(t2 - t1) + float(np.max(grid.spacing))
        if np.any(disp > bound):
            i = int(np.argmax(disp - bound))
            raise LocalizationViolated(f"|y*-x| = {disp[i]:.6g} exceeds {bound:.6g} at x={xs[i]}")
    return OperatorResult(vals, ys, "positive", t1, t2, grid)


def negative_operator(phi, system: TonelliSystem, t1: float, t2: float, xs, y_grid: Optional[Grid] = None,
                      h: float = 0.01, refine: bool = True, knots: int = SCAN_KNOTS) -> OperatorResult:
    """``T phi(x) = min_y phi(y) + h(t1, t2, y, x)`` for every row of ``xs``."""
    if not t2 > t1:
        raise ValueError("need t1 < t2")
    xs = np.atleast_2d(np.asarray(xs, float))
    grid = y_grid or default_y_grid(phi, h)
    kern = make_kernel(system, t1, t2, knots, reverse=True)

    def objective(x, y):
        return -(_phi_values(phi, y) + kern(x, y))

    phi_nodes = phi(grid.points(), check=False)
    vals, ys = scan_maximize(objective, xs, grid, refine, grid_objective=lambda x, y: -(phi_nodes + kern(x, y)))
    return OperatorResult(-vals, ys, "negative", t1, t2, grid)


def _as_points(x, d):
    x = np.asarray(x, float)
    single = x.ndim == 0 or (x.ndim == 1 and x.shape[0] == d and d > 1) or (x.ndim == 1 and d == 1 and x.size == 1)
    return np.atleast_1d(x).reshape(-1, d), single


def lax_oleinik_positive(phi, system, t1, t2, x, grid: Optional[Grid] = None, h: float = 0.01,
                         localization: Optional[LocalizationBound] = None):
    """Positive operator at one point (returns ``(value, maximizer)``) or many (arrays)."""
    pts, single = _as_points(x, phi.dim)
    res = positive_operator(phi, system, t1, t2, pts, grid, h, localization)
    if single:
        return float(res.values[0]), res.maximizers[0]
    return res.values, res.maximizers


def lax_oleinik_negative(phi, system, t1, t2, x, grid: Optional[Grid] = None, h: float = 0.01):
    pts, single = _as_points(x, phi.dim)
    res = negative_operator(phi, system, t1, t2, pts, grid, h)
    if single:
        return float(res.values[0])
    return res.values


def maximizer_radius(system: TonelliSystem, lipschitz: float, tau1: float = 0.0, tau2: float = 1.0,
                     n_samples: int = 64) -> LocalizationBound:
    """``lambda = c1 + theta*(l + 1) + max |L(s, x, 0)| + c0`` over ``s`` in the window and ``x`` in the domain."""
    if lipschitz < 0:
        raise ValueError("lipschitz must be >= 0")
    if system.theta is None or system.c0 is None:
        raise MissingConstants(f"system {system.name!r} lacks theta or c0")
    s = system.theta_star_exact or system.theta_star
    theta_star = float(s(lipschitz + 1.0))
    d = system.dim
    per_axis = max(2, int(round(n_samples ** (1.0 / d))) if d > 1 else n_samples)
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(system.domain.lower, system.domain.upper)]
    xs = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, d)
    ts = np.linspace(tau1, tau2, 9 if not system.autonomous else 1)
    lmax = max(float(np.abs(system.L(t, xs, np.zeros_like(xs))).max()) for t in ts)
    lam = system.radius_c1 + theta_star + lmax + system.c0
    return LocalizationBound(float(lipschitz), float(lam), (tau1, tau2),
                             {"c1": system.radius_c1, "theta_star": theta_star, "max_abs_L0": lmax, "c0": system.c0})


# ---------------------------------------------------------------------------
# touching families and the inf-representation


@dataclass
class TouchingQuadratic:
    """``f(y) = value + p.(y - anchor) + C/2 |y - anchor|^2``; lies above ``phi`` and touches at ``anchor``."""

    anchor: np.ndarray
    value: float
    p: np.ndarray
    C: float

    def __call__(self, y) -> np.ndarray:
        y = np.asarray(y, float)
        u = y - self.anchor
        return self.value + u @ self.p + 0.5 * self.C * np.sum(u * u, axis=-1)

    def gradient(self, y) -> np.ndarray:
        return self.p + self.C * (np.asarray(y, float) - self.anchor)

    def as_function(self, domain=None) -> MarginalFunction:
        d = len(self.anchor)
        a = self.anchor
        fam = QuadraticFamily([self.value - self.p @ a + 0.5 * self.C * a @ a], (self.p - self.C * a)[None],
                              (self.C * np.eye(d))[None])
        return MarginalFunction(fam, self.C, domain, name="touching")


def touching_family(phi: MarginalFunction, x, fiber_samples: Optional[int] = None) -> list:
    """Quadratics touching ``phi`` from above at ``x``, one per vertex of ``D+phi(x)``.

    With ``fiber_samples`` the superdifferential is additionally sampled (vertices plus an
    interior lattice of about that many points), which realises the whole family at ``x``.
    """
    x = np.atleast_1d(np.asarray(x, float))
    poly = phi.superdifferential(x)
    ps = poly.vertices if fiber_samples is None else poly.sample(max_points=fiber_samples)
    val = phi.evaluate(x)
    return [TouchingQuadratic(x.copy(), val, p.copy(), phi.hessian_bound) for p in ps]


def _positive_quadratic_free(fs: Sequence[TouchingQuadratic], xs, tau):
    """Closed-form ``T̆ f(x)`` of touching quadratics under ``H = |p|^2/2`` (needs ``C tau < 1``)."""
    A = np.array([f.anchor for f in fs])
    P = np.array([f.p for f in fs])
    V = np.array([f.value for f in fs])
    C = np.array([f.C for f in fs])
    if np.any(C * tau >= 1):
        return np.full((len(xs), len(fs)), np.inf)
    w = xs[:, None, :] - A[None]
    u = (tau * P[None] + w) / (1 - C * tau)[None, :, None]
    return V + np.sum(P * u, -1) + 0.5 * C * np.sum(u * u, -1) - np.sum((w - u) ** 2, -1) / (2 * tau)


def positive_of_touching(fs: Sequence[TouchingQuadratic], system, t1, t2, xs, y_grid: Grid):
    """``T̆ f(x)`` for each touching quadratic ``f`` and each row of ``xs``: array ``(M, F)``."""
    xs = np.atleast_2d(xs)
    if system.name == "free" and not system.domain.is_torus and system.fundamental is not None:
        return _positive_quadratic_free(fs, xs, t2 - t1)
    out = np.empty((len(xs), len(fs)))
    kern = make_kernel(system, t1, t2)
    for j, f in enumerate(fs):
        def objective(x, y, f=f):
            return f(y) - kern(x, y)
        out[:, j] = scan_maximize(objective, xs, y_grid)[0]
    return out


def verify_inf_representation(phi: MarginalFunction, system: TonelliSystem, t1: float, t2: float, xs,
                              h: float = 0.01, fiber_samples: int = 201, neighbours: int = 1,
                              y_grid: Optional[Grid] = None) -> dict:
    """Compare ``T̆ phi`` with ``min_f T̆ f`` over touching quadratics anchored at the maximizers.

    For each evaluation point the family gathers the touching quadratics (vertices plus sampled
    fiber) anchored at its own maximizer and those of ``neighbours`` adjacent points.
    """
    xs = np.atleast_2d(np.asarray(xs, float))
    if xs.shape[1] != phi.dim:
        xs = xs.reshape(-1, phi.dim)
    grid = y_grid or default_y_grid(phi, h)
    res = positive_operator(phi, system, t1, t2, xs, grid)
    anchors = np.unique(np.round(res.maximizers, 12), axis=0)
    fam_cache = {}

    def family(y):
        key = tuple(np.round(y, 12))
        if key not in fam_cache:
            fam_cache[key] = touching_family(phi, y, fiber_samples)
        return fam_cache[key]

    inf_vals = np.empty(len(xs))
    min_gap = np.inf
    for i, x in enumerate(xs):
        lo, hi = max(0, i - neighbours), min(len(xs), i + neighbours + 1)
        fs = [f for j in range(lo, hi) for f in family(res.maximizers[j])]
        tv = positive_of_touching(fs, system, t1, t2, x[None], grid)[0]
        inf_vals[i] = tv.min()
        min_gap = min(min_gap, float((tv - res.values[i]).min()))
    dev = np.abs(res.values - inf_vals)
    return {
        "operator": "inf-representation",
        "t1": t1,
        "t2": t2,
        "max_deviation": float(dev.max()),
        "min_family_gap": min_gap,  # inf T̆f - T̆phi, should be >= -round-off
        "n_points": int(len(xs)),
        "n_anchors": int(len(anchors)),
        "fiber_samples": fiber_samples,
        "values": res.values,
        "inf_values": inf_vals,
        "maximizers": res.maximizers,
    }


# ---------------------------------------------------------------------------
# C^{1,1} certificate and the critical time


@dataclass
class C11Certificate:
    semiconcave: float
    semiconvex: float
    cap: float
    passed: bool

    def as_dict(self) -> dict:
        return {"semiconcave": self.semiconcave, "semiconvex": self.semiconvex, "cap": self.cap, "pass": self.passed}


def second_differences(values: np.ndarray, h) -> list:
    """Centered second differences along every axis and (for d >= 2) every face diagonal."""
    f = np.asarray(values, float)
    d = f.ndim
    h = np.broadcast_to(np.asarray(h, float), (d,))
    out = []
    dirs = [tuple(int(i == k) for i in range(d)) for k in range(d)]
    for a, b in itertools.combinations(range(d), 2):
        for sgn in (1, -1):
            e = [0] * d
            e[a], e[b] = 1, sgn
            dirs.append(tuple(e))
    for e in dirs:
        e = np.array(e)
        if any(f.shape[k] < 3 for k in range(d) if e[k] != 0):
            continue
        core = tuple(slice(1, -1) if e[k] != 0 else slice(None) for k in range(d))
        plus = tuple(slice(1 + e[k], f.shape[k] - 1 + e[k]) if e[k] != 0 else slice(None) for k in range(d))
        minus = tuple(slice(1 - e[k], f.shape[k] - 1 - e[k]) if e[k] != 0 else slice(None) for k in range(d))
        length2 = float(np.sum((e * h) ** 2))
        out.append((f[plus] - 2 * f[core] + f[minus]) / length2)
    return out


def c11_certificate(values, h, cap: Optional[float] = None) -> C11Certificate:
    """Semiconcavity / semiconvexity constants of a sampled function and a pass flag.

    ``semiconcave = max(0, max D2)``, ``semiconvex = max(0, -min D2)``; pass iff both are
    finite and below ``cap`` (default ``0.5 / h``, i.e. well below the ``~2/h`` of a kink).
    """
    hs = np.atleast_1d(np.asarray(h, float))
    if cap is None:
        cap = 0.5 / float(hs.max())
    diffs = second_differences(values, hs)
    if not diffs:
        return C11Certificate(0.0, 0.0, float(cap), True)
    hi = max(float(np.max(D)) for D in diffs)
    lo = min(float(np.min(D)) for D in diffs)
    sc, sv = max(0.0, hi), max(0.0, -lo)
    ok = bool(np.isfinite(sc) and np.isfinite(sv) and sc < cap and sv < cap)
    return C11Certificate(sc, sv, float(cap), ok)


@dataclass
class CriticalTimeEstimate:
    t_phi_lower: float
    t_phi_upper: float
    cap: float
    probes: list
    reason: str

    def as_dict(self) -> dict:
        return {"t_phi_lower": self.t_phi_lower, "t_phi_upper": self.t_phi_upper, "cap": self.cap,
                "probes": self.probes, "reason": self.reason}


def detect_nonunique(phi, system, t1, t2, xs, values, maximizers, y_grid: Grid) -> Optional[dict]:
    """Look for a maximizer jump between adjacent points (along the first axis of a 1-D x-grid),
    localise it by bisection and test whether two refined basins attain the same value."""
    hy = float(np.max(y_grid.spacing))
    jumps = np.linalg.norm(np.diff(maximizers, axis=0), axis=1)
    cand = np.flatnonzero(jumps > NONUNIQUE_SPACING_FACTOR * hy)
    kern = make_kernel(system, t1, t2)

    def objective(x, y):
        return _phi_values(phi, y) - kern(x, y)

    for i in cand:
        xa, xb = xs[i].copy(), xs[i + 1].copy()
        ya, yb = maximizers[i].copy(), maximizers[i + 1].copy()
        for _ in range(80):
            xm = 0.5 * (xa + xb)
            if np.all(np.abs(xb - xa) <= 1e-14 * (1 + np.abs(xm))):
                break
            _, ym = scan_maximize(objective, xm[None], y_grid)
            ym = ym[0]
            if np.linalg.norm(ym - ya) <= np.linalg.norm(ym - yb):
                xa, ya = xm, ym
            else:
                xb, yb = xm, ym
        xm = 0.5 * (xa + xb)
        va, ra = zoom_refine(objective, xm[None], ya[None], y_grid.spacing, y_grid.lower, y_grid.upper)
        vb, rb = zoom_refine(objective, xm[None], yb[None], y_grid.spacing, y_grid.lower, y_grid.upper)
        sep = float(np.linalg.norm(ra[0] - rb[0]))
        gap = float(abs(va[0] - vb[0]))
        if sep > NONUNIQUE_SPACING_FACTOR * hy and gap < NONUNIQUE_VALUE_TOL:
            return {"x": xm.tolist(), "maximizers": [ra[0].tolist(), rb[0].tolist()], "value_gap": gap,
                    "separation": sep}
    return None


def regularity_probe(phi, system, t: float, x_grid: Grid, y_grid: Grid, cap: Optional[float] = None) -> dict:
    """C^{1,1} certificate and non-uniqueness test for ``T̆_0^t phi`` on ``x_grid``."""
    xs = x_grid.points()
    res = positive_operator(phi, system, 0.0, t, xs, y_grid)
    cert = c11_certificate(x_grid.reshape(res.values), x_grid.spacing, cap)
    nonuniq = None
    if x_grid.dim == 1:
        nonuniq = detect_nonunique(phi, system, 0.0, t, xs, res.values, res.maximizers, y_grid)
    fail = (not cert.passed) or nonuniq is not None
    return {"t": float(t), "certificate": cert.as_dict(), "nonunique": nonuniq, "fail": bool(fail),
            "values": res.values, "maximizers": res.maximizers}


def estimate_critical_time(phi, system, t_grid: Sequence[float], x_grid: Grid, y_grid: Optional[Grid] = None,
                           tol: float = 0.05, cap: Optional[float] = None, cert_cap: Optional[float] = None,
                           h: float = 0.01) -> CriticalTimeEstimate:
    """Bracket the first time at which ``T̆_0^t phi`` stops being certifiably C^{1,1}."""
    ts = np.asarray(t_grid, float)
    if ts.size == 0 or np.any(np.diff(ts) <= 0):
        raise ValueError("t_grid must be non-empty and increasing")
    cap = float(ts[-1]) if cap is None else float(cap)
    y_grid = y_grid or default_y_grid(phi, h)
    probes = []

    def probe(t):
        r = regularity_probe(phi, system, t, x_grid, y_grid, cert_cap)
        probes.append({"t": r["t"], "fail": r["fail"], "certificate": r["certificate"], "nonunique": r["nonunique"]})
        return r["fail"]

    lower = 0.0
    upper = None
    for t in ts:
        if t > cap:
            break
        if probe(t):
            upper = float(t)
            break
        lower = float(t)
    if upper is None:
        return CriticalTimeEstimate(cap, cap, cap, probes, "no failure up to cap")
    while upper - lower > tol:
        mid = 0.5 * (lower + upper)
        if probe(mid):
            upper = mid
        else:
            lower = mid
    return CriticalTimeEstimate(lower, upper, cap, probes, "certificate or maximizer failure")


def evolve(phi, system, t1: float, t2: float, x_grid: Grid, operator: str = "positive", h: float = 0.01,
           y_grid: Optional[Grid] = None) -> OperatorResult:
    xs = x_grid.points()
    if operator == "positive":
        return positive_operator(phi, system, t1, t2, xs, y_grid, h)
    if operator == "negative":
        return negative_operator(phi, system, t1, t2, xs, y_grid, h)
    raise ValueError("operator must be 'positive' or 'negative'")
