"""Phase-space point clouds for the pseudo-graph ``{(x, p): p in D+phi(x)}``, their transport
under the characteristic flow, Hausdorff distances, and the flowed-graph identity check:
the forward flow over time ``t`` of the gradient graph of ``T̆_0^t phi`` reproduces the
pseudo-graph of ``phi``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import CriticalTimeExceeded, EmptyCloud
from .evolution import detect_nonunique, c11_certificate, default_y_grid, positive_operator
from .flow import flow_endpoint
from .grids import Grid
from .semiconcave import MarginalFunction
from .tonelli import DomainSpec, TonelliSystem

KDTREE_THRESHOLD = 10_000
SMOOTH, FIBER = "smooth", "fiber-sample"


@dataclass
class PhaseCloud:
    x: np.ndarray  # (n, d)
    p: np.ndarray  # (n, d)
    tags: np.ndarray  # (n,) of str
    source: str = ""
    domain: Optional[DomainSpec] = field(default=None, repr=False)

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, float))
        self.p = np.atleast_2d(np.asarray(self.p, float))
        self.tags = np.asarray(self.tags, dtype=object)
        if not (len(self.x) == len(self.p) == len(self.tags)):
            raise ValueError("x, p and tags must have equal length")

    def __len__(self) -> int:
        return len(self.x)

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    @property
    def points(self) -> np.ndarray:
        return np.hstack([self.x, self.p])

    def subset(self, mask) -> "PhaseCloud":
        return PhaseCloud(self.x[mask], self.p[mask], self.tags[mask], self.source, self.domain)

    @classmethod
    def concat(cls, clouds: Sequence["PhaseCloud"], source: str = "") -> "PhaseCloud":
        return cls(np.vstack([c.x for c in clouds]), np.vstack([c.p for c in clouds]),
                   np.concatenate([c.tags for c in clouds]), source or clouds[0].source, clouds[0].domain)

    def to_csv(self, path) -> None:
        d = self.dim
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i}" for i in range(d)] + [f"p{i}" for i in range(d)] + ["tag"])
            for xi, pi, tag in zip(self.x, self.p, self.tags):
                w.writerow([f"{v:.17g}" for v in (*xi, *pi)] + [tag])

    @classmethod
    def from_csv(cls, path, source: str = "") -> "PhaseCloud":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        d = (len(rows[0]) - 1) // 2
        data = np.array([[float(v) for v in r[:-1]] for r in rows[1:]]).reshape(-1, 2 * d)
        return cls(data[:, :d], data[:, d:], np.array([r[-1] for r in rows[1:]], dtype=object), source)


# ---------------------------------------------------------------------------
# sampling and transport


def sample_pseudograph(phi: MarginalFunction, xs, fiber_samples: int = 100,
                       fiber_spacing: Optional[float] = None, tol: Optional[float] = None) -> PhaseCloud:
    """``(x, D phi(x))`` at differentiable nodes, sampled fibers ``{x} x D+phi(x)`` at singular ones."""
    xs = np.asarray(xs, float).reshape(-1, phi.dim)
    if len(xs) == 0:
        raise EmptyCloud("empty x-grid")
    labels = phi.labels(xs, tol)
    smooth = labels == 0
    X = [xs[smooth]]
    P = [phi.gradient(xs[smooth])] if np.any(smooth) else [np.zeros((0, phi.dim))]
    T = [np.full(int(smooth.sum()), SMOOTH, dtype=object)]
    for x in xs[~smooth]:
        pts = phi.superdifferential(x, tol).sample(max_points=fiber_samples, spacing=fiber_spacing)
        X.append(np.broadcast_to(x, pts.shape))
        P.append(pts)
        T.append(np.full(len(pts), FIBER, dtype=object))
    return PhaseCloud(np.vstack(X), np.vstack(P), np.concatenate(T), f"pseudograph:{phi.name}", phi.domain)


def flow_graph(cloud: PhaseCloud, system: TonelliSystem, t1: float, t2: float, direction: str = "backward",
               steps: Optional[int] = None, method: str = "auto") -> PhaseCloud:
    """Move every point of the cloud along its characteristic.

    ``backward``: points are data at ``t2``, returned at ``t1``; ``forward``: data at ``t1``, returned at ``t2``.
    """
    if direction == "backward":
        a, b = t2, t1
    elif direction == "forward":
        a, b = t1, t2
    else:
        raise ValueError("direction must be 'forward' or 'backward'")
    x, p = flow_endpoint(system, a, b, cloud.x, cloud.p, steps, method, wrap=system.domain.is_torus)
    return PhaseCloud(x, p, cloud.tags.copy(), f"{cloud.source}|{direction}({t1},{t2})", cloud.domain)


# ---------------------------------------------------------------------------
# distances


def _as_cloud_points(c):
    if isinstance(c, PhaseCloud):
        return c.points
    return np.atleast_2d(np.asarray(c, float))


def _nearest(A: np.ndarray, B: np.ndarray, d_x: int, period: Optional[np.ndarray]) -> np.ndarray:
    """Distance from every row of ``A`` to the nearest row of ``B``."""
    if period is None and len(A) * len(B) > KDTREE_THRESHOLD:
        dist, _ = cKDTree(B).query(A, k=1)
        return dist
    out = np.empty(len(A))
    block = max(1, 2_000_000 // max(len(B), 1))
    for s in range(0, len(A), block):
        diff = A[s:s + block, None, :] - B[None, :, :]
        if period is not None:
            dx = diff[..., :d_x]
            diff[..., :d_x] = dx - period * np.round(dx / period)
        out[s:s + block] = np.sqrt(np.min(np.sum(diff * diff, axis=-1), axis=1))
    return out


def _period(A, B):
    for c in (A, B):
        if isinstance(c, PhaseCloud) and c.domain is not None and c.domain.is_torus:
            return c.domain.period
    return None


def directed_distance(A, B) -> float:
    """``sup_{a in A} dist(a, B)`` in the Euclidean (x, p) metric, torus-aware in x."""
    a, b = _as_cloud_points(A), _as_cloud_points(B)
    if len(a) == 0 or len(b) == 0:
        raise EmptyCloud("directed distance needs two non-empty clouds")
    d_x = a.shape[1] // 2 if isinstance(A, PhaseCloud) else a.shape[1]
    return float(_nearest(a, b, d_x, _period(A, B)).max())


def hausdorff_distance(A, B) -> float:
    return max(directed_distance(A, B), directed_distance(B, A))


def lipschitz_graph_constant(cloud: PhaseCloud, x_tol: float = 1e-9, k: int = 4) -> dict:
    """Largest ``|p_i - p_j| / |x_i - x_j|`` over near neighbours in x, and the number of
    points sharing an x (within ``x_tol``) with a different p."""
    x, p = cloud.x, cloud.p
    tree = cKDTree(x)
    kk = min(k + 1, len(x))
    dist, idx = tree.query(x, k=kk)
    dist, idx = dist[:, 1:], idx[:, 1:]
    dp = np.linalg.norm(p[:, None, :] - p[idx], axis=-1)
    shared = (dist <= x_tol) & (dp > 1e-9)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(dist > x_tol, dp / dist, 0.0)
    return {"K": float(ratio.max()) if ratio.size else 0.0, "multivalued_points": int(shared.any(axis=1).sum())}


# ---------------------------------------------------------------------------
# the flowed-graph identity


def _gradient_on_grid(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Centered differences inside, one-sided at the boundary; returns ``(N, d)``."""
    f = grid.reshape(values)
    h = grid.spacing
    if grid.dim == 1:
        return np.gradient(f, h[0])[:, None]
    parts = np.gradient(f, *h)
    return np.stack([g.ravel() for g in parts], axis=-1)


def verify_arnaud(phi: MarginalFunction, system: TonelliSystem, t: float, window: Grid,
                  fiber_samples: int = 100, tol: float = 0.02, mode: str = "symmetric",
                  fiber_spacing: Optional[float] = None, y_grid: Optional[Grid] = None, y_h: Optional[float] = None,
                  margin: Optional[float] = None, guard: bool = True, steps: Optional[int] = None) -> dict:
    """Compare ``A = Phi_H^{0,t}(graph D T̆_0^t phi)`` with ``B = graph D+phi`` over ``window``.

    ``directed_ab = sup_A dist(., B)`` measures the inclusion of the flowed gradient graph in the
    pseudo-graph; ``directed_ba`` the converse. In ``symmetric`` mode the evaluation grid is
    widened by ``margin`` (default ``t * (Lip(phi) + 1)``) so the flowed graph covers the window,
    and ``pass`` requires the Hausdorff distance below ``tol``; in ``directed`` mode only
    ``directed_ab`` is tested.
    """
    if mode not in ("symmetric", "directed"):
        raise ValueError("mode must be 'symmetric' or 'directed'")
    h = window.spacing
    if mode == "symmetric":
        if margin is None:
            margin = t * (phi.lipschitz_estimate(33) + 1.0)
        eval_grid = window.expanded(margin)
    else:
        eval_grid = window
    y_grid = y_grid or default_y_grid(phi, float(y_h if y_h is not None else np.max(h)))
    xs = eval_grid.points()
    res = positive_operator(phi, system, 0.0, t, xs, y_grid)
    guard_info = None
    if guard:
        cert = c11_certificate(eval_grid.reshape(res.values), h)
        nonuniq = None
        if eval_grid.dim == 1:
            nonuniq = detect_nonunique(phi, system, 0.0, t, xs, res.values, res.maximizers, y_grid)
        guard_info = {"certificate": cert.as_dict(), "nonunique": nonuniq}
        if not cert.passed or nonuniq is not None:
            raise CriticalTimeExceeded(f"T̆_0^{t} phi is not certifiably C^1,1 on the grid (t beyond the critical time)")
    grads = _gradient_on_grid(res.values, eval_grid)
    xa, pa = flow_endpoint(system, 0.0, t, xs, grads, steps, wrap=system.domain.is_torus)
    lo, hi = np.asarray(window.lower), np.asarray(window.upper)
    slack = 1e-9 * (1 + np.abs(hi).max())
    inside = np.all((xa >= lo - slack) & (xa <= hi + slack), axis=1) & phi.domain.contains(xa)
    A = PhaseCloud(xa[inside], pa[inside], np.full(int(inside.sum()), "flowed", dtype=object), "flowed-gradient-graph",
                   system.domain)
    if len(A) == 0:
        raise EmptyCloud("no flowed point lands in the window")
    # sites: the window nodes plus the landing points of A (merged when they coincide)
    B_x = np.unique(np.round(np.vstack([window.points(), np.clip(A.x, lo, hi)]), 12), axis=0)
    B = sample_pseudograph(phi, B_x, fiber_samples, fiber_spacing)
    B.domain = system.domain
    Bw = sample_pseudograph(phi, window.points(), fiber_samples, fiber_spacing)
    Bw.domain = system.domain
    d_ab = directed_distance(A, B)
    d_ba = directed_distance(Bw, A)
    haus = max(d_ab, d_ba)
    passed = haus <= tol if mode == "symmetric" else d_ab <= tol
    return {
        "hausdorff": haus if mode == "symmetric" else None,
        "directed_ab": d_ab,
        "directed_ba": d_ba,
        "t": t,
        "grid_h": float(np.max(h)),
        "tol": tol,
        "mode": mode,
        "pass": bool(passed),
        "n_A": len(A),
        "n_B": len(B),
        "fiber_samples": fiber_samples,
        "fiber_spacing": fiber_spacing,
        "guard": guard_info,
        "_clouds": (A, Bw),
    }


def fiber_disjointness(phi: MarginalFunction, system: TonelliSystem, t: float, points, fiber_samples: int = 100,
                       steps: Optional[int] = None) -> dict:
    """Backward-flow the fibers ``{x} x D+phi(x)`` from time ``t`` to 0 and report the least
    distance between clouds of different input points."""
    pts = np.asarray(points, float).reshape(-1, phi.dim)
    clouds = []
    for x in pts:
        fib = phi.superdifferential(x).sample(max_points=fiber_samples)
        c = PhaseCloud(np.broadcast_to(x, fib.shape), fib, np.full(len(fib), FIBER, dtype=object), "fiber",
                       system.domain)
        clouds.append(flow_graph(c, system, 0.0, t, "backward", steps))
    best = np.inf
    pair = None
    for i in range(len(clouds)):
        for j in range(i + 1, len(clouds)):
            dist = float(_nearest(clouds[i].points, clouds[j].points, phi.dim,
                                  system.domain.period if system.domain.is_torus else None).min())
            if dist < best:
                best, pair = dist, (i, j)
    return {"t": t, "points": pts.tolist(), "min_distance": float(best), "closest_pair": pair,
            "strata": [phi.stratum_dimension(x) for x in pts], "disjoint": bool(best > 0)}
