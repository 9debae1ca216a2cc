"""Grid stratification of singular sets, box-counting dimension, broken-line paths avoiding
the codimension-two stratum, and connectivity of stratum masks.

Node labels are pointwise stratum dimensions. Between nodes, every grid edge along which the
minimising piece changes is bisected to the interface and the stratum there is recorded; an
edge whose interface stratum exceeds ``k`` is *cut* in the ``Sigma^{<=k}`` connectivity graph,
so singular lines thinner than the grid spacing still separate components.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import DegenerateScales, EndpointsSingular, NoPathFoundAtResolution
from .grids import Grid
from .semiconcave import MarginalFunction, affine_rank, default_tie_tol

_CHUNK = 200_000
BISECTION_STEPS = 48


@dataclass
class StrataGrid:
    grid: Grid
    labels: np.ndarray  # (N,) node labels, ij order
    edge_strata: list = field(default_factory=list)  # per axis: stratum at the edge interface, -1 if none
    crossings: Optional[np.ndarray] = None  # (M, d) interface points
    crossing_strata: Optional[np.ndarray] = None  # (M,)
    source: str = ""

    @property
    def dim(self) -> int:
        return self.grid.dim

    def ge(self, k: int) -> np.ndarray:
        return self.labels >= k

    def le(self, k: int) -> np.ndarray:
        return self.labels <= k

    def eq(self, k: int) -> np.ndarray:
        return self.labels == k

    @property
    def flagged(self) -> np.ndarray:
        """Nodes incident to an edge crossed by a piece interface."""
        flag = np.zeros(self.grid.shape, dtype=bool)
        for ax, es in enumerate(self.edge_strata):
            hit = es >= 0
            lo = [slice(None)] * self.dim
            hi = [slice(None)] * self.dim
            lo[ax] = slice(0, -1)
            hi[ax] = slice(1, None)
            flag[tuple(lo)] |= hit
            flag[tuple(hi)] |= hit
        return flag.ravel()

    def singular_points(self, k: int = 1) -> np.ndarray:
        """Nodes with label ``>= k`` together with edge interfaces of stratum ``>= k``."""
        pts = [self.grid.points()[self.ge(k)]]
        if self.crossings is not None and len(self.crossings):
            pts.append(self.crossings[self.crossing_strata >= k])
        return np.vstack(pts)

    def counts(self) -> dict:
        return {int(k): int(np.sum(self.labels == k)) for k in range(self.dim + 1)}

    def to_csv(self, path) -> None:
        pts = self.grid.points()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i}" for i in range(self.dim)] + ["label"])
            for x, lab in zip(pts, self.labels):
                w.writerow([f"{v:.17g}" for v in x] + [int(lab)])


def _argmin_pieces(phi: MarginalFunction, pts: np.ndarray) -> np.ndarray:
    out = np.empty(len(pts), dtype=int)
    for s in range(0, len(pts), _CHUNK):
        out[s:s + _CHUNK] = np.argmin(phi.values(pts[s:s + _CHUNK], check=False), axis=1)
    return out


def _bisect_interfaces(phi, a: np.ndarray, b: np.ndarray, ka: np.ndarray, steps: int = BISECTION_STEPS):
    """Shrink each segment ``[a, b]`` onto a point where the minimising piece changes."""
    a, b = a.copy(), b.copy()
    for _ in range(steps):
        m = 0.5 * (a + b)
        km = _argmin_pieces(phi, m)
        left = km == ka
        a = np.where(left[:, None], m, a)
        b = np.where(left[:, None], b, m)
    return 0.5 * (a + b)


def classify_grid(phi: MarginalFunction, grid: Grid, tol: Optional[float] = None, interfaces: bool = True) -> StrataGrid:
    """Stratum label at every node, plus interface detection along grid edges."""
    pts = grid.points()
    if not np.all(phi.domain.contains(pts, atol=1e-9)):
        from .errors import OutOfDomain
        raise OutOfDomain("grid leaves the domain of the function")
    labels, arg = phi.labels(pts, tol, return_argmin=True)
    edge_strata, cross_pts, cross_lab = [], [], []
    if interfaces:
        arg = grid.reshape(arg)
        P = grid.reshape(pts)
        for ax in range(grid.dim):
            lo = [slice(None)] * grid.dim
            hi = [slice(None)] * grid.dim
            lo[ax], hi[ax] = slice(0, -1), slice(1, None)
            lo, hi = tuple(lo), tuple(hi)
            change = arg[lo] != arg[hi]
            es = np.full(change.shape, -1, dtype=np.int8)
            if np.any(change):
                a = P[lo][change]
                b = P[hi][change]
                ka = arg[lo][change]
                x = _bisect_interfaces(phi, a, b, ka)
                lab = phi.labels(x, tol)
                es[change] = lab
                cross_pts.append(x)
                cross_lab.append(lab)
            edge_strata.append(es)
    d = grid.dim
    return StrataGrid(
        grid, labels, edge_strata,
        np.vstack(cross_pts) if cross_pts else np.zeros((0, d)),
        np.concatenate(cross_lab) if cross_lab else np.zeros(0, dtype=int),
        phi.name,
    )


# ---------------------------------------------------------------------------
# box counting


def box_counting_dimension(points, scales: Optional[Sequence[float]] = None, origin=None):
    """Least-squares slope of ``log N(eps)`` against ``log(1/eps)``.

    Boxes are the cells ``floor((x - origin) / eps)``. Returns ``(estimate, residual, counts)``
    where ``residual`` is the RMS of the fit in log space.
    """
    pts = np.atleast_2d(np.asarray(points, float))
    if pts.size == 0 or len(pts) == 0:
        raise DegenerateScales("empty point set")
    if scales is None:
        scales = [2.0 ** -j for j in range(2, 9)]
    eps = np.unique(np.asarray(scales, float))
    if len(eps) < 2 or np.any(eps <= 0):
        raise DegenerateScales("need at least two distinct positive scales")
    o = pts.min(axis=0) if origin is None else np.asarray(origin, float)
    counts = []
    for e in eps:
        cells = np.floor((pts - o) / e).astype(np.int64)
        counts.append(len(np.unique(cells, axis=0)))
    counts = np.asarray(counts, float)
    X = np.log(1.0 / eps)
    Y = np.log(counts)
    slope, intercept = np.polyfit(X, Y, 1)
    resid = float(np.sqrt(np.mean((Y - (slope * X + intercept)) ** 2)))
    return float(slope), resid, {float(e): int(c) for e, c in zip(eps, counts)}


# ---------------------------------------------------------------------------
# broken lines


@dataclass
class BrokenLine:
    a: np.ndarray
    b: np.ndarray
    z: np.ndarray
    samples_checked: int = 0
    attempts: int = 1
    radius: float = 0.0

    def __call__(self, s) -> np.ndarray:
        s = np.asarray(s, float)[..., None]
        first = self.a + 2 * s * (self.z - self.a)
        second = self.z + (2 * s - 1) * (self.b - self.z)
        return np.where(s <= 0.5, first, second)

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.z - self.a) + np.linalg.norm(self.b - self.z))

    def parameters(self, spacing: float, include_ends: bool = False) -> np.ndarray:
        """Parameters whose images are at most ``spacing`` apart along each leg (``s = 1/2`` included)."""
        n1 = max(1, math.ceil(np.linalg.norm(self.z - self.a) / spacing))
        n2 = max(1, math.ceil(np.linalg.norm(self.b - self.z) / spacing))
        s = np.concatenate([np.linspace(0.0, 0.5, n1 + 1), np.linspace(0.5, 1.0, n2 + 1)[1:]])
        return s if include_ends else s[1:-1]

    def as_dict(self) -> dict:
        return {"a": self.a.tolist(), "z": self.z.tolist(), "b": self.b.tolist(),
                "samples_checked": self.samples_checked, "attempts": self.attempts, "radius": self.radius}


def near_codim2(phi: MarginalFunction, pts: np.ndarray, tol: float) -> np.ndarray:
    """Points lying within about ``tol`` of ``Sigma^{>=2}``.

    A piece counts as active when its gap to the minimum is below ``tol`` times its gradient
    separation from the minimising piece, i.e. when its interface is within ``tol`` to first order.
    """
    pts = np.atleast_2d(pts)
    out = np.zeros(len(pts), dtype=bool)
    for s in range(0, len(pts), _CHUNK // 8):
        chunk = pts[s:s + _CHUNK // 8]
        vals = phi.values(chunk, check=False)
        k = np.argmin(vals, axis=1)
        rows = np.arange(len(chunk))
        m = vals[rows, k]
        grads = phi.gradients(chunk)
        diff = grads - grads[rows, k][:, None, :]
        sep = np.sqrt(np.einsum("nsd,nsd->ns", diff, diff))
        active = vals - m[:, None] <= default_tie_tol(m)[:, None] + tol * sep
        for i in np.flatnonzero(np.count_nonzero(active, axis=1) >= 3):
            if affine_rank(grads[i, active[i]])[0] >= 2:
                out[s + i] = True
    return out


def _complement_basis(n: np.ndarray) -> np.ndarray:
    d = len(n)
    q, _ = np.linalg.qr(np.column_stack([n, np.eye(d)]))
    return q[:, 1:d].T  # (d-1, d), orthonormal and orthogonal to n


def broken_line_path(phi: MarginalFunction, a, b, r: Optional[float] = None, n_samples: int = 10, seed: int = 0,
                     tol: float = 1e-3) -> BrokenLine:
    """Broken line ``a -> z -> b`` with ``z`` uniform on the disk of radius ``r`` in the perpendicular
    bisector hyperplane, accepted when no sampled point (spacing ``tol/2``) is within ``tol`` of ``Sigma^{>=2}``."""
    a = np.atleast_1d(np.asarray(a, float))
    b = np.atleast_1d(np.asarray(b, float))
    d = len(a)
    if d < 2:
        raise ValueError("the broken-line construction requires dimension d >= 2")
    if np.allclose(a, b):
        raise ValueError("endpoints must differ")
    if phi.stratum_dimension(a) >= 2 or phi.stratum_dimension(b) >= 2:
        raise EndpointsSingular("an endpoint lies in Sigma^{>=2}")
    m = 0.5 * (a + b)
    n = (b - a) / np.linalg.norm(b - a)
    basis = _complement_basis(n)
    if r is None:
        r = np.linalg.norm(b - a) / 4.0
    lo, hi = np.asarray(phi.domain.lower), np.asarray(phi.domain.upper)
    room = float(np.min(np.minimum(m - lo, hi - m)))
    r = float(min(r, room))
    rng = np.random.default_rng(seed)
    checked = 0
    for attempt in range(1, n_samples + 1):
        u = rng.normal(size=d - 1)
        u /= np.linalg.norm(u)
        rad = r * rng.uniform() ** (1.0 / (d - 1))
        z = m + rad * (u @ basis)
        line = BrokenLine(a, b, z, radius=r)
        pts = line(line.parameters(tol / 2.0))
        checked += len(pts)
        if not np.any(near_codim2(phi, pts, tol)):
            line.samples_checked = checked
            line.attempts = attempt
            return line
    raise NoPathFoundAtResolution(
        f"no admissible waypoint among {n_samples} samples at resolution {tol}", failure_density=1.0
    )


def path_is_valid(phi: MarginalFunction, line: BrokenLine, tol: float, refine: int = 10) -> bool:
    pts = line(line.parameters(tol / (2.0 * refine)))
    return not np.any(near_codim2(phi, pts, tol))


# ---------------------------------------------------------------------------
# connectivity


def connectivity_report(strata: StrataGrid, k: int, use_interfaces: bool = True) -> dict:
    """Connected components of ``Sigma^{<=k}`` under face adjacency.

    With ``use_interfaces`` an edge is removed when a piece interface of stratum ``> k`` crosses it.
    """
    d = strata.dim
    if not 0 <= k <= d:
        raise ValueError("k must lie in [0, d]")
    shape = strata.grid.shape
    mask = strata.grid.reshape(strata.le(k))
    ids = np.arange(int(np.prod(shape))).reshape(shape)
    rows, cols = [], []
    for ax in range(d):
        lo = [slice(None)] * d
        hi = [slice(None)] * d
        lo[ax], hi[ax] = slice(0, -1), slice(1, None)
        lo, hi = tuple(lo), tuple(hi)
        keep = mask[lo] & mask[hi]
        if use_interfaces and strata.edge_strata:
            keep &= ~(strata.edge_strata[ax] > k)
        rows.append(ids[lo][keep])
        cols.append(ids[hi][keep])
    n = ids.size
    r = np.concatenate(rows) if rows else np.zeros(0, int)
    c = np.concatenate(cols) if cols else np.zeros(0, int)
    graph = coo_matrix((np.ones(len(r)), (r, c)), shape=(n, n)).tocsr()
    _, comp = connected_components(graph, directed=False)
    members = comp[mask.ravel()]
    if members.size == 0:
        return {"k": k, "components": 0, "sizes": [], "mask_size": 0}
    _, sizes = np.unique(members, return_counts=True)
    sizes = sorted(sizes.tolist(), reverse=True)
    return {"k": k, "components": len(sizes), "sizes": sizes, "mask_size": int(mask.sum())}


def write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
