"""Semiconcave functions represented as minima of finite families of C^2 pieces.

Values, active sets, superdifferentials (convex hulls of active-piece gradients),
reachable gradients and stratum dimensions. The built-in examples include the
two one-dimensional profiles ``phi1``/``phi2`` whose singular sets accumulate at 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import nnls
from scipy.spatial import ConvexHull

from .errors import NoDifferentiablePointsFound, OutOfDomain
from .tonelli import DomainSpec

RANK_RTOL = 1e-6
TIE_RTOL = 1e-9
_CHUNK = 200_000


def default_tie_tol(min_value) -> np.ndarray:
    return TIE_RTOL * (1.0 + np.abs(min_value))


# ---------------------------------------------------------------------------
# piece families


class QuadraticFamily:
    """Pieces ``F_s(x) = c_s + g_s . x + 1/2 x^T A_s x``."""

    def __init__(self, const, grad, hess=None, labels: Optional[Sequence[str]] = None):
        self.const = np.atleast_1d(np.asarray(const, float))
        self.grad = np.atleast_2d(np.asarray(grad, float))
        n, d = self.grad.shape
        if self.const.shape != (n,):
            raise ValueError("const and grad disagree on the number of pieces")
        self.hess = None if hess is None else np.asarray(hess, float).reshape(n, d, d)
        if self.hess is not None and not np.any(self.hess):
            self.hess = None
        self.labels = list(labels) if labels is not None else [f"q{i}" for i in range(n)]

    @property
    def size(self) -> int:
        return self.const.size

    @property
    def dim(self) -> int:
        return self.grad.shape[1]

    def values(self, x: np.ndarray) -> np.ndarray:
        out = x @ self.grad.T + self.const
        if self.hess is not None:
            out += 0.5 * np.einsum("bi,sij,bj->bs", x, self.hess, x)
        return out

    def gradients(self, x: np.ndarray) -> np.ndarray:
        g = np.broadcast_to(self.grad, (x.shape[0],) + self.grad.shape)
        if self.hess is not None:
            g = g + np.einsum("sij,bj->bsi", self.hess, x)
        return np.array(g)

    def hessians(self) -> np.ndarray:
        if self.hess is None:
            return np.zeros((self.size, self.dim, self.dim))
        return self.hess

    def hessian_upper(self) -> float:
        if self.hess is None:
            return 0.0
        return float(np.linalg.eigvalsh(0.5 * (self.hess + np.swapaxes(self.hess, 1, 2))).max())


class CallableFamily:
    """Arbitrary C^2 pieces; each callable maps ``(B, d)`` points to
    ``(values (B,), gradients (B, d), hessians (B, d, d))``."""

    def __init__(self, pieces: Sequence[Callable], dim: int, hessian_upper: float,
                 labels: Optional[Sequence[str]] = None):
        self.pieces = list(pieces)
        self._dim = dim
        self._hup = float(hessian_upper)
        self.labels = list(labels) if labels is not None else [f"f{i}" for i in range(len(self.pieces))]

    @property
    def size(self) -> int:
        return len(self.pieces)

    @property
    def dim(self) -> int:
        return self._dim

    def values(self, x):
        return np.stack([f(x)[0] for f in self.pieces], axis=1)

    def gradients(self, x):
        return np.stack([f(x)[1] for f in self.pieces], axis=1)

    def hessian_upper(self) -> float:
        return self._hup


# ---------------------------------------------------------------------------
# polytopes


@dataclass
class Polytope:
    """Convex hull of finitely many points, stored by its irredundant vertices."""

    vertices: np.ndarray
    affine_dim: int
    _basis: Optional[np.ndarray] = field(default=None, repr=False)
    _hull: Optional[ConvexHull] = field(default=None, repr=False)

    @classmethod
    def hull(cls, points, rank_rtol: float = RANK_RTOL) -> "Polytope":
        pts = np.atleast_2d(np.asarray(points, float))
        k, basis = affine_rank(pts, rank_rtol)
        origin = pts[0]
        if k == 0:
            return cls(pts.mean(axis=0, keepdims=True), 0, basis)
        coords = (pts - origin) @ basis.T
        if k == 1:
            lo, hi = int(np.argmin(coords[:, 0])), int(np.argmax(coords[:, 0]))
            return cls(pts[[lo, hi]], 1, basis)
        keep = np.sort(ConvexHull(coords).vertices)
        verts = pts[keep]
        # rebuild the hull relative to the first kept vertex so ``sample`` can reuse it
        hull = ConvexHull((verts - verts[0]) @ basis.T)
        return cls(verts, k, basis, hull)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def is_singleton(self) -> bool:
        return self.affine_dim == 0

    def distance(self, p) -> float:
        """Euclidean distance from ``p`` to the polytope."""
        p = np.asarray(p, float)
        if self.affine_dim == 0:
            return float(np.linalg.norm(p - self.vertices[0]))
        if self.affine_dim == 1:
            a, b = self.vertices
            ab = b - a
            s = np.clip((p - a) @ ab / (ab @ ab), 0.0, 1.0)
            return float(np.linalg.norm(p - (a + s * ab)))
        # convex-combination least squares, the sum-to-one row weighted heavily
        w = 1e3
        A = np.vstack([self.vertices.T, w * np.ones(len(self.vertices))])
        b = np.concatenate([p, [w]])
        lam, _ = nnls(A, b, maxiter=50 * A.shape[1])
        return float(np.linalg.norm(self.vertices.T @ lam - p))

    def contains(self, p, tol: float = 1e-9) -> bool:
        return self.distance(p) <= tol

    def sample(self, max_points: int = 100, spacing: Optional[float] = None) -> np.ndarray:
        """Vertices plus a lattice in the affine hull.

        Without ``spacing``, the lattice is chosen so the total stays near ``max_points``.
        """
        k = self.affine_dim
        if k == 0:
            return self.vertices.copy()
        a = self.vertices[0]
        coords = (self.vertices - a) @ self._basis.T
        lo, hi = coords.min(axis=0), coords.max(axis=0)
        if k == 1:
            length = hi[0] - lo[0]
            n = max(2, int(math.ceil(length / spacing)) + 1) if spacing else max(2, int(max_points))
            s = np.linspace(lo[0], hi[0], n)
            return a + s[:, None] * self._basis[0]
        if spacing is None:
            vol = np.prod(hi - lo)
            spacing = (vol / max(max_points - len(self.vertices), 1)) ** (1.0 / k)
        axes = [np.arange(l, h + 0.5 * spacing, spacing) for l, h in zip(lo, hi)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, k)
        eq = self._hull.equations
        inside = np.all(mesh @ eq[:, :-1].T + eq[:, -1] <= 1e-12, axis=1)
        pts = a + mesh[inside] @ self._basis
        return np.vstack([self.vertices, pts])


def affine_rank(points: np.ndarray, rank_rtol: float = RANK_RTOL):
    """Affine dimension of a point set and an orthonormal basis of its direction space."""
    pts = np.atleast_2d(points)
    diffs = pts[1:] - pts[0]
    d = pts.shape[1]
    if diffs.shape[0] == 0:
        return 0, np.zeros((0, d))
    _, s, vt = np.linalg.svd(diffs, full_matrices=False)
    floor = 1e-10 * (1.0 + np.abs(pts).max())
    if s[0] <= floor:
        return 0, np.zeros((0, d))
    k = int(np.sum(s > rank_rtol * s[0]))
    return k, vt[:k]


@dataclass
class ActiveSet:
    indices: np.ndarray
    min_value: float
    tol: float

    def __len__(self):
        return len(self.indices)


# ---------------------------------------------------------------------------
# marginal functions


class MarginalFunction:
    """``phi(x) = min_s F(s, x)`` over a finite family of C^2 pieces with Hessians <= C I."""

    def __init__(self, families, hessian_bound: Optional[float] = None, domain: Optional[DomainSpec] = None,
                 name: str = "custom", params: Optional[dict] = None):
        self.families = list(families) if isinstance(families, (list, tuple)) else [families]
        dims = {f.dim for f in self.families}
        if len(dims) != 1:
            raise ValueError("all piece families must share one dimension")
        self.dim = dims.pop()
        bound = max(max(f.hessian_upper() for f in self.families), 0.0)
        self.hessian_bound = bound if hessian_bound is None else float(hessian_bound)
        if self.hessian_bound < bound - 1e-12:
            raise ValueError(f"declared hessian_bound {hessian_bound} below the piece bound {bound}")
        self.domain = domain or DomainSpec.cube(self.dim, 4.0)
        self.name = name
        self.params = params or {}

    @property
    def n_pieces(self) -> int:
        return sum(f.size for f in self.families)

    def _as_points(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        if x.ndim == 0:
            x = x.reshape(1)
        return x.reshape(-1, self.dim) if x.shape[-1] == self.dim else x.reshape(-1, self.dim)

    def _check(self, pts):
        if not np.all(self.domain.contains(pts, atol=1e-9)):
            bad = pts[~self.domain.contains(pts, atol=1e-9)][0]
            raise OutOfDomain(f"point {bad} outside {self.domain}")

    def values(self, x, check: bool = True) -> np.ndarray:
        pts = self._as_points(x)
        if check:
            self._check(pts)
        return np.concatenate([f.values(pts) for f in self.families], axis=1)

    def gradients(self, x) -> np.ndarray:
        pts = self._as_points(x)
        return np.concatenate([f.gradients(pts) for f in self.families], axis=1)

    def __call__(self, x, check: bool = True) -> np.ndarray:
        x = np.asarray(x, float)
        lead = x.shape[:-1] if x.ndim >= 1 and x.shape[-1] == self.dim and x.ndim > 1 else None
        pts = self._as_points(x)
        if check:
            self._check(pts)
        out = np.empty(len(pts))
        for s in range(0, len(pts), _CHUNK):
            chunk = pts[s:s + _CHUNK]
            out[s:s + _CHUNK] = self.families[0].values(chunk).min(axis=1)
            for fam in self.families[1:]:
                np.minimum(out[s:s + _CHUNK], fam.values(chunk).min(axis=1), out=out[s:s + _CHUNK])
        return out.reshape(lead) if lead is not None else out

    def evaluate(self, x) -> float:
        return float(self(np.atleast_1d(np.asarray(x, float)).reshape(1, self.dim))[0])

    def gradient(self, x) -> np.ndarray:
        """Gradient of the smallest piece at each point (``D phi`` where differentiable)."""
        pts = self._as_points(x)
        vals = self.values(pts, check=False)
        k = np.argmin(vals, axis=1)
        g = self.gradients(pts)
        return g[np.arange(len(pts)), k]

    def active_set(self, x, tol: Optional[float] = None) -> ActiveSet:
        pts = self._as_points(x)
        vals = self.values(pts)[0]
        m = float(vals.min())
        tol = float(default_tie_tol(m)) if tol is None else float(tol)
        if tol <= 0:
            raise ValueError("tol must be positive")
        return ActiveSet(np.flatnonzero(vals <= m + tol), m, tol)

    def superdifferential(self, x, tol: Optional[float] = None) -> Polytope:
        pts = self._as_points(x)
        act = self.active_set(pts, tol)
        grads = self.gradients(pts)[0, act.indices]
        return Polytope.hull(grads)

    def stratum_dimension(self, x, tol: Optional[float] = None) -> int:
        return self.superdifferential(x, tol).affine_dim

    def labels(self, points, tol: Optional[float] = None, abs_tol: float = 0.0, return_argmin: bool = False):
        """Vectorised stratum labels; ``abs_tol`` widens the tie tolerance (resolution-aware tests).

        With ``return_argmin`` also returns the index of a minimising piece at every point.
        """
        pts = self._as_points(points)
        out = np.zeros(len(pts), dtype=int)
        arg = np.zeros(len(pts), dtype=int)
        for s in range(0, len(pts), _CHUNK):
            out[s:s + _CHUNK], arg[s:s + _CHUNK] = self._labels_chunk(pts[s:s + _CHUNK], tol, abs_tol)
        return (out, arg) if return_argmin else out

    def _labels_chunk(self, pts, tol, abs_tol):
        vals = self.values(pts, check=False)
        k = np.argmin(vals, axis=1)
        m = vals[np.arange(len(pts)), k]
        t = (default_tie_tol(m) if tol is None else tol) + abs_tol
        active = vals <= (m + t)[:, None]
        count = active.sum(axis=1)
        labels = np.zeros(len(pts), dtype=int)
        multi = np.flatnonzero(count >= 2)
        if multi.size == 0:
            return labels, k
        grads = self.gradients(pts[multi])
        for j, i in enumerate(multi):
            g = grads[j, active[i]]
            if len(g) == 2:
                floor = 1e-10 * (1.0 + np.abs(g).max())
                labels[i] = int(np.linalg.norm(g[0] - g[1]) > floor)
            else:
                labels[i] = affine_rank(g)[0]
        return labels, k

    def reachable_gradients(self, x, radius: float = 1e-6, n_samples: int = 400, seed: int = 0,
                            cluster_tol: Optional[float] = None) -> np.ndarray:
        """Gradients at sampled differentiable points near ``x``, one cluster per active branch."""
        if radius <= 0:
            raise ValueError("radius must be positive")
        x0 = self._as_points(x)[0]
        rng = np.random.default_rng(seed)
        d = self.dim
        u = rng.normal(size=(n_samples, d))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        r = radius * rng.uniform(size=(n_samples, 1)) ** (1.0 / d)
        ys = x0 + r * u
        ys = ys[self.domain.contains(ys)]
        vals = self.values(ys, check=False)
        m = vals.min(axis=1)
        # ties have measure zero; only exact (round-off) ties are discarded
        active = vals <= (m + 1e-13 * (1.0 + np.abs(m)))[:, None]
        smooth = active.sum(axis=1) == 1
        if not np.any(smooth):
            raise NoDifferentiablePointsFound(f"no differentiable sample within {radius} of {x0}")
        ys, piece = ys[smooth], np.argmax(active[smooth], axis=1)
        dist = np.linalg.norm(ys - x0, axis=1)
        grads = self.gradients(ys)
        centers = []
        for s in np.unique(piece):
            sel = np.flatnonzero(piece == s)
            j = sel[np.argmin(dist[sel])]
            centers.append(grads[j, s])
        centers = np.array(centers)
        if cluster_tol is None:
            cluster_tol = 4.0 * radius * max(self.hessian_bound, 1.0)
        merged = []
        for c in centers:
            if not any(np.linalg.norm(c - mm) <= cluster_tol for mm in merged):
                merged.append(c)
        return np.array(merged)

    def lipschitz_estimate(self, n_per_axis: int = 65) -> float:
        axes = [np.linspace(lo, hi, n_per_axis) for lo, hi in zip(self.domain.lower, self.domain.upper)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, self.dim)
        g = self.gradients(pts)
        return float(np.linalg.norm(g, axis=-1).max())

    def semiconcavity_gap(self, x, y, p) -> float:
        """``phi(y) - phi(x) - p.(y-x) - C/2 |y-x|^2``; non-positive for every ``p`` in ``D+phi(x)``."""
        x, y, p = (np.asarray(a, float) for a in (x, y, p))
        return float(self.evaluate(y) - self.evaluate(x) - p @ (y - x) - 0.5 * self.hessian_bound * np.sum((y - x) ** 2))

    @classmethod
    def minimum(cls, *functions: "MarginalFunction", name: str = "min") -> "MarginalFunction":
        fams = [f for fn in functions for f in fn.families]
        return cls(fams, max(fn.hessian_bound for fn in functions), functions[0].domain, name=name)


# module-level operation names


def evaluate(phi: MarginalFunction, x) -> float:
    return phi.evaluate(x)


def active_set(phi: MarginalFunction, x, tol: Optional[float] = None) -> ActiveSet:
    return phi.active_set(x, tol)


def superdifferential(phi: MarginalFunction, x, tol: Optional[float] = None) -> Polytope:
    return phi.superdifferential(x, tol)


def reachable_gradients(phi: MarginalFunction, x, radius: float = 1e-6, n_samples: int = 400, seed: int = 0):
    return phi.reachable_gradients(x, radius, n_samples, seed)


def stratum_dimension(phi: MarginalFunction, x, tol: Optional[float] = None) -> int:
    return phi.stratum_dimension(x, tol)


# ---------------------------------------------------------------------------
# built-in functions


def sphere_directions(d: int, n: Optional[int] = None) -> np.ndarray:
    if d == 1:
        return np.array([[-1.0], [1.0]])
    if d == 2:
        n = n or 256
        ang = 2 * np.pi * np.arange(n) / n
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    n = n or 2048
    # Fibonacci sphere
    k = np.arange(n) + 0.5
    z = 1 - 2 * k / n
    phi = np.pi * (1 + 5**0.5) * k
    r = np.sqrt(1 - z * z)
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def _box(d, half_width=4.0):
    return DomainSpec.cube(d, half_width)


def neg_norm(d: int = 1, n_dirs: Optional[int] = None, center=None, offset: float = 0.0,
             domain: Optional[DomainSpec] = None) -> MarginalFunction:
    """``offset - |x - center|`` as the minimum of the linear pieces ``p.(x - center)``, ``|p| = 1``."""
    dirs = sphere_directions(d, n_dirs)
    c = np.zeros(d) if center is None else np.asarray(center, float)
    fam = QuadraticFamily(offset - dirs @ c, dirs)
    return MarginalFunction(fam, 0.0, domain or _box(d), name="neg-norm",
                            params={"d": d, "n_dirs": len(dirs), "center": c.tolist(), "offset": offset})


def two_cone(d: int = 1, a=None, b=None, ca: float = 0.0, cb: float = 0.0, n_dirs: Optional[int] = None,
             domain: Optional[DomainSpec] = None) -> MarginalFunction:
    """``min(ca - |x - a|, cb - |x - b|)``."""
    a = np.full(d, -0.5) if a is None else np.asarray(a, float)
    b = np.full(d, 0.5) if b is None else np.asarray(b, float)
    dom = domain or _box(d)
    f = MarginalFunction.minimum(neg_norm(d, n_dirs, a, ca, dom), neg_norm(d, n_dirs, b, cb, dom), name="two-cone")
    f.params = {"d": d, "a": a.tolist(), "b": b.tolist(), "ca": ca, "cb": cb}
    return f


def min_parabolas(d: int = 1, domain: Optional[DomainSpec] = None) -> MarginalFunction:
    """``min(|x - e1|^2, |x + e1|^2)``; singular on the hyperplane ``x1 = 0``."""
    e1 = np.eye(d)[0]
    fam = QuadraticFamily([1.0, 1.0], np.stack([-2 * e1, 2 * e1]), np.stack([2 * np.eye(d)] * 2),
                          labels=["(x-e1)^2", "(x+e1)^2"])
    return MarginalFunction(fam, 2.0, domain or _box(d), name="min-parabolas", params={"d": d})


def _dyadic_pieces(d: int, n_max: int):
    e1 = np.eye(d)[0]
    a = 2.0 ** -(np.arange(1, n_max + 1) - 1)
    b = 2.0 ** -np.arange(1, n_max + 1)
    hess = np.zeros((n_max, d, d))
    hess[:, 0, 0] = 2.0
    # (x1 + a)(x1 + b) = a b + (a + b) x1 + x1^2
    return a * b, (a + b)[:, None] * e1, hess, [f"segment{n}" for n in range(1, n_max + 1)]


def phi1(d: int = 1, n_max: int = 12, domain: Optional[DomainSpec] = None) -> MarginalFunction:
    """Products ``(x1 + 2^{1-n})(x1 + 2^{-n})`` on the dyadic segments, zero elsewhere."""
    c, g, h, lab = _dyadic_pieces(d, n_max)
    fams = [QuadraticFamily([0.0], np.zeros((1, d)), labels=["zero"]), QuadraticFamily(c, g, h, lab)]
    return MarginalFunction(fams, 2.0, domain or _box(d), name="phi1", params={"d": d, "n_max": n_max})


def phi2(d: int = 1, n_max: int = 12, domain: Optional[DomainSpec] = None) -> MarginalFunction:
    """``phi1`` with ``-x1`` on ``x1 >= 0``."""
    c, g, h, lab = _dyadic_pieces(d, n_max)
    e1 = np.eye(d)[0]
    fams = [QuadraticFamily([0.0, 0.0], np.stack([np.zeros(d), -e1]), labels=["zero", "-x1"]),
            QuadraticFamily(c, g, h, lab)]
    return MarginalFunction(fams, 2.0, domain or _box(d), name="phi2", params={"d": d, "n_max": n_max})


def quadratic(d: int = 1, a: float = -1.0, hessian_bound: Optional[float] = None,
              domain: Optional[DomainSpec] = None) -> MarginalFunction:
    """Smooth ``(a/2)|x|^2``."""
    fam = QuadraticFamily([0.0], np.zeros((1, d)), (a * np.eye(d))[None])
    hb = max(a, 0.0) if hessian_bound is None else hessian_bound
    return MarginalFunction(fam, hb, domain or _box(d), name="quadratic", params={"d": d, "a": a})


def constant(d: int = 1, c: float = 0.0, domain: Optional[DomainSpec] = None) -> MarginalFunction:
    fam = QuadraticFamily([c], np.zeros((1, d)))
    return MarginalFunction(fam, 0.0, domain or _box(d), name="constant", params={"d": d, "c": c})


def linear(d: int = 1, slope=None, domain: Optional[DomainSpec] = None) -> MarginalFunction:
    slope = np.ones(d) if slope is None else np.atleast_1d(np.asarray(slope, float))
    fam = QuadraticFamily([0.0], slope[None])
    return MarginalFunction(fam, 0.0, domain or _box(d), name="linear", params={"d": d, "slope": slope.tolist()})


def custom(pieces: Sequence[dict], d: int = 1, hessian_bound: Optional[float] = None,
           domain: Optional[DomainSpec] = None) -> MarginalFunction:
    """Quadratic pieces given as ``{"const": c, "grad": [...], "hess": [[...]]}`` mappings."""
    const = [float(p.get("const", 0.0)) for p in pieces]
    grad = [np.broadcast_to(np.asarray(p.get("grad", 0.0), float), (d,)) for p in pieces]
    hess = [np.asarray(p.get("hess", np.zeros((d, d))), float).reshape(d, d) for p in pieces]
    fam = QuadraticFamily(const, np.array(grad), np.array(hess))
    return MarginalFunction(fam, hessian_bound, domain or _box(d), name="custom", params={"d": d, "pieces": list(pieces)})


FUNCTIONS = {
    "phi1": (phi1, {"d": "int", "n_max": "int, number of dyadic segments kept (default 12)"}),
    "phi2": (phi2, {"d": "int", "n_max": "int"}),
    "neg-norm": (neg_norm, {"d": "int", "n_dirs": "int, sphere grid size", "center": "vector", "offset": "float"}),
    "min-parabolas": (min_parabolas, {"d": "int"}),
    "two-cone": (two_cone, {"d": "int", "a": "vector", "b": "vector", "ca": "float", "cb": "float"}),
    "quadratic": (quadratic, {"d": "int", "a": "float, Hessian multiple of the identity"}),
    "constant": (constant, {"d": "int", "c": "float"}),
    "linear": (linear, {"d": "int", "slope": "vector"}),
    "custom": (custom, {"d": "int", "pieces": "list of {const, grad, hess}", "hessian_bound": "float"}),
}


def make_function(name: str, **params) -> MarginalFunction:
    try:
        factory, _ = FUNCTIONS[name]
    except KeyError:
        raise KeyError(f"unknown function {name!r}; known: {sorted(FUNCTIONS)}") from None
    return factory(**params)
