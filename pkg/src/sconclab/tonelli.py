"""Tonelli Lagrangian/Hamiltonian pairs, the Legendre transform, and sampled checks
of the Tonelli conditions (strict convexity, superlinear growth, time-derivative bound).

Every evaluator is vectorised: positions, velocities and momenta have shape
``(..., d)`` and time broadcasts against the leading axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .errors import MaximizerOnBoundary, MissingConstants, NonConvexObjective

NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 50
FALLBACK_POINTS_PER_AXIS = 2048
# cap on the total fallback grid size for d > 1
FALLBACK_MAX_POINTS = 2**22


@dataclass(frozen=True)
class DomainSpec:
    """A box ``[lower, upper]`` or a flat torus with period ``upper - lower``."""

    kind: str
    lower: tuple
    upper: tuple

    def __post_init__(self):
        if self.kind not in ("box", "torus"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        lo, hi = np.asarray(self.lower, float), np.asarray(self.upper, float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lower/upper must be vectors of equal length")
        if not 1 <= lo.size <= 3:
            raise ValueError("only dimensions 1..3 are supported")
        if np.any(hi <= lo):
            raise ValueError("need lower < upper componentwise")

    @classmethod
    def box(cls, lower, upper) -> "DomainSpec":
        lo = np.atleast_1d(np.asarray(lower, float))
        hi = np.atleast_1d(np.asarray(upper, float))
        return cls("box", tuple(lo.tolist()), tuple(hi.tolist()))

    @classmethod
    def torus(cls, period, lower=None) -> "DomainSpec":
        period = np.atleast_1d(np.asarray(period, float))
        lo = np.zeros_like(period) if lower is None else np.broadcast_to(np.asarray(lower, float), period.shape)
        return cls("torus", tuple(lo.tolist()), tuple((lo + period).tolist()))

    @classmethod
    def cube(cls, d: int, half_width: float = 10.0) -> "DomainSpec":
        return cls.box([-half_width] * d, [half_width] * d)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def is_torus(self) -> bool:
        return self.kind == "torus"

    @property
    def period(self) -> np.ndarray:
        return np.asarray(self.upper) - np.asarray(self.lower)

    def contains(self, x, atol: float = 1e-12) -> np.ndarray:
        x = np.asarray(x, float)
        if self.is_torus:
            return np.ones(x.shape[:-1], dtype=bool)
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        return np.all((x >= lo - atol) & (x <= hi + atol), axis=-1)

    def wrap(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        if not self.is_torus:
            return x
        lo = np.asarray(self.lower)
        return lo + np.mod(x - lo, self.period)

    def displacement(self, x, y) -> np.ndarray:
        """``y - x``, using the minimal image on a torus."""
        delta = np.asarray(y, float) - np.asarray(x, float)
        if self.is_torus:
            per = self.period
            delta = delta - per * np.round(delta / per)
        return delta


@dataclass
class LagrangianJet:
    value: np.ndarray
    dt: np.ndarray
    dx: np.ndarray
    dv: np.ndarray
    dvv: np.ndarray
    dxx: np.ndarray
    dxv: np.ndarray  # dxv[..., r, c] = d^2 L / dx_r dv_c


@dataclass
class HamiltonianJet:
    value: np.ndarray
    dt: np.ndarray
    dx: np.ndarray
    dp: np.ndarray
    dxx: np.ndarray
    dxp: np.ndarray  # dxp[..., r, c] = d^2 H / dx_r dp_c
    dpp: np.ndarray


def _eye(shape, d):
    return np.broadcast_to(np.eye(d), tuple(shape) + (d, d)).copy()


@dataclass
class TonelliSystem:
    """A Lagrangian/Hamiltonian pair together with the growth constants.

    ``theta`` is the superlinear lower bound, ``c0`` the additive constant of the
    growth condition, ``C1``/``C2`` the constants bounding ``|L_t|``. ``c1`` is the
    constant entering the maximizer-localisation radius; it defaults to ``C1``.
    """

    name: str
    dim: int
    lagrangian: Callable[..., LagrangianJet]
    hamiltonian: Callable[..., HamiltonianJet]
    theta: Optional[Callable[[np.ndarray], np.ndarray]] = None
    c0: Optional[float] = 0.0
    C1: float = 0.0
    C2: float = 0.0
    c1: Optional[float] = None
    autonomous: bool = True
    separable: bool = False
    domain: DomainSpec = None
    params: dict = field(default_factory=dict)
    theta_star_exact: Optional[Callable[[float], float]] = None
    # closed-form fundamental solution h(t1, t2, x, y) when one is known
    fundamental: Optional[Callable] = None

    def __post_init__(self):
        if self.domain is None:
            self.domain = DomainSpec.cube(self.dim)
        if self.domain.dim != self.dim:
            raise ValueError("domain dimension does not match the system")

    @property
    def radius_c1(self) -> float:
        return self.C1 if self.c1 is None else self.c1

    def L(self, t, x, v):
        return self.lagrangian(t, np.asarray(x, float), np.asarray(v, float)).value

    def H(self, t, x, p):
        return self.hamiltonian(t, np.asarray(x, float), np.asarray(p, float)).value

    def theta_star(self, s: float) -> float:
        """Convex conjugate of ``theta`` on ``[0, inf)``, computed numerically."""
        if self.theta is None:
            raise MissingConstants(f"system {self.name!r} declares no theta")
        return _theta_conjugate(self.theta, float(s))


def _theta_conjugate(theta, s: float) -> float:
    return _theta_conjugate_cached(theta, s)


@lru_cache(maxsize=256)
def _theta_conjugate_cached(theta, s: float) -> float:
    lag = _radial_lagrangian(theta)
    value, _ = legendre_transform(lag, 0.0, np.zeros(1), np.array([s]))
    return float(value)


def _radial_lagrangian(theta):
    """Wrap a scalar growth function ``r -> theta(r)`` as the 1-D Lagrangian ``theta(|v|)``
    with finite-difference derivatives."""

    def lag(t, x, v):
        v = np.asarray(v, float)
        r = np.abs(v[..., 0])
        f = lambda u: np.asarray(theta(np.abs(u)), float)
        h1 = 1e-6 * (1.0 + r)
        h2 = 1e-4 * (1.0 + r)
        val = f(r)
        d1 = (f(v[..., 0] + h1) - f(v[..., 0] - h1)) / (2 * h1)
        d2 = (f(v[..., 0] + h2) - 2 * val + f(v[..., 0] - h2)) / h2**2
        shape = val.shape
        z = np.zeros(shape + (1,))
        zz = np.zeros(shape + (1, 1))
        return LagrangianJet(val, np.zeros(shape), z, d1[..., None], d2[..., None, None], zz, zz)

    return lag


# ---------------------------------------------------------------------------
# concave maximisation shared by both directions of the Legendre transform


def _maximize_concave(value_fn, jet_fn, z0, radius, *, tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER, retries=5):
    """Maximise a concave function of ``z`` in R^d.

    ``jet_fn(z) -> (value, grad, hess)`` for a single point, ``value_fn(Z)`` is
    vectorised over leading axes. Newton ascent first; grid scan + refinement when
    the Hessian is singular, non-finite, or Newton stalls.
    """
    z = np.array(z0, dtype=float)
    d = z.size
    converged = False
    for _ in range(max_iter):
        val, g, hess = jet_fn(z)
        if np.linalg.norm(g) < tol:
            converged = True
            break
        if not np.all(np.isfinite(hess)):
            break
        neg = -0.5 * (hess + hess.T)
        try:
            chol = np.linalg.cholesky(neg)
        except np.linalg.LinAlgError:
            lam_min = np.linalg.eigvalsh(neg).min()
            if lam_min < -1e-12 * max(1.0, np.abs(neg).max()):
                raise NonConvexObjective(f"objective Hessian has a positive eigenvalue {-lam_min:.3e} at {z}")
            break
        step = np.linalg.solve(chol.T, np.linalg.solve(chol, g))
        alpha = 1.0
        for _ in range(40):
            trial = z + alpha * step
            if value_fn(trial) >= val - 1e-15 * (1.0 + abs(val)):
                break
            alpha *= 0.5
        z = trial
        if np.linalg.norm(alpha * step) < 1e-15 * (1.0 + np.linalg.norm(z)):
            val, g, _ = jet_fn(z)
            converged = np.linalg.norm(g) < 1e3 * tol
            break
    if converged:
        return float(jet_fn(z)[0]), z

    per_axis = min(FALLBACK_POINTS_PER_AXIS, int(FALLBACK_MAX_POINTS ** (1.0 / d)))
    R = float(radius)
    for _ in range(retries + 1):
        axis = np.linspace(-R, R, per_axis)
        mesh = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
        vals = value_fn(mesh)
        k = int(np.argmax(vals))
        best = mesh[k]
        if np.all(np.abs(best) < R * (1 - 1e-12)):
            break
        R *= 2.0
    else:
        raise MaximizerOnBoundary(f"maximizer still on the search boundary at radius {R / 2}")
    spacing = axis[1] - axis[0]
    best = _zoom_single(value_fn, best, spacing)
    # polish with Newton when the Hessian is usable there
    val, g, hess = jet_fn(best)
    if np.all(np.isfinite(hess)):
        neg = -0.5 * (hess + hess.T)
        if np.linalg.eigvalsh(neg).min() > 1e-12:
            for _ in range(max_iter):
                val, g, hess = jet_fn(best)
                if np.linalg.norm(g) < tol:
                    break
                trial = best + np.linalg.solve(-hess, g)
                if value_fn(trial) < val - 1e-15 * (1 + abs(val)):
                    break
                best = trial
    return float(value_fn(best)), best


def _zoom_single(value_fn, center, spacing, iters=60):
    d = center.size
    offsets = np.stack(np.meshgrid(*([np.arange(-2, 3)] * d), indexing="ij"), axis=-1).reshape(-1, d)
    # centre first so ties keep the incumbent
    order = np.argsort(np.abs(offsets).sum(axis=1), kind="stable")
    offsets = offsets[order] / 2.0
    delta = spacing
    for _ in range(iters):
        cand = center + delta * offsets
        center = cand[int(np.argmax(value_fn(cand)))]
        delta *= 0.5
        if delta < 1e-14 * (1 + np.abs(center).max()):
            break
    return center


def legendre_transform(lagrangian, t, x, p, search_radius: float = 4.0, v0=None):
    """``sup_v p.v - L(t, x, v)`` for one point; returns ``(H, maximizing v)``."""
    if isinstance(lagrangian, TonelliSystem):
        lagrangian = lagrangian.lagrangian
    x = np.atleast_1d(np.asarray(x, float))
    p = np.atleast_1d(np.asarray(p, float))

    def value_fn(v):
        v = np.asarray(v, float)
        xb = np.broadcast_to(x, v.shape)
        return v @ p - lagrangian(t, xb, v).value

    def jet_fn(v):
        jet = lagrangian(t, x, v)
        return float(v @ p - jet.value), p - jet.dv, -jet.dvv

    start = np.zeros_like(p) if v0 is None else np.asarray(v0, float)
    return _maximize_concave(value_fn, jet_fn, start, search_radius)


def hamiltonian_conjugate(system: TonelliSystem, t, x, v, search_radius: float = 4.0, p0=None):
    """``sup_p p.v - H(t, x, p)``: the Lagrangian recovered from the Hamiltonian."""
    x = np.atleast_1d(np.asarray(x, float))
    v = np.atleast_1d(np.asarray(v, float))
    ham = system.hamiltonian

    def value_fn(p):
        p = np.asarray(p, float)
        return p @ v - ham(t, np.broadcast_to(x, p.shape), p).value

    def jet_fn(p):
        jet = ham(t, x, p)
        return float(p @ v - jet.value), v - jet.dp, -jet.dpp

    start = v.copy() if p0 is None else np.asarray(p0, float)
    return _maximize_concave(value_fn, jet_fn, start, search_radius)


# ---------------------------------------------------------------------------
# sampled verification


@dataclass
class ConditionReport:
    system: str
    n_samples: int
    l1_margin: float  # smallest eigenvalue of L_vv
    l2_margin: float  # min of L - theta(|v|) + c0
    l3_margin: float  # min of C1 + C2 L - |L_t|
    legendre_residual: float
    window: dict
    scale: float = 1.0  # max |L| over the samples, sets the round-off allowance

    @property
    def passed(self) -> dict:
        slack = 1e-12 * (1.0 + self.scale)
        return {
            "L1": self.l1_margin > 0.0,
            "L2": self.l2_margin >= -slack,
            "L3": self.l3_margin >= -slack,
        }

    @property
    def ok(self) -> bool:
        return all(self.passed.values())

    def as_dict(self) -> dict:
        return {
            "system": self.system,
            "n_samples": self.n_samples,
            "margins": {"L1": self.l1_margin, "L2": self.l2_margin, "L3": self.l3_margin},
            "passed": self.passed,
            "legendre_residual": self.legendre_residual,
            "window": self.window,
        }


def sample_window(system: TonelliSystem, n: int, rng, t_range=(0.0, 1.0), v_max=3.0):
    d = system.dim
    t = rng.uniform(*t_range, size=n)
    lo, hi = np.asarray(system.domain.lower), np.asarray(system.domain.upper)
    x = rng.uniform(lo, hi, size=(n, d))
    v = rng.uniform(-v_max, v_max, size=(n, d))
    return t, x, v


def verify_tonelli(system: TonelliSystem, n_samples: int = 1000, seed: int = 0, *, t_range=(0.0, 1.0),
                   v_max: float = 3.0, round_trip_samples: Optional[int] = None) -> ConditionReport:
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    t, x, v = sample_window(system, n_samples, rng, t_range, v_max)
    jet = system.lagrangian(t, x, v)
    l1 = float(np.linalg.eigvalsh(0.5 * (jet.dvv + np.swapaxes(jet.dvv, -1, -2))).min())
    if system.theta is None or system.c0 is None:
        l2 = float("nan")
    else:
        speed = np.linalg.norm(v, axis=-1)
        l2 = float(np.min(jet.value - np.asarray(system.theta(speed)) + system.c0))
    l3 = float(np.min(system.C1 + system.C2 * jet.value - np.abs(jet.dt)))
    m = n_samples if round_trip_samples is None else min(round_trip_samples, n_samples)
    residual = 0.0
    for i in range(m):
        lval, _ = hamiltonian_conjugate(system, t[i], x[i], v[i], search_radius=4.0 + 2 * np.abs(v[i]).max() ** 3)
        residual = max(residual, abs(lval - float(jet.value[i])))
    return ConditionReport(
        system=system.name,
        n_samples=n_samples,
        l1_margin=l1,
        l2_margin=l2,
        l3_margin=l3,
        legendre_residual=residual,
        window={"t": list(t_range), "v_max": v_max, "domain": [list(system.domain.lower), list(system.domain.upper)]},
        scale=float(np.abs(jet.value).max()),
    )


# ---------------------------------------------------------------------------
# built-in systems


def _quadratic_theta(r):
    return 0.5 * np.asarray(r, float) ** 2


def _quartic_theta(r):
    return 0.25 * np.asarray(r, float) ** 4


def _free_fundamental(t1, t2, x, y, domain=None):
    delta = np.asarray(y, float) - np.asarray(x, float) if domain is None else domain.displacement(x, y)
    return np.sum(delta * delta, axis=-1) / (2.0 * (t2 - t1))


def free_system(d: int = 1, domain: Optional[DomainSpec] = None, c0: float = 0.0, C1: float = 0.0,
                C2: float = 0.0) -> TonelliSystem:
    """``L = |v|^2/2``, ``H = |p|^2/2``."""

    def lag(t, x, v):
        v = np.asarray(v, float)
        shape = v.shape[:-1]
        z = np.zeros(shape + (d, d))
        return LagrangianJet(0.5 * np.sum(v * v, -1), np.zeros(shape), np.zeros_like(v), v.copy(), _eye(shape, d), z, z.copy())

    def ham(t, x, p):
        p = np.asarray(p, float)
        shape = p.shape[:-1]
        z = np.zeros(shape + (d, d))
        return HamiltonianJet(0.5 * np.sum(p * p, -1), np.zeros(shape), np.zeros_like(p), p.copy(), z, z.copy(), _eye(shape, d))

    dom = domain or DomainSpec.cube(d)
    return TonelliSystem(
        name="free", dim=d, lagrangian=lag, hamiltonian=ham, theta=_quadratic_theta, c0=c0, C1=C1, C2=C2,
        autonomous=True, separable=True, domain=dom, params={},
        theta_star_exact=lambda s: 0.5 * s * s,
        fundamental=lambda t1, t2, x, y: _free_fundamental(t1, t2, x, y, dom),
    )


def _potential(kind: str, amplitude: float, coeffs):
    """Return ``V0(x) -> (value, gradient, hessian)`` summed over coordinates."""
    if kind == "cos":
        def pot(x):
            c, s = np.cos(x), np.sin(x)
            hess = np.zeros(x.shape + (x.shape[-1],))
            idx = np.arange(x.shape[-1])
            hess[..., idx, idx] = -amplitude * c
            return amplitude * c.sum(-1), -amplitude * s, hess
        return pot
    if kind == "polynomial":
        cf = np.asarray(coeffs if coeffs is not None else [0.0, 0.0, 0.5], float)  # c_k x^k
        d1 = np.polynomial.polynomial.polyder(cf)
        d2 = np.polynomial.polynomial.polyder(d1)

        def pot(x):
            pv = np.polynomial.polynomial.polyval
            hess = np.zeros(x.shape + (x.shape[-1],))
            idx = np.arange(x.shape[-1])
            hess[..., idx, idx] = amplitude * pv(x, d2)
            return amplitude * pv(x, cf).sum(-1), amplitude * pv(x, d1), hess
        return pot
    raise ValueError(f"unknown potential {kind!r}")


def mechanical_system(d: int = 1, potential: str = "cos", amplitude: float = 1.0, coeffs=None,
                      forcing: float = 0.0, domain: Optional[DomainSpec] = None) -> TonelliSystem:
    """``H = |p|^2/2 + a(t) V(x)`` with ``a(t) = 1 + forcing * sin t``."""
    pot = _potential(potential, amplitude, coeffs)
    if domain is None:
        domain = DomainSpec.torus([2 * math.pi] * d, [-math.pi] * d) if potential == "cos" else DomainSpec.cube(d, 3.0)

    def factor(t):
        t = np.asarray(t, float)
        return 1.0 + forcing * np.sin(t), forcing * np.cos(t)

    def lag(t, x, v):
        x, v = np.asarray(x, float), np.asarray(v, float)
        V, dV, ddV = pot(x)
        a, da = factor(t)
        a = np.broadcast_to(a, V.shape)
        da = np.broadcast_to(da, V.shape)
        shape = v.shape[:-1]
        return LagrangianJet(0.5 * np.sum(v * v, -1) - a * V, -da * V, -a[..., None] * dV, v.copy(), _eye(shape, d),
                             -a[..., None, None] * ddV, np.zeros(shape + (d, d)))

    def ham(t, x, p):
        x, p = np.asarray(x, float), np.asarray(p, float)
        V, dV, ddV = pot(x)
        a, da = factor(t)
        a = np.broadcast_to(a, V.shape)
        da = np.broadcast_to(da, V.shape)
        shape = p.shape[:-1]
        return HamiltonianJet(0.5 * np.sum(p * p, -1) + a * V, da * V, a[..., None] * dV, p.copy(),
                              a[..., None, None] * ddV, np.zeros(shape + (d, d)), _eye(shape, d))

    # sup/max |V0| over the domain by dense sampling (exact for cos)
    if potential == "cos":
        sup_v, max_abs = amplitude * d if amplitude > 0 else 0.0, abs(amplitude) * d
    else:
        axes = [np.linspace(lo, hi, 201) for lo, hi in zip(domain.lower, domain.upper)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, d)
        vals = pot(pts)[0]
        sup_v, max_abs = max(float(vals.max()), 0.0), float(np.abs(vals).max())
    c0 = sup_v if forcing == 0 else (1 + abs(forcing)) * max_abs
    return TonelliSystem(
        name="mechanical", dim=d, lagrangian=lag, hamiltonian=ham, theta=_quadratic_theta, c0=c0,
        C1=abs(forcing) * max_abs, C2=0.0, autonomous=forcing == 0, separable=True, domain=domain,
        params={"potential": potential, "amplitude": amplitude, "coeffs": coeffs, "forcing": forcing},
        theta_star_exact=lambda s: 0.5 * s * s,
    )


def quartic_system(d: int = 1, domain: Optional[DomainSpec] = None) -> TonelliSystem:
    """``L = |v|^4/4``, ``H = (3/4)|p|^{4/3}``; the Hessian of ``H`` blows up at ``p = 0``."""

    def lag(t, x, v):
        v = np.asarray(v, float)
        shape = v.shape[:-1]
        r2 = np.sum(v * v, -1)
        dvv = r2[..., None, None] * _eye(shape, d) + 2.0 * v[..., :, None] * v[..., None, :]
        z = np.zeros(shape + (d, d))
        return LagrangianJet(0.25 * r2**2, np.zeros(shape), np.zeros_like(v), r2[..., None] * v, dvv, z, z.copy())

    def ham(t, x, p):
        p = np.asarray(p, float)
        shape = p.shape[:-1]
        r = np.linalg.norm(p, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(r > 0, r ** (-2.0 / 3.0), np.inf)
            dp = np.where(r[..., None] > 0, scale[..., None] * p, 0.0)
            unit = np.where(r[..., None] > 0, p / np.where(r > 0, r, 1.0)[..., None], 0.0)
            dpp = scale[..., None, None] * (_eye(shape, d) - (2.0 / 3.0) * unit[..., :, None] * unit[..., None, :])
        z = np.zeros(shape + (d, d))
        return HamiltonianJet(0.75 * r ** (4.0 / 3.0), np.zeros(shape), np.zeros_like(p), dp, z, z.copy(), dpp)

    return TonelliSystem(
        name="quartic", dim=d, lagrangian=lag, hamiltonian=ham, theta=_quartic_theta, c0=0.0, autonomous=True,
        separable=True, domain=domain or DomainSpec.cube(d), theta_star_exact=lambda s: 0.75 * s ** (4.0 / 3.0),
    )


SYSTEMS = {
    "free": (free_system, {"d": "int, dimension (default 1)"}),
    "mechanical": (mechanical_system, {
        "d": "int", "potential": "cos | polynomial", "amplitude": "float", "coeffs": "list of polynomial coefficients",
        "forcing": "float, amplitude of the sin(t) modulation (0 = autonomous)",
    }),
    "quartic": (quartic_system, {"d": "int"}),
}


def make_system(name: str, **params) -> TonelliSystem:
    try:
        factory, _ = SYSTEMS[name]
    except KeyError:
        raise KeyError(f"unknown system {name!r}; known: {sorted(SYSTEMS)}") from None
    domain = params.pop("domain", None)
    if domain is not None:
        params["domain"] = domain
    return factory(**params)
