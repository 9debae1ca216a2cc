"""Hamiltonian characteristics ``x' = H_p, p' = -H_x``, their variational equation,
the flow map ``p -> X(t1; t1, t2, x, p)`` and a sampled diffeomorphism-window certificate.

Terminal data live at ``t2``; "backward" integration runs from ``t2`` down to ``t1``
and is implemented as the same forward scheme with a negative time step.
Separable autonomous Hamiltonians use Störmer-Verlet, everything else classical RK4.
Tangent (variational) maps are always those of the scheme actually used, so
Jacobians are exact derivatives of the discrete flow.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import NotConvexAtX, OutsideWindow, StepRejected
from .tonelli import TonelliSystem

DEFAULT_DT = 1e-3
FD_STEP = 1e-5


def default_steps(t1: float, t2: float, dt: float = DEFAULT_DT) -> int:
    return max(1, int(math.ceil(abs(t2 - t1) / dt - 1e-9)))


def _method(system: TonelliSystem, method: str) -> str:
    if method == "auto":
        return "verlet" if (system.separable and system.autonomous) else "rk4"
    if method not in ("verlet", "rk4"):
        raise ValueError(f"unknown integration method {method!r}")
    if method == "verlet" and not system.separable:
        raise ValueError("Störmer-Verlet needs a separable Hamiltonian")
    return method


# ---------------------------------------------------------------------------
# data types


@dataclass
class PhasePoint:
    t: float
    x: np.ndarray
    p: np.ndarray


@dataclass
class Trajectory:
    """Knots of a characteristic, ordered in integration direction."""

    t: np.ndarray  # (n+1,)
    x: np.ndarray  # (n+1, ..., d)
    p: np.ndarray
    H: np.ndarray  # (n+1, ...)
    method: str

    @property
    def end(self) -> PhasePoint:
        return PhasePoint(float(self.t[-1]), self.x[-1], self.p[-1])

    @property
    def start(self) -> PhasePoint:
        return PhasePoint(float(self.t[0]), self.x[0], self.p[0])

    def energy_drift(self) -> float:
        """``max |H(s) - H(start)| / max(1, |H(start)|)`` along the trajectory."""
        h0 = self.H[0]
        return float(np.max(np.abs(self.H - h0) / np.maximum(1.0, np.abs(h0))))

    def to_csv(self, path) -> None:
        if self.x.ndim != 2:
            raise ValueError("CSV export supports a single trajectory")
        d = self.x.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"x{i}" for i in range(d)] + [f"p{i}" for i in range(d)] + ["H"])
            for k in range(len(self.t)):
                w.writerow([f"{v:.17g}" for v in (self.t[k], *self.x[k], *self.p[k], self.H[k])])


@dataclass
class VariationalState:
    """``X_p(t1), P_p(t1)`` for terminal data ``X_p(t2) = 0, P_p(t2) = I``."""

    X_p: np.ndarray
    P_p: np.ndarray
    x: np.ndarray  # X(t1)
    p: np.ndarray  # P(t1)
    t1: float
    t2: float


@dataclass
class DiffeoWindow:
    R: float
    c_R: float
    t_R: float
    m_R: float
    probes: list
    degenerate: bool = False  # H_pp non-finite somewhere on the sampled ball
    notes: str = ""

    def as_dict(self) -> dict:
        return {"R": self.R, "c_R": self.c_R, "t_R": self.t_R, "m_R": self.m_R, "probes": self.probes,
                "degenerate": self.degenerate, "notes": self.notes}


# ---------------------------------------------------------------------------
# one-step schemes on flat batches (B, d)


def _jet(system, t, x, p):
    jet = system.hamiltonian(t, x, p)
    return jet


def _check(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise StepRejected("non-finite Hamiltonian derivative along the characteristic")


def _rk4_rhs(system, t, x, p, tangent):
    jet = _jet(system, t, x, p)
    _check(jet.dx, jet.dp)
    dx, dp = jet.dp, -jet.dx
    if tangent is None:
        return dx, dp, None, jet
    d = x.shape[-1]
    _check(jet.dxx, jet.dxp, jet.dpp)
    tx, tp = tangent[:, :d], tangent[:, d:]
    hpx = np.swapaxes(jet.dxp, -1, -2)
    dtx = hpx @ tx + jet.dpp @ tp
    dtp = -jet.dxx @ tx - jet.dxp @ tp
    return dx, dp, np.concatenate([dtx, dtp], axis=1), jet


def _rk4_step(system, t, x, p, tangent, dt, action):
    k1 = _rk4_rhs(system, t, x, p, tangent)
    mid = t + 0.5 * dt

    def shift(k, c):
        tx = None if tangent is None else tangent + c * k[2]
        return x + c * k[0], p + c * k[1], tx

    k2 = _rk4_rhs(system, mid, *shift(k1, 0.5 * dt))
    k3 = _rk4_rhs(system, mid, *shift(k2, 0.5 * dt))
    k4 = _rk4_rhs(system, t + dt, *shift(k3, dt))
    ks = (k1, k2, k3, k4)
    w = (1.0, 2.0, 2.0, 1.0)
    x_new = x + dt / 6.0 * sum(c * k[0] for c, k in zip(w, ks))
    p_new = p + dt / 6.0 * sum(c * k[1] for c, k in zip(w, ks))
    t_new = None if tangent is None else tangent + dt / 6.0 * sum(c * k[2] for c, k in zip(w, ks))
    if action is not None:
        # Lagrangian along the flow: L = p.H_p - H, integrated with the same stage weights
        stage_p = (p, p + 0.5 * dt * k1[1], p + 0.5 * dt * k2[1], p + dt * k3[1])
        lag = [np.sum(sp * k[0], -1) - k[3].value for sp, k in zip(stage_p, ks)]
        action = action + dt / 6.0 * sum(c * l for c, l in zip(w, lag))
    return x_new, p_new, t_new, action


def _verlet_step(system, t, x, p, tangent, dt):
    """Kick-drift-kick for ``H = K(p) + V(x)``; exact tangent of the discrete map."""
    jx = _jet(system, t, x, p)
    _check(jx.dx)
    p_half = p - 0.5 * dt * jx.dx
    jh = _jet(system, t, x, p_half)
    _check(jh.dp)
    x_new = x + dt * jh.dp
    jn = _jet(system, t, x_new, p_half)
    _check(jn.dx)
    p_new = p_half - 0.5 * dt * jn.dx
    if tangent is None:
        return x_new, p_new, None
    d = x.shape[-1]
    _check(jx.dxx, jh.dpp, jn.dxx)
    tx, tp = tangent[:, :d], tangent[:, d:]
    tp_half = tp - 0.5 * dt * jx.dxx @ tx
    tx_new = tx + dt * jh.dpp @ tp_half
    tp_new = tp_half - 0.5 * dt * jn.dxx @ tx_new
    return x_new, p_new, np.concatenate([tx_new, tp_new], axis=1)


def integrate(system: TonelliSystem, t_start: float, t_end: float, x, p, steps: Optional[int] = None,
              method: str = "auto", tangent=None, record: bool = False, with_action: bool = False):
    """Integrate from ``(x, p)`` at ``t_start`` to ``t_end`` (either direction).

    ``tangent`` is an optional ``(..., 2d, m)`` matrix of tangent vectors carried along.
    Returns ``dict(x, p, tangent, action, trajectory)``; no torus wrapping is applied.
    """
    x = np.asarray(x, float)
    p = np.asarray(p, float)
    d = system.dim
    lead = x.shape[:-1]
    xb = x.reshape(-1, d).copy()
    pb = np.broadcast_to(p, x.shape).reshape(-1, d).copy()
    tb = None
    if tangent is not None:
        tangent = np.asarray(tangent, float)
        tb = np.broadcast_to(tangent, lead + tangent.shape[-2:]).reshape((-1,) + tangent.shape[-2:]).copy()
    n = default_steps(t_start, t_end) if steps is None else int(steps)
    if n < 1:
        raise ValueError("steps must be >= 1")
    meth = _method(system, method)
    if with_action and meth != "rk4":
        meth = "rk4"
    dt = (t_end - t_start) / n
    action = np.zeros(len(xb)) if with_action else None
    ts = t_start + dt * np.arange(n + 1)
    ts[-1] = t_end
    rec_x, rec_p = ([xb.copy()], [pb.copy()]) if record else (None, None)
    for k in range(n):
        t = ts[k]
        if meth == "verlet":
            xb, pb, tb = _verlet_step(system, t, xb, pb, tb, dt)
        else:
            xb, pb, tb, action = _rk4_step(system, t, xb, pb, tb, dt, action)
        if record:
            rec_x.append(xb.copy())
            rec_p.append(pb.copy())
    out = {
        "x": xb.reshape(lead + (d,)),
        "p": pb.reshape(lead + (d,)),
        "tangent": None if tb is None else tb.reshape(lead + tb.shape[-2:]),
        "action": None if action is None else action.reshape(lead),
        "method": meth,
        "trajectory": None,
    }
    if record:
        X = np.stack(rec_x).reshape((n + 1,) + lead + (d,))
        P = np.stack(rec_p).reshape((n + 1,) + lead + (d,))
        Hs = np.stack([system.H(s, X[i], P[i]) for i, s in enumerate(ts)])
        out["trajectory"] = Trajectory(ts, X, P, Hs, meth)
    return out


# ---------------------------------------------------------------------------
# public operations


def hamiltonian_flow(system: TonelliSystem, t1: float, t2: float, x, p, steps: Optional[int] = None,
                     direction: str = "backward", method: str = "auto", wrap: bool = True) -> Trajectory:
    """Characteristic through ``(x, p)``.

    ``direction="backward"``: data at ``t2``, integrate down to ``t1``.
    ``direction="forward"``: data at ``t1``, integrate up to ``t2`` (the map ``Phi_H^{t1,t2}``).
    """
    if direction == "backward":
        a, b = t2, t1
    elif direction == "forward":
        a, b = t1, t2
    else:
        raise ValueError("direction must be 'forward' or 'backward'")
    res = integrate(system, a, b, x, p, steps, method, record=True)
    traj = res["trajectory"]
    if wrap and system.domain.is_torus:
        traj.x = system.domain.wrap(traj.x)
    return traj


def flow_endpoint(system: TonelliSystem, t_from: float, t_to: float, x, p, steps: Optional[int] = None,
                  method: str = "auto", wrap: bool = False):
    """``(X(t_to), P(t_to))`` for data ``(x, p)`` at ``t_from``; batched over leading axes."""
    res = integrate(system, t_from, t_to, x, p, steps, method)
    xo = system.domain.wrap(res["x"]) if wrap else res["x"]
    return xo, res["p"]


def variational_flow(system: TonelliSystem, t1: float, t2: float, x, p, steps: Optional[int] = None,
                     method: str = "auto") -> VariationalState:
    """``X_p(t1), P_p(t1)`` along the characteristic with terminal data ``(x, p)`` at ``t2``."""
    d = system.dim
    tangent = np.vstack([np.zeros((d, d)), np.eye(d)])
    res = integrate(system, t2, t1, x, p, steps, method, tangent=tangent)
    tg = res["tangent"]
    return VariationalState(tg[..., :d, :], tg[..., d:, :], res["x"], res["p"], t1, t2)


def monodromy(system: TonelliSystem, t1: float, t2: float, x, p, steps: Optional[int] = None,
              method: str = "auto") -> np.ndarray:
    """Full ``2d x 2d`` Jacobian of ``(x, p)|_{t2} -> (X, P)|_{t1}``: columns ``[d/dx | d/dp]``."""
    d = system.dim
    res = integrate(system, t2, t1, x, p, steps, method, tangent=np.eye(2 * d))
    return res["tangent"]


def symplectic_defect(M: np.ndarray) -> float:
    """``max |M^T J M - J|`` for the canonical two-form ``J``."""
    n = M.shape[-1] // 2
    J = np.block([[np.zeros((n, n)), np.eye(n)], [-np.eye(n), np.zeros((n, n))]])
    return float(np.abs(np.swapaxes(M, -1, -2) @ J @ M - J).max())


def flow_map(system: TonelliSystem, x, t1: float, t2: float, p, steps: Optional[int] = None,
             method: str = "auto") -> np.ndarray:
    """``Phi_{x,t1,t2}(p) = X(t1; t1, t2, x, p)`` in the covering space (no wrapping)."""
    return integrate(system, t2, t1, x, p, steps, method)["x"]


def invert_flow_map(system: TonelliSystem, x, t1: float, t2: float, target, p0=None, steps: Optional[int] = None,
                    method: str = "auto", tol: float = 1e-12, max_iter: int = 20, R: Optional[float] = None):
    """Solve ``Phi_{x,t1,t2}(p) = target`` by Newton with the variational Jacobian.

    Returns ``(p, iterations)``. Raises :class:`OutsideWindow` when Newton fails, the
    Jacobian degenerates, or the iterate leaves ``|p| <= R`` (when ``R`` is given).
    """
    x = np.atleast_1d(np.asarray(x, float))
    target = np.atleast_1d(np.asarray(target, float))
    tau = t2 - t1
    p = (x - target) / tau if p0 is None else np.atleast_1d(np.asarray(p0, float)).copy()
    scale = 1.0 + np.abs(target).max()
    for it in range(1, max_iter + 1):
        vs = variational_flow(system, t1, t2, x, p, steps, method)
        r = vs.x - target
        if R is not None and np.linalg.norm(p) > R:
            raise OutsideWindow(f"Newton iterate |p|={np.linalg.norm(p):.3g} left the ball of radius {R}")
        if np.abs(r).max() <= tol * scale:
            return p, it - 1
        try:
            step = np.linalg.solve(vs.X_p, r)
        except np.linalg.LinAlgError:
            raise OutsideWindow("singular flow-map Jacobian") from None
        p = p - step
        if not np.all(np.isfinite(p)):
            raise OutsideWindow("Newton iterate diverged")
    vs = variational_flow(system, t1, t2, x, p, steps, method)
    if np.abs(vs.x - target).max() <= 1e3 * tol * scale:
        return p, max_iter
    raise OutsideWindow(f"flow-map inversion did not converge in {max_iter} steps")


def _ball_samples(d: int, R: float, n: int, rng) -> np.ndarray:
    u = rng.normal(size=(n, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    r = R * rng.uniform(size=(n, 1)) ** (1.0 / d)
    shell = R * u[: max(1, n // 4)]
    return np.vstack([np.zeros((1, d)), r * u, shell])


def diffeo_window(system: TonelliSystem, x, R: float, probe_times: Sequence[float] = (0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0),
                  t2: float = 0.0, n_samples: int = 64, seed: int = 0, steps: Optional[int] = None) -> DiffeoWindow:
    """Sampled certificate of the window on which ``p -> Phi_{x,t2-tau,t2}(p)`` is a diffeomorphism of ``|p| <= R``.

    ``c_R`` is the least eigenvalue of ``H_pp(t2, x, p)`` over the sampled ball; ``t_R`` the largest
    probed gap for which ``-X_p(t1)/tau`` stays positive definite with least eigenvalue above ``c_R/2``
    at every sample (probing stops at the first failure); ``m_R = c_R R / 2``.
    """
    if R <= 0:
        raise ValueError("R must be positive")
    x = np.atleast_1d(np.asarray(x, float))
    d = system.dim
    rng = np.random.default_rng(seed)
    ps = _ball_samples(d, R, n_samples, rng)
    jet = system.hamiltonian(t2, np.broadcast_to(x, ps.shape), ps)
    finite = np.all(np.isfinite(jet.dpp.reshape(len(ps), -1)), axis=1)
    degenerate = not np.all(finite)
    eig = np.linalg.eigvalsh(0.5 * (jet.dpp[finite] + np.swapaxes(jet.dpp[finite], -1, -2))).min(axis=1)
    c_R = float(eig.min())
    if c_R <= 0:
        raise NotConvexAtX(f"H_pp is not positive definite on |p| <= {R} at x={x}")
    flow_ps = ps[finite]
    probes, t_R = [], 0.0
    for tau in sorted(probe_times):
        try:
            vs = variational_flow(system, t2 - tau, t2, np.broadcast_to(x, flow_ps.shape), flow_ps, steps)
            sym = -0.5 * (vs.X_p + np.swapaxes(vs.X_p, -1, -2)) / tau
            lam = float(np.linalg.eigvalsh(sym).min())
        except StepRejected:
            lam = float("nan")
        ok = bool(np.isfinite(lam) and lam > 0.5 * c_R)
        probes.append({"tau": float(tau), "min_eig": lam, "ok": ok})
        if not ok:
            break
        t_R = float(tau)
    notes = ""
    if degenerate:
        notes = "H_pp is unbounded at sampled momenta (excluded from c_R and from the flow probes)"
    return DiffeoWindow(float(R), c_R, t_R, 0.5 * c_R * R, probes, degenerate, notes)


def trajectory_to_csv(traj: Trajectory, path) -> None:
    traj.to_csv(path)
