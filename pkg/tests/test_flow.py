import numpy as np
import pytest

from sconclab.errors import OutsideWindow
from sconclab.evolution import fundamental_solution
from sconclab.flow import (
    default_steps,
    diffeo_window,
    flow_map,
    hamiltonian_flow,
    invert_flow_map,
    monodromy,
    symplectic_defect,
    variational_flow,
)
from sconclab.tonelli import make_system


def test_free_backward_flow(free1):
    traj = hamiltonian_flow(free1, 0.0, 1.0, [1.0], [2.0])
    assert traj.x[-1, 0] == pytest.approx(-1.0, abs=1e-13)
    assert traj.p[-1, 0] == pytest.approx(2.0, abs=1e-13)


def test_round_trip(pendulum):
    fwd = hamiltonian_flow(pendulum, 0.0, 1.0, [0.3], [0.7], direction="forward", wrap=False)
    back = hamiltonian_flow(pendulum, 0.0, 1.0, fwd.x[-1], fwd.p[-1], direction="backward", wrap=False)
    assert abs(back.x[-1, 0] - 0.3) < 1e-12 and abs(back.p[-1, 0] - 0.7) < 1e-12


def test_default_steps():
    assert default_steps(0.0, 1.0) == 1000
    assert default_steps(0.0, 0.0015) == 2


def test_energy_drift_verlet_and_rk4(pendulum):
    verlet = hamiltonian_flow(pendulum, 0.0, 1.0, [0.5], [1.0], direction="forward")
    assert verlet.method == "verlet"
    assert verlet.energy_drift() < 1e-7
    rk4 = hamiltonian_flow(pendulum, 0.0, 1.0, [0.5], [1.0], direction="forward", method="rk4")
    assert rk4.energy_drift() < 1e-8


def test_free_variational_exact(free2):
    vs = variational_flow(free2, 0.25, 1.0, np.array([0.3, -0.2]), np.array([1.0, 2.0]))
    np.testing.assert_allclose(vs.X_p, -0.75 * np.eye(2), atol=1e-14, rtol=0)
    np.testing.assert_allclose(vs.P_p, np.eye(2), atol=1e-14, rtol=0)


def test_pendulum_short_time_variational(pendulum):
    vs = variational_flow(pendulum, 0.9, 1.0, np.array([0.5]), np.array([1.0]))
    assert abs(vs.X_p[0, 0] + 0.1) < 1e-3


@pytest.mark.parametrize("name", ["free", "mechanical", "quartic"])
def test_jacobian_vs_finite_differences(name):
    sys_ = make_system(name, d=2)
    x, p = np.array([0.4, -0.3]), np.array([0.8, 0.5])
    vs = variational_flow(sys_, 0.0, 0.7, x, p)
    e = 1e-5
    fd = np.column_stack([(flow_map(sys_, x, 0.0, 0.7, p + e * ej) - flow_map(sys_, x, 0.0, 0.7, p - e * ej)) / (2 * e)
                          for ej in np.eye(2)])
    assert np.abs(vs.X_p - fd).max() < 1e-5


@pytest.mark.parametrize("name", ["free", "mechanical"])
def test_symplectic(name):
    sys_ = make_system(name, d=2)
    M = monodromy(sys_, 0.0, 1.0, np.array([0.4, -0.3]), np.array([0.8, 0.5]))
    assert symplectic_defect(M) < 1e-6


def test_diffeo_windows(free1, pendulum):
    w = diffeo_window(free1, [0.0], 3.0)
    assert w.c_R == 1.0 and all(pr["ok"] for pr in w.probes)
    wp = diffeo_window(pendulum, [0.5], 2.0)
    assert wp.c_R == pytest.approx(1.0) and wp.t_R >= 0.5
    wq = diffeo_window(make_system("quartic", d=1), [0.0], 1.0)
    assert wq.degenerate and wq.c_R > 0


def test_invert_flow_map(pendulum):
    x = np.array([0.2])
    target = np.array([-0.4])
    p, iters = invert_flow_map(pendulum, x, 0.0, 0.5, target)
    assert iters <= 20
    assert abs(flow_map(pendulum, x, 0.0, 0.5, p)[0] - target[0]) < 1e-10


def test_invert_outside_window(free1):
    with pytest.raises(OutsideWindow):
        invert_flow_map(free1, np.array([0.0]), 0.0, 0.1, np.array([5.0]), R=1.0)


def test_window_soundness_shooting_converges(pendulum, rng):
    ok = 0
    for _ in range(20):
        x, y = rng.uniform(-1, 1, 1), rng.uniform(-1, 1, 1)
        try:
            fundamental_solution(pendulum, 0.0, 0.3, x, y, method="shooting")
            ok += 1
        except Exception:
            pass
    assert ok / 20 >= 0.95
