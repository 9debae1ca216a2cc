import numpy as np
import pytest

from sconclab.errors import LocalizationViolated
from sconclab.evolution import (
    LocalizationBound,
    c11_certificate,
    estimate_critical_time,
    fundamental_solution,
    lax_oleinik_negative,
    lax_oleinik_positive,
    maximizer_radius,
    positive_operator,
    regularity_probe,
    touching_family,
    verify_inf_representation,
    zoom_refine,
)
from sconclab.grids import Grid
from sconclab.semiconcave import make_function
from sconclab.tonelli import make_system

MINPAR = make_function("min-parabolas", d=1)


def test_free_fundamental_solution(free2):
    y = np.array([0.6, -0.8])
    val, path = fundamental_solution(free2, 0.0, 1.0, np.zeros(2), y, method="direct")
    assert val == pytest.approx(0.5, abs=1e-12)
    np.testing.assert_allclose(path.points, np.outer(path.times, y), atol=1e-10)
    val2, _ = fundamental_solution(free2, 0.0, 2.0, np.array([1.0, 1.0]), np.array([0.0, -1.0]))
    assert val2 == pytest.approx(5.0 / 4.0, abs=1e-12)


def test_direct_vs_shooting_mechanical():
    sys_ = make_system("mechanical", d=1)
    hd, _ = fundamental_solution(sys_, 0.0, 0.3, np.array([0.2]), np.array([-0.5]), method="direct")
    hs, _ = fundamental_solution(sys_, 0.0, 0.3, np.array([0.2]), np.array([-0.5]), method="shooting")
    assert abs(hd - hs) < 1e-4


def test_negative_operator_examples(free1):
    zero = make_function("constant", d=1, c=0.0)
    assert lax_oleinik_negative(zero, free1, 0.0, 1.0, [0.3]) == pytest.approx(0.0, abs=1e-12)
    lin = make_function("linear", d=1, slope=[0.5])
    assert lax_oleinik_negative(lin, free1, 0.0, 0.8, [0.3]) == pytest.approx(0.15 - 0.8 * 0.25 / 2, abs=1e-9)
    nn = make_function("neg-norm", d=1)
    assert lax_oleinik_negative(nn, free1, 0.0, 1.0, [0.0]) == pytest.approx(-0.5, abs=1e-9)


def test_positive_operator_examples(free1, negnorm1):
    v, y = lax_oleinik_positive(negnorm1, free1, 0.0, 1.0, [0.0])
    assert v == pytest.approx(0.0, abs=1e-12) and abs(y[0]) < 1e-9
    v, _ = lax_oleinik_positive(negnorm1, free1, 0.0, 1.0, [0.5])
    assert v == pytest.approx(-0.125, abs=1e-9)
    v, y = lax_oleinik_positive(negnorm1, free1, 0.0, 1.0, [2.0])
    assert v == pytest.approx(-1.5, abs=1e-9) and y[0] == pytest.approx(1.0, abs=1e-8)


def test_positive_operator_closed_form_401(free1, negnorm1):
    xs = np.linspace(-2, 2, 401)[:, None]
    res = positive_operator(negnorm1, free1, 0.0, 1.0, xs)
    x = xs[:, 0]
    exact = np.where(np.abs(x) <= 1, -x * x / 2, -np.abs(x) + 0.5)
    assert np.abs(res.values - exact).max() < 1e-4


def test_maximizer_radius_examples(free1):
    assert maximizer_radius(free1, 1.0).lam == pytest.approx(2.0)
    mech = make_system("mechanical", d=1)
    assert maximizer_radius(mech, 1.0).lam == pytest.approx(4.0, abs=1e-3)
    assert maximizer_radius(free1, 0.0).lam == pytest.approx(0.5)


def test_localization_violation_raises(free1, negnorm1):
    tight = LocalizationBound(1.0, 0.01, (0.0, 1.0), {})
    with pytest.raises(LocalizationViolated):
        positive_operator(negnorm1, free1, 0.0, 1.0, np.array([[2.0]]), localization=tight)


def test_localization_property(free1, negnorm1, rng):
    bound = maximizer_radius(free1, negnorm1.lipschitz_estimate())
    xs = rng.uniform(-2, 2, (50, 1))
    for x in xs:
        t = rng.uniform(0.01, 0.5)
        _, y = lax_oleinik_positive(negnorm1, free1, 0.0, t, x)
        assert abs(y[0] - x[0]) <= bound.lam * t + 2 * 0.01


def test_touching_family_examples(negnorm1):
    fam = touching_family(negnorm1, [0.0])
    ys = np.linspace(-3, 3, 61)
    assert len(fam) == 2
    for q in fam:
        assert np.all(q(ys[:, None]) >= -np.abs(ys) - 1e-12)
    smooth = make_function("quadratic", d=1, a=-2.0)
    assert len(touching_family(smooth, [0.4])) == 1
    phi2 = make_function("phi2", d=1)
    fam2 = touching_family(phi2, [0.0])
    assert len(fam2) == 2
    grid = np.linspace(-2, 2, 801)[:, None]
    for q in fam2:
        assert np.all(q(grid) >= phi2.values(grid).min(axis=1) - 1e-12)


@pytest.mark.parametrize("name,t", [("neg-norm", 0.5), ("min-parabolas", 0.1), ("constant", 0.3)])
def test_inf_representation(free1, name, t):
    phi = make_function(name, d=1)
    xs = np.linspace(-2, 2, 401)[:, None]
    rep = verify_inf_representation(phi, free1, 0.0, t, xs)
    assert rep["max_deviation"] < 5e-3
    if name == "constant":
        assert rep["max_deviation"] < 1e-12


def test_c11_certificate_examples():
    h = 0.01
    x = np.arange(-100, 101) * h
    cert = c11_certificate(np.abs(x), [h])
    assert not cert.passed and cert.semiconvex == pytest.approx(0.0, abs=1e-9) or cert.semiconcave > 100
    assert c11_certificate(np.abs(x), [h]).semiconcave == pytest.approx(2 / h, rel=1e-6)
    lin = c11_certificate(3 * x + 1, [h])
    assert lin.passed and lin.semiconcave == pytest.approx(0, abs=1e-6) and lin.semiconvex == pytest.approx(0, abs=1e-6)


def test_critical_time_min_parabolas(free1):
    xg = Grid.uniform([-1.5], [1.5], 0.01)
    yg = Grid.uniform([-4.0], [4.0], 0.01)
    assert not regularity_probe(MINPAR, free1, 0.3, xg, yg)["fail"]
    assert regularity_probe(MINPAR, free1, 0.7, xg, yg)["fail"]
    est = estimate_critical_time(MINPAR, free1, np.arange(1, 11) / 10, xg, yg)
    assert 0.45 <= est.t_phi_lower <= est.t_phi_upper <= 0.55


def test_critical_time_concave_returns_cap(free1, negnorm1):
    xg = Grid.uniform([-1.0], [1.0], 0.01)
    est = estimate_critical_time(negnorm1, free1, [0.25, 0.5, 0.75, 1.0], xg)
    assert est.t_phi_lower == est.t_phi_upper == est.cap == 1.0


def test_critical_time_smooth_below_window(free1):
    phi = make_function("quadratic", d=1, a=2.0)  # C = 2, window 1/C = 0.5
    xg = Grid.uniform([-1.0], [1.0], 0.01)
    est = estimate_critical_time(phi, free1, [0.1, 0.2, 0.3, 0.4], xg, cap=0.4)
    assert est.t_phi_lower >= 0.4


def test_unique_maximizer_independent_of_start(free1):
    # below the critical time the refined maximizer does not depend on the refinement start
    rng = np.random.default_rng(0)
    x = np.array([[0.05]])
    t = 0.3

    def obj(xx, y):
        # xx: (n, 1), y: (n, m, 1) -> (n, m)
        phi = MINPAR.values(y.reshape(-1, 1), check=False).min(axis=1).reshape(y.shape[:2])
        return phi - (xx[:, None, 0] - y[..., 0]) ** 2 / (2 * t)

    h = 0.01  # refinement starts anywhere within one scan spacing of the scanned maximum
    ys = np.arange(-400, 401)[:, None] * h
    y_scan = ys[np.argmax(obj(x, ys[None])[0])]
    results = []
    for _ in range(5):
        y0 = y_scan[None] + rng.uniform(-h, h, (1, 1))
        _, y = zoom_refine(obj, x, y0, 2 * h, np.array([-4.0]), np.array([4.0]))
        results.append(y[0, 0])
    assert np.ptp(results) < 1e-8


def test_semigroup_grid_check(free1, negnorm1):
    # T(s+t) phi == T(s)(T(t) phi) with the intermediate function resampled
    xs = np.linspace(-1, 1, 41)
    direct = np.array([lax_oleinik_positive(negnorm1, free1, 0.0, 0.5, [x])[0] for x in xs])
    ys = np.linspace(-3, 3, 6001)
    inter = positive_operator(negnorm1, free1, 0.0, 0.2, ys[:, None]).values
    composed = np.array([np.max(inter - (x - ys) ** 2 / (2 * 0.3)) for x in xs])
    assert np.abs(direct - composed).max() < 1e-3
