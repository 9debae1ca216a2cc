import numpy as np
import pytest

from sconclab.errors import OutOfDomain
from sconclab.semiconcave import (
    FUNCTIONS,
    Polytope,
    active_set,
    affine_rank,
    evaluate,
    make_function,
    reachable_gradients,
    stratum_dimension,
    superdifferential,
)

MINPAR = make_function("min-parabolas", d=1)
PHI1 = make_function("phi1", d=1)
PHI2 = make_function("phi2", d=1)


def test_evaluate_examples():
    assert evaluate(MINPAR, [0.0]) == 1.0
    assert evaluate(PHI1, [-0.75]) == pytest.approx(-0.0625, abs=1e-15)
    assert evaluate(PHI2, [2.0]) == pytest.approx(-2.0, abs=1e-15)


def test_evaluate_outside_domain_raises():
    with pytest.raises(OutOfDomain):
        evaluate(MINPAR, [100.0])


def test_active_set_examples():
    a = active_set(MINPAR, [0.5], tol=1e-9)
    assert MINPAR.families[0].labels[a.indices[0]] == "(x-e1)^2" and len(a) == 1
    assert len(active_set(MINPAR, [0.0], tol=1e-9)) == 2
    a2 = active_set(PHI2, [0.0], tol=1e-9)
    assert sorted(a2.indices.tolist()) == [0, 1]  # zero piece and -x1 piece


def test_superdifferential_examples(negnorm2):
    sd = superdifferential(negnorm2, [1.0, 0.0])
    assert sd.is_singleton
    np.testing.assert_allclose(sd.vertices[0], [-1.0, 0.0], atol=1e-12)
    s1 = superdifferential(PHI1, [-1.0])
    assert s1.affine_dim == 1
    np.testing.assert_allclose(np.sort(s1.vertices[:, 0]), [-0.5, 0.0], atol=1e-12)
    s2 = superdifferential(PHI2, [0.0])
    np.testing.assert_allclose(np.sort(s2.vertices[:, 0]), [-1.0, 0.0], atol=1e-12)


def test_reachable_gradient_examples(negnorm1, negnorm2):
    g = reachable_gradients(negnorm1, [0.0])
    np.testing.assert_allclose(np.sort(g[:, 0]), [-1.0, 1.0], atol=1e-12)
    g2 = reachable_gradients(negnorm2, [0.0, 0.0], n_samples=4000)
    np.testing.assert_allclose(np.linalg.norm(g2, axis=1), 1.0, atol=1e-12)
    assert len(g2) > 100
    g3 = reachable_gradients(PHI2, [-0.25])
    np.testing.assert_allclose(np.sort(g3[:, 0]), [-0.125, 0.25], atol=1e-5)


def test_stratum_examples(negnorm2):
    assert stratum_dimension(negnorm2, [0.5, 0.3]) == 0
    assert stratum_dimension(make_function("phi2", d=2), [0.0, 0.3]) == 1
    assert stratum_dimension(negnorm2, [0.0, 0.0]) == 2
    assert stratum_dimension(make_function("neg-norm", d=3), [0.0, 0.0, 0.0]) == 3


def test_polytope_basics():
    square = Polytope.hull(np.array([[0, 0], [1, 0], [0, 1], [1, 1], [0.5, 0.5]], float))
    assert square.affine_dim == 2 and len(square.vertices) == 4
    assert square.contains([0.25, 0.75])
    assert square.distance([2.0, 0.5]) == pytest.approx(1.0)
    seg = Polytope.hull(np.array([[0.0, 0.0], [1.0, 1.0], [0.5, 0.5]]))
    assert seg.affine_dim == 1 and len(seg.vertices) == 2
    assert seg.distance([1.0, 0.0]) == pytest.approx(np.sqrt(0.5))
    samples = square.sample(max_points=50)
    assert all(square.contains(p, 1e-12) for p in samples)


def test_affine_rank_tolerance():
    k, _ = affine_rank(np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 1e-9]]))
    assert k == 1
    k, _ = affine_rank(np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 1e-3]]))
    assert k == 2


def test_labels_match_pointwise_strata():
    phi = make_function("phi2", d=2)
    pts = np.array([[0.0, 0.1], [-0.5, 0.2], [0.3, 0.3], [-0.3, 0.0]])
    expected = [stratum_dimension(phi, p) for p in pts]
    assert phi.labels(pts).tolist() == expected == [1, 1, 0, 0]


def test_piece_gradients_match_finite_differences(rng):
    for name in FUNCTIONS:
        if name == "custom":
            continue
        phi = make_function(name, d=2)
        xs = rng.uniform(-1.5, 1.5, (100, 2))
        g = phi.gradients(xs)
        e = 1e-6
        for j in range(2):
            dx = np.zeros(2)
            dx[j] = e
            fd = (phi.values(xs + dx, check=False) - phi.values(xs - dx, check=False)) / (2 * e)
            assert np.abs(fd - g[..., j]).max() < 1e-5, name


def test_custom_function_and_minimum():
    f = make_function("custom", d=1, pieces=[{"const": 0.0, "grad": 1.0}, {"const": 0.0, "grad": -1.0}])
    assert f.evaluate([2.0]) == -2.0 and f.stratum_dimension([0.0]) == 1
    g = type(f).minimum(f, make_function("constant", d=1, c=-1.0))
    assert g.evaluate([0.0]) == -1.0


def test_semiconcavity_gap_examples():
    for x in ([-1.0], [0.0], [-0.3]):
        sd = PHI2.superdifferential(x)
        for p in sd.sample(20):
            for y in np.linspace(-2, 2, 41):
                assert PHI2.semiconcavity_gap(x, [y], p) <= 1e-12
