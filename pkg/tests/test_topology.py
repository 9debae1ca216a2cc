import numpy as np
import pytest

from sconclab.errors import EndpointsSingular
from sconclab.grids import Grid
from sconclab.semiconcave import make_function
from sconclab.topology import (
    box_counting_dimension,
    broken_line_path,
    classify_grid,
    connectivity_report,
    near_codim2,
    path_is_valid,
)


def test_classify_neg_norm(negnorm2):
    sg = classify_grid(negnorm2, Grid.uniform([-1.0, -1.0], [1.0, 1.0], 0.05))
    nodes = sg.grid.points()
    two = np.flatnonzero(sg.labels == 2)
    assert len(two) == 1 and np.allclose(nodes[two[0]], 0.0, atol=1e-12)
    assert set(np.unique(sg.labels)) == {0, 2}


def test_classify_phi2_stripes():
    phi = make_function("phi2", d=2)
    grid = Grid.uniform([-2.0, -1.0], [1.0, 1.0], 2.0 ** -6)
    sg = classify_grid(phi, grid)
    nodes = grid.points()
    for n in range(1, 7):
        col = np.abs(nodes[:, 0] + 2.0 ** (1 - n)) < 1e-12
        assert np.all(sg.labels[col] == 1)
    assert np.all(sg.labels[np.abs(nodes[:, 0]) < 1e-12] == 1)


def test_classify_smooth():
    sg = classify_grid(make_function("quadratic", d=2), Grid.uniform([-1.0, -1.0], [1.0, 1.0], 0.1))
    assert np.all(sg.labels == 0) and len(sg.crossings) == 0


def test_box_counting_examples(rng):
    s = rng.uniform(0, 1, 10_000)
    seg = np.column_stack([s, 0.3 * np.ones_like(s)])
    est, _, _ = box_counting_dimension(seg)
    assert abs(est - 1.0) <= 0.1
    assert box_counting_dimension(np.array([[0.2, 0.3]]))[0] == 0.0


def test_box_counting_sing_phi2():
    phi = make_function("phi2", d=2)
    sg = classify_grid(phi, Grid.uniform([-2.0, -1.0], [1.0, 1.0], 2.0 ** -8))
    est, _, _ = box_counting_dimension(sg.singular_points(1), [2.0 ** -j for j in range(2, 9)])
    assert abs(est - 1.0) <= 0.2


def test_broken_line_examples(negnorm2):
    line = broken_line_path(negnorm2, [-1.0, 0.0], [1.0, 0.0], r=0.5, n_samples=10, seed=0)
    assert line.z[0] == pytest.approx(0.0, abs=1e-12) and abs(line.z[1]) > 0
    chord = np.linspace([-1.0, 0.0], [1.0, 0.0], 2001)
    assert np.any(near_codim2(negnorm2, chord, 1e-3))  # straight chord through 0 is rejected
    smooth = make_function("quadratic", d=2)
    assert broken_line_path(smooth, [-1.0, 0.3], [0.4, 1.0], seed=3).attempts == 1
    with pytest.raises(ValueError):
        broken_line_path(make_function("neg-norm", d=1), [-1.0], [1.0])
    with pytest.raises(EndpointsSingular):
        broken_line_path(negnorm2, [0.0, 0.0], [1.0, 0.0])


def test_path_validity_refined(negnorm2):
    for seed in range(10):
        line = broken_line_path(negnorm2, [-1.0, 0.0], [1.0, 0.0], n_samples=10, seed=seed)
        assert path_is_valid(negnorm2, line, 1e-3, refine=10)
        assert abs((line.z - 0.5 * (line.a + line.b)) @ (line.b - line.a)) <= 1e-12


def test_connectivity_examples(negnorm2):
    sg = classify_grid(negnorm2, Grid.uniform([-1.0, -1.0], [1.0, 1.0], 0.05))
    assert connectivity_report(sg, 1)["components"] == 1
    assert connectivity_report(sg, 2)["components"] == 1  # full-grid mask
    phi1 = make_function("phi1", d=2)
    sg1 = classify_grid(phi1, Grid.uniform([-1.5, -1.5], [0.5, 0.5], 0.01))
    assert connectivity_report(sg1, 1)["components"] == 1
    assert connectivity_report(sg1, 0)["components"] > 1


@pytest.mark.parametrize("h", [0.05, 0.02])
@pytest.mark.parametrize("name", ["phi1", "phi2", "neg-norm", "min-parabolas", "two-cone"])
def test_sigma_le_1_connected(name, h):
    phi = make_function(name, d=2)
    sg = classify_grid(phi, Grid.uniform([-1.5, -1.0], [0.5, 1.0], h))
    assert connectivity_report(sg, 1)["components"] == 1


def test_strata_csv(tmp_path, negnorm2):
    sg = classify_grid(negnorm2, Grid.uniform([-1.0, -1.0], [1.0, 1.0], 0.5))
    sg.to_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert len(lines) == 1 + 25
