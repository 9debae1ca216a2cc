import json

import numpy as np
import pytest

from sconclab import cli, io
from sconclab.config import apply_overrides, from_dict, load_config, parse_box, parse_vector
from sconclab.errors import ConfigError
from sconclab.grids import Grid


def test_parse_helpers():
    assert parse_vector("-1,0") == [-1.0, 0.0]
    assert parse_box("-2,1x-1,1") == ([-2.0, -1.0], [1.0, 1.0])
    with pytest.raises(ConfigError):
        parse_box("1,0")
    with pytest.raises(ConfigError):
        parse_vector("a,b")


def test_load_config_errors(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text('experiment = "flow"\nseed = = 1\n[params]\n')
    with pytest.raises(ConfigError) as exc:
        load_config(bad)
    assert "line" in str(exc.value)
    with pytest.raises(ConfigError, match="unknown top-level"):
        from_dict({"experiment": "flow", "bogus": 1})
    with pytest.raises(ConfigError, match="experiment"):
        from_dict({"seed": 1})


def test_overrides_win(tmp_path):
    cfg_path = tmp_path / "c.toml"
    cfg_path.write_text('experiment = "evolve"\nseed = 1\n[params]\nt = 0.3\n[phi]\nname = "phi1"\n')
    cfg = apply_overrides(load_config(cfg_path), t=0.5, seed=7, phi="neg-norm",
                          params=["h=0.02", "system.name=\"mechanical\"", "phi.d=2"])
    assert cfg.params["t"] == 0.5 and cfg.params["h"] == 0.02 and cfg.seed == 7
    assert cfg.system["name"] == "mechanical" and cfg.phi == {"name": "neg-norm", "d": 2}


def test_json_and_csv_round_trip(tmp_path):
    s = io.dumps({"b": np.float64(0.1), "a": np.arange(3), "c": float("nan")})
    assert json.loads(s) == {"a": [0, 1, 2], "b": 0.1, "c": "nan"}
    pts = np.random.default_rng(0).normal(size=(20, 2))
    vals = np.random.default_rng(1).normal(size=20)
    io.write_grid_function(tmp_path / "g.csv", pts, vals)
    p2, v2 = io.read_grid_function(tmp_path / "g.csv")
    np.testing.assert_array_equal(p2, pts)  # 17 significant digits round-trip exactly
    np.testing.assert_array_equal(v2, vals)
    rep = io.operator_report("positive", 0.0, 1.0, Grid.uniform([0.0], [1.0], 0.5), [1, 2, 3], [[0], [1], [2]])
    assert rep["grid"]["shape"] == [3]


@pytest.mark.parametrize("kind,names", [
    ("systems", ["free", "mechanical", "quartic"]),
    ("functions", ["phi1", "phi2", "neg-norm", "min-parabolas"]),
    ("experiments", ["verify-arnaud", "strata", "path", "evolve", "flow", "dim", "critical-time", "inf-repr"]),
])
def test_list(capsys, kind, names):
    assert cli.main(["list", kind]) == 0
    out = capsys.readouterr().out
    for n in names:
        assert n in out


def test_run_verify_arnaud_flags(tmp_path):
    code = cli.main(["run", "verify-arnaud", "--phi", "neg-norm", "--system", "free", "--t", "0.5", "--h", "0.01",
                     "--out", str(tmp_path)])
    assert code == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["results"]["parts"][0]["hausdorff"] <= 0.02
    assert (tmp_path / "run.json").exists() and "timestamp" not in (tmp_path / "report.json").read_text()


def test_run_strata_and_path(tmp_path):
    assert cli.main(["run", "strata", "--phi", "phi2", "--box", "-2,1x-1,1", "--h", "0.02",
                     "--out", str(tmp_path / "s")]) == 0
    assert (tmp_path / "s" / "strata.csv").exists() and (tmp_path / "s" / "components.json").exists()
    assert cli.main(["run", "path", "--phi", "neg-norm", "--a", "-1,0", "--b", "1,0", "--out", str(tmp_path / "p")]) == 0
    res = json.loads((tmp_path / "p" / "report.json").read_text())["results"]
    assert res["valid_refined"] and abs(res["z"][0]) < 1e-12


def test_exit_codes(tmp_path):
    # tolerance failure -> 2
    assert cli.main(["run", "verify-arnaud", "--phi", "neg-norm", "--t", "0.5", "--param", "tol=1e-6",
                     "--out", str(tmp_path / "f")]) == 2
    # unknown names / bad config -> 1
    assert cli.main(["run", "no-such-experiment", "--out", str(tmp_path / "e")]) == 1
    assert cli.main(["run", "evolve", "--phi", "nope", "--out", str(tmp_path / "e2")]) == 1
    bad = tmp_path / "bad.toml"
    bad.write_text("experiment = \n")
    assert cli.main(["run", str(bad), "--out", str(tmp_path / "e3")]) == 1


def test_threads_env(monkeypatch, tmp_path):
    monkeypatch.setenv("SCONCLAB_THREADS", "1")
    assert cli.main(["run", "flow", "--system", "free", "--out", str(tmp_path)]) == 0


def test_determinism_small(tmp_path):
    args = ["run", "evolve", "--phi", "min-parabolas", "--t", "0.2", "--seed", "3"]
    cli.main(args + ["--out", str(tmp_path / "a")])
    cli.main(args + ["--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()
    assert (tmp_path / "a" / "values.csv").read_bytes() == (tmp_path / "b" / "values.csv").read_bytes()
