"""Acceptance suite: every shipped config under ``configs/`` is run through the CLI layer.

One PASS/FAIL line per criterion is printed in the pytest terminal summary; running this file
directly (``python3 tests/test_acceptance.py``) prints the same lines.
"""

import json
import sys
import time
from pathlib import Path

import pytest

from sconclab.cli import execute

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"
TIME_LIMIT = 60.0

def _flowed_graph_part(p):
    if "error" in p:
        return f"{p['part']}: {p['error']}"
    if p["mode"] == "directed":
        return f"{p['part']}: directed {p['directed_ab']:.4g}"
    return f"{p['part']}: hausdorff {p['hausdorff']:.4g}"


CRITERIA = [
    ("1", "c01_flowed_graph.toml", "flowed-graph identity: Hausdorff <= 0.02 (d=1), directed <= 0.02 (d=2)",
     lambda r: "; ".join(_flowed_graph_part(p) for p in r["parts"])),
    ("2", "c02_sup_convolution.toml", "sup-convolution of -|x| vs closed form, 401 points, 1e-4",
     lambda r: f"max error {r['max_error']:.3g}"),
    ("3", "c03_critical_time.toml", "C^{1,1} at t=0.3, failure by t=0.7, t_phi bracket in [0.45, 0.55]",
     lambda r: f"bracket [{r['estimate']['t_phi_lower']:.4g}, {r['estimate']['t_phi_upper']:.4g}]"),
    ("4", "c04_inf_representation.toml", "inf-representation deviation < 5e-3",
     lambda r: ", ".join(f"{f['phi']}: {f['max_deviation']:.3g}" for f in r["functions"])),
    ("5", "c05_localization.toml", "maximizer localisation, zero violations",
     lambda r: ", ".join(f"{s['system']}: {s['violations']} violations / {s['n']}" for s in r["systems"])),
    ("6", "c06_characteristics.toml", "energy drift < 1e-7, Jacobian vs FD < 1e-5, free X_p exact",
     lambda r: f"drift {r['energy_drift']:.3g}, jac err {r['jacobian_error']:.3g}, free X_p err {r['free_X_p_error']:.3g}"),
    ("7", "c07_dimension.toml", "box-counting dim of Sing(phi2) = 1 +- 0.2, labels at -1/2^(n-1), 0",
     lambda r: f"estimate {r['estimate']:.4g}, labels {[c['labels'] for c in r['abscissa_labels']]}"),
    ("8", "c08_topology.toml", "broken lines 100/100 seeds; Sigma^{<=1} one component; Sigma^0(phi1) >= 5",
     lambda r: f"success {r['path']['success_rate']:.0%}, components "
               + ", ".join(f"{c['phi']}(k={c['k']})={c['components']}" for c in r["connectivity"])),
    ("9", "c09_cross_method.toml", "direct vs shooting agree to 1e-4 on 100 pairs",
     lambda r: f"max diff {r['max_abs_difference']:.3g}, failures {r['failures']}"),
    ("10", "c10_determinism.toml", "byte-identical reports on rerun",
     lambda r: ", ".join(f"{c['config']}={'same' if c['report_identical'] and c['csv_identical'] else 'DIFF'}"
                         for c in r["configs"])),
]

SUMMARY: list = []


def run_criterion(number, config, out_root):
    out = Path(out_root) / Path(config).stem
    start = time.perf_counter()
    code = execute(str(CONFIGS / config), out=str(out), quiet=True)
    elapsed = time.perf_counter() - start
    report = json.loads((out / "report.json").read_text()) if (out / "report.json").exists() else None
    return code, elapsed, report


@pytest.mark.parametrize("number,config,title,detail", CRITERIA, ids=[f"criterion{c[0]}" for c in CRITERIA])
def test_criterion(number, config, title, detail, tmp_path):
    code, elapsed, report = run_criterion(number, config, tmp_path)
    info = detail(report["results"]) if report else "no report written"
    passed = code == 0 and report is not None and report["pass"] and elapsed < TIME_LIMIT
    SUMMARY.append(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {title} -- {info} [{elapsed:.1f} s]")
    assert report is not None, "experiment raised before writing a report"
    assert code == 0 and report["pass"], info
    assert elapsed < TIME_LIMIT, f"took {elapsed:.1f} s"


if __name__ == "__main__":  # pragma: no cover
    import tempfile

    ok = True
    with tempfile.TemporaryDirectory() as tmp:
        for number, config, title, detail in CRITERIA:
            code, elapsed, report = run_criterion(number, config, tmp)
            good = code == 0 and report is not None and report["pass"] and elapsed < TIME_LIMIT
            ok &= good
            info = detail(report["results"]) if report else "no report written"
            print(f"criterion {number:>2}: {'PASS' if good else 'FAIL'}  {title} -- {info} [{elapsed:.1f} s]", flush=True)
    sys.exit(0 if ok else 1)
