"""``sconclab`` command line: ``run <experiment|config.toml>`` and ``list {systems|functions|experiments}``.

Exit codes: 0 when every check passes, 2 on a tolerance failure, 1 on errors (including bad configs).
"""

from __future__ import annotations

import argparse
import datetime as _dt
import os
import sys
import time
from contextlib import nullcontext
from pathlib import Path
from typing import Optional, Sequence

from . import __version__, io
from .config import ExperimentConfig, apply_overrides, from_dict, load_config
from .errors import ConfigError, SconcError

EXIT_PASS, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


def _thread_limit(n: Optional[int]):
    if n is None:
        env = os.environ.get("SCONCLAB_THREADS")
        n = int(env) if env else None
    if n is None:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=max(1, int(n)))


def _resolve(target: str, config: Optional[str]) -> ExperimentConfig:
    """``target`` is an experiment name or a path to a TOML config."""
    if config:
        cfg = load_config(config)
        if target and target != cfg.experiment and not target.endswith(".toml"):
            cfg.experiment = target
        return cfg
    if target.endswith(".toml") or Path(target).is_file():
        return load_config(target)
    return from_dict({"experiment": target})


def execute(target: str, config: Optional[str] = None, out: Optional[str] = None, quiet: bool = False,
            **overrides) -> int:
    """Run one experiment; returns the process exit code."""
    from .experiments import run

    try:
        cfg = _resolve(target, config)
        cfg = apply_overrides(cfg, out=out, **overrides)
        outdir = Path(cfg.out)
        start = time.time()
        with _thread_limit(cfg.threads):
            results, passed = run(cfg, outdir)
        report = {"experiment": cfg.experiment, "config": cfg.as_dict(), "results": results, "pass": bool(passed)}
        io.write_json(report, outdir / "report.json")
        io.write_json({
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
            "elapsed_seconds": round(time.time() - start, 3),
            "version": __version__,
            "config_source": cfg.source,
        }, outdir / "run.json")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (SconcError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if not quiet:
        print(f"{cfg.experiment}: {'PASS' if passed else 'FAIL'} -> {outdir / 'report.json'}")
    return EXIT_PASS if passed else EXIT_FAIL


def _list(kind: str) -> str:
    from .experiments import EXPERIMENTS
    from .semiconcave import FUNCTIONS
    from .tonelli import SYSTEMS

    registry = {"systems": SYSTEMS, "functions": FUNCTIONS}
    lines = []
    if kind == "experiments":
        for name, (_, desc) in sorted(EXPERIMENTS.items()):
            lines.append(f"{name:15s} {desc}")
    else:
        for name, (_, schema) in sorted(registry[kind].items()):
            params = ", ".join(f"{k}: {v}" for k, v in schema.items())
            lines.append(f"{name:15s} {params}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sconclab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"sconclab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment (by name or TOML config path)")
    r.add_argument("target", help="experiment name or path to a .toml config")
    r.add_argument("--config", help="TOML config; flags override its values")
    r.add_argument("--phi", help="function name (see `list functions`)")
    r.add_argument("--system", help="system name (see `list systems`)")
    r.add_argument("--box", help='box "lo,hi x lo,hi", e.g. "-2,1x-1,1"')
    r.add_argument("--t", type=float, help="evolution time")
    r.add_argument("--h", type=float, help="grid spacing")
    r.add_argument("--a", help='first point, e.g. "-1,0"')
    r.add_argument("--b", help='second point, e.g. "1,0"')
    r.add_argument("--seed", type=int)
    r.add_argument("--out", help="output directory")
    r.add_argument("--threads", type=int, help="cap on worker/BLAS threads (env SCONCLAB_THREADS)")
    r.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                   help="extra parameter; dotted keys reach system./phi. tables")
    lst = sub.add_parser("list", help="list registered names")
    lst.add_argument("kind", choices=["systems", "functions", "experiments"])
    return parser


_VALUE_FLAGS = ("--box", "--a", "--b")


def _join_negative_values(argv: Sequence[str]) -> list:
    """Let ``--box -2,1x-1,1`` through argparse, which would read ``-2,...`` as an option."""
    out, it = [], iter(argv)
    for tok in it:
        if tok in _VALUE_FLAGS:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_join_negative_values(argv))
    if args.command == "list":
        print(_list(args.kind))
        return EXIT_PASS
    return execute(args.target, config=args.config, out=args.out, phi=args.phi, system=args.system, box=args.box,
                   t=args.t, h=args.h, a=args.a, b=args.b, seed=args.seed, threads=args.threads, params=args.param)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
