"""Experiment configuration: a TOML file plus command-line overrides (flags win)."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

try:  # Python >= 3.11
    import tomllib as _toml
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as _toml

import numpy as np

from .errors import ConfigError

TOP_KEYS = {"experiment", "seed", "out", "threads", "system", "phi", "params", "description"}


@dataclass
class ExperimentConfig:
    experiment: str
    system: dict = field(default_factory=lambda: {"name": "free"})
    phi: dict = field(default_factory=lambda: {"name": "neg-norm"})
    params: dict = field(default_factory=dict)
    out: str = "runs/out"
    seed: int = 0
    threads: Optional[int] = None
    description: str = ""
    source: Optional[str] = None

    def as_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "system": self.system,
            "phi": self.phi,
            "params": self.params,
            "seed": self.seed,
            "description": self.description,
        }


def parse_vector(text, field_name: str = "vector") -> list:
    """``"-1,0"`` -> ``[-1.0, 0.0]``; lists pass through."""
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    if isinstance(text, (int, float)):
        return [float(text)]
    try:
        return [float(v) for v in str(text).split(",") if v.strip() != ""]
    except ValueError:
        raise ConfigError(f"{field_name}: cannot parse {text!r} as a comma-separated vector") from None


def parse_box(text, field_name: str = "box"):
    """``"-2,1x-1,1"`` -> ``(lower, upper)``; also accepts ``[[lo, hi], ...]``."""
    if isinstance(text, (list, tuple)):
        pairs = [tuple(map(float, p)) for p in text]
    else:
        pairs = []
        for part in str(text).split("x"):
            vals = parse_vector(part, field_name)
            if len(vals) != 2:
                raise ConfigError(f"{field_name}: each axis needs 'lo,hi', got {part!r}")
            pairs.append(tuple(vals))
    lo = np.array([p[0] for p in pairs])
    hi = np.array([p[1] for p in pairs])
    if np.any(hi <= lo):
        raise ConfigError(f"{field_name}: need lo < hi on every axis")
    return lo.tolist(), hi.tolist()


def parse_literal(text: str):
    """Parse a flag value as a TOML literal (numbers, booleans, arrays, quoted strings) or fall back to a string."""
    try:
        return _toml.loads(f"v = {text}")["v"]
    except Exception:
        return text


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = _toml.loads(raw)
    except _toml.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    cfg = from_dict(data, str(path))
    return cfg


def from_dict(data: dict, source: Optional[str] = None) -> ExperimentConfig:
    unknown = set(data) - TOP_KEYS
    if unknown:
        raise ConfigError(f"{source or 'config'}: unknown top-level field(s) {sorted(unknown)}")
    if "experiment" not in data:
        raise ConfigError(f"{source or 'config'}: missing required field 'experiment'")
    for section in ("system", "phi", "params"):
        if section in data and not isinstance(data[section], dict):
            raise ConfigError(f"{source or 'config'}: [{section}] must be a table")
    cfg = ExperimentConfig(
        experiment=str(data["experiment"]),
        system=copy.deepcopy(data.get("system", {"name": "free"})),
        phi=copy.deepcopy(data.get("phi", {"name": "neg-norm"})),
        params=copy.deepcopy(data.get("params", {})),
        out=str(data.get("out", f"runs/{data['experiment']}")),
        seed=int(data.get("seed", 0)),
        threads=data.get("threads"),
        description=str(data.get("description", "")),
        source=source,
    )
    return cfg


def apply_overrides(cfg: ExperimentConfig, *, phi=None, system=None, box=None, t=None, h=None, a=None, b=None,
                    seed=None, out=None, threads=None, params=()) -> ExperimentConfig:
    cfg = copy.deepcopy(cfg)
    if phi is not None:
        cfg.phi = {"name": phi} if cfg.phi.get("name") != phi else cfg.phi
    if system is not None:
        cfg.system = {"name": system} if cfg.system.get("name") != system else cfg.system
    for key, val in (("box", box), ("t", t), ("h", h), ("a", a), ("b", b)):
        if val is not None:
            cfg.params[key] = val
    if seed is not None:
        cfg.seed = int(seed)
    if out is not None:
        cfg.out = out
    if threads is not None:
        cfg.threads = int(threads)
    for item in params or ():
        if "=" not in item:
            raise ConfigError(f"--param expects key=value, got {item!r}")
        key, val = item.split("=", 1)
        target = cfg.params
        parts = key.strip().split(".")
        if parts[0] in ("system", "phi") and len(parts) > 1:
            target = getattr(cfg, parts[0])
            parts = parts[1:]
        for p in parts[:-1]:
            target = target.setdefault(p, {})
        target[parts[-1]] = parse_literal(val.strip())
    return cfg
