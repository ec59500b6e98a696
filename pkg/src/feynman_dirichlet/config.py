"""Experiment configuration: YAML on disk, frozen dataclasses in memory.

Loading validates key names and types and reports problems with a dotted
key path. ``ExperimentConfig.from_dict(cfg.to_dict()) == cfg`` for every
valid config.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from .errors import ConfigError
from .geometry import Disc, Domain, Interval
from .harness import build_dl_member
from .operator import EllipticOperator, TestFunction, operator_from_spec


@dataclass(frozen=True)
class Discretization:
    h_max: float = 0.02
    h: float | None = None
    quadrature: str = "trapezoid"
    gh_order: int = 20
    kernel_radius: float = 8.0
    interp_order: str = "cubic"
    collar_cap: float | None = None
    n_charts: int = 8


@dataclass(frozen=True)
class Plan:
    T: float = 0.1
    n_list: tuple[int, ...] = (8, 16, 32, 64)
    t_ladder: tuple[float, ...] = (0.1, 0.03, 0.01, 0.003)


@dataclass(frozen=True)
class MonteCarlo:
    paths: int = 100_000
    dt: float = 1e-4
    seed: int = 0
    t: float = 0.1
    x: tuple[float, ...] | None = None


ORACLES = ("analytic", "crank-nicolson", "monte-carlo", "none")


@dataclass(frozen=True)
class ExperimentConfig:
    domain: dict
    operator: dict
    initial: dict
    name: str = "experiment"
    cutoff_betas: tuple[float, ...] = (0.5,)
    plan: Plan = field(default_factory=Plan)
    discretization: Discretization = field(default_factory=Discretization)
    oracle: str = "analytic"
    mc: MonteCarlo = field(default_factory=MonteCarlo)
    output_dir: str = "out"

    # -- serialisation -----------------------------------------------------

    @classmethod
    def from_dict(cls, raw: Any) -> "ExperimentConfig":
        if not isinstance(raw, Mapping):
            raise ConfigError("top level must be a mapping")
        for key in ("domain", "operator", "initial"):
            if key not in raw:
                raise ConfigError("missing required key", key)
        kw = _fields_from(cls, raw, "")
        for key in ("domain", "operator", "initial"):
            if not isinstance(kw[key], Mapping):
                raise ConfigError("must be a mapping", key)
            kw[key] = copy.deepcopy(dict(kw[key]))
        kw["cutoff_betas"] = _tuple(kw.get("cutoff_betas", (0.5,)), float, "cutoff_betas")
        for sub, typ in (("plan", Plan), ("discretization", Discretization), ("mc", MonteCarlo)):
            section = kw.get(sub, {})
            if isinstance(section, typ):
                continue
            if not isinstance(section, Mapping):
                raise ConfigError("must be a mapping", sub)
            kw[sub] = typ(**_coerce(typ, _fields_from(typ, section, sub), sub))
        cfg = cls(**_coerce(cls, kw, ""))
        cfg.check()
        return cfg

    def to_dict(self) -> dict:
        out = asdict(self)
        return json.loads(json.dumps(out))

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        try:
            raw = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML: {exc}") from exc
        return cls.from_dict(raw)

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]

    # -- validation and builders -------------------------------------------

    def check(self) -> None:
        if self.oracle not in ORACLES:
            raise ConfigError(f"must be one of {ORACLES}", "oracle")
        if not self.cutoff_betas or any(not 0 < b <= 0.5 for b in self.cutoff_betas):
            raise ConfigError("every exponent must lie in (0, 1/2]", "cutoff_betas")
        if self.plan.T <= 0:
            raise ConfigError("must be positive", "plan.T")
        if not self.plan.n_list or any(n < 1 for n in self.plan.n_list):
            raise ConfigError("must be a nonempty list of positive integers", "plan.n_list")
        if not self.plan.t_ladder or any(t <= 0 for t in self.plan.t_ladder):
            raise ConfigError("must be a nonempty list of positive times", "plan.t_ladder")
        if self.discretization.h_max <= 0:
            raise ConfigError("must be positive", "discretization.h_max")
        if self.discretization.quadrature not in ("trapezoid", "gauss-hermite"):
            raise ConfigError("must be 'trapezoid' or 'gauss-hermite'", "discretization.quadrature")
        if self.discretization.interp_order not in ("linear", "cubic"):
            raise ConfigError("must be 'linear' or 'cubic'", "discretization.interp_order")
        self.build_domain()

    def build_domain(self) -> Domain:
        spec = self.domain
        kind = spec.get("kind")
        try:
            if kind == "interval":
                return Interval(float(spec["lo"]), float(spec["hi"]))
            if kind == "disc":
                return Disc(tuple(float(c) for c in spec["center"]), float(spec["radius"]))
        except KeyError as exc:
            raise ConfigError("missing required key", f"domain.{exc.args[0]}") from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), "domain") from None
        raise ConfigError(f"unknown domain kind {kind!r}", "domain.kind")

    def build_operator(self, domain: Domain | None = None) -> EllipticOperator:
        domain = domain or self.build_domain()
        try:
            return operator_from_spec(self.operator, domain.dim, domain)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc), "operator") from None

    def build_initial(self, op: EllipticOperator, domain: Domain, seed: int | None = None) -> TestFunction:
        spec = self.initial
        kind = spec.get("kind")
        if kind == "zero":
            return TestFunction.zero(domain.dim)
        if kind == "sine":
            if not isinstance(domain, Interval):
                raise ConfigError("sine data needs an interval domain", "initial.kind")
            return TestFunction.sine_series(spec.get("coefficients", [1.0]), domain.lo, domain.hi)
        if kind == "harness":
            s = int(spec.get("seed", 0)) if seed is None else int(seed)
            return build_dl_member(op, domain, s, int(spec.get("degree", 3))).u
        raise ConfigError(f"unknown initial datum kind {kind!r}", "initial.kind")

    def mc_point(self, domain: Domain) -> np.ndarray:
        if self.mc.x is not None:
            return np.asarray(self.mc.x, dtype=float)
        lo, hi = domain.bounds()
        return 0.5 * (lo + hi)


def _fields_from(typ, raw: Mapping, prefix: str) -> dict:
    names = {f.name for f in fields(typ)}
    for key in raw:
        if key not in names:
            raise ConfigError("unknown key", f"{prefix}.{key}" if prefix else str(key))
    return dict(raw)


def _tuple(value, conv, path):
    if value is None:
        return None
    if not isinstance(value, (list, tuple)):
        raise ConfigError("must be a list", path)
    try:
        return tuple(conv(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"entries must be {conv.__name__}", path) from None


_SCALARS = {"float": float, "int": int, "str": str}


def _coerce(typ, kw: dict, prefix: str) -> dict:
    out = {}
    hints = {f.name: f.type for f in fields(typ)}
    for key, value in kw.items():
        path = f"{prefix}.{key}" if prefix else key
        hint = str(hints[key])
        if value is None:
            if "None" not in hint:
                raise ConfigError("must not be null", path)
            out[key] = None
            continue
        if hint.startswith("tuple[int"):
            out[key] = _tuple(value, int, path)
        elif hint.startswith("tuple[float"):
            out[key] = _tuple(value, float, path)
        elif hint.split(" |")[0] in _SCALARS:
            conv = _SCALARS[hint.split(" |")[0]]
            if isinstance(value, bool) or (conv is not str and isinstance(value, str)):
                raise ConfigError(f"must be {conv.__name__}", path)
            try:
                out[key] = conv(value)
            except (TypeError, ValueError):
                raise ConfigError(f"must be {conv.__name__}", path) from None
            if conv is int and out[key] != value:
                raise ConfigError("must be an integer", path)
        else:
            out[key] = value
    return out
