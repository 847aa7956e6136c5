"""JSON run configuration: schema, defaults, presets and model construction."""

from __future__ import annotations

import copy
import json
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .distributions import (
    CommonShock,
    Degenerate,
    Exponential,
    IndependentMargins,
    OscillatingPareto,
    Pareto,
    SpectralProduct,
)
from .geometry import Allocation, GaugeSet, RuinSetSpec, build_gauge
from .montecarlo import BridgeMode, HorizonPolicy
from .process import ErlangArrivals, ExpArrivals, FixedArrivals, LogNormalArrivals, RiskModel

__all__ = [
    "SCENARIOS",
    "SCHEMA",
    "PRESETS",
    "ConfigError",
    "load_config",
    "validate_config",
    "resolve_defaults",
    "parse_grid",
    "build_model",
    "build_gauge_from",
    "build_policy",
]

SCENARIOS = (
    "engine-validate",
    "theorem31",
    "insensitivity",
    "corollary31",
    "veraverbeke",
    "lemma-ratios",
    "class-suite",
)


class ConfigError(ValueError):
    """The configuration is malformed or describes an invalid model."""


_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_vec = {"type": "array", "items": _num, "minItems": 1}

_margin = {
    "oneOf": [
        {
            "type": "object",
            "properties": {"type": {"enum": ["pareto", "oscillating_pareto"]}, "alpha": _pos, "sigma": _pos},
            "required": ["type", "alpha"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"type": {"const": "exponential"}, "beta": _pos},
            "required": ["type", "beta"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"type": {"const": "degenerate"}, "value": {"type": "number", "minimum": 0}},
            "required": ["type", "value"],
            "additionalProperties": False,
        },
    ]
}

_interarrival = {
    "type": "object",
    "properties": {
        "type": {"enum": ["exponential", "erlang", "deterministic", "lognormal"]},
        "params": {
            "type": "object",
            "properties": {"rate": _pos, "k": {"type": "integer", "minimum": 1}, "theta": _pos, "m": _num, "s": {"type": "number", "minimum": 0}},
            "additionalProperties": False,
        },
    },
    "required": ["type", "params"],
    "additionalProperties": False,
}

SCHEMA: dict[str, Any] = {
    "type": "object",
    "properties": {
        "scenario": {"enum": list(SCENARIOS)},
        "model": {
            "type": "object",
            "properties": {
                "claims": {
                    "type": "object",
                    "properties": {
                        "variant": {"enum": ["independent", "common_shock", "spectral"]},
                        "margins": {"type": "array", "items": _margin, "minItems": 1},
                        "shock": _margin,
                        "shock_weight": {"type": "number", "minimum": 0},
                        "spectral": {
                            "type": "object",
                            "properties": {
                                "radius": _margin,
                                "direction": {
                                    "type": "object",
                                    "properties": {"type": {"const": "dirichlet"}, "params": {"type": "array", "items": _pos, "minItems": 1}},
                                    "required": ["type", "params"],
                                    "additionalProperties": False,
                                },
                            },
                            "required": ["radius", "direction"],
                            "additionalProperties": False,
                        },
                    },
                    "required": ["variant"],
                    "additionalProperties": False,
                },
                "process": {
                    "type": "object",
                    "properties": {
                        "premium": _vec,
                        "delta": _vec,
                        "brownian": {
                            "type": "object",
                            "properties": {"drift": _vec, "cov": {"type": "array", "items": _vec}},
                            "additionalProperties": False,
                        },
                        "interarrival": _interarrival,
                    },
                    "required": ["premium", "interarrival"],
                    "additionalProperties": False,
                },
                "ruin_set": {
                    "type": "object",
                    "properties": {"kind": {"enum": ["L1", "L2", "custom"]}, "directions": {"type": "array", "items": _vec}},
                    "required": ["kind"],
                    "additionalProperties": False,
                },
                "allocation": {
                    "type": "object",
                    "properties": {"b": _vec},
                    "required": ["b"],
                    "additionalProperties": False,
                },
            },
            "required": ["claims", "process", "ruin_set", "allocation"],
            "additionalProperties": False,
        },
        "estimator": {
            "type": "object",
            "properties": {
                "paths": {"type": "integer", "minimum": 100},
                "max_steps": {"type": "integer", "minimum": 1},
                "slack": _pos,
                "check_stride": {"type": "integer", "minimum": 1},
                "bridge": {"enum": [m.value for m in BridgeMode]},
            },
            "additionalProperties": False,
        },
        "grid": {
            "type": "object",
            "properties": {
                "x": {"type": "array", "items": _pos, "minItems": 1},
                "geometric": {"type": "string", "pattern": r"^[^:]+:[^:]+:[0-9]+$"},
            },
            "additionalProperties": False,
        },
        "checks": {
            "type": "object",
            "properties": {
                "band": _pos,
                "se_multiplier": _pos,
                "tol": _pos,
                "ruin_sets": {"type": "array", "items": {"enum": ["L1", "L2"]}},
                "fft_step": _pos,
            },
            "additionalProperties": False,
        },
        "run": {"type": "object", "properties": {"seed": {"type": "integer", "minimum": 0}}, "additionalProperties": False},
        "output": {"type": "object", "properties": {"dir": {"type": "string"}}, "additionalProperties": False},
    },
    "required": ["scenario", "model"],
    "additionalProperties": False,
}

DEFAULTS: dict[str, Any] = {
    "estimator": {"paths": 100_000, "max_steps": 100_000, "slack": 30.0, "check_stride": 1, "bridge": "skeleton"},
    "grid": {"geometric": "100:10000:25"},
    "checks": {"band": 0.25, "se_multiplier": 3.0, "tol": 0.05, "ruin_sets": ["L1", "L2"], "fft_step": 0.02},
    "run": {"seed": 20240101},
    "output": {"dir": "ruinlab-out"},
}


def _pareto2(d: int) -> dict:
    return {"variant": "independent", "margins": [{"type": "pareto", "alpha": 2.0, "sigma": 1.0}] * d}


def _poisson(rate: float = 1.0) -> dict:
    return {"type": "exponential", "params": {"rate": rate}}


_L1 = {"kind": "L1"}
_HALF = {"b": [0.5, 0.5]}
_A2_PROCESS = {"premium": [2.5, 2.5], "interarrival": _poisson()}

PRESETS: dict[str, dict] = {
    "engine-validate": {
        "scenario": "engine-validate",
        "model": {
            "claims": {"variant": "independent", "margins": [{"type": "exponential", "beta": 1.0}]},
            "process": {"premium": [1.25], "interarrival": _poisson()},
            "ruin_set": _L1,
            "allocation": {"b": [1.0]},
        },
        "estimator": {"paths": 1_000_000},
        "grid": {"x": [1.0, 3.0, 5.0]},
    },
    "theorem31": {
        "scenario": "theorem31",
        "model": {"claims": _pareto2(2), "process": _A2_PROCESS, "ruin_set": _L1, "allocation": _HALF},
        "estimator": {"paths": 1_000_000},
        "grid": {"x": [20.0, 50.0, 100.0, 200.0]},
    },
    "insensitivity": {
        "scenario": "insensitivity",
        "model": {
            "claims": _pareto2(2),
            "process": dict(_A2_PROCESS, delta=[1.0, 1.0], brownian={"drift": [0.0, 0.0], "cov": [[1.0, 0.0], [0.0, 1.0]]}),
            "ruin_set": _L1,
            "allocation": _HALF,
        },
        "estimator": {"paths": 1_000_000, "bridge": "l1"},
        "grid": {"x": [20.0, 50.0, 100.0, 200.0]},
    },
    "corollary31": {
        "scenario": "corollary31",
        "model": {
            "claims": {"variant": "independent", "margins": [{"type": "pareto", "alpha": 2.5, "sigma": 1.0}] * 2},
            "process": {"premium": [5.0 / 3.0 + 0.75, 5.0 / 3.0 + 0.75], "interarrival": _poisson()},
            "ruin_set": _L1,
            "allocation": _HALF,
        },
        "grid": {"geometric": "100:10000:9"},
        "checks": {"band": 0.06},
    },
    "veraverbeke": {
        "scenario": "veraverbeke",
        "model": {"claims": _pareto2(1), "process": {"premium": [3.0], "interarrival": _poisson()}, "ruin_set": _L1, "allocation": {"b": [1.0]}},
        "estimator": {"paths": 1_000_000},
        "grid": {"x": [10.0, 20.0, 50.0, 100.0]},
        "checks": {"band": 0.3},
    },
    "lemma-ratios": {
        "scenario": "lemma-ratios",
        "model": {
            "claims": _pareto2(2),
            "process": dict(_A2_PROCESS, delta=[1.0, 1.0], brownian={"drift": [0.05, 0.05], "cov": [[1.0, 0.0], [0.0, 1.0]]}),
            "ruin_set": _L1,
            "allocation": _HALF,
        },
        "grid": {"geometric": "100:10000:25"},
    },
    "class-suite": {
        "scenario": "class-suite",
        "model": {
            "claims": {"variant": "independent", "margins": [{"type": "oscillating_pareto", "alpha": 2.0, "sigma": 1.0}] * 2},
            "process": {"premium": [4.0, 4.0], "interarrival": _poisson()},
            "ruin_set": _L1,
            "allocation": _HALF,
        },
        "grid": {"geometric": "100:10000:25"},
        "checks": {"tol": 0.02},
    },
}

PRESET_NOTES = {
    "engine-validate": "Poisson/exponential model against the exact ruin probability",
    "theorem31": "Monte Carlo ruin curve against H(x), Pareto(2) claims, L1 ruin",
    "insensitivity": "same curve with and without Brownian perturbation on coupled paths",
    "corollary31": "limit-measure constant and H(x) / (x V(x)), Pareto(2.5) claims",
    "veraverbeke": "one-dimensional ruin curve against the integrated-tail approximation",
    "lemma-ratios": "H computed with drift c* over H computed with drift c",
    "class-suite": "L, D and S ratio checks on gauge and integrated tails",
}


def load_config(source: str | Path) -> dict:
    """Read a JSON file, or a preset when ``source`` names one."""
    if str(source) in PRESETS and not Path(source).exists():
        return copy.deepcopy(PRESETS[str(source)])
    try:
        with open(source, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{source}: invalid JSON ({e})") from e
    except OSError as e:
        raise ConfigError(f"{source}: {e.strerror}") from e


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else copy.deepcopy(v)
    return out


def resolve_defaults(cfg: dict) -> dict:
    """Config with every optional block filled in; this is what the manifest echoes."""
    out = _merge(DEFAULTS, cfg)
    if "x" in cfg.get("grid", {}):
        out["grid"].pop("geometric", None)
    return out


def parse_grid(spec: str) -> np.ndarray:
    """``"a:b:k"`` -> ``k`` geometrically spaced points from ``a`` to ``b``."""
    try:
        a, b, k = spec.split(":")
        a, b, k = float(a), float(b), int(k)
    except ValueError as e:
        raise ConfigError(f"grid {spec!r} is not of the form a:b:k") from e
    if not (0 < a < b) or k < 2:
        raise ConfigError(f"grid {spec!r} needs 0 < a < b and k >= 2")
    return np.geomspace(a, b, k)


def grid_of(cfg: dict) -> np.ndarray:
    g = cfg["grid"]
    xs = np.asarray(g["x"], dtype=float) if "x" in g else parse_grid(g["geometric"])
    if np.any(np.diff(xs) <= 0):
        raise ConfigError("grid.x must be strictly increasing")
    return xs


def _margin(spec: dict):
    t = spec["type"]
    if t == "pareto":
        return Pareto(spec["alpha"], spec.get("sigma", 1.0))
    if t == "oscillating_pareto":
        return OscillatingPareto(spec["alpha"], spec.get("sigma", 1.0))
    if t == "exponential":
        return Exponential(spec["beta"])
    return Degenerate(spec["value"])


def _claims(spec: dict):
    v = spec["variant"]
    if v == "independent":
        if "margins" not in spec:
            raise ConfigError("independent claims need 'margins'")
        return IndependentMargins(tuple(_margin(m) for m in spec["margins"]))
    if v == "common_shock":
        if "margins" not in spec or "shock" not in spec:
            raise ConfigError("common_shock claims need 'margins' and 'shock'")
        return CommonShock(_margin(spec["shock"]), spec.get("shock_weight", 1.0), tuple(_margin(m) for m in spec["margins"]))
    if "spectral" not in spec:
        raise ConfigError("spectral claims need a 'spectral' block")
    sp = spec["spectral"]
    return SpectralProduct(_margin(sp["radius"]), tuple(sp["direction"]["params"]))


def _interarrival(spec: dict):
    t, p = spec["type"], spec["params"]
    try:
        if t == "exponential":
            return ExpArrivals(p["rate"])
        if t == "erlang":
            return ErlangArrivals(p["k"], p["rate"])
        if t == "deterministic":
            return FixedArrivals(p["theta"])
        return LogNormalArrivals(p["m"], p["s"])
    except KeyError as e:
        raise ConfigError(f"interarrival {t!r} is missing parameter {e.args[0]!r}") from e


def build_model(cfg: dict) -> RiskModel:
    m = cfg["model"]
    claims = _claims(m["claims"])
    pr = m["process"]
    br = pr.get("brownian", {})
    return RiskModel(
        claims=claims,
        interarrival=_interarrival(pr["interarrival"]),
        premium=pr["premium"],
        allocation=Allocation(m["allocation"]["b"]),
        delta=pr.get("delta"),
        brownian_drift=br.get("drift"),
        brownian_cov=br.get("cov"),
    )


def build_gauge_from(cfg: dict, kind: str | None = None) -> GaugeSet:
    m = cfg["model"]
    b = Allocation(m["allocation"]["b"])
    rs = m["ruin_set"]
    kind = kind or rs["kind"]
    if kind == "L1":
        return build_gauge(RuinSetSpec.sum_negative(b.d), b)
    if kind == "L2":
        return build_gauge(RuinSetSpec.any_negative(b.d), b)
    if "directions" not in rs:
        raise ConfigError("custom ruin sets need 'directions'")
    return build_gauge(RuinSetSpec.custom(rs["directions"]), b)


def build_policy(cfg: dict) -> HorizonPolicy:
    e = cfg["estimator"]
    return HorizonPolicy(e["max_steps"], e["slack"], e["check_stride"])


def validate_config(cfg: dict) -> dict:
    """Schema check plus model construction; returns the resolved config.

    Raises :class:`ConfigError` describing the first problem found.
    """
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {e.message}") from e
    resolved = resolve_defaults(cfg)
    try:
        grid_of(resolved)
        model = build_model(resolved)
        A = build_gauge_from(resolved)
        build_policy(resolved)
    except ConfigError:
        raise
    except (ValueError, TypeError) as e:
        raise ConfigError(str(e)) from e
    if A.d != model.d:
        raise ConfigError(f"ruin set has dimension {A.d}, model has {model.d}")
    return resolved
