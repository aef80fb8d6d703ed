#!/usr/bin/env python3
"""
Run configuration: environment defaults, JSON run files and logging setup.

A run file describes the increment law, the covariance, the body and the
growth schedule; command-line flags override individual entries.
"""

import json
import logging
import os
import sys
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
from dotenv import load_dotenv

from convex_bodies import Ball, HalfSpace, Polytope, SliceSpec
from engine import DEFAULT_BLOCK_SIZE
from errors import ConfigError, CovarianceMismatch
from gauss_linalg import build_gaussian, build_spectral, spectral_gaussian
from tilting import DiscreteBase, GaussianBase, GrowthSchedule, RademacherProduct, gaussian_partner

# Load environment variables
load_dotenv()

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'

OUTPUT_FORMATS = ("json", "csv")
ESTIMATE_METHODS = ("naive", "tilted", "both")


def get_env_var(var_name, default=None):
    """Environment variable, or `default` when unset or empty."""
    value = os.getenv(var_name)
    if value:
        return value
    return default


def _env_int(var_name, default):
    raw = get_env_var(var_name)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{var_name} must be an integer, got {raw!r}")


def default_threads():
    return _env_int('MODDEV_THREADS', 1)


def default_block_size():
    return _env_int('MODDEV_BLOCK_SIZE', DEFAULT_BLOCK_SIZE)


def setup_logging(level=None, log_file=None):
    """Log to stderr (stdout carries results) and optionally to MODDEV_LOG_FILE."""
    level = level or get_env_var('MODDEV_LOG_LEVEL', 'INFO')
    log_file = log_file or get_env_var('MODDEV_LOG_FILE')
    handlers = [logging.StreamHandler(sys.stderr)]
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(level=getattr(logging, str(level).upper(), logging.INFO),
                        format=LOG_FORMAT, handlers=handlers, force=True)


def _number(value, name, cast=float):
    try:
        return cast(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name!r} must be numeric", value=value)


def _optional(raw, key, cast):
    return _number(raw[key], key, cast) if raw.get(key) is not None else None


def _array(spec, key):
    if key not in spec:
        raise ConfigError(f"missing {key!r}", section=spec)
    try:
        return np.asarray(spec[key], dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{key!r} must be numeric", value=spec[key])


def parse_body(spec):
    """Body JSON: {"type": "halfspace" | "ball" | "polytope", ...}."""
    if not isinstance(spec, dict):
        raise ConfigError("body must be a JSON object")
    kind = spec.get("type")
    if kind == "halfspace":
        return HalfSpace(normal=_array(spec, "normal"), offset=_number(spec.get("offset", 0.0), "offset"))
    if kind == "ball":
        return Ball(center=_array(spec, "center"), radius=_number(spec.get("radius", 0.0), "radius"))
    if kind == "polytope":
        constraints = spec.get("constraints") or []
        return Polytope(tuple(HalfSpace(normal=_array(c, "normal"), offset=_number(c.get("offset", 0.0), "offset"))
                              for c in constraints))
    raise ConfigError(f"unknown body type {kind!r}")


def parse_covariance(spec):
    """Explicit matrix, or {"spectral": {"rule": "j^-p", "p": .., "dim": ..}}.

    Returns:
        (GaussianModel, SpectralModel or None)
    """
    if isinstance(spec, dict) and "spectral" in spec:
        options = spec["spectral"]
        try:
            spectral = build_spectral(_number(options["p"], "p"), _number(options["dim"], "dim", int),
                                      rule=options.get("rule", "j^-p"))
        except KeyError as exc:
            raise ConfigError(f"spectral covariance needs {exc.args[0]!r}")
        return spectral_gaussian(spectral), spectral
    try:
        matrix = np.atleast_2d(np.asarray(spec, dtype=float))
    except (TypeError, ValueError):
        raise ConfigError("covariance must be a numeric matrix")
    return build_gaussian(matrix), None


def parse_distribution(spec, model=None):
    """Distribution JSON: gaussian (needs a covariance), rademacher or discrete."""
    spec = spec or {"type": "gaussian"}
    kind = spec.get("type")
    if kind == "gaussian":
        if model is None:
            raise ConfigError("gaussian increments need a covariance")
        return GaussianBase(model)
    if kind == "rademacher":
        base = RademacherProduct(_array(spec, "scales"))
    elif kind == "discrete":
        base = DiscreteBase(_array(spec, "atoms"), _array(spec, "probs"))
    else:
        raise ConfigError(f"unknown distribution type {kind!r}")
    if model is not None and not model.same_covariance(base.covariance()):
        raise CovarianceMismatch("configured covariance differs from the covariance of the increments")
    return base


def parse_schedule(spec):
    if spec is None:
        return None
    try:
        return GrowthSchedule(c=_number(spec["c"], "c"), alpha=_number(spec["alpha"], "alpha"),
                              theorem_mode=bool(spec.get("theorem_mode", True)))
    except KeyError as exc:
        raise ConfigError(f"schedule needs {exc.args[0]!r}")


def parse_slice(spec):
    if spec is None:
        return None
    try:
        return SliceSpec(kind=spec.get("kind", "sqrt"), beta=_number(spec["beta"], "beta"),
                         delta=_number(spec["delta"], "delta"))
    except KeyError as exc:
        raise ConfigError(f"slice spec needs {exc.args[0]!r}")


@dataclass(frozen=True, eq=False)
class RunConfig:
    base: Any
    model: Any
    body: Any = None
    schedule: Optional[GrowthSchedule] = None
    b_n: Optional[float] = None
    spectral: Any = None
    n: Optional[int] = None
    n_list: List[int] = field(default_factory=list)
    samples: Optional[int] = None
    seed: Optional[int] = None
    threads: int = 1
    block_size: int = DEFAULT_BLOCK_SIZE
    output: Optional[str] = None
    format: str = "json"
    method: str = "both"
    rho: Optional[float] = None
    quad_nodes: int = 128
    slice_spec: Optional[SliceSpec] = None
    grid: List[float] = field(default_factory=list)
    spectral_dims: List[int] = field(default_factory=list)
    raw: Dict[str, Any] = field(default_factory=dict, repr=False)

    def normaliser(self, n=None):
        """b_n from the fixed --b-n value or the schedule."""
        n = self.n if n is None else n
        if self.b_n is not None:
            return self.b_n
        if self.schedule is None:
            raise ConfigError("a schedule {c, alpha} or a fixed b_n is required")
        if n is None:
            raise ConfigError("n is required")
        return self.schedule.b(n)

    def require_seed(self):
        if self.seed is None:
            raise ConfigError("stochastic commands need an explicit seed")
        return self.seed

    def require_body(self):
        if self.body is None:
            raise ConfigError("a body is required")
        return self.body


def merge_overrides(raw, overrides):
    """Fold non-None command-line overrides into the raw run file."""
    merged = dict(raw)
    schedule = dict(merged.get("schedule") or {})
    for key, value in overrides.items():
        if value is None:
            continue
        if key in ("alpha", "c"):
            schedule[key] = value
        else:
            merged[key] = value
    if schedule:
        merged["schedule"] = schedule
    return merged


def build_run_config(raw):
    """RunConfig from a JSON-compatible dict."""
    model, spectral = (None, None)
    if raw.get("covariance") is not None:
        model, spectral = parse_covariance(raw["covariance"])
    base = parse_distribution(raw.get("distribution"), model)
    if model is None:
        model = gaussian_partner(base)

    fmt = raw.get("format", "json")
    if fmt not in OUTPUT_FORMATS:
        raise ConfigError(f"format must be one of {OUTPUT_FORMATS}", format=fmt)
    method = raw.get("method", "both")
    if method not in ESTIMATE_METHODS:
        raise ConfigError(f"method must be one of {ESTIMATE_METHODS}", method=method)
    threads = _optional(raw, "threads", int)
    threads = default_threads() if threads is None else threads
    if threads < 1:
        raise ConfigError("threads must be at least 1", threads=threads)

    return RunConfig(
        base=base,
        model=model,
        body=parse_body(raw["body"]) if raw.get("body") is not None else None,
        schedule=parse_schedule(raw.get("schedule")),
        b_n=_optional(raw, "b_n", float),
        spectral=spectral,
        n=_optional(raw, "n", int),
        n_list=[_number(n, "n_list", int) for n in raw.get("n_list") or []],
        samples=_optional(raw, "samples", int),
        seed=_optional(raw, "seed", int),
        threads=threads,
        block_size=_optional(raw, "block_size", int) or default_block_size(),
        output=raw.get("output"),
        format=fmt,
        method=method,
        rho=_optional(raw, "rho", float),
        quad_nodes=_number(raw.get("quad_nodes", 128), "quad_nodes", int),
        slice_spec=parse_slice(raw.get("slice")),
        grid=[_number(s, "grid") for s in raw.get("grid") or []],
        spectral_dims=[_number(d, "spectral_dims", int) for d in raw.get("spectral_dims") or []],
        raw=raw,
    )


def load_run_config(path=None, overrides=None):
    """Read the JSON run file at `path` (optional) and apply flag overrides."""
    raw = {}
    if path:
        try:
            with open(path, 'r', encoding='utf-8') as f:
                raw = json.load(f)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file is not valid JSON: {e}")
        if not isinstance(raw, dict):
            raise ConfigError("config file must contain a JSON object")
    return build_run_config(merge_overrides(raw, overrides or {}))
