"""Loading, validating and normalizing experiment configurations.

A configuration is a JSON document checked against ``data/config_schema.json``.
:func:`load_config` fills in defaults, so the returned dict is the effective
configuration; its canonical serialization is what :func:`config_hash` digests.
"""

from __future__ import annotations

import copy
import hashlib
import json
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from ..errors import InvalidArgumentError
from ..free_probability import NCPolynomial
from ..model import TensorGueModel, build_model

__all__ = ["ConfigError", "load_schema", "load_config", "config_hash", "canonical_json", "models_by_N", "polynomials"]

SOLVER_DEFAULTS = {"tol": 1e-10, "max_iter": 20000, "smoothing": 1e-3, "grid_step": 1e-2, "support_threshold": 1e-3}


class ConfigError(InvalidArgumentError):
    """The configuration is unreadable, fails the schema, or describes an invalid model."""


def load_schema() -> dict:
    return json.loads(resources.files("tensor_gue").joinpath("data/config_schema.json").read_text())


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True, allow_nan=False)


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def load_config(source, seed=None) -> dict:
    """Read (from a path or a dict), validate and complete a configuration.

    Parameters
    ----------
    source : str, Path or dict
    seed : int, optional
        Overrides ``master_seed``.
    """
    if isinstance(source, dict):
        raw = copy.deepcopy(source)
    else:
        try:
            raw = json.loads(Path(source).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {source}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {source} is not valid JSON: {exc}") from exc
    if seed is not None:
        raw["master_seed"] = int(seed)
    try:
        jsonschema.Draft202012Validator(load_schema()).validate(raw)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from exc

    cfg = raw
    cfg.setdefault("trials", 10)
    cfg.setdefault("master_seed", 0)
    cfg.setdefault("t_grid", [0.5, 1.0, 1.5])
    cfg.setdefault("C", "calibrate")
    cfg.setdefault("pilot_trials", cfg["trials"])
    cfg.setdefault("polynomials", [])
    cfg.setdefault("norm_r", 12)
    cfg["solver"] = {**SOLVER_DEFAULTS, **cfg.get("solver", {})}
    cfg["output"] = {"dir": "results", "format": "both", **cfg.get("output", {})}
    if sorted(set(cfg["model"]["N"])) != sorted(cfg["model"]["N"]):
        raise ConfigError("model.N contains duplicates")
    # fail early on model problems so the CLI can report a config error
    models_by_N(cfg)
    polynomials(cfg)
    return cfg


def _scalar(x) -> complex:
    return complex(x[0], x[1]) if isinstance(x, list) else complex(x)


def _terms(spec, d):
    out = []
    for t in spec:
        B = np.array([[_scalar(x) for x in row] for row in t["B"]], dtype=complex)
        if B.shape != (d, d):
            raise ConfigError(f"B must be {d}x{d}, got rows of lengths {[len(r) for r in t['B']]}")
        out.append((t["J"], B))
    return out


def models_by_N(config: dict) -> dict[int, TensorGueModel]:
    """One validated model per swept ``N``, honoring ``terms_by_N`` overrides."""
    spec = config["model"]
    overrides = spec.get("terms_by_N", {})
    models = {}
    for N in spec["N"]:
        terms = overrides.get(str(N), spec["terms"])
        try:
            models[N] = build_model(N, spec["m"], spec["d"], _terms(terms, spec["d"]))
        except ConfigError:
            raise
        except InvalidArgumentError as exc:
            raise ConfigError(f"model at N={N}: {exc}") from exc
    return models


def polynomials(config: dict) -> list[tuple[str, NCPolynomial]]:
    out = []
    k = len(config["model"]["terms"])
    for item in config.get("polynomials", []):
        P = NCPolynomial.from_json(item["terms"])
        if P.letters and max(P.letters) > k:
            raise ConfigError(f"polynomial {item['name']!r} uses variable {max(P.letters)} but the model has {k} terms")
        out.append((item["name"], P))
    return out
