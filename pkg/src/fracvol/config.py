"""JSON experiment configs: parsing, overrides, validation, defaults.

Schema (only H, vol and payoff are required)::

    {
      "s0": 1.0, "y0": 0.0, "b": 0.2, "alpha": 0.6, "T": 1.0, "H": 0.6,
      "vol": {"kind": "sqrt_abs_shift", "c": 0.1},
      "payoff": {"calls": [{"w": 1, "k": 1}], "digitals": [{"w": 1, "l": 1}]},
      "methods": ["level2"],
      "n_list": [125, 250, 500, 1000, 2000, 4000, 8000],
      "n_paths": 10000, "master_seed": 0,
      "xgrid": "auto" | {"lo": -5, "hi": 5, "points": 2500},
      "ugrid_points": 400
    }
"""

from __future__ import annotations

import copy
import json

from .harness import ExperimentConfig
from .model import ModelParams, VolSpec
from .payoff import PayoffSpec
from .pricers import DEFAULT_UPOINTS, DEFAULT_XPOINTS, XGrid

DEFAULTS = {
    "s0": 1.0,
    "y0": 0.0,
    "b": 0.2,
    "alpha": 0.6,
    "T": 1.0,
    "methods": ["level2"],
    "n_list": [125, 250, 500, 1000, 2000, 4000, 8000],
    "n_paths": 10_000,
    "master_seed": 0,
    "xgrid": "auto",
    "ugrid_points": DEFAULT_UPOINTS,
}
REQUIRED = ("H", "vol", "payoff")
TOP_KEYS = set(DEFAULTS) | set(REQUIRED)
NESTED_KEYS = {
    "vol": {"kind", "c", "v"},
    "payoff": {"calls", "digitals"},
    "xgrid": {"lo", "hi", "points"},
}


class ConfigParseError(ValueError):
    pass


class ConfigValidationError(ValueError):
    pass


def load_document(text: str) -> dict:
    if not text.strip():
        return {}
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(
            f"line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None
    if not isinstance(doc, dict):
        raise ConfigParseError("top level of the config must be an object")
    return doc


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_overrides(doc: dict, overrides) -> dict:
    """Apply ``key=value`` strings; dotted keys reach into vol/payoff/xgrid."""
    doc = copy.deepcopy(doc)
    for item in overrides or ():
        key, sep, raw = item.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigValidationError(f"override {item!r} is not of the form key=value")
        head, _, sub = key.partition(".")
        if head not in TOP_KEYS:
            raise ConfigValidationError(f"unknown override key {key!r}")
        value = _parse_value(raw)
        if not sub:
            doc[head] = value
            continue
        if head not in NESTED_KEYS or sub not in NESTED_KEYS[head]:
            raise ConfigValidationError(f"unknown override key {key!r}")
        node = doc.get(head)
        if not isinstance(node, dict):
            node = {}
        node[sub] = value
        doc[head] = node
    return doc


def _check_keys(doc):
    unknown = sorted(set(doc) - TOP_KEYS)
    if unknown:
        raise ConfigValidationError(f"unknown config keys: {', '.join(unknown)}")
    for head, allowed in NESTED_KEYS.items():
        node = doc.get(head)
        if isinstance(node, dict):
            extra = sorted(set(node) - allowed)
            if extra:
                raise ConfigValidationError(f"unknown keys in {head}: {', '.join(extra)}")


def _terms(items, weight_key, loc_key, field_name):
    out = []
    for i, item in enumerate(items or []):
        if not isinstance(item, dict) or set(item) != {weight_key, loc_key}:
            raise ConfigValidationError(
                f"payoff.{field_name}[{i}] must be an object with keys "
                f"'{weight_key}' and '{loc_key}'"
            )
        out.append((float(item[weight_key]), float(item[loc_key])))
    return tuple(out)


def effective_document(doc: dict) -> dict:
    """The document with defaults filled in (what actually runs)."""
    full = copy.deepcopy(DEFAULTS)
    full.update(copy.deepcopy(doc))
    return full


def build_config(doc: dict) -> ExperimentConfig:
    _check_keys(doc)
    missing = [k for k in REQUIRED if k not in doc]
    if missing:
        raise ConfigValidationError(f"missing required fields: {', '.join(missing)}")
    d = effective_document(doc)
    try:
        hurst = float(d["H"])
        if not 0.5 < hurst < 1.0:
            raise ConfigValidationError("hurst must lie in (0.5, 1)")
        model = ModelParams(
            s0=float(d["s0"]), y0=float(d["y0"]), drift_b=float(d["b"]),
            mean_reversion_alpha=float(d["alpha"]), horizon=float(d["T"]), hurst=hurst,
        )
        vol_doc = d["vol"]
        if not isinstance(vol_doc, dict) or "kind" not in vol_doc:
            raise ConfigValidationError("vol must be an object with a 'kind'")
        vol = VolSpec.from_kind(vol_doc["kind"], vol_doc.get("c"), vol_doc.get("v"))
        pay = d["payoff"]
        if not isinstance(pay, dict):
            raise ConfigValidationError("payoff must be an object")
        payoff = PayoffSpec(
            calls=_terms(pay.get("calls"), "w", "k", "calls"),
            digitals=_terms(pay.get("digitals"), "w", "l", "digitals"),
        )
        xg = d["xgrid"]
        if xg == "auto":
            xgrid, points = None, DEFAULT_XPOINTS
        elif isinstance(xg, dict) and {"lo", "hi"} <= set(xg):
            xgrid = XGrid(float(xg["lo"]), float(xg["hi"]), int(xg.get("points", DEFAULT_XPOINTS)))
            points = xgrid.points
        elif isinstance(xg, dict) and set(xg) <= {"points"}:
            xgrid, points = None, int(xg.get("points", DEFAULT_XPOINTS))
        else:
            raise ConfigValidationError("xgrid must be \"auto\" or {lo, hi[, points]}")
        methods = d["methods"]
        if isinstance(methods, str):
            methods = [methods]
        return ExperimentConfig(
            model=model, vol=vol, payoff=payoff,
            methods=tuple(methods),
            n_list=tuple(int(n) for n in d["n_list"]),
            n_paths=int(d["n_paths"]),
            master_seed=int(d["master_seed"]),
            xgrid=xgrid, xgrid_points=points,
            ugrid_points=int(d["ugrid_points"]),
        )
    except ConfigValidationError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigValidationError(str(exc)) from None


def parse_config(text: str, overrides=()) -> ExperimentConfig:
    return build_config(apply_overrides(load_document(text), overrides))
