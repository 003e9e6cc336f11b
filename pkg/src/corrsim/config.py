"""Experiment configuration: JSON schema checks and the parsed config object."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import CapacityError, ConfigError, SourceError
from .sources import BipartiteSource, load_source

EXPERIMENTS = ("equality", "gapip", "simulate", "scaling", "measures", "oracle", "agreement")
MONTE_CARLO = {"equality", "gapip", "simulate"}

COMMON_KEYS = {"experiment", "seed", "trials", "output"}
EXPERIMENT_KEYS = {
    "equality": {"source", "n", "error_target", "pairs"},
    "gapip": {"n", "m", "b"},
    "simulate": {"source", "n", "eps", "votes", "table_size", "pairs"},
    "scaling": {"source", "n_values"},
    "measures": {"sources"},
    "oracle": {"source", "n", "p", "ell", "kmax"},
    "agreement": {"source", "p", "ell", "mode"},
}
REQUIRED = {
    "equality": {"source"},
    "gapip": {"n"},
    "simulate": {"source"},
    "scaling": {"source", "n_values"},
    "measures": set(),
    "oracle": {"source", "n", "p"},
    "agreement": {"source", "p"},
}
DEFAULTS = {
    "equality": {"n": 8, "error_target": 1 / 3, "pairs": [[0, 0], [0, 1]]},
    "gapip": {"m": None, "b": None},
    "simulate": {"n": 8, "eps": 1 / 3, "votes": 3, "table_size": None, "pairs": [[0, 0], [0, 1]]},
    "scaling": {},
    "measures": {"sources": ["perf", "priv", "disj", "bsc(0.1)", "bsc(0.25)", "bsc(0.4)"]},
    "oracle": {"ell": 1, "kmax": 2},
    "agreement": {"ell": None, "mode": "exact"},
}
OUTPUT_FORMATS = ("json", "csv")

# Machine-readable form of the rules above, shipped for documentation.
SCHEMA = {
    "type": "object",
    "required": ["experiment"],
    "properties": {
        "experiment": {"enum": list(EXPERIMENTS)},
        "seed": {"type": "integer", "minimum": 0},
        "trials": {"type": "integer", "minimum": 0},
        "output": {"type": "object", "properties": {"path": {"type": "string"},
                                                    "format": {"enum": list(OUTPUT_FORMATS)}}},
        "source": {"oneOf": [{"type": "string"}, {"type": "object"}]},
        "sources": {"type": "array"},
        "n": {"type": "integer", "minimum": 1},
        "m": {"type": ["integer", "null"]},
        "b": {"enum": [0, 1, None]},
        "p": {"type": "number"},
        "eps": {"type": "number"},
        "error_target": {"type": "number"},
        "ell": {"type": ["integer", "null"]},
        "kmax": {"type": "integer"},
        "votes": {"type": "integer"},
        "table_size": {"type": ["integer", "null"]},
        "n_values": {"type": "array", "items": {"type": "integer"}},
        "pairs": {"type": "array", "items": {"type": "array"}},
        "mode": {"enum": ["exact", "mc"]},
    },
    "allOf": [{"if": {"properties": {"experiment": {"const": e}}},
               "then": {"required": sorted(REQUIRED[e]),
                        "propertyNames": {"enum": sorted(COMMON_KEYS | EXPERIMENT_KEYS[e])}}}
              for e in EXPERIMENTS],
}


@dataclass
class ExperimentConfig:
    experiment: str
    params: dict
    sources: list = field(repr=False)
    seed: int | None
    trials: int
    output_path: str | None
    output_format: str
    raw: dict = field(repr=False)

    @property
    def source(self) -> BipartiteSource:
        return self.sources[0]


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_number(problems, key, v, lo=None, hi=None, integer=False):
    if not (_is_int(v) if integer else _is_num(v)):
        problems.append((key, f"expected {'an integer' if integer else 'a number'}, got {v!r}"))
        return
    if lo is not None and v < lo:
        problems.append((key, f"must be >= {lo}, got {v!r}"))
    if hi is not None and v > hi:
        problems.append((key, f"must be <= {hi}, got {v!r}"))


def _load_sources(problems, key, specs) -> list:
    out = []
    for j, spec in enumerate(specs):
        where = key if len(specs) == 1 and key == "source" else f"{key}[{j}]"
        if not isinstance(spec, (str, dict)):
            problems.append((where, f"expected a name or a source object, got {spec!r}"))
            continue
        try:
            out.append(load_source(spec))
        except (SourceError, CapacityError, OSError, ValueError) as exc:
            problems.append((where, str(exc)))
    return out


def _parse(raw) -> dict:
    if isinstance(raw, dict):
        return raw
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError([(f"line {exc.lineno} column {exc.colno}", exc.msg)]) from exc
    if not isinstance(obj, dict):
        raise ConfigError([("<root>", "config must be a JSON object")])
    return obj


def validate_config(raw) -> ExperimentConfig:
    """Parse and check a config (bytes, text or dict); every problem is reported at once."""
    obj = _parse(raw)
    problems: list = []
    exp = obj.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigError([("experiment", f"expected one of {list(EXPERIMENTS)}, got {exp!r}")])
    allowed = COMMON_KEYS | EXPERIMENT_KEYS[exp]
    for key in sorted(set(obj) - allowed):
        problems.append((key, f"unknown key for experiment {exp!r}"))
    for key in sorted(REQUIRED[exp] - set(obj)):
        problems.append((key, "required"))
    params = dict(DEFAULTS[exp])
    params.update({k: v for k, v in obj.items() if k in EXPERIMENT_KEYS[exp]})

    trials = obj.get("trials", 0)
    _check_number(problems, "trials", trials, lo=0, integer=True)
    seed = obj.get("seed")
    if seed is not None:
        _check_number(problems, "seed", seed, lo=0, integer=True)
    if exp in MONTE_CARLO and _is_int(trials) and trials > 0 and seed is None:
        problems.append(("seed", "required for Monte Carlo experiments (no implicit default)"))

    out = obj.get("output", {})
    out_path, out_fmt = None, "json"
    if not isinstance(out, dict) or set(out) - {"path", "format"}:
        problems.append(("output", 'expected {"path": str, "format": "json"|"csv"}'))
    else:
        out_path = out.get("path")
        out_fmt = out.get("format", "json")
        if out_path is not None and not isinstance(out_path, str):
            problems.append(("output.path", "expected a string"))
        if out_fmt not in OUTPUT_FORMATS:
            problems.append(("output.format", f"expected one of {list(OUTPUT_FORMATS)}"))
        elif out_fmt == "csv" and exp not in ("scaling", "measures"):
            problems.append(("output.format", f"csv tables exist only for scaling and measures, not {exp!r}"))

    sources = []
    if "source" in params:
        sources = _load_sources(problems, "source", [params["source"]])
    elif exp == "measures":
        if not isinstance(params["sources"], list) or not params["sources"]:
            problems.append(("sources", "expected a non-empty list"))
        else:
            sources = _load_sources(problems, "sources", params["sources"])

    for key, v in params.items():
        if key == "n":
            _check_number(problems, key, v, lo=1, integer=True)
        elif key == "m" and v is not None:
            _check_number(problems, key, v, lo=2, hi=63, integer=True)
        elif key == "b" and v is not None and v not in (0, 1):
            problems.append((key, "expected 0, 1 or null"))
        elif key in ("p", "error_target"):
            _check_number(problems, key, v, lo=0, hi=1)
        elif key == "eps":
            _check_number(problems, key, v, lo=0, hi=0.5)
        elif key in ("ell",) and v is not None:
            _check_number(problems, key, v, lo=0, integer=True)
        elif key in ("kmax", "table_size", "votes") and v is not None:
            _check_number(problems, key, v, lo=1 if key != "kmax" else 0, integer=True)
        elif key == "mode" and v not in ("exact", "mc"):
            problems.append((key, 'expected "exact" or "mc"'))
        elif key == "n_values":
            if not isinstance(v, list) or len(v) < 2 or not all(_is_int(x) and x >= 2 for x in v):
                problems.append((key, "expected a list of at least two integers >= 2"))
        elif key == "pairs":
            if not isinstance(v, list) or not all(isinstance(q, list) and len(q) == 2
                                                  and all(_is_int(x) and x >= 0 for x in q) for q in v):
                problems.append((key, "expected a list of [x, y] pairs of non-negative integers"))
    if exp == "agreement" and params.get("mode") == "mc" and seed is None:
        problems.append(("seed", "required for Monte Carlo evaluation"))
    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(exp, params, sources, seed, trials, out_path, out_fmt, obj)
