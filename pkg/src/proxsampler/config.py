"""Run configuration: a line-oriented ``key = value`` file with ``[section]`` headers.

Values are JSON literals (``"text"``, numbers, ``true``/``false``, lists).
``#`` starts a comment outside of strings. Every key is validated against a
fixed schema before anything runs; unknown keys and sections are errors that
carry the offending line number.
"""
from __future__ import annotations

import hashlib
import inspect
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from .potentials import BUILTINS
from .stepsize import REGIMES


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


def _strip_comment(text: str) -> str:
    in_str = escaped = False
    for i, ch in enumerate(text):
        if in_str:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_str = False
        elif ch == '"':
            in_str = True
        elif ch == "#":
            return text[:i]
    return text


def parse_text(text: str) -> dict[str, dict[str, tuple[Any, int]]]:
    """Parse into {section: {key: (value, line)}}; top-level keys live in section ''."""
    out: dict[str, dict[str, tuple[Any, int]]] = {"": {}}
    section = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                raise ConfigError(f"malformed section header {raw.strip()!r}", lineno)
            section = line[1:-1].strip()
            if section in out:
                raise ConfigError(f"section [{section}] appears twice", lineno)
            out[section] = {}
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        if not key.replace("_", "").isalnum():
            raise ConfigError(f"invalid key {key!r}", lineno)
        if key in out[section]:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        try:
            parsed = json.loads(value.strip())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"cannot parse value for {key!r}: {exc.msg}", lineno) from None
        out[section][key] = (parsed, lineno)
    return out


# ---------------------------------------------------------------------------
# schema


def _pos_real(v):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or v <= 0:
        raise ValueError("must be a positive finite number")
    return float(v)


def _nonneg_real(v):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or v < 0:
        raise ValueError("must be a non-negative finite number")
    return float(v)


def _unit_open(v):
    v = _pos_real(v)
    if v >= 1:
        raise ValueError("must lie in (0, 1)")
    return v


def _pos_int(v):
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise ValueError("must be a positive integer")
    return v


def _seed(v):
    if isinstance(v, bool) or not isinstance(v, int) or not 0 <= v < 2**64:
        raise ValueError("must be an integer in [0, 2^64)")
    return v


def _real_list(v):
    if not isinstance(v, list) or not v or not all(isinstance(t, (int, float)) and not isinstance(t, bool) for t in v):
        raise ValueError("must be a non-empty list of numbers")
    return [float(t) for t in v]


def _choice(*options):
    def check(v):
        if v not in options:
            raise ValueError(f"must be one of {list(options)}")
        return v

    return check


def _string(v):
    if not isinstance(v, str) or not v:
        raise ValueError("must be a non-empty string")
    return v


def _alpha(v):
    v = _nonneg_real(v)
    if v > 1:
        raise ValueError("must lie in [0, 1]")
    return v


TOP = {
    "target": (_string, None),
    "seed": (_seed, 0),
    "delta": (_unit_open, None),
    "metric": (_choice("TV", "W2"), "TV"),
    "mode": (_choice("exact", "approx"), "exact"),
    "output_dir": (_string, "."),
}
SECTIONS: dict[str, dict[str, tuple[Callable, Any]]] = {
    "assumption": {
        "regime": (_choice(*REGIMES), None),
        "beta": (_pos_real, None),
        "kl_init": (_pos_real, None),
        "w2_init": (_pos_real, None),
        "c_lsi": (_pos_real, None),
        "c_pi": (_pos_real, None),
        "chi2_init": (_pos_real, None),
    },
    "sample": {
        "chains": (_pos_int, 1),
        "x0": (_real_list, None),
        "record_stride": (_pos_int, None),
        "max_proposals": (_pos_int, 1000),
        # Exact mode only: run the iterative prox at this tolerance instead of the closed form.
        "prox_tol": (_pos_real, None),
    },
    "rgo": {
        "y": (_real_list, None),
        "zeta": (_unit_open, 0.05),
        "n_draws": (_pos_int, 200_000),
        "mode": (_choice("exact", "approx"), None),
        "s": (_pos_real, None),
    },
    "conc": {
        "variant": (_choice("Standard", "Composite", "Errored", "LowRange"), "Standard"),
        "eta": (_pos_real, 0.01),
        "epsilon": (_pos_real, 0.5),
        "s_offset": (_nonneg_real, 0.0),
        "n_samples": (_pos_int, 1_000_000),
        "quantiles": (_real_list, [0.5, 0.9, 0.99, 0.999]),
        "r_grid": (_real_list, None),
        "rate_scale": (_pos_real, 1.0),
        "alpha": (_alpha, None),
        "l_alpha": (_pos_real, None),
        "m": (_real_list, None),
        "expect": (_choice("dominated", "violated"), "dominated"),
    },
    "benchmark": {
        "chains": (_pos_int, 1000),
        "baseline_eta": (_pos_real, None),
        "x0": (_real_list, None),
        "n_ref": (_pos_int, 512),
    },
}
REGIME_KEYS = {
    "strongly_log_concave": ("beta", "kl_init"),
    "log_concave": ("w2_init",),
    "lsi": ("c_lsi", "kl_init"),
    "pi": ("c_pi", "chi2_init"),
}


@dataclass
class RunConfig:
    path: str
    digest: str
    seed: int
    target: str
    target_params: dict
    delta: float | None
    metric: str
    mode: str
    output_dir: str
    assumption: dict | None
    sections: dict[str, dict[str, Any]] = field(default_factory=dict)

    def section(self, name: str) -> dict[str, Any]:
        return self.sections[name]


def _validate_section(name: str, entries: dict[str, tuple[Any, int]], schema) -> dict[str, Any]:
    out = {}
    for key, (value, line) in entries.items():
        if key not in schema:
            where = f"section [{name}]" if name else "top level"
            raise ConfigError(f"unknown key {key!r} at {where}", line)
        try:
            out[key] = schema[key][0](value)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}", line) from None
    for key, (_, default) in schema.items():
        out.setdefault(key, default)
    return out


def _validate_target(name: str, entries: dict[str, tuple[Any, int]], line: int | None) -> dict:
    ctor = BUILTINS.get(name)
    if ctor is None:
        raise ConfigError(f"unknown target {name!r}; choose from {sorted(BUILTINS)}", line)
    sig = inspect.signature(ctor)
    params = {}
    for key, (value, kline) in entries.items():
        if key not in sig.parameters:
            raise ConfigError(f"unknown parameter {key!r} for target {name!r}", kline)
        params[key] = value
    missing = [k for k, prm in sig.parameters.items() if prm.default is inspect.Parameter.empty and k not in params]
    if missing:
        raise ConfigError(f"target {name!r} needs parameters {missing} in [target]", line)
    try:
        ctor(**params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [target] parameters: {exc}", line) from None
    return params


def load_config(path: str | Path) -> RunConfig:
    raw = Path(path).read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError(f"config is not valid UTF-8: {exc}") from None
    return config_from_text(text, str(path), hashlib.sha256(raw).hexdigest())


def config_from_text(text: str, path: str = "<string>", digest: str | None = None) -> RunConfig:
    if digest is None:
        digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    parsed = parse_text(text)
    for name, entries in parsed.items():
        if name and name != "target" and name not in SECTIONS:
            first = min((ln for _, ln in entries.values()), default=None)
            raise ConfigError(f"unknown section [{name}]", first)
    top = _validate_section("", parsed[""], TOP)
    if top["target"] is None:
        raise ConfigError("missing required key 'target'")
    target_line = parsed[""]["target"][1]
    target_params = _validate_target(top["target"], parsed.get("target", {}), target_line)
    sections = {name: _validate_section(name, parsed.get(name, {}), schema) for name, schema in SECTIONS.items()}

    assumption = None
    if "assumption" in parsed:
        a = sections["assumption"]
        entries = parsed["assumption"]
        if a["regime"] is None:
            raise ConfigError("[assumption] needs 'regime'", min(ln for _, ln in entries.values()))
        wanted = REGIME_KEYS[a["regime"]]
        for key, (_, line) in entries.items():
            if key != "regime" and key not in wanted:
                raise ConfigError(f"{key!r} does not belong to regime {a['regime']!r}", line)
        missing = [k for k in wanted if a[k] is None]
        if missing:
            raise ConfigError(f"regime {a['regime']!r} needs {missing}", entries["regime"][1])
        assumption = {"regime": a["regime"], **{k: a[k] for k in wanted}}

    return RunConfig(path, digest, top["seed"], top["target"], target_params, top["delta"], top["metric"],
                     top["mode"], top["output_dir"], assumption, sections)
