"""Run configuration: a flat key = value file plus command-line overrides.

The file format is one `key = value` per line, `#` comments, no sections.
Every key must belong to the schema of the requested subcommand; unknown
and duplicate keys are rejected with the offending key named.  Overrides
(`--set key=value`) win over the file.  All runs carry a definite integer
seed (default 0, never wall clock), so identical configurations reproduce
identical outputs byte for byte.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

__all__ = ["ConfigError", "RunConfig", "parse_config", "SUBCOMMANDS"]


class ConfigError(ValueError):
    pass


def _positive(name):
    def check(v):
        if not v > 0:
            raise ConfigError(f"{name} must be positive, got {v}")
    return check


def _nonnegative(name):
    def check(v):
        if v < 0:
            raise ConfigError(f"{name} must be >= 0, got {v}")
    return check


def _choice(name, options):
    def check(v):
        if v not in options:
            raise ConfigError(f"{name} must be one of {sorted(options)}, got {v!r}")
    return check


# key: (type, default, validator or None); defaults of None mean "required"
_COMMON = {
    "K": (float, 4.0, _positive("K")),
    "omega0": (float, 0.5, _nonnegative("omega0")),
    "M": (int, 256, _positive("M")),
    "n": (int, 32, _positive("n")),
    "dt": (float, 0.05, _positive("dt")),
    "T": (float, 100.0, _positive("T")),
    "seed": (int, 0, None),
    "out": (str, "out", None),
    "workers": (int, 1, _positive("workers")),
}

_SCHEMAS = {
    "stationary": {},
    "pde": {
        "dt": (float, 1e-3, _positive("dt")),
        "T": (float, 10.0, _positive("T")),
        "init": (str, "seeded_uniform",
                 _choice("init", {"seeded_uniform", "uniform", "stationary"})),
        "eps": (float, 1e-3, _nonnegative("eps")),
        "record_every": (int, 20, _positive("record_every")),
        "snapshots": (bool, False, None),
    },
    "particles": {
        "N": (int, 400, _positive("N")),
        "dt": (float, 1e-2, _positive("dt")),
        "T": (float, 100.0, _positive("T")),
        "disorder": (str, "iid", _choice("disorder", {"iid", "symmetrized"})),
        "init": (str, "stationary", _choice("init", {"uniform", "stationary"})),
        "record_every": (int, 10, _positive("record_every")),
    },
    "spectrum": {
        "cluster_threshold": (float, 1e-4, _positive("cluster_threshold")),
    },
    "jordan": {},
    "spde": {
        "z": (float, 0.5, None),
        "record_every": (int, 4, _positive("record_every")),
        "scale_x": (float, 0.0, _nonnegative("scale_x")),
    },
    "ensemble": {
        "kind": (str, "spde", _choice("kind", {"spde", "particles"})),
        "draws": (int, 100, _positive("draws")),
        "paths": (int, 4, _positive("paths")),
        "mode": (str, "gaussian_z",
                 _choice("mode", {"gaussian_z", "symmetrized", "iid"})),
        "N": (int, 400, _positive("N")),
        "dt": (float, 1e-2, _positive("dt")),
        "record_every": (int, 10, _positive("record_every")),
        "fit_t1": (float, 0.0, _nonnegative("fit_t1")),  # 0 = auto (T/5)
    },
    "figures": {
        "runs": (int, 6, _positive("runs")),
    },
}

SUBCOMMANDS = tuple(_SCHEMAS)


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    def canonical_items(self):
        # execution hints do not change the computed data
        skip = {"out", "workers"}
        return tuple(sorted((k, v) for k, v in self.values.items() if k not in skip))

    def config_hash(self) -> str:
        text = self.subcommand + "".join(f"|{k}={v!r}" for k, v in self.canonical_items())
        return hashlib.sha256(text.encode()).hexdigest()[:8]


def _schema_for(subcommand: str) -> dict:
    if subcommand not in _SCHEMAS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    schema = dict(_COMMON)
    schema.update(_SCHEMAS[subcommand])
    return schema


def _parse_value(key, raw, typ):
    raw = raw.strip()
    try:
        if typ is bool:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        return typ(raw)
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: cannot parse {raw!r} as {typ.__name__}") from exc


def _read_pairs(path: str):
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, raw = stripped.split("=", 1)
            pairs.append((key.strip(), raw, f"{path}:{lineno}"))
    return pairs


def parse_config(subcommand: str, path: str | None = None,
                 overrides: list[str] | None = None) -> RunConfig:
    """Validated configuration for one subcommand run."""
    schema = _schema_for(subcommand)
    values = {}
    seen = set()
    pairs = _read_pairs(path) if path else []
    for key, raw, where in pairs:
        if key in seen:
            raise ConfigError(f"{where}: duplicate key {key!r}")
        seen.add(key)
        if key not in schema:
            raise ConfigError(f"{where}: unknown key {key!r} for subcommand {subcommand!r}")
        values[key] = _parse_value(key, raw, schema[key][0])
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        key = key.strip()
        if key not in schema:
            raise ConfigError(f"--set: unknown key {key!r} for subcommand {subcommand!r}")
        values[key] = _parse_value(key, raw, schema[key][0])
    for key, (typ, default, validator) in schema.items():
        if key not in values:
            if default is None:
                raise ConfigError(f"missing required key {key!r}")
            values[key] = default
        if values[key] is not None and schema[key][2] is not None:
            schema[key][2](values[key])
    if values["M"] < 4 * values["n"] + 2:
        raise ConfigError(f"M={values['M']} too small for n={values['n']}: need M >= 4n+2")
    return RunConfig(subcommand=subcommand, values=values)
