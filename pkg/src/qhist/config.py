"""JSON experiment configs.

Matrices are row-major nested lists whose entries are either real numbers or
``[re, im]`` pairs. A pure state can be given as ``{"ket": [...]}`` wherever a
density matrix or projector is expected.
"""
from __future__ import annotations

import difflib
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .hilbert import SIZE_CAP, SizeCapError

KINDS = (
    "consistency",
    "berry",
    "coherent-action",
    "wigner-identities",
    "multi-time-additivity",
    "ctp-correlators",
    "stochastic-limit",
)


class ConfigError(ValueError):
    """Config failed validation."""


def nearest_kind(name: str) -> str | None:
    hits = difflib.get_close_matches(name, KINDS, n=1, cutoff=0.0)
    return hits[0] if hits else None


def parse_complex(x) -> complex:
    if isinstance(x, bool):
        raise ConfigError(f"expected a number, got {x!r}")
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, (list, tuple)) and len(x) == 2 and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in x):
        return complex(x[0], x[1])
    raise ConfigError(f"expected a number or [re, im] pair, got {x!r}")


def parse_vector(x) -> np.ndarray:
    if not isinstance(x, list) or not x:
        raise ConfigError("vector must be a non-empty list")
    return np.array([parse_complex(v) for v in x], dtype=np.complex128)


def parse_matrix(x, what: str = "matrix") -> np.ndarray:
    """Matrix, or the projector onto a normalised ``{"ket": [...]}``."""
    if isinstance(x, dict):
        if set(x) != {"ket"}:
            raise ConfigError(f"{what}: only the 'ket' shorthand is accepted, got keys {sorted(x)}")
        v = parse_vector(x["ket"])
        norm = np.linalg.norm(v)
        if norm == 0:
            raise ConfigError(f"{what}: zero ket")
        v = v / norm
        return np.outer(v, v.conj())
    if not isinstance(x, list) or not x or not all(isinstance(r, list) for r in x):
        raise ConfigError(f"{what}: expected a list of rows")
    rows = [[parse_complex(v) for v in r] for r in x]
    if len({len(r) for r in rows}) != 1 or len(rows) != len(rows[0]):
        raise ConfigError(f"{what}: matrix must be square")
    if len(rows) > SIZE_CAP:
        raise SizeCapError(f"{what}: dimension {len(rows)} exceeds cap {SIZE_CAP}")
    return np.array(rows, dtype=np.complex128)


def encode_matrix(m) -> list:
    m = np.asarray(m, dtype=np.complex128)
    return [[[float(v.real), float(v.imag)] for v in row] for row in m]


@dataclass
class Section:
    """Dict wrapper that records which keys were read, to reject typos."""

    data: dict
    path: str
    used: set = field(default_factory=set)

    def get(self, key, default=None, required: bool = False):
        if key in self.data:
            self.used.add(key)
            return self.data[key]
        if required:
            raise ConfigError(f"{self.path}: missing required key '{key}'")
        return default

    def sub(self, key, required: bool = False) -> "Section":
        v = self.get(key, None, required)
        if v is None:
            return Section({}, f"{self.path}.{key}")
        if not isinstance(v, dict):
            raise ConfigError(f"{self.path}.{key}: expected an object")
        return Section(v, f"{self.path}.{key}")

    def number(self, key, default=None, required=False, lo=None, hi=None, integer=False):
        v = self.get(key, default, required)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{self.path}.{key}: expected a number, got {v!r}")
        if integer and int(v) != v:
            raise ConfigError(f"{self.path}.{key}: expected an integer, got {v!r}")
        if lo is not None and v < lo or hi is not None and v > hi:
            raise ConfigError(f"{self.path}.{key}: {v} outside [{lo}, {hi}]")
        return int(v) if integer else float(v)

    def numbers(self, key, default=None, required=False, integer=False, allow_empty=False):
        v = self.get(key, default, required)
        if v is None:
            return None
        if not isinstance(v, list) or not (v or allow_empty):
            raise ConfigError(f"{self.path}.{key}: expected a non-empty list")
        out = []
        for x in v:
            if isinstance(x, bool) or not isinstance(x, (int, float)) or (integer and int(x) != x):
                raise ConfigError(f"{self.path}.{key}: bad entry {x!r}")
            out.append(int(x) if integer else float(x))
        return out

    def unused(self) -> list[str]:
        return sorted(set(self.data) - self.used)


@dataclass
class ExperimentConfig:
    kind: str
    raw: dict
    digest: str
    seed: int | None
    workers: int | None
    params: Section
    source: str = "<memory>"

    @property
    def tol(self) -> float:
        return float(self.raw.get("tolerances", {}).get("tol", 1e-9))


TOP_KEYS = {"kind", "seed", "workers", "tolerances", "limits", "output", "description"}


def config_digest(raw: dict) -> str:
    blob = json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def from_dict(raw, source: str = "<memory>") -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    kind = raw.get("kind")
    if not isinstance(kind, str):
        raise ConfigError("config needs a string 'kind'")
    if kind not in KINDS:
        guess = nearest_kind(kind)
        raise ConfigError(f"unknown experiment kind '{kind}'; did you mean '{guess}'?")
    seed = raw.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int) or seed < 0):
        raise ConfigError("seed must be a non-negative integer")
    workers = raw.get("workers")
    if workers is not None and (isinstance(workers, bool) or not isinstance(workers, int) or workers < 1):
        raise ConfigError("workers must be a positive integer")
    tols = raw.get("tolerances", {})
    if not isinstance(tols, dict) or any(
            isinstance(v, bool) or not isinstance(v, (int, float)) or v <= 0 for v in tols.values()):
        raise ConfigError("tolerances must map names to positive numbers")
    params = {k: v for k, v in raw.items() if k not in TOP_KEYS}
    return ExperimentConfig(kind, raw, config_digest(raw), seed, workers,
                            Section(params, kind), source)


def load(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return from_dict(raw, str(path))


def shipped_configs() -> dict[str, Path]:
    root = Path(__file__).with_name("configs")
    return {p.stem: p for p in sorted(root.glob("*.json"))}
