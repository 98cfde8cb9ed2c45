"""Config ingestion and atomic CSV / JSON output."""
from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from . import __version__
from .errors import InputError
from .quadrature import QuadratureSpec
from .sbt import L_FORMS
from .residuals import FORCE_CONVENTIONS

EPS_MAX = 0.25


# ---------------------------------------------------------------- json helpers

def read_json(path):
    """Parse a JSON file; syntax errors come back as InputError with line and column."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}")


def _plain(obj):
    # numpy scalars/arrays to Python, non-finite floats to strings
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return _plain(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def canonical_json(doc):
    return json.dumps(_plain(doc), sort_keys=True, separators=(",", ":"))


def config_hash(doc):
    return hashlib.sha256(canonical_json(doc).encode()).hexdigest()[:16]


def _atomic_write(path, text):
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(folder):
        raise InputError(f"output directory {folder} does not exist")
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=folder)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(doc, path):
    _atomic_write(path, json.dumps(_plain(doc), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------- config

@dataclass
class RunConfig:
    subcommand: str = "sweep"
    geometry: dict = field(default_factory=lambda: {"centerline": {"kind": "straight"},
                                                    "radius": {"kind": "prolate"}})
    force: str = "parabolic:1,0,0"
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)
    epsilon: Optional[float] = None
    epsilons: Optional[list] = None
    s_points: int = 101
    window: Optional[float] = 0.9
    l_form: str = "asymptotic"
    force_convention: str = "stretch"
    threads: int = 1
    outputs: dict = field(default_factory=dict)

    def validate(self):
        eps_list = list(self.epsilons or []) + ([self.epsilon] if self.epsilon is not None else [])
        for e in eps_list:
            if isinstance(e, bool) or not isinstance(e, (int, float)) or not 0 < e <= EPS_MAX:
                raise InputError(f"epsilon must lie in (0, {EPS_MAX}], got {e!r}")
        if self.epsilons is not None and any(b >= a for a, b in zip(self.epsilons, self.epsilons[1:])):
            raise InputError("epsilons must be strictly decreasing")
        if self.l_form not in L_FORMS:
            raise InputError(f"l_form must be one of {L_FORMS}")
        if self.force_convention not in FORCE_CONVENTIONS:
            raise InputError(f"force_convention must be one of {FORCE_CONVENTIONS}")
        if not isinstance(self.threads, int) or self.threads < 1:
            raise InputError("threads must be a positive integer")
        if not isinstance(self.s_points, int) or self.s_points < 3:
            raise InputError("s_points must be an integer >= 3")
        if self.window is not None and not 0 < self.window <= 1:
            raise InputError("window must lie in (0, 1]")
        if not isinstance(self.geometry, dict):
            raise InputError("geometry must be a JSON object")
        rad = self.geometry.get("radius", {})
        if isinstance(rad, dict) and "epsilon" in rad:
            e = rad["epsilon"]
            if not isinstance(e, (int, float)) or not 0 < e <= EPS_MAX:
                raise InputError(f"epsilon must lie in (0, {EPS_MAX}], got {e!r}")
        return self

    def to_dict(self):
        d = asdict(self)
        d["quadrature"] = self.quadrature.to_dict()
        return d

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise InputError("config must be a JSON object")
        allowed = set(cls.__dataclass_fields__)
        extra = set(doc) - allowed
        if extra:
            raise InputError(f"unknown key {sorted(extra)[0]!r} in config")
        doc = dict(doc)
        quad = doc.get("quadrature", {})
        if not isinstance(quad, dict):
            raise InputError("quadrature must be a JSON object")
        doc["quadrature"] = QuadratureSpec.from_dict(quad)
        return cls(**doc).validate()

    def to_sweep_config(self):
        from .analysis import DEFAULT_LADDER, SweepConfig
        return SweepConfig(epsilons=tuple(self.epsilons or DEFAULT_LADDER), geometry=self.geometry,
                           force=self.force, quadrature=self.quadrature, s_points=self.s_points,
                           window=self.window, l_form=self.l_form,
                           force_convention=self.force_convention, threads=self.threads)

    @property
    def hash(self):
        return config_hash(self.to_dict())


def load_config(path) -> RunConfig:
    return RunConfig.from_dict(read_json(path))


def save_config(cfg: RunConfig, path):
    write_json(cfg.to_dict(), path)


# ---------------------------------------------------------------- tables

@dataclass
class OutputTable:
    columns: list
    rows: list
    header: dict = field(default_factory=dict)

    def __post_init__(self):
        for r in self.rows:
            if len(r) != len(self.columns):
                raise InputError(f"row has {len(r)} values for {len(self.columns)} columns")


def format_value(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def render_table(table: OutputTable):
    lines = [f"# sbt-lab {__version__}"]
    lines += [f"# {k}: {table.header[k]}" for k in table.header]
    lines.append(",".join(table.columns))
    lines += [",".join(format_value(v) for v in row) for row in table.rows]
    return "\n".join(lines) + "\n"


def write_table(table: OutputTable, path):
    _atomic_write(path, render_table(table))


def read_table(path):
    """(header dict, column names, float array) from a table written by write_table."""
    header, columns, rows = {}, None, []
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}")
    with fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].partition(":")
                if val:
                    header[key.strip()] = val.strip()
                continue
            parts = [p.strip() for p in line.split(",")]
            try:
                rows.append([float(p) for p in parts])
            except ValueError:
                if columns is None and not rows:
                    columns = parts
                    continue
                raise InputError(f"{path}: non-numeric value on line {lineno}")
            width = len(columns) if columns else len(rows[0])
            if len(parts) != width:
                raise InputError(f"{path}: line {lineno} has {len(parts)} values, expected {width}")
    data = np.array(rows, dtype=float) if rows else np.empty((0, len(columns or [])))
    return header, columns, data


def read_pairs(path):
    _, _, data = read_table(path)
    if data.ndim != 2 or data.shape[1] != 2:
        raise InputError(f"{path}: expected two columns (eps, err)")
    return data


def read_points(path):
    _, _, data = read_table(path)
    if data.ndim != 2 or data.shape[1] != 3 or len(data) == 0:
        raise InputError(f"{path}: expected rows of three coordinates x,y,z")
    return data
