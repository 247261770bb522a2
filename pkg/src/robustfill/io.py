"""Design CSV files, WRMSE profile dumps and study config JSON."""

from __future__ import annotations

import csv
import io
import json
import math
import re
from pathlib import Path

import numpy as np

from .gp_core import ROLES, Design

CONFIG_KEY = "robustfill_config_v1"
_TRANSFORM_RE = re.compile(r"^(none|tr|hybrid|dt:[0-9.eE+-]+)$")


class DesignParseError(ValueError):
    """Malformed design file; ``line`` is 1-based, ``column`` is the 1-based factor index or None."""

    def __init__(self, line: int, message: str, column=None):
        self.line = line
        self.column = column
        where = f"line {line}" + (f", column {column}" if column is not None else "")
        super().__init__(f"{where}: {message}")


def format_float(v: float) -> str:
    # repr is the shortest string that round-trips exactly
    return repr(float(v))


def design_to_csv(design: Design) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["name", *design.names])
    w.writerow(["role", *design.roles])
    w.writerow(["transform", *design.transforms])
    for row in design.X:
        w.writerow([format_float(v) for v in row])
    return buf.getvalue()


def write_design(design: Design, path) -> None:
    Path(path).write_text(design_to_csv(design), encoding="utf-8", newline="\n")


def _expect_header(rows, idx: int, key: str):
    if idx >= len(rows):
        raise DesignParseError(idx + 1, f"missing '{key}' header row")
    row = rows[idx]
    if not row or row[0] != key:
        found = row[0] if row else ""
        raise DesignParseError(idx + 1, f"expected '{key}' header row, found {found!r}")
    return tuple(row[1:])


def design_from_csv(text: str) -> Design:
    rows = list(csv.reader(io.StringIO(text)))
    names = _expect_header(rows, 0, "name")
    if not names:
        raise DesignParseError(1, "no factor columns")
    roles = _expect_header(rows, 1, "role")
    transforms = _expect_header(rows, 2, "transform")
    d = len(names)
    for lineno, meta in ((2, roles), (3, transforms)):
        if len(meta) != d:
            raise DesignParseError(lineno, f"expected {d} entries, got {len(meta)}")
    for j, r in enumerate(roles, start=1):
        if r not in ROLES:
            raise DesignParseError(2, f"unknown role {r!r}", column=j)
    for j, t in enumerate(transforms, start=1):
        if not _TRANSFORM_RE.match(t):
            raise DesignParseError(3, f"unknown transform {t!r}", column=j)
    data = []
    for i, row in enumerate(rows[3:], start=4):
        if not row:
            continue
        if len(row) != d:
            raise DesignParseError(i, f"expected {d} fields, got {len(row)} (decimal comma?)",
                                   column=min(len(row), d) + 1)
        vals = []
        for j, cell in enumerate(row, start=1):
            if "," in cell:
                raise DesignParseError(i, f"decimal comma in {cell!r}; use '.'", column=j)
            try:
                v = float(cell)
            except ValueError:
                raise DesignParseError(i, f"not a number: {cell!r}", column=j) from None
            if not math.isfinite(v):
                raise DesignParseError(i, f"non-finite entry {cell!r}", column=j)
            vals.append(v)
        data.append(vals)
    if not data:
        raise DesignParseError(len(rows) + 1, "design has no runs")
    return Design(np.array(data), roles=roles, names=names, transforms=transforms)


def read_design(path) -> Design:
    return design_from_csv(Path(path).read_text(encoding="utf-8"))


def read_responses(path) -> np.ndarray:
    """One response per line (an optional ``y`` header is skipped)."""
    vals = []
    for i, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        s = line.strip()
        if not s or (i == 1 and s.lower() == "y"):
            continue
        try:
            v = float(s)
        except ValueError:
            raise DesignParseError(i, f"not a number: {s!r}") from None
        if not math.isfinite(v):
            raise DesignParseError(i, f"non-finite response {s!r}")
        vals.append(v)
    return np.array(vals)


def write_profile(names, grid, values, path) -> None:
    """CSV with one row per grid point and a trailing ``wrmse`` column."""
    grid = np.asarray(grid, dtype=float).reshape(-1, len(names)) if len(names) else np.empty((0, 0))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*names, "wrmse"])
        for row, v in zip(grid, values):
            w.writerow([format_float(a) for a in row] + [format_float(v)])


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def load_config(path) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, dict) or CONFIG_KEY not in doc:
        raise DesignParseError(1, f"config must have top-level key {CONFIG_KEY!r}")
    return doc[CONFIG_KEY]


def dump_config(cfg: dict, path) -> None:
    Path(path).write_text(json.dumps({CONFIG_KEY: cfg}, indent=2, sort_keys=True) + "\n", encoding="utf-8")
