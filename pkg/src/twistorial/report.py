"""Deterministic JSON reports.

Numbers are written with 17 significant digits so that a report read back
reproduces every float exactly, and key order is fixed so that identical
runs give byte-identical files.
"""

from __future__ import annotations

import json
import math

import numpy as np

from . import __version__

SCHEMA = ("tool_version", "example", "check", "box", "fiber", "samples", "seed",
          "max_abs_residual", "mean_abs_residual", "tolerance", "pass")


def make_report(example, check, box, fiber, samples, seed, max_abs, mean_abs, tol, passed, details=None) -> dict:
    out = {
        "tool_version": __version__,
        "example": example,
        "check": check,
        "box": [[float(lo), float(hi)] for lo, hi in box],
        "fiber": [float(fiber[0]), float(fiber[1])],
        "samples": int(samples),
        "seed": int(seed),
        "max_abs_residual": float(max_abs),
        "mean_abs_residual": float(mean_abs),
        "tolerance": float(tol),
        "pass": bool(passed),
    }
    if details is not None:
        out["details"] = details
    return out


def _number(x: float) -> str:
    if not math.isfinite(x):
        # JSON has no literal for these; keep them readable and parseable by Python
        return "NaN" if math.isnan(x) else ("Infinity" if x > 0 else "-Infinity")
    text = format(x, ".17g")
    return text if any(ch in text for ch in ".e") else text + ".0"


def _encode(obj, indent, level) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _number(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent, level + 1) for v in seq) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """JSON text with 17-significant-digit floats and a trailing newline."""
    return _encode(obj, indent, 0) + "\n"
