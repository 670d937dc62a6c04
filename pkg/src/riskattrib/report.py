"""Deterministic serialization helpers for CLI reports.

Floats are written with 17 significant digits so that every emitted number
round-trips bit-exactly and identical runs produce byte-identical files.
"""

from __future__ import annotations

import json
import math

import numpy as np


def format_float(x: float) -> str:
    value = float(x)
    if math.isnan(value) or math.isinf(value):
        raise ValueError(f"non-finite value {value!r} cannot appear in a report")
    return format(value, ".17g")


def _emit(obj, indent: int, level: int) -> str:
    pad = " " * (indent * level)
    inner = " " * (indent * (level + 1))
    if obj is None:
        return "null"
    if isinstance(obj, bool) or isinstance(obj, np.bool_):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{inner}{_emit(item, indent, level + 1)}" for item in obj]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f"{inner}{json.dumps(str(key))}: {_emit(value, indent, level + 1)}"
            for key, value in obj.items()
        ]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    raise TypeError(f"cannot serialize {type(obj)!r}")


def dumps(obj, indent: int = 2) -> str:
    """JSON text with deterministic layout and 17-digit floats."""
    return _emit(obj, indent, 0) + "\n"
