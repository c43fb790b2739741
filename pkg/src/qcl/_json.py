"""JSON emission with fixed 17-significant-digit floats.

The standard library does not let callers control float formatting, and
exact reproducibility of event times requires round-trippable output, so
this tiny serializer handles the flat structures this package emits.
"""

from __future__ import annotations

import json
import math


def _format_float(v: float) -> str:
    if not math.isfinite(v):
        raise ValueError(f"cannot serialize non-finite float {v!r}")
    return format(v, ".17g")


def dumps(obj, indent: int = 0) -> str:
    pad = " " * indent
    child = indent + 2

    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, float):
        return _format_float(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [dumps(v, child) for v in obj]
        return "[\n" + ",\n".join(" " * child + s for s in items) + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f"{json.dumps(str(k))}: {dumps(v, child)}" for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(" " * child + s for s in items) + "\n" + pad + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")
