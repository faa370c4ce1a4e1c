"""Deterministic JSON rendering for report files.

Floats are serialized with 17 significant digits so identical inputs give
byte-identical reports and values round-trip exactly.
"""

from __future__ import annotations

import json
import math


def format_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite float {x!r}")
    s = format(x, ".17g")
    if "." not in s and "e" not in s and "E" not in s:
        s += ".0"
    return s


def dumps(obj, indent: int = 2) -> str:
    out: list[str] = []
    _render(obj, out, 0, indent)
    return "".join(out) + "\n"


def _render(obj, out, level, indent):
    pad = " " * (indent * (level + 1))
    end_pad = " " * (indent * level)
    if obj is None:
        out.append("null")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(format_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (k, v) in enumerate(obj.items()):
            out.append(f"{pad}{json.dumps(str(k))}: ")
            _render(v, out, level + 1, indent)
            out.append(",\n" if i + 1 < len(obj) else "\n")
        out.append(f"{end_pad}}}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        out.append("[\n")
        for i, v in enumerate(obj):
            out.append(pad)
            _render(v, out, level + 1, indent)
            out.append(",\n" if i + 1 < len(obj) else "\n")
        out.append(f"{end_pad}]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_report(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(obj))
