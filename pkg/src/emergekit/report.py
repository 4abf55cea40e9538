"""Machine-readable run reports.

Reports are JSON documents assembled by deterministic string concatenation:
the file is exactly ``{"body":<body>,"timing":<timing>}`` so that the body
bytes can be sliced back out and compared across runs — identical config and
seed must reproduce the body bit for bit, while timing is free to differ.

Numbers are printed with 17 significant digits; complex values as two-element
``[re, im]`` arrays.
"""

from __future__ import annotations

import csv
import json

ENGINE_VERSION = "0.1.0"

__all__ = [
    "ENGINE_VERSION",
    "serialize",
    "render_report",
    "extract_body",
    "parse_report",
    "write_map_csv",
]


def _g(x: float) -> str:
    return "%.17g" % float(x)


def serialize(value) -> str:
    """Deterministic JSON text: dict insertion order, %.17g numbers."""
    if value is None:
        return "null"
    if value is True:
        return "true"
    if value is False:
        return "false"
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return _g(value)
    if isinstance(value, complex):
        return "[" + _g(value.real) + "," + _g(value.imag) + "]"
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(serialize(v) for v in value) + "]"
    if isinstance(value, dict):
        return (
            "{"
            + ",".join(
                json.dumps(str(k)) + ":" + serialize(v) for k, v in value.items()
            )
            + "}"
        )
    raise TypeError(f"cannot serialize {type(value).__name__}")


def render_report(body: dict, timing: dict) -> str:
    return '{"body":' + serialize(body) + ',"timing":' + serialize(timing) + "}"


def extract_body(text: str) -> str:
    """The exact body byte range of a rendered report."""
    prefix = '{"body":'
    marker = ',"timing":'
    if not text.startswith(prefix):
        raise ValueError("not a rendered report")
    at = text.rindex(marker)
    return text[len(prefix) : at]


def parse_report(text: str) -> dict:
    return json.loads(text)


def write_map_csv(path: str, table: list[dict]) -> None:
    """Map samples as CSV: parameter components split into re/im columns."""
    if not table:
        raise ValueError("empty map table")
    n_eps = len(table[0]["eps"])
    n_img = len(table[0]["image"]) if table[0]["image"] is not None else 0
    header = []
    for i in range(n_eps):
        header += [f"eps_{i}_re", f"eps_{i}_im"]
    for i in range(n_img):
        header += [f"image_{i}_re", f"image_{i}_im"]
    header += ["action_residual", "operator_residual"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in table:
            out = []
            for z in row["eps"]:
                out += [_g(z[0]), _g(z[1])]
            img = row["image"]
            for i in range(n_img):
                if img is None:
                    out += ["", ""]
                else:
                    out += [_g(img[i][0]), _g(img[i][1])]
            for key in ("action_residual", "operator_residual"):
                v = row.get(key)
                out.append("" if v is None else _g(v))
            w.writerow(out)
