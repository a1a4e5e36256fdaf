"""Delimited output: comma-separated, LF endings, 17 significant digits, '#' provenance."""
from __future__ import annotations

import csv
import hashlib
import io
import math
import os
from typing import Iterable, Mapping, Sequence

from . import __version__


def fmt(v) -> str:
    if isinstance(v, (bool,)) or type(v).__name__ == "bool_":
        return "true" if v else "false"
    if isinstance(v, int) or type(v).__name__.startswith("int"):
        return str(int(v))
    if isinstance(v, float) or type(v).__name__.startswith("float"):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return "%.17g" % v
    if v is None:
        return ""
    return str(v)


def config_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def render_csv(header: Sequence[str], rows: Iterable[Sequence],
               provenance: Mapping[str, str] | None = None) -> str:
    buf = io.StringIO()
    buf.write(f"# rittlab {__version__}\n")
    for k, v in (provenance or {}).items():
        buf.write(f"# {k} {v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(x) for x in row])
    return buf.getvalue()


def write_csv(path: str | os.PathLike, header: Sequence[str], rows: Iterable[Sequence],
              provenance: Mapping[str, str] | None = None) -> None:
    text = render_csv(header, rows, provenance)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def read_csv(path: str | os.PathLike) -> tuple[list[str], list[list[str]]]:
    """Header and rows, skipping '#' lines."""
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]
