"""Atomic file output, CSV tables, the binary matrix format and JSON-lines logs.

Binary matrix file layout: a 4-byte little-endian unsigned header length,
the UTF-8 JSON header ``{"rows", "cols", "layout", "dtype"}``, then the
matrix in row-major little-endian complex128.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
import os
import struct
import tempfile
import time
from pathlib import Path

import numpy as np

from .errors import ParseError


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def atomic_write_json(path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def format_float(x: float) -> str:
    if math.isinf(x) and x < 0:
        return "-inf"
    return repr(float(x))


def write_csv(path, header, rows) -> None:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_float(v) if isinstance(v, float) else v for v in row])
    atomic_write_text(path, buf.getvalue())


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_residuals(path, history) -> None:
    write_csv(path, ["iteration", "relative_residual"], ((i, float(r)) for i, r in enumerate(history)))


def write_pattern(path, pattern) -> None:
    write_csv(path, ["theta_deg", "phi_deg", "pol", "rcs_db"], pattern.rows())


def write_spectra(path, cbf_set) -> None:
    write_csv(path, ["cell", "index", "sigma", "sigma_normalized"], cbf_set.spectra_rows())


def write_matrix(path, A, layout: str = "dense") -> None:
    A = np.asarray(A, dtype="<c16")
    if A.ndim == 1:
        A = A[:, None]
    header = json.dumps({"rows": A.shape[0], "cols": A.shape[1], "layout": layout, "dtype": "complex128-le"}).encode()
    atomic_write_bytes(path, struct.pack("<I", len(header)) + header + np.ascontiguousarray(A).tobytes())


def read_matrix(path) -> tuple[np.ndarray, dict]:
    raw = Path(path).read_bytes()
    if len(raw) < 4:
        raise ParseError(f"{path}: truncated matrix file")
    (hlen,) = struct.unpack("<I", raw[:4])
    try:
        header = json.loads(raw[4 : 4 + hlen])
        rows, cols = int(header["rows"]), int(header["cols"])
    except (ValueError, KeyError) as exc:
        raise ParseError(f"{path}: bad matrix header ({exc})") from None
    data = np.frombuffer(raw[4 + hlen :], dtype="<c16")
    if data.size != rows * cols:
        raise ParseError(f"{path}: expected {rows * cols} entries, found {data.size}")
    return data.reshape(rows, cols).copy(), header


class JsonLog:
    """Structured JSON-lines log; ``stage`` records elapsed wall time."""

    def __init__(self, path=None):
        self.path = Path(path) if path else None
        self.lines: list[str] = []
        self.t0 = time.perf_counter()

    def event(self, event: str, **fields) -> None:
        rec = {"t": round(time.perf_counter() - self.t0, 6), "event": event, **fields}
        self.lines.append(json.dumps(rec, default=_json_default, sort_keys=True))

    def stage(self, name: str, seconds: float, **fields) -> None:
        self.event("stage", stage=name, seconds=seconds, **fields)

    def flush(self) -> None:
        if self.path is not None:
            atomic_write_text(self.path, "\n".join(self.lines) + ("\n" if self.lines else ""))
