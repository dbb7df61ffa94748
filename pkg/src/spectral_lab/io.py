"""Matrix, label and spectrum files.

Matrix files come in two encodings:

* CSV: UTF-8, comma separated, one sample per row, an optional single header
  row. Values are written with ``repr`` so they read back exactly.
* Binary: the 4 magic bytes ``SPL1``, the row count and the column count as
  little-endian unsigned 64-bit integers, then rows*cols little-endian float64
  values in row-major order.

Reading detects the encoding from the magic bytes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import struct
from pathlib import Path

import numpy as np

from spectral_lab.errors import DataQualityError, InputFileError
from spectral_lab.matrix import Spectrum

MAGIC = b"SPL1"
HEADER = struct.Struct("<4sQQ")
SPECTRUM_SCHEMA = "spectral-lab/spectrum/1"


def digest(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


def read_bytes(path: str | Path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise InputFileError(f"cannot read {path}: {exc.strerror or exc}") from exc


def encode_binary(x: np.ndarray) -> bytes:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {x.shape}")
    return HEADER.pack(MAGIC, x.shape[0], x.shape[1]) + x.astype("<f8").tobytes(order="C")


def decode_binary(raw: bytes) -> np.ndarray:
    if len(raw) < HEADER.size:
        raise InputFileError("binary matrix shorter than its header")
    magic, rows, cols = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise InputFileError(f"bad magic {magic!r}, expected {MAGIC!r}")
    expected = HEADER.size + 8 * rows * cols
    if len(raw) != expected:
        raise InputFileError(f"binary matrix has {len(raw)} bytes, header implies {expected}")
    x = np.frombuffer(raw, dtype="<f8", offset=HEADER.size, count=rows * cols)
    return x.reshape(rows, cols).astype(np.float64)


def encode_csv(x: np.ndarray, header: list[str] | None = None) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header is not None:
        w.writerow(header)
    for row in np.asarray(x, dtype=np.float64):
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue().encode("utf-8")


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def decode_csv(raw: bytes) -> np.ndarray:
    try:
        text = raw.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise InputFileError(f"CSV is not valid UTF-8: {exc}") from exc
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise InputFileError("CSV contains no data rows")
    if not all(_is_number(c.strip()) for c in rows[0]):
        rows = rows[1:]
        if not rows:
            raise InputFileError("CSV has a header but no data rows")
    width = len(rows[0])
    values = []
    for lineno, r in enumerate(rows, start=1):
        if len(r) != width:
            raise InputFileError(f"CSV row {lineno} has {len(r)} fields, expected {width}")
        try:
            values.append([float(c) for c in r])
        except ValueError as exc:
            raise InputFileError(f"CSV row {lineno}: {exc}") from exc
    return np.array(values, dtype=np.float64)


def decode_matrix(raw: bytes) -> np.ndarray:
    return decode_binary(raw) if raw[:4] == MAGIC else decode_csv(raw)


def read_matrix(path: str | Path) -> tuple[np.ndarray, str]:
    """Load a matrix file; returns (array, sha256 digest of the file bytes)."""
    raw = read_bytes(path)
    return decode_matrix(raw), digest(raw)


def write_matrix(path: str | Path, x: np.ndarray, fmt: str = "csv") -> None:
    if fmt == "bin":
        data = encode_binary(x)
    elif fmt == "csv":
        data = encode_csv(x)
    else:
        raise ValueError(f"unknown matrix format {fmt!r}")
    Path(path).write_bytes(data)


def read_labels(path: str | Path) -> tuple[np.ndarray, str]:
    """Integer labels: one per line (a single-column matrix file also works)."""
    raw = read_bytes(path)
    x = decode_matrix(raw)
    if x.ndim != 2 or x.shape[1] != 1:
        raise InputFileError(f"label file must have exactly one column, got shape {x.shape}")
    x = x[:, 0]
    if not np.all(np.isfinite(x)):
        raise DataQualityError("label file contains NaN/Inf")
    if not np.all(x == np.round(x)):
        raise InputFileError("labels must be integers")
    return x.astype(np.int64), digest(raw)


def write_labels(path: str | Path, labels: np.ndarray) -> None:
    Path(path).write_text("".join(f"{int(v)}\n" for v in labels), encoding="utf-8")


def _clean(v: float) -> float | None:
    return float(v) if math.isfinite(v) else None


def spectrum_to_dict(s: Spectrum, include_vectors: bool = True) -> dict:
    doc = {
        "schema": SPECTRUM_SCHEMA,
        "N": s.source_N,
        "D": s.D,
        "trace": s.trace,
        "eigenvalues": [float(v) for v in s.eigenvalues],
    }
    if s.raw_eigenvalues is not None:
        doc["raw_eigenvalues"] = [float(v) for v in s.raw_eigenvalues]
    if include_vectors:
        doc["eigenvectors"] = [[float(v) for v in col] for col in s.eigenvectors.T]
    return doc


def spectrum_from_dict(doc: dict) -> Spectrum:
    """Rebuild a spectrum; without ``eigenvectors`` the standard basis is assumed."""
    try:
        lam = np.asarray(doc["eigenvalues"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputFileError(f"spectrum document lacks numeric 'eigenvalues': {exc}") from exc
    if lam.ndim != 1 or lam.size == 0:
        raise InputFileError("spectrum 'eigenvalues' must be a non-empty list")
    if not np.all(np.isfinite(lam)):
        raise DataQualityError("spectrum contains NaN/Inf eigenvalues")
    if np.any(np.diff(lam) > 0):
        raise InputFileError("spectrum eigenvalues must be sorted non-increasing")
    if "eigenvectors" in doc:
        vecs = np.asarray(doc["eigenvectors"], dtype=np.float64).T
        if vecs.shape != (lam.size, lam.size):
            raise InputFileError(f"eigenvectors have shape {vecs.shape}, expected {(lam.size, lam.size)}")
    else:
        vecs = np.eye(lam.size)
    n = doc.get("N")
    return Spectrum(np.maximum(lam, 0.0), vecs, None if n is None else int(n), raw_eigenvalues=lam)


def is_json(raw: bytes) -> bool:
    return raw.lstrip()[:1] == b"{"


def load_json(raw: bytes, what: str) -> dict:
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InputFileError(f"{what} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise InputFileError(f"{what} must be a JSON object")
    return doc


def dumps(doc: dict) -> str:
    """Deterministic JSON: fixed key order from the caller, NaN/Inf as null."""
    return json.dumps(_nan_to_none(doc), indent=2, allow_nan=False) + "\n"


def _nan_to_none(obj):
    if isinstance(obj, float):
        return _clean(obj)
    if isinstance(obj, dict):
        return {k: _nan_to_none(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_nan_to_none(v) for v in obj]
    if isinstance(obj, np.generic):
        return _nan_to_none(obj.item())
    return obj
