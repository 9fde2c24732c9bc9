"""Embedding and label file formats, metric reports, and atomic writes.

Embedding files are a single newline-terminated UTF-8 JSON header line
followed by the raw little-endian row-major payload::

    {"count": 2, "dim": 2, "dtype": "f32le", "modality": "image",
     "normalized": true, "version": 1}\\n<count * dim values>

``dtype`` is ``f32le`` or ``f64le``; ``modality`` is ``image``, ``text`` or
``unspecified``. The payload length must equal count * dim * itemsize
exactly. Label files are CSV with header ``index,label`` and one row per
embedding, indices covering 0..n-1; labels are densely remapped to
contiguous ids in ascending original order and the mapping is returned for
persistence.

All writes go to a temp file in the target directory followed by an atomic
rename, so readers never observe partial files.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import tempfile
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import EmbeddingSet, Modality, NORM_TOL
from .errors import (
    BadHeader,
    DuplicateIndex,
    MissingIndex,
    NonFiniteValue,
    TruncatedPayload,
    ValidationError,
)
from .indicators import HistogramPair

_DTYPES = {"f32le": np.dtype("<f4"), "f64le": np.dtype("<f8")}
_MODALITIES = {"image", "text", "unspecified"}
_HEADER_LIMIT = 1 << 16
#: A file claiming normalized rows is rejected beyond this deviation.
CLAIMED_NORM_TOL = 1e-4
#: Significant digits kept for metric values in reports.
REPORT_SIG_DIGITS = 12


def atomic_write_bytes(path: str | Path, blob: bytes) -> None:
    """Write ``blob`` to ``path`` via temp file + atomic rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def file_digest(path: str | Path) -> str:
    """SHA-256 hex digest of a file's bytes."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def save_embeddings(e: EmbeddingSet, path: str | Path, dtype: str = "f64le") -> None:
    """Write an embedding set in the header + payload format."""
    if dtype not in _DTYPES:
        raise ValidationError(f"dtype must be one of {sorted(_DTYPES)}, got {dtype!r}")
    header = {
        "version": 1,
        "count": e.n,
        "dim": e.dim,
        "dtype": dtype,
        "modality": e.modality.value,
        "normalized": e.normalized,
    }
    payload = np.ascontiguousarray(e.data, dtype=_DTYPES[dtype]).tobytes()
    atomic_write_bytes(path, json.dumps(header, sort_keys=True).encode("utf-8") + b"\n" + payload)


def load_embeddings(
    path: str | Path, fallback_modality: Modality = Modality.IMAGE
) -> EmbeddingSet:
    """Read an embedding file, validating header, payload, and norms.

    Rows in a file claiming ``normalized`` may deviate from unit norm by up
    to 1e-4 (covering 32-bit storage); rows beyond the 1e-6 working
    tolerance are renormalized, rows within it are kept bit-exact. Files not
    claiming normalization are normalized with a warning. ``unspecified``
    modality falls back to ``fallback_modality``.

    Raises:
        BadHeader: malformed or inconsistent header, oversized payload, or a
            false normalization claim.
        TruncatedPayload: payload shorter than the header declares.
        NonFiniteValue: NaN or infinity in the payload.
    """
    raw = Path(path).read_bytes()
    newline = raw.find(b"\n", 0, _HEADER_LIMIT)
    if newline < 0:
        raise BadHeader("missing newline-terminated JSON header line")
    try:
        header = json.loads(raw[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise BadHeader(f"unparseable header: {exc}") from exc
    if not isinstance(header, dict):
        raise BadHeader("header must be a JSON object")
    if header.get("version") != 1:
        raise BadHeader(f"unsupported version {header.get('version')!r}")
    try:
        count = int(header["count"])
        dim = int(header["dim"])
    except (KeyError, TypeError, ValueError) as exc:
        raise BadHeader("header must carry integer 'count' and 'dim'") from exc
    if count < 1 or dim < 2:
        raise BadHeader(f"need count >= 1 and dim >= 2, got {count}x{dim}")
    dtype_name = header.get("dtype")
    if dtype_name not in _DTYPES:
        raise BadHeader(f"dtype must be one of {sorted(_DTYPES)}, got {dtype_name!r}")
    modality_name = header.get("modality", "unspecified")
    if modality_name not in _MODALITIES:
        raise BadHeader(f"modality must be one of {sorted(_MODALITIES)}, got {modality_name!r}")
    claimed_normalized = header.get("normalized", False)
    if not isinstance(claimed_normalized, bool):
        raise BadHeader("'normalized' must be a JSON boolean")

    payload = raw[newline + 1 :]
    expected = count * dim * _DTYPES[dtype_name].itemsize
    if len(payload) < expected:
        raise TruncatedPayload(
            f"payload holds {len(payload)} bytes; header declares {expected}"
        )
    if len(payload) > expected:
        raise BadHeader(
            f"payload holds {len(payload) - expected} bytes beyond the {expected} declared"
        )
    data = np.frombuffer(payload, dtype=_DTYPES[dtype_name]).reshape(count, dim)
    data = data.astype(np.float64)
    if not np.all(np.isfinite(data)):
        raise NonFiniteValue("embedding payload contains NaN or infinite values")
    modality = fallback_modality if modality_name == "unspecified" else Modality(modality_name)

    norms = np.linalg.norm(data, axis=1)
    if claimed_normalized:
        dev = np.abs(norms - 1.0)
        worst = float(dev.max())
        if worst > CLAIMED_NORM_TOL:
            raise BadHeader(
                f"header claims normalized rows but one deviates by {worst:.3e} "
                f"(limit {CLAIMED_NORM_TOL:g})"
            )
        repair = dev > NORM_TOL
        if repair.any():
            data[repair] /= norms[repair, None]
        return EmbeddingSet(data, modality=modality, normalized=True)
    warnings.warn(
        f"{path}: rows are not normalized; normalizing on load", stacklevel=2
    )
    if np.any(norms <= 0):
        raise NonFiniteValue("cannot normalize a zero row")
    return EmbeddingSet(data / norms[:, None], modality=modality, normalized=True)


def save_labels(labels: np.ndarray, path: str | Path) -> None:
    """Write ``index,label`` CSV rows for each embedding row."""
    lines = ["index,label"]
    lines += [f"{i},{int(label)}" for i, label in enumerate(labels)]
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))


def load_labels(path: str | Path) -> tuple[np.ndarray, dict[int, int]]:
    """Read a label CSV and densely remap labels to contiguous ids.

    Returns ``(ids, mapping)`` where ``mapping`` sends each original label
    to its id, ids assigned in ascending original order.

    Raises:
        BadHeader: wrong CSV header or malformed rows.
        DuplicateIndex / MissingIndex: index column not a permutation of
            0..n-1.
    """
    by_index: dict[int, int] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["index", "label"]:
            raise BadHeader(f"expected CSV header 'index,label', got {header}")
        for row in reader:
            if not row:
                continue
            if len(row) != 2:
                raise BadHeader(f"expected two columns, got {row}")
            try:
                index, label = int(row[0]), int(row[1])
            except ValueError as exc:
                raise BadHeader(f"non-integer row {row}") from exc
            if index < 0:
                raise BadHeader(f"negative index {index}")
            if index in by_index:
                raise DuplicateIndex(f"index {index} appears more than once")
            by_index[index] = label
    if not by_index:
        raise BadHeader("label file has no data rows")
    n = max(by_index) + 1
    missing = [i for i in range(n) if i not in by_index]
    if missing:
        shown = ", ".join(str(i) for i in missing[:5])
        raise MissingIndex(f"label rows missing for indices {shown}")
    originals = np.array([by_index[i] for i in range(n)], dtype=np.int64)
    mapping = {int(orig): new for new, orig in enumerate(np.unique(originals))}
    dense = np.array([mapping[int(v)] for v in originals], dtype=np.int64)
    return dense, mapping


def write_histogram_csv(pair: HistogramPair, path: str | Path) -> None:
    """Serialize a histogram pair as bin_left,bin_right,density_a,density_b."""
    lines = ["bin_left,bin_right,density_a,density_b"]
    for k in range(pair.bins):
        lines.append(
            f"{float(pair.bin_edges[k])!r},{float(pair.bin_edges[k + 1])!r},"
            f"{float(pair.density_a[k])!r},{float(pair.density_b[k])!r}"
        )
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))


def _round_metric(value: object) -> float | int:
    if isinstance(value, (bool, int, np.integer)):
        return int(value)
    number = float(value)
    if not math.isfinite(number):
        raise ValidationError(f"metric value {number} is not finite")
    return float(f"{number:.{REPORT_SIG_DIGITS}g}")


@dataclass
class MetricReport:
    """Serializable record of one CLI run: command, input digests, echoed
    parameters, named scalar metrics, and emitted artifact names.

    Serialization is key-sorted with metric values rounded to 12 significant
    digits, so identical inputs, parameters, and seed reproduce the report
    byte for byte. No timestamps are recorded.
    """

    command: str
    inputs: dict[str, str] = field(default_factory=dict)
    parameters: dict[str, object] = field(default_factory=dict)
    metrics: dict[str, object] = field(default_factory=dict)
    artifacts: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        payload = {
            "command": self.command,
            "inputs": dict(self.inputs),
            "parameters": dict(self.parameters),
            "metrics": {k: _round_metric(v) for k, v in self.metrics.items()},
            "artifacts": sorted(self.artifacts),
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def write_report(report: MetricReport, path: str | Path) -> None:
    atomic_write_bytes(path, report.to_json().encode("utf-8"))


def load_report(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
