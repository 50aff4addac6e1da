"""
Utility functions for the cusp recovery pipeline.
Handles JSON/CSV I/O, the far-field archive format, timestamps and logging.
"""

import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Dict, Iterable, List, Sequence

import numpy as np
from pythonjsonlogger import jsonlogger

from .errors import ArchiveError

ARCHIVE_FORMAT_VERSION = 1

logger = logging.getLogger(__name__)


def setup_logging(level: str = "INFO", json_format: bool = True) -> None:
    """Install a single stream handler on the root logger."""
    handler = logging.StreamHandler(sys.stderr)
    if json_format:
        handler.setFormatter(jsonlogger.JsonFormatter(
            "%(asctime)s %(levelname)s %(name)s %(message)s"
        ))
    else:
        handler.setFormatter(logging.Formatter(
            "%(asctime)s %(levelname)s %(name)s: %(message)s"
        ))
    root = logging.getLogger()
    for existing in list(root.handlers):
        root.removeHandler(existing)
    root.addHandler(handler)
    root.setLevel(level.upper())


def get_timestamp() -> str:
    """Get current timestamp in ISO format."""
    return datetime.now().isoformat()


def format_float(value: float) -> str:
    """Fixed 17-significant-digit rendering used in every output file."""
    return format(float(value), ".17g")


def to_jsonable(obj: Any) -> Any:
    """Convert numpy scalars/arrays and tuples into plain JSON types."""
    if isinstance(obj, dict):
        return {str(key): to_jsonable(val) for key, val in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(val) for val in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    return obj


def load_json(file_path: str) -> Dict[str, Any]:
    """Load JSON data from file."""
    try:
        with open(file_path, 'r', encoding='utf-8') as f:
            return json.load(f)
    except FileNotFoundError:
        raise FileNotFoundError(f"Input file not found: {file_path}")
    except json.JSONDecodeError as e:
        raise ValueError(f"Invalid JSON format in {file_path}: {e}")


def _atomic_write(text: str, file_path: str) -> None:
    """Write-temp-then-rename so readers never see a partial file."""
    directory = os.path.dirname(os.path.abspath(file_path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='') as f:
            f.write(text)
        os.replace(tmp_path, file_path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def _json_float(value: float) -> str:
    if math.isnan(value):
        return "NaN"
    if math.isinf(value):
        return "Infinity" if value > 0 else "-Infinity"
    text = format_float(value)
    if not any(c in text for c in ".e"):
        text += ".0"
    return text


def dump_json(data: Any, indent: int = 2) -> str:
    """
    JSON text with sorted keys and every float written to 17 significant digits.

    ``json.dumps`` always renders floats with repr, so the walk is explicit.
    """
    def encode(obj: Any, level: int) -> str:
        pad = " " * (indent * (level + 1))
        close = " " * (indent * level)
        if isinstance(obj, dict):
            if not obj:
                return "{}"
            items = [f"{pad}{json.dumps(key, ensure_ascii=False)}: {encode(obj[key], level + 1)}"
                     for key in sorted(obj)]
            return "{\n" + ",\n".join(items) + "\n" + close + "}"
        if isinstance(obj, list):
            if not obj:
                return "[]"
            return "[\n" + ",\n".join(pad + encode(v, level + 1) for v in obj) + "\n" + close + "]"
        if isinstance(obj, float):
            return _json_float(obj)
        return json.dumps(obj, ensure_ascii=False)

    return encode(to_jsonable(data), 0)


def save_json(data: Any, file_path: str) -> None:
    """Save data to JSON file with stable key order and float formatting."""
    _atomic_write(dump_json(data) + "\n", file_path)


def save_csv(header: Sequence[str], rows: Iterable[Sequence[float]], file_path: str) -> None:
    """Save numeric rows as CSV with 17-significant-digit floats."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(list(header))
    for row in rows:
        writer.writerow([format_float(v) for v in row])
    _atomic_write(buffer.getvalue(), file_path)


def load_csv(file_path: str) -> Dict[str, np.ndarray]:
    """Load a numeric CSV written by ``save_csv`` into named columns."""
    with open(file_path, 'r', encoding='utf-8') as f:
        reader = csv.reader(f)
        header = next(reader)
        data = [[float(v) for v in row] for row in reader if row]
    table = np.asarray(data, dtype=float).reshape(-1, len(header))
    return {name: table[:, i] for i, name in enumerate(header)}


@dataclass
class FarFieldArchive:
    """
    On-disk collection of far-field matrices keyed by wavenumber.

    Angles are implicit: ``m`` observation and ``n_inc`` incidence angles,
    uniformly spaced on [0, 2π) starting at 0.
    """

    m: int
    n_inc: int
    matrices: Dict[float, np.ndarray] = field(default_factory=dict)

    @property
    def k_list(self) -> List[float]:
        return sorted(self.matrices)

    def add(self, k: float, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=complex)
        if values.shape != (self.m, self.n_inc):
            raise ArchiveError(
                f"matrix at k={k} has shape {values.shape}, expected {(self.m, self.n_inc)}"
            )
        self.matrices[float(k)] = values

    def has(self, k: float, atol: float = 1e-12) -> bool:
        return any(abs(k - existing) <= atol for existing in self.matrices)

    def get(self, k: float, atol: float = 1e-12) -> np.ndarray:
        for existing, values in self.matrices.items():
            if abs(k - existing) <= atol:
                return values
        raise ArchiveError(f"wavenumber {k} not present in archive")

    def to_dict(self) -> Dict[str, Any]:
        k_list = self.k_list
        matrices = []
        for k in k_list:
            flat = self.matrices[k].reshape(-1)
            interleaved = np.empty(2 * flat.size, dtype=float)
            interleaved[0::2] = flat.real
            interleaved[1::2] = flat.imag
            matrices.append(interleaved.tolist())
        return {
            "format_version": ARCHIVE_FORMAT_VERSION,
            "k_list": k_list,
            "obs_angles_count": self.m,
            "inc_angles_count": self.n_inc,
            "matrices": matrices,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FarFieldArchive":
        try:
            version = data["format_version"]
            k_list = [float(k) for k in data["k_list"]]
            m = int(data["obs_angles_count"])
            n_inc = int(data["inc_angles_count"])
            raw = data["matrices"]
        except (KeyError, TypeError) as e:
            raise ArchiveError(f"archive missing field: {e}")
        if version != ARCHIVE_FORMAT_VERSION:
            raise ArchiveError(f"unsupported archive format_version {version}")
        if len(raw) != len(k_list):
            raise ArchiveError("k_list and matrices have different lengths")
        if any(b <= a for a, b in zip(k_list, k_list[1:])):
            raise ArchiveError("k_list must be strictly increasing")
        archive = cls(m=m, n_inc=n_inc)
        for k, flat in zip(k_list, raw):
            flat = np.asarray(flat, dtype=float)
            if flat.size != 2 * m * n_inc:
                raise ArchiveError(
                    f"matrix at k={k} has {flat.size} reals, expected {2 * m * n_inc}"
                )
            archive.add(k, (flat[0::2] + 1j * flat[1::2]).reshape(m, n_inc))
        return archive

    def save(self, file_path: str) -> None:
        # plain json.dumps keeps repr floats, which round-trip bit-exactly
        _atomic_write(json.dumps(self.to_dict()) + "\n", file_path)

    @classmethod
    def load(cls, file_path: str) -> "FarFieldArchive":
        try:
            data = load_json(file_path)
        except ValueError as e:
            raise ArchiveError(str(e))
        return cls.from_dict(data)

    @classmethod
    def load_or_create(cls, file_path: str, m: int, n_inc: int) -> "FarFieldArchive":
        """Open an existing archive for resuming, or start an empty one."""
        if not os.path.exists(file_path):
            return cls(m=m, n_inc=n_inc)
        archive = cls.load(file_path)
        if (archive.m, archive.n_inc) != (m, n_inc):
            raise ArchiveError(
                f"existing archive {file_path} has m={archive.m}, n_inc={archive.n_inc}; "
                f"config asks for m={m}, n_inc={n_inc}"
            )
        logger.info("Resuming archive", extra={"path": file_path, "stored": len(archive.matrices)})
        return archive


def uniform_angles(count: int) -> np.ndarray:
    """``count`` angles uniformly spaced on [0, 2π) starting at 0."""
    return 2.0 * np.pi * np.arange(count) / count
