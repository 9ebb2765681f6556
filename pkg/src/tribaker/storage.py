"""Binary matrix/vector/raster files, CSV tables and the on-disk result cache."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
MATRIX_MAGIC = b"TRIBAKER-MAT"
VECTOR_MAGIC = b"TRIBAKER-VEC"
RASTER_MAGIC = b"TRIBAKER-RAS"


class CacheError(RuntimeError):
    pass


class FormatError(ValueError):
    pass


def _header(magic: bytes) -> bytes:
    # 12-byte magic + 4-byte little-endian version = 16 bytes
    return magic + struct.pack("<I", FORMAT_VERSION)


def _check_header(raw: bytes, magic: bytes):
    if len(raw) < 16 or raw[:12] != magic:
        raise FormatError(f"bad magic, expected {magic!r}")
    (version,) = struct.unpack("<I", raw[12:16])
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}")


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _atomic_write(path: Path, data: bytes):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "wb") as fh:
        fh.write(data)
    os.chmod(tmp, 0o644)
    os.replace(tmp, path)


def _complex_payload(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<c16").tobytes()


def encode_matrix(M: np.ndarray) -> bytes:
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix files hold square matrices only")
    return _header(MATRIX_MAGIC) + struct.pack("<Q", M.shape[0]) + _complex_payload(M)


def decode_matrix(raw: bytes) -> np.ndarray:
    _check_header(raw, MATRIX_MAGIC)
    (dim,) = struct.unpack("<Q", raw[16:24])
    body = raw[24:]
    if len(body) != 16 * dim * dim:
        raise FormatError(f"truncated matrix payload: {len(body)} bytes for dim {dim}")
    return np.frombuffer(body, dtype="<c16").reshape(dim, dim).astype(complex)


def encode_vector(v: np.ndarray) -> bytes:
    v = np.asarray(v).ravel()
    return _header(VECTOR_MAGIC) + struct.pack("<Q", v.size) + _complex_payload(v)


def decode_vector(raw: bytes) -> np.ndarray:
    _check_header(raw, VECTOR_MAGIC)
    (dim,) = struct.unpack("<Q", raw[16:24])
    body = raw[24:]
    if len(body) != 16 * dim:
        raise FormatError(f"truncated vector payload: {len(body)} bytes for dim {dim}")
    return np.frombuffer(body, dtype="<c16").astype(complex)


def encode_raster(values: np.ndarray) -> bytes:
    values = np.asarray(values, dtype="<f8")
    n_q, n_p = values.shape
    return _header(RASTER_MAGIC) + struct.pack("<QQ", n_q, n_p) + np.ascontiguousarray(values).tobytes()


def decode_raster(raw: bytes) -> np.ndarray:
    _check_header(raw, RASTER_MAGIC)
    n_q, n_p = struct.unpack("<QQ", raw[16:32])
    body = raw[32:]
    if len(body) != 8 * n_q * n_p:
        raise FormatError("truncated raster payload")
    return np.frombuffer(body, dtype="<f8").reshape(n_q, n_p).copy()


def write_json(path, obj):
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"
    _atomic_write(Path(path), text.encode())


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o)}")


def write_with_sidecar(path, payload: bytes, meta: dict):
    """Write ``payload`` and ``<path>.json`` holding ``meta`` plus the payload hash."""
    path = Path(path)
    _atomic_write(path, payload)
    write_json(path.with_name(path.name + ".json"), {**meta, "sha256": sha256_bytes(payload)})


def read_with_sidecar(path) -> tuple:
    """Return ``(payload, meta)``; raises :class:`CacheError` on a hash mismatch."""
    path = Path(path)
    payload = path.read_bytes()
    meta = json.loads(path.with_name(path.name + ".json").read_text())
    if meta.get("sha256") != sha256_bytes(payload):
        raise CacheError(f"content hash mismatch for {path}")
    return payload, meta


def save_matrix(path, M, meta: dict):
    write_with_sidecar(path, encode_matrix(M), meta)


def load_matrix(path) -> tuple:
    payload, meta = read_with_sidecar(path)
    return decode_matrix(payload), meta


def save_vector(path, v, meta: dict):
    write_with_sidecar(path, encode_vector(v), meta)


def load_vector(path) -> tuple:
    payload, meta = read_with_sidecar(path)
    return decode_vector(payload), meta


def save_raster(path, values, meta: dict):
    write_with_sidecar(path, encode_raster(values), meta)


def load_raster(path) -> tuple:
    payload, meta = read_with_sidecar(path)
    return decode_raster(payload), meta


def fmt(x) -> str:
    """Deterministic text for CSV cells (shortest round-trip repr for floats)."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])


def read_csv(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# Orbit, spectrum and field tables
# ---------------------------------------------------------------------------


def orbit_rows(orbits):
    from .symbolic import orbit_points

    for orbit in orbits:
        for j, pt in enumerate(orbit_points(orbit)):
            yield orbit.L, orbit.word, j, float(pt.q), float(pt.p)


ORBIT_HEADER = ["period", "canonical_word", "point_index", "q", "p"]
SURVIVAL_HEADER = ["t", "surviving_fraction", "n_samples", "seed"]
SPECTRUM_HEADER = ["n", "n_over_N", "re_z", "im_z", "modulus", "gamma"]
FWL_HEADER = ["l", "N", "N_mu", "gamma_c"]
PERFORMANCE_HEADER = ["family", "k", "l", "N_POs", "basis_size", "effective_rank", "P", "epsilon", "floor"]
MATCHED_HEADER = ["family", "k", "l", "N_POs", "re_z_exact", "im_z_exact", "re_z_po", "im_z_po", "distance"]
FIELD_HEADER = ["q", "p", "value"]


def spectrum_rows(z):
    z = np.asarray(z)
    with np.errstate(divide="ignore"):
        gamma = -2 * np.log(np.abs(z))
    N = len(z)
    for n, (zz, g) in enumerate(zip(z, gamma), 1):
        yield n, n / N, zz.real, zz.imag, abs(zz), g


def field_rows(values):
    values = np.asarray(values)
    n_q, n_p = values.shape
    for a in range(n_q):
        for b in range(n_p):
            yield (a + 0.5) / n_q, (b + 0.5) / n_p, values[a, b]


# ---------------------------------------------------------------------------
# Result cache
# ---------------------------------------------------------------------------


def content_key(obj) -> str:
    """sha256 of the canonical JSON form of ``obj``."""
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_json_default)
    return hashlib.sha256(text.encode()).hexdigest()


class ResultCache:
    """Write-once, read-many store of matrices and spectra keyed by content hash.

    Corrupt entries are reported with a warning and treated as missing.
    """

    def __init__(self, root):
        self.root = Path(root)

    def _path(self, kind: str, key: str, suffix: str) -> Path:
        return self.root / kind / f"{key}{suffix}"

    def get_matrix(self, key: str):
        path = self._path("matrix", key, ".bin")
        if not path.exists():
            return None
        try:
            return load_matrix(path)[0]
        except (CacheError, FormatError, OSError, ValueError) as exc:
            logger.warning("cache entry %s unreadable (%s); recomputing", path, exc)
            return None

    def put_matrix(self, key: str, M, meta: dict):
        path = self._path("matrix", key, ".bin")
        if not path.exists():
            try:
                save_matrix(path, M, meta)
            except OSError as exc:
                raise CacheError(f"cannot write cache entry {path}: {exc}") from exc

    def get_arrays(self, kind: str, key: str):
        path = self._path(kind, key, ".npz")
        side = path.with_name(path.name + ".json")
        if not path.exists() or not side.exists():
            return None
        try:
            payload, _ = read_with_sidecar(path)
            with np.load(io.BytesIO(payload), allow_pickle=False) as data:
                return {name: data[name] for name in data.files}
        except (CacheError, OSError, ValueError, json.JSONDecodeError) as exc:
            logger.warning("cache entry %s unreadable (%s); recomputing", path, exc)
            return None

    def put_arrays(self, kind: str, key: str, arrays: dict, meta: dict):
        path = self._path(kind, key, ".npz")
        if path.exists():
            return
        buf = io.BytesIO()
        np.savez(buf, **arrays)
        try:
            write_with_sidecar(path, buf.getvalue(), meta)
        except OSError as exc:
            raise CacheError(f"cannot write cache entry {path}: {exc}") from exc
