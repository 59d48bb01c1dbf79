"""
Disk cache for assembled matrices.

File layout: one JSON header line, then the matrix as little-endian f64
in row-major order.
"""
from pathlib import Path
from typing import Callable, Optional
import hashlib
import json
import logging

import numpy as np

logger = logging.getLogger(__name__)


def matrix_key(vertices, M: int, tag, cutoff: Optional[int] = None) -> str:
    """sha256 over (domain vertices, M, direction/time tag, Phi)"""
    payload = {
        "vertices": np.round(np.asarray(vertices, dtype=float), 15).tolist(),
        "M": int(M),
        "tag": tag,
        "cutoff": cutoff,
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def save_matrix(path: Path, matrix: np.ndarray, header: Optional[dict] = None) -> None:
    matrix = np.ascontiguousarray(matrix, dtype='<f8')
    head = dict(header or {})
    head["shape"] = list(matrix.shape)
    head["dtype"] = "<f8"
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'wb') as fh:
        fh.write(json.dumps(head, sort_keys=True).encode() + b"\n")
        fh.write(matrix.tobytes(order='C'))


def load_matrix(path: Path):
    """Returns (matrix, header)"""
    with open(path, 'rb') as fh:
        header = json.loads(fh.readline().decode())
        payload = fh.read()
    shape = tuple(header["shape"])
    expected = int(np.prod(shape)) * 8
    if len(payload) != expected:
        raise ValueError(f"matrix cache file {path} holds {len(payload)} bytes, expected {expected}")
    matrix = np.frombuffer(payload, dtype='<f8').reshape(shape).astype(float)
    return matrix, header


def cached_matrix(cache_dir: str, key: str, build: Callable[[], np.ndarray], header: Optional[dict] = None) -> np.ndarray:
    """Load the matrix stored under key, or build and store it. An empty cache_dir disables caching."""
    if not cache_dir:
        return build()
    path = Path(cache_dir) / f"{key}.mat"
    if path.exists():
        try:
            matrix, _ = load_matrix(path)
            return matrix
        except (ValueError, KeyError, json.JSONDecodeError) as e:
            logger.warning(f"Ignoring unreadable matrix cache file {path}: {e}")
    matrix = build()
    save_matrix(path, matrix, header)
    logger.debug(f"Stored matrix {key[:12]} with shape {matrix.shape}")
    return matrix
