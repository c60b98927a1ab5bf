from __future__ import annotations

import hashlib
import os
import tempfile
from pathlib import Path

import numpy as np
import numpy.typing as npt

from slepiankit.utils.log import logger

#: Directory for cached Slepian bases; caching is off when unset
CACHE_DIR_ENV = "SLEPIANKIT_CACHE_DIR"

MAGIC = b"SLPB1"


def get_cache_dir() -> Path | None:
    """Cache directory from the environment, or None if caching is disabled"""
    value = os.environ.get(CACHE_DIR_ENV, "")
    return Path(value) if value else None


def cache_path(cache_dir: Path, L: int, region_key: str) -> Path:
    """File holding the basis of bandlimit ``L`` for a canonical region string"""
    digest = hashlib.sha256(f"{L}|{region_key}".encode()).hexdigest()[:24]
    return cache_dir / f"slepian-L{L}-{digest}.slpb"


def save_basis(
    path: Path,
    eigenvalues: npt.NDArray[np.float64],
    vectors: npt.NDArray[np.complex128],
) -> None:
    """Write eigenvalues and eigenvectors in the SLPB1 layout.

    Layout: magic ``SLPB1``, little-endian float64 eigenvalues, then the
    eigenvector coefficients as little-endian (re, im) float64 pairs, one
    vector after another. The file appears atomically.
    """
    payload = (
        MAGIC
        + np.ascontiguousarray(eigenvalues, dtype="<f8").tobytes()
        + np.ascontiguousarray(vectors, dtype="<c16").tobytes()
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.NamedTemporaryFile(
        dir=path.parent, prefix=".slpb-", delete=False
    ) as f:
        f.write(payload)
        tmp_name = f.name
    Path(tmp_name).replace(path)
    logger.debug("Cached Slepian basis in %s", path)


def load_basis(
    path: Path, L: int
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.complex128]] | None:
    """Read a basis written by `save_basis`; None if absent or unusable"""
    if not path.is_file():
        return None
    data = path.read_bytes()
    n = L * L
    expected = len(MAGIC) + 8 * n + 16 * n * n
    if not data.startswith(MAGIC) or len(data) != expected:
        logger.warning("Ignoring corrupt basis cache file %s", path)
        return None
    offset = len(MAGIC)
    eigenvalues = np.frombuffer(data, dtype="<f8", count=n, offset=offset)
    vectors = np.frombuffer(data, dtype="<c16", count=n * n, offset=offset + 8 * n)
    logger.debug("Loaded cached Slepian basis from %s", path)
    return (
        eigenvalues.astype(np.float64),
        vectors.astype(np.complex128).reshape(n, n),
    )
