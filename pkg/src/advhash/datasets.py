"""Dataset ingestion (fvecs/bvecs/IDX image files) and synthetic mixtures."""

from dataclasses import dataclass

import numpy as np

from .errors import FormatError
from .numerics import RngStream

IDX_IMAGE_MAGIC = 0x00000803


@dataclass
class Dataset:
    x: np.ndarray            # n x d, float64
    source: str = ""
    preprocessing: str = ""  # record of centering/scaling applied, if any

    @property
    def count(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]


def _read_length_prefixed(path: str, item_dtype, widen) -> np.ndarray:
    """Shared fvecs/bvecs reader: per record an int32 dim then dim items."""
    raw = np.fromfile(path, dtype=np.uint8)
    item_size = np.dtype(item_dtype).itemsize
    if raw.size >= 4:
        # fast path: uniform records, validated in bulk
        d0 = int(raw[:4].view("<i4")[0])
        rec_size = 4 + d0 * item_size
        if d0 > 0 and raw.size % rec_size == 0:
            table = raw.reshape(-1, rec_size)
            dims = table[:, :4].copy().view("<i4").ravel()
            if np.all(dims == d0):
                return widen(table[:, 4:].copy().view(item_dtype))
    offset = 0
    dim = None
    rows = []
    while offset < raw.size:
        if offset + 4 > raw.size:
            raise FormatError(f"{path}: truncated dimension field at byte {offset}")
        d = int(raw[offset:offset + 4].view("<i4")[0])
        if d <= 0:
            raise FormatError(f"{path}: non-positive dimension {d} at byte {offset}")
        if dim is None:
            dim = d
        elif d != dim:
            raise FormatError(f"{path}: dimension changed from {dim} to {d} at byte {offset}")
        offset += 4
        end = offset + d * item_size
        if end > raw.size:
            raise FormatError(f"{path}: truncated record at byte {offset} "
                              f"(needs {d * item_size} bytes, {raw.size - offset} left)")
        rows.append(raw[offset:end].view(item_dtype))
        offset = end
    if not rows:
        raise FormatError(f"{path}: empty file")
    return widen(np.vstack(rows))


def read_fvecs(path: str) -> Dataset:
    """Little-endian fvecs: int32 dim then dim float32 values per record."""
    x = _read_length_prefixed(path, "<f4", lambda a: a.astype(np.float64))
    return Dataset(x=x, source=f"{path} (fvecs)")


def read_bvecs(path: str) -> Dataset:
    """Little-endian bvecs: int32 dim then dim bytes per record."""
    x = _read_length_prefixed(path, np.uint8, lambda a: a.astype(np.float64))
    return Dataset(x=x, source=f"{path} (bvecs)")


def write_fvecs(path: str, x: np.ndarray) -> None:
    """Write rows as fvecs (values stored as float32)."""
    x = np.asarray(x)
    n, d = x.shape
    rec = np.empty((n, 4 + d * 4), dtype=np.uint8)
    rec[:, :4] = np.full((n, 1), d, dtype="<i4").view(np.uint8)
    rec[:, 4:] = np.ascontiguousarray(x.astype("<f4")).view(np.uint8)
    rec.tofile(path)


def read_idx_images(path: str) -> Dataset:
    """IDX image file (big-endian header), pixels scaled to [0,1]."""
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size < 16:
        raise FormatError(f"{path}: too short for an IDX image header")
    magic, n, rows, cols = raw[:16].view(">i4")
    if magic != IDX_IMAGE_MAGIC:
        raise FormatError(f"{path}: bad magic 0x{int(magic):08x}, expected 0x{IDX_IMAGE_MAGIC:08x}")
    need = 16 + int(n) * int(rows) * int(cols)
    if raw.size < need:
        raise FormatError(f"{path}: truncated pixel section "
                          f"({raw.size - 16} bytes, expected {need - 16})")
    pixels = raw[16:need].reshape(int(n), int(rows) * int(cols))
    return Dataset(x=pixels.astype(np.float64) / 255.0, source=f"{path} (idx)",
                   preprocessing="pixels scaled by 1/255")


def synthetic_mixture(k: int, d: int, n: int, spread: float, rng: RngStream) -> Dataset:
    """Gaussian mixture: k centers ~ N(0, I), points assigned round-robin,
    point = center + N(0, spread^2 I)."""
    if k < 1:
        raise ValueError(f"need at least one cluster, got {k}")
    if n < k:
        raise ValueError(f"need at least {k} points for {k} clusters, got {n}")
    centers = rng.normal((k, d))
    noise = rng.normal((n, d), std=spread) if spread > 0 else np.zeros((n, d))
    x = centers[np.arange(n) % k] + noise
    return Dataset(x=x, source=f"synthetic k={k} d={d} n={n} spread={spread}")


@dataclass
class Preprocessing:
    """Fitted centering/scaling transform.

    Fit once on a reference set and apply to every related file, so database
    and query vectors stay in the same frame (mean-centering with a shared
    shift leaves all pairwise Euclidean distances unchanged).
    """

    shift: np.ndarray = None
    scale: float = None

    @property
    def is_identity(self) -> bool:
        return self.shift is None and self.scale is None

    def describe(self) -> str:
        parts = []
        if self.shift is not None:
            parts.append("mean-centered")
        if self.scale is not None:
            parts.append(f"scaled by 1/{self.scale:g}")
        return ", ".join(parts)


def fit_preprocessing(x: np.ndarray, center: bool = False, unit_scale: bool = False) -> Preprocessing:
    """Compute the optional shift (column means) and global scale from x."""
    prep = Preprocessing()
    if center:
        prep.shift = x.mean(axis=0)
    if unit_scale:
        shifted = x - prep.shift if prep.shift is not None else x
        peak = float(np.abs(shifted).max())
        prep.scale = peak if peak > 0 else 1.0
    return prep


def apply_preprocessing(ds: Dataset, prep: Preprocessing) -> Dataset:
    """Apply a fitted transform, recording what was done on the dataset."""
    if prep.is_identity:
        return ds
    x = ds.x
    if prep.shift is not None:
        x = x - prep.shift
    if prep.scale is not None:
        x = x / prep.scale
    note = prep.describe()
    prior = ds.preprocessing
    joined = f"{prior}; {note}" if prior and note else (note or prior)
    return Dataset(x=x, source=ds.source, preprocessing=joined)
