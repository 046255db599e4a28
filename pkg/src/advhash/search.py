"""Bit-packed code storage, Hamming distance and ranking, and exact
Euclidean ground-truth generation.

Packing convention: codes over {-1,+1} become bits (+1 -> 1), stored
little-endian within 64-bit words, bit k of an item at word k // 64,
position k % 64. Unused high bits of the last word are always zero.

Ties in every ranking break by ascending database index.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .kernels import hamming_scan

WORD_BITS = 64


@dataclass
class PackedCodeSet:
    """count items of `bits`-wide codes, packed into uint64 words."""

    count: int
    bits: int
    data: np.ndarray  # shape (count, words_per_item), dtype uint64

    @property
    def words_per_item(self) -> int:
        return self.data.shape[1]

    def item(self, i: int) -> np.ndarray:
        return self.data[i]


def words_needed(bits: int) -> int:
    return (bits + WORD_BITS - 1) // WORD_BITS


def pack_codes(codes: np.ndarray) -> PackedCodeSet:
    """Pack an n x r matrix over {-1,+1} into canonical tail-zeroed words."""
    codes = np.asarray(codes)
    if codes.ndim == 1:
        codes = codes[np.newaxis, :]
    n, r = codes.shape
    bad = np.argwhere(np.abs(codes) != 1)
    if len(bad):
        i, j = bad[0]
        raise ValueError(f"code entry at item {i}, bit {j} is {codes[i, j]!r}, expected -1 or +1")
    words = words_needed(r)
    bits = np.zeros((n, words * WORD_BITS), dtype=np.uint8)
    bits[:, :r] = codes == 1
    packed = np.packbits(bits.reshape(n, words, WORD_BITS), axis=2, bitorder="little")
    return PackedCodeSet(count=n, bits=r, data=packed.reshape(n, words * 8).view("<u8"))


def unpack_codes(packed: PackedCodeSet) -> np.ndarray:
    """Inverse of pack_codes; returns an int8 matrix over {-1,+1}."""
    raw = np.ascontiguousarray(packed.data).view(np.uint8)
    bits = np.unpackbits(raw, axis=1, bitorder="little")[:, :packed.bits]
    return (bits.astype(np.int8) * 2 - 1)


def hamming(a: np.ndarray, b: np.ndarray, bits: int) -> int:
    """Number of differing code positions between two packed items."""
    a = np.asarray(a, dtype=np.uint64)
    b = np.asarray(b, dtype=np.uint64)
    if a.shape != b.shape:
        raise ShapeError(f"packed items differ in word count: {a.shape} vs {b.shape}")
    return int(np.bitwise_count(a ^ b).sum())


def hamming_distances(query: np.ndarray, db: PackedCodeSet) -> np.ndarray:
    """Hamming distance from one packed query item to every db item."""
    if query.shape[0] != db.words_per_item:
        raise ShapeError(f"query has {query.shape[0]} words, db items have {db.words_per_item}")
    return hamming_scan(db.data, query)


def sort_dtype(bits: int):
    """Narrowest unsigned dtype holding distances, for fast stable sorts."""
    return np.uint16 if bits <= 0xFFFF else np.uint32


def rank_by_hamming(query: np.ndarray, db: PackedCodeSet) -> np.ndarray:
    """All db indices ordered by ascending Hamming distance, ties by index."""
    if db.count == 0:
        return np.empty(0, dtype=np.int64)
    dist = hamming_distances(query, db).astype(sort_dtype(db.bits))
    return np.argsort(dist, kind="stable")


def exact_topn_euclidean(queries: np.ndarray, db: np.ndarray, n_neighbors: int,
                         block: int = 256) -> np.ndarray:
    """Exact top-N Euclidean neighbors per query, brute force.

    Returns a (num_queries, n_neighbors) int32 index matrix, each row sorted
    by ascending distance with ties broken by ascending index.
    """
    queries = np.asarray(queries, dtype=np.float64)
    db = np.asarray(db, dtype=np.float64)
    if queries.ndim == 1:
        queries = queries[np.newaxis, :]
    if n_neighbors > db.shape[0]:
        raise ValueError(f"requested {n_neighbors} neighbors from a db of {db.shape[0]}")
    if queries.shape[1] != db.shape[1]:
        raise ShapeError(f"query dim {queries.shape[1]} != db dim {db.shape[1]}")
    db_sq = np.einsum("ij,ij->i", db, db)
    out = np.empty((queries.shape[0], n_neighbors), dtype=np.int32)
    for start in range(0, queries.shape[0], block):
        q = queries[start:start + block]
        d2 = db_sq[np.newaxis, :] - 2.0 * (q @ db.T)   # query norm omitted: constant per row
        for row in range(q.shape[0]):
            out[start + row] = _topn_with_ties(d2[row], n_neighbors)
    return out


def _topn_with_ties(dist: np.ndarray, n: int) -> np.ndarray:
    """Indices of the n smallest distances, ties resolved by ascending index."""
    if n == len(dist):
        candidates = np.arange(len(dist))
    else:
        kth = np.partition(dist, n - 1)[n - 1]
        candidates = np.flatnonzero(dist <= kth)
    order = np.argsort(dist[candidates], kind="stable")
    return candidates[order[:n]].astype(np.int32)
