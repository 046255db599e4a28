"""Retrieval metrics over Hamming rankings: average precision, precision@K,
recall curves, plus reconstruction error and the Euclidean-vs-Hamming
rank-correlation diagnostic.
"""

from dataclasses import dataclass, field

import numpy as np

from .model import AdvHashModel, reconstruct
from .numerics import RngStream
from .search import PackedCodeSet, hamming_distances, sort_dtype

DEFAULT_PRECISION_KS = (100,)
DEFAULT_RECALL_NS = (1, 10, 100, 1000)
SPEARMAN_PAIR_BUDGET = 100_000


@dataclass
class EvalReport:
    map: float
    precision_at: dict
    recall_curves: dict          # curve name ("R-10") -> list of (T, recall)
    recon_mse: float = None
    distance_spearman: float = None
    per_query_ap: np.ndarray = field(default=None, repr=False)


def average_precision(ranking, gt) -> float:
    """AP of a ranked index list against a ground-truth set, over the full
    ranking: mean over gt items of (hits so far / position)."""
    gt = set(int(g) for g in gt)
    if not gt:
        raise ValueError("ground-truth set is empty")
    hits = 0
    total = 0.0
    for pos, idx in enumerate(ranking, start=1):
        if int(idx) in gt:
            hits += 1
            total += hits / pos
    return total / len(gt)


def precision_at_k(ranking, gt, k: int) -> float:
    """Fraction of the top-k ranked items that are relevant."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > len(ranking):
        raise ValueError(f"k={k} exceeds ranking length {len(ranking)}")
    gt = set(int(g) for g in gt)
    return sum(1 for idx in ranking[:k] if int(idx) in gt) / k


def recall_curve(ranking, gt_n, t_grid):
    """Recall of the N ground-truth neighbors within the top T, per T."""
    gt = set(int(g) for g in gt_n)
    if not gt:
        raise ValueError("ground-truth set is empty")
    t_grid = list(t_grid)
    if any(b <= a for a, b in zip(t_grid, t_grid[1:])):
        raise ValueError("t_grid must be strictly ascending")
    points = []
    found = 0
    pos = 0
    for t in t_grid:
        while pos < min(t, len(ranking)):
            if int(ranking[pos]) in gt:
                found += 1
            pos += 1
        points.append((t, found / len(gt)))
    return points


def default_t_grid(n: int):
    """1-2-5 decade grid up to and including n."""
    grid = []
    base = 1
    while base <= n:
        for mult in (1, 2, 5):
            t = base * mult
            if t <= n:
                grid.append(t)
        base *= 10
    if not grid or grid[-1] != n:
        grid.append(n)
    return grid


def _gt_ranks(dist: np.ndarray, gt_row: np.ndarray, bits: int) -> np.ndarray:
    """1-based rank positions of gt items under distance-then-index order,
    aligned with the gt row (which is ordered by true distance)."""
    order = np.argsort(dist.astype(sort_dtype(bits)), kind="stable")
    inverse = np.empty(len(dist), dtype=np.int64)
    inverse[order] = np.arange(1, len(dist) + 1)
    return inverse[gt_row]


def _rankdata_average(v: np.ndarray) -> np.ndarray:
    """Ranks with ties assigned their average rank (1-based)."""
    order = np.argsort(v, kind="stable")
    sv = v[order]
    ranks = np.empty(len(v), dtype=np.float64)
    boundaries = np.flatnonzero(np.concatenate(([True], sv[1:] != sv[:-1], [True])))
    for a, b in zip(boundaries[:-1], boundaries[1:]):
        ranks[order[a:b]] = 0.5 * (a + 1 + b)
    return ranks


def spearman(a: np.ndarray, b: np.ndarray) -> float:
    """Spearman rank correlation with average ranks for ties."""
    ra = _rankdata_average(np.asarray(a, dtype=np.float64))
    rb = _rankdata_average(np.asarray(b, dtype=np.float64))
    ra -= ra.mean()
    rb -= rb.mean()
    denom = np.sqrt((ra @ ra) * (rb @ rb))
    return float(ra @ rb / denom) if denom > 0 else 0.0


def distance_rank_correlation(originals: np.ndarray, codes: PackedCodeSet,
                              seed: int = 0, pairs: int = SPEARMAN_PAIR_BUDGET) -> float:
    """Spearman correlation between Euclidean distances of `originals` and
    Hamming distances of their codes, over seeded sampled pairs.

    Reported as a quasi-isometry diagnostic; the toolkit never asserts a
    target value for it.
    """
    n = originals.shape[0]
    if n < 2:
        return 0.0
    total = n * (n - 1) // 2
    rng = RngStream(seed, "spearman-pairs")
    if total <= pairs:
        ii, jj = np.triu_indices(n, k=1)
    else:
        ii = np.empty(pairs, dtype=np.int64)
        jj = np.empty(pairs, dtype=np.int64)
        drawn = rng.integers(0, n, size=(pairs, 2))
        for k in range(pairs):
            a, b = drawn[k]
            while a == b:
                b = int(rng.integers(0, n))
            ii[k], jj[k] = a, b
    diff = originals[ii] - originals[jj]
    euc = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    unpacked = codes.data
    ham = np.bitwise_count(unpacked[ii] ^ unpacked[jj]).sum(axis=1).astype(np.float64)
    return spearman(euc, ham)


def evaluate(db_codes: PackedCodeSet, query_codes: PackedCodeSet, gt: np.ndarray,
             query_originals: np.ndarray = None, model: AdvHashModel = None,
             precision_ks=DEFAULT_PRECISION_KS, recall_ns=DEFAULT_RECALL_NS,
             t_grid=None, spearman_seed: int = 0) -> EvalReport:
    """Aggregate retrieval metrics for every query against the database.

    gt is a (num_queries, N) index matrix ordered by ascending true distance.
    When `query_originals` (and a model) are supplied, reconstruction error
    and the distance-correlation diagnostic are included.
    """
    if db_codes.bits != query_codes.bits:
        raise ValueError(f"db codes are {db_codes.bits}-bit but queries are {query_codes.bits}-bit")
    gt = np.asarray(gt)
    if gt.ndim != 2 or gt.shape[0] != query_codes.count:
        raise ValueError(f"{query_codes.count} queries but ground truth has shape {gt.shape}")
    n = db_codes.count
    gt_n = gt.shape[1]
    if t_grid is None:
        t_grid = default_t_grid(n)
    ns = [nn for nn in recall_ns if nn <= gt_n]
    max_k = max(precision_ks) if precision_ks else 0
    if max_k > n:
        raise ValueError(f"precision cutoff {max_k} exceeds database size {n}")

    ap = np.empty(query_codes.count)
    prec_sums = {k: 0.0 for k in precision_ks}
    recall_sums = {nn: np.zeros(len(t_grid)) for nn in ns}
    positions = np.arange(1, gt_n + 1, dtype=np.float64)
    for q in range(query_codes.count):
        dist = hamming_distances(query_codes.item(q), db_codes)
        raw_ranks = _gt_ranks(dist, gt[q], db_codes.bits)
        sorted_ranks = np.sort(raw_ranks)
        ap[q] = float((positions / sorted_ranks).sum()) / gt_n
        for k in precision_ks:
            prec_sums[k] += np.searchsorted(sorted_ranks, k, side="right") / k
        for nn in ns:
            head = np.sort(raw_ranks[:nn])
            recall_sums[nn] += np.searchsorted(head, t_grid, side="right") / nn

    nq = query_codes.count
    curves = {f"R-{nn}": [(int(t), float(v / nq)) for t, v in zip(t_grid, recall_sums[nn])]
              for nn in ns}
    report = EvalReport(
        map=float(ap.mean()),
        precision_at={k: float(prec_sums[k] / nq) for k in precision_ks},
        recall_curves=curves,
        per_query_ap=ap,
    )
    if query_originals is not None and model is not None:
        originals = np.asarray(query_originals, dtype=np.float64)
        xh = reconstruct(model, originals)
        report.recon_mse = float(np.mean((xh - originals) ** 2))
        report.distance_spearman = distance_rank_correlation(
            originals, query_codes, seed=spearman_seed)
    return report
