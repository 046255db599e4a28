"""Hot numeric kernels with numba-compiled and pure-numpy implementations.

Set ADVHASH_NO_NUMBA=1 to force the numpy fallbacks (or leave numba
uninstalled; the fallback is selected automatically). Both paths produce
identical integer results; the Jacobi paths agree to rounding.
"""

import math
import os

import numpy as np

_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)


def _env_disabled() -> bool:
    return os.environ.get("ADVHASH_NO_NUMBA", "").strip().lower() in ("1", "true", "yes")


NUMBA_ENABLED = False
if not _env_disabled():
    try:
        from numba import njit

        NUMBA_ENABLED = True
    except ImportError:
        NUMBA_ENABLED = False

if not NUMBA_ENABLED:
    def njit(*args, **kwargs):
        # identity decorator so the numba source below stays importable
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


# ---------------------------------------------------------------------------
# Hamming distance scan over bit-packed codes (uint64 words per item)
# ---------------------------------------------------------------------------

def _hamming_scan_numpy(db: np.ndarray, query: np.ndarray) -> np.ndarray:
    """XOR + popcount of every db row against one query, numpy path."""
    return np.bitwise_count(db ^ query[np.newaxis, :]).sum(axis=1, dtype=np.uint32)


@njit(cache=True)
def _hamming_scan_numba(db, query):  # pragma: no cover - exercised via dispatch
    n, w = db.shape
    out = np.empty(n, dtype=np.uint32)
    for i in range(n):
        acc = np.uint64(0)
        for k in range(w):
            x = db[i, k] ^ query[k]
            x -= (x >> np.uint64(1)) & _M1
            x = (x & _M2) + ((x >> np.uint64(2)) & _M2)
            x = (x + (x >> np.uint64(4))) & _M4
            acc += (x * _H01) >> np.uint64(56)
        out[i] = acc
    return out


def hamming_scan(db: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Hamming distance from `query` to every row of `db` (packed words)."""
    db = np.ascontiguousarray(db, dtype=np.uint64)
    query = np.ascontiguousarray(query, dtype=np.uint64)
    if NUMBA_ENABLED:
        return _hamming_scan_numba(db, query)
    return _hamming_scan_numpy(db, query)


# ---------------------------------------------------------------------------
# Cyclic one-sided Jacobi sweeps (in place on m; rotations accumulated in v)
# ---------------------------------------------------------------------------

def _jacobi_sweeps_numpy(m: np.ndarray, v: np.ndarray, tol: float, max_sweeps: int) -> int:
    rows, n = m.shape
    for sweep in range(max_sweeps):
        rotated = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                app = float(m[:, i] @ m[:, i])
                aqq = float(m[:, j] @ m[:, j])
                apq = float(m[:, i] @ m[:, j])
                if app == 0.0 or aqq == 0.0 or apq == 0.0:
                    continue
                if abs(apq) <= tol * math.sqrt(app * aqq):
                    continue
                rotated = True
                zeta = (aqq - app) / (2.0 * apq)
                sgn = 1.0 if zeta >= 0.0 else -1.0
                t = sgn / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                mi = m[:, i].copy()
                m[:, i] = c * mi - s * m[:, j]
                m[:, j] = s * mi + c * m[:, j]
                vi = v[:, i].copy()
                v[:, i] = c * vi - s * v[:, j]
                v[:, j] = s * vi + c * v[:, j]
        if not rotated:
            return sweep
    return max_sweeps


@njit(cache=True)
def _jacobi_sweeps_numba(m, v, tol, max_sweeps):  # pragma: no cover
    rows, n = m.shape
    for sweep in range(max_sweeps):
        rotated = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                app = 0.0
                aqq = 0.0
                apq = 0.0
                for k in range(rows):
                    app += m[k, i] * m[k, i]
                    aqq += m[k, j] * m[k, j]
                    apq += m[k, i] * m[k, j]
                if app == 0.0 or aqq == 0.0 or apq == 0.0:
                    continue
                if abs(apq) <= tol * math.sqrt(app * aqq):
                    continue
                rotated = True
                zeta = (aqq - app) / (2.0 * apq)
                sgn = 1.0 if zeta >= 0.0 else -1.0
                t = sgn / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                for k in range(rows):
                    tmp = m[k, i]
                    m[k, i] = c * tmp - s * m[k, j]
                    m[k, j] = s * tmp + c * m[k, j]
                for k in range(n):
                    tmp = v[k, i]
                    v[k, i] = c * tmp - s * v[k, j]
                    v[k, j] = s * tmp + c * v[k, j]
        if not rotated:
            return sweep
    return max_sweeps


def jacobi_sweeps(m: np.ndarray, v: np.ndarray, tol: float = 1e-14, max_sweeps: int = 60) -> int:
    """Run cyclic one-sided Jacobi rotations until column pairs are orthogonal.

    Mutates `m` (working matrix) and `v` (accumulated right rotations);
    returns the number of sweeps used.
    """
    if NUMBA_ENABLED:
        return _jacobi_sweeps_numba(m, v, tol, max_sweeps)
    return _jacobi_sweeps_numpy(m, v, tol, max_sweeps)
