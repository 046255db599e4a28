"""Deterministic numeric substrate: seeded RNG streams, dense matrix ops,
the Adam optimizer, a central-difference gradient oracle, and a small-matrix
SVD built on cyclic one-sided Jacobi rotations.

All arithmetic is float64. Every random draw flows through an explicit
RngStream, so equal seeds reproduce results bit for bit.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, ShapeError
from .kernels import jacobi_sweeps

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def _philox_key(seed: int, label: str) -> np.ndarray:
    digest = hashlib.sha256(f"{seed}\x1f{label}".encode()).digest()
    return np.frombuffer(digest[:16], dtype="<u8")


@dataclass
class RngStream:
    """Counter-based PRNG stream keyed by (master seed, label).

    Identical (seed, label) pairs yield identical draw sequences on every
    platform; distinct labels give statistically independent streams.
    """

    seed: int
    label: str

    def __post_init__(self):
        self._gen = np.random.Generator(np.random.Philox(key=_philox_key(self.seed, self.label)))

    def normal(self, shape, std: float = 1.0) -> np.ndarray:
        return self._gen.normal(0.0, std, size=shape)

    def uniform(self, shape, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        return self._gen.uniform(low, high, size=shape)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def integers(self, low, high, size=None) -> np.ndarray:
        return self._gen.integers(low, high, size=size)


def gaussian_matrix(rows: int, cols: int, variance: float, rng: RngStream) -> np.ndarray:
    """rows x cols matrix of i.i.d. N(0, variance) draws from `rng`."""
    if rows < 1 or cols < 1:
        raise ValueError(f"matrix dimensions must be >= 1, got {rows}x{cols}")
    if not variance > 0:
        raise ValueError(f"variance must be positive, got {variance}")
    return rng.normal((rows, cols), std=float(np.sqrt(variance)))


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Standard row-major matrix product with explicit shape checking."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.ndim}-D and {b.ndim}-D")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"inner dimensions differ: {a.shape} x {b.shape}")
    return a @ b


@dataclass
class AdamState:
    """First/second moment accumulators plus the step counter."""

    first: list = field(default_factory=list)
    second: list = field(default_factory=list)
    step: int = 0
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS

    @classmethod
    def for_params(cls, params, beta1: float = ADAM_BETA1, beta2: float = ADAM_BETA2,
                   eps: float = ADAM_EPS) -> "AdamState":
        return cls(first=[np.zeros_like(p) for p in params],
                   second=[np.zeros_like(p) for p in params],
                   step=0, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(params, grads, state: AdamState, lr: float, weight_decay: float = 0.0,
              names=None):
    """One bias-corrected Adam update, in place on `params`.

    Weight decay is coupled L2: `weight_decay * param` is added to each
    gradient before the moment updates. Returns (params, state).
    """
    if len(params) != len(grads):
        raise ShapeError(f"{len(params)} params but {len(grads)} grads")
    if names is None:
        names = [f"param[{i}]" for i in range(len(params))]
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise ShapeError(f"{names[i]}: param shape {p.shape} != grad shape {g.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for {names[i]}")
        g = g + weight_decay * p
        m = state.first[i]
        v = state.second[i]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state


def finite_diff_grad(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Entrywise central difference (f(x+h*e) - f(x-h*e)) / 2h."""
    if not h > 0:
        raise ValueError(f"step size must be positive, got {h}")
    x = np.array(x, dtype=np.float64, copy=True, order="C")
    grad = np.zeros_like(x)
    flat_x = x.ravel()
    flat_g = grad.ravel()
    for idx in range(flat_x.size):
        orig = flat_x[idx]
        flat_x[idx] = orig + h
        fp = f(x)
        flat_x[idx] = orig - h
        fm = f(x)
        flat_x[idx] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericError(f"objective returned non-finite value near entry {idx}")
        flat_g[idx] = (fp - fm) / (2.0 * h)
    return grad


SVD_SMALL_MAX_DIM = 256


def _complete_orthonormal(u: np.ndarray, known: int) -> None:
    """Fill columns >= `known` of u with an orthonormal complement."""
    n = u.shape[0]
    col = known
    for cand in range(n):
        if col >= u.shape[1]:
            break
        vec = np.zeros(n)
        vec[cand] = 1.0
        for k in range(col):
            vec -= (u[:, k] @ vec) * u[:, k]
        norm = np.linalg.norm(vec)
        if norm > 1e-8:
            u[:, col] = vec / norm
            col += 1


def jacobi_svd(a: np.ndarray):
    """Full SVD a = U diag(S) V^T of a square matrix via one-sided Jacobi.

    Singular values are returned nonincreasing; zero singular directions get
    an arbitrary orthonormal completion of U.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    m = a.copy()
    v = np.eye(n)
    jacobi_sweeps(m, v)
    s = np.linalg.norm(m, axis=0)
    order = np.argsort(-s, kind="stable")
    s = s[order]
    m = m[:, order]
    v = v[:, order]
    u = np.zeros_like(m)
    rank = 0
    for k in range(n):
        if s[k] > 0.0:
            u[:, k] = m[:, k] / s[k]
            rank = k + 1
    if rank < n:
        _complete_orthonormal(u, rank)
        s[rank:] = 0.0
    return u, s, v


def svd_small(a: np.ndarray):
    """SVD of a small square matrix (side <= 256), for Procrustes-style steps."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"svd_small expects a square matrix, got shape {a.shape}")
    if a.shape[0] > SVD_SMALL_MAX_DIM:
        raise ValueError(f"svd_small is limited to {SVD_SMALL_MAX_DIM}x{SVD_SMALL_MAX_DIM}, "
                         f"got {a.shape[0]}")
    return jacobi_svd(a)
