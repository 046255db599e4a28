"""LSH and ITQ baseline encoders sharing the {-1,+1} code contract."""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError
from .model import HashEncoder
from .numerics import RngStream, gaussian_matrix, jacobi_svd, svd_small

ITQ_DEFAULT_ITERS = 50
PCA_MAX_DIM = 1024


def lsh_train(d: int, r: int, rng: RngStream) -> HashEncoder:
    """Data-independent baseline: W ~ N(0,1) i.i.d., codes sign(Wx)."""
    return HashEncoder(w=gaussian_matrix(r, d, 1.0, rng))


@dataclass
class ItqModel:
    """PCA projection plus the learned orthogonal rotation.

    loss_history records the quantization loss after every alternation
    round; it is nonincreasing by the coordinate-descent construction.
    """

    mean: np.ndarray
    pca_w: np.ndarray       # r x d, orthonormal rows
    rotation: np.ndarray    # r x r orthogonal
    loss_history: list = field(default_factory=list, repr=False)
    orth_history: list = field(default_factory=list, repr=False)

    @property
    def bits(self) -> int:
        return self.pca_w.shape[0]

    @property
    def input_dim(self) -> int:
        return self.pca_w.shape[1]


def _pca_directions(x_centered: np.ndarray, r: int) -> np.ndarray:
    """Top-r principal directions (rows) from the covariance matrix."""
    n, d = x_centered.shape
    if d > PCA_MAX_DIM:
        raise ValueError(f"PCA via covariance is limited to d <= {PCA_MAX_DIM}, got {d}")
    cov = (x_centered.T @ x_centered) / max(n - 1, 1)
    u, s, _ = jacobi_svd(cov)
    if s[0] <= 0.0 or s[r - 1] <= s[0] * 1e-12:
        warnings.warn("data is rank deficient; padding principal directions "
                      "with an arbitrary orthonormal complement")
    return u[:, :r].T


def random_orthogonal(r: int, rng: RngStream) -> np.ndarray:
    """Orthogonalized random Gaussian matrix (U V^T of its SVD)."""
    g = gaussian_matrix(r, r, 1.0, rng)
    u, _, v = svd_small(g)
    return u @ v.T


def itq_train(x: np.ndarray, r: int, iters: int = ITQ_DEFAULT_ITERS,
              rng: RngStream = None) -> ItqModel:
    """Mean-center, project to the top-r PCA subspace, then alternate
    binary quantization and orthogonal Procrustes rotation updates."""
    x = np.asarray(x, dtype=np.float64)
    n, d = x.shape
    if n <= r:
        raise ValueError(f"need more samples than bits: n={n}, r={r}")
    if r > d:
        raise ValueError(f"code length {r} exceeds data dimension {d}")
    if rng is None:
        rng = RngStream(0, "itq")
    mean = x.mean(axis=0)
    centered = x - mean
    pca_w = _pca_directions(centered, r)
    v = centered @ pca_w.T                      # n x r projected data
    rotation = random_orthogonal(r, rng)
    history = []
    orth = []
    eye = np.eye(r)
    for _ in range(iters):
        vr = v @ rotation
        b = np.where(vr >= 0, 1.0, -1.0)
        u_m, _, v_m = svd_small(v.T @ b)
        rotation = u_m @ v_m.T
        diff = b - v @ rotation
        history.append(float(np.einsum("ij,ij->", diff, diff)))
        orth.append(float(np.max(np.abs(rotation.T @ rotation - eye))))
    return ItqModel(mean=mean, pca_w=pca_w, rotation=rotation,
                    loss_history=history, orth_history=orth)


def itq_encode(model: ItqModel, x) -> np.ndarray:
    """Code sign(rotation^T @ pca_w @ (x - mean)), +1 on ties."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    xb = x[np.newaxis, :] if single else x
    if xb.shape[1] != model.input_dim:
        raise ShapeError(f"expected dim {model.input_dim}, got {xb.shape[1]}")
    proj = (xb - model.mean) @ model.pca_w.T @ model.rotation
    codes = np.where(proj >= 0, 1, -1).astype(np.int8)
    return codes[0] if single else codes
