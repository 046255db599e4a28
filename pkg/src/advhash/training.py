"""Adversarial training: batch similarity graph, the generator objective and
its analytic gradients, the discriminator margin objective, and the
alternating Adam loop.

Per batch of rows x_i (relaxed codes b_i = tanh(W x_i), sparse vectors
s_i = G(b_i), synthetic features xh_i = psi @ s_i, discriminator energy D):

  generator loss  = mean ||xh_i - x_i||^2
                  + alpha * mean q(b_i)          q = r - ||b||^2 (default)
                                                  or +||b||^2 (literal switch)
                  + lam * mean sparsity(s_i)      l1 (default) or l2 norm
                  + gamma / N^2 * sum_ij ||b_i - b_j|| * S(i, j)
                  + adv_weight * mean D(xh_i)

  discriminator loss = mean [ D(x_i) + max(0, beta - D(xh_i)) ]

Each step treats the other player's parameters as constants. Batch sums are
divided by N (the graph double sum by N^2) so hyperparameters do not depend
on the batch size.
"""

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import NumericError, ShapeError
from .model import (
    AdvHashModel,
    discriminator_forward,
    init_model,
    leaky_relu,
    leaky_relu_grad,
)
from .numerics import AdamState, RngStream, adam_step

SPARSITY_NORMS = ("l1", "l2")
RECON_NORMS = ("l2sq", "l2")
TRACE_BOUND = -1   # quantization term r - ||b||^2, from the distance bound
TRACE_LITERAL = +1  # quantization term +||b||^2


@dataclass
class TrainConfig:
    """All training hyperparameters and ablation switches."""

    bits: int = 32
    alpha: float = 1e-3          # quantization pressure
    lam: float = 1e-4            # sparsity weight
    gamma: float = 1e-4          # similarity-graph weight
    beta: float = 0.1            # discriminator energy margin
    sigma: float = None          # similarity bandwidth; None = 1 / mean pairwise
                                 # distance of the first training batch
    adv_weight: float = 1.0      # generator-side adversarial coupling
    m: int = None                # sparse width; None = 2 * input dim
    batch_size: int = 500
    epochs: int = 30
    lr: float = 1e-2
    weight_decay: float = 5e-4
    master_seed: int = 0
    use_adversarial: bool = True
    trace_sign: int = TRACE_BOUND
    sparsity_norm: str = "l1"
    recon_norm: str = "l2sq"     # squared norm (default) or plain l2 norm
    disc_hidden: int = 50
    leaky_slope: float = 0.01
    gen_depth: int = 1

    def validate(self):
        if self.bits < 1:
            raise ValueError(f"bits must be >= 1, got {self.bits}")
        if self.beta < 0:
            raise ValueError(f"margin beta must be >= 0, got {self.beta}")
        if self.batch_size < 2:
            raise ValueError(f"batch_size must be >= 2, got {self.batch_size}")
        if self.trace_sign not in (TRACE_BOUND, TRACE_LITERAL):
            raise ValueError(f"trace_sign must be -1 or +1, got {self.trace_sign}")
        if self.sparsity_norm not in SPARSITY_NORMS:
            raise ValueError(f"sparsity_norm must be one of {SPARSITY_NORMS}")
        if self.recon_norm not in RECON_NORMS:
            raise ValueError(f"recon_norm must be one of {RECON_NORMS}")
        for name in ("alpha", "lam", "gamma", "beta", "adv_weight", "lr", "weight_decay"):
            v = getattr(self, name)
            if v is not None and not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")

    def resolved(self, d: int) -> "TrainConfig":
        """Copy with data-dependent defaults filled in for input dim d."""
        self.validate()
        cfg = replace(self)
        if cfg.m is None:
            cfg.m = 2 * d
        if not cfg.use_adversarial:
            cfg.adv_weight = 0.0
        return cfg


CONFIG_FIELDS = tuple(f.name for f in fields(TrainConfig))


@dataclass
class BatchGraph:
    """Within-batch similarity matrix S(i,j) = exp(-sigma * ||x_i - x_j||)."""

    s: np.ndarray


@dataclass
class TrainHistory:
    """One record per completed epoch."""

    gen_loss: list = field(default_factory=list)
    disc_loss: list = field(default_factory=list)
    recon_mse: list = field(default_factory=list)
    mean_abs_code: list = field(default_factory=list)
    real_energy: list = field(default_factory=list)
    synth_energy: list = field(default_factory=list)

    def append(self, gen_loss, disc_loss, recon_mse, mean_abs_code, real_energy, synth_energy):
        self.gen_loss.append(gen_loss)
        self.disc_loss.append(disc_loss)
        self.recon_mse.append(recon_mse)
        self.mean_abs_code.append(mean_abs_code)
        self.real_energy.append(real_energy)
        self.synth_energy.append(synth_energy)

    def __len__(self):
        return len(self.gen_loss)


def pairwise_euclidean(x: np.ndarray) -> np.ndarray:
    """All-pairs Euclidean distances of the rows of x.

    Gram-matrix based, with near-zero entries recomputed by direct
    subtraction so identical rows give a distance of exactly zero.
    """
    x = np.asarray(x, dtype=np.float64)
    g = x @ x.T
    sq = np.diagonal(g).copy()
    d2 = sq[:, None] + sq[None, :] - 2.0 * g
    d2 = 0.5 * (d2 + d2.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    thresh = 64.0 * np.finfo(np.float64).eps * np.maximum(sq[:, None] + sq[None, :], 1.0)
    suspect = np.argwhere(d2 <= thresh)
    for k0 in range(0, len(suspect), 8192):
        pairs = suspect[k0:k0 + 8192]
        diff = x[pairs[:, 0]] - x[pairs[:, 1]]
        d2[pairs[:, 0], pairs[:, 1]] = np.einsum("ij,ij->i", diff, diff)
    return np.sqrt(d2)


def batch_similarity(x_batch: np.ndarray, sigma: float) -> BatchGraph:
    """Gaussian-kernel affinities exp(-sigma * ||x_i - x_j||) within a batch."""
    x_batch = np.asarray(x_batch, dtype=np.float64)
    if x_batch.ndim != 2 or x_batch.shape[0] < 2:
        raise ShapeError(f"need a 2-D batch with >= 2 rows, got shape {x_batch.shape}")
    if not np.all(np.isfinite(x_batch)):
        raise NumericError("batch contains non-finite values")
    s = np.exp(-sigma * pairwise_euclidean(x_batch))
    np.fill_diagonal(s, 1.0)
    return BatchGraph(s=s)


def graph_loss(b_hat: np.ndarray, graph: BatchGraph) -> float:
    """Sum over pairs of ||b_i - b_j|| * S(i,j); zero iff all rows coincide."""
    b_hat = np.asarray(b_hat, dtype=np.float64)
    if b_hat.shape[0] != graph.s.shape[0]:
        raise ShapeError(f"{b_hat.shape[0]} codes but {graph.s.shape[0]}-node graph")
    return float((pairwise_euclidean(b_hat) * graph.s).sum())


def _graph_grad(b_hat: np.ndarray, graph: BatchGraph):
    """Loss sum_ij ||b_i - b_j|| S(i,j) and its gradient w.r.t. b rows."""
    dn = pairwise_euclidean(b_hat)
    loss = float((dn * graph.s).sum())
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(dn > 0.0, graph.s / dn, 0.0)
    grad = 2.0 * (w.sum(axis=1)[:, None] * b_hat - w @ b_hat)
    return loss, grad


def _auto_sigma(x_batch: np.ndarray) -> float:
    n = x_batch.shape[0]
    dn = pairwise_euclidean(x_batch)
    mean = dn.sum() / (n * (n - 1)) if n > 1 else 0.0
    return 1.0 / mean if mean > 0 else 1.0


def _check_finite(value: float, term: str, what: str):
    if not math.isfinite(value):
        raise NumericError(f"{what} loss term '{term}' is non-finite")


def _generator_forward_full(model: AdvHashModel, x_batch: np.ndarray):
    """Forward pass keeping every intermediate needed for backprop."""
    gen = model.generator
    z = x_batch @ model.encoder.w.T
    b_hat = np.tanh(z)
    pre = []
    acts = [b_hat]
    out = b_hat
    for w, bias in zip(gen.weights, gen.biases):
        p = out @ w.T + bias
        pre.append(p)
        out = leaky_relu(p, gen.leaky_slope)
        acts.append(out)
    xh = out @ model.measurement.psi.T
    return b_hat, pre, acts, out, xh


def _discriminator_input_grad(disc, a: np.ndarray):
    """Energies D(a) per row and the gradient of D w.r.t. its input rows."""
    d = a.shape[1]
    z, h, u = discriminator_forward(disc, a)
    energies = np.mean(u * u, axis=1)
    grad = (2.0 / d) * ((leaky_relu_grad(z, disc.leaky_slope) * (u @ disc.dec_w)) @ disc.enc_w - u)
    return energies, grad


def generator_loss_and_grads(model: AdvHashModel, x_batch: np.ndarray, cfg: TrainConfig,
                             graph: BatchGraph = None):
    """Generator objective and exact gradients for encoder + generator params.

    Discriminator parameters are treated as constants. Returns
    (loss, grads, stats) where grads is ordered like
    model.trainable_generator_params() and stats carries per-batch
    diagnostics (recon_mse, mean_abs_code, synth_energy).
    """
    x_batch = np.asarray(x_batch, dtype=np.float64)
    n, d = x_batch.shape
    if n < 1:
        raise ShapeError("empty batch")
    gen = model.generator
    slope = gen.leaky_slope
    r = model.bits

    b_hat, pre, acts, s_out, xh = _generator_forward_full(model, x_batch)
    residual = xh - x_batch

    if cfg.recon_norm == "l2sq":
        loss = float(np.einsum("ij,ij->", residual, residual)) / n
        d_xh = (2.0 / n) * residual
    else:
        norms = np.linalg.norm(residual, axis=1)
        loss = float(norms.mean())
        safe = np.where(norms > 0.0, norms, 1.0)
        d_xh = np.where(norms[:, None] > 0.0, residual / safe[:, None], 0.0) / n
    _check_finite(loss, "reconstruction", "generator")

    synth_energy = 0.0
    if cfg.adv_weight != 0.0:
        energies, d_energy = _discriminator_input_grad(model.discriminator, xh)
        synth_energy = float(energies.mean())
        term = cfg.adv_weight * synth_energy
        _check_finite(term, "adversarial-energy", "generator")
        loss += term
        d_xh += (cfg.adv_weight / n) * d_energy

    d_s = d_xh @ model.measurement.psi

    if cfg.lam != 0.0:
        if cfg.sparsity_norm == "l1":
            term = cfg.lam * float(np.abs(s_out).sum()) / n
            d_s = d_s + (cfg.lam / n) * np.sign(s_out)
        else:
            norms = np.linalg.norm(s_out, axis=1)
            term = cfg.lam * float(norms.mean())
            safe = np.where(norms > 0.0, norms, 1.0)
            d_s = d_s + (cfg.lam / n) * np.where(norms[:, None] > 0.0, s_out / safe[:, None], 0.0)
        _check_finite(term, "sparsity", "generator")
        loss += term

    # backprop through the generator stack
    grad_w = [None] * gen.depth
    grad_b = [None] * gen.depth
    upstream = d_s
    for k in range(gen.depth - 1, -1, -1):
        d_pre = upstream * leaky_relu_grad(pre[k], slope)
        grad_w[k] = d_pre.T @ acts[k]
        grad_b[k] = d_pre.sum(axis=0)
        upstream = d_pre @ gen.weights[k]
    d_b_hat = upstream

    if cfg.alpha != 0.0:
        sq = np.einsum("ij,ij->i", b_hat, b_hat)
        if cfg.trace_sign == TRACE_BOUND:
            term = cfg.alpha * float((r - sq).mean())
            d_b_hat = d_b_hat - (2.0 * cfg.alpha / n) * b_hat
        else:
            term = cfg.alpha * float(sq.mean())
            d_b_hat = d_b_hat + (2.0 * cfg.alpha / n) * b_hat
        _check_finite(term, "quantization", "generator")
        loss += term

    if cfg.gamma != 0.0:
        if graph is None:
            if cfg.sigma is None:
                raise ValueError("graph term enabled but sigma is unresolved and no graph given")
            graph = batch_similarity(x_batch, cfg.sigma)
        g_loss, g_grad = _graph_grad(b_hat, graph)
        term = cfg.gamma * g_loss / (n * n)
        _check_finite(term, "graph", "generator")
        loss += term
        d_b_hat = d_b_hat + (cfg.gamma / (n * n)) * g_grad

    d_z = d_b_hat * (1.0 - b_hat * b_hat)
    grad_enc = d_z.T @ x_batch

    grads = [grad_enc]
    for k in range(gen.depth):
        grads += [grad_w[k], grad_b[k]]
    stats = {
        "recon_mse": float(np.mean(residual * residual)),
        "mean_abs_code": float(np.abs(b_hat).mean()),
        "synth_energy": synth_energy,
    }
    return loss, grads, stats


def discriminator_loss_and_grads(model: AdvHashModel, x_batch: np.ndarray, cfg: TrainConfig):
    """Margin objective and exact gradients for the discriminator parameters.

    Encoder and generator are treated as constants. The hinge term and its
    gradient are exactly zero for synthetic items whose energy is already at
    or above the margin. Returns (loss, grads, stats).
    """
    x_batch = np.asarray(x_batch, dtype=np.float64)
    n, d = x_batch.shape
    disc = model.discriminator

    _, _, _, _, xh = _generator_forward_full(model, x_batch)

    z_r, h_r, u_r = discriminator_forward(disc, x_batch)
    e_real = np.mean(u_r * u_r, axis=1)
    z_s, h_s, u_s = discriminator_forward(disc, xh)
    e_syn = np.mean(u_s * u_s, axis=1)

    hinge = np.maximum(0.0, cfg.beta - e_syn)
    loss = float(e_real.mean() + hinge.mean())
    _check_finite(loss, "margin", "discriminator")

    active = (e_syn < cfg.beta).astype(np.float64)

    def side_grads(a, z, h, u, item_w):
        wu = item_w[:, None] * u * (2.0 / d)
        d_dec_w = wu.T @ h
        d_dec_b = wu.sum(axis=0)
        d_z = (wu @ disc.dec_w) * leaky_relu_grad(z, disc.leaky_slope)
        d_enc_w = d_z.T @ a
        d_enc_b = d_z.sum(axis=0)
        return d_enc_w, d_enc_b, d_dec_w, d_dec_b

    w_real = np.full(n, 1.0 / n)
    w_syn = -active / n
    g_real = side_grads(x_batch, z_r, h_r, u_r, w_real)
    g_syn = side_grads(xh, z_s, h_s, u_s, w_syn)
    grads = [gr + gs for gr, gs in zip(g_real, g_syn)]
    stats = {
        "real_energy": float(e_real.mean()),
        "synth_energy": float(e_syn.mean()),
    }
    return loss, grads, stats


def train(x: np.ndarray, cfg: TrainConfig):
    """Alternating optimization over shuffled batches.

    Per batch: one Adam step on the discriminator objective (skipped when
    adversarial training is off), then one Adam step on the generator
    objective. Returns (model, history) with one history record per epoch.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] < 2:
        raise ShapeError(f"training data must be n x d with d >= 2, got {x.shape}")
    n, d = x.shape
    cfg = cfg.resolved(d)
    batch = min(cfg.batch_size, n)
    if n < batch:
        raise ValueError(f"need at least {batch} rows, got {n}")

    model = init_model(d, cfg.bits, cfg.m, cfg.disc_hidden, cfg.master_seed,
                       leaky_slope=cfg.leaky_slope, gen_depth=cfg.gen_depth, config=cfg)
    gen_params, gen_names = model.trainable_generator_params()
    disc_params, disc_names = model.discriminator_params()
    gen_state = AdamState.for_params(gen_params)
    disc_state = AdamState.for_params(disc_params)
    shuffle_rng = RngStream(cfg.master_seed, "shuffle")

    history = TrainHistory()
    for epoch in range(cfg.epochs):
        perm = shuffle_rng.permutation(n)
        sums = {"gen": 0.0, "disc": 0.0, "recon": 0.0, "code": 0.0, "real_e": 0.0, "syn_e": 0.0}
        batches = 0
        for start in range(0, n - batch + 1, batch):
            xb = x[perm[start:start + batch]]
            if cfg.sigma is None:
                cfg.sigma = _auto_sigma(xb)
            try:
                # divergence shows up as non-finite losses, reported below;
                # the transient overflow itself is expected and silenced
                with np.errstate(over="ignore", invalid="ignore"):
                    if cfg.use_adversarial:
                        d_loss, d_grads, d_stats = discriminator_loss_and_grads(model, xb, cfg)
                        adam_step(disc_params, d_grads, disc_state, cfg.lr, cfg.weight_decay,
                                  names=disc_names)
                        sums["disc"] += d_loss
                        sums["real_e"] += d_stats["real_energy"]
                        sums["syn_e"] += d_stats["synth_energy"]
                    graph = batch_similarity(xb, cfg.sigma) if cfg.gamma != 0.0 else None
                    g_loss, g_grads, g_stats = generator_loss_and_grads(model, xb, cfg, graph)
                    adam_step(gen_params, g_grads, gen_state, cfg.lr, cfg.weight_decay,
                              names=gen_names)
            except NumericError as err:
                raise NumericError(f"training diverged at epoch {epoch}, "
                                   f"batch {batches}: {err}") from err
            sums["gen"] += g_loss
            sums["recon"] += g_stats["recon_mse"]
            sums["code"] += g_stats["mean_abs_code"]
            batches += 1
        k = max(batches, 1)
        history.append(sums["gen"] / k, sums["disc"] / k, sums["recon"] / k,
                       sums["code"] / k, sums["real_e"] / k, sums["syn_e"] / k)
    return model, history
