"""Finite-difference verification of the analytic training gradients."""

from copy import deepcopy

import numpy as np

from .model import init_model
from .numerics import RngStream, finite_diff_grad
from .training import (
    TrainConfig,
    batch_similarity,
    discriminator_loss_and_grads,
    generator_loss_and_grads,
)

DEFAULT_TOLERANCE = 1e-4
DEFAULT_STEP = 1e-6

# every loss term alone, then everything together
TERM_CONFIGS = [
    ("reconstruction only", dict(alpha=0.0, lam=0.0, gamma=0.0, adv_weight=0.0)),
    ("quantization (bound)", dict(alpha=0.3, lam=0.0, gamma=0.0, adv_weight=0.0)),
    ("quantization (literal)", dict(alpha=0.3, lam=0.0, gamma=0.0, adv_weight=0.0, trace_sign=+1)),
    ("sparsity l1", dict(alpha=0.0, lam=0.2, gamma=0.0, adv_weight=0.0)),
    ("sparsity l2", dict(alpha=0.0, lam=0.2, gamma=0.0, adv_weight=0.0, sparsity_norm="l2")),
    ("graph", dict(alpha=0.0, lam=0.0, gamma=0.5, adv_weight=0.0)),
    ("adversarial energy", dict(alpha=0.0, lam=0.0, gamma=0.0, adv_weight=0.7)),
    ("reconstruction (plain norm)", dict(alpha=0.0, lam=0.0, gamma=0.0, adv_weight=0.0,
                                         recon_norm="l2")),
    ("all terms", dict(alpha=0.3, lam=0.2, gamma=0.5, adv_weight=0.7)),
]


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-5) -> float:
    """Per-parameter relative error: ||a - n||_max over the larger gradient
    scale. The floor absorbs central-difference roundoff (~1e-10 at h=1e-6)
    on parameters whose true gradient is exactly zero."""
    scale = max(float(np.max(np.abs(analytic))), float(np.max(np.abs(numeric))), floor)
    return float(np.max(np.abs(analytic - numeric))) / scale


def _check_side(model, x, cfg, side: str, h: float):
    """Max relative FD error over every parameter of one player."""
    graph = batch_similarity(x, cfg.sigma) if cfg.gamma != 0.0 else None
    if side == "generator":
        _, grads, _ = generator_loss_and_grads(model, x, cfg, graph)
        _, names = model.trainable_generator_params()
    else:
        _, grads, _ = discriminator_loss_and_grads(model, x, cfg)
        _, names = model.discriminator_params()
    worst = 0.0
    for i, name in enumerate(names):
        def objective(mat, _i=i):
            probe = deepcopy(model)
            params = (probe.trainable_generator_params() if side == "generator"
                      else probe.discriminator_params())[0]
            params[_i][...] = mat
            if side == "generator":
                return generator_loss_and_grads(probe, x, cfg, graph)[0]
            return discriminator_loss_and_grads(probe, x, cfg)[0]

        params = (model.trainable_generator_params() if side == "generator"
                  else model.discriminator_params())[0]
        numeric = finite_diff_grad(objective, params[i], h)
        worst = max(worst, relative_error(grads[i], numeric))
    return worst


def run_gradient_check(seed: int = 7, d: int = 8, r: int = 4, m: int = 16, batch: int = 6,
                       h: float = DEFAULT_STEP):
    """Returns [(label, max relative error)] for both losses across term mixes."""
    x = RngStream(seed, "gradcheck-data").normal((batch, d))
    results = []
    for label, overrides in TERM_CONFIGS:
        cfg = TrainConfig(bits=r, m=m, sigma=0.7, **overrides).resolved(d)
        model = init_model(d, r, m, cfg.disc_hidden, seed + 1, config=cfg)
        model.discriminator.enc_b += 0.1 * RngStream(seed + 2, "enc-bias").normal(model.discriminator.enc_b.shape)
        model.discriminator.dec_b += 0.1 * RngStream(seed + 2, "dec-bias").normal(model.discriminator.dec_b.shape)
        results.append((f"generator: {label}", _check_side(model, x, cfg, "generator", h)))

    # discriminator: margin inactive, fully active, and mixed
    base = TrainConfig(bits=r, m=m, sigma=0.7).resolved(d)
    model = init_model(d, r, m, base.disc_hidden, seed + 1, config=base)
    model.discriminator.enc_b += 0.1 * RngStream(seed + 2, "enc-bias").normal(model.discriminator.enc_b.shape)
    model.discriminator.dec_b += 0.1 * RngStream(seed + 2, "dec-bias").normal(model.discriminator.dec_b.shape)
    _, _, stats = discriminator_loss_and_grads(model, x, base)
    mixed_beta = stats["synth_energy"]   # roughly half the hinges active
    high_beta = 50.0 * stats["synth_energy"]  # above every energy, yet small
    for label, beta in [("margin inactive", 0.0), ("margin active", high_beta),
                        ("margin mixed", mixed_beta)]:
        cfg = TrainConfig(bits=r, m=m, sigma=0.7, beta=beta).resolved(d)
        results.append((f"discriminator: {label}", _check_side(model, x, cfg, "discriminator", h)))
    return results
