"""Network components: relaxed hash encoder, sparse generator, frozen Gaussian
measurement, and the energy (autoencoder) discriminator.

Dimension chain per model: input d -> code r -> sparse m -> synthetic d.
All forward passes accept a single vector (1-D) or a batch (2-D, one row per
item) and return the matching shape.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError

DEFAULT_LEAKY_SLOPE = 0.01
DEFAULT_DISC_HIDDEN = 50


def leaky_relu(x: np.ndarray, slope: float) -> np.ndarray:
    return np.where(x > 0, x, slope * x)


def leaky_relu_grad(x: np.ndarray, slope: float) -> np.ndarray:
    # derivative at the kink follows the negative branch (0 for plain ReLU)
    return np.where(x > 0, 1.0, slope)


def _as_batch(x, dim: int, what: str):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        if x.shape[0] != dim:
            raise ShapeError(f"{what}: expected length {dim}, got {x.shape[0]}")
        return x[np.newaxis, :], True
    if x.ndim == 2:
        if x.shape[1] != dim:
            raise ShapeError(f"{what}: expected width {dim}, got {x.shape[1]}")
        return x, False
    raise ShapeError(f"{what}: expected 1-D or 2-D input, got {x.ndim}-D")


def _unbatch(out: np.ndarray, was_vector: bool) -> np.ndarray:
    return out[0] if was_vector else out


@dataclass
class HashEncoder:
    """Linear projection w (r x d); relaxed codes tanh(Wx), binary sign(Wx)."""

    w: np.ndarray

    @property
    def bits(self) -> int:
        return self.w.shape[0]

    @property
    def input_dim(self) -> int:
        return self.w.shape[1]


_ONE_INSIDE = float(np.nextafter(1.0, 0.0))


def hash_forward(enc: HashEncoder, x) -> np.ndarray:
    """Relaxed code tanh(Wx); every component lies strictly inside (-1, 1).

    float64 tanh saturates to exactly +/-1 for |z| > ~19, so saturated values
    are nudged to the nearest representable interior value.
    """
    xb, single = _as_batch(x, enc.input_dim, "hash_forward input")
    out = np.tanh(xb @ enc.w.T)
    np.clip(out, -_ONE_INSIDE, _ONE_INSIDE, out=out)
    return _unbatch(out, single)


def encode_binary(enc: HashEncoder, x) -> np.ndarray:
    """Binary code over {-1,+1}: +1 where (Wx) >= 0, else -1."""
    xb, single = _as_batch(x, enc.input_dim, "encode_binary input")
    z = xb @ enc.w.T
    return _unbatch(np.where(z >= 0, 1, -1).astype(np.int8), single)


@dataclass
class SparseGenerator:
    """Stack of fully-connected layers with leaky-rectifier activations.

    weights[0] maps codes (r) to the sparse width m; any further layers are
    m -> m. Depth 1 is the default configuration.
    """

    weights: list
    biases: list
    leaky_slope: float = DEFAULT_LEAKY_SLOPE

    @property
    def code_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def depth(self) -> int:
        return len(self.weights)


def generator_forward(gen: SparseGenerator, b) -> np.ndarray:
    """Sparse vector leaky_relu(W b + bias), applied layer by layer."""
    sb, single = _as_batch(b, gen.code_dim, "generator input")
    out = sb
    for w, bias in zip(gen.weights, gen.biases):
        out = leaky_relu(out @ w.T + bias, gen.leaky_slope)
    return _unbatch(out, single)


@dataclass
class MeasurementMatrix:
    """Fixed random Gaussian map psi (d x m) from sparse space back to inputs.

    Entries are drawn once from N(0, 1/d) and never trained; the array is
    marked read-only to enforce that.
    """

    psi: np.ndarray

    def __post_init__(self):
        self.psi = np.asarray(self.psi, dtype=np.float64)
        self.psi.flags.writeable = False

    @property
    def input_dim(self) -> int:
        return self.psi.shape[0]

    @property
    def sparse_dim(self) -> int:
        return self.psi.shape[1]


def synthesize(meas: MeasurementMatrix, s) -> np.ndarray:
    """Synthetic feature psi @ s; linear in s."""
    sb, single = _as_batch(s, meas.sparse_dim, "synthesize input")
    return _unbatch(sb @ meas.psi.T, single)


@dataclass
class EnergyDiscriminator:
    """Autoencoder d -> hidden -> d whose mean squared reconstruction
    residual is the energy score (nonnegative by construction)."""

    enc_w: np.ndarray
    enc_b: np.ndarray
    dec_w: np.ndarray
    dec_b: np.ndarray
    leaky_slope: float = DEFAULT_LEAKY_SLOPE

    @property
    def input_dim(self) -> int:
        return self.enc_w.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.enc_w.shape[0]


def discriminator_forward(disc: EnergyDiscriminator, a: np.ndarray):
    """Batch forward pass; returns (hidden pre-activation, hidden, residual)."""
    z = a @ disc.enc_w.T + disc.enc_b
    h = leaky_relu(z, disc.leaky_slope)
    residual = h @ disc.dec_w.T + disc.dec_b - a
    return z, h, residual


def discriminator_energy(disc: EnergyDiscriminator, a) -> np.ndarray:
    """Energy = mean squared autoencoder residual, per input."""
    ab, single = _as_batch(a, disc.input_dim, "discriminator input")
    _, _, residual = discriminator_forward(disc, ab)
    energy = np.mean(residual * residual, axis=1)
    return float(energy[0]) if single else energy


@dataclass
class AdvHashModel:
    """Bundle of encoder, generator, measurement, and discriminator."""

    encoder: HashEncoder
    generator: SparseGenerator
    measurement: MeasurementMatrix
    discriminator: EnergyDiscriminator
    config: "object" = field(default=None, repr=False)

    def __post_init__(self):
        d, r = self.encoder.input_dim, self.encoder.bits
        if self.generator.code_dim != r:
            raise ShapeError(f"generator expects {self.generator.code_dim}-bit codes, "
                             f"encoder emits {r}")
        if self.measurement.sparse_dim != self.generator.output_dim:
            raise ShapeError("measurement width does not match generator output "
                             f"({self.measurement.sparse_dim} vs {self.generator.output_dim})")
        if self.measurement.input_dim != d or self.discriminator.input_dim != d:
            raise ShapeError("measurement/discriminator dimension does not match encoder input")

    @property
    def input_dim(self) -> int:
        return self.encoder.input_dim

    @property
    def bits(self) -> int:
        return self.encoder.bits

    @property
    def sparse_dim(self) -> int:
        return self.generator.output_dim

    def trainable_generator_params(self):
        """Encoder + generator parameters, with names, in update order."""
        params = [self.encoder.w]
        names = ["encoder.w"]
        for k, (w, b) in enumerate(zip(self.generator.weights, self.generator.biases)):
            params += [w, b]
            names += [f"generator.w{k}", f"generator.b{k}"]
        return params, names

    def discriminator_params(self):
        d = self.discriminator
        return [d.enc_w, d.enc_b, d.dec_w, d.dec_b], \
            ["disc.enc_w", "disc.enc_b", "disc.dec_w", "disc.dec_b"]


def sparse_code(model: AdvHashModel, x) -> np.ndarray:
    """Composed generator output: G(tanh(Wx))."""
    return generator_forward(model.generator, hash_forward(model.encoder, x))


def reconstruct(model: AdvHashModel, x) -> np.ndarray:
    """Synthetic feature psi @ G(tanh(Wx)); same length as the input."""
    return synthesize(model.measurement, sparse_code(model, x))


def init_model(d: int, r: int, m: int, d_hidden: int, master_seed: int,
               leaky_slope: float = DEFAULT_LEAKY_SLOPE, gen_depth: int = 1,
               config=None) -> AdvHashModel:
    """Fresh model with N(0, 1/fan_in) weights, zero biases, and a frozen
    N(0, 1/d) measurement matrix; each component draws from its own stream."""
    from .numerics import RngStream, gaussian_matrix

    if gen_depth < 1:
        raise ValueError(f"generator depth must be >= 1, got {gen_depth}")
    enc_w = gaussian_matrix(r, d, 1.0 / d, RngStream(master_seed, "encoder"))
    gen_rng = RngStream(master_seed, "generator")
    weights, biases = [], []
    fan_in = r
    for _ in range(gen_depth):
        weights.append(gaussian_matrix(m, fan_in, 1.0 / fan_in, gen_rng))
        biases.append(np.zeros(m))
        fan_in = m
    psi = gaussian_matrix(d, m, 1.0 / d, RngStream(master_seed, "measurement"))
    disc_rng = RngStream(master_seed, "discriminator")
    disc = EnergyDiscriminator(
        enc_w=gaussian_matrix(d_hidden, d, 1.0 / d, disc_rng),
        enc_b=np.zeros(d_hidden),
        dec_w=gaussian_matrix(d, d_hidden, 1.0 / d_hidden, disc_rng),
        dec_b=np.zeros(d),
        leaky_slope=leaky_slope,
    )
    return AdvHashModel(
        encoder=HashEncoder(enc_w),
        generator=SparseGenerator(weights, biases, leaky_slope),
        measurement=MeasurementMatrix(psi),
        discriminator=disc,
        config=config,
    )
