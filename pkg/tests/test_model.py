import numpy as np
import pytest

from advhash.errors import ShapeError
from advhash.model import (
    AdvHashModel,
    EnergyDiscriminator,
    HashEncoder,
    MeasurementMatrix,
    SparseGenerator,
    discriminator_energy,
    encode_binary,
    generator_forward,
    hash_forward,
    init_model,
    reconstruct,
    synthesize,
)
from advhash.numerics import RngStream


def tiny_model(d=4, r=3, m=8, seed=0):
    return init_model(d, r, m, d_hidden=5, master_seed=seed)


class TestHashForward:
    def test_zero_projection(self):
        enc = HashEncoder(np.zeros((3, 4)))
        assert np.array_equal(hash_forward(enc, np.ones(4)), np.zeros(3))

    def test_saturation_and_odd_symmetry(self):
        enc = HashEncoder(np.eye(3))
        out = hash_forward(enc, np.array([50.0, -50.0, 0.0]))
        assert out[0] == pytest.approx(1.0, abs=1e-9)
        assert out[1] == pytest.approx(-1.0, abs=1e-9)
        assert out[2] == 0.0

    def test_hand_case(self):
        enc = HashEncoder(np.array([[1.0, -1.0]]))
        assert hash_forward(enc, np.array([0.5, 0.5]))[0] == 0.0

    def test_open_interval(self):
        enc = HashEncoder(RngStream(1, "w").normal((8, 5), std=10.0))
        out = hash_forward(enc, RngStream(2, "x").normal((200, 5), std=10.0))
        assert np.all(out > -1.0) and np.all(out < 1.0)

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            hash_forward(HashEncoder(np.zeros((2, 3))), np.zeros(4))


class TestEncodeBinary:
    def test_tie_rule(self):
        # projections (0, 0.3, -0.3) -> (+1, +1, -1)
        enc = HashEncoder(np.array([[0.0], [0.3], [-0.3]]))
        assert np.array_equal(encode_binary(enc, np.array([1.0])), [1, 1, -1])

    def test_zero_vector_all_plus_one(self):
        enc = HashEncoder(RngStream(0, "w").normal((6, 4)))
        assert np.array_equal(encode_binary(enc, np.zeros(4)), np.ones(6))

    def test_positive_scale_invariance(self):
        enc = HashEncoder(RngStream(1, "w").normal((8, 5)))
        x = RngStream(2, "x").normal((5,))
        for c in (0.001, 1.0, 1234.5):
            assert np.array_equal(encode_binary(enc, x), encode_binary(enc, c * x))

    def test_agrees_with_sign_of_relaxed(self):
        enc = HashEncoder(RngStream(3, "w").normal((16, 6)))
        x = RngStream(4, "x").normal((50, 6))
        relaxed = hash_forward(enc, x)
        binary = encode_binary(enc, x)
        assert np.array_equal(binary, np.where(relaxed >= 0, 1, -1))


class TestGenerator:
    def test_zero_weights(self):
        gen = SparseGenerator([np.zeros((5, 3))], [np.zeros(5)], leaky_slope=0.0)
        assert np.array_equal(generator_forward(gen, np.ones(3)), np.zeros(5))

    def test_leaky_definition(self):
        gen = SparseGenerator([np.eye(2)], [np.zeros(2)], leaky_slope=0.01)
        out = generator_forward(gen, np.array([2.0, -2.0]))
        assert out == pytest.approx([2.0, -0.02])

    def test_relu_kills_negative(self):
        gen = SparseGenerator([np.eye(3)], [np.zeros(3)], leaky_slope=0.0)
        out = generator_forward(gen, np.array([-1.0, -5.0, -0.1]))
        assert np.array_equal(out, np.zeros(3))

    def test_nonnegative_and_support_shrinks(self):
        # with slope 0, lowering any pre-activation can only shrink the support
        w = RngStream(5, "w").normal((10, 4))
        gen = SparseGenerator([w], [np.zeros(10)], leaky_slope=0.0)
        b = RngStream(6, "b").normal((4,))
        out = generator_forward(gen, b)
        assert np.all(out >= 0)
        gen_lower = SparseGenerator([w], [np.full(10, -0.5)], leaky_slope=0.0)
        lower = generator_forward(gen_lower, b)
        assert set(np.flatnonzero(lower)) <= set(np.flatnonzero(out))

    def test_depth_two_forward(self):
        gen = SparseGenerator([np.ones((4, 2)), np.eye(4)],
                              [np.zeros(4), np.zeros(4)], leaky_slope=0.5)
        out = generator_forward(gen, np.array([1.0, 1.0]))
        assert np.array_equal(out, np.full(4, 2.0))


class TestMeasurement:
    def test_synthesize_zero(self):
        meas = MeasurementMatrix(RngStream(0, "psi").normal((4, 9)))
        assert np.array_equal(synthesize(meas, np.zeros(9)), np.zeros(4))

    def test_linearity(self):
        meas = MeasurementMatrix(RngStream(1, "psi").normal((4, 9)))
        a = RngStream(2, "a").normal((9,))
        b = RngStream(3, "b").normal((9,))
        assert np.allclose(synthesize(meas, a + b), synthesize(meas, a) + synthesize(meas, b))

    def test_hand_product(self):
        meas = MeasurementMatrix(np.array([[1.0, 0.0], [0.0, 2.0]]))
        assert np.array_equal(synthesize(meas, np.array([3.0, 4.0])), [3.0, 8.0])

    def test_frozen(self):
        meas = MeasurementMatrix(RngStream(4, "psi").normal((3, 6)))
        with pytest.raises(ValueError):
            meas.psi[0, 0] = 1.0

    def test_entry_variance_near_one_over_d(self):
        d, m = 100, 200
        model = init_model(d, 8, m, 10, master_seed=11)
        var = model.measurement.psi.var()
        assert 0.9 / d <= var <= 1.1 / d


class TestDiscriminator:
    def zero_disc(self, d=4, dl=3):
        return EnergyDiscriminator(np.zeros((dl, d)), np.zeros(dl),
                                   np.zeros((d, dl)), np.zeros(d))

    def test_zero_everything(self):
        assert discriminator_energy(self.zero_disc(), np.zeros(4)) == 0.0

    def test_zero_weights_energy_is_mean_square(self):
        a = np.array([1.0, -2.0, 3.0, 0.5])
        assert discriminator_energy(self.zero_disc(), a) == pytest.approx(np.mean(a * a))

    def test_nonnegative_on_random_inputs(self):
        model = tiny_model()
        x = RngStream(7, "x").normal((1000, 4))
        energies = discriminator_energy(model.discriminator, x)
        assert np.all(energies >= 0)

    def test_rerun_invariance(self):
        model = tiny_model()
        a = RngStream(8, "a").normal((4,))
        assert discriminator_energy(model.discriminator, a) == \
            discriminator_energy(model.discriminator, a)


class TestReconstructAndBundle:
    def test_zero_weights_reconstruction(self):
        model = tiny_model()
        zero = AdvHashModel(
            encoder=HashEncoder(np.zeros((3, 4))),
            generator=SparseGenerator([np.zeros((8, 3))], [np.zeros(8)]),
            measurement=model.measurement,
            discriminator=model.discriminator,
        )
        x = RngStream(9, "x").normal((4,))
        xh = reconstruct(zero, x)
        assert np.array_equal(xh, np.zeros(4))
        assert np.mean((xh - x) ** 2) == pytest.approx(np.mean(x * x))

    def test_output_length(self):
        model = tiny_model()
        assert reconstruct(model, np.zeros(4)).shape == (4,)
        assert reconstruct(model, np.zeros((7, 4))).shape == (7, 4)

    def test_dimension_chain_enforced(self):
        model = tiny_model()
        with pytest.raises(ShapeError):
            AdvHashModel(
                encoder=HashEncoder(np.zeros((2, 4))),   # r=2 but generator expects 3
                generator=model.generator,
                measurement=model.measurement,
                discriminator=model.discriminator,
            )

    def test_init_is_deterministic(self):
        a = init_model(6, 4, 12, 5, master_seed=3)
        b = init_model(6, 4, 12, 5, master_seed=3)
        assert np.array_equal(a.encoder.w, b.encoder.w)
        assert np.array_equal(a.measurement.psi, b.measurement.psi)
        assert np.array_equal(a.discriminator.enc_w, b.discriminator.enc_w)

    def test_training_improves_held_out_reconstruction(self):
        from advhash.datasets import synthetic_mixture
        from advhash.training import TrainConfig, train

        ds = synthetic_mixture(5, 12, 400, 0.3, RngStream(30, "mix"))
        held_out = synthetic_mixture(5, 12, 80, 0.3, RngStream(31, "ho")).x
        cfg = TrainConfig(bits=8, epochs=8, batch_size=100, master_seed=6)
        trained, _ = train(ds.x, cfg)
        untrained = init_model(12, 8, cfg.resolved(12).m, cfg.disc_hidden, 6)

        def mse(model):
            return float(np.mean((reconstruct(model, held_out) - held_out) ** 2))

        assert mse(trained) < mse(untrained)
