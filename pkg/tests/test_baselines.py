import numpy as np
import pytest

from advhash.baselines import itq_encode, itq_train, lsh_train, random_orthogonal
from advhash.datasets import synthetic_mixture
from advhash.model import encode_binary
from advhash.numerics import RngStream
from advhash.search import pack_codes, rank_by_hamming


class TestLsh:
    def test_deterministic(self):
        a = lsh_train(6, 4, RngStream(1, "lsh"))
        b = lsh_train(6, 4, RngStream(1, "lsh"))
        assert np.array_equal(a.w, b.w)

    def test_single_bit_odd_symmetry(self):
        enc = lsh_train(5, 1, RngStream(2, "lsh"))
        x = RngStream(3, "x").normal((5,))
        if (enc.w @ x)[0] != 0.0:
            assert encode_binary(enc, x)[0] == -encode_binary(enc, -x)[0]

    def test_projection_scale(self):
        enc = lsh_train(400, 64, RngStream(4, "lsh"))
        assert 0.9 <= enc.w.var() <= 1.1  # standard normal entries


class TestItq:
    def test_zero_iters_keeps_initial_rotation(self):
        x = RngStream(5, "x").normal((30, 6))
        model = itq_train(x, 4, iters=0, rng=RngStream(6, "itq"))
        expected = random_orthogonal(4, RngStream(6, "itq"))
        assert np.array_equal(model.rotation, expected)
        assert model.loss_history == []

    def test_rotation_orthogonal_every_iteration(self):
        x = RngStream(7, "x").normal((60, 8))
        # re-run with increasing iteration counts; every stopping point must
        # hold the orthogonality residual bound
        for iters in (1, 3, 10, 25, 50):
            model = itq_train(x, 6, iters=iters, rng=RngStream(8, "itq"))
            res = model.rotation.T @ model.rotation - np.eye(6)
            assert np.max(np.abs(res)) <= 1e-8

    def test_loss_monotone_nonincreasing(self):
        x = RngStream(9, "x").normal((80, 10))
        model = itq_train(x, 8, iters=50, rng=RngStream(10, "itq"))
        h = np.array(model.loss_history)
        assert len(h) == 50
        assert np.all(np.diff(h) <= 1e-12 * np.maximum(1.0, h[:-1]))

    def test_axis_aligned_corners_reach_zero_loss(self):
        # the full +/-1 hypercube (exactly zero mean) is already binary, so
        # quantization loss can vanish; alternation is a local method, so the
        # rotation seed is pinned to a run that reaches the global optimum
        from itertools import product
        corners = np.array(list(product([-1.0, 1.0], repeat=4)))
        model = itq_train(corners, 4, iters=50, rng=RngStream(12, "itq"))
        assert model.loss_history[-1] <= 1e-18

    def test_mean_encodes_all_plus_one(self):
        x = RngStream(13, "x").normal((40, 5))
        model = itq_train(x, 3, iters=10, rng=RngStream(14, "itq"))
        assert np.array_equal(itq_encode(model, model.mean.copy()), [1, 1, 1])

    def test_centering_cancellation(self):
        x = RngStream(15, "x").normal((40, 5))
        model = itq_train(x, 4, iters=10, rng=RngStream(16, "itq"))
        q = RngStream(17, "q").normal((5,))
        recentered = (q - model.mean) + model.mean
        assert np.array_equal(itq_encode(model, q), itq_encode(model, recentered))

    def test_two_dimensional_hand_instance(self):
        # four points on the line y = x/2; the single principal axis is
        # (2,1)/sqrt(5) up to sign, so codes agree or are globally flipped
        x = np.array([[2.0, 1.0], [-2.0, -1.0], [4.0, 2.0], [-4.0, -2.0]])
        model = itq_train(x, 1, iters=5, rng=RngStream(18, "itq"))
        codes = itq_encode(model, x).ravel()
        assert codes[0] == codes[2]
        assert codes[1] == codes[3]
        assert codes[0] == -codes[1]

    def test_rank_deficient_warns_and_pads(self):
        x = np.zeros((30, 6))
        x[:, 0] = RngStream(19, "x").normal((30,))  # rank-1 data
        with pytest.warns(UserWarning, match="rank deficient"):
            model = itq_train(x, 4, iters=5, rng=RngStream(20, "itq"))
        assert np.max(np.abs(model.pca_w @ model.pca_w.T - np.eye(4))) <= 1e-8

    def test_validation(self):
        x = RngStream(21, "x").normal((5, 8))
        with pytest.raises(ValueError):
            itq_train(x, 5, rng=RngStream(0, "itq"))  # n <= r
        with pytest.raises(ValueError):
            itq_train(RngStream(22, "x").normal((30, 4)), 5, rng=RngStream(0, "itq"))


class TestSharedCodeContract:
    def test_all_methods_feed_search(self):
        ds = synthetic_mixture(3, 8, 60, 0.4, RngStream(23, "mix"))
        q = ds.x[:10]
        from advhash.training import TrainConfig, train
        adv, _ = train(ds.x, TrainConfig(bits=6, epochs=1, batch_size=30, master_seed=1))
        encoders = {
            "adv": lambda v: encode_binary(adv.encoder, v),
            "lsh": (lambda enc: (lambda v: encode_binary(enc, v)))(
                lsh_train(8, 6, RngStream(24, "lsh"))),
            "itq": (lambda m: (lambda v: itq_encode(m, v)))(
                itq_train(ds.x, 6, iters=5, rng=RngStream(25, "itq"))),
        }
        for name, fn in encoders.items():
            codes = fn(ds.x)
            assert set(np.unique(codes)) <= {-1, 1}, name
            packed = pack_codes(codes)
            order = rank_by_hamming(pack_codes(fn(q)).item(0), packed)
            assert sorted(order.tolist()) == list(range(60)), name
