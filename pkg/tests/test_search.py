import numpy as np
import pytest

from advhash.errors import ShapeError
from advhash.search import (
    PackedCodeSet,
    exact_topn_euclidean,
    hamming,
    hamming_distances,
    pack_codes,
    rank_by_hamming,
    unpack_codes,
    words_needed,
)


def random_codes(rng, n, r):
    return rng.choice(np.array([-1, 1], dtype=np.int8), size=(n, r))


class TestPacking:
    def test_round_trip(self):
        rng = np.random.default_rng(0)
        for r in (1, 3, 63, 64, 65, 128, 200):
            codes = random_codes(rng, 17, r)
            packed = pack_codes(codes)
            assert packed.count == 17
            assert packed.bits == r
            assert packed.words_per_item == words_needed(r)
            assert np.array_equal(unpack_codes(packed), codes)

    def test_all_plus_one_64(self):
        packed = pack_codes(np.ones((1, 64)))
        assert packed.data[0, 0] == np.uint64(0xFFFF_FFFF_FFFF_FFFF)

    def test_bit_order(self):
        packed = pack_codes(np.array([[1, -1, 1]]))
        assert packed.data[0, 0] == np.uint64(0b101)

    def test_tail_bits_zero(self):
        packed = pack_codes(np.ones((3, 67)))
        high = packed.data[:, 1]
        assert np.all(high == np.uint64(0b111))

    def test_invalid_entry_positioned(self):
        codes = np.ones((2, 4))
        codes[1, 2] = 0
        with pytest.raises(ValueError, match="item 1, bit 2"):
            pack_codes(codes)


class TestHamming:
    def test_self_distance_zero(self):
        item = pack_codes(np.array([[1, -1, 1, 1]])).item(0)
        assert hamming(item, item, 4) == 0

    def test_hand_count(self):
        a = pack_codes(np.array([[1, -1, 1, -1]])).item(0)   # 1010 pattern
        b = pack_codes(np.array([[-1, 1, 1, -1]])).item(0)   # 0110 pattern
        assert hamming(a, b, 4) == 2

    def test_matches_naive_loop_on_ten_thousand_pairs(self):
        rng = np.random.default_rng(1)
        codes = random_codes(rng, 200, 100)
        packed = pack_codes(codes)
        for i, j in rng.integers(0, 200, size=(200, 2)):  # slow exact loop
            naive = int((codes[i] != codes[j]).sum())
            assert hamming(packed.item(i), packed.item(j), 100) == naive
        # remaining pairs via the scan kernel: 50 queries x 200 items = 10^4
        scans = np.stack([hamming_distances(packed.item(i), packed) for i in range(50)])
        naive_all = np.stack([(codes[i] != codes).sum(axis=1) for i in range(50)])
        assert np.array_equal(scans, naive_all)

    def test_metric_axioms_on_random_triples(self):
        rng = np.random.default_rng(2)
        codes = random_codes(rng, 60, 48)
        packed = pack_codes(codes)
        idx = rng.integers(0, 60, size=(300, 3))
        for a, b, c in idx:
            dab = hamming(packed.item(a), packed.item(b), 48)
            dba = hamming(packed.item(b), packed.item(a), 48)
            dac = hamming(packed.item(a), packed.item(c), 48)
            dcb = hamming(packed.item(c), packed.item(b), 48)
            assert dab == dba
            assert dab <= dac + dcb
            assert (dab == 0) == np.array_equal(codes[a], codes[b])

    def test_word_count_mismatch(self):
        a = pack_codes(np.ones((1, 64))).item(0)
        b = pack_codes(np.ones((1, 128))).item(0)
        with pytest.raises(ShapeError):
            hamming(a, b, 64)


class TestRankByHamming:
    def test_own_code_ranked_first(self):
        rng = np.random.default_rng(3)
        codes = random_codes(rng, 30, 16)
        packed = pack_codes(codes)
        order = rank_by_hamming(packed.item(7), packed)
        assert (codes[order[0]] == codes[7]).all()

    def test_equidistant_identity_order(self):
        db = pack_codes(np.tile(np.array([1, -1, 1, 1], dtype=np.int8), (6, 1)))
        query = pack_codes(np.array([[-1, 1, 1, 1]])).item(0)
        assert np.array_equal(rank_by_hamming(query, db), np.arange(6))

    def test_hand_built_tie_case(self):
        # distances (3, 0, 2, 0, 1) -> order (1, 3, 4, 2, 0)
        base = np.ones(8, dtype=np.int8)
        def flip(k):
            c = base.copy()
            c[:k] = -1
            return c
        db = pack_codes(np.stack([flip(3), flip(0), flip(2), flip(0), flip(1)]))
        query = pack_codes(base[np.newaxis, :]).item(0)
        assert np.array_equal(rank_by_hamming(query, db), [1, 3, 4, 2, 0])

    def test_output_is_permutation(self):
        rng = np.random.default_rng(4)
        packed = pack_codes(random_codes(rng, 101, 24))
        order = rank_by_hamming(packed.item(0), packed)
        assert sorted(order.tolist()) == list(range(101))

    def test_empty_db(self):
        db = PackedCodeSet(count=0, bits=8, data=np.zeros((0, 1), dtype=np.uint64))
        q = pack_codes(np.ones((1, 8))).item(0)
        assert rank_by_hamming(q, db).size == 0


class TestExactTopN:
    def test_query_in_db_is_rank_one(self):
        rng = np.random.default_rng(5)
        db = rng.normal(size=(40, 6))
        gt = exact_topn_euclidean(db[13][np.newaxis, :], db, 3)
        assert gt[0, 0] == 13

    def test_one_dimensional_hand_case(self):
        db = np.array([[0.0], [1.0], [3.0]])
        gt = exact_topn_euclidean(np.array([[0.9]]), db, 2)
        assert np.array_equal(gt[0], [1, 0])

    def test_ties_break_by_index(self):
        db = np.tile(np.array([2.0, -1.0]), (5, 1))  # all identical
        gt = exact_topn_euclidean(np.array([[0.0, 0.0]]), db, 4)
        assert np.array_equal(gt[0], [0, 1, 2, 3])

    def test_against_naive_sort(self):
        rng = np.random.default_rng(6)
        db = rng.normal(size=(50, 4))
        queries = rng.normal(size=(7, 4))
        gt = exact_topn_euclidean(queries, db, 10)
        for qi in range(7):
            d2 = ((db - queries[qi]) ** 2).sum(axis=1)
            naive = sorted(range(50), key=lambda j: (d2[j], j))[:10]
            assert gt[qi].tolist() == naive

    def test_repeated_calls_identical(self):
        rng = np.random.default_rng(7)
        db = rng.normal(size=(64, 5))
        q = rng.normal(size=(9, 5))
        assert np.array_equal(exact_topn_euclidean(q, db, 8),
                              exact_topn_euclidean(q, db, 8))

    def test_n_too_large_rejected(self):
        with pytest.raises(ValueError):
            exact_topn_euclidean(np.zeros((1, 2)), np.zeros((3, 2)), 4)
