import numpy as np
import numpy.testing as npt
import pytest

from qcilink import (
    ParityCheckCode,
    build_peg_code,
    bundled_code,
    decode_bp,
    deinterleave,
    encode,
    interleave,
    load_alist,
    save_alist,
)
from qcilink.coding import gf2_rank, info_bits_of
from qcilink.errors import DataFormatError


class TestPegConstruction:
    def test_toy_code_shape_and_rank(self, toy_code):
        assert toy_code.n == 48 and toy_code.num_checks == 24 and toy_code.k == 24
        npt.assert_array_equal(toy_code.var_deg, np.full(48, 3))
        assert gf2_rank(toy_code.dense_matrix()) == 24

    def test_deterministic_given_seed(self):
        a = build_peg_code(48, 24, 3, seed=2)
        b = build_peg_code(48, 24, 3, seed=2)
        assert [list(x) for x in a.check_lists] == [list(x) for x in b.check_lists]

    def test_rejects_degenerate_parameters(self):
        with pytest.raises(ValueError):
            build_peg_code(10, 0, 3)
        with pytest.raises(ValueError):
            build_peg_code(10, 5, 1)


class TestAlistIo:
    def test_round_trip_preserves_adjacency(self, toy_code, tmp_path):
        path = tmp_path / "toy.alist"
        save_alist(toy_code, path)
        loaded = load_alist(path)
        assert loaded.n == toy_code.n and loaded.num_checks == toy_code.num_checks
        assert [list(x) for x in loaded.check_lists] == [list(x) for x in toy_code.check_lists]

    def test_consistent_with_declared_dims(self, toy_code, tmp_path):
        path = tmp_path / "toy.alist"
        save_alist(toy_code, path)
        head = path.read_text().splitlines()[0].split()
        assert head == ["48", "24"]

    def test_extra_entries_beyond_degree_rejected(self, tmp_path):
        path = tmp_path / "bad.alist"
        path.write_text(
            "3 2\n2 2\n1 2 1\n2 2\n"
            "1 2\n2 0\n1 0\n"   # variable 0 declares degree 1 but lists two checks
            "1 2\n2 3\n"
        )
        with pytest.raises(DataFormatError, match="degree"):
            load_alist(path)

    def test_mismatched_adjacency_rejected(self, tmp_path):
        path = tmp_path / "bad.alist"
        path.write_text(
            "3 2\n1 2\n1 1 1\n2 1\n"
            "1\n1\n2\n"
            "1 2\n1 0\n"  # check side disagrees with variable side
        )
        with pytest.raises(DataFormatError, match="disagree"):
            load_alist(path)

    def test_truncated_file_rejected(self, tmp_path):
        path = tmp_path / "bad.alist"
        path.write_text("3 2\n1 2\n1 1 1\n2 1\n1\n")
        with pytest.raises(DataFormatError, match="lines"):
            load_alist(path)

    def test_non_integer_token_rejected(self, tmp_path):
        path = tmp_path / "bad.alist"
        path.write_text("3 x\n1 2\n1 1 1\n2 1\n1\n1\n2\n1 2\n3 0\n")
        with pytest.raises(DataFormatError, match="token"):
            load_alist(path)

    def test_out_of_range_index_rejected(self, tmp_path):
        path = tmp_path / "bad.alist"
        path.write_text(
            "3 2\n1 2\n1 1 1\n2 1\n"
            "1\n5\n2\n"
            "1 2\n3 0\n"
        )
        with pytest.raises(DataFormatError, match="range"):
            load_alist(path)


class TestEncoder:
    def test_all_zero_info_gives_all_zero_codeword(self, toy_code):
        cw = encode(toy_code, np.zeros(toy_code.k, dtype=np.uint8))
        assert not cw.any()

    def test_every_codeword_satisfies_checks(self, toy_code, rng):
        u = rng.integers(0, 2, size=(32, toy_code.k), dtype=np.uint8)
        cw = encode(toy_code, u)
        assert not toy_code.syndrome(cw).any()

    def test_linearity_on_random_pairs(self, toy_code, rng):
        for _ in range(20):
            a = rng.integers(0, 2, toy_code.k, dtype=np.uint8)
            b = rng.integers(0, 2, toy_code.k, dtype=np.uint8)
            npt.assert_array_equal(encode(toy_code, a ^ b),
                                   encode(toy_code, a) ^ encode(toy_code, b))

    def test_wrong_length_rejected(self, toy_code):
        with pytest.raises(ValueError, match="information bits"):
            encode(toy_code, np.zeros(toy_code.k + 1, dtype=np.uint8))

    def test_rank_deficient_matrix_rejected(self):
        code = ParityCheckCode(4, [[0, 1], [0, 1], [2, 3]])
        with pytest.raises(ValueError, match="rank deficient"):
            encode(code, np.zeros(1, dtype=np.uint8))


class TestDecoder:
    def test_noiseless_codeword_converges_first_iteration(self, toy_code, rng):
        u = rng.integers(0, 2, size=(4, toy_code.k), dtype=np.uint8)
        cw = encode(toy_code, u)
        llr = (1.0 - 2.0 * cw) * 60.0
        bits, conv, iters = decode_bp(toy_code, llr, max_iters=10)
        assert conv.all() and (iters == 1).all()
        npt.assert_array_equal(bits, cw)

    def test_single_weak_flip_corrected(self, toy_code, rng):
        cw = encode(toy_code, rng.integers(0, 2, toy_code.k, dtype=np.uint8))
        llr = (1.0 - 2.0 * cw) * 8.0
        llr[11] = -0.5 * llr[11]
        bits, conv, _ = decode_bp(toy_code, llr, max_iters=20)
        assert conv
        npt.assert_array_equal(bits, cw)

    def test_all_zero_llrs_do_not_converge(self, toy_code):
        _, conv, iters = decode_bp(toy_code, np.zeros(toy_code.n), max_iters=7)
        assert not conv and iters == 7

    def test_early_exit_returns_codeword(self, toy_code, rng):
        cw = encode(toy_code, rng.integers(0, 2, size=(16, toy_code.k), dtype=np.uint8))
        x = 1.0 - 2.0 * cw
        y = x + rng.normal(0.0, 0.55, size=x.shape)
        llr = 4.0 * y / (2 * 0.55 ** 2)
        bits, conv, _ = decode_bp(toy_code, llr, max_iters=30)
        assert not toy_code.syndrome(bits[conv]).any()

    def test_deterministic(self, toy_code, rng):
        llr = rng.normal(0.0, 2.0, size=toy_code.n)
        a = decode_bp(toy_code, llr, max_iters=15)
        b = decode_bp(toy_code, llr, max_iters=15)
        npt.assert_array_equal(a[0], b[0])
        assert a[1] == b[1] and a[2] == b[2]

    def test_length_mismatch_rejected(self, toy_code):
        with pytest.raises(ValueError, match="LLRs"):
            decode_bp(toy_code, np.zeros(toy_code.n - 1))
        with pytest.raises(ValueError, match="max_iters"):
            decode_bp(toy_code, np.zeros(toy_code.n), max_iters=0)

    def test_high_snr_ber_floor_bundled_code(self):
        # binary-input AWGN sanity floor: Es/N0 = 6 dB is deep inside the
        # rate-3/4 decoding region, so 300k bits must decode error-free
        code = bundled_code()
        rng = np.random.default_rng(99)
        u = rng.integers(0, 2, size=(200, code.k), dtype=np.uint8)
        cw = encode(code, u)
        n0 = 10 ** (-0.6)
        x = 1.0 - 2.0 * cw
        y = x + rng.normal(0.0, np.sqrt(n0 / 2.0), size=x.shape)
        llr = np.clip(4.0 * y / n0, -60, 60)
        bits, conv, _ = decode_bp(code, llr, max_iters=50)
        ber = np.mean(info_bits_of(code, bits) != u)
        assert conv.all()
        assert ber < 1e-5


class TestBundledCode:
    def test_parameters(self):
        code = bundled_code()
        assert code.n == 1992 and code.k == 1494
        assert code.rate == pytest.approx(0.75)
        # whole codewords map onto whole symbols for m = 4, 6, 8, 12
        for m in (4, 6, 8, 12):
            assert code.n % m == 0

    def test_degree_profile(self):
        code = bundled_code()
        npt.assert_array_equal(code.var_deg, np.full(code.n, 3))
        # check degrees concentrate at E/m; the farthest-first edge placement
        # leaves a small spread
        assert code.check_deg.sum() == 3 * code.n
        assert code.check_deg.min() >= 10 and code.check_deg.max() <= 14


class TestInterleaver:
    def test_round_trip_identity(self, rng):
        bits = rng.integers(0, 2, size=512, dtype=np.uint8)
        npt.assert_array_equal(deinterleave(interleave(bits, 7), 7), bits)

    def test_same_seed_same_permutation(self, rng):
        bits = rng.integers(0, 2, size=256, dtype=np.uint8)
        npt.assert_array_equal(interleave(bits, 3), interleave(bits, 3))

    def test_different_seeds_differ(self, rng):
        bits = np.arange(64)
        assert not np.array_equal(interleave(bits, 1), interleave(bits, 2))

    def test_batched_along_last_axis(self, rng):
        x = rng.normal(size=(5, 128))
        npt.assert_array_equal(deinterleave(interleave(x, 11), 11), x)
