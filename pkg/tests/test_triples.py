import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spectral_fractal.errors import CapExceeded, ResidueCollision, SizeMismatch
from spectral_fractal.intlat import IntMatrix
from spectral_fractal.triples import (
    affine_pair,
    digit_sums,
    hadamard_matrix,
    hadamard_triple,
    lift_digits,
    mask_eval,
    search_frequency_digits_1d,
    tower,
    transfer_partition_check,
    u_eval,
    validate_triple,
)


def test_jp_matrix_is_fourier_pair(jp_triple):
    H = hadamard_matrix(jp_triple.R, jp_triple.B, jp_triple.L)
    want = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    assert np.allclose(H, want, atol=1e-14)
    assert jp_triple.validated and jp_triple.defect < 1e-13


def test_skew_triple_validates(skew_triple):
    assert skew_triple.validated
    assert skew_triple.defect < 1e-13


def test_validate_rejects_bad_frequency_set():
    ok, defect = validate_triple([[4]], [(0,), (2,)], [(0,), (2,)])
    assert not ok and defect > 0.5


def test_validate_rejects_size_mismatch():
    with pytest.raises(SizeMismatch):
        validate_triple([[4]], [(0,), (2,)], [(0,), (1,), (2,)])


def test_isometry_of_hadamard_matrix(skew_triple):
    H = hadamard_matrix(skew_triple.R, skew_triple.B, skew_triple.L)
    rng = np.random.default_rng(11)
    for _ in range(200):
        w = rng.normal(size=4) + 1j * rng.normal(size=4)
        assert abs(np.linalg.norm(H @ w) - np.linalg.norm(w)) < 1e-10


def test_mask_values():
    pair = affine_pair([[4]], [(0,), (2,)])
    assert abs(mask_eval(pair, 0.0) - 1.0) < 1e-15
    assert abs(mask_eval(pair, 0.25)) < 1e-15  # (1 + e^{-i pi}) / 2
    assert abs(u_eval(pair, 0.125) - 0.5) < 1e-15


def test_mask_batch_shapes():
    pair = affine_pair([[4, 0], [1, 2]], [(0, 0), (0, 3), (1, 0), (1, 3)])
    grid = np.zeros((5, 7, 2))
    assert mask_eval(pair, grid).shape == (5, 7)
    assert np.allclose(mask_eval(pair, grid), 1.0)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=4))
def test_u_is_a_probability_weight(xs):
    pair = affine_pair([[4]], [(0,), (2,)])
    vals = u_eval(pair, np.array(xs))
    assert np.all(vals >= -1e-12) and np.all(vals <= 1 + 1e-12)
    # periodic modulo 1 because the digits are integers
    assert np.allclose(vals, u_eval(pair, np.array(xs) + 3.0), atol=1e-9)


def test_digit_sums_jp():
    assert digit_sums([[4]], [(0,), (2,)], 2) == [(0,), (2,), (8,), (10,)]
    assert digit_sums([[3]], [(0,), (2,)], 2) == [(0,), (2,), (6,), (8,)]


def test_digit_sums_cap():
    with pytest.raises(CapExceeded):
        digit_sums([[4]], [(0,), (2,)], 8, cap=100)


def test_tower_jp(jp_triple):
    t2 = tower(jp_triple, 2)
    assert t2.R.rows == ((16,),)
    assert set(t2.B) == {(0,), (2,), (8,), (10,)}
    assert set(t2.L) == {(0,), (1,), (4,), (5,)}
    assert t2.validated and t2.defect < 1e-12
    t4 = tower(jp_triple, 4)
    assert t4.validated and len(t4.B) == 16


def test_tower_skew(skew_triple):
    for k in (1, 2, 3, 4):
        tk = tower(skew_triple, k)
        assert tk.validated, f"tower level {k} defect {tk.defect}"


def test_partition_of_unity(jp_triple, skew_triple, lebesgue_triple):
    grid1 = np.linspace(-2, 2, 41)
    assert transfer_partition_check(jp_triple, grid1) < 1e-12
    assert transfer_partition_check(lebesgue_triple, grid1) < 1e-12
    g = np.stack(np.meshgrid(np.linspace(-1, 1, 9), np.linspace(-1, 1, 9)), axis=-1)
    assert transfer_partition_check(skew_triple, g) < 1e-12


def test_partition_fails_for_broken_frequency_set(jp_triple):
    # assemble an unvalidated triple by hand: L = {0, 2} breaks the partition
    from spectral_fractal.triples import HadamardTriple

    bad = HadamardTriple(jp_triple.pair, ((0,), (2,)), defect=1.0)
    assert transfer_partition_check(bad, np.linspace(0, 1, 17)) > 1e-3


def test_lift_preserves_residues(jp_triple):
    J = [(0,), (1,), (4,), (5,)]
    lifted = lift_digits(J, jp_triple.R, 2, [(0,), (1,), (0,), (-1,)])
    assert lifted == ((0,), (17,), (4,), (-11,))
    ok, defect = validate_triple([[16]], [(0,), (2,), (8,), (10,)], lifted)
    assert ok, f"lifted set lost unitarity: {defect}"


def test_lift_rejects_collisions(jp_triple):
    with pytest.raises(ResidueCollision):
        lift_digits([(0,), (16,)], jp_triple.R, 2, [(0,), (0,)])


def test_search_1d_frequency_sets():
    found = search_frequency_digits_1d(4, [(0,), (2,)])
    assert ((0,), (1,)) in found
    assert ((0,), (3,)) in found
    assert ((0,), (2,)) not in found
    # middle-third digits admit no frequency partner at all
    assert search_frequency_digits_1d(3, [(0,), (2,)]) == []


def test_search_matches_bruteforce_validation():
    # oracle: independent brute force over all size-2 subsets containing 0
    R, B = 6, [(0,), (3,)]
    got = set(search_frequency_digits_1d(R, B))
    want = set()
    for c in range(1, 6):
        L = ((0,), (c,))
        H = hadamard_matrix([[R]], B, L)
        if np.max(np.abs(H.conj().T @ H - np.eye(2))) < 1e-10:
            want.add(L)
    assert got == want and want  # nonempty: e.g. L = {0, 1}
