from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spectral_fractal.errors import AmbiguousSpectrum, RankDeficient
from spectral_fractal.intlat import (
    ConjugationRecord,
    IntMatrix,
    Lattice,
    canonical_residue,
    charpoly,
    complete_representatives,
    dual_lattice,
    f_inverse,
    hermite_normal_form,
    integer_kernel_basis,
    is_expansive,
    is_simple_digit_set,
    lattice_eq,
    reduce_to_full,
    smallest_invariant_lattice,
)

ints = st.integers(min_value=-9, max_value=9)


def small_matrix(d_max=3):
    return st.integers(min_value=1, max_value=d_max).flatmap(
        lambda d: st.lists(
            st.lists(ints, min_size=d, max_size=d), min_size=d, max_size=d
        )
    )


# --- Hermite form -----------------------------------------------------------


@settings(max_examples=150, deadline=None)
@given(small_matrix())
def test_hnf_transform_is_exact_and_unimodular(rows):
    A = IntMatrix.from_rows(rows)
    H, U = hermite_normal_form(A)
    assert A.mul(U).rows == H.rows
    assert U.det() in (1, -1)


@settings(max_examples=150, deadline=None)
@given(small_matrix())
def test_hnf_pivots_positive_and_reduced(rows):
    H, _ = hermite_normal_form(IntMatrix.from_rows(rows))
    h, w = H.shape
    piv_rows = []
    for j in range(w):
        nz = [i for i in range(h) if H.rows[i][j] != 0]
        if not nz:
            continue
        i = nz[0]
        piv_rows.append((i, j))
        assert H.rows[i][j] > 0
        # entries left of the pivot in its row are reduced modulo the pivot
        for jj in range(j):
            assert 0 <= H.rows[i][jj] < H.rows[i][j]
    # pivots strictly descend the rows as columns advance
    assert all(a[0] < b[0] for a, b in zip(piv_rows, piv_rows[1:]))


def test_hnf_known_row():
    H, U = hermite_normal_form([[2, 4]])
    assert H.rows == ((2, 0),)
    assert U.det() in (1, -1)


def test_charpoly_matches_numpy_eigs():
    rng = np.random.default_rng(7)
    for _ in range(40):
        d = rng.integers(1, 4)
        rows = rng.integers(-5, 6, size=(d, d))
        p = charpoly(IntMatrix.from_rows(rows.tolist()))
        assert p[0] == 1
        got = np.sort_complex(np.roots(np.array(p, dtype=float)))
        want = np.sort_complex(np.linalg.eigvals(rows.astype(float)))
        assert np.allclose(got, want, atol=1e-6)


# --- residues ---------------------------------------------------------------


def _same_class(R: IntMatrix, v, w):
    # independent membership oracle: solve R x = v - w over the rationals
    diff = [Fraction(a - b) for a, b in zip(v, w)]
    x = [sum(row[j] * diff[j] for j in range(len(diff))) for row in f_inverse(R.to_fractions())]
    return all(t.denominator == 1 for t in x)


def test_complete_representatives_example():
    R = IntMatrix.from_rows([[4, 0], [1, 2]])
    reps = complete_representatives(R)
    assert len(reps) == 8
    # pairwise inequivalent and jointly exhaustive (oracle: rational solve)
    for i in range(len(reps)):
        for j in range(i + 1, len(reps)):
            assert not _same_class(R, reps[i], reps[j])
    box = [(x, y) for x in range(-3, 4) for y in range(-3, 4)]
    for pt in box:
        assert any(_same_class(R, pt, r) for r in reps)


@settings(max_examples=60, deadline=None)
@given(small_matrix(2), st.lists(ints, min_size=2, max_size=2))
def test_canonical_residue_is_canonical(rows, v):
    R = IntMatrix.from_rows(rows)
    if R.det() == 0:
        with pytest.raises(RankDeficient):
            canonical_residue(R, v[: R.d])
        return
    r = canonical_residue(R, v[: R.d])
    assert canonical_residue(R, r) == r
    assert _same_class(R, v[: R.d], r)
    shifted = R.matvec((1,) * R.d)
    assert canonical_residue(R, tuple(a + b for a, b in zip(v[: R.d], shifted))) == r


def test_simple_digit_sets():
    assert is_simple_digit_set([[4]], [(0,), (2,)])
    assert not is_simple_digit_set([[2]], [(0,), (2,)])
    assert is_simple_digit_set(
        [[4, 0], [1, 2]], [(0, 0), (0, 3), (1, 0), (1, 3)]
    )


# --- invariant lattices -----------------------------------------------------


def test_smallest_invariant_lattice_1d_gcd():
    lat = smallest_invariant_lattice([[4]], [(0,), (2,)])
    assert lat.rank == 1 and lat.cols == ((2,),) and lat.den == 1
    lat = smallest_invariant_lattice([[3]], [(0,), (1,)])
    assert lat.is_standard()


def test_smallest_invariant_lattice_skew_example():
    lat = smallest_invariant_lattice(
        [[4, 0], [1, 2]], [(0, 0), (0, 3), (1, 0), (1, 3)]
    )
    assert lat.is_standard()  # (1,0) and R(1,0)=(4,1) already generate Z^2


def test_smallest_invariant_lattice_rank_deficient():
    lat = smallest_invariant_lattice([[2, 0], [0, 3]], [(0, 0), (1, 0)])
    assert lat.rank == 1
    assert lat.cols == ((1, 0),)


def test_lattice_membership():
    lat = Lattice.from_columns(2, [(2, 0), (0, 4)])
    assert (2, 0) in lat and (2, 4) in lat
    assert (1, 0) not in lat
    assert (Fraction(4, 2), Fraction(0)) in lat


def test_dual_lattice_diag():
    lat = Lattice.from_columns(2, [(2, 0), (0, 5)])
    dual = dual_lattice(lat)
    assert dual.den == 10
    assert dual.cols == ((5, 0), (0, 2))
    assert (Fraction(1, 2), Fraction(0)) in dual
    assert lattice_eq(dual_lattice(dual), lat)


def test_dual_lattice_1d():
    lat = Lattice.from_columns(1, [(3,)])
    dual = dual_lattice(lat)
    assert dual.den == 3 and dual.cols == ((1,),)
    assert lattice_eq(dual_lattice(dual), lat)


@settings(max_examples=60, deadline=None)
@given(small_matrix(2))
def test_dual_involution(rows):
    R = IntMatrix.from_rows(rows)
    if R.det() == 0:
        return
    lat = Lattice.from_columns(R.d, R.T.rows)
    assert lattice_eq(dual_lattice(dual_lattice(lat)), lat)


def test_integer_kernel():
    ker = integer_kernel_basis([[2, 4]])
    assert len(ker) == 1
    (v,) = ker
    assert 2 * v[0] + 4 * v[1] == 0
    assert abs(v[0]) == 2 and abs(v[1]) == 1


# --- expansiveness ----------------------------------------------------------


def test_expansive_examples():
    assert not is_expansive([[1]])
    assert is_expansive([[2]])
    assert is_expansive([[-2]])
    assert is_expansive([[4, 0], [1, 2]])
    assert is_expansive([[0, 3], [1, 0]])  # eigenvalues +-sqrt(3)
    assert not is_expansive([[0, -1], [1, 0]])  # rotation, moduli exactly 1
    assert not is_expansive([[1, 1], [0, 1]])  # shear, eigenvalue 1
    assert is_expansive([[0, 2], [1, 0]])  # both moduli sqrt(2)
    # golden-mean companion has one root inside the unit circle
    assert not is_expansive([[1, 1], [1, 0]])


def test_expansive_zero_det():
    assert not is_expansive([[0]])
    assert not is_expansive([[2, 0], [0, 0]])


# --- reduction --------------------------------------------------------------


def test_reduce_scalar_sublattice():
    red = reduce_to_full([[4]], [(0,), (2,)])
    assert red.rank == 1
    assert red.R.rows == ((4,),)
    assert set(red.B) == {(0,), (1,)}
    assert red.record.lattice_basis is not None
    assert red.record.lattice_basis.rows == ((2,),)
    # round trip: backward map restores the original digits
    back = [red.record.backward[0][0] * b[0] for b in red.B]
    assert sorted(int(x) for x in back) == [0, 2]


def test_reduce_rank_deficient_projection():
    red = reduce_to_full([[2, 0], [0, 3]], [(0, 0), (1, 0)])
    assert red.rank == 1
    assert red.record.is_unimodular()
    R1, B1, _ = red.project()
    assert R1.rows == ((2,),)
    assert set(B1) == {(0,), (1,)}


def test_reduce_identity_when_standard():
    red = reduce_to_full([[4, 0], [1, 2]], [(0, 0), (0, 3), (1, 0), (1, 3)])
    assert red.rank == 2
    assert red.record.forward == ConjugationRecord.identity(2).forward
    assert set(red.B) == {(0, 0), (0, 3), (1, 0), (1, 3)}


def test_reduce_translates_when_zero_missing():
    red = reduce_to_full([[4]], [(1,), (3,)])
    assert red.record.translation == (1,)
    assert set(red.B) == {(0,), (1,)}


def test_conjugation_round_trip_on_matrix():
    rec = ConjugationRecord.from_unimodular(
        IntMatrix.from_rows([[1, 1], [0, 1]]), "test shear"
    )
    R = IntMatrix.from_rows([[4, 0], [1, 2]])
    back = ConjugationRecord(rec.backward, rec.forward, "inverse")
    assert back.apply_matrix(rec.apply_matrix(R)).rows == R.rows
