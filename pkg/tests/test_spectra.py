"""Spectrum trees: canonical towers, corrected towers, decision logic."""

from fractions import Fraction

import numpy as np
import pytest

from spectral_fractal.errors import CapExceeded, Undecided, ZeroSetNonEmpty
from spectral_fractal.spectra import (
    SpectrumDecision,
    canonical_tree,
    completeness_partial,
    corrected_tree,
    cover_constants,
    delta_lower_bound,
    operator_norm_sup,
    orthogonality_check,
    zd_spectrum_decision,
)
from spectral_fractal.triples import hadamard_triple
from spectral_fractal.zeroset import EmptinessEvidence, zero_set_empty_evidence

F = Fraction


@pytest.fixture(scope="module")
def skew_evidence(skew_triple):
    return zero_set_empty_evidence(skew_triple.pair)


# ---------------------------------------------------------------------------
# canonical tower


def test_canonical_tree_jp_levels(jp_triple):
    tree = canonical_tree(jp_triple, 3)
    assert tree.exponents == (0, 1, 2, 3)
    assert tree.new_points[0] == ((0,),)
    assert tree.new_points[1] == ((1,),)
    assert set(tree.new_points[2]) == {(4,), (5,)}
    assert set(tree.points) == {(0,), (1,), (4,), (5,), (16,), (17,), (20,), (21,)}
    assert tree.level_points(2) == ((0,), (1,), (4,), (5,))


def test_canonical_tree_translates_frequencies():
    t = hadamard_triple([[4]], [(0,), (2,)], [(1,), (2,)])
    tree = canonical_tree(t, 3)
    assert "translated" in tree.note
    ref = canonical_tree(hadamard_triple([[4]], [(0,), (2,)], [(0,), (1,)]), 3)
    assert tree.points == ref.points


def test_canonical_tree_cap(jp_triple):
    with pytest.raises(CapExceeded):
        canonical_tree(jp_triple, 9, cap=300)


def test_canonical_delta_stable(jp_triple):
    tree = canonical_tree(jp_triple, 8)
    # rescaled tower points fill the dual attractor; the worst value sits at
    # its right endpoint and stabilizes quickly
    assert 0.70 < delta_lower_bound(tree) < 0.76
    assert len(tree.delta_levels) == 9


# ---------------------------------------------------------------------------
# cover constants


def test_cover_constants_jp(jp_triple):
    cov = cover_constants(jp_triple)
    assert 0.25 < cov.m_cover < 0.60
    assert cov.lip_correction <= 0.15 * np.sqrt(cov.m_cover) + 1e-12
    assert 0.15 < cov.delta_hat <= cov.m_cover
    assert cov.window == 4


def test_operator_norm_sup():
    from spectral_fractal.intlat import IntMatrix

    assert operator_norm_sup(IntMatrix.from_rows([[4]])) == pytest.approx(0.25)
    assert operator_norm_sup(IntMatrix.from_rows([[2]])) == pytest.approx(0.5)


# ---------------------------------------------------------------------------
# corrected tower


def test_corrected_tree_jp_matches_canonical(jp_triple):
    tree = corrected_tree(jp_triple, 8)
    assert tree.grade == "certified"
    assert tree.evidence.kind == "scan-clear"
    assert tree.exponents == tuple(range(9))
    assert tree.corrections == ()
    assert set(tree.points) == set(canonical_tree(jp_triple, 8).points)
    assert delta_lower_bound(tree) >= tree.cover.delta_hat - 1e-9


def test_corrected_tree_repairs_unit_interval(lebesgue_triple):
    # the plain tower {0..2^K-1} misses half the integers and is not a
    # spectrum of the unit interval; corrections must fold it onto the
    # symmetric window, every shift being one step down
    tree = corrected_tree(lebesgue_triple, 6)
    assert tree.evidence.kind == "gcd-1d"
    pts = sorted(p[0] for p in tree.points)
    assert pts == list(range(-31, 33))
    assert len(tree.corrections) == 31
    assert all(kappa == (-1,) for _, _, kappa in tree.corrections)
    assert 0.39 < delta_lower_bound(tree) < 0.42
    assert delta_lower_bound(tree) >= tree.cover.delta_hat - 1e-9


def test_corrected_tree_refuses_nonempty_zero_set(skew_triple, skew_evidence):
    with pytest.raises(ZeroSetNonEmpty):
        corrected_tree(skew_triple, 4, evidence=skew_evidence)


def test_corrected_tree_undecided(jp_triple):
    with pytest.raises(Undecided):
        corrected_tree(jp_triple, 4, evidence=EmptinessEvidence("inconclusive"))


def test_corrected_tree_cap(jp_triple):
    with pytest.raises(CapExceeded):
        corrected_tree(jp_triple, 10, cap=100)


# ---------------------------------------------------------------------------
# diagnostics


def test_orthogonality_exact_zeros(jp_triple, lebesgue_triple):
    assert orthogonality_check(canonical_tree(jp_triple, 6)) < 1e-8
    assert orthogonality_check(corrected_tree(lebesgue_triple, 6)) < 1e-8


def test_completeness_partial_monotone_and_tops_out(jp_triple):
    tree = canonical_tree(jp_triple, 8)
    rng = np.random.default_rng(7)
    xi = rng.uniform(-0.5, 0.5, size=(5, 1))
    rows = completeness_partial(tree, xi)
    assert rows.shape == (9, 5)
    assert np.all(np.diff(rows, axis=0) >= -1e-12)
    assert np.all(rows[-1] <= 1 + 1e-9)
    assert np.all(rows[-1] >= 0.85)


def test_completeness_at_zero_is_one(jp_triple):
    tree = canonical_tree(jp_triple, 6)
    rows = completeness_partial(tree, np.array([[0.0]]))
    assert rows[-1, 0] == pytest.approx(1.0, abs=1e-9)


def test_corrections_improve_completeness(lebesgue_triple):
    plain = canonical_tree(lebesgue_triple, 6)
    fixed = corrected_tree(lebesgue_triple, 6)
    xi = np.array([[0.3]])
    q_plain = completeness_partial(plain, xi)[-1, 0]
    q_fixed = completeness_partial(fixed, xi)[-1, 0]
    assert q_fixed > 0.95
    assert q_plain < 0.90
    assert q_fixed > q_plain


# ---------------------------------------------------------------------------
# decision


def test_decision_spectral_1d(lebesgue_triple):
    dec = zd_spectrum_decision(lebesgue_triple, K=5)
    assert dec.status == "spectral"
    assert dec.tree is not None and dec.tree.grade == "certified"
    assert dec.evidence.kind == "gcd-1d"


def test_decision_refuses_skew(skew_triple, skew_evidence):
    dec = zd_spectrum_decision(skew_triple, K=4, evidence=skew_evidence)
    assert dec.status == "no-integer-spectrum"
    assert dec.tree is None
    assert dec.witness.point == (F(0), F(1, 3))
    assert dec.witness.status == "in"


def test_decision_sixfold_scan_path():
    # digit gcd is 3, so the 1D shortcut does not apply; the scan comes back
    # clean and the construction goes through
    t = hadamard_triple([[6]], [(0,), (3,)], [(0,), (1,)])
    dec = zd_spectrum_decision(t, K=5)
    assert dec.status == "spectral"
    assert dec.evidence.kind == "scan-clear"
    assert delta_lower_bound(dec.tree) > 0.8


def test_decision_undecided_passthrough(jp_triple):
    dec = zd_spectrum_decision(
        jp_triple, K=4, evidence=EmptinessEvidence("inconclusive")
    )
    assert dec == SpectrumDecision(
        "undecided", None, None, EmptinessEvidence("inconclusive")
    )
