from fractions import Fraction

import numpy as np
import pytest

from spectral_fractal.errors import InvalidInput, SimpleDigitsRequired
from spectral_fractal.measure import (
    DiscreteMeasure,
    FourierEval,
    attractor_box,
    discrete_approximant,
    mu_hat_field,
    refinement_identity_defect,
    render_attractor,
    render_field,
    step_moment,
    write_pgm,
)
from spectral_fractal.triples import affine_pair


@pytest.fixture
def jp_pair():
    return affine_pair([[4]], [(0,), (2,)])


@pytest.fixture
def skew_pair():
    return affine_pair([[4, 0], [1, 2]], [(0, 0), (0, 3), (1, 0), (1, 3)])


def test_mu_hat_at_zero_and_zero_point(jp_pair):
    ev = FourierEval(jp_pair)
    assert abs(ev.mu_hat(0.0) - 1.0) < 1e-12
    # first factor is mask(1/4) = 0
    assert abs(ev.mu_hat(1.0)) < 1e-12
    assert np.all(np.abs(ev.mu_hat(np.linspace(-8, 8, 101))) <= 1 + 1e-12)


def test_mu_hat_matches_closed_form_for_lebesgue():
    # binary digits give Lebesgue measure on [0,1]: |mu_hat| = |sinc|
    pair = affine_pair([[2]], [(0,), (1,)])
    ev = FourierEval(pair)
    xs = np.array([0.1, 0.3, 0.5, 1.5, 2.7])
    want = np.abs(np.sin(np.pi * xs) / (np.pi * xs))
    assert np.allclose(np.abs(ev.mu_hat(xs)), want, atol=1e-9)


def test_mu_hat_depth_stability(jp_pair, skew_pair):
    for pair, pts in (
        (jp_pair, np.linspace(-5, 5, 41)),
        (skew_pair, np.random.default_rng(3).uniform(-5, 5, size=(40, 2))),
    ):
        ev = FourierEval(pair)
        base = ev.mu_hat(pts)
        deeper = ev.mu_hat_truncated(pts, ev.depth_for(pts) + 8)
        assert np.max(np.abs(base - deeper)) < 1e-9


def test_mu_hat_agrees_with_discrete_oracle(jp_pair):
    # both sides are the same finite product when depths are matched exactly
    ev = FourierEval(jp_pair)
    dm = discrete_approximant(jp_pair, 6)
    xs = np.linspace(-5, 5, 33)
    lhs = ev.mu_hat_truncated(xs, 6)
    rhs = dm.fourier(xs)
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_refinement_identity(jp_pair, skew_pair):
    ev = FourierEval(jp_pair)
    for xi in (0.3, 1.7, -2.5):
        assert refinement_identity_defect(ev, xi, 3) < 1e-9
    ev2 = FourierEval(skew_pair)
    for xi in ((0.2, 0.7), (-1.3, 0.4)):
        assert refinement_identity_defect(ev2, xi, 2) < 1e-9


def test_discrete_approximant_atoms(jp_pair):
    dm = discrete_approximant(jp_pair, 2)
    got = sorted(a[0] for a in dm.atoms)
    assert got == [Fraction(0), Fraction(1, 8), Fraction(1, 2), Fraction(5, 8)]
    assert all(w == Fraction(1, 4) for w in dm.weights)


def test_discrete_approximant_middle_third():
    pair = affine_pair([[3]], [(0,), (2,)])
    dm = discrete_approximant(pair, 2)
    got = sorted(a[0] for a in dm.atoms)
    assert got == [Fraction(0), Fraction(2, 9), Fraction(2, 3), Fraction(8, 9)]


def test_discrete_approximant_merges_collisions():
    # digits congruent mod R produce overlapping atoms; weights must merge
    pair = affine_pair([[2]], [(0,), (1,), (2,)])
    dm = discrete_approximant(pair, 2)
    assert sum(dm.weights, Fraction(0)) == 1
    assert len(dm.atoms) == 7  # 9 digit strings, two pairs collide
    assert max(dm.weights) == Fraction(2, 9)


def test_attractor_boxes(jp_pair):
    lo, hi = attractor_box(affine_pair([[2]], [(0,), (1,)]))
    assert abs(lo[0]) < 1e-9 and abs(hi[0] - 1) < 1e-9
    lo, hi = attractor_box(affine_pair([[2]], [(0,), (2,)]))
    assert abs(lo[0]) < 1e-9 and abs(hi[0] - 2) < 1e-9
    lo, hi = attractor_box(jp_pair)
    assert lo[0] <= 0 and hi[0] >= 2 / 3 - 1e-12 and hi[0] < 2 / 3 + 1e-9


def test_step_moment_constant(jp_pair):
    norm_sq, val = step_moment(jp_pair, 1, [1, 1], 0.0)
    assert abs(norm_sq - 1.0) < 1e-12
    assert abs(val - 1.0) < 1e-12
    norm_sq, val = step_moment(jp_pair, 1, [1, 0], 0.0)
    assert abs(norm_sq - 0.5) < 1e-12
    assert abs(val - 0.5) < 1e-12


def test_step_moment_requires_simple_digits():
    pair = affine_pair([[2]], [(0,), (2,)])
    with pytest.raises(SimpleDigitsRequired):
        step_moment(pair, 1, [1, 1], 0.0)


def test_step_moment_matches_atom_sum(jp_pair):
    # oracle: evaluate the step function integral directly on the atoms
    rng = np.random.default_rng(5)
    n = 3
    w = rng.normal(size=8) + 1j * rng.normal(size=8)
    xi = 0.37
    norm_sq, val = step_moment(jp_pair, n, w, xi)
    dm = discrete_approximant(jp_pair, 9)
    # group depth-9 atoms by their depth-3 prefix cylinder
    pts = dm.points[:, 0]
    prefix = np.floor(pts * 4**n + 1e-12).astype(int)  # wrong for digit 2 spacing
    # safer oracle: rebuild from scratch with explicit digit strings
    import itertools

    total = 0.0 + 0j
    norm = 0.0
    for idx, digs in enumerate(itertools.product([0, 2], repeat=n)):
        base = sum(d * 4.0 ** (n - 1 - i) for i, d in enumerate(digs)) / 4.0**n
        # remaining mass within the cylinder: transform of deeper tail
        tail_pts = []
        for tail in itertools.product([0, 2], repeat=6):
            x = base + sum(t * 4.0 ** (-(n + 1 + i)) for i, t in enumerate(tail))
            tail_pts.append(x)
        tail_pts = np.array(tail_pts)
        cyl = np.exp(-2j * np.pi * xi * tail_pts).mean() / 2**n
        total += w[idx] * cyl
        norm += abs(w[idx]) ** 2 / 2**n
    assert abs(norm_sq - norm) < 1e-12
    assert abs(val - total) < 1e-3  # tail truncated at depth 9


def test_render_attractor_1d(tmp_path):
    pair = affine_pair([[2]], [(0,), (1,)])
    out = tmp_path / "full.pgm"
    stats = render_attractor(pair, 256, str(out), depth=10)
    assert stats["pixels_on"] == 256  # the unit interval fills every column
    header = out.read_bytes()[:15]
    assert header.startswith(b"P5\n256 1\n255")


def test_render_attractor_jp(tmp_path, jp_pair):
    out = tmp_path / "jp.pgm"
    # depth-10 atoms sit at least (4/3) * 4^-10 apart, so 2^20 columns separate them
    stats = render_attractor(jp_pair, 2**20, str(out), depth=10)
    assert stats["atoms"] == 1024
    assert stats["pixels_on"] == 1024


def test_render_skew(tmp_path, skew_pair):
    out = tmp_path / "skew.pgm"
    stats = render_attractor(skew_pair, 128, str(out), depth=5)
    assert stats["pixels_on"] > 100
    assert out.stat().st_size > 128 * 128


def test_render_field_and_errors(tmp_path, jp_pair):
    ev = FourierEval(jp_pair)
    field = mu_hat_field(ev, [-2.0], [2.0], 64)
    assert field.shape == (1, 64)
    render_field(field, str(tmp_path / "f.pgm"))
    with pytest.raises(InvalidInput):
        render_field(np.zeros((0, 0)), str(tmp_path / "g.pgm"))
    with pytest.raises(OSError):
        write_pgm(np.zeros((2, 2)), "/nonexistent-dir/x.pgm")
