"""Splitting a digit system along an invariant frequency direction.

When the periodic zero set of mu_hat is nonempty, no integer lattice of
frequencies can be complete.  The measure may still carry a spectrum of
quasi-product shape: integer frequencies along an invariant block of
coordinates and rational frequencies with one fixed denominator transverse
to it.  The steps implemented here:

* rotate the invariant direction onto the leading coordinates by a
  unimodular change of variables (``triangularize``), making the matrix
  block lower triangular;
* canonicalize the transverse components of the frequency set without
  touching the unitary (``normalize_frequencies``);
* split the digits into groups over the leading block, check each group
  fills the transverse residues, and extract the transverse congruence
  lattice from the cycle orbit (``decompose``);
* build the product candidate Lambda_1 x (1/beta) Z and accept it only if a
  truncated completeness sweep stays near one on a grid (``product_spectrum``);
* drive the whole pipeline, including the integer branch when the zero set
  is empty, and map every reported frequency back to the input coordinates
  (``full_spectrum``).

All coordinate moves are recorded as exact ConjugationRecords so reported
frequencies can be replayed against the original system.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import (
    CapExceeded,
    CycleNotFound,
    DimensionUnsupported,
    GammaFullOrTrivial,
    InconsistentDecomposition,
    InvalidInput,
    NoBetaAccepted,
    NotCompleteReps,
    NotInvariant,
)
from .intlat import (
    ConjugationRecord,
    FVec,
    IntMatrix,
    IVec,
    Lattice,
    as_digit_list,
    canonical_residue,
    clear_denominators,
    f_matvec,
    f_matmul,
    f_nullspace,
    hermite_normal_form,
    integer_kernel_basis,
    reduce_to_full,
)
from .measure import FourierEval
from .triples import HadamardTriple, hadamard_triple
from .spectra import SpectrumTree, corrected_tree
from .zeroset import EmptinessEvidence, find_invariant_cycle, zero_set_empty_evidence

__all__ = [
    "TriangularForm",
    "triangularize",
    "normalize_frequencies",
    "transverse_lattice",
    "QuasiProduct",
    "decompose",
    "ProductSpectrum",
    "product_spectrum",
    "SpectrumReport",
    "full_spectrum",
    "map_frequency_back",
    "report_frequencies",
]


# ---------------------------------------------------------------------------
# block triangular form


def _span_rank(vectors) -> int:
    """Rank of a family of rational vectors (dimension minus kernel count)."""
    vs = tuple(tuple(Fraction(c) for c in v) for v in vectors)
    if not vs:
        return 0
    return len(vs[0]) - len(f_nullspace(vs))


def _blocks(R: IntMatrix, r: int) -> tuple[IntMatrix, IntMatrix, IntMatrix]:
    """(R1, C, R2) of a block lower triangular matrix; top-right must vanish."""
    d = R.d
    for i in range(r):
        for j in range(r, d):
            if R.rows[i][j] != 0:
                raise InvalidInput("matrix is not block lower triangular")
    R1 = IntMatrix.from_rows([row[:r] for row in R.rows[:r]])
    C = IntMatrix.from_rows([row[:r] for row in R.rows[r:]]) if r < d else R
    R2 = IntMatrix.from_rows([row[r:] for row in R.rows[r:]])
    return R1, C, R2


@dataclass(frozen=True)
class TriangularForm:
    """A unimodular conjugation exposing an invariant frequency block."""

    record: ConjugationRecord
    R_new: IntMatrix
    r: int
    R1: IntMatrix
    C: IntMatrix
    R2: IntMatrix


def triangularize(R, W) -> TriangularForm:
    """Conjugate so span(W), invariant under R^T, becomes the leading block.

    W is a basis (rational vectors allowed) of a proper nonzero subspace
    invariant under the transpose of R.  The returned unimodular move M
    satisfies: M R M^{-1} is block lower triangular with an r x r leading
    block, and frequency coordinates transform so that span(W) maps onto
    the span of the first r coordinate vectors.
    """
    M = R if isinstance(R, IntMatrix) else IntMatrix.from_rows(R)
    d = M.d
    basis = tuple(tuple(Fraction(c) for c in w) for w in W)
    if not basis or any(len(w) != d for w in basis):
        raise InvalidInput("subspace basis must be nonempty vectors of matching length")
    r = _span_rank(basis)
    if r != len(basis):
        raise InvalidInput("subspace basis is linearly dependent")
    if r >= d:
        raise InvalidInput("subspace must be proper; nothing to split")
    Rt = M.T.to_fractions()
    for w in basis:
        img = f_matvec(Rt, w)
        if _span_rank(basis + (img,)) != r:
            raise NotInvariant("subspace is not invariant under the transposed matrix")
    # Integer rows annihilating W; their integer kernel is the saturation
    # W cap Z^d, read off the Hermite transform's kernel columns.
    normals = f_nullspace(basis)
    arows = [clear_denominators(nrm)[0] for nrm in normals]
    A = IntMatrix.from_rows(arows)
    H, U = hermite_normal_form(A)
    h, w_ = H.shape
    zero_cols = [j for j in range(w_) if all(H.rows[i][j] == 0 for i in range(h))]
    if len(zero_cols) != r:  # pragma: no cover - normals have full row rank
        raise InvalidInput("annihilator rank inconsistent with subspace dimension")
    order = zero_cols + [j for j in range(w_) if j not in zero_cols]
    T = IntMatrix.from_rows([[U.rows[i][j] for j in order] for i in range(d)])
    rec = ConjugationRecord.from_unimodular(
        T.T, "rotate the invariant frequency direction onto the leading coordinates"
    )
    R_new = rec.apply_matrix(M)
    R1, C, R2 = _blocks(R_new, r)
    return TriangularForm(rec, R_new, r, R1, C, R2)


def normalize_frequencies(R_new: IntMatrix, L, r: int) -> tuple[IVec, ...]:
    """Push the transverse block of every frequency to its canonical residue.

    Adding R^T k to a frequency leaves the unitary literally unchanged, so
    this replaces each l by l + R^T (0, v) with v chosen to move the last
    d - r components onto the canonical residue mod R2^T.  The leading
    components absorb the matching C^T v shift.
    """
    d = R_new.d
    freqs = as_digit_list(L)
    _, _, R2 = _blocks(R_new, r)
    R2t = R2.T
    inv2 = R2t.inverse_fractions()
    rt = R_new.T.to_fractions()
    out = []
    for l in freqs:
        l2 = l[r:]
        canon = canonical_residue(R2t, l2)
        diff = tuple(Fraction(c - x) for c, x in zip(canon, l2))
        v = f_matvec(inv2, diff)
        if any(x.denominator != 1 for x in v):  # pragma: no cover - exact residue
            raise InvalidInput("canonical residue is not congruent mod R2^T")
        shift = tuple(Fraction(0) for _ in range(r)) + v
        move = f_matvec(rt, shift)
        out.append(tuple(a + int(m) for a, m in zip(l, move)))
    return tuple(out)


# ---------------------------------------------------------------------------
# transverse congruence lattice and the decomposition


def transverse_lattice(ys, n: int) -> Lattice:
    """The lattice {x in Z^n : <x, y> in Z for every y in ys}.

    Each congruence <x, y> in Z becomes an integer row [num_y | den_y e_j]
    over unknowns (x, t); the x-parts of the joint integer kernel span the
    answer.  Always full rank: lcm(dens) Z^n is contained in it.
    """
    rows = []
    ys = [tuple(Fraction(c) for c in y) for y in ys]
    m = len(ys)
    for j, y in enumerate(ys):
        nums, den = clear_denominators(y)
        row = list(nums) + [0] * m
        row[n + j] = den
        rows.append(row)
    if not rows:
        return Lattice.from_columns(n, [tuple(int(i == j) for i in range(n)) for j in range(n)])
    kern = integer_kernel_basis(IntMatrix.from_rows(rows))
    return Lattice.from_columns(n, [k[:n] for k in kern])


@dataclass(frozen=True)
class QuasiProduct:
    """A digit system split over the leading block.

    ``triple`` lives in block triangular coordinates.  Digits group by their
    leading component u; each group's transverse parts form a complete
    residue system mod R2 and sit on v_u + Q Z^{d-r} with integer offsets
    ``c_digits``.  ``sub`` is the leading-block system (R1, {u}, L1) built
    from the frequencies whose transverse block vanishes.
    """

    triple: HadamardTriple
    r: int
    R1: IntMatrix
    R2: IntMatrix
    Q: IntMatrix
    u_values: tuple[IVec, ...]
    v_reps: tuple[IVec, ...]
    c_digits: tuple[tuple[IVec, ...], ...]
    R2_conj: IntMatrix
    sub: HadamardTriple
    orbit_seconds: tuple[FVec, ...]

    @property
    def transverse_index(self) -> int:
        return abs(self.Q.det())


def decompose(triple: HadamardTriple, r: int, orbit) -> QuasiProduct:
    """Split a block triangular system into base digits and transverse layer.

    ``orbit`` is the invariant cycle in the new coordinates; only its last
    d - r components matter, they pin down the transverse congruence
    lattice Gamma = Q Z^{d-r}.  Raises NotCompleteReps when some digit
    group misses a residue, GammaFullOrTrivial when the congruences force
    Gamma = Z^{d-r}, and InconsistentDecomposition when the offsets or R2
    do not respect Gamma.
    """
    R = triple.R
    d = R.d
    if not 0 < r < d:
        raise InvalidInput("leading block size must be strictly between 0 and d")
    R1, _, R2 = _blocks(R, r)
    groups: dict[IVec, list[IVec]] = {}
    for b in triple.B:
        groups.setdefault(b[:r], []).append(b[r:])
    u_values = tuple(sorted(groups))
    det2 = abs(R2.det())
    for u in u_values:
        seconds = groups[u]
        if len(seconds) != det2:
            raise NotCompleteReps(
                f"digit group over {u} has {len(seconds)} members, needs |det R2| = {det2}"
            )
        if len({canonical_residue(R2, s) for s in seconds}) != det2:
            raise NotCompleteReps(f"digit group over {u} collides mod R2")
    ys = tuple(tuple(Fraction(c) for c in x[r:]) for x in orbit)
    lat = transverse_lattice(ys, d - r)
    Q = lat.basis_matrix
    if abs(Q.det()) < 2:
        raise GammaFullOrTrivial("cycle congruences admit every integer vector")
    Qinv = Q.inverse_fractions()
    v_reps = []
    c_digits = []
    for u in u_values:
        v = min(groups[u])
        cs = []
        for s in sorted(groups[u]):
            w = f_matvec(Qinv, tuple(Fraction(a - b) for a, b in zip(s, v)))
            if any(x.denominator != 1 for x in w):
                raise InconsistentDecomposition(
                    f"offset {tuple(a - b for a, b in zip(s, v))} is outside the transverse lattice"
                )
            cs.append(tuple(int(x) for x in w))
        v_reps.append(v)
        c_digits.append(tuple(cs))
    conj = f_matmul(f_matmul(Qinv, R2.to_fractions()), Q.to_fractions())
    if any(x.denominator != 1 for row in conj for x in row):
        raise InconsistentDecomposition("R2 does not preserve the transverse lattice")
    R2c = IntMatrix.from_rows([[int(x) for x in row] for row in conj])
    L1 = tuple(l[:r] for l in triple.L if all(c == 0 for c in l[r:]))
    if len(L1) != len(u_values):
        raise InconsistentDecomposition(
            f"{len(L1)} frequencies have vanishing transverse block, "
            f"need one per base digit ({len(u_values)})"
        )
    sub = hadamard_triple(R1, u_values, L1).require_validated()
    return QuasiProduct(
        triple, r, R1, R2, Q, u_values, tuple(v_reps), tuple(c_digits), R2c, sub, ys
    )


# ---------------------------------------------------------------------------
# product candidate and its completeness sweep


@dataclass(frozen=True)
class ProductSpectrum:
    """An accepted candidate Lambda_1 x (1/beta) Z^{d-r} with sweep evidence."""

    beta: int
    step: Fraction
    minimum: float
    threshold: float
    t_window: int
    lam1_count: int
    partials: tuple[float, ...]
    rejected: tuple[tuple[int, float], ...]


def product_spectrum(
    triple: HadamardTriple,
    quasi: QuasiProduct,
    lam1_points,
    betas=None,
    t_window: int = 60,
    xi_grid: int = 4,
    threshold: float = 0.95,
    cap: int = 2 ** 23,
) -> ProductSpectrum:
    """Test Lambda_1 x (1/beta) Z against a truncated completeness sweep.

    For each candidate denominator beta the sum sum_{lam} |mu_hat(xi+lam)|^2
    over the truncated product set is evaluated on an off-lattice grid of
    xi; the first beta whose minimum clears ``threshold`` is accepted.  The
    default beta list is q, 2q, 3q with q the transverse lattice index.
    Truncation keeps |t| <= t_window, ordered by |t| so the recorded partial
    sums are monotone.  Raises NoBetaAccepted with all sweep minima when
    every candidate fails.
    """
    d = triple.R.d
    r = quasi.r
    if d - r != 1:
        raise DimensionUnsupported("product sweep only handles a one-dimensional transverse block")
    q = quasi.transverse_index
    if betas is None:
        betas = (q, 2 * q, 3 * q)
    lam1 = [tuple(float(c) for c in p) for p in lam1_points]
    if not lam1:
        raise InvalidInput("need a nonempty base frequency set")
    ts = sorted(range(-t_window, t_window + 1), key=lambda t: (abs(t), t))
    axes = [(np.arange(xi_grid) + 0.5) / xi_grid for _ in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    grid = np.stack([m.ravel() for m in mesh], axis=-1)
    needed = len(lam1) * len(ts) * len(grid)
    if needed > cap:
        raise CapExceeded("product sweep evaluations", needed, cap)
    ev = FourierEval(triple.pair)
    base = np.array(lam1, dtype=float)
    rejected = []
    for beta in betas:
        # lam row-major: t blocks of the full Lambda_1, ordered by |t|
        lam = np.concatenate([base + np.array([(0.0,) * r + (t / beta,)]) for t in ts])
        minv = np.inf
        min_partials = None
        ok = True
        for xi in grid:
            vals = np.abs(ev.mu_hat(lam + xi)) ** 2
            per_t = vals.reshape(len(ts), len(lam1)).sum(axis=1)
            partials = np.cumsum(per_t)
            total = float(partials[-1])
            if total < minv:
                minv = total
                min_partials = partials
            if total < threshold:
                ok = False
                break
        if ok:
            return ProductSpectrum(
                beta=int(beta),
                step=Fraction(1, int(beta)),
                minimum=minv,
                threshold=threshold,
                t_window=t_window,
                lam1_count=len(lam1),
                partials=tuple(float(x) for x in min_partials),
                rejected=tuple(rejected),
            )
        rejected.append((int(beta), minv))
    raise NoBetaAccepted(
        "no transverse denominator reached "
        f"{threshold}: " + ", ".join(f"beta={b} min={m:.4f}" for b, m in rejected)
    )


# ---------------------------------------------------------------------------
# the full pipeline


@dataclass(frozen=True)
class SpectrumReport:
    """Outcome of the spectrum pipeline, frequencies in input coordinates."""

    status: str  # "spectral" | "undecided"
    branch: str  # "orthonormal" | "quasi-product" | "point-mass" | ""
    integer_spectrum: str  # "yes" | "no" | "unknown"
    records: tuple[ConjugationRecord, ...]
    evidence: EmptinessEvidence | None
    tree: SpectrumTree | None
    quasi: QuasiProduct | None
    product: ProductSpectrum | None
    sub_report: "SpectrumReport | None"
    points: tuple[FVec, ...]
    note: str = ""


def map_frequency_back(point, records) -> FVec:
    """Undo a chain of coordinate moves on one frequency point.

    ``records`` is outermost-first; shorter points (from a projected block
    system) are padded with zeros, which is exact because the measure lives
    in the leading coordinates there.
    """
    pt = tuple(Fraction(c) for c in point)
    for rec in reversed(records):
        if len(pt) < rec.dim:
            pt = pt + (Fraction(0),) * (rec.dim - len(pt))
        pt = rec.unapply_frequency_point(pt)
    return pt


def report_frequencies(report: SpectrumReport, limit: int = 4096) -> list[FVec]:
    """Regenerate up to ``limit`` spectrum frequencies in input coordinates."""
    if report.branch == "point-mass":
        return [report.points[0]]
    if report.branch == "orthonormal" and report.tree is not None:
        pts = [tuple(Fraction(int(c)) for c in p) for p in report.tree.points[:limit]]
        return [map_frequency_back(p, report.records) for p in pts]
    if report.branch == "quasi-product" and report.product is not None:
        base = report_frequencies(report.sub_report, limit)
        beta = report.product.beta
        out = []
        for t in sorted(range(-report.product.t_window, report.product.t_window + 1),
                        key=lambda t: (abs(t), t)):
            for lam1 in base:
                out.append(lam1 + (Fraction(t, beta),))
                if len(out) >= limit:
                    return [map_frequency_back(p, report.records) for p in out]
        return [map_frequency_back(p, report.records) for p in out]
    return list(report.points)


_QUASI_FAILURES = (
    CycleNotFound,
    NotInvariant,
    NotCompleteReps,
    GammaFullOrTrivial,
    InconsistentDecomposition,
    NoBetaAccepted,
    DimensionUnsupported,
)


def full_spectrum(
    triple: HadamardTriple,
    K: int = 6,
    sample: int = 32,
    max_period: int = 12,
    scan_K: int = 10,
    t_window: int = 60,
    xi_grid: int = 4,
    threshold: float = 0.95,
    limit: int = 4096,
    _depth: int = 0,
) -> SpectrumReport:
    """Decide and construct a spectrum, integer or quasi-product.

    Pipeline: normalize the digit system (translate, cut to the invariant
    block, rescale through a sublattice) while recording every move; gather
    zero-set evidence; when the periodic zero set is empty build the
    corrected integer frequency tree, otherwise locate an invariant cycle,
    triangularize along its attached direction, decompose, recurse on the
    leading block and test the product candidate.  Structural failures of
    the quasi-product branch are reported as status "undecided" with the
    reason in ``note`` (the refutation of integer spectra still stands).
    """
    triple.require_validated()
    if _depth > 4:
        raise CapExceeded("recursion depth", _depth, 4)
    records: list[ConjugationRecord] = []
    R, B, L = triple.R, triple.B, triple.L
    for _ in range(8):
        rp = reduce_to_full(R, B, L)
        if (
            rp.rank == R.d
            and rp.record.note.startswith("identity")
            and rp.record.translation is None
        ):
            break
        records.append(rp.record)
        if rp.rank == 0:
            pt = map_frequency_back((Fraction(0),) * R.d, records)
            return SpectrumReport(
                "spectral", "point-mass", "yes", tuple(records), None, None, None,
                None, None, (pt,), note="single-atom measure, only frequency zero",
            )
        if rp.rank < R.d:
            R, B, L = rp.project()
        else:
            R, B, L = rp.R, rp.B, rp.L
        triple = hadamard_triple(R, B, L).require_validated()
    recs = tuple(records)
    pair = triple.pair
    evidence = zero_set_empty_evidence(pair, K=scan_K)
    if evidence.empty:
        tree = corrected_tree(triple, K, evidence=evidence)
        pts = [
            map_frequency_back(tuple(Fraction(int(c)) for c in p), recs)
            for p in tree.points[:sample]
        ]
        return SpectrumReport(
            "spectral", "orthonormal", "yes", recs, evidence, tree, None, None,
            None, tuple(pts),
        )
    if evidence.kind != "refuted":
        return SpectrumReport(
            "undecided", "", "unknown", recs, evidence, None, None, None, None,
            (), note="zero-set scan inconclusive",
        )
    witness = evidence.witness
    try:
        cycle = find_invariant_cycle(pair, max_period=max_period)
        if not cycle.W:
            raise CycleNotFound("cycle found but no invariant direction certified")
        tri = triangularize(triple.R, cycle.W)
        B2 = tri.record.apply_digits(triple.B)
        L2 = normalize_frequencies(tri.R_new, tri.record.apply_frequencies(triple.L), tri.r)
        t2 = hadamard_triple(tri.R_new, B2, L2).require_validated()
        orbit2 = tuple(tri.record.apply_frequency_point(x) for x in cycle.orbit)
        quasi = decompose(t2, tri.r, orbit2)
        sub_report = full_spectrum(
            quasi.sub, K=K, sample=sample, max_period=max_period, scan_K=scan_K,
            t_window=t_window, xi_grid=xi_grid, threshold=threshold, limit=limit,
            _depth=_depth + 1,
        )
        if sub_report.status != "spectral":
            return SpectrumReport(
                "undecided", "quasi-product", "no", recs, evidence, None, quasi,
                None, sub_report, (),
                note="leading-block subsystem spectrum undecided",
            )
        lam1 = report_frequencies(sub_report, limit)
        product = product_spectrum(
            t2, quasi, lam1, t_window=t_window, xi_grid=xi_grid, threshold=threshold,
        )
    except _QUASI_FAILURES as exc:
        return SpectrumReport(
            "undecided", "quasi-product", "no", recs, evidence, None, None, None,
            None, (),
            note=f"no integer spectrum (witness {witness}); "
            f"quasi-product splitting failed: {type(exc).__name__}: {exc}",
        )
    inner = (*recs, tri.record)
    pts = []
    for t in sorted(range(-2, 3), key=lambda t: (abs(t), t)):
        for lam in lam1[: max(1, sample // 5)]:
            pts.append(map_frequency_back(lam + (Fraction(t, product.beta),), inner))
            if len(pts) >= sample:
                break
        if len(pts) >= sample:
            break
    return SpectrumReport(
        "spectral", "quasi-product", "no", inner, evidence, None, quasi, product,
        sub_report, tuple(pts),
        note=f"integer spectra refuted by periodic zero at {witness}",
    )
