"""Spectra, zero sets and near-Parseval frames for self-affine fractal measures."""

__version__ = "0.1.0"

from . import errors
from .frames import (
    FrameReport,
    FrameSpectrum,
    concatenated_bounds,
    frame_matrix_bounds,
    frame_spectrum_build,
    parseval_defect,
    residues_distinct,
    select_subset,
    tsosc_check,
)
from .intlat import (
    IntMatrix,
    Lattice,
    canonical_residue,
    complete_representatives,
    reduce_to_full,
    smallest_invariant_lattice,
)
from .measure import (
    DiscreteMeasure,
    FourierEval,
    attractor_box,
    discrete_approximant,
    render_attractor,
    step_moment,
)
from .quasiprod import SpectrumReport, full_spectrum, report_frequencies
from .spectra import (
    SpectrumTree,
    canonical_tree,
    completeness_partial,
    corrected_tree,
    cover_constants,
    orthogonality_check,
)
from .triples import (
    DEFECT_TOL,
    AffinePair,
    HadamardTriple,
    affine_pair,
    digit_sums,
    hadamard_triple,
    tower,
    validate_triple,
)
from .zeroset import (
    EmptinessEvidence,
    ZeroCertificate,
    certify_zero,
    replay_certificate,
    scan_zero_set,
    zero_set_empty_evidence,
)

__all__ = [
    "__version__",
    "errors",
    "AffinePair",
    "DEFECT_TOL",
    "DiscreteMeasure",
    "EmptinessEvidence",
    "FourierEval",
    "FrameReport",
    "FrameSpectrum",
    "HadamardTriple",
    "IntMatrix",
    "Lattice",
    "SpectrumReport",
    "SpectrumTree",
    "ZeroCertificate",
    "affine_pair",
    "attractor_box",
    "canonical_residue",
    "canonical_tree",
    "completeness_partial",
    "complete_representatives",
    "concatenated_bounds",
    "corrected_tree",
    "cover_constants",
    "certify_zero",
    "digit_sums",
    "discrete_approximant",
    "frame_matrix_bounds",
    "frame_spectrum_build",
    "full_spectrum",
    "hadamard_triple",
    "orthogonality_check",
    "parseval_defect",
    "reduce_to_full",
    "render_attractor",
    "replay_certificate",
    "report_frequencies",
    "residues_distinct",
    "scan_zero_set",
    "select_subset",
    "smallest_invariant_lattice",
    "step_moment",
    "tower",
    "tsosc_check",
    "validate_triple",
    "zero_set_empty_evidence",
]
