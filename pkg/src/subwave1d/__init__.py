"""Subwavelength resonances of one-dimensional high-contrast resonator chains."""

from __future__ import annotations

from .capacitance import (
    BandStructure,
    CapacitanceMatrix,
    GeneralisedCapacitance,
    approximate_mode,
    approximate_mode_finite,
    band_structure,
    capacitance_finite,
    capacitance_periodic,
    generalised,
)
from .dtn import DtnMatrix, ExteriorSolution, assemble_dtn, dtn_series_terms, exterior_coefficients
from .edge import (
    EdgePrediction,
    SpectrumReport,
    decay_fit,
    defect_condition_matrix,
    finite_spectrum,
    predict_edge_mode,
    refine_exact,
    stability_study,
)
from .errors import (
    ConsistencyError,
    ConvergenceError,
    DegenerateBandError,
    SingularDtnError,
    Subwave1DError,
    UnsupportedConfigurationError,
    ValidationError,
)
from .geometry import (
    FiniteChain,
    Materials,
    UnitCell,
    build_geometric_defect,
    build_material_defect,
    build_periodic,
    effective_sound_speed,
)
from .kernels import BACKEND
from .resonances import (
    NonlinearSystem,
    ResonanceResult,
    assemble_A,
    find_resonances,
    reconstruct_mode,
)
from .topology import ZakResult, zak_hermitian, zak_nonhermitian, zak_path_integral

__version__ = "0.1.0"
