"""Slow-light photonic crystal waveguide design and spectroscopy analysis."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DataError,
    FitConvergenceError,
    NumericalError,
    ParameterError,
    ParseError,
    SlowlightError,
)
from .geometry import (
    EpsilonOperator,
    PlaneWaveBasis,
    Supercell,
    WaveguideGeometry,
    build_basis,
    build_primitive_cell,
    build_supercell,
    epsilon_fourier,
    rasterize_epsilon,
    slab_effective_index,
)
from .bandsolver import (
    BandStructure,
    BlochK,
    ModeField,
    SolverParams,
    TrackedBand,
    assemble_operator,
    band_sweep,
    bulk_band_sweep,
    classify_parity,
    reconstruct_field,
    solve_bands,
)
from .dispersion import (
    GapReport,
    GroupIndexCurve,
    detect_gap,
    group_index_fd,
    group_index_hf,
    to_wavelength,
)
from .workflow import WaveguideSolution, solve_waveguide, waveguide_k_path
