"""End-to-end solve: effective index iteration, gap, guided bands, n_g."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import bandsolver, dispersion
from .bandsolver import (
    BandStructure,
    SolverParams,
    TrackedBand,
    band_sweep,
    bulk_band_sweep,
    transverse_confinement,
)
from .dispersion import GapReport, GroupIndexCurve, GuidedWindow
from .errors import NumericalError
from .geometry import WaveguideGeometry, slab_effective_index

# A mode counts as defect-guided when at least this fraction of its |Hz|^2
# sits within two hole rows of the missing row.
GUIDED_CONFINEMENT_MIN = 0.55


def waveguide_k_path(k_min: float = 0.25, k_max: float = 0.5, n_points: int = 64):
    return np.linspace(k_min, k_max, n_points)


@dataclass
class WaveguideSolution:
    """Everything the CLI and coupling layer need from one solve."""

    geom: WaveguideGeometry
    params: SolverParams
    n_eff: float
    gap: GapReport
    bands: BandStructure
    guided: dict  # parity label -> TrackedBand (restricted to in-gap points)
    ng_curves: dict  # parity label -> GroupIndexCurve


def _iterate_n_eff(
    geom: WaveguideGeometry, params: SolverParams, k_path: np.ndarray
) -> float:
    """One self-consistency pass of the slab effective index.

    Seed at the anchor frequency, locate the guided-window centre with a
    coarse sweep, then re-evaluate the slab index at that wavelength.
    """
    if params.n_eff is not None:
        return params.n_eff
    n0 = params.resolve_n_eff(geom)
    coarse_path = np.linspace(k_path.min(), k_path.max(), min(9, k_path.size))
    coarse = band_sweep(
        geom, _with_n_eff(params, n0), coarse_path
    )
    bulk = bulk_band_sweep(
        geom, _with_n_eff(params, n0),
        dispersion.bulk_k_path(geom.lattice_constant_a, 10),
        n_eff=n0,
    )
    gap = dispersion.detect_gap(bulk)
    if not gap.has_gap:
        return n0
    centre = 0.5 * (gap.gap_lo + gap.gap_hi)
    in_gap = coarse.freqs[(coarse.freqs > gap.gap_lo) & (coarse.freqs < gap.gap_hi)]
    if in_gap.size:
        centre = float(np.median(in_gap))
    wavelength = geom.lattice_constant_a / centre
    return slab_effective_index(
        geom.slab_thickness_d, geom.n_bulk, geom.n_clad, wavelength
    )


def _with_n_eff(params: SolverParams, n_eff: float) -> SolverParams:
    return SolverParams(
        cutoff=params.cutoff,
        n_bands=params.n_bands,
        n_eff=n_eff,
        neff_anchor_freq=params.neff_anchor_freq,
        grid_resolution=params.grid_resolution,
        parity_threshold=params.parity_threshold,
    )


def extract_guided_bands(bands: BandStructure, gap: GapReport) -> dict:
    """Even/odd defect-guided tracks, restricted to their in-gap points.

    A track qualifies where its frequency lies inside the bulk gap and the
    mode is confined to the defect row; boundary or folded bulk states fail
    the confinement test.
    """
    if not gap.has_gap:
        return {}
    found = {}
    nk = bands.k_norms.size
    for t in range(bands.tracks.shape[0]):
        band = bands.tracked_band(t)
        in_gap = (band.freqs > gap.gap_lo) & (band.freqs < gap.gap_hi)
        if in_gap.sum() < max(3, nk // 8):
            continue
        idx = np.where(in_gap)[0]
        probes = idx[:: max(1, idx.size // 4)][:5]
        confinement = np.mean(
            [
                transverse_confinement(band.eigvecs[i], bands.basis, bands.cell)
                for i in probes
            ]
        )
        if confinement < GUIDED_CONFINEMENT_MIN:
            continue
        restricted = band.restrict(in_gap)
        label = restricted.label
        if label == bandsolver.PARITY_UNCLASSIFIED:
            continue
        # Keep the lower-frequency candidate if two tracks share a parity.
        if label in found and found[label].freqs.min() <= restricted.freqs.min():
            continue
        found[label] = restricted
    return found


def solve_waveguide(
    geom: WaveguideGeometry,
    params: SolverParams | None = None,
    k_path: np.ndarray | None = None,
) -> WaveguideSolution:
    """Full pipeline: n_eff iteration, bulk gap, supercell sweep, n_g curves."""
    params = params or SolverParams()
    if k_path is None:
        k_path = waveguide_k_path()

    n_eff = _iterate_n_eff(geom, params, k_path)
    params_final = _with_n_eff(params, n_eff)

    bulk = bulk_band_sweep(
        geom, params_final,
        dispersion.bulk_k_path(geom.lattice_constant_a, 16),
        n_eff=n_eff,
    )
    gap = dispersion.detect_gap(bulk)

    bands = band_sweep(geom, params_final, k_path)
    guided = extract_guided_bands(bands, gap)
    gap.guided_windows = [
        GuidedWindow(label, float(b.freqs.min()), float(b.freqs.max()))
        for label, b in sorted(guided.items())
    ]

    ng_curves = {label: dispersion.group_index_fd(b) for label, b in guided.items()}
    return WaveguideSolution(
        geom=geom,
        params=params_final,
        n_eff=n_eff,
        gap=gap,
        bands=bands,
        guided=guided,
        ng_curves=ng_curves,
    )


def require_guided_band(solution: WaveguideSolution, label: str) -> TrackedBand:
    if label not in solution.guided:
        raise NumericalError(
            f"no {label} guided band found inside the bulk gap; "
            "check the geometry or solver cutoff"
        )
    return solution.guided[label]
