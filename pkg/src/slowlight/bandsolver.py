"""Plane-wave TE eigenproblem for the supercell, band tracking and fields.

The master operator is Theta[i,j] = eta(G_i-G_j) * (k+G_i).(k+G_j) acting on
the out-of-plane H field; eigenvalues mu = (omega/c)^2 give the dimensionless
frequency a/lambda = (a/2pi)*sqrt(mu).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import NumericalError, ParameterError
from .geometry import (
    EpsilonOperator,
    PlaneWaveBasis,
    Supercell,
    WaveguideGeometry,
    build_basis,
    build_supercell,
    cell_grid,
    epsilon_fourier,
    slab_effective_index,
)

PARITY_EVEN = "even"
PARITY_ODD = "odd"
PARITY_UNCLASSIFIED = "unclassified"


@dataclass(frozen=True)
class BlochK:
    """In-plane Bloch wavevector in rad/nm (ky = 0 on the waveguide path)."""

    kx: float
    ky: float = 0.0

    def k_norm(self, lattice_constant: float) -> float:
        return self.kx * lattice_constant / (2.0 * np.pi)

    def as_array(self) -> np.ndarray:
        return np.array([self.kx, self.ky])


@dataclass(frozen=True)
class SolverParams:
    """Knobs for the plane-wave solve; defaults target the paper device.

    ``cutoff`` 8 keeps the default supercell basis under two thousand plane
    waves (band frequencies move by < 1e-3 relative against cutoff 9+).
    """

    cutoff: int = 8
    n_bands: int = 30
    n_eff: float | None = None  # None: slab TE0 index at the anchor frequency
    neff_anchor_freq: float = 0.37  # a/lambda used to seed the effective index
    grid_resolution: int = 64
    parity_threshold: float = 0.9

    def resolve_n_eff(self, geom: WaveguideGeometry) -> float:
        if self.n_eff is not None:
            return self.n_eff
        wavelength = geom.lattice_constant_a / self.neff_anchor_freq
        return slab_effective_index(
            geom.slab_thickness_d, geom.n_bulk, geom.n_clad, wavelength
        )


def assemble_operator(
    basis: PlaneWaveBasis, eps_op: EpsilonOperator, k: BlochK
) -> np.ndarray:
    """Hermitian TE operator at one Bloch point (symmetrised in place)."""
    n = len(basis)
    if eps_op.eta_matrix.shape != (n, n):
        raise NumericalError(
            f"basis ({n}) and eta matrix {eps_op.eta_matrix.shape} disagree"
        )
    kg = basis.g_vectors + k.as_array()[None, :]
    dot = kg @ kg.T
    theta = eps_op.eta_matrix * dot
    return 0.5 * (theta + theta.conj().T)


@dataclass(frozen=True)
class EigenSolution:
    mu: np.ndarray  # ascending eigenvalues (omega/c)^2 in (rad/nm)^2
    vectors: np.ndarray  # orthonormal columns


def solve_bands(theta: np.ndarray, n_bands: int) -> EigenSolution:
    """Lowest ``n_bands`` eigenpairs of the Hermitian operator."""
    n = theta.shape[0]
    if n_bands < 1 or n_bands > n:
        raise ParameterError("n_bands", f"must be in [1, {n}], got {n_bands}")
    try:
        mu, vecs = sla.eigh(
            theta, subset_by_index=(0, n_bands - 1), check_finite=False
        )
    except (sla.LinAlgError, ValueError) as exc:
        sym_res = float(np.abs(theta - theta.conj().T).max())
        scale = float(np.abs(theta).max())
        raise NumericalError(
            "eigensolver failed "
            f"(dim {n}, max|Theta| {scale:.3e}, hermiticity residual {sym_res:.3e})"
        ) from exc
    return EigenSolution(mu=np.maximum(mu, 0.0), vectors=vecs)


def mu_to_freq(mu: np.ndarray, lattice_constant: float) -> np.ndarray:
    """(omega/c)^2 -> dimensionless a/lambda."""
    return lattice_constant / (2.0 * np.pi) * np.sqrt(np.maximum(mu, 0.0))


def classify_parity(
    eigvec: np.ndarray, basis: PlaneWaveBasis, threshold: float = 0.9
) -> str:
    """Sign of the overlap between a mode and its y mirror.

    The in-plane E parity equals the H_z parity (epsilon is y even and the
    x derivative keeps y parity), so the overlap is evaluated directly on
    the plane-wave coefficients: s = <h, P h> with (P h)_G = h_(Gx,-Gy).
    """
    mirror = basis.mirror_y_map()
    s = float(np.real(np.vdot(eigvec, eigvec[mirror])))
    if s > threshold:
        return PARITY_EVEN
    if s < -threshold:
        return PARITY_ODD
    return PARITY_UNCLASSIFIED


def parity_overlap(eigvec: np.ndarray, basis: PlaneWaveBasis) -> float:
    mirror = basis.mirror_y_map()
    return float(np.real(np.vdot(eigvec, eigvec[mirror])))


@dataclass
class BandStructure:
    """Frequencies, parities and eigenvectors over an ordered k path."""

    lattice_constant: float
    n_eff: float
    k_norms: np.ndarray  # (nk,)
    freqs: np.ndarray  # (nk, nb) ascending per k
    parities: np.ndarray  # (nk, nb) strings
    eigvecs: list  # nk arrays of shape (n_pw, nb)
    basis: PlaneWaveBasis
    cell: Supercell
    eps_op: EpsilonOperator
    tracks: np.ndarray = None  # (n_tracks, nk) band indices after tracking

    @property
    def n_bands(self) -> int:
        return self.freqs.shape[1]

    def tracked_band(self, track_index: int) -> "TrackedBand":
        idx = self.tracks[track_index]
        nk = self.k_norms.size
        freqs = self.freqs[np.arange(nk), idx]
        parities = self.parities[np.arange(nk), idx]
        vecs = np.stack([self.eigvecs[i][:, idx[i]] for i in range(nk)])
        labels, counts = np.unique(parities, return_counts=True)
        label = labels[np.argmax(counts)]
        return TrackedBand(
            k_norms=self.k_norms.copy(),
            freqs=freqs,
            parities=parities,
            eigvecs=vecs,
            label=str(label),
            lattice_constant=self.lattice_constant,
            n_eff=self.n_eff,
            basis=self.basis,
            cell=self.cell,
            eps_op=self.eps_op,
        )


@dataclass
class TrackedBand:
    """One band followed through the sweep, self-contained for field work."""

    k_norms: np.ndarray
    freqs: np.ndarray
    parities: np.ndarray
    eigvecs: np.ndarray  # (nk, n_pw)
    label: str
    lattice_constant: float
    n_eff: float
    basis: PlaneWaveBasis
    cell: Supercell
    eps_op: EpsilonOperator

    def __len__(self) -> int:
        return self.k_norms.size

    def bloch_k(self, i: int) -> BlochK:
        return BlochK(kx=2.0 * np.pi * self.k_norms[i] / self.lattice_constant)

    def restrict(self, mask: np.ndarray) -> "TrackedBand":
        return TrackedBand(
            k_norms=self.k_norms[mask],
            freqs=self.freqs[mask],
            parities=self.parities[mask],
            eigvecs=self.eigvecs[mask],
            label=self.label,
            lattice_constant=self.lattice_constant,
            n_eff=self.n_eff,
            basis=self.basis,
            cell=self.cell,
            eps_op=self.eps_op,
        )


def _track_assignment(prev_vecs: np.ndarray, new_vecs: np.ndarray) -> np.ndarray:
    """Map each previous band to the new band with maximal overlap.

    Conflicts are resolved optimally; assignments whose overlap falls below
    0.5 fall back to frequency ordering (identity on sorted bands).
    """
    overlap = np.abs(prev_vecs.conj().T @ new_vecs)
    nb = overlap.shape[0]
    from scipy.optimize import linear_sum_assignment

    # Small diagonal bias keeps degenerate pairs in frequency order.
    row, col = linear_sum_assignment(-(overlap + 1e-9 * np.eye(nb)))
    perm = np.empty(nb, dtype=int)
    perm[row] = col
    weak = overlap[np.arange(nb), perm] < 0.5
    if np.any(weak):
        # Frequency-order fallback for the weakly matched subset.
        weak_rows = np.where(weak)[0]
        free_cols = sorted(set(perm[weak_rows]))
        for r, c in zip(sorted(weak_rows), free_cols):
            perm[r] = c
    return perm


def track_bands(freqs: np.ndarray, eigvecs: list) -> np.ndarray:
    """Follow bands across k by eigenvector continuity.

    Returns an (n_bands, nk) integer array: tracks[t, i] is the band index
    (in the per-k ascending ordering) occupied by track t at k sample i.
    """
    nk, nb = freqs.shape
    tracks = np.zeros((nb, nk), dtype=int)
    tracks[:, 0] = np.arange(nb)
    current = np.arange(nb)
    for i in range(1, nk):
        prev = eigvecs[i - 1][:, current]
        perm = _track_assignment(prev, eigvecs[i])
        current = perm
        tracks[:, i] = current
    return tracks


def band_sweep(
    geom: WaveguideGeometry,
    params: SolverParams,
    k_path: np.ndarray,
    cell: Supercell | None = None,
) -> BandStructure:
    """Solve the TE bands over a monotone path of normalised k_x values.

    ``k_path`` holds k_x * a / 2pi values in [0, 0.5].  Per-k solves are
    independent; results are deterministic for fixed inputs.
    """
    k_path = np.asarray(k_path, dtype=float)
    if k_path.ndim != 1 or k_path.size < 1:
        raise ParameterError("k_path", "must be a non-empty 1D array")
    if np.any(np.diff(k_path) <= 0) and k_path.size > 1:
        raise ParameterError("k_path", "must be strictly increasing")
    if k_path.min() < 0 or k_path.max() > 0.5 + 1e-12:
        raise ParameterError("k_path", "k_x*a/2pi must lie in [0, 0.5]")

    a = geom.lattice_constant_a
    if cell is None:
        cell = build_supercell(geom)
    basis = build_basis(cell, params.cutoff)
    n_eff = params.resolve_n_eff(geom)
    eps_op = epsilon_fourier(cell, geom, basis, n_eff)

    nk = k_path.size
    freqs = np.zeros((nk, params.n_bands))
    eigvecs = []
    for i, k_norm in enumerate(k_path):
        k = BlochK(kx=2.0 * np.pi * k_norm / a)
        theta = assemble_operator(basis, eps_op, k)
        sol = solve_bands(theta, params.n_bands)
        freqs[i] = mu_to_freq(sol.mu, a)
        eigvecs.append(np.ascontiguousarray(sol.vectors))

    parities = np.empty((nk, params.n_bands), dtype=object)
    mirror = basis.mirror_y_map()
    for i in range(nk):
        v = eigvecs[i]
        s = np.real(np.einsum("ij,ij->j", v.conj(), v[mirror]))
        lab = np.full(params.n_bands, PARITY_UNCLASSIFIED, dtype=object)
        lab[s > params.parity_threshold] = PARITY_EVEN
        lab[s < -params.parity_threshold] = PARITY_ODD
        parities[i] = lab

    tracks = track_bands(freqs, eigvecs) if nk > 1 else np.arange(params.n_bands)[:, None]
    return BandStructure(
        lattice_constant=a,
        n_eff=n_eff,
        k_norms=k_path,
        freqs=freqs,
        parities=parities,
        eigvecs=eigvecs,
        basis=basis,
        cell=cell,
        eps_op=eps_op,
        tracks=tracks,
    )


def bulk_band_sweep(
    geom: WaveguideGeometry,
    params: SolverParams,
    k_vectors: np.ndarray,
    n_eff: float | None = None,
) -> BandStructure:
    """Bands of the defect-free primitive cell over explicit k vectors.

    Used for gap detection; k may leave the waveguide axis, so parities are
    not classified and ``k_norms`` stores the path position index.
    """
    from .geometry import build_primitive_cell

    k_vectors = np.atleast_2d(np.asarray(k_vectors, dtype=float))
    a = geom.lattice_constant_a
    cell = build_primitive_cell(geom)
    basis = build_basis(cell, params.cutoff)
    if n_eff is None:
        n_eff = params.resolve_n_eff(geom)
    eps_op = epsilon_fourier(cell, geom, basis, n_eff)

    nk = k_vectors.shape[0]
    n_bands = min(params.n_bands, len(basis))
    freqs = np.zeros((nk, n_bands))
    eigvecs = []
    for i, (kx, ky) in enumerate(k_vectors):
        theta = assemble_operator(basis, eps_op, BlochK(kx=kx, ky=ky))
        sol = solve_bands(theta, n_bands)
        freqs[i] = mu_to_freq(sol.mu, a)
        eigvecs.append(sol.vectors)
    parities = np.full((nk, n_bands), PARITY_UNCLASSIFIED, dtype=object)
    return BandStructure(
        lattice_constant=a,
        n_eff=n_eff,
        k_norms=np.arange(nk, dtype=float),
        freqs=freqs,
        parities=parities,
        eigvecs=eigvecs,
        basis=basis,
        cell=cell,
        eps_op=eps_op,
        tracks=None,
    )


@dataclass(frozen=True)
class ModeField:
    """In-plane fields on the cell grid, normalised to max |E| = 1."""

    x_nm: np.ndarray
    y_nm: np.ndarray
    Hz: np.ndarray  # (ny, nx)
    Ex: np.ndarray
    Ey: np.ndarray
    kx: float
    lattice_constant: float

    def e_intensity(self) -> np.ndarray:
        return np.abs(self.Ex) ** 2 + np.abs(self.Ey) ** 2


def reconstruct_field(
    eigvec: np.ndarray,
    basis: PlaneWaveBasis,
    k: BlochK,
    eps_grid: np.ndarray,
    grid_resolution: int,
    cell: Supercell,
    n_periods_x: int = 1,
) -> ModeField:
    """Bloch synthesis of H_z and the TE in-plane E field.

    E is proportional to (1/eps(r)) * (dHz/dy, -dHz/dx); the derivatives are
    evaluated spectrally and divided pointwise by the rasterised epsilon.
    """
    x, y = cell_grid(cell, grid_resolution, n_periods_x)
    if eps_grid.shape != (y.size, x.size):
        raise ParameterError(
            "eps_grid",
            f"shape {eps_grid.shape} does not match the ({y.size}, {x.size}) grid",
        )
    kg = basis.g_vectors + k.as_array()[None, :]
    phase_x = np.exp(1j * np.outer(x, kg[:, 0]))  # (nx, n_pw)
    phase_y = np.exp(1j * np.outer(kg[:, 1], y))  # (n_pw, ny)

    def synth(coeff):
        return ((phase_x * coeff[None, :]) @ phase_y).T  # (ny, nx)

    hz = synth(eigvec)
    dhz_dx = synth(1j * kg[:, 0] * eigvec)
    dhz_dy = synth(1j * kg[:, 1] * eigvec)
    ex = dhz_dy / eps_grid
    ey = -dhz_dx / eps_grid
    norm = np.sqrt(np.abs(ex) ** 2 + np.abs(ey) ** 2).max()
    if norm == 0:
        raise NumericalError("reconstructed field is identically zero")
    return ModeField(
        x_nm=x,
        y_nm=y,
        Hz=hz / norm,
        Ex=ex / norm,
        Ey=ey / norm,
        kx=k.kx,
        lattice_constant=cell.period_x,
    )


def transverse_confinement(
    eigvec: np.ndarray,
    basis: PlaneWaveBasis,
    cell: Supercell,
    half_width: float | None = None,
) -> float:
    """Fraction of the |H_z|^2 energy within |y| <= half_width.

    Used to tell defect-guided modes (localised on the missing row) from
    folded bulk or boundary states.  Default half width is two hole rows.
    """
    if half_width is None:
        half_width = np.sqrt(3.0) * cell.period_x
    x, y = cell_grid(cell, 16)
    kg = basis.g_vectors  # the Bloch phase drops out of |Hz|^2 line integrals
    phase_x = np.exp(1j * np.outer(x, kg[:, 0]))
    phase_y = np.exp(1j * np.outer(kg[:, 1], y))
    hz = ((phase_x * eigvec[None, :]) @ phase_y).T
    intensity = np.abs(hz) ** 2
    line = intensity.sum(axis=1)  # integrate over x
    total = line.sum()
    if total == 0:
        return 0.0
    inside = line[np.abs(y) <= half_width].sum()
    return float(inside / total)
