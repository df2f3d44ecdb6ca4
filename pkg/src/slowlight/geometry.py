"""Waveguide geometry, supercell construction and Fourier dielectric operators.

All lengths are in nanometres; reciprocal vectors in rad/nm.  The slab is
collapsed to a 2D problem through the effective index of its fundamental
TE mode, so every dielectric value below is an *effective* permittivity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import j1

from .errors import NumericalError, ParameterError

SQRT3 = np.sqrt(3.0)


@dataclass(frozen=True)
class WaveguideGeometry:
    """Line-defect (W1) waveguide in a triangular lattice of air holes.

    ``rows_per_side`` counts the hole rows kept on each side of the removed
    row.  ``emitter_depth`` is measured from the top slab surface.
    """

    lattice_constant_a: float
    hole_radius_r: float
    slab_thickness_d: float
    n_bulk: float
    n_clad: float = 1.0
    rows_per_side: int = 5
    emitter_depth: float = 40.0

    def __post_init__(self):
        a = self.lattice_constant_a
        if a <= 0:
            raise ParameterError("lattice_constant_a", f"must be > 0, got {a}")
        # r == 0 is allowed as the degenerate hole-free (uniform) medium.
        if not 0 <= self.hole_radius_r < a / 2:
            raise ParameterError(
                "hole_radius_r",
                f"must satisfy 0 <= r < a/2 = {a / 2} nm, got {self.hole_radius_r}",
            )
        if self.slab_thickness_d <= 0:
            raise ParameterError("slab_thickness_d", "must be > 0")
        if self.n_clad < 1:
            raise ParameterError("n_clad", f"must be >= 1, got {self.n_clad}")
        if self.n_bulk <= self.n_clad:
            raise ParameterError(
                "n_bulk", f"must exceed n_clad = {self.n_clad}, got {self.n_bulk}"
            )
        if self.rows_per_side < 3:
            raise ParameterError(
                "rows_per_side",
                f"must be >= 3 to confine the guided mode, got {self.rows_per_side}",
            )
        if not 0 <= self.emitter_depth <= self.slab_thickness_d:
            raise ParameterError(
                "emitter_depth",
                f"must lie within the slab [0, {self.slab_thickness_d}] nm, "
                f"got {self.emitter_depth}",
            )

    @property
    def air_fill_fraction(self) -> float:
        """Hole area fraction of the undisturbed bulk crystal."""
        a = self.lattice_constant_a
        return 2.0 * np.pi * self.hole_radius_r**2 / (SQRT3 * a * a)


@dataclass(frozen=True)
class Supercell:
    """Periodic cell: two lattice vectors plus the hole layout inside it.

    For the W1 supercell ``lattice_vector_x = (a, 0)`` and
    ``lattice_vector_y = (a/2, W)`` with ``W = (2*rows_per_side + 1)*sqrt(3)/2*a``;
    the a/2 shear makes the periodic continuation a perfect triangular
    lattice (a rectangular cell of this height leaves a stacking fault at
    the boundary whose interface states pollute the band gap).
    The primitive bulk cell uses the oblique triangular-lattice vectors.
    """

    lattice_vector_x: tuple[float, float]
    lattice_vector_y: tuple[float, float]
    hole_centers: np.ndarray  # (n_holes, 2)
    hole_radius: float

    @property
    def area(self) -> float:
        ax, ay = self.lattice_vector_x
        bx, by = self.lattice_vector_y
        return abs(ax * by - ay * bx)

    @property
    def period_x(self) -> float:
        return self.lattice_vector_x[0]

    @property
    def width_y(self) -> float:
        return self.lattice_vector_y[1]

    def reciprocal_vectors(self) -> tuple[np.ndarray, np.ndarray]:
        """b1, b2 with a_i . b_j = 2 pi delta_ij."""
        A = np.array([self.lattice_vector_x, self.lattice_vector_y]).T
        B = 2.0 * np.pi * np.linalg.inv(A).T
        return B[:, 0].copy(), B[:, 1].copy()


def build_supercell(geom: WaveguideGeometry) -> Supercell:
    """Build the W1 supercell: triangular hole rows with the y=0 row removed.

    Rows sit at y = +-j * sqrt(3)/2 * a for j = 1..rows_per_side, alternate
    rows offset by a/2 along x, one hole per row per period.  The layout is
    mirror symmetric in y and the cell repeats with period a along x.
    """
    a = geom.lattice_constant_a
    n = geom.rows_per_side
    row_pitch = SQRT3 / 2.0 * a
    width = (2 * n + 1) * row_pitch

    centers = []
    for j in range(1, n + 1):
        x = (j % 2) * a / 2.0
        centers.append((x, j * row_pitch))
        centers.append((x, -j * row_pitch))
    centers.sort(key=lambda c: (c[1], c[0]))
    return Supercell(
        lattice_vector_x=(a, 0.0),
        lattice_vector_y=(a / 2.0, width),
        hole_centers=np.array(centers, dtype=float),
        hole_radius=geom.hole_radius_r,
    )


def build_primitive_cell(geom: WaveguideGeometry) -> Supercell:
    """Primitive triangular-lattice cell (one hole, no defect) for bulk bands."""
    a = geom.lattice_constant_a
    return Supercell(
        lattice_vector_x=(a, 0.0),
        lattice_vector_y=(a / 2.0, SQRT3 / 2.0 * a),
        hole_centers=np.zeros((1, 2)),
        hole_radius=geom.hole_radius_r,
    )


@dataclass(frozen=True)
class PlaneWaveBasis:
    """Truncated reciprocal-lattice basis G = m1*b1 + m2*b2.

    Truncation is circular: |G| <= cutoff * 2*pi / period_x, so the
    resolution is isotropic regardless of the supercell aspect ratio.
    The set is closed under negation and contains G = 0.
    """

    g_vectors: np.ndarray  # (n, 2)
    m_indices: np.ndarray  # (n, 2) integers
    cutoff: int
    b1: np.ndarray = field(repr=False, default=None)
    b2: np.ndarray = field(repr=False, default=None)

    def __len__(self) -> int:
        return self.g_vectors.shape[0]

    def index_map(self) -> dict:
        return {(int(m1), int(m2)): i for i, (m1, m2) in enumerate(self.m_indices)}

    def negation_map(self) -> np.ndarray:
        """perm[i] = index of -G_i."""
        lookup = self.index_map()
        return np.array(
            [lookup[(-int(m1), -int(m2))] for m1, m2 in self.m_indices], dtype=int
        )

    def mirror_y_map(self) -> np.ndarray:
        """perm[i] = index of (Gx_i, -Gy_i); requires a mirror-closed basis."""
        lookup = self.index_map()
        # Solve integer coordinates of the mirrored vector from b1, b2.
        B = np.array([self.b1, self.b2]).T
        mirrored = self.g_vectors * np.array([1.0, -1.0])
        m_mirror = np.linalg.solve(B, mirrored.T).T
        m_round = np.rint(m_mirror).astype(int)
        if not np.allclose(m_mirror, m_round, atol=1e-9):
            raise NumericalError("basis is not closed under the y mirror")
        try:
            return np.array([lookup[(int(p), int(q))] for p, q in m_round], dtype=int)
        except KeyError as exc:
            raise NumericalError("basis is not closed under the y mirror") from exc


def build_basis(cell: Supercell, cutoff: int) -> PlaneWaveBasis:
    """Circularly truncated plane-wave basis for a cell.

    ``cutoff`` is the maximum |G| in units of 2*pi/period_x; along y the
    integer range scales with the cell aspect ratio automatically.
    """
    if cutoff < 1:
        raise ParameterError("cutoff", f"must be >= 1, got {cutoff}")
    b1, b2 = cell.reciprocal_vectors()
    g_max = cutoff * 2.0 * np.pi / cell.period_x

    # Conservative integer search ranges from the reciprocal metric.
    norm_b1 = np.linalg.norm(b1)
    norm_b2 = np.linalg.norm(b2)
    area_recip = abs(b1[0] * b2[1] - b1[1] * b2[0])
    m1_max = int(np.ceil(g_max * norm_b2 / area_recip)) + 1
    m2_max = int(np.ceil(g_max * norm_b1 / area_recip)) + 1

    m1, m2 = np.meshgrid(
        np.arange(-m1_max, m1_max + 1), np.arange(-m2_max, m2_max + 1), indexing="ij"
    )
    m = np.stack([m1.ravel(), m2.ravel()], axis=-1)
    g = m[:, :1] * b1[None, :] + m[:, 1:2] * b2[None, :]
    keep = np.einsum("ij,ij->i", g, g) <= g_max * g_max * (1.0 + 1e-12)
    m = m[keep]
    g = g[keep]
    # Deterministic ordering: by |G| then lexicographic on integers.
    order = np.lexsort((m[:, 1], m[:, 0], np.einsum("ij,ij->i", g, g)))
    return PlaneWaveBasis(
        g_vectors=g[order], m_indices=m[order], cutoff=cutoff, b1=b1, b2=b2
    )


@dataclass(frozen=True)
class EpsilonOperator:
    """Fourier-space dielectric: eps_matrix[i,j] = eps(G_i - G_j), eta = inverse."""

    eps_matrix: np.ndarray
    eta_matrix: np.ndarray

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.eps_matrix)


def _disk_form_factor(g_norm: np.ndarray, radius: float) -> np.ndarray:
    """2*J1(|G| r)/(|G| r), with the |G|r -> 0 limit equal to 1."""
    x = g_norm * radius
    out = np.ones_like(x)
    nz = x > 1e-12
    out[nz] = 2.0 * j1(x[nz]) / x[nz]
    return out


def epsilon_fourier(
    cell: Supercell, geom: WaveguideGeometry, basis: PlaneWaveBasis, n_eff: float
) -> EpsilonOperator:
    """Assemble eps(G - G') for air disks in an effective background medium.

    eps(G) = n_eff^2 delta_G0 + (n_clad^2 - n_eff^2) * (pi r^2 / A_cell)
             * sum_j exp(-i G . r_j) * 2 J1(|G| r)/(|G| r)

    eta is the matrix inverse of the truncated eps matrix (inverse rule),
    which converges much faster for hard disks than transforming 1/eps.
    """
    if not (geom.n_clad < n_eff <= geom.n_bulk):
        raise ParameterError(
            "n_eff", f"must lie in (n_clad, n_bulk] = ({geom.n_clad}, {geom.n_bulk}]"
        )
    m = basis.m_indices
    n_g = len(basis)

    # eps(G_i - G_j) depends only on the integer differences; tabulate once.
    d1_max = int(m[:, 0].max() - m[:, 0].min())
    d2_max = int(m[:, 1].max() - m[:, 1].min())
    dm1 = np.arange(-d1_max, d1_max + 1)
    dm2 = np.arange(-d2_max, d2_max + 1)
    D1, D2 = np.meshgrid(dm1, dm2, indexing="ij")
    g_diff = D1[..., None] * basis.b1[None, None, :] + D2[..., None] * basis.b2[None, None, :]
    g_norm = np.sqrt(np.einsum("abj,abj->ab", g_diff, g_diff))

    r = cell.hole_radius
    fill = np.pi * r * r / cell.area
    phases = np.exp(-1j * np.einsum("abj,kj->abk", g_diff, cell.hole_centers))
    structure = phases.sum(axis=-1)
    table = (geom.n_clad**2 - n_eff**2) * fill * _disk_form_factor(g_norm, r) * structure
    table[d1_max, d2_max] += n_eff**2

    if np.abs(table.imag).max() < 1e-11 * max(np.abs(table.real).max(), 1.0):
        table = table.real.copy()  # inversion-symmetric hole set

    idx1 = (m[:, 0][:, None] - m[:, 0][None, :]) + d1_max
    idx2 = (m[:, 1][:, None] - m[:, 1][None, :]) + d2_max
    eps = table[idx1, idx2]
    eps = 0.5 * (eps + eps.conj().T)

    try:
        eta = np.linalg.inv(eps)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            "eps(G-G') matrix is singular; increase the plane-wave cutoff"
        ) from exc
    residual = np.abs(eta @ eps - np.eye(n_g)).max()
    if not np.isfinite(residual) or residual > 1e-8:
        raise NumericalError(
            f"eps(G-G') inversion failed (residual {residual:.2e}); "
            "increase the plane-wave cutoff"
        )
    eta = 0.5 * (eta + eta.conj().T)
    return EpsilonOperator(eps_matrix=eps, eta_matrix=eta)


def slab_effective_index(
    d: float, n_core: float, n_clad: float, wavelength: float
) -> float:
    """Effective index of the fundamental even TE mode of a symmetric slab.

    Solves kappa*tan(kappa*d/2) = gamma with kappa = k0*sqrt(n_core^2-n_eff^2),
    gamma = k0*sqrt(n_eff^2-n_clad^2).  TE0 has no cutoff, so a root always
    exists for n_core > n_clad.
    """
    if d <= 0:
        raise ParameterError("d", "slab thickness must be > 0")
    if wavelength <= 0:
        raise ParameterError("wavelength", "must be > 0")
    if n_core < n_clad:
        raise ParameterError("n_core", "must be >= n_clad")
    if n_core == n_clad:
        return float(n_core)

    k0 = 2.0 * np.pi / wavelength
    v = k0 * (d / 2.0) * np.sqrt(n_core**2 - n_clad**2)

    # Parametrise by u = kappa*d/2 in (0, min(V, pi/2)): g(u) = u*tan(u) -
    # sqrt(V^2 - u^2) increases monotonically from -V to +inf, so the TE0
    # root is unique and bracketed.
    u_hi = min(v, np.pi / 2.0) * (1.0 - 1e-15)

    def g(u):
        return u * np.tan(u) - np.sqrt(max(v * v - u * u, 0.0))

    lo, hi = 1e-15, u_hi
    if g(hi) < 0:  # root pinned at u -> V (thin slab, weak guiding)
        u = v
    else:
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if g(mid) < 0:
                lo = mid
            else:
                hi = mid
        u = 0.5 * (lo + hi)

    kappa = 2.0 * u / d
    n_eff = np.sqrt(n_core**2 - (kappa / k0) ** 2)
    return float(min(max(n_eff, n_clad * (1 + 1e-15)), n_core))


def cell_grid(cell: Supercell, grid_resolution: int, n_periods_x: int = 1):
    """Midpoint sampling grid shared by rasterisation and field synthesis.

    Returns (x, y) 1D arrays; pixel centres are symmetric about y = 0 so the
    y mirror maps the grid onto itself exactly.
    """
    if grid_resolution < 16:
        raise ParameterError("grid_resolution", "must be >= 16 points per period")
    a = cell.period_x
    w = cell.width_y
    nx = grid_resolution * n_periods_x
    ny = int(round(grid_resolution * w / a))
    ny += ny % 2  # even count keeps the grid mirror symmetric
    dx = a * n_periods_x / nx
    dy = w / ny
    x = (np.arange(nx) + 0.5) * dx
    y = -w / 2.0 + (np.arange(ny) + 0.5) * dy
    return x, y


def rasterize_epsilon(
    cell: Supercell,
    geom: WaveguideGeometry,
    n_eff: float,
    grid_resolution: int,
    n_periods_x: int = 1,
) -> np.ndarray:
    """Hard-edged permittivity map on the cell grid, shape (ny, nx).

    Pixel values are n_clad^2 inside holes and n_eff^2 outside; periodic
    images of the holes one cell away in each direction are included so
    disks crossing the cell boundary stay circular.
    """
    x, y = cell_grid(cell, grid_resolution, n_periods_x)
    eps = np.full((y.size, x.size), n_eff**2, dtype=float)
    r = cell.hole_radius
    if r <= 0 or cell.hole_centers.size == 0:
        return eps

    ax = np.array(cell.lattice_vector_x)
    ay = np.array(cell.lattice_vector_y)
    X, Y = np.meshgrid(x, y, indexing="xy")
    for cx, cy in cell.hole_centers:
        for px in (-1, 0, 1) if n_periods_x == 1 else range(-1, n_periods_x + 1):
            for py in (-1, 0, 1):
                hx = cx + px * ax[0] + py * ay[0]
                hy = cy + px * ax[1] + py * ay[1]
                mask = (X - hx) ** 2 + (Y - hy) ** 2 <= r * r
                eps[mask] = geom.n_clad**2
    return eps
