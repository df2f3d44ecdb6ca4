"""Group index, band-gap detection and wavelength mapping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bandsolver import BandStructure, BlochK, TrackedBand, assemble_operator
from .errors import ParameterError
from .geometry import EpsilonOperator, PlaneWaveBasis

FLAG_OK = "ok"
FLAG_NONMONOTONE = "nonmonotone"
FLAG_DIVERGENT = "divergent"

# |v_g|/c below this is reported as divergent (zone-edge extremum).
V_G_FLOOR = 1e-12


@dataclass(frozen=True)
class GroupIndexPoint:
    wavelength_nm: float
    a_over_lambda: float
    k_norm: float
    n_g: float
    flag: str = FLAG_OK


@dataclass
class GroupIndexCurve:
    """n_g(lambda) along one tracked band; flagged points kept separately."""

    points: list  # GroupIndexPoint, wavelength strictly monotone
    band_label: str
    excluded: list = field(default_factory=list)

    def wavelengths(self) -> np.ndarray:
        return np.array([p.wavelength_nm for p in self.points])

    def n_g_values(self) -> np.ndarray:
        return np.array([p.n_g for p in self.points])

    def frequencies(self) -> np.ndarray:
        return np.array([p.a_over_lambda for p in self.points])

    def k_norms(self) -> np.ndarray:
        return np.array([p.k_norm for p in self.points])

    def max_n_g(self) -> float:
        vals = self.n_g_values()
        return float(vals.max()) if vals.size else float("nan")

    def interp_at_n_g(self, target: float):
        """First crossing of n_g = target walking towards the zone edge.

        Returns an interpolated (wavelength_nm, a_over_lambda, k_norm) or
        None if the curve never reaches the target.
        """
        ng = self.n_g_values()
        lam = self.wavelengths()
        freq = self.frequencies()
        kn = self.k_norms()
        for i in range(len(ng) - 1):
            lo, hi = sorted((ng[i], ng[i + 1]))
            if lo <= target <= hi and ng[i] != ng[i + 1]:
                t = (target - ng[i]) / (ng[i + 1] - ng[i])
                return (
                    float(lam[i] + t * (lam[i + 1] - lam[i])),
                    float(freq[i] + t * (freq[i + 1] - freq[i])),
                    float(kn[i] + t * (kn[i + 1] - kn[i])),
                )
        return None


def group_index_fd(band: TrackedBand) -> GroupIndexCurve:
    """n_g = |dk/d(a/lambda)| by central differences on the tracked band.

    Interior points use the central stencil, end points the one-sided one.
    Points whose stencil spans a non-monotone frequency interval are
    flagged and excluded from the curve rather than silently dropped.
    """
    k = np.asarray(band.k_norms, dtype=float)
    w = np.asarray(band.freqs, dtype=float)
    if k.size < 3:
        raise ParameterError("band", "need at least 3 k samples for derivatives")

    n = k.size
    a = band.lattice_constant
    points, excluded = [], []
    diffs = np.diff(w)
    for i in range(n):
        at_boundary = False
        if i == 0:
            # Time reversal (with umklapp at the zone edge) forces a band
            # extremum at k = 0 and k = 0.5: the symmetric stencil is zero.
            at_boundary = abs(k[0]) < 1e-9
            dw, dk = diffs[0], k[1] - k[0]
            monotone = True
        elif i == n - 1:
            at_boundary = abs(k[-1] - 0.5) < 1e-9
            dw, dk = diffs[-1], k[-1] - k[-2]
            monotone = True
        else:
            dw, dk = w[i + 1] - w[i - 1], k[i + 1] - k[i - 1]
            monotone = diffs[i - 1] * diffs[i] > 0
        freq = w[i]
        lam = to_wavelength(a, freq)
        if at_boundary or abs(dw) < V_G_FLOOR * abs(dk):
            excluded.append(
                GroupIndexPoint(lam, freq, k[i], float("inf"), FLAG_DIVERGENT)
            )
            continue
        n_g = abs(dk / dw)
        if not monotone:
            excluded.append(
                GroupIndexPoint(lam, freq, k[i], n_g, FLAG_NONMONOTONE)
            )
            continue
        points.append(GroupIndexPoint(lam, freq, k[i], n_g))

    # The curve invariant requires strictly monotone wavelength; trailing
    # points past a band extremum (residual inter-guide tunnelling in the
    # supercell makes the band bend back slightly) are excluded instead.
    kept = points
    if len(points) >= 2:
        direction = np.sign(points[1].wavelength_nm - points[0].wavelength_nm)
        kept = [points[0]]
        for p in points[1:]:
            if direction * (p.wavelength_nm - kept[-1].wavelength_nm) > 0:
                kept.append(p)
            else:
                excluded.append(
                    GroupIndexPoint(
                        p.wavelength_nm, p.a_over_lambda, p.k_norm, p.n_g,
                        FLAG_NONMONOTONE,
                    )
                )
    return GroupIndexCurve(points=kept, band_label=band.label, excluded=excluded)


def group_index_hf(
    eigvec: np.ndarray,
    eps_op: EpsilonOperator,
    basis: PlaneWaveBasis,
    k: BlochK,
    lattice_constant: float | None = None,
) -> float:
    """Analytic n_g from the Hellmann-Feynman derivative of the eigenvalue.

    d(mu)/dk_x = <h| dTheta/dk_x |h> with (dTheta/dk_x)[i,j] =
    eta(G_i-G_j) * (2 k_x + G_ix + G_jx); returns inf when |v_g|/c is below
    the divergence floor.  At the zone centre, and at the zone edge when
    ``lattice_constant`` is given, the extremum is symmetry forced (time
    reversal plus umklapp) and the result is inf regardless of the residual
    supercell slope.
    """
    if abs(k.kx) < 1e-15:
        return float("inf")
    if lattice_constant is not None:
        k_norm = k.kx * lattice_constant / (2.0 * np.pi)
        if abs(abs(k_norm) - 0.5) < 1e-9:
            return float("inf")
    theta = assemble_operator(basis, eps_op, k)
    mu = float(np.real(np.vdot(eigvec, theta @ eigvec)))
    gx = basis.g_vectors[:, 0]
    slope = (2.0 * k.kx + gx[:, None] + gx[None, :]) * eps_op.eta_matrix
    dmu_dk = float(np.real(np.vdot(eigvec, slope @ eigvec)))
    if mu <= 0:
        return float("inf")
    # v_g/c = dmu/dk / (2 sqrt(mu)); n_g = c/|v_g|
    v_over_c = dmu_dk / (2.0 * np.sqrt(mu))
    if abs(v_over_c) < V_G_FLOOR:
        return float("inf")
    return float(1.0 / abs(v_over_c))


@dataclass(frozen=True)
class GuidedWindow:
    label: str
    freq_lo: float
    freq_hi: float


@dataclass
class GapReport:
    """Bulk TE band gap plus guided-mode windows located inside it."""

    gap_lo: float | None
    gap_hi: float | None
    guided_windows: list = field(default_factory=list)

    @property
    def has_gap(self) -> bool:
        return self.gap_lo is not None and self.gap_hi is not None

    def contains(self, freq: float) -> bool:
        return self.has_gap and self.gap_lo <= freq <= self.gap_hi


def detect_gap(bulk: BandStructure) -> GapReport:
    """Largest frequency window free of bulk TE bands.

    Uses band envelopes over the sampled path, so the result is invariant
    under reordering of the k samples.  Returns an explicit no-gap report
    when every inter-band window closes.
    """
    freqs = np.asarray(bulk.freqs)
    band_max = freqs.max(axis=0)
    band_min = freqs.min(axis=0)
    best = (None, None, 0.0)
    for i in range(freqs.shape[1] - 1):
        lo = band_max[i]
        hi = band_min[i + 1 :].min()  # guard against band crossings above
        if hi > lo and (hi - lo) > best[2]:
            best = (float(lo), float(hi), float(hi - lo))
    if best[0] is None:
        return GapReport(gap_lo=None, gap_hi=None)
    return GapReport(gap_lo=best[0], gap_hi=best[1])


def to_wavelength(a_nm: float, a_over_lambda: float, offset_nm: float = 0.0) -> float:
    """lambda = a/(a/lambda) + offset; the offset models fabrication shift."""
    if a_over_lambda <= 0:
        raise ParameterError("a_over_lambda", "must be > 0")
    return a_nm / a_over_lambda + offset_nm


def bulk_k_path(lattice_constant: float, points_per_segment: int = 16) -> np.ndarray:
    """Gamma-M-K-Gamma path (rad/nm) for the triangular primitive cell.

    Returned as an (n, 2) array of k vectors; band extrema of the bulk
    crystal lie on this boundary.
    """
    a = lattice_constant
    gamma = np.array([0.0, 0.0])
    m_pt = np.array([0.0, 2.0 * np.pi / (np.sqrt(3.0) * a)])
    k_pt = np.array([2.0 * np.pi / (3.0 * a), 2.0 * np.pi / (np.sqrt(3.0) * a)])
    path = []
    for p, q in ((gamma, m_pt), (m_pt, k_pt), (k_pt, gamma)):
        for t in np.linspace(0.0, 1.0, points_per_segment, endpoint=False):
            path.append(p + t * (q - p))
    path.append(gamma)
    return np.array(path)
