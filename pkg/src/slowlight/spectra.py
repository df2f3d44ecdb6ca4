"""PL spectrum analysis: background removal, Fabry-Perot fringe fitting,
group index from the free spectral range, and Q factors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.signal

from .errors import DataError, FitConvergenceError, ParameterError
from .fileio import read_two_column_csv
from .leastsq import levenberg_marquardt


@dataclass(frozen=True)
class Spectrum:
    wavelength_nm: np.ndarray
    intensity: np.ndarray

    def __post_init__(self):
        w, y = np.asarray(self.wavelength_nm), np.asarray(self.intensity)
        if w.shape != y.shape or w.ndim != 1:
            raise DataError("wavelength and intensity must be equal-length 1D arrays")
        if not np.all(np.isfinite(w)) or not np.all(np.isfinite(y)):
            raise DataError("spectrum contains non-finite values")
        if np.any(np.diff(w) <= 0):
            raise DataError("wavelengths must be strictly increasing")
        if np.any(y < 0):
            raise DataError("intensities must be non-negative")

    def __len__(self) -> int:
        return self.wavelength_nm.size


def load_spectrum(path) -> Spectrum:
    """Two-column CSV (wavelength_nm, counts) -> validated Spectrum.

    Rows are sorted by wavelength; duplicate wavelengths are rejected.
    """
    w, y = read_two_column_csv(path)
    order = np.argsort(w, kind="stable")
    w, y = w[order], y[order]
    if np.any(np.diff(w) == 0):
        dup = w[:-1][np.diff(w) == 0][0]
        raise DataError(f"duplicate wavelength {dup} nm in {path}")
    return Spectrum(wavelength_nm=w, intensity=y)


@dataclass(frozen=True)
class LorentzianPeak:
    center_nm: float
    fwhm_nm: float
    amplitude: float
    center_err: float = float("nan")
    fwhm_err: float = float("nan")
    amplitude_err: float = float("nan")

    def __post_init__(self):
        if self.fwhm_nm <= 0:
            raise DataError(f"peak FWHM must be > 0, got {self.fwhm_nm}")
        if self.amplitude <= 0:
            raise DataError(f"peak amplitude must be > 0, got {self.amplitude}")


@dataclass
class FringeAnalysis:
    peaks: list  # LorentzianPeak, ascending in center
    ng_points: list  # (midpoint_wavelength_nm, n_g)
    q_points: list  # (wavelength_nm, Q)
    waveguide_length_nm: float
    background: dict = field(default_factory=dict)


def _gaussian_offset(lam, p):
    a, mu, sigma, c = p
    return a * np.exp(-0.5 * ((lam - mu) / sigma) ** 2) + c


def subtract_background(s: Spectrum, n_clip_passes: int = 2) -> Spectrum:
    """Remove a broad Gaussian background (plus constant offset).

    The Gaussian is fitted to the full spectrum; narrow fringes are
    iteratively excluded by sigma clipping of positive outliers so the fit
    follows the broad envelope.  The result is clamped at zero.
    """
    if len(s) < 10:
        raise ParameterError("spectrum", "need at least 10 points")
    lam, y = s.wavelength_nm, s.intensity
    if y.max() == 0:
        return Spectrum(lam.copy(), np.zeros_like(y))

    # Moment-based seed on a median-smoothed copy so fringes do not drive it.
    width = max(3, len(y) // 25) | 1
    smooth = scipy.signal.medfilt(y, kernel_size=width)
    c0 = float(np.percentile(smooth, 5))
    env = np.clip(smooth - c0, 0, None)
    if env.sum() > 0:
        mu0 = float((lam * env).sum() / env.sum())
        sig0 = float(np.sqrt(((lam - mu0) ** 2 * env).sum() / env.sum()))
    else:
        mu0 = float(lam[len(lam) // 2])
        sig0 = float((lam[-1] - lam[0]) / 4)
    sig0 = max(sig0, (lam[1] - lam[0]) * 2)
    p = np.array([max(smooth.max() - c0, 1e-12 + 0.0), mu0, sig0, c0])

    mask = np.ones_like(y, dtype=bool)
    for _ in range(n_clip_passes + 1):
        lam_m, y_m = lam[mask], y[mask]

        def resid(q, lam_m=lam_m, y_m=y_m):
            return _gaussian_offset(lam_m, q) - y_m

        def jac(q, lam_m=lam_m):
            a, mu, sigma, _ = q
            u = (lam_m - mu) / sigma
            g = np.exp(-0.5 * u * u)
            return np.column_stack(
                [g, a * g * u / sigma, a * g * u * u / sigma, np.ones_like(lam_m)]
            )

        try:
            fit = levenberg_marquardt(resid, jac, p)
        except FitConvergenceError:
            raise
        p = fit.params
        residual = y - _gaussian_offset(lam, p)
        scale = residual[mask].std()
        if scale == 0:
            break
        mask = residual < 1.0 * scale  # clip positive outliers (the fringes)
        if mask.sum() < 10:
            mask = np.ones_like(y, dtype=bool)
            break

    model = _gaussian_offset(lam, p)
    return Spectrum(lam.copy(), np.clip(y - model, 0.0, None))


def find_peaks(
    s: Spectrum,
    min_prominence_fraction: float = 0.05,
    min_separation_nm: float = 0.0,
) -> np.ndarray:
    """Candidate fringe centers: local maxima above a prominence floor.

    Prominence is measured relative to the global maximum; candidates
    closer than ``min_separation_nm`` keep only the stronger one.  Returns
    wavelengths in ascending order (possibly empty).
    """
    y = s.intensity
    if y.max() == 0:
        return np.array([])
    dl = np.median(np.diff(s.wavelength_nm))
    distance = max(1, int(round(min_separation_nm / dl))) if min_separation_nm else 1
    idx, _ = scipy.signal.find_peaks(
        y, prominence=min_prominence_fraction * y.max(), distance=distance
    )
    return s.wavelength_nm[idx]


def _lorentz_sum(lam, params, n_peaks):
    out = np.full_like(lam, params[-1])
    for i in range(n_peaks):
        amp, ctr, gam = params[3 * i : 3 * i + 3]
        half = gam / 2.0
        out = out + amp * half * half / ((lam - ctr) ** 2 + half * half)
    return out


def _lorentz_jacobian(lam, params, n_peaks):
    m = lam.size
    jac = np.zeros((m, 3 * n_peaks + 1))
    for i in range(n_peaks):
        amp, ctr, gam = params[3 * i : 3 * i + 3]
        half = gam / 2.0
        u = half * half
        v = (lam - ctr) ** 2
        denom = v + u
        jac[:, 3 * i] = u / denom
        jac[:, 3 * i + 1] = amp * u * 2.0 * (lam - ctr) / denom**2
        jac[:, 3 * i + 2] = amp * half * v / denom**2
    jac[:, -1] = 1.0
    return jac


def fit_lorentzians(s: Spectrum, candidates) -> list:
    """Simultaneous fit of a Lorentzian per candidate plus a constant.

    Initial widths come from half-maximum crossings around each candidate;
    each candidate needs at least 4 samples within its +-2 FWHM window.
    Parameter uncertainties are the square roots of the covariance diagonal
    at the optimum.  Deterministic for fixed inputs.
    """
    candidates = np.sort(np.asarray(candidates, dtype=float))
    if candidates.size == 0:
        raise ParameterError("candidates", "need at least one candidate center")
    lam, y = s.wavelength_nm, s.intensity
    dl = np.median(np.diff(lam))
    floor = float(np.percentile(y, 10))

    p0 = []
    for c in candidates:
        if not lam[0] <= c <= lam[-1]:
            raise ParameterError("candidates", f"center {c} outside the spectrum")
        j = int(np.argmin(np.abs(lam - c)))
        height = max(y[j] - floor, y.max() * 1e-3)
        half_level = floor + height / 2.0
        lo = j
        while lo > 0 and y[lo] > half_level:
            lo -= 1
        hi = j
        while hi < len(y) - 1 and y[hi] > half_level:
            hi += 1
        fwhm = max((lam[hi] - lam[lo]), 2.0 * dl)
        n_window = np.count_nonzero(np.abs(lam - c) <= 2.0 * fwhm)
        if n_window < 4:
            raise ParameterError(
                "candidates", f"fewer than 4 samples within the window of {c} nm"
            )
        p0.extend([height, lam[j], fwhm])
    p0.append(floor)
    p0 = np.array(p0)
    n_peaks = candidates.size

    fit = levenberg_marquardt(
        lambda p: _lorentz_sum(lam, p, n_peaks) - y,
        lambda p: _lorentz_jacobian(lam, p, n_peaks),
        p0,
    )
    err = fit.stderr()
    peaks = []
    for i in range(n_peaks):
        amp, ctr, gam = fit.params[3 * i : 3 * i + 3]
        gam = abs(gam)  # the model is even in the width
        if amp <= 0:
            raise FitConvergenceError(
                f"peak near {candidates[i]:.3f} nm collapsed to amplitude {amp:.3g}",
                best_params=fit.params,
                residual_norm=np.sqrt(fit.cost),
                cost_history=fit.cost_history,
            )
        peaks.append(
            LorentzianPeak(
                center_nm=float(ctr),
                fwhm_nm=float(gam),
                amplitude=float(amp),
                center_err=float(err[3 * i + 1]),
                fwhm_err=float(err[3 * i + 2]),
                amplitude_err=float(err[3 * i]),
            )
        )
    peaks.sort(key=lambda p: p.center_nm)
    return peaks


def fringe_group_index(peaks, waveguide_length_nm: float) -> list:
    """n_g from the free spectral range of adjacent Fabry-Perot peaks.

    For neighbours at lambda_1 < lambda_2:
        n_g = lambda_1 * lambda_2 / (2 L (lambda_2 - lambda_1)),
    reported at the midpoint wavelength.
    """
    if waveguide_length_nm <= 0:
        raise ParameterError("waveguide_length_nm", "must be > 0")
    if len(peaks) < 2:
        raise ParameterError("peaks", "need at least 2 peaks for a spacing")
    centers = np.array([p.center_nm for p in peaks])
    centers.sort()
    out = []
    for l1, l2 in zip(centers[:-1], centers[1:]):
        if l2 - l1 <= 0:
            raise DataError(f"coincident peak centers at {l1} nm")
        ng = l1 * l2 / (2.0 * waveguide_length_nm * (l2 - l1))
        out.append(((l1 + l2) / 2.0, float(ng)))
    return out


def q_factors(peaks) -> list:
    """Q = center / FWHM per fitted peak."""
    return [(p.center_nm, p.center_nm / p.fwhm_nm) for p in peaks]


def analyze_fringes(
    s: Spectrum,
    waveguide_length_nm: float,
    min_prominence_fraction: float = 0.05,
    min_separation_nm: float = 0.0,
    remove_background: bool = True,
) -> FringeAnalysis:
    """Full chain: background -> peak seeds -> Lorentzian fit -> n_g and Q."""
    flat = subtract_background(s) if remove_background else s
    cand = find_peaks(flat, min_prominence_fraction, min_separation_nm)
    if cand.size < 2:
        raise DataError(
            f"found {cand.size} fringe candidates; need at least 2 for a spacing"
        )
    peaks = fit_lorentzians(flat, cand)
    return FringeAnalysis(
        peaks=peaks,
        ng_points=fringe_group_index(peaks, waveguide_length_nm),
        q_points=q_factors(peaks),
        waveguide_length_nm=waveguide_length_nm,
    )
