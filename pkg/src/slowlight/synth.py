"""Synthetic fixture generators for the analysis chain.

These produce spectra, decay traces and correlation histograms with known
ground truth; the test suite and the bundled demo fixtures both use them.
"""

from __future__ import annotations

import numpy as np

from .spectra import Spectrum
from .timetrace import DecayTrace, G2Histogram


def fp_peak_positions(ng_func, waveguide_length_nm, lam_start, lam_end):
    """Fringe centers from iterated free-spectral-range spacing.

    Successive peaks satisfy lambda_2 - lambda_1 =
    lambda_1*lambda_2 / (2 L n_g(midpoint)), the exact inverse of the
    fringe-spacing estimator, so recovered n_g values can be compared
    against ``ng_func`` at the reported midpoints directly.
    """
    L = waveguide_length_nm
    peaks = [float(lam_start)]
    while True:
        l1 = peaks[-1]
        l2 = l1 + l1 * l1 / (2.0 * L * ng_func(l1))
        for _ in range(8):  # fixed point on the implicit midpoint relation
            mid = 0.5 * (l1 + l2)
            l2 = l1 + l1 * l2 / (2.0 * L * ng_func(mid))
        if l2 > lam_end:
            break
        peaks.append(float(l2))
    return np.array(peaks)


def fp_comb_spectrum(
    ng_func,
    waveguide_length_nm,
    lam_start,
    lam_end,
    fwhm_nm=0.06,
    amplitude=1000.0,
    samples_per_nm=400,
    background=None,
    noise_fraction=0.0,
    seed=0,
):
    """Spectrum of Lorentzian fringes on an optional Gaussian background.

    ``fwhm_nm`` may be a scalar or a callable of wavelength. ``background``
    is (amplitude, center_nm, sigma_nm, offset).  Gaussian noise with sigma
    ``noise_fraction`` * peak amplitude is added when requested.

    Returns (Spectrum, truth) where truth holds the exact peak centers and
    the n_g ground truth at adjacent-peak midpoints.
    """
    centers = fp_peak_positions(ng_func, waveguide_length_nm, lam_start, lam_end)
    margin = 1.0
    lam = np.linspace(
        lam_start - margin,
        lam_end + margin,
        int((lam_end - lam_start + 2 * margin) * samples_per_nm) + 1,
    )
    y = np.zeros_like(lam)
    widths = []
    for c in centers:
        w = fwhm_nm(c) if callable(fwhm_nm) else fwhm_nm
        widths.append(w)
        half = w / 2.0
        y += amplitude * half * half / ((lam - c) ** 2 + half * half)
    if background is not None:
        b_amp, b_mu, b_sig, b_off = background
        y += b_amp * np.exp(-0.5 * ((lam - b_mu) / b_sig) ** 2) + b_off
    if noise_fraction > 0:
        rng = np.random.default_rng(seed)
        y = y + rng.normal(0.0, noise_fraction * amplitude, size=lam.size)
    y = np.clip(y, 0.0, None)

    mids = 0.5 * (centers[:-1] + centers[1:])
    truth = {
        "centers_nm": centers,
        "fwhm_nm": np.array(widths),
        "ng_midpoints_nm": mids,
        "ng_true": np.array([ng_func(m) for m in mids]),
    }
    return Spectrum(wavelength_nm=lam, intensity=y), truth


def decay_trace(
    tau_ns,
    amplitude=1e4,
    offset=20.0,
    t_max_ns=12.8,
    bin_ns=0.016,
    t_rise_ns=0.1,
    poisson=True,
    seed=0,
):
    """Pulsed-excitation decay histogram with a short linear rise.

    ``amplitude`` is the expected peak count per bin; Poisson noise is
    applied when requested.
    """
    t = np.arange(0.0, t_max_ns, bin_ns)
    expected = np.where(
        t < t_rise_ns,
        amplitude * t / max(t_rise_ns, bin_ns),
        amplitude * np.exp(-(t - t_rise_ns) / tau_ns),
    )
    expected = expected + offset
    if poisson:
        rng = np.random.default_rng(seed)
        counts = rng.poisson(expected).astype(float)
    else:
        counts = expected
    return DecayTrace(time_ns=t, counts=counts)


def g2_histogram(
    g2_zero_true=0.47,
    rep_period_ns=1e3 / 78.0,
    n_side=5,
    peak_area=5000.0,
    tau_ns=1.0,
    bin_ns=0.064,
    background=0.0,
    poisson=True,
    seed=0,
    shape="exp",
):
    """Pulsed correlation histogram with a suppressed central peak.

    Side peaks carry ``peak_area`` expected counts each (two-sided
    exponentials of lifetime ``tau_ns``, or single-bin deltas); the central
    peak is scaled by ``g2_zero_true``.  ``background`` is a constant
    expected count per bin.
    """
    T = rep_period_ns
    half_span = (n_side + 0.5) * T
    delays = np.arange(-half_span, half_span + bin_ns / 2, bin_ns)
    expected = np.full_like(delays, float(background))
    for m in range(-n_side, n_side + 1):
        scale = g2_zero_true if m == 0 else 1.0
        if shape == "delta":
            j = int(np.argmin(np.abs(delays - m * T)))
            expected[j] += scale * peak_area
        else:
            # expected counts per bin; the two-sided exponential integrates
            # to peak_area events per pulse peak
            expected += (
                scale
                * peak_area
                * (bin_ns / (2.0 * tau_ns))
                * np.exp(-np.abs(delays - m * T) / tau_ns)
            )
    if poisson:
        rng = np.random.default_rng(seed)
        counts = rng.poisson(np.clip(expected, 0, None)).astype(float)
    else:
        counts = expected
    return G2Histogram(delay_ns=delays, counts=counts, rep_period_ns=T)
