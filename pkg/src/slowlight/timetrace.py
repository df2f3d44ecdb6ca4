"""Time-domain analysis: exponential lifetime fits and pulsed g2(0)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, ParameterError
from .fileio import read_two_column_csv
from .leastsq import levenberg_marquardt


@dataclass(frozen=True)
class DecayTrace:
    time_ns: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        t, c = np.asarray(self.time_ns), np.asarray(self.counts)
        if t.shape != c.shape or t.ndim != 1:
            raise DataError("time and counts must be equal-length 1D arrays")
        if np.any(np.diff(t) <= 0):
            raise DataError("time axis must be strictly increasing")
        if not np.all(np.isfinite(c)) or np.any(c < 0):
            raise DataError("counts must be finite and non-negative")


def load_decay_trace(path) -> DecayTrace:
    t, c = read_two_column_csv(path)
    order = np.argsort(t, kind="stable")
    return DecayTrace(time_ns=t[order], counts=c[order])


@dataclass(frozen=True)
class DecayFit:
    tau_ns: float
    tau_sigma_ns: float
    amplitude: float
    offset: float
    window: tuple  # (t_start, t_end)
    n_points: int


def fit_decay(
    trace: DecayTrace,
    window: tuple | None = None,
    bootstrap: int = 0,
    seed: int | None = None,
) -> DecayFit:
    """Least squares of A exp(-t/tau) + B over a window after the peak.

    Default window: one bin past the trace maximum to the end (skips the
    rise without modelling the instrument response).  tau uncertainty is
    covariance based; with ``bootstrap`` > 0 it is replaced by the standard
    deviation over Poisson-resampled fits using the given seed.
    """
    t, y = trace.time_ns, trace.counts
    i_peak = int(np.argmax(y))
    if window is None:
        start = t[min(i_peak + 1, t.size - 1)]
        window = (float(start), float(t[-1]))
    t_start, t_end = window
    if t_start < t[i_peak]:
        raise ParameterError(
            "window",
            f"must start at or after the trace maximum (t = {t[i_peak]} ns), "
            f"got {t_start}",
        )
    sel = (t >= t_start) & (t <= t_end)
    if sel.sum() < 10:
        raise ParameterError("window", f"need >= 10 bins in window, got {sel.sum()}")
    ts, ys = t[sel], y[sel]
    if np.ptp(ys) == 0:
        raise DataError("window is constant; no decay to fit")

    # Seeds: offset from the tail, tau from the log slope of the upper part.
    b0 = float(np.median(ys[-max(3, ys.size // 10) :]))
    a0 = max(float(ys[0] - b0), float(np.ptp(ys)) * 0.1)
    upper = ys - b0 > 0.05 * a0
    if upper.sum() >= 2:
        z = np.log(np.clip(ys[upper] - b0, 1e-12, None))
        slope = np.polyfit(ts[upper], z, 1)[0]
        tau0 = -1.0 / slope if slope < 0 else (ts[-1] - ts[0]) / 3.0
    else:
        tau0 = (ts[-1] - ts[0]) / 3.0
    tau0 = float(np.clip(tau0, (ts[1] - ts[0]) * 0.5, (ts[-1] - ts[0]) * 10.0))

    def model(p, tt=ts):
        a, tau, b = p
        return a * np.exp(-tt / tau) + b

    def resid(p):
        return model(p) - ys

    def jac(p):
        a, tau, b = p
        e = np.exp(-ts / tau)
        return np.column_stack([e, a * e * ts / tau**2, np.ones_like(ts)])

    fit = levenberg_marquardt(resid, jac, np.array([a0, tau0, b0]))
    a, tau, b = fit.params
    if tau <= 0 or a <= 0:
        raise DataError(
            f"fit degenerated (amplitude {a:.3g}, tau {tau:.3g} ns); "
            "the window does not contain a decaying signal"
        )
    tau_sigma = float(fit.stderr()[1])

    if bootstrap > 0:
        rng = np.random.default_rng(seed)
        taus = []
        base = model(fit.params)
        for _ in range(bootstrap):
            resampled = rng.poisson(np.clip(base, 0, None)).astype(float)

            def resid_b(p, data=resampled):
                return model(p) - data

            try:
                taus.append(levenberg_marquardt(resid_b, jac, fit.params).params[1])
            except Exception:
                continue
        if len(taus) >= 2:
            tau_sigma = float(np.std(taus, ddof=1))

    return DecayFit(
        tau_ns=float(tau),
        tau_sigma_ns=tau_sigma,
        amplitude=float(a),
        offset=float(b),
        window=(float(t_start), float(t_end)),
        n_points=int(sel.sum()),
    )


@dataclass(frozen=True)
class G2Histogram:
    delay_ns: np.ndarray  # uniform, centred bins
    counts: np.ndarray
    rep_period_ns: float

    def __post_init__(self):
        d, c = np.asarray(self.delay_ns), np.asarray(self.counts)
        if d.shape != c.shape or d.ndim != 1 or d.size < 2:
            raise DataError("delay and counts must be equal-length 1D arrays")
        steps = np.diff(d)
        if np.any(steps <= 0):
            raise DataError("delay axis must be strictly increasing")
        if not np.allclose(steps, steps[0], rtol=1e-6, atol=1e-12):
            raise DataError("delay bins must be uniform")
        if self.rep_period_ns <= 0:
            raise DataError("rep_period_ns must be > 0")
        if not np.all(np.isfinite(c)) or np.any(c < 0):
            raise DataError("counts must be finite and non-negative")

    @property
    def bin_width_ns(self) -> float:
        return float(self.delay_ns[1] - self.delay_ns[0])


def load_g2_histogram(path, rep_period_ns: float) -> G2Histogram:
    d, c = read_two_column_csv(path)
    order = np.argsort(d, kind="stable")
    return G2Histogram(delay_ns=d[order], counts=c[order], rep_period_ns=rep_period_ns)


def g2_peak_areas(hist: G2Histogram, half_window_ns: float | None = None) -> dict:
    """Total event counts in +-half_window around each pulse peak m*T.

    Returns {m: area} for every integer m whose window lies fully inside
    the histogram.  Default half window is a quarter period.
    """
    T = hist.rep_period_ns
    if half_window_ns is None:
        half_window_ns = T / 4.0
    if not 0 < half_window_ns < T / 2.0:
        raise ParameterError(
            "half_window_ns", f"must be in (0, rep_period/2 = {T / 2}), got {half_window_ns}"
        )
    d = hist.delay_ns
    span = d[-1] - d[0]
    if span < T:
        raise DataError(
            f"histogram spans {span:.3f} ns, narrower than one period ({T:.3f} ns)"
        )
    m_lo = int(np.ceil((d[0] + half_window_ns) / T - 1e-9))
    m_hi = int(np.floor((d[-1] - half_window_ns) / T + 1e-9))
    areas = {}
    for m in range(m_lo, m_hi + 1):
        sel = np.abs(d - m * T) <= half_window_ns + 1e-9 * T
        areas[m] = float(hist.counts[sel].sum())
    return areas


def g2_zero(areas: dict) -> float:
    """g2(0) = central peak area over the mean side-peak area.

    If side-peak areas vary by more than 10 percent (long-lived bunching or
    blinking), the |m| = 1 neighbours are excluded from the reference mean.
    """
    if 0 not in areas:
        raise ParameterError("areas", "missing the m = 0 peak")
    side = {m: a for m, a in areas.items() if m != 0}
    n_neg = sum(1 for m in side if m < 0)
    n_pos = sum(1 for m in side if m > 0)
    if n_neg < 3 or n_pos < 3:
        raise ParameterError(
            "areas", f"need >= 3 side peaks on each side, got {n_neg} and {n_pos}"
        )
    vals = np.array(list(side.values()))
    mean_all = vals.mean()
    if mean_all <= 0:
        raise DataError("side-peak mean is zero; cannot normalise")
    spread = (vals.max() - vals.min()) / mean_all
    if spread > 0.10:
        trimmed = {m: a for m, a in side.items() if abs(m) > 1}
        if trimmed:
            reference = np.mean(list(trimmed.values()))
        else:
            reference = mean_all
    else:
        reference = mean_all
    if reference <= 0:
        raise DataError("side-peak mean is zero; cannot normalise")
    return float(areas[0] / reference)
