"""Characterization fits as scikit-learn style estimators, plus thin functional wrappers.

Times are in microseconds, so fitted frequencies come out in MHz. Junction
sizes are in nm, resistances in Ohm and resistance-area products in Ohm um^2.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import (
    DegenerateModelError,
    IdentifiabilityError,
    InsufficientDataError,
    ParameterError,
)
from .lsq import FitReport, damped_least_squares, linear_least_squares


class Model(NamedTuple):
    func: object
    jac: object
    names: tuple


def _exp_decay(t, p):
    a, tau, c = p
    return a * np.exp(-t / tau) + c


def _exp_decay_jac(t, p):
    a, tau, _ = p
    e = np.exp(-t / tau)
    return np.column_stack([e, a * t / tau**2 * e, np.ones_like(t)])


def _ramsey(t, p):
    a, tau, f, phi, c = p
    return a * np.exp(-t / tau) * np.cos(2 * np.pi * f * t + phi) + c


def _ramsey_jac(t, p):
    a, tau, f, phi, _ = p
    e = np.exp(-t / tau)
    arg = 2 * np.pi * f * t + phi
    cos, sin = np.cos(arg), np.sin(arg)
    return np.column_stack(
        [
            e * cos,
            a * t / tau**2 * e * cos,
            -a * e * sin * 2 * np.pi * t,
            -a * e * sin,
            np.ones_like(t),
        ]
    )


def _resistance_area(d, p):
    RA, l = p
    return RA * 1e6 / (d - l) ** 2


def _resistance_area_jac(d, p):
    RA, l = p
    return np.column_stack([1e6 / (d - l) ** 2, 2 * RA * 1e6 / (d - l) ** 3])


EXP_DECAY = Model(_exp_decay, _exp_decay_jac, ("amplitude", "decay_time", "offset"))
RAMSEY = Model(_ramsey, _ramsey_jac, ("amplitude", "decay_time", "detuning", "phase", "offset"))
RESISTANCE_AREA = Model(_resistance_area, _resistance_area_jac, ("RA", "l"))


def _log_resistance_area(d, p):
    RA, l = p
    return np.log(RA * 1e6) - 2 * np.log(d - l)


def _log_resistance_area_jac(d, p):
    RA, l = p
    return np.column_stack([np.full_like(d, 1 / RA), 2 / (d - l)])


#: Same law in ``ln R``; residuals become relative errors.
LOG_RESISTANCE_AREA = Model(_log_resistance_area, _log_resistance_area_jac, ("RA", "l"))


def _series(X, y=None):
    t = check_array(X, ensure_2d=False, dtype=float)
    if t.ndim == 2:
        if t.shape[1] != 1:
            raise ParameterError(f"expected a single feature column, got shape {t.shape}")
        t = t[:, 0]
    if y is None:
        return t
    y = check_array(y, ensure_2d=False, dtype=float)
    if y.ndim != 1 or y.size != t.size:
        raise ParameterError("X and y lengths differ")
    order = np.argsort(t, kind="stable")
    return t[order], y[order]


def _decay_guess(t, y):
    """Amplitude, decay time and offset from a log-linear fit of the upper part of the decay."""
    span = np.ptp(y)
    if span == 0 or span <= 1e-12 * max(np.max(np.abs(y)), 1e-300):
        raise DegenerateModelError("trace is constant; the decay time is not identifiable")
    n = max(2, t.size // 10)
    sign = 1.0 if np.mean(y[:n]) >= np.mean(y[-n:]) else -1.0
    ys = sign * y
    c0 = ys.min() - 0.01 * span
    keep = ys - c0 > 0.2 * span
    if keep.sum() >= 2 and np.ptp(t[keep]) > 0:
        slope, intercept = np.polyfit(t[keep], np.log(ys[keep] - c0), 1)
    else:
        slope, intercept = -1.0 / np.ptp(t), math.log(span)
    tau0 = -1.0 / slope if slope < 0 else np.ptp(t)
    tau0 = float(np.clip(tau0, np.ptp(t) / 1e3, np.ptp(t) * 1e2))
    a0 = math.exp(intercept) * sign
    return np.array([a0, tau0, sign * c0])


class DecayFit(RegressorMixin, BaseEstimator):
    """Exponential decay ``amplitude * exp(-t / decay_time) + offset``.

    Amplitude and offset are always free because readout populations are not
    calibrated.
    """

    def __init__(self, max_iter=200):
        self.max_iter = max_iter

    def fit(self, X, y):
        t, y = _series(X, y)
        if t.size < 4:
            raise InsufficientDataError(f"need at least 4 points, got {t.size}")
        p0 = _decay_guess(t, y)
        span = np.ptp(t)
        bounds = ([-np.inf, span * 1e-6, -np.inf], [np.inf, span * 1e6, np.inf])
        report = damped_least_squares(
            EXP_DECAY.func, (t, y), p0, bounds, jac=EXP_DECAY.jac,
            names=EXP_DECAY.names, max_iter=self.max_iter,
        )
        self.report_ = report
        self.amplitude_ = report["amplitude"]
        self.decay_time_ = report["decay_time"]
        self.offset_ = report["offset"]
        return self

    def predict(self, X):
        check_is_fitted(self, "report_")
        return _exp_decay(_series(X), (self.amplitude_, self.decay_time_, self.offset_))


def dominant_frequency(t, y, oversample=8):
    """Frequency (1/t units) of the largest non-DC spectral component, or ``None``.

    The series is mean-subtracted and resampled onto a uniform grid. A peak is
    accepted only if it is a true local maximum at least one period inside the
    window and stands well above the median spectral level.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    span = t[-1] - t[0]
    grid = np.linspace(t[0], t[-1], t.size)
    resid = np.interp(grid, t, y)
    resid = resid - np.polyval(np.polyfit(grid - grid[0], resid, 1), grid - grid[0])
    n = oversample * grid.size
    spectrum = np.abs(np.fft.rfft(resid, n=n))
    freqs = np.fft.rfftfreq(n, d=grid[1] - grid[0])
    allowed = np.flatnonzero(freqs >= 1.0 / span)
    if allowed.size < 3:
        return None
    k = allowed[np.argmax(spectrum[allowed])]
    if k == allowed[0] or k == allowed[-1]:
        return None
    if spectrum[k] < 3 * np.median(spectrum[allowed]):
        return None
    return float(freqs[k])


class RamseyFit(RegressorMixin, BaseEstimator):
    """Decaying sinusoid ``a exp(-t/T2*) cos(2 pi f t + phase) + c``.

    If no oscillation with at least one period inside the window is found, a
    pure exponential is fitted instead, ``oscillating_`` is False and a
    ``RuntimeWarning`` is issued.
    """

    def __init__(self, max_iter=400):
        self.max_iter = max_iter

    def fit(self, X, y):
        t, y = _series(X, y)
        if t.size < 6:
            raise InsufficientDataError(f"need at least 6 points, got {t.size}")
        if np.ptp(y) == 0:
            raise DegenerateModelError("trace is constant")
        f0 = dominant_frequency(t, y)
        if f0 is None:
            warnings.warn(
                "no oscillation detected; falling back to a pure exponential decay",
                RuntimeWarning,
                stacklevel=2,
            )
            decay = DecayFit(self.max_iter).fit(t, y)
            self.oscillating_ = False
            self.report_ = decay.report_
            self.amplitude_, self.decay_time_, self.offset_ = (
                decay.amplitude_, decay.decay_time_, decay.offset_,
            )
            self.detuning_, self.phase_ = 0.0, 0.0
            return self

        span = np.ptp(t)
        best = None
        for tau0 in (span / 5, span / 2, span):
            env = np.exp(-t / tau0)
            arg = 2 * np.pi * f0 * t
            A = np.column_stack([env * np.cos(arg), env * np.sin(arg), np.ones_like(t)])
            (ac, bs, c0), *_ = np.linalg.lstsq(A, y, rcond=None)
            p0 = np.array([math.hypot(ac, bs), tau0, f0, math.atan2(-bs, ac), c0])
            bounds = (
                [0.0, span * 1e-4, 0.5 * f0, -4 * np.pi, -np.inf],
                [np.inf, span * 1e4, 2.0 * f0, 4 * np.pi, np.inf],
            )
            try:
                rep = damped_least_squares(
                    RAMSEY.func, (t, y), p0, bounds, jac=RAMSEY.jac,
                    names=RAMSEY.names, max_iter=self.max_iter,
                )
            except DegenerateModelError:
                continue
            if best is None or rep.residual_norm < best.residual_norm:
                best = rep
        if best is None:
            raise DegenerateModelError("Ramsey model is not identifiable from these data")
        phase = (best.params["phase"] + np.pi) % (2 * np.pi) - np.pi
        best.params["phase"] = phase
        self.oscillating_ = True
        self.report_ = best
        self.amplitude_ = best["amplitude"]
        self.decay_time_ = best["decay_time"]
        self.detuning_ = best["detuning"]
        self.phase_ = phase
        self.offset_ = best["offset"]
        return self

    def predict(self, X):
        check_is_fitted(self, "report_")
        p = (self.amplitude_, self.decay_time_, self.detuning_, self.phase_, self.offset_)
        return _ramsey(_series(X), p)


class ResistanceAreaFit(RegressorMixin, BaseEstimator):
    """``R = RA / (d - l)^2`` for square junctions of nominal side ``d``.

    ``RA_`` is in Ohm um^2 and ``shrink_`` (``l``) in nm; ``l < min(d)`` is
    enforced. Points are sorted internally, so the result does not depend on
    their order.

    With ``residuals="relative"`` (default) the fit minimizes errors in
    ``ln R``, which suits the multiplicative die-to-die spread of barrier
    resistance; small junctions would otherwise dominate the cost.
    ``"absolute"`` fits ``R`` directly.
    """

    def __init__(self, max_iter=200, min_span=2.0, residuals="relative"):
        self.max_iter = max_iter
        self.min_span = min_span
        self.residuals = residuals

    def fit(self, X, y):
        d, R = _series(X, y)
        order = np.lexsort((R, d))
        d, R = d[order], R[order]
        if d.size < 4:
            raise InsufficientDataError(f"need at least 4 junctions, got {d.size}")
        if np.any(d <= 0) or np.any(R <= 0):
            raise ParameterError("sizes and resistances must be positive")
        if d.max() < self.min_span * d.min():
            raise IdentifiabilityError(
                f"sizes span only {d.max() / d.min():.2f}x; RA and l need at least "
                f"{self.min_span}x"
            )
        # 1/sqrt(R) = (d - l) / (1000 sqrt(RA)) is linear in d
        slope, intercept = np.polyfit(d, 1 / np.sqrt(R), 1)
        if slope <= 0:
            raise IdentifiabilityError("resistance does not decrease with junction size")
        l_max = d.min() * (1 - 1e-9)
        p0 = np.array([(1 / (1000 * slope)) ** 2, min(-intercept / slope, 0.5 * d.min())])
        if self.residuals == "relative":
            model, target = LOG_RESISTANCE_AREA, np.log(R)
        elif self.residuals == "absolute":
            model, target = RESISTANCE_AREA, R
        else:
            raise ParameterError(f"residuals must be 'relative' or 'absolute', not {self.residuals!r}")
        bounds = ([np.finfo(float).tiny, -np.inf], [np.inf, l_max])
        report = damped_least_squares(
            model.func, (d, target), p0, bounds, jac=model.jac,
            names=model.names, max_iter=self.max_iter,
        )
        self.report_ = report
        self.RA_ = report["RA"]
        self.shrink_ = report["l"]
        return self

    def predict(self, X):
        check_is_fitted(self, "report_")
        return _resistance_area(_series(X), (self.RA_, self.shrink_))


def _rename(report: FitReport, mapping):
    def ren(d):
        return None if d is None else {mapping.get(k, k): v for k, v in d.items()}

    return FitReport(
        params=ren(report.params),
        std_errors=ren(report.std_errors),
        residual_norm=report.residual_norm,
        converged=report.converged,
        iterations=report.iterations,
        covariance=report.covariance,
        message=report.message,
    )


def fit_t1(trace) -> FitReport:
    """Energy relaxation: ``T1`` in the time unit of the trace."""
    if len(trace.x) < 4:
        raise InsufficientDataError(f"need at least 4 points, got {len(trace.x)}")
    est = DecayFit().fit(trace.x, trace.y)
    return _rename(est.report_, {"decay_time": "T1"})


def fit_echo(trace) -> FitReport:
    """Hahn echo, modelled as a pure exponential: ``T2_echo``."""
    if len(trace.x) < 4:
        raise InsufficientDataError(f"need at least 4 points, got {len(trace.x)}")
    est = DecayFit().fit(trace.x, trace.y)
    return _rename(est.report_, {"decay_time": "T2_echo"})


def fit_ramsey(trace) -> FitReport:
    """Ramsey fringes: ``T2_star``, ``detuning`` (1/time unit) and ``phase``."""
    est = RamseyFit().fit(trace.x, trace.y)
    rep = _rename(est.report_, {"decay_time": "T2_star"})
    if not est.oscillating_:
        rep.params.update(detuning=0.0, phase=0.0)
        rep.message = "no oscillation detected; pure decay fitted. " + rep.message
    return rep


def check_echo_consistency(T2_star: float, T2_echo: float) -> bool:
    """True when ``T2_echo >= T2_star``; warns otherwise (echo normally refocuses slow noise)."""
    ok = T2_echo >= T2_star
    if not ok:
        warnings.warn(
            f"T2_echo={T2_echo:.4g} is shorter than T2*={T2_star:.4g}", RuntimeWarning, stacklevel=2
        )
    return ok


def quality_factor(f_ge: float, T1: float) -> float:
    """``Q = 2 pi f T1`` with ``f`` in GHz and ``T1`` in us."""
    if f_ge <= 0 or T1 < 0:
        raise ParameterError("frequency must be positive and T1 non-negative")
    return 2 * math.pi * f_ge * T1 * 1e3


@dataclass(frozen=True)
class WaferResistancePoint:
    d: float
    R: float
    die_x: int | None = None
    die_y: int | None = None

    def __post_init__(self):
        if not (self.d > 0 and self.R > 0):
            raise ParameterError(f"d and R must be positive, got d={self.d}, R={self.R}")


def fit_resistance_area(points) -> FitReport:
    points = list(points)
    d = np.array([p.d for p in points], dtype=float)
    R = np.array([p.R for p in points], dtype=float)
    return ResistanceAreaFit().fit(d, R).report_


def predict_resistance(d, RA, l):
    """Resistance (Ohm) of a junction of nominal side ``d`` (nm)."""
    return _resistance_area(np.asarray(d, dtype=float), (RA, l))


@dataclass
class TrendReport:
    slope: float
    intercept: float
    slope_stderr: float
    intercept_stderr: float
    residuals: np.ndarray = field(repr=False)
    max_abs_residual: float
    band: float
    within_band: bool
    group_offsets: dict = field(default_factory=dict)
    group_shift: float = 0.0
    shift_detected: bool = False

    def to_dict(self):
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "slope_stderr": self.slope_stderr,
            "intercept_stderr": self.intercept_stderr,
            "residuals": [float(r) for r in self.residuals],
            "max_abs_residual": self.max_abs_residual,
            "band": self.band,
            "within_band": self.within_band,
            "group_offsets": {str(k): float(v) for k, v in self.group_offsets.items()},
            "group_shift": self.group_shift,
            "shift_detected": self.shift_detected,
        }


def frequency_size_trend(d, f, groups=None, band=0.1) -> TrendReport:
    """Straight line ``f = slope * d + intercept`` with residual statistics.

    ``band`` (GHz) is the expected within-chip scatter. With ``groups`` (e.g.
    chip labels) the mean residual per group is reported, and a spread of those
    means above twice the band flags a chip-to-chip shift.
    """
    d = np.asarray(d, dtype=float)
    f = np.asarray(f, dtype=float)
    if d.size < 3:
        raise InsufficientDataError(f"need at least 3 points, got {d.size}")
    fit = linear_least_squares(d, f)
    resid = f - (fit.slope * d + fit.intercept)
    max_abs = float(np.max(np.abs(resid)))
    offsets = {}
    shift = 0.0
    if groups is not None:
        groups = np.asarray(groups)
        for g in sorted(set(groups.tolist()), key=str):
            offsets[g] = float(np.mean(resid[groups == g]))
        shift = max(offsets.values()) - min(offsets.values())
    return TrendReport(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        slope_stderr=float(fit.slope_stderr),
        intercept_stderr=float(fit.intercept_stderr),
        residuals=resid,
        max_abs_residual=max_abs,
        band=band,
        within_band=max_abs <= band,
        group_offsets=offsets,
        group_shift=float(shift),
        shift_detected=shift > 2 * band,
    )


@dataclass(frozen=True)
class CoherenceRecord:
    timestamp: float
    f_ge: float
    T1: float | None = None
    T2_star: float | None = None
    T2_echo: float | None = None

    def __post_init__(self):
        for name in ("T1", "T2_star", "T2_echo"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ParameterError(f"{name} must be positive, got {v}")


def coherence_time_series_stats(records):
    """Count, mean, std, min and max of each coherence time over the records present."""
    records = list(records)
    if len(records) < 2:
        raise InsufficientDataError("need at least 2 records")
    stats = {}
    for name in ("T1", "T2_star", "T2_echo", "f_ge"):
        values = np.array([getattr(r, name) for r in records if getattr(r, name) is not None])
        if values.size == 0:
            stats[name] = {"count": 0}
            continue
        stats[name] = {
            "count": int(values.size),
            "mean": float(values.mean()),
            "std": float(values.std()),
            "min": float(values.min()),
            "max": float(values.max()),
        }
    stats["time_averaged_T1"] = stats["T1"].get("mean")
    return stats
