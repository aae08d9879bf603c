"""Quasiparticle tunneling through NIS and SIS junctions, and gap analysis of dI/dV.

Units: energies and voltages in meV / mV, currents in nA, resistances in kOhm,
conductances in 1/kOhm, temperatures in K.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.signal import fftconvolve, find_peaks
from scipy.special import expit

from .constants import BCS_GAP_RATIO, KB_OVER_E_MV_PER_K
from .lsq import linear_least_squares
from .exceptions import (
    ExtractionError,
    InsufficientDataError,
    NumericalError,
    ParameterError,
)

MIN_TRACE_POINTS = 3


@dataclass(frozen=True)
class SuperconductorModel:
    """One electrode. ``delta0 = 0`` is a normal metal.

    ``Tc`` defaults to the weak-coupling BCS value ``delta0 / (1.764 k_B)``.
    """

    delta0: float
    gamma: float = 0.0
    Tc: float | None = None

    def __post_init__(self):
        if self.delta0 < 0:
            raise ParameterError(f"delta0 must be >= 0, got {self.delta0}")
        if self.gamma < 0:
            raise ParameterError(f"gamma must be >= 0, got {self.gamma}")
        if self.Tc is None and self.delta0 > 0:
            object.__setattr__(self, "Tc", self.delta0 / (BCS_GAP_RATIO * KB_OVER_E_MV_PER_K))
        if self.delta0 > 0 and not self.Tc > 0:
            raise ParameterError("Tc must be positive for a superconductor")

    @classmethod
    def normal(cls) -> "SuperconductorModel":
        return cls(0.0)

    def at_temperature(self, T: float) -> "SuperconductorModel":
        """Same electrode with its gap set to ``bcs_gap(self, T)``."""
        delta = bcs_gap(self, T)
        return SuperconductorModel(delta, self.gamma, self.Tc if delta > 0 else None)


@dataclass(frozen=True)
class JunctionDC:
    R_N: float
    left: SuperconductorModel
    right: SuperconductorModel

    def __post_init__(self):
        if not self.R_N > 0:
            raise ParameterError(f"R_N must be positive, got {self.R_N}")

    @classmethod
    def nis(cls, R_N, delta, gamma=0.0):
        return cls(R_N, SuperconductorModel(delta, gamma), SuperconductorModel.normal())


@dataclass
class SampledTrace:
    """Ordered ``(x, y)`` samples with unit labels and optional bath temperature."""

    x: np.ndarray
    y: np.ndarray
    x_unit: str = "mV"
    y_unit: str = "nA"
    temperature: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.ndim != 1 or self.x.shape != self.y.shape:
            raise ParameterError(
                f"x and y must be 1-D of equal length, got {self.x.shape} and {self.y.shape}"
            )
        if self.x.size < MIN_TRACE_POINTS:
            raise InsufficientDataError(
                f"a trace needs at least {MIN_TRACE_POINTS} points, got {self.x.size}"
            )
        if np.any(np.diff(self.x) <= 0):
            raise ParameterError("x must be strictly increasing")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))):
            raise ParameterError("trace contains non-finite values")

    def __len__(self):
        return self.x.size


@dataclass(frozen=True)
class GapPeaks:
    """Peak voltages (mV, positive magnitudes); ``None`` marks a missing peak."""

    sum_pos: float | None
    sum_neg: float | None
    diff_pos: float | None
    diff_neg: float | None

    @staticmethod
    def _mean(a, b):
        found = [v for v in (a, b) if v is not None]
        return float(np.mean(found)) if found else None

    @property
    def v_sum(self):
        return self._mean(self.sum_pos, self.sum_neg)

    @property
    def v_diff(self):
        return self._mean(self.diff_pos, self.diff_neg)


@dataclass(frozen=True)
class GapExtractionResult:
    temperatures: np.ndarray
    delta_Nb: np.ndarray
    delta_Al: np.ndarray
    v_sum: np.ndarray
    v_diff: np.ndarray
    plateau: np.ndarray

    def __post_init__(self):
        if np.any(self.delta_Al < 0) or np.any(self.delta_Nb < self.delta_Al):
            raise ExtractionError(
                "extracted gaps violate delta_Nb >= delta_Al >= 0; check the peak windows"
            )

    def rows(self):
        for i, T in enumerate(self.temperatures):
            yield {
                "temperature_K": float(T),
                "delta_Nb_meV": float(self.delta_Nb[i]),
                "delta_Al_meV": float(self.delta_Al[i]),
                "v_sum_mV": float(self.v_sum[i]),
                "v_diff_mV": None if np.isnan(self.v_diff[i]) else float(self.v_diff[i]),
                "plateau_rule": bool(self.plateau[i]),
            }


def dynes_dos(E, sc: SuperconductorModel):
    """Normalized Dynes density of states ``|Re[z / sqrt(z^2 - Delta^2)]|``, ``z = E + i gamma Delta``."""
    E = np.asarray(E, dtype=float)
    if sc.delta0 == 0:
        return np.ones_like(E)
    z = np.abs(E) + 1j * sc.gamma * sc.delta0
    with np.errstate(divide="ignore", invalid="ignore"):
        dos = np.abs(np.real(z / np.sqrt(z * z - sc.delta0**2)))
    # gamma = 0 at |E| = Delta exactly: integrable divergence, keep it finite
    return np.where(np.isfinite(dos), dos, 0.0 if sc.gamma else np.inf)


def bcs_gap(sc: SuperconductorModel, T):
    """Interpolated BCS gap ``Delta0 tanh(1.74 sqrt(Tc/T - 1))``, zero above Tc."""
    T = np.asarray(T, dtype=float)
    if np.any(T <= 0):
        raise ParameterError("temperature must be positive")
    if sc.delta0 == 0:
        out = np.zeros_like(T)
    else:
        ratio = np.clip(sc.Tc / T - 1.0, 0.0, None)
        out = sc.delta0 * np.tanh(1.74 * np.sqrt(ratio))
    return float(out) if out.ndim == 0 else out


def _fermi(E, kT):
    return expit(-E / kT)


def _integration_window(V, left, right, kT):
    lim = max(abs(V), left.delta0 + right.delta0) + max(left.delta0, right.delta0) + 30 * kT
    return -lim, lim


def quasiparticle_integral(V, left, right, T, rel_tol=1e-4):
    """``int N_L(E - eV) N_R(E) [f(E - eV) - f(E)] dE`` in meV, with its error estimate.

    Adaptive Gauss-Kronrod, split at both gap edges of both electrodes and at
    the two Fermi steps.
    """
    kT = KB_OVER_E_MV_PER_K * T

    def integrand(E):
        return (
            dynes_dos(E - V, left)
            * dynes_dos(E, right)
            * (_fermi(E - V, kT) - _fermi(E, kT))
        )

    a, b = _integration_window(V, left, right, kT)
    edges = {0.0, V}
    # each gap edge hosts a peak of width ~gamma*Delta; bracket it tightly so
    # the first Kronrod pass of a neighbouring interval cannot step over it
    for centre, sc in ((0.0, right), (V, left)):
        if sc.delta0 > 0:
            w = 20 * max(sc.gamma * sc.delta0, 1e-6 * sc.delta0)
            for e in (centre - sc.delta0, centre + sc.delta0):
                edges.update((e - w, e, e + w))
    points = sorted(p for p in edges if a < p < b)
    breaks = [a, *points, b]
    total, error = 0.0, 0.0
    scale = max(abs(V), kT)
    tol = rel_tol * scale * 1e-2
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        for lo, hi in zip(breaks, breaks[1:]):
            if hi - lo <= 0:
                continue
            val, err = quad(integrand, lo, hi, epsabs=tol / len(breaks), epsrel=1e-8, limit=400)
            total += val
            error += err
    return total, error


def tunnel_current(V: float, j: JunctionDC, T: float, rel_tol: float = 1e-3) -> float:
    """Quasiparticle current (nA) at bias ``V`` (mV) and bath temperature ``T`` (K).

    The pair (Josephson) current is not included. Both electrodes sit at ``T``.
    """
    if not T > 0:
        raise ParameterError(f"temperature must be positive, got {T}")
    if j.left.delta0 == 0 and j.right.delta0 == 0:
        # the Fermi-window integral is exactly V for two normal electrodes
        return V / j.R_N * 1e3
    total, error = quasiparticle_integral(V, j.left, j.right, T, rel_tol=rel_tol)
    budget = rel_tol * max(abs(V), KB_OVER_E_MV_PER_K * T)
    if not np.isfinite(total) or error > budget:
        raise NumericalError(
            f"quadrature did not converge at V={V} mV, T={T} K: "
            f"error estimate {error:.3g} > {budget:.3g} meV"
        )
    return total / j.R_N * 1e3


def dos_antiderivative(E, sc: SuperconductorModel):
    """Odd antiderivative of :func:`dynes_dos`: ``sign(E) Re sqrt(z^2 - Delta^2)``."""
    E = np.asarray(E, dtype=float)
    if sc.delta0 == 0:
        return E.copy()
    z = np.abs(E) + 1j * sc.gamma * sc.delta0
    return np.sign(E) * np.real(np.sqrt(z * z - sc.delta0**2))


def _cell_dos(E, dE, sc):
    # exact cell average; keeps the gap-edge weight even when dE >> gamma * Delta
    return (dos_antiderivative(E + dE / 2, sc) - dos_antiderivative(E - dE / 2, sc)) / dE


def _grid_step(j, T, v):
    kT = KB_OVER_E_MV_PER_K * T
    spacing = np.min(np.diff(v)) if v.size > 1 else kT
    return float(np.clip(min(kT / 4, spacing / 4), 2e-5, 2e-3))


def iv_curve_fft(j: JunctionDC, T: float, v_grid, dE: float | None = None) -> np.ndarray:
    """Currents (nA) for a whole bias grid from one FFT correlation.

    The integrand is split as ``f_L (1 - f_R) - (1 - f_L) f_R`` so that each
    term has compact support in energy, and evaluated on a uniform energy
    grid with cell-averaged densities of states. Results are linearly
    interpolated from the energy-grid biases onto ``v_grid``.
    """
    v = np.asarray(v_grid, dtype=float)
    kT = KB_OVER_E_MV_PER_K * T
    dE = dE or _grid_step(j, T, v)
    vmax = float(np.max(np.abs(v)))
    half = vmax + j.left.delta0 + j.right.delta0 + 40 * kT + 10 * dE
    K = int(np.ceil(half / dE))
    E = dE * np.arange(-K, K + 1)
    nl = _cell_dos(E, dE, j.left)
    nr = _cell_dos(E, dE, j.right)
    f = _fermi(E, kT)
    # c[m] = sum_k a[k - m] b[k] at bias V = m dE
    forward = fftconvolve(nr * (1 - f), (nl * f)[::-1], mode="full")
    backward = fftconvolve(nr * f, (nl * (1 - f))[::-1], mode="full")
    bias = dE * np.arange(-2 * K, 2 * K + 1)
    current = (forward - backward) * dE / j.R_N * 1e3
    return np.interp(v, bias, current)


def iv_curve(j: JunctionDC, T: float, v_grid, method: str = "fft") -> SampledTrace:
    """IV trace over ``v_grid`` (mV).

    ``method="quad"`` evaluates :func:`tunnel_current` point by point with
    adaptive quadrature; ``"fft"`` (default) uses :func:`iv_curve_fft`.
    """
    if not T > 0:
        raise ParameterError(f"temperature must be positive, got {T}")
    v = np.asarray(v_grid, dtype=float)
    if v.ndim != 1 or v.size < MIN_TRACE_POINTS or np.any(np.diff(v) <= 0):
        raise ParameterError("voltage grid must be strictly increasing with >= 3 points")
    if j.left.delta0 == 0 and j.right.delta0 == 0:
        current = v / j.R_N * 1e3
    elif method == "quad":
        current = np.array([tunnel_current(x, j, T) for x in v])
    elif method == "fft":
        current = iv_curve_fft(j, T, v)
    else:
        raise ParameterError(f"unknown method {method!r}")
    return SampledTrace(
        v,
        current,
        "mV",
        "nA",
        temperature=T,
        meta={
            "R_N_kohm": j.R_N,
            "delta_left_meV": j.left.delta0,
            "delta_right_meV": j.right.delta0,
        },
    )


def numerical_didv(iv: SampledTrace) -> SampledTrace:
    """dI/dV in 1/kOhm: second-order central differences inside, one-sided at the ends."""
    x = np.asarray(iv.x, dtype=float)
    if x.size < 5:
        raise InsufficientDataError(f"need at least 5 points for dI/dV, got {x.size}")
    if np.any(np.diff(x) <= 0):
        raise ParameterError("voltage samples must be strictly increasing")
    g = np.gradient(iv.y, x) * 1e-3  # nA/mV = uS = 1e-3 / kOhm
    return SampledTrace(x, g, "mV", "1/kOhm", iv.temperature, dict(iv.meta))


def _refine(x, y, i):
    if i <= 0 or i >= x.size - 1:
        return float(x[i])
    x0, x1, x2 = x[i - 1 : i + 2]
    y0, y1, y2 = y[i - 1 : i + 2]
    denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
    b = (x2**2 * (y0 - y1) + x1**2 * (y2 - y0) + x0**2 * (y1 - y2)) / denom
    if a >= 0:
        return float(x1)
    return float(np.clip(-b / (2 * a), x0, x2))


def _normal_conductance(g):
    n = max(2, g.size // 20)
    return float(np.median(np.concatenate([g[:n], g[-n:]])))


def _window_peak(x, g, lo, hi, min_prominence):
    mask = (x > lo) & (x < hi)
    idx = np.flatnonzero(mask)
    if idx.size < 3:
        return None
    # pad with the neighbouring samples so a peak at the window edge is still a local max
    start, stop = max(idx[0] - 1, 0), min(idx[-1] + 2, x.size)
    xs, gs = x[start:stop], g[start:stop]
    peaks, props = find_peaks(gs, prominence=min_prominence)
    inside = [(gs[p], p) for p in peaks if lo < xs[p] < hi]
    if not inside:
        return None
    _, p = max(inside)
    return _refine(xs, gs, p)


def find_gap_peaks(
    didv: SampledTrace,
    sum_window=(1.4, math.inf),
    diff_window=(1.0, 1.4),
    min_prominence: float = 0.02,
) -> GapPeaks:
    """Highest dI/dV maximum with ``|V|`` inside each window, for each bias sign.

    ``min_prominence`` is relative to the high-bias (normal-state) conductance;
    maxima below it are reported as missing.
    """
    for lo, hi in (sum_window, diff_window):
        if not lo < hi:
            raise ParameterError(f"window {lo, hi} is empty")
    s_lo, s_hi = sorted(sum_window)
    d_lo, d_hi = sorted(diff_window)
    if max(s_lo, d_lo) < min(s_hi, d_hi):
        raise ParameterError("sum and difference windows overlap")
    x, g = didv.x, didv.y
    vmax = max(abs(x[0]), abs(x[-1]))
    for lo, _ in (sum_window, diff_window):
        if lo >= vmax:
            raise ParameterError(f"window starting at {lo} mV lies outside the trace (|V| <= {vmax})")
    threshold = min_prominence * abs(_normal_conductance(g))
    # negative branch: mirror so peaks sit at positive |V|
    neg = x < 0
    xn, gn = -x[neg][::-1], g[neg][::-1]
    pos = x > 0
    xp, gp = x[pos], g[pos]

    def peak(xs, gs, window):
        if xs.size < 3:
            return None
        return _window_peak(xs, gs, window[0], window[1], threshold)

    return GapPeaks(
        sum_pos=peak(xp, gp, sum_window),
        sum_neg=peak(xn, gn, sum_window),
        diff_pos=peak(xp, gp, diff_window),
        diff_neg=peak(xn, gn, diff_window),
    )


def extract_gaps_vs_temperature(
    traces,
    sum_window=(1.4, math.inf),
    diff_window=(1.0, 1.4),
    min_prominence: float = 0.02,
) -> GapExtractionResult:
    """Gap pair per bath temperature from IV (or dI/dV) traces.

    Where the difference peak is found, ``Delta_Nb = (V_sum + V_diff) / 2`` and
    ``Delta_Al = (V_sum - V_diff) / 2``. Where it is missing, ``Delta_Nb`` is held
    at its value from the coldest trace that shows both peaks and
    ``Delta_Al = V_sum - Delta_Nb``.
    """
    traces = list(traces)
    if not traces:
        raise InsufficientDataError("no traces given")
    for t in traces:
        if t.temperature is None:
            raise ParameterError("every trace must carry a bath temperature")
    traces.sort(key=lambda t: t.temperature)
    temps, v_sum, v_diff = [], [], []
    for t in traces:
        didv = t if t.y_unit == "1/kOhm" else numerical_didv(t)
        peaks = find_gap_peaks(didv, sum_window, diff_window, min_prominence)
        if peaks.v_sum is None:
            raise ExtractionError(f"no sum-gap peak found at T={t.temperature} K")
        temps.append(t.temperature)
        v_sum.append(peaks.v_sum)
        v_diff.append(np.nan if peaks.v_diff is None else peaks.v_diff)
    temps, v_sum, v_diff = map(np.asarray, (temps, v_sum, v_diff))
    have_both = ~np.isnan(v_diff)
    d_nb = (v_sum + v_diff) / 2
    d_al = (v_sum - v_diff) / 2
    plateau = ~have_both
    if plateau.any():
        if not have_both.any():
            raise ExtractionError(
                "no trace shows a difference-gap peak; cannot fix the Nb gap plateau"
            )
        held = d_nb[np.flatnonzero(have_both)[0]]
        d_nb = np.where(plateau, held, d_nb)
        d_al = np.where(plateau, v_sum - held, d_al)
    return GapExtractionResult(temps, d_nb, d_al, v_sum, v_diff, plateau)


def subgap_linear_fit(iv: SampledTrace, window=(-0.2, 0.2)):
    """Subgap resistance (MOhm) and its standard error from a line through the window."""
    lo, hi = sorted(window)
    mask = (iv.x >= lo) & (iv.x <= hi)
    if mask.sum() < 6:
        raise InsufficientDataError(
            f"need at least 6 points in the window {lo, hi} mV, got {int(mask.sum())}"
        )
    fit = linear_least_squares(iv.x[mask], iv.y[mask])
    if fit.slope <= 0:
        raise ExtractionError(f"subgap slope is not positive ({fit.slope:.3g} nA/mV)")
    # mV / nA = MOhm
    R = 1.0 / fit.slope
    return R, fit.slope_stderr / fit.slope**2


def dynes_gamma_estimate(R_N: float, R_subgap: float) -> float:
    """``gamma = R_N / R_subgap`` with ``R_N`` in kOhm and ``R_subgap`` in MOhm."""
    if not (R_N > 0 and R_subgap > 0):
        raise ParameterError("resistances must be positive")
    return R_N / (R_subgap * 1e3)


def onset_voltage(iv: SampledTrace, R_N: float, fraction: float = 0.2) -> float:
    """First positive bias where the current reaches ``fraction`` of ``V / R_N``.

    Linear interpolation between samples. At zero temperature an NIS junction
    gives ``Delta / sqrt(1 - fraction^2)``.
    """
    x, y = iv.x, iv.y
    pos = x > 0
    ratio = y[pos] * R_N * 1e-3 / x[pos]
    above = np.flatnonzero(ratio >= fraction)
    if above.size == 0:
        raise ExtractionError("current never reaches the onset threshold")
    k = above[0]
    xs = x[pos]
    if k == 0:
        return float(xs[0])
    r0, r1 = ratio[k - 1], ratio[k]
    return float(xs[k - 1] + (fraction - r0) * (xs[k] - xs[k - 1]) / (r1 - r0))
