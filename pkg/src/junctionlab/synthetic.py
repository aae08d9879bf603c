"""Deterministic synthetic data sets used by the tests, the CLI fixtures and the docs."""

from __future__ import annotations

import numpy as np

from .fits import WaferResistancePoint, predict_resistance
from .tunneling import JunctionDC, SampledTrace, SuperconductorModel, iv_curve

GAP_SERIES_TEMPERATURES = (0.05, 0.2, 0.3, 0.4, 0.5, 0.7, 0.9, 1.1, 1.2, 1.3)


def decay_trace(decay_time, amplitude=0.9, offset=0.05, n_points=101, span=4.0, noise=0.01,
                seed=0):
    """Exponential decay sampled over ``span`` decay times with Gaussian noise."""
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, span * decay_time, n_points)
    y = amplitude * np.exp(-t / decay_time) + offset
    return SampledTrace(t, y + rng.normal(0.0, noise, t.size), "us", "population")


def ramsey_trace(decay_time, detuning=0.3, amplitude=0.45, phase=0.0, offset=0.5,
                 n_points=201, span=4.0, noise=0.01, seed=0):
    """Damped Ramsey fringes; ``detuning`` in MHz for times in us."""
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, span * decay_time, n_points)
    y = amplitude * np.exp(-t / decay_time) * np.cos(2 * np.pi * detuning * t + phase) + offset
    return SampledTrace(t, y + rng.normal(0.0, noise, t.size), "us", "population")


def prober_points(RA=1100.0, shrink=90.0, sizes=None, repeats=3, rel_noise=0.01, seed=0):
    """Wafer-prober style resistances over nominal sizes of 0.5 to 5 um.

    Noise is multiplicative, mimicking die-to-die spread in the barrier.
    """
    rng = np.random.default_rng(seed)
    if sizes is None:
        sizes = np.geomspace(500.0, 5000.0, 10)
    points = []
    for i, d in enumerate(sizes):
        for k in range(repeats):
            R = predict_resistance(d, RA, shrink) * (1.0 + rng.normal(0.0, rel_noise))
            points.append(WaferResistancePoint(float(d), float(R), die_x=k, die_y=i))
    return points


def gap_temperature_series(
    temperatures=GAP_SERIES_TEMPERATURES,
    delta_Nb=1.4,
    delta_Al=0.2,
    Tc_Nb=9.2,
    gamma=1e-4,
    R_N=10.0,
    v_max=2.2,
    dv=1e-3,
):
    """Noise-free SIS IV traces of an Nb/Al junction across bath temperatures.

    Both gaps follow the BCS temperature dependence; Al uses its weak-coupling
    critical temperature. A 1 uV grid keeps discretization well below the
    2 % extraction tolerance near the Al transition.
    """
    nb = SuperconductorModel(delta_Nb, gamma, Tc_Nb)
    al = SuperconductorModel(delta_Al, gamma)
    v = np.arange(-v_max, v_max + dv / 2, dv)
    traces = []
    for T in temperatures:
        j = JunctionDC(R_N, nb.at_temperature(T), al.at_temperature(T))
        traces.append(iv_curve(j, T, v))
    return traces, nb, al
