"""Acceptance criteria 1-9, each checked at its stated tolerance.

Every test records a single ``CRITERION n: PASS|FAIL`` line (printed and
repeated in the terminal summary). Criteria that cannot be met by a faithful
implementation are left failing rather than loosened.
"""

import math
import subprocess
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from junctionlab.circuit import (
    DoubleJunctionParams,
    GateCharge,
    TruncationSpec,
    charge_dispersion,
    converged_spectrum,
    effective_transmon_mapping,
    invert_charging_energy,
    junction_capacitance_from_EC,
)
from junctionlab.cli import fixture_path
from junctionlab.fits import fit_echo, fit_ramsey, fit_resistance_area, fit_t1, quality_factor
from junctionlab.io import load_trace_csv
from junctionlab.loss import (
    JunctionGeometry,
    LossContribution,
    barrier_sidewall_ratio,
    effective_loss_tangent_bound,
    junction_participation,
    loss_budget,
    subgap_q_limit,
)
from junctionlab.synthetic import gap_temperature_series
from junctionlab.tunneling import (
    JunctionDC,
    SuperconductorModel,
    dynes_gamma_estimate,
    extract_gaps_vs_temperature,
    iv_curve,
    onset_voltage,
    subgap_linear_fit,
)

TESTS = Path(__file__).parent


def within(value, target, tol):
    return abs(value - target) <= tol


class Checks:
    """Collects named sub-checks so one criterion yields one verdict line."""

    def __init__(self):
        self.items = []

    def add(self, label, ok, shown):
        self.items.append((label, bool(ok), shown))

    @property
    def ok(self):
        return all(ok for _, ok, _ in self.items)

    def __str__(self):
        return "; ".join(f"{label}={shown}{'' if ok else ' [x]'}" for label, ok, shown in self.items)


def test_criterion_1_reference_spectrum(verdict):
    t0 = time.perf_counter()
    spec, _ = converged_spectrum(DoubleJunctionParams.reference(), GateCharge(0.0, 0.0), k=6)
    elapsed = time.perf_counter() - t0
    c = Checks()
    for i, target in enumerate([5.165, 10.276, 15.331, 20.331, 23.436], start=1):
        value = spec.levels[i]
        c.add(f"E{i}", within(value, target, 5e-3), f"{value:.4f} GHz")
    alpha = spec.anharmonicity * 1e3
    c.add("alpha", within(alpha, -54.0, 2.0), f"{alpha:.2f} MHz")
    c.add("runtime", elapsed < 5.0, f"{elapsed:.2f} s")
    verdict(1, c.ok, c)


def test_criterion_2_charge_dispersion(verdict):
    t0 = time.perf_counter()
    trunc = TruncationSpec()
    with warnings.catch_warnings():
        # the reference dispersion sits close to the eigensolver floor; that
        # caveat is expected here and reported by the library as a warning
        warnings.simplefilter("ignore", RuntimeWarning)
        ref = charge_dispersion(DoubleJunctionParams.reference(), trunc)
    reduced = DoubleJunctionParams.reference(0.55)
    small = charge_dispersion(reduced, trunc)
    spec, _ = converged_spectrum(reduced, GateCharge(0.0, 0.0), trunc, k=6)
    elapsed = time.perf_counter() - t0
    c = Checks()
    c.add("ref dispersion", 2.0 / 5 <= ref <= 2.0 * 5, f"{ref:.3g} Hz")
    c.add("0.55 dispersion", within(small, 4000.0, 1200.0), f"{small:.0f} Hz")
    alpha = spec.anharmonicity * 1e3
    c.add("0.55 alpha", within(alpha, -102.0, 3.0), f"{alpha:.2f} MHz")
    c.add("0.55 f_ge", within(spec.f_ge, 4.94, 0.030), f"{spec.f_ge:.4f} GHz")
    c.add("0.55 E4", within(spec.levels[4], 16.957, 0.020), f"{spec.levels[4]:.4f} GHz")
    c.add("runtime", elapsed < 60.0, f"{elapsed:.1f} s")
    verdict(2, c.ok, c)


def test_criterion_3_effective_transmon(verdict):
    eff = effective_transmon_mapping(DoubleJunctionParams.reference())
    ok = within(eff.frequency, 5.57, 0.010)
    verdict(3, ok, f"f={eff.frequency:.4f} GHz (E_J={eff.E_J:.1f}, E_C={eff.E_C * 1e3:.1f} MHz)")


def test_criterion_4_charging_energy_inversion(verdict):
    c = Checks()
    for f_ge, alpha, ec_target, cj_target in [(4.848, -0.208, 185.0, 7.0),
                                              (4.389, -0.176, 162.0, 22.0)]:
        _, E_C = invert_charging_energy(f_ge, alpha)
        C_J = junction_capacitance_from_EC(E_C, 100.0)
        tag = f"({f_ge}, {alpha * 1e3:.0f})"
        c.add(f"E_C{tag}", within(E_C * 1e3, ec_target, 3.0), f"{E_C * 1e3:.2f} MHz")
        c.add(f"C_J{tag}", within(C_J, cj_target, 4.0), f"{C_J:.2f} fF")
    verdict(4, c.ok, c)


def test_criterion_5_tunneling(verdict):
    v = np.arange(-3.0, 3.0 + 2.5e-3, 5e-3)
    nb = SuperconductorModel(1.42, 1e-4, 9.2)
    al = SuperconductorModel(0.2, 1e-4)
    normal = SuperconductorModel(0.0)
    c = Checks()

    T = 1.3
    nis = iv_curve(JunctionDC(10.0, nb.at_temperature(T), normal), T, v)
    onset = onset_voltage(nis, 10.0)
    c.add("NIS onset", within(onset, 1.4, 0.05), f"{onset:.3f} mV")

    T = 0.04
    sis = iv_curve(JunctionDC(10.0, nb.at_temperature(T), al.at_temperature(T)), T, v)
    rise = onset_voltage(sis, 10.0)
    c.add("SIS rise", within(rise, 1.6, 0.05), f"{rise:.3f} mV")

    fine = np.arange(-2.0, 2.0 + 1e-3, 2e-3)
    leaky = iv_curve(JunctionDC(10.0, SuperconductorModel(1.42, 4e-3), normal), T, fine)
    R_sub, _ = subgap_linear_fit(leaky)
    c.add("R_subgap", abs(R_sub / 2.5 - 1) <= 0.05, f"{R_sub:.3f} MOhm")

    g1 = dynes_gamma_estimate(10.0, 2.5)
    g2 = dynes_gamma_estimate(20.0, 3.5)
    c.add("gamma pair 1", math.isclose(g1, 4e-3, rel_tol=1e-9), f"{g1:.2e}")
    c.add("gamma pair 2", round(g2, 3) == 6e-3, f"{g2:.2e}")
    verdict(5, c.ok, c)


def test_criterion_6_gap_round_trip(verdict):
    t0 = time.perf_counter()
    traces, nb, al = gap_temperature_series()
    result = extract_gaps_vs_temperature(traces)
    elapsed = time.perf_counter() - t0
    c = Checks()
    worst = 0.0
    for row in result.rows():
        T = row["temperature_K"]
        if T >= 0.4:
            for got, model in ((row["delta_Nb_meV"], nb), (row["delta_Al_meV"], al)):
                worst = max(worst, abs(got / model.at_temperature(T).delta0 - 1))
    c.add("T>=0.4 K worst error", worst <= 0.02, f"{worst:.2%}")
    coldest = next(result.rows())
    al_uev = coldest["delta_Al_meV"] * 1e3
    c.add("Al at coldest", within(al_uev, 200.0, 5.0), f"{al_uev:.1f} ueV")
    c.add("plateau rule used", coldest["plateau_rule"], coldest["plateau_rule"])
    temps = [r["temperature_K"] for r in result.rows()]
    c.add("span", min(temps) == 0.05 and max(temps) == 1.3, f"{min(temps)}-{max(temps)} K")
    c.add("runtime", elapsed < 120.0, f"{elapsed:.1f} s")
    verdict(6, c.ok, c)


def test_criterion_7_fits(verdict):
    c = Checks()
    for name, fit, key, target in [
        ("t1_36us.csv", fit_t1, "T1", 36.0),
        ("ramsey_17us.csv", fit_ramsey, "T2_star", 17.0),
        ("echo_42us.csv", fit_echo, "T2_echo", 42.0),
    ]:
        value = fit(load_trace_csv(fixture_path(name), "decay"))[key]
        c.add(key, abs(value / target - 1) <= 0.03, f"{value:.2f} us")
    Q = quality_factor(5.17, 30.0)
    c.add("Q", within(Q, 9.7e5, 1e3), f"{Q:.0f}")
    rep = fit_resistance_area(load_trace_csv(fixture_path("prober_ra.csv"), "prober"))
    c.add("RA", abs(rep["RA"] / 1100 - 1) <= 0.02, f"{rep['RA']:.1f} Ohm um^2")
    c.add("l", abs(rep["l"] / 90 - 1) <= 0.02, f"{rep['l']:.2f} nm")
    verdict(7, c.ok, c)


def test_criterion_8_loss_budget(verdict):
    c = Checks()
    ratio = barrier_sidewall_ratio(JunctionGeometry(600.0, 1.5, 2.0, 100.0))
    c.add("ratio", ratio == 4.0, ratio)
    p_J = junction_participation(10.0, 100.0)
    c.add("p_J", math.isclose(p_J, 0.05), f"{p_J:.3f}")
    total = loss_budget([LossContribution("passivation", 1e-4, 1e-2)], 1e-7).total
    c.add("budget", math.isclose(total, 1e-6), f"{total:.2e}")
    q = subgap_q_limit(2.5, 320.0).value
    c.add("subgap Q", round(q, -2) == 7.8e3, f"{q:.0f}")
    tan = effective_loss_tangent_bound(1e-6, p_J)
    c.add("tan bound", math.floor(math.log10(tan)) == -5, f"{tan:.1e}")
    verdict(8, c.ok, c)


def test_criterion_9_property_suites(verdict):
    t0 = time.perf_counter()
    proc = subprocess.run(
        [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
         "--ignore", str(TESTS / "test_acceptance.py"), str(TESTS)],
        capture_output=True,
        text=True,
        cwd=TESTS.parent,
    )
    elapsed = time.perf_counter() - t0
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    ok = proc.returncode == 0 and elapsed < 600.0
    verdict(9, ok, f"{tail} (suite wall time {elapsed:.0f} s, limit 600 s)")
