"""Physical constants (CODATA 2018, via scipy) in the unit system used throughout.

Energies are frequencies (E/h) in GHz, capacitances in fF, voltages in mV,
currents in nA, resistances in kOhm, temperatures in K.
"""

import math

from scipy import constants as _c

E_CHARGE = _c.e
PLANCK = _c.h
HBAR = _c.hbar
K_BOLTZMANN = _c.k
EPSILON_0 = _c.epsilon_0

#: e^2 / 2h in GHz * fF; dividing by a capacitance in fF gives a charging energy in GHz.
E2_OVER_2H_GHZ_FF = E_CHARGE**2 / (2 * PLANCK) * 1e15 / 1e9

#: k_B / e in mV / K.
KB_OVER_E_MV_PER_K = K_BOLTZMANN / E_CHARGE * 1e3

#: Reduced flux quantum hbar / 2e in Wb.
REDUCED_FLUX_QUANTUM = HBAR / (2 * E_CHARGE)

#: BCS weak-coupling ratio Delta(0) / (k_B Tc).
BCS_GAP_RATIO = 1.764

CODATA = {
    "e": E_CHARGE,
    "h": PLANCK,
    "k_B": K_BOLTZMANN,
    "epsilon_0": EPSILON_0,
}


def charging_energy(capacitance_fF):
    """e^2/2C in GHz for a capacitance in fF."""
    if capacitance_fF <= 0:
        raise ValueError(f"capacitance must be positive, got {capacitance_fF}")
    return E2_OVER_2H_GHZ_FF / capacitance_fF


def capacitance_from_charging_energy(E_C):
    """Inverse of :func:`charging_energy`; ``E_C`` in GHz, result in fF."""
    if E_C <= 0:
        raise ValueError(f"charging energy must be positive, got {E_C}")
    return E2_OVER_2H_GHZ_FF / E_C


TWO_PI = 2 * math.pi
