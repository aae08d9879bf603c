"""junctionlab: double-junction qubit spectra, tunnel-junction IV physics and
characterization fits for Al-AlOx-Nb junction qubits."""

__version__ = "0.1.0"

from .circuit import (
    DoubleJunctionParams,
    GateCharge,
    Spectrum,
    TruncationSpec,
    charge_dispersion,
    converged_spectrum,
    double_junction_spectrum,
    effective_transmon_mapping,
    invert_charging_energy,
)
from .exceptions import JunctionLabError, ParseError
from .fits import fit_echo, fit_ramsey, fit_resistance_area, fit_t1, quality_factor
from .loss import LossContribution, loss_budget
from .tunneling import JunctionDC, SampledTrace, SuperconductorModel, iv_curve

__all__ = [
    "__version__",
    "DoubleJunctionParams",
    "GateCharge",
    "Spectrum",
    "TruncationSpec",
    "charge_dispersion",
    "converged_spectrum",
    "double_junction_spectrum",
    "effective_transmon_mapping",
    "invert_charging_energy",
    "JunctionLabError",
    "ParseError",
    "fit_echo",
    "fit_ramsey",
    "fit_resistance_area",
    "fit_t1",
    "quality_factor",
    "LossContribution",
    "loss_budget",
    "JunctionDC",
    "SampledTrace",
    "SuperconductorModel",
    "iv_curve",
]
