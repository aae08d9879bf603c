"""Charge-basis spectra of double-junction and single-junction transmon qubits.

All energies are frequencies E/h in GHz and capacitances are in fF. Charging
energies follow the e^2/2C convention, so a Cooper-pair charging term reads
``4 * (e^2/2C) * n^2`` (the familiar ``4 E_C n^2`` with ``E_C = e^2/2C``).

The double-junction circuit is two junctions in series with a small island
between them, shunted by ``C_S``. In the per-node Cooper-pair basis
``|n1, n2>`` (``n_pm = n2 +/- n1``)::

    H = 4 E_Sigma (n2 - n1 - ng_minus)^2 + 4 E_Delta (n2 + n1 - ng_plus)^2
        - E_J1 cos(phi1) - E_J2 cos(phi2)

with ``E_Sigma = e^2/2C_Sigma``, ``E_Delta = e^2/2C_Delta``. For identical
junctions ``cos(phi1) + cos(phi2) = 2 cos(phi_plus) cos(phi_minus)``, the
usual two-mode form. The per-node basis enforces the equal parity of
``n_plus`` and ``n_minus`` by construction.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg
from scipy.optimize import brentq

from .constants import E2_OVER_2H_GHZ_FF, capacitance_from_charging_energy, charging_energy
from .exceptions import (
    ConvergenceError,
    InversionError,
    NumericalError,
    ParameterError,
    ResolutionError,
    UnsupportedRegimeError,
)

#: Gate capacitance equivalent to a 100 GHz gate charging energy. The published
#: reference spectra are reproduced to the quoted digits with this weak gate
#: coupling on each node; with strictly zero gate capacitance the
#: ``phi_plus``-like levels sit 0.15-0.2 GHz higher.
REFERENCE_GATE_CAPACITANCE = E2_OVER_2H_GHZ_FF / 100.0


@dataclass(frozen=True)
class DoubleJunctionParams:
    """Circuit parameters of the double-junction qubit.

    Capacitances in fF, Josephson energies in GHz (E/h).
    """

    C_S: float
    C_J1: float
    C_J2: float
    E_J1: float
    E_J2: float
    C_g1: float = 0.0
    C_g2: float = 0.0

    def __post_init__(self):
        for name in ("C_S", "C_J1", "C_J2", "E_J1", "E_J2"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ParameterError(f"{name} must be positive and finite, got {value}")
        for name in ("C_g1", "C_g2"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ParameterError(f"{name} must be non-negative, got {value}")

    @property
    def C_delta(self) -> float:
        return self.C_J1 + self.C_J2 + self.C_g1 + self.C_g2

    @property
    def C_sigma(self) -> float:
        return 4 * self.C_S + self.C_delta

    @classmethod
    def reference(cls, scale: float = 1.0) -> "DoubleJunctionParams":
        """The 100 fF / 10 fF / 40 GHz reference device.

        ``scale`` multiplies ``C_S`` and both Josephson energies (0.55 gives the
        reduced-shunt variant with roughly doubled anharmonicity).
        """
        return cls(
            C_S=100.0 * scale,
            C_J1=10.0,
            C_J2=10.0,
            E_J1=40.0 * scale,
            E_J2=40.0 * scale,
            C_g1=REFERENCE_GATE_CAPACITANCE,
            C_g2=REFERENCE_GATE_CAPACITANCE,
        )


@dataclass(frozen=True)
class GateCharge:
    """Offset charges in Cooper-pair units, ``n_g,pm = n_g2 +/- n_g1``.

    Spectra are periodic under integer shifts of the per-node offsets, i.e.
    under ``(n_g_minus, n_g_plus) -> (n_g_minus +/- 1, n_g_plus + 1)``.
    """

    n_g_minus: float = 0.0
    n_g_plus: float = 0.0

    @classmethod
    def from_nodes(cls, n_g1: float, n_g2: float) -> "GateCharge":
        return cls(n_g_minus=n_g2 - n_g1, n_g_plus=n_g2 + n_g1)

    @property
    def node_offsets(self) -> tuple[float, float]:
        return ((self.n_g_plus - self.n_g_minus) / 2, (self.n_g_plus + self.n_g_minus) / 2)


@dataclass(frozen=True)
class TruncationSpec:
    """Charge cutoff ``|n_i| <= n_max`` and a frequency tolerance in Hz."""

    n_max: int = 15
    convergence_tol: float = 1e3
    max_n_max: int = 31

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ParameterError(f"n_max must be an integer >= 1, got {self.n_max}")
        if self.convergence_tol <= 0:
            raise ParameterError("convergence_tol must be positive")

    @property
    def dimension(self) -> int:
        return (2 * self.n_max + 1) ** 2

    def grown(self, step: int = 4) -> "TruncationSpec":
        return TruncationSpec(self.n_max + step, self.convergence_tol, self.max_n_max)


@dataclass(frozen=True)
class Spectrum:
    """Eigenfrequencies relative to the ground state, in GHz."""

    levels: tuple

    def __post_init__(self):
        levels = tuple(float(v) for v in self.levels)
        if not levels:
            raise ParameterError("a spectrum needs at least one level")
        if levels[0] != 0.0:
            raise ParameterError("levels must be relative to the ground state")
        if any(b < a for a, b in zip(levels, levels[1:])):
            raise ParameterError("levels must be sorted ascending")
        object.__setattr__(self, "levels", levels)

    def _need(self, n):
        if len(self.levels) < n:
            raise ParameterError(f"need at least {n} levels, spectrum has {len(self.levels)}")

    @property
    def f_ge(self) -> float:
        self._need(3)
        return self.levels[1]

    @property
    def f_ef(self) -> float:
        self._need(3)
        return self.levels[2] - self.levels[1]

    @property
    def f_gf(self) -> float:
        # Defined as the sum so that f_gf == f_ge + f_ef holds bit-for-bit.
        return self.f_ge + self.f_ef

    @property
    def anharmonicity(self) -> float:
        return self.f_ef - self.f_ge


@dataclass(frozen=True)
class TransmonParams:
    E_J: float
    E_C: float
    n_g: float = 0.0

    def __post_init__(self):
        if not self.E_J > 0 or not self.E_C > 0:
            raise ParameterError(f"E_J and E_C must be positive, got {self.E_J}, {self.E_C}")


@dataclass(frozen=True)
class PhaseWavefunction:
    """Eigenstate amplitudes on a regular ``[-pi, pi)`` grid in (phi1, phi2)."""

    phi1: np.ndarray
    phi2: np.ndarray
    amplitudes: np.ndarray = field(repr=False)
    level_index: int

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @property
    def cell_area(self) -> float:
        return (self.phi1[1] - self.phi1[0]) * (self.phi2[1] - self.phi2[0])

    def norm(self) -> float:
        return float(self.density.sum() * self.cell_area)

    def phi_plus(self) -> np.ndarray:
        p1, p2 = np.meshgrid(self.phi1, self.phi2, indexing="ij")
        return (p2 + p1) / 2

    def phi_minus(self) -> np.ndarray:
        p1, p2 = np.meshgrid(self.phi1, self.phi2, indexing="ij")
        return (p2 - p1) / 2


class EffectiveTransmon(NamedTuple):
    E_J: float
    E_C: float
    frequency: float


def _charges(n_max):
    return np.arange(-n_max, n_max + 1)


def build_charge_hamiltonian(
    params: DoubleJunctionParams,
    gate: GateCharge | None = None,
    trunc: TruncationSpec | None = None,
) -> np.ndarray:
    """Dense real-symmetric Hamiltonian in the ``|n1, n2>`` basis (GHz).

    Basis index is ``(n1 + n_max) * (2 n_max + 1) + (n2 + n_max)``.
    """
    gate = gate or GateCharge()
    trunc = trunc or TruncationSpec()
    n = _charges(trunc.n_max)
    size = n.size
    n1, n2 = np.meshgrid(n, n, indexing="ij")
    e_sigma = charging_energy(params.C_sigma)
    e_delta = charging_energy(params.C_delta)
    diag = 4 * e_sigma * (n2 - n1 - gate.n_g_minus) ** 2 + 4 * e_delta * (
        n2 + n1 - gate.n_g_plus
    ) ** 2

    eye = np.eye(size)
    hop = np.eye(size, k=1) + np.eye(size, k=-1)
    H = np.diag(diag.ravel())
    H -= params.E_J1 / 2 * np.kron(hop, eye)
    H -= params.E_J2 / 2 * np.kron(eye, hop)
    return H


def _eigh_lowest(H, k, vectors=False):
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ParameterError(f"expected a square matrix, got shape {H.shape}")
    dim = H.shape[0]
    if k < 1 or k > dim:
        raise ParameterError(f"k must lie in [1, {dim}], got {k}")
    try:
        return scipy.linalg.eigh(
            H, eigvals_only=not vectors, subset_by_index=[0, k - 1], check_finite=True
        )
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(
            f"eigensolver failed for {dim}x{dim} matrix "
            f"(max |H| = {np.nanmax(np.abs(H)):.3g}): {exc}"
        ) from exc


def eigenspectrum(H, k: int = 6) -> Spectrum:
    """Lowest ``k`` eigenvalues of ``H`` shifted so the ground state is zero."""
    if k < 3:
        raise ParameterError(f"k must be at least 3, got {k}")
    evals = _eigh_lowest(H, k)
    levels = np.sort(evals - evals[0])
    levels[0] = 0.0
    return Spectrum(tuple(levels))


def transitions(spec: Spectrum) -> tuple[float, float, float, float]:
    """``(f_ge, f_ef, f_gf, anharmonicity)`` in GHz."""
    if len(spec.levels) < 3:
        raise ParameterError(f"need at least 3 levels, got {len(spec.levels)}")
    return spec.f_ge, spec.f_ef, spec.f_gf, spec.anharmonicity


def double_junction_spectrum(params, gate=None, trunc=None, k=6) -> Spectrum:
    trunc = trunc or TruncationSpec()
    return eigenspectrum(build_charge_hamiltonian(params, gate, trunc), min(k, trunc.dimension))


def converged_spectrum(params, gate=None, trunc=None, k=6):
    """Spectrum with the cutoff grown in steps of 4 until ``f_ge`` settles.

    Returns ``(spectrum, record)`` where ``record`` lists the cutoffs tried and
    the final change in ``f_ge`` (Hz).
    """
    trunc = trunc or TruncationSpec()
    history = []
    prev = double_junction_spectrum(params, gate, trunc, k)
    history.append((trunc.n_max, prev.levels[1]))
    while True:
        nxt_trunc = trunc.grown()
        if nxt_trunc.n_max > trunc.max_n_max:
            raise ConvergenceError(
                f"f_ge not converged to {trunc.convergence_tol} Hz by n_max={trunc.n_max}; "
                f"history={history}"
            )
        nxt = double_junction_spectrum(params, gate, nxt_trunc, k)
        history.append((nxt_trunc.n_max, nxt.levels[1]))
        change_hz = abs(nxt.levels[1] - prev.levels[1]) * 1e9
        if change_hz < trunc.convergence_tol:
            record = {
                "n_max": trunc.n_max,
                "checked_n_max": nxt_trunc.n_max,
                "f_ge_change_Hz": change_hz,
                "history": [[n, f] for n, f in history],
            }
            return prev, record
        trunc, prev = nxt_trunc, nxt


def _precision_floor_hz(H):
    # Backward-stable eigensolvers perturb eigenvalues by ~ eps * ||H||.
    bound = np.max(np.sum(np.abs(H), axis=1))
    return 10 * np.finfo(float).eps * bound * 1e9


def dispersion_gate_points(grid_resolution: int = 3, full_grid: bool = False):
    """Per-node offset pairs ``(n_g1, n_g2)`` visited by :func:`charge_dispersion`.

    The default visits the symmetry points ``{0, ..., 1/2}`` on each node axis,
    with both relative signs, which covers one full period of the gate-charge
    lattice up to the inversion symmetry ``n_g -> -n_g``. ``full_grid`` samples
    ``[0, 1)^2`` uniformly instead.
    """
    if grid_resolution < 3:
        raise ParameterError(f"grid_resolution must be >= 3, got {grid_resolution}")
    if full_grid:
        axis = np.arange(grid_resolution) / grid_resolution
        return [(a, b) for a in axis for b in axis]
    axis = np.linspace(0.0, 0.5, grid_resolution)
    points = []
    for a in axis:
        for b in axis:
            for pair in ((a, b), (a, -b)):
                if pair not in points:
                    points.append(pair)
    return points


def f_ge_over_gate(params, trunc=None, grid_resolution=3, full_grid=False):
    """``[(n_g1, n_g2, f_ge), ...]`` and the estimated precision floor (Hz)."""
    trunc = trunc or TruncationSpec()
    rows = []
    floor = 0.0
    for a, b in dispersion_gate_points(grid_resolution, full_grid):
        H = build_charge_hamiltonian(params, GateCharge.from_nodes(a, b), trunc)
        floor = max(floor, _precision_floor_hz(H))
        evals = _eigh_lowest(H, 2)
        rows.append((a, b, evals[1] - evals[0]))
    return rows, floor


def charge_dispersion(
    params: DoubleJunctionParams,
    trunc: TruncationSpec | None = None,
    grid_resolution: int = 3,
    full_grid: bool = False,
) -> float:
    """Peak-to-peak variation of ``f_ge`` over gate charge, in Hz.

    Evaluated at ``n_max`` and ``n_max + 4``; the larger cutoff is reported.
    Raises :class:`ConvergenceError` if the two differ by more than 50 %
    while both are resolvable above the eigensolver floor.
    """
    trunc = trunc or TruncationSpec()

    def spread(t):
        rows, floor = f_ge_over_gate(params, t, grid_resolution, full_grid)
        f = np.array([r[2] for r in rows])
        return (f.max() - f.min()) * 1e9, floor

    coarse, _ = spread(trunc)
    fine, floor = spread(trunc.grown())
    resolvable = 100 * floor
    if max(coarse, fine) > resolvable and abs(fine - coarse) > 0.5 * max(coarse, fine):
        raise ConvergenceError(
            f"charge dispersion not converged: {coarse:.4g} Hz at n_max={trunc.n_max}, "
            f"{fine:.4g} Hz at n_max={trunc.n_max + 4}"
        )
    if fine < resolvable:
        warnings.warn(
            f"charge dispersion {fine:.3g} Hz is within 100x of the eigensolver "
            f"precision floor (~{floor:.2g} Hz)",
            RuntimeWarning,
            stacklevel=2,
        )
    return float(fine)


def phase_wavefunction(
    params: DoubleJunctionParams,
    gate: GateCharge | None = None,
    trunc: TruncationSpec | None = None,
    level_index: int = 0,
    grid_points: int = 64,
) -> PhaseWavefunction:
    """Evaluate ``psi(phi1, phi2) = sum c_{n1 n2} exp(i n1 phi1 + i n2 phi2)``.

    The state is normalized so that ``sum |psi|^2 dphi1 dphi2 = 1`` on the grid.
    """
    if grid_points < 32:
        raise ResolutionError(f"need at least 32 grid points per axis, got {grid_points}")
    trunc = trunc or TruncationSpec()
    if level_index < 0:
        raise ParameterError("level_index must be non-negative")
    H = build_charge_hamiltonian(params, gate, trunc)
    _, vecs = _eigh_lowest(H, level_index + 1, vectors=True)
    size = 2 * trunc.n_max + 1
    coeffs = vecs[:, level_index].reshape(size, size)

    phi = -np.pi + 2 * np.pi * np.arange(grid_points) / grid_points
    n = _charges(trunc.n_max)
    basis = np.exp(1j * np.outer(phi, n))
    psi = basis @ coeffs @ basis.T
    dphi = 2 * np.pi / grid_points
    psi = psi / np.sqrt(np.sum(np.abs(psi) ** 2) * dphi * dphi)
    return PhaseWavefunction(phi1=phi, phi2=phi.copy(), amplitudes=psi, level_index=level_index)


def transmon_hamiltonian(p: TransmonParams, trunc: TruncationSpec | None = None) -> np.ndarray:
    """``4 E_C (n - n_g)^2 - E_J cos(phi)`` in the 1-D charge basis."""
    trunc = trunc or TruncationSpec()
    n = _charges(trunc.n_max)
    H = np.diag(4 * p.E_C * (n - p.n_g) ** 2)
    hop = np.eye(n.size, k=1) + np.eye(n.size, k=-1)
    return H - p.E_J / 2 * hop


def transmon_spectrum(p: TransmonParams, trunc: TruncationSpec | None = None, k: int = 6):
    trunc = trunc or TruncationSpec()
    return eigenspectrum(transmon_hamiltonian(p, trunc), min(k, 2 * trunc.n_max + 1))


def effective_transmon_mapping(params: DoubleJunctionParams, rtol: float = 0.01):
    """Single-mode transmon estimate with ``2 E_J1`` and ``(e^2/2C_S)/4``.

    Only meaningful for identical junctions.
    """
    mean = (params.E_J1 + params.E_J2) / 2
    if abs(params.E_J1 - params.E_J2) > rtol * mean:
        raise UnsupportedRegimeError(
            f"effective mapping assumes identical junctions; E_J1={params.E_J1}, "
            f"E_J2={params.E_J2} differ by more than {rtol:.0%}"
        )
    E_J = 2 * params.E_J1
    E_C = charging_energy(params.C_S) / 4
    return EffectiveTransmon(E_J, E_C, math.sqrt(8 * E_J * E_C))


def _transmon_f_alpha(E_J, E_C, n_g, trunc):
    spec = transmon_spectrum(TransmonParams(E_J, E_C, n_g), trunc, k=3)
    return spec.f_ge, spec.anharmonicity


def invert_charging_energy(
    f_ge: float,
    anharmonicity: float,
    n_g: float = 0.0,
    trunc: TruncationSpec | None = None,
    min_ratio: float = 10.0,
    xtol: float = 1e-8,
) -> tuple[float, float]:
    """Find ``(E_J, E_C)`` whose transmon spectrum has the given ``f_ge`` and ``alpha``.

    Nested bracketing: for each trial ``E_C`` the ``E_J`` matching ``f_ge`` is
    found by Brent's method, then ``E_C`` is adjusted until the anharmonicity
    matches. Restricted to ``E_J / E_C > min_ratio``.
    """
    if not f_ge > 0:
        raise ParameterError(f"f_ge must be positive, got {f_ge}")
    if not anharmonicity < 0:
        raise ParameterError(f"anharmonicity must be negative, got {anharmonicity}")
    trunc = trunc or TruncationSpec()

    def ej_for(E_C):
        lo = min_ratio * E_C
        f_lo, _ = _transmon_f_alpha(lo, E_C, n_g, trunc)
        if f_lo >= f_ge:
            raise InversionError(
                f"E_C={E_C:.4g} GHz: f_ge at E_J/E_C={min_ratio} is already {f_lo:.4g} GHz "
                f"> {f_ge} GHz"
            )
        hi = max(2 * lo, (f_ge + E_C) ** 2 / (8 * E_C) * 4)
        return brentq(
            lambda ej: _transmon_f_alpha(ej, E_C, n_g, trunc)[0] - f_ge, lo, hi, xtol=xtol
        )

    def alpha_mismatch(E_C):
        ej = ej_for(E_C)
        return _transmon_f_alpha(ej, E_C, n_g, trunc)[1] - anharmonicity

    # E_J/E_C > min_ratio bounds E_C from above: f_ge ~ sqrt(8 E_J E_C) - E_C.
    ec_hi = f_ge / (math.sqrt(8 * min_ratio) - 1) * 0.999
    ec_lo = abs(anharmonicity) * 0.2
    lo_val = alpha_mismatch(ec_lo)
    hi_val = alpha_mismatch(ec_hi)
    if lo_val * hi_val > 0:
        raise InversionError(
            f"no transmon-regime solution: alpha mismatch {lo_val * 1e3:.1f} MHz at "
            f"E_C={ec_lo * 1e3:.1f} MHz and {hi_val * 1e3:.1f} MHz at E_C={ec_hi * 1e3:.1f} MHz"
        )
    E_C = brentq(alpha_mismatch, ec_lo, ec_hi, xtol=xtol)
    return ej_for(E_C), E_C


def junction_capacitance_from_EC(E_C: float, C_shunt_sim: float) -> float:
    """Junction capacitance (fF): total ``e^2/2hE_C`` minus the simulated shunt."""
    if not E_C > 0:
        raise ParameterError(f"E_C must be positive, got {E_C}")
    C_J = capacitance_from_charging_energy(E_C) - C_shunt_sim
    if C_J < -1e-9 * C_shunt_sim:
        raise ParameterError(
            f"shunt capacitance {C_shunt_sim} fF exceeds the total "
            f"{C_J + C_shunt_sim:.4g} fF implied by E_C={E_C} GHz"
        )
    return max(C_J, 0.0)
