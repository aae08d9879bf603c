"""Capacitance estimates, participation ratios and dielectric loss budgets."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .constants import EPSILON_0, PLANCK, REDUCED_FLUX_QUANTUM
from .exceptions import ParameterError

#: Relative permittivity assumed for amorphous AlOx when nothing else is known.
ALOX_EPS_R = 9.8

#: Specific capacitance of the tunnel barrier, fF per square micron.
SPECIFIC_CAPACITANCE_FF_PER_UM2 = 40.0

#: Slack allowed when checking that participations sum to at most one.
PARTICIPATION_TOLERANCE = 1e-9


def _positive(**values):
    for name, v in values.items():
        if not (v > 0 and math.isfinite(v)):
            raise ParameterError(f"{name} must be positive and finite, got {v!r}")


def parallel_plate_capacitance(area_nm2: float, thickness_nm: float, eps_r: float = 1.0) -> float:
    """Parallel-plate capacitance in fF for an area in nm² and gap in nm."""
    _positive(area_nm2=area_nm2, thickness_nm=thickness_nm, eps_r=eps_r)
    return EPSILON_0 * eps_r * (area_nm2 * 1e-18) / (thickness_nm * 1e-9) * 1e15


@dataclass(frozen=True)
class JunctionGeometry:
    """Square overlap junction with a thin oxide on its sidewalls (all lengths in nm)."""

    lateral: float
    barrier_thickness: float
    sidewall_thickness: float
    electrode_thickness: float

    def __post_init__(self):
        _positive(
            lateral=self.lateral,
            barrier_thickness=self.barrier_thickness,
            electrode_thickness=self.electrode_thickness,
        )
        # an unbounded sidewall oxide is allowed: it stands for "no sidewall"
        if not self.sidewall_thickness > 0:
            raise ParameterError(
                f"sidewall_thickness must be positive, got {self.sidewall_thickness!r}"
            )

    @property
    def barrier_area(self) -> float:
        return self.lateral**2

    @property
    def sidewall_area(self) -> float:
        # two opposite faces of the counter-electrode step
        return 2.0 * self.lateral * self.electrode_thickness


def barrier_capacitance(g: JunctionGeometry, eps_r: float = ALOX_EPS_R) -> float:
    return parallel_plate_capacitance(g.barrier_area, g.barrier_thickness, eps_r)


def sidewall_capacitance(g: JunctionGeometry, eps_r: float = ALOX_EPS_R) -> float:
    return parallel_plate_capacitance(g.sidewall_area, g.sidewall_thickness, eps_r)


def barrier_sidewall_ratio(g: JunctionGeometry) -> float:
    """Tunnel-barrier to sidewall capacitance ratio; the permittivity cancels.

    A sidewall of unbounded thickness contributes no capacitance, so the
    ratio grows without limit in that case.
    """
    if math.isinf(g.sidewall_thickness):
        return math.inf
    return (g.barrier_area / g.barrier_thickness) / (g.sidewall_area / g.sidewall_thickness)


def junction_capacitance_from_area(
    side_nm: float,
    shrink_nm: float = 0.0,
    specific_fF_per_um2: float = SPECIFIC_CAPACITANCE_FF_PER_UM2,
) -> float:
    """Junction capacitance (fF) from the drawn side minus the process shrink."""
    _positive(side_nm=side_nm, specific_fF_per_um2=specific_fF_per_um2)
    effective = side_nm - shrink_nm
    if effective <= 0:
        raise ParameterError(f"shrink {shrink_nm} nm consumes the whole {side_nm} nm junction")
    return specific_fF_per_um2 * (effective * 1e-3) ** 2


def junction_participation(C_J: float, C_S: float) -> float:
    """Participation of two series junctions in the shunt mode, ``C_J / (2 C_S)``.

    The factor two reflects the two junction capacitances appearing in series
    across the shunt.
    """
    _positive(C_S=C_S)
    if C_J < 0 or not math.isfinite(C_J):
        raise ParameterError(f"C_J must be non-negative, got {C_J!r}")
    return C_J / (2.0 * C_S)


@dataclass(frozen=True)
class LossContribution:
    name: str
    participation: float
    tan_delta: float

    def __post_init__(self):
        if not 0.0 <= self.participation <= 1.0:
            raise ParameterError(f"{self.name}: participation must lie in [0, 1]")
        if self.tan_delta < 0 or not math.isfinite(self.tan_delta):
            raise ParameterError(f"{self.name}: tan_delta must be non-negative")

    @property
    def inverse_q(self) -> float:
        return self.participation * self.tan_delta


@dataclass(frozen=True)
class LossBudget:
    terms: dict
    total: float
    target_inv_Q: float
    margin: float
    meets_target: bool
    participation_sum: float

    @property
    def q_limit(self) -> float:
        return math.inf if self.total == 0 else 1.0 / self.total

    def to_dict(self):
        return {
            "terms": {k: float(v) for k, v in self.terms.items()},
            "total_inv_Q": self.total,
            "target_inv_Q": self.target_inv_Q,
            "margin": self.margin,
            "meets_target": self.meets_target,
            "participation_sum": self.participation_sum,
            "Q_limit": self.q_limit,
        }


def loss_budget(contributions, target_inv_Q: float) -> LossBudget:
    """Sum ``p * tan(delta)`` over the contributions and compare with a target 1/Q.

    ``margin`` is ``target - total``; a negative margin means the dielectric
    losses alone already exceed the target. Contribution names must be unique.
    """
    contributions = list(contributions)
    if not contributions:
        raise ParameterError("a loss budget needs at least one contribution")
    _positive(target_inv_Q=target_inv_Q)
    terms = {}
    for c in contributions:
        if c.name in terms:
            raise ParameterError(f"duplicate contribution name {c.name!r}")
        terms[c.name] = c.inverse_q
    p_sum = math.fsum(c.participation for c in contributions)
    if p_sum > 1.0 + PARTICIPATION_TOLERANCE:
        raise ParameterError(f"participations sum to {p_sum:.6g} > 1")
    total = math.fsum(terms.values())
    return LossBudget(
        terms=terms,
        total=total,
        target_inv_Q=target_inv_Q,
        margin=target_inv_Q - total,
        meets_target=total <= target_inv_Q,
        participation_sum=p_sum,
    )


def effective_loss_tangent_bound(inv_Q: float, participation: float) -> float:
    """Largest loss tangent a region of given participation can have under ``1/Q``."""
    _positive(inv_Q=inv_Q, participation=participation)
    return inv_Q / participation


def josephson_inductance(E_J: float) -> float:
    """Josephson inductance in nH for ``E_J`` given as a frequency in GHz."""
    _positive(E_J=E_J)
    return REDUCED_FLUX_QUANTUM**2 / (PLANCK * E_J * 1e9) * 1e9


def characteristic_impedance(L_nH: float, C_fF: float) -> float:
    """``sqrt(L/C)`` in Ohm."""
    _positive(L_nH=L_nH, C_fF=C_fF)
    return math.sqrt(L_nH * 1e-9 / (C_fF * 1e-15))


SUBGAP_CAVEAT = (
    "Upper bound only: at qubit energies far below the gap there may be no final "
    "states for quasiparticle tunneling, in which case this channel does not limit Q."
)


@dataclass(frozen=True)
class SubgapQBound:
    value: float
    R_subgap_MOhm: float
    Z_c_ohm: float
    note: str = field(default=SUBGAP_CAVEAT)

    def to_dict(self):
        return {
            "Q_bound": self.value,
            "R_subgap_MOhm": self.R_subgap_MOhm,
            "Z_c_ohm": self.Z_c_ohm,
            "note": self.note,
        }


def subgap_q_limit(R_subgap_MOhm: float, Z_c_ohm: float) -> SubgapQBound:
    """Quality factor implied by shunting the qubit with the subgap resistance."""
    if not R_subgap_MOhm > 0:
        raise ParameterError("R_subgap must be positive")
    _positive(Z_c_ohm=Z_c_ohm)
    value = math.inf if math.isinf(R_subgap_MOhm) else R_subgap_MOhm * 1e6 / Z_c_ohm
    return SubgapQBound(value, R_subgap_MOhm, Z_c_ohm)
