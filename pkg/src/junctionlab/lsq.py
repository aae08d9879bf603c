"""Damped Gauss-Newton (Levenberg-Marquardt) least squares with box bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .exceptions import DegenerateModelError, InsufficientDataError, ParameterError


@dataclass
class FitReport:
    params: dict
    std_errors: dict | None
    residual_norm: float
    converged: bool
    iterations: int
    covariance: np.ndarray | None = field(default=None, repr=False)
    message: str = ""

    def __post_init__(self):
        if self.residual_norm < 0:
            raise ValueError("residual_norm must be non-negative")
        if not self.converged:
            self.std_errors = None
            self.covariance = None

    def __getitem__(self, name):
        return self.params[name]

    def to_dict(self):
        return {
            "params": {k: float(v) for k, v in self.params.items()},
            "std_errors": None
            if self.std_errors is None
            else {k: float(v) for k, v in self.std_errors.items()},
            "residual_norm": float(self.residual_norm),
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "message": self.message,
        }


def finite_difference_jacobian(model, x, p, rel_step=1e-6):
    p = np.asarray(p, dtype=float)
    cols = []
    for k in range(p.size):
        h = rel_step * max(abs(p[k]), 1.0)
        up, dn = p.copy(), p.copy()
        up[k] += h
        dn[k] -= h
        cols.append((model(x, up) - model(x, dn)) / (2 * h))
    return np.column_stack(cols)


def _unpack(data):
    if hasattr(data, "x") and hasattr(data, "y"):
        return np.asarray(data.x, dtype=float), np.asarray(data.y, dtype=float)
    x, y = data
    return np.asarray(x, dtype=float), np.asarray(y, dtype=float)


def damped_least_squares(
    model: Callable,
    data,
    init: Sequence[float],
    bounds=None,
    *,
    jac: Callable | None = None,
    names: Sequence[str] | None = None,
    max_iter: int = 200,
    ftol: float = 1e-10,
    gtol: float = 1e-12,
) -> FitReport:
    """Minimize ``sum (model(x, p) - y)^2`` starting from ``init``.

    Parameters
    ----------
    model
        ``model(x, p) -> y_hat``.
    data
        A trace with ``x``/``y`` attributes or an ``(x, y)`` pair.
    bounds
        ``(lower, upper)`` sequences; steps are projected onto the box.
    jac
        Analytic Jacobian ``jac(x, p) -> (n, m)``; central differences if omitted.

    Iteration stops when the relative cost decrease of an accepted step drops
    below ``ftol`` or the scaled gradient (cosine between residual and each
    Jacobian column) is below ``gtol``. Running out of iterations returns an
    unconverged report rather than raising.
    """
    x, y = _unpack(data)
    p = np.asarray(init, dtype=float).copy()
    m = p.size
    names = list(names) if names is not None else [f"p{k}" for k in range(m)]
    if len(names) != m:
        raise ParameterError("names must match the number of parameters")
    if y.size < m + 1:
        raise InsufficientDataError(f"need at least {m + 1} points for {m} parameters, got {y.size}")
    if bounds is None:
        lower, upper = np.full(m, -np.inf), np.full(m, np.inf)
    else:
        lower, upper = (np.asarray(b, dtype=float) for b in bounds)
    if np.any(p < lower) or np.any(p > upper):
        raise ParameterError(f"initial parameters {p} lie outside the bounds")
    jacobian = jac or (lambda xx, pp: finite_difference_jacobian(model, xx, pp))

    r = model(x, p) - y
    cost = 0.5 * r @ r
    J = jacobian(x, p)
    if np.linalg.matrix_rank(J) < m:
        raise DegenerateModelError(
            f"Jacobian is rank deficient at the initial point; parameters {names} "
            "are not jointly identifiable from these data"
        )
    roundoff = 1e-12 * max(float(np.linalg.norm(y)), np.finfo(float).tiny)
    lam = 0.0
    converged = False
    message = "maximum iterations reached"
    iterations = 0
    while iterations < max_iter:
        g = J.T @ r
        rnorm = math.sqrt(2 * cost)
        if rnorm == 0.0:
            converged, message = True, "zero residual"
            break
        colnorm = np.linalg.norm(J, axis=0)
        colnorm[colnorm == 0] = 1.0
        if np.max(np.abs(g) / (colnorm * rnorm)) < gtol:
            converged, message = True, "gradient below tolerance"
            break
        A = J.T @ J
        d = np.diag(A).copy()
        d[d == 0] = 1.0
        accepted = False
        while not accepted:
            try:
                step = np.linalg.solve(A + lam * np.diag(d), -g)
            except np.linalg.LinAlgError:
                step = None
            if step is not None:
                p_new = np.clip(p + step, lower, upper)
                r_new = model(x, p_new) - y
                cost_new = 0.5 * r_new @ r_new
                if np.isfinite(cost_new) and cost_new < cost:
                    accepted = True
                    break
            lam = max(lam * 10, 1e-3)
            if lam > 1e16:
                break
        if not accepted:
            # no descent direction left at machine precision
            converged, message = True, "no further decrease possible"
            break
        iterations += 1
        rel = (cost - cost_new) / cost
        p, r, cost = p_new, r_new, cost_new
        J = jacobian(x, p)
        lam = lam / 10 if lam > 1e-7 else 0.0
        if rel < ftol or cost == 0.0:
            converged, message = True, "relative cost change below tolerance"
            break
        if math.sqrt(2 * cost) <= roundoff:
            converged, message = True, "residual at round-off level"
            break

    std_errors = cov = None
    if converged:
        A = J.T @ J
        if np.linalg.matrix_rank(J) < m or np.linalg.cond(A) > 1e15:
            raise DegenerateModelError(
                f"Jacobian is singular at the optimum; parameters {names} are not identifiable"
            )
        dof = y.size - m
        s2 = 2 * cost / dof
        cov = s2 * np.linalg.inv(A)
        std_errors = dict(zip(names, np.sqrt(np.clip(np.diag(cov), 0, None))))
    return FitReport(
        params=dict(zip(names, p)),
        std_errors=std_errors,
        residual_norm=math.sqrt(2 * cost),
        converged=converged,
        iterations=iterations,
        covariance=cov,
        message=message,
    )


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    slope_stderr: float
    intercept_stderr: float
    n_points: int


def linear_least_squares(x, y) -> LinearFit:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    A = np.column_stack([x, np.ones_like(x)])
    coef, _, rank, _ = np.linalg.lstsq(A, y, rcond=None)
    if rank < 2:
        raise InsufficientDataError("x values are degenerate")
    resid = y - A @ coef
    dof = x.size - 2
    s2 = resid @ resid / dof if dof > 0 else 0.0
    cov = s2 * np.linalg.inv(A.T @ A)
    return LinearFit(coef[0], coef[1], math.sqrt(cov[0, 0]), math.sqrt(cov[1, 1]), x.size)
