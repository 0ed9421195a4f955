"""Closed-form Dykstra step kernels, one constraint row at a time.

This is the reference (pure Python) implementation of the step the
compiled kernels in _kernels.py perform in bulk.  Correction and
projection are fused: with old dual y and step size

    theta = eps * max(a^T v' - b, 0) / (a^T W^-1 a),   v' = v + (y/eps) W^-1 a

the net update is v += ((y - theta)/eps) W^-1 a, and a^T v' - b is
computed without materializing v'.
"""

from dataclasses import dataclass

from .core import Kind, pair_index, pair_count, _row_entries
from ._kernels import THETA_FLOOR


@dataclass(frozen=True)
class StepOutcome:
    theta_plus: float
    changed: bool


def metric_row(key, n):
    """Sparse row of a metric constraint: three positions in the x-block,
    coefficients (+1, -1, -1), and b = 0."""
    if not key.is_metric:
        raise ValueError(f"not a metric key: {key}")
    entries = _row_entries(key, n)
    positions = tuple(p for p, _ in entries)
    coeffs = tuple(c for _, c in entries)
    return positions, coeffs, 0.0


def pair_row(key, instance):
    """Sparse row of a pair constraint: one x and one f position, and
    b = +d_ij (upper) or -d_ij (lower)."""
    if key.is_metric:
        raise ValueError(f"not a pair key: {key}")
    entries = _row_entries(key, instance.n)
    positions = tuple(p for p, _ in entries)
    coeffs = tuple(c for _, c in entries)
    return positions, coeffs, instance.rhs(key)


def constraint_row(key, instance):
    if key.is_metric:
        return metric_row(key, instance.n)
    return pair_row(key, instance)


def dykstra_step(state, key, y_old, instance):
    """Correction with y_old, projection, dual update for one constraint.

    Touches only the 2 or 3 variables of the key's row.  Returns the
    new dual value theta_plus >= 0 and whether any variable moved.
    """
    if y_old < 0:
        raise ValueError(f"dual values are nonnegative, got {y_old}")
    n = instance.n
    m = pair_count(n)
    positions, coeffs, b = constraint_row(key, instance)
    winv = []
    vals = []
    for pos in positions:
        if pos < m:
            winv.append(1.0 / instance.reg_x[pos])
            vals.append(state.xv[pos])
        else:
            winv.append(1.0 / instance.reg_f[pos - m])
            vals.append(state.fv[pos - m])
    eps = instance.epsilon
    d0 = sum(c * v for c, v in zip(coeffs, vals)) - b
    s = sum(c * c * wi for c, wi in zip(coeffs, winv))
    delta = d0 + y_old * s / eps
    theta = eps * delta / s if delta > 0.0 else 0.0
    coef = (y_old - theta) / eps
    if coef != 0.0:
        for pos, c, wi in zip(positions, coeffs, winv):
            if pos < m:
                state.xv[pos] += coef * c * wi
            else:
                state.fv[pos - m] += coef * c * wi
    if theta <= THETA_FLOOR:
        theta = 0.0
    return StepOutcome(theta_plus=theta, changed=coef != 0.0)
