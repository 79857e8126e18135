"""Stochastic exponentials and logarithms between the algebra and the group.

Four operators connect algebra-valued driving paths M to group-valued
paths X, all built on McKean-Gangolli injection (every step multiplies by
the matrix exponential of an algebra element, so group membership is
structural, not approximate):

* ``strat_exponential``: X_{k+1} = X_k exp(dM_k) -- the midpoint-type
  development, inverse of ``strat_logarithm`` (cumulative log increments).
* ``ito_exponential`` w.r.t. a connection function alpha on the group side
  and an optional algebra connection: each injected step is
  ``dM + 1/2 Gamma(dM, dM) - 1/2 alpha(dM, dM)``, i.e. the left-point
  reading with its quadratic-variation compensation placed inside the
  exponent. ``ito_logarithm`` applies the reverse correction
  ``dL + 1/2 alpha(dL, dL) - 1/2 Gamma(dL, dL)`` to the log increments.

With a quadratic-free alpha (alpha(A, A) = 0, e.g. bi-invariant) the
corrections are exactly zero arrays, so the Ito and Stratonovich operators
coincide bit for bit. The algebra connection defaults to flat (all
Christoffels zero), under which algebra martingales are coordinate local
martingales.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calculus import _map_stacked, mc_increments
from .connections import ConnectionFunction
from .errors import (
    DimensionError,
    GroupMismatchError,
    IntegratorDriftError,
    MembershipError,
)
from .groups import MEMBERSHIP_GATE, GroupSpec, membership_defect, to_matrix_coords
from .linalg import mat_exp
from .paths import AlgebraPath, Ensemble, GroupPath


@dataclass(frozen=True)
class AlgebraConnection:
    """Constant-coefficient symmetric connection on the algebra.

    ``christoffels[k, i, j]`` are the coefficients of Gamma(e_i, e_j); the
    default (zero) table is the flat connection.
    """

    group: GroupSpec
    christoffels: np.ndarray | None = None

    def __post_init__(self):
        n = self.group.algebra_dim
        gamma = self.christoffels
        gamma = np.zeros((n, n, n)) if gamma is None else np.asarray(gamma, dtype=np.float64)
        if gamma.shape != (n, n, n):
            raise DimensionError(f"christoffels must be {n}x{n}x{n}, got {gamma.shape}")
        if np.max(np.abs(gamma - np.swapaxes(gamma, 1, 2))) > 1e-12:
            raise ValueError("christoffels must be symmetric in the lower indices")
        gamma = gamma.copy()
        gamma.setflags(write=False)
        object.__setattr__(self, "christoffels", gamma)

    @property
    def is_flat(self):
        return not np.any(self.christoffels)


def flat_connection(spec) -> AlgebraConnection:
    return AlgebraConnection(spec)


def _develop(spec, step_vectors):
    """Cumulative product of exp(step vectors): (..., K, n) -> (..., K+1, d, d)."""
    mats = to_matrix_coords(spec, step_vectors)
    exps = _map_stacked(mat_exp, mats)
    lead = step_vectors.shape[:-2]
    steps = step_vectors.shape[-2]
    d = spec.matrix_dim
    out = np.empty(lead + (steps + 1, d, d))
    out[..., 0, :, :] = np.eye(d)
    cur = np.broadcast_to(np.eye(d), lead + (d, d))
    for k in range(steps):
        cur = cur @ exps[..., k, :, :]
        out[..., k + 1, :, :] = cur
    return out


def _gate_membership(spec, values):
    defect = _map_stacked(lambda m: membership_defect(spec, m), values)
    worst = float(np.max(defect))
    if worst > MEMBERSHIP_GATE:
        raise IntegratorDriftError(
            f"{spec.name}: integrator drifted off the group "
            f"(membership defect {worst:.3e} > {MEMBERSHIP_GATE:.1e}); "
            "use a smaller dt"
        )


def _quadratic(table, v):
    return np.einsum("kij,...i,...j->...k", table, v, v)


def _injected_steps(spec, dm, alpha, algebra_connection):
    """Step vectors of the Ito exponential scheme."""
    if alpha.group != spec:
        raise GroupMismatchError(
            f"connection on {alpha.group.name} used with {spec.name} driver"
        )
    conn = algebra_connection or flat_connection(spec)
    if conn.group != spec:
        raise GroupMismatchError("algebra connection group mismatch")
    v = dm
    if not conn.is_flat:
        v = v + 0.5 * _quadratic(conn.christoffels, dm)
    v = v - 0.5 * _quadratic(alpha.symmetric_part(), dm)
    return v


def _corrected_logs(spec, dl, alpha, algebra_connection):
    """Increment correction of the Ito logarithm scheme."""
    if alpha.group != spec:
        raise GroupMismatchError(
            f"connection on {alpha.group.name} used with {spec.name} path"
        )
    conn = algebra_connection or flat_connection(spec)
    if conn.group != spec:
        raise GroupMismatchError("algebra connection group mismatch")
    v = dl + 0.5 * _quadratic(alpha.symmetric_part(), dl)
    if not conn.is_flat:
        v = v - 0.5 * _quadratic(conn.christoffels, dl)
    return v


def _cumulative(increments):
    out = np.zeros(increments.shape[:-2] + (increments.shape[-2] + 1, increments.shape[-1]))
    np.cumsum(increments, axis=-2, out=out[..., 1:, :])
    return out


def strat_exponential(m):
    """Development of an algebra path into the group (identity start).

    Accepts an AlgebraPath or an algebra Ensemble and returns the
    corresponding group-valued object, step logs attached.
    """
    if isinstance(m, Ensemble):
        if m.is_group_valued:
            raise DimensionError("strat_exponential expects algebra-valued input")
        dm = np.diff(m.values, axis=-2)
        values = _develop(m.group, dm)
        _gate_membership(m.group, values)
        return m.with_values(values, step_logs=dm)
    dm = m.increments()
    values = _develop(m.group, dm)
    _gate_membership(m.group, values)
    return GroupPath(m.group, m.grid, values, step_logs=dm)


def strat_logarithm(x):
    """Cumulative left-trivialized increments of a group path (starts at 0)."""
    dl = mc_increments(x)
    if isinstance(x, Ensemble):
        return x.with_values(_cumulative(dl))
    return AlgebraPath(x.group, x.grid, _cumulative(dl))


def ito_exponential(m, alpha: ConnectionFunction, algebra_connection=None):
    """Solve the Ito development equation for a driving algebra path.

    One-step scheme: inject ``exp(dM + 1/2 Gamma(dM,dM) - 1/2 alpha(dM,dM))``.
    The group-side correction makes the compensated logarithm of the output
    a drift-free readback of M (strong order 1/2 in general, exact when
    alpha is quadratic-free). Only the symmetric part of alpha enters the
    quadratic correction, so the scheme is insensitive to the torsion
    normalization of the connection table.
    """
    if isinstance(m, Ensemble):
        if m.is_group_valued:
            raise DimensionError("ito_exponential expects algebra-valued input")
        dm = np.diff(m.values, axis=-2)
        v = _injected_steps(m.group, dm, alpha, algebra_connection)
        values = _develop(m.group, v)
        _gate_membership(m.group, values)
        return m.with_values(values, step_logs=v)
    dm = m.increments()
    v = _injected_steps(m.group, dm, alpha, algebra_connection)
    values = _develop(m.group, v)
    _gate_membership(m.group, values)
    return GroupPath(m.group, m.grid, values, step_logs=v)


def ito_logarithm(x, alpha: ConnectionFunction, algebra_connection=None):
    """Compensated logarithm of a group path (starts at 0).

    Returns the cumulative sum of ``dL + 1/2 alpha(dL,dL) - 1/2 Gamma(dL,dL)``
    over the left-trivialized increments dL; with the flat algebra
    connection this is exactly the Stratonovich logarithm plus half the
    running alpha-quadratic sum.
    """
    spec = x.group
    dl = mc_increments(x)
    corrected = _corrected_logs(spec, dl, alpha, algebra_connection)
    if isinstance(x, Ensemble):
        return x.with_values(_cumulative(corrected))
    return AlgebraPath(spec, x.grid, _cumulative(corrected))


def translate_initial(xi, x):
    """Left-translate a group path (or ensemble) by a fixed group element.

    The left-trivialized increments are unchanged, so every log-type
    operator returns identical output for the translated path.
    """
    spec = x.group
    xi = np.asarray(xi, dtype=np.float64)
    defect = float(np.max(membership_defect(spec, xi)))
    if defect > MEMBERSHIP_GATE:
        raise MembershipError(
            f"{spec.name}: translation element defect {defect:.3e} exceeds gate"
        )
    values = xi @ x.values
    if isinstance(x, Ensemble):
        return x.with_values(values, step_logs=x.step_logs)
    return GroupPath(spec, x.grid, values, step_logs=x.step_logs)
