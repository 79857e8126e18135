"""Dense small-matrix kernels: exponential, logarithm, solves, norms.

Everything here accepts stacked operands: an array of shape (..., n, n) is
treated as a batch of matrices over the leading axes. Each matrix is
processed independently of the rest of the batch (scaling levels, square
roots and stopping decisions are made per matrix), so results are identical
no matter how a batch is chunked. That property is what keeps ensemble runs
byte-reproducible under any worker split.

Matrices are plain float64 numpy arrays; higher-level modules enforce the
"entries finite" contract by calling these kernels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, LogRangeError, MetricError, SingularMatrixError

# Norm thresholds below which the truncated exp/log series reach double
# precision, and the series orders that achieve it.
_EXP_RADIUS = 0.5   # degree-15 Taylor truncates below 1e-18 here
_LOG_RADIUS = 0.25  # Gregory series with odd powers up to 17
_LOG_GREGORY_TERMS = 9
_MAX_SQRT_LEVELS = 40
_SQRT_MAX_ITER = 60
_COND_LIMIT = 1e13

_EXP_COEFFS = np.cumprod([1.0] + [1.0 / k for k in range(1, 16)])  # 1/k!, k=0..15


@dataclass(frozen=True)
class Tolerance:
    """Absolute/relative tolerance pair used by residual checks.

    ``bound(scale)`` gives the acceptance threshold for a residual whose
    natural scale (typically a Frobenius norm) is ``scale``.
    """

    abs_tol: float = 1e-12
    rel_tol: float = 1e-9

    def __post_init__(self):
        if self.abs_tol < 0 or self.rel_tol < 0:
            raise ValueError("tolerances must be non-negative")
        if self.abs_tol == 0 and self.rel_tol == 0:
            raise ValueError("at least one tolerance must be strictly positive")

    def bound(self, scale):
        return self.abs_tol + self.rel_tol * np.asarray(scale)


DEFAULT_TOLERANCE = Tolerance()


def _as_square(a, op):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise DimensionError(f"{op}: expected square matrices, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{op}: input contains non-finite entries")
    return a


def frobenius_norm(a):
    """Frobenius norm over the last two axes; returns shape (...,)."""
    a = np.asarray(a, dtype=np.float64)
    return np.sqrt(np.einsum("...ij,...ij->...", a, a))


def frobenius_dist(a, b):
    """Frobenius distance between equal-shaped matrices (batched)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[-2:] != b.shape[-2:]:
        raise DimensionError(f"frobenius_dist: shape mismatch {a.shape} vs {b.shape}")
    return frobenius_norm(a - b)


def _eye_like(flat):
    n = flat.shape[-1]
    return np.broadcast_to(np.eye(n), flat.shape)


def mat_exp(a):
    """Matrix exponential by per-matrix scaling-and-squaring.

    Each matrix is scaled by an exact power of two until its Frobenius norm
    is at most 0.5, run through the degree-15 Taylor polynomial in
    Paterson-Stockmeyer form (six matrix products), then squared back up.
    The truncation error at radius 0.5 is below 1e-18, so results are
    accurate to roundoff.
    """
    a = _as_square(a, "mat_exp")
    shape = a.shape
    n = shape[-1]
    flat = a.reshape(-1, n, n)

    norm = frobenius_norm(flat)
    need = norm > _EXP_RADIUS
    s = np.zeros(norm.shape, dtype=np.int64)
    if np.any(need):
        s[need] = np.ceil(np.log2(norm[need] / _EXP_RADIUS)).astype(np.int64)
    a1 = flat * (0.5 ** s)[:, None, None]

    a2 = a1 @ a1
    a3 = a2 @ a1
    a4 = a2 @ a2
    c = _EXP_COEFFS
    diag = np.arange(n)

    def fill_block(buf, j):
        np.multiply(a3, c[4 * j + 3], out=buf)
        buf += c[4 * j + 2] * a2
        buf += c[4 * j + 1] * a1
        buf[..., diag, diag] += c[4 * j]

    out = np.empty_like(a1)
    tmp = np.empty_like(a1)
    fill_block(out, 3)
    for j in (2, 1, 0):
        np.matmul(out, a4, out=tmp)
        fill_block(out, j)
        out += tmp

    remaining = s.copy()
    while remaining.max(initial=0) > 0:
        mask = remaining > 0
        sub = out[mask]
        out[mask] = sub @ sub
        remaining[mask] -= 1
    if not np.all(np.isfinite(out)):
        raise ValueError("mat_exp: result overflowed double precision")
    return out.reshape(shape)


def _denman_beavers_sqrt(m):
    """Principal square root of a batch, Denman-Beavers iteration.

    Per-matrix stopping: a matrix freezes once its own update stagnates, so
    its result never depends on the rest of the batch.
    """
    y = m.copy()
    z = _eye_like(m).copy()
    active = np.ones(m.shape[0], dtype=bool)
    for _ in range(_SQRT_MAX_ITER):
        if not active.any():
            break
        ya, za = y[active], z[active]
        try:
            yinv = np.linalg.inv(ya)
            zinv = np.linalg.inv(za)
        except np.linalg.LinAlgError as exc:
            raise LogRangeError(
                "matrix square root iteration hit a singular iterate; "
                "input is outside the admissible region (use a smaller dt)"
            ) from exc
        ynew = 0.5 * (ya + zinv)
        znew = 0.5 * (za + yinv)
        step = frobenius_norm(ynew - ya)
        scale = frobenius_norm(ynew)
        y[active] = ynew
        z[active] = znew
        sub_done = step <= 1e-14 * np.maximum(scale, 1.0)
        idx = np.flatnonzero(active)
        active[idx[sub_done]] = False
    if active.any():
        raise LogRangeError(
            "matrix square root did not converge; spectrum too close to the "
            "negative real axis (use a smaller dt)"
        )
    return y


def mat_log(m, max_sqrt_levels=_MAX_SQRT_LEVELS):
    """Principal matrix logarithm by inverse scaling-and-squaring.

    Square roots are taken per matrix until ``||M - I|| <= 0.25``, then the
    Gregory series ``log M = 2 * sum z^(2k+1)/(2k+1)`` with
    ``z = (M - I)(M + I)^-1`` finishes the job. Intended regime: one-step
    group increments, which are near the identity by construction.
    """
    m = _as_square(m, "mat_log")
    shape = m.shape
    n = shape[-1]
    flat = m.reshape(-1, n, n).copy()

    det = np.linalg.det(flat)
    if np.any(np.abs(det) < 1e-250):
        raise SingularMatrixError("mat_log: singular input")

    eye = _eye_like(flat)
    s = np.zeros(flat.shape[0], dtype=np.int64)
    for _ in range(max_sqrt_levels):
        far = frobenius_dist(flat, eye) > _LOG_RADIUS
        if not far.any():
            break
        flat[far] = _denman_beavers_sqrt(flat[far])
        s[far] += 1
    if np.any(frobenius_dist(flat, eye) > _LOG_RADIUS):
        raise LogRangeError(
            "mat_log: input stayed far from the identity after "
            f"{max_sqrt_levels} square roots (use a smaller dt)"
        )

    try:
        z = np.linalg.solve(flat + eye, flat - eye)
    except np.linalg.LinAlgError as exc:
        raise LogRangeError("mat_log: I + M^(1/2^s) is singular") from exc
    z2 = z @ z
    term = z
    acc = z.copy()
    for k in range(1, _LOG_GREGORY_TERMS):
        term = term @ z2
        acc += term / (2 * k + 1)
    out = (2.0 * (2.0 ** s))[:, None, None] * acc
    return out.reshape(shape)


def solve_linear(a, b):
    """Solve ``A x = b`` with a conditioning guard.

    Raises SingularMatrixError when A is singular or its condition number
    exceeds 1e13 (the residual guarantee would be meaningless beyond that).
    """
    a = _as_square(a, "solve_linear")
    b = np.asarray(b, dtype=np.float64)
    try:
        x = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("solve_linear: singular matrix") from exc
    if np.max(np.linalg.cond(a)) > _COND_LIMIT:
        raise SingularMatrixError("solve_linear: matrix too ill-conditioned")
    return x


def spd_cholesky(mat, what="matrix"):
    """Cholesky factor of a symmetric positive definite matrix.

    Raises MetricError when the input is not symmetric within 1e-12 (scaled)
    or not positive definite.
    """
    mat = _as_square(mat, "spd_cholesky")
    scale = max(float(np.max(np.abs(mat))), 1.0)
    if np.max(np.abs(mat - np.swapaxes(mat, -1, -2))) > 1e-12 * scale:
        raise MetricError(f"{what} is not symmetric")
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError as exc:
        raise MetricError(f"{what} is not positive definite") from exc
