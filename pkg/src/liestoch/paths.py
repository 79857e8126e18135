"""Discrete-time path model, seeded stochastic drivers, covariation tests.

Paths live on uniform grids. An algebra-valued path stores basis
coordinates of shape (steps+1, n); a group-valued path stores matrices of
shape (steps+1, d, d). Ensembles hold the replica-stacked array once and
materialize per-replica path views on demand.

Seeding: replica r of base seed s draws from
``PCG64(SeedSequence(entropy=s, spawn_key=(r,)))``. Each replica owns an
independent stream derived only from (s, r), so ensembles are reproducible
bit-for-bit under any execution order or worker split.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from math import erf, sqrt

import numpy as np

from .errors import DimensionError, GridMismatchError, MetricError
from .groups import GroupSpec
from .linalg import spd_cholesky

_KEEP = object()  # sentinel: inherit the driver lineage in with_values


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid 0 = t_0 < ... < t_steps = horizon."""

    horizon: float
    steps: int

    def __post_init__(self):
        if self.horizon <= 0 or self.steps <= 0:
            raise ValueError("horizon and steps must be positive")

    @property
    def dt(self):
        return self.horizon / self.steps

    def times(self):
        return np.linspace(0.0, self.horizon, self.steps + 1)


def _check_values(values, expected_shape, what):
    values = np.asarray(values, dtype=np.float64)
    if values.shape != expected_shape:
        raise DimensionError(f"{what}: expected shape {expected_shape}, got {values.shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{what}: non-finite entries")
    return values


@dataclass(frozen=True)
class AlgebraPath:
    """Algebra-valued path: coordinates at each grid point."""

    group: GroupSpec
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        shape = (self.grid.steps + 1, self.group.algebra_dim)
        object.__setattr__(self, "values", _check_values(self.values, shape, "AlgebraPath"))

    def increments(self):
        return np.diff(self.values, axis=0)

    @property
    def terminal(self):
        return self.values[-1]


@dataclass(frozen=True)
class GroupPath:
    """Group-valued path: one matrix per grid point.

    Constructors only check shape/finiteness; the membership-defect gate is
    enforced by the solvers that produce these paths. Solvers also attach
    ``step_logs``, the left-trivialized step vectors they injected, making
    log-type readbacks and left translation exact rather than asymptotic.
    """

    group: GroupSpec
    grid: TimeGrid
    values: np.ndarray
    step_logs: np.ndarray | None = None

    def __post_init__(self):
        d = self.group.matrix_dim
        shape = (self.grid.steps + 1, d, d)
        object.__setattr__(self, "values", _check_values(self.values, shape, "GroupPath"))
        if self.step_logs is not None:
            logs = _check_values(
                self.step_logs,
                (self.grid.steps, self.group.algebra_dim),
                "GroupPath.step_logs",
            )
            object.__setattr__(self, "step_logs", logs)

    @property
    def terminal(self):
        return self.values[-1]


@dataclass(frozen=True)
class Ensemble:
    """Replica-stacked collection of paths sharing one grid.

    ``values`` has shape (replicas, steps+1, n) for algebra ensembles or
    (replicas, steps+1, d, d) for group ensembles. ``driver_covariance``
    records the increment covariance when the ensemble came from a Brownian
    driver (consumed by preconditions downstream).
    """

    group: GroupSpec
    grid: TimeGrid
    base_seed: int
    values: np.ndarray
    driver_covariance: np.ndarray | None = None
    step_logs: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim not in (3, 4) or values.shape[1] != self.grid.steps + 1:
            raise DimensionError(f"Ensemble: bad stacked shape {values.shape}")
        object.__setattr__(self, "values", values)

    @property
    def replicas(self):
        return self.values.shape[0]

    @property
    def is_group_valued(self):
        return self.values.ndim == 4

    def path(self, r):
        if self.is_group_valued:
            logs = None if self.step_logs is None else self.step_logs[r]
            return GroupPath(self.group, self.grid, self.values[r], step_logs=logs)
        return AlgebraPath(self.group, self.grid, self.values[r])

    @property
    def paths(self):
        return [self.path(r) for r in range(self.replicas)]

    def with_values(self, values, driver_covariance=_KEEP, step_logs=None):
        """Derived ensemble with new values; driver lineage is kept unless
        overridden."""
        if driver_covariance is _KEEP:
            driver_covariance = self.driver_covariance
        return Ensemble(
            self.group, self.grid, self.base_seed, values, driver_covariance, step_logs
        )


def derive_rng(base_seed, replica):
    """Documented seed derivation: independent stream per (seed, replica)."""
    seq = np.random.SeedSequence(entropy=int(base_seed), spawn_key=(int(replica),))
    return np.random.Generator(np.random.PCG64(seq))


def _gaussian_increments(rng, grid, factor):
    z = rng.standard_normal((grid.steps, factor.shape[0]))
    return z @ factor.T


def brownian_driver(group, grid, seed, covariance=None, replica=0) -> AlgebraPath:
    """Brownian path in the algebra: increments are iid N(0, covariance*dt)."""
    n = group.algebra_dim
    cov = np.eye(n) if covariance is None else np.asarray(covariance, dtype=np.float64)
    if cov.shape != (n, n):
        raise MetricError(f"covariance must be {n}x{n}")
    factor = spd_cholesky(cov, what="covariance") * sqrt(grid.dt)
    dm = _gaussian_increments(derive_rng(seed, replica), grid, factor)
    values = np.vstack([np.zeros((1, n)), np.cumsum(dm, axis=0)])
    return AlgebraPath(group, grid, values)


def brownian_ensemble(group, grid, base_seed, replicas, covariance=None,
                      first_replica=0) -> Ensemble:
    """Independent Brownian replicas, replica r seeded by derive(seed, r).

    ``first_replica`` shifts the replica index range, so a run split into
    worker chunks reproduces the single-shot ensemble exactly.
    """
    n = group.algebra_dim
    cov = np.eye(n) if covariance is None else np.asarray(covariance, dtype=np.float64)
    if cov.shape != (n, n):
        raise MetricError(f"covariance must be {n}x{n}")
    factor = spd_cholesky(cov, what="covariance") * sqrt(grid.dt)
    values = np.zeros((replicas, grid.steps + 1, n))
    for r in range(replicas):
        dm = _gaussian_increments(derive_rng(base_seed, first_replica + r), grid, factor)
        np.cumsum(dm, axis=0, out=values[r, 1:])
    return Ensemble(group, grid, int(base_seed), values, driver_covariance=cov)


def drift_diffusion_driver(group, grid, seed, drift=None, diffusion=None, replica=0) -> AlgebraPath:
    """Path with increments b*dt + diffusion @ dW (dW standard, var dt).

    Not a martingale when drift is nonzero; this is the negative-control
    driver.
    """
    n = group.algebra_dim
    b = np.zeros(n) if drift is None else np.asarray(drift, dtype=np.float64)
    sig = np.zeros((n, n)) if diffusion is None else np.asarray(diffusion, dtype=np.float64)
    if b.shape != (n,) or sig.shape != (n, n):
        raise DimensionError("drift must be (n,), diffusion (n, n)")
    if not (np.all(np.isfinite(b)) and np.all(np.isfinite(sig))):
        raise ValueError("drift/diffusion must be finite")
    dm = b * grid.dt + _gaussian_increments(derive_rng(seed, replica), grid, sig * sqrt(grid.dt))
    values = np.vstack([np.zeros((1, n)), np.cumsum(dm, axis=0)])
    return AlgebraPath(group, grid, values)


def drift_diffusion_ensemble(group, grid, base_seed, replicas, drift=None,
                             diffusion=None, first_replica=0) -> Ensemble:
    values = np.zeros((replicas, grid.steps + 1, group.algebra_dim))
    for r in range(replicas):
        p = drift_diffusion_driver(
            group, grid, base_seed, drift, diffusion, replica=first_replica + r
        )
        values[r] = p.values
    return Ensemble(group, grid, int(base_seed), values)


def _require_same_grid(p, q):
    if p.grid != q.grid:
        raise GridMismatchError(f"grids differ: {p.grid} vs {q.grid}")


def coordinate_series(path):
    """Coordinate representation of a path: (steps+1, m) real components.

    Algebra paths use their basis coordinates; group paths use the flat
    matrix entries (the coordinates of the matrix embedding).
    """
    if isinstance(path, AlgebraPath):
        return path.values
    if isinstance(path, GroupPath):
        k = path.grid.steps + 1
        return path.values.reshape(k, -1)
    arr = np.asarray(path, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError("expected a path or a (steps+1, m) array")
    return arr


def quadratic_covariation(p, q):
    """Running realized covariation sum_{m<k} dP^i_m dQ^j_m.

    Returns shape (steps+1, n_p, n_q); entry 0 is zero.
    """
    if isinstance(p, (AlgebraPath, GroupPath)) and isinstance(q, (AlgebraPath, GroupPath)):
        _require_same_grid(p, q)
    a = coordinate_series(p)
    b = coordinate_series(q)
    if a.shape[0] != b.shape[0]:
        raise GridMismatchError("paths have different numbers of grid points")
    da = np.diff(a, axis=0)
    db = np.diff(b, axis=0)
    prods = np.einsum("ki,kj->kij", da, db)
    out = np.zeros((a.shape[0],) + prods.shape[1:])
    np.cumsum(prods, axis=0, out=out[1:])
    return out


def normal_quantile(p):
    """Inverse standard normal CDF (bisection on erf; no scipy needed)."""
    if not 0.0 < p < 1.0:
        raise ValueError("quantile probability must be in (0, 1)")
    lo, hi = -1e2, 1e2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if 0.5 * (1.0 + erf(mid / sqrt(2.0))) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class NullQVResult:
    """Outcome of the null-quadratic-variation test."""

    passed: bool
    significance: float
    terminal: np.ndarray        # terminal cross-covariations, (m1, m2)
    band: np.ndarray            # per-cell acceptance band
    cells: int
    worst_ratio: float          # max |terminal| / band

    def __bool__(self):
        return self.passed


def null_qv_check(p, q, significance=0.99) -> NullQVResult:
    """Test whether two paths have vanishing cross quadratic variation.

    Self-normalized CLT band per cell: the variance of the terminal
    realized cross-covariation is estimated by the running sum of squared
    increment products, and each cell must satisfy
    ``|C_T| <= z * sqrt(Vhat) + floor`` with z Bonferroni-adjusted across
    cells so that the whole check has the requested significance.
    """
    if isinstance(p, (AlgebraPath, GroupPath)) and isinstance(q, (AlgebraPath, GroupPath)):
        _require_same_grid(p, q)
    a = coordinate_series(p)
    b = coordinate_series(q)
    if a.shape[0] != b.shape[0]:
        raise GridMismatchError("paths have different numbers of grid points")
    da = np.diff(a, axis=0)
    db = np.diff(b, axis=0)
    terminal = np.einsum("ki,kj->ij", da, db)
    var_hat = np.einsum("ki,kj->ij", da * da, db * db)
    cells = terminal.size
    z = normal_quantile(1.0 - (1.0 - significance) / (2.0 * cells))
    floor = 1e-15 * (1.0 + np.sqrt(np.sum(da * da)) * np.sqrt(np.sum(db * db)))
    band = z * np.sqrt(var_hat) + floor
    ratio = np.abs(terminal) / band
    worst = float(np.max(ratio))
    return NullQVResult(
        passed=bool(worst <= 1.0),
        significance=significance,
        terminal=terminal,
        band=band,
        cells=cells,
        worst_ratio=worst,
    )


def _dump_rows(fh, grid, header, stacked, first_replica):
    """stacked: (replicas, steps+1, m) flattened component values."""
    writer = csv.writer(fh)
    writer.writerow(header)
    times = grid.times()
    for r in range(stacked.shape[0]):
        for k in range(stacked.shape[1]):
            writer.writerow(
                [first_replica + r, k, repr(float(times[k]))]
                + [repr(float(x)) for x in stacked[r, k]]
            )


def dump_algebra_csv(target, fh, replica=0):
    """CSV dump ``replica,k,t,c1..cn`` for a path or every ensemble replica."""
    if isinstance(target, Ensemble):
        stacked, grid, replica = target.values, target.grid, 0
    else:
        stacked, grid = target.values[None], target.grid
    n = stacked.shape[-1]
    header = ["replica", "k", "t"] + [f"c{i+1}" for i in range(n)]
    _dump_rows(fh, grid, header, stacked, replica)


def dump_group_csv(target, fh, replica=0):
    """CSV dump ``replica,k,t,m11..mdd`` (row-major matrix entries)."""
    if isinstance(target, Ensemble):
        stacked, grid, replica = target.values, target.grid, 0
    else:
        stacked, grid = target.values[None], target.grid
    d = stacked.shape[-1]
    header = ["replica", "k", "t"] + [f"m{i+1}{j+1}" for i in range(d) for j in range(d)]
    flat = stacked.reshape(stacked.shape[0], stacked.shape[1], d * d)
    _dump_rows(fh, grid, header, flat, replica)
