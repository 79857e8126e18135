import io

import numpy as np
import pytest

from liestoch.errors import GridMismatchError, MetricError
from liestoch.groups import get_group
from liestoch.paths import (
    AlgebraPath,
    Ensemble,
    TimeGrid,
    brownian_driver,
    brownian_ensemble,
    coordinate_series,
    derive_rng,
    drift_diffusion_driver,
    drift_diffusion_ensemble,
    dump_algebra_csv,
    dump_group_csv,
    normal_quantile,
    null_qv_check,
    quadratic_covariation,
)

SO3 = get_group("so3")


def test_time_grid():
    grid = TimeGrid(2.0, 4)
    assert grid.dt == 0.5
    assert np.allclose(grid.times(), [0, 0.5, 1.0, 1.5, 2.0])
    with pytest.raises(ValueError):
        TimeGrid(0.0, 10)
    with pytest.raises(ValueError):
        TimeGrid(1.0, 0)


def test_normal_quantile():
    assert abs(normal_quantile(0.975) - 1.959964) < 1e-5
    assert abs(normal_quantile(0.5)) < 1e-10
    assert abs(normal_quantile(0.995) - 2.575829) < 1e-5


def test_brownian_seed_determinism():
    grid = TimeGrid(1.0, 100)
    p1 = brownian_driver(SO3, grid, seed=5)
    p2 = brownian_driver(SO3, grid, seed=5)
    p3 = brownian_driver(SO3, grid, seed=6)
    assert np.array_equal(p1.values, p2.values)
    assert not np.array_equal(p1.values, p3.values)
    assert np.array_equal(p1.values[0], np.zeros(3))


def test_brownian_increment_variance():
    # sample variance of increments matches cov * dt within 3 standard errors
    grid = TimeGrid(1.0, 100_000)
    path = brownian_driver(SO3, grid, seed=11)
    inc = path.increments()
    var = inc.var(axis=0, ddof=1)
    se = np.sqrt(2.0 / (grid.steps - 1)) * grid.dt
    assert np.all(np.abs(var - grid.dt) < 3.0 * se)


def test_brownian_rejects_bad_covariance():
    grid = TimeGrid(1.0, 10)
    with pytest.raises(MetricError):
        brownian_driver(SO3, grid, seed=0, covariance=np.zeros((3, 3)))
    with pytest.raises(MetricError):
        brownian_driver(SO3, grid, seed=0, covariance=np.eye(4))


def test_brownian_increment_normality():
    # skew and excess kurtosis of 1e6 pooled increments stay small
    grid = TimeGrid(1.0, 500_000)
    values = np.concatenate(
        [brownian_driver(SO3, grid, seed=21, replica=r).increments() for r in range(2)]
    )
    z = values / np.sqrt(grid.dt)
    for c in range(3):
        x = z[:, c]
        skew = np.mean(x**3)
        kurt = np.mean(x**4) - 3.0
        assert abs(skew) < 0.05
        assert abs(kurt) < 0.1


def test_drift_diffusion_driver_cases():
    grid = TimeGrid(2.0, 50)
    b = np.array([0.0, 0.0, 1.0])
    line = drift_diffusion_driver(SO3, grid, seed=3, drift=b, diffusion=np.zeros((3, 3)))
    assert np.allclose(line.values, np.outer(grid.times(), b), atol=1e-12)
    flat = drift_diffusion_driver(SO3, grid, seed=3)
    assert np.max(np.abs(flat.values)) == 0.0


def test_drift_diffusion_matches_brownian_moments():
    grid = TimeGrid(1.0, 20_000)
    cov = np.array([[1.0, 0.3, 0.0], [0.3, 1.0, 0.0], [0.0, 0.0, 2.0]])
    factor = np.linalg.cholesky(cov)
    bm = brownian_driver(SO3, grid, seed=9, covariance=cov)
    dd = drift_diffusion_driver(SO3, grid, seed=10, diffusion=factor)
    cb = np.cov(bm.increments().T)
    cd = np.cov(dd.increments().T)
    assert np.max(np.abs(cb - cd)) < 6.0 * grid.dt * np.sqrt(2.0 / grid.steps) * 10


def test_ensemble_replica_streams_and_chunking():
    grid = TimeGrid(1.0, 64)
    full = brownian_ensemble(SO3, grid, base_seed=77, replicas=10)
    head = brownian_ensemble(SO3, grid, base_seed=77, replicas=4)
    tail = brownian_ensemble(SO3, grid, base_seed=77, replicas=6, first_replica=4)
    assert np.array_equal(np.concatenate([head.values, tail.values]), full.values)
    single = brownian_driver(SO3, grid, seed=77, replica=3)
    assert np.array_equal(full.values[3], single.values)
    assert full.path(3).values.base is full.values  # views, not copies


def test_drift_ensemble_chunking():
    grid = TimeGrid(1.0, 32)
    b = np.array([1.0, 0.0, 0.0])
    full = drift_diffusion_ensemble(SO3, grid, 5, 6, drift=b, diffusion=np.eye(3))
    part = drift_diffusion_ensemble(SO3, grid, 5, 3, drift=b, diffusion=np.eye(3), first_replica=3)
    assert np.array_equal(full.values[3:], part.values)


def test_derive_rng_is_order_free():
    a = derive_rng(123, 7).standard_normal(5)
    _ = derive_rng(123, 3).standard_normal(11)
    b = derive_rng(123, 7).standard_normal(5)
    assert np.array_equal(a, b)


def test_quadratic_covariation_consistency():
    grid = TimeGrid(1.0, 10_000)
    p = brownian_driver(SO3, grid, seed=1)
    qv = quadratic_covariation(p, p)
    # realized variance of each component approximates t within 5%
    for c in range(3):
        assert abs(qv[-1, c, c] - 1.0) < 0.05
    assert np.max(np.abs(qv[0])) == 0.0


def test_quadratic_covariation_smooth_path_vanishes():
    values = []
    for steps in (100, 400):
        grid = TimeGrid(1.0, steps)
        t = grid.times()
        smooth = AlgebraPath(SO3, grid, np.stack([np.sin(t), t**2, t], axis=1))
        bm = brownian_driver(SO3, grid, seed=2)
        qv = quadratic_covariation(smooth, bm)
        values.append(np.max(np.abs(qv[-1])))
    assert values[0] < 0.05
    assert values[1] < values[0]  # shrinks roughly like dt


def test_quadratic_covariation_independent_paths_band():
    grid = TimeGrid(1.0, 10_000)
    p = brownian_driver(SO3, grid, seed=100)
    q = brownian_driver(SO3, grid, seed=200)
    qv = quadratic_covariation(p, q)
    band = 4.0 * np.sqrt(2.0 * grid.horizon * grid.dt)
    assert np.max(np.abs(qv[-1])) < band


def test_quadratic_covariation_converges_to_covariance():
    # realized covariation approaches cov * T; error roughly halves when the
    # step count quadruples
    cov = np.array([[1.0, 0.4, 0.0], [0.4, 1.0, -0.2], [0.0, -0.2, 0.5]])
    errs = []
    for steps in (2_000, 8_000):
        grid = TimeGrid(1.0, steps)
        agg = 0.0
        for r in range(6):
            p = brownian_driver(SO3, grid, seed=55, replica=r, covariance=cov)
            qv = quadratic_covariation(p, p)
            agg += np.max(np.abs(qv[-1] - cov))
        errs.append(agg / 6.0)
    assert errs[1] < 0.75 * errs[0]


def test_quadratic_covariation_grid_mismatch():
    p = brownian_driver(SO3, TimeGrid(1.0, 10), seed=0)
    q = brownian_driver(SO3, TimeGrid(1.0, 20), seed=0)
    with pytest.raises(GridMismatchError):
        quadratic_covariation(p, q)


def test_null_qv_trivial_cases():
    grid = TimeGrid(1.0, 5_000)
    p = brownian_driver(SO3, grid, seed=4)
    assert not null_qv_check(p, p, 0.99).passed
    t = grid.times()
    smooth = AlgebraPath(SO3, grid, np.stack([t, np.sin(t), np.zeros_like(t)], axis=1))
    assert null_qv_check(p, smooth, 0.99).passed


def test_null_qv_calibration():
    # independent replicas pass at the 99% level in >= 95% of trials
    grid = TimeGrid(1.0, 4_000)
    passes = 0
    trials = 40
    for i in range(trials):
        p = brownian_driver(SO3, grid, seed=1000 + i, replica=0)
        q = brownian_driver(SO3, grid, seed=1000 + i, replica=1)
        passes += null_qv_check(p, q, 0.99).passed
    assert passes >= int(0.95 * trials) - 1


def test_coordinate_series_shapes():
    grid = TimeGrid(1.0, 8)
    p = brownian_driver(SO3, grid, seed=0)
    assert coordinate_series(p).shape == (9, 3)
    ens = brownian_ensemble(SO3, grid, 1, 2)
    from liestoch.explog import strat_exponential

    g = strat_exponential(ens).path(0)
    assert coordinate_series(g).shape == (9, 9)


def test_csv_dumps():
    grid = TimeGrid(1.0, 3)
    p = brownian_driver(SO3, grid, seed=1)
    buf = io.StringIO()
    dump_algebra_csv(p, buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0] == "replica,k,t,c1,c2,c3"
    assert len(lines) == 1 + 4

    from liestoch.explog import strat_exponential

    ens = brownian_ensemble(SO3, grid, 2, 2)
    buf = io.StringIO()
    dump_group_csv(strat_exponential(ens), buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0].startswith("replica,k,t,m11,m12")
    assert len(lines) == 1 + 2 * 4


def test_ensemble_validation():
    grid = TimeGrid(1.0, 4)
    with pytest.raises(Exception):
        Ensemble(SO3, grid, 0, np.zeros((3, 9, 3)))  # wrong steps axis


def test_ensemble_step_log_wiring():
    from liestoch.calculus import mc_increments
    from liestoch.explog import strat_exponential

    grid = TimeGrid(1.0, 20)
    ens = brownian_ensemble(SO3, grid, 31, 3)
    gx = strat_exponential(ens)
    assert gx.step_logs is not None and gx.step_logs.shape == (3, 20, 3)
    # per-replica views carry their own slice of the cache
    p1 = gx.path(1)
    assert np.array_equal(p1.step_logs, gx.step_logs[1])
    assert np.array_equal(mc_increments(p1), gx.step_logs[1])
