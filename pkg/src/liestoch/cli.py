"""Batch experiment runner.

Subcommands
-----------
exp             simulate a driver and emit the developed group paths (CSV)
log             simulate, develop, and emit the compensated logarithm (CSV)
roundtrip       per-replica terminal log(exp(M)) - M errors (CSV + summary)
convergence     round-trip error ladder over several step sizes (CSV)
campbell        Campbell-Hausdorff residual ladders (JSON or CSV report)
martingale-test drift verdict for a driver/scheme combination (JSON + z CSV)
u-table         Levi-Civita U coefficients per basis pair (CSV)
regress         run the whole pinned-seed verification battery

Every output file gets a ``<name>.manifest.json`` sibling echoing the fully
resolved configuration (schema 1). Same config + seed produces byte
identical CSV output no matter how many workers are used: replicas own
independent, index-derived random streams and are reassembled in order.

Config files are flat ``key=value`` lines (``#`` comments allowed);
command-line flags override file values. Exit codes: 0 success, 1 failed
verification, 2 usage error, 3 violated precondition/hypothesis,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import acceptance, campbell, explog, martingale
from .connections import alpha_biinvariant, alpha_levi_civita, metric_for, u_from_metric
from .errors import HypothesisError, LieStochError, PowerError
from .groups import get_group
from .linalg import spd_cholesky
from .paths import (
    Ensemble,
    TimeGrid,
    brownian_ensemble,
    drift_diffusion_ensemble,
    dump_algebra_csv,
    dump_group_csv,
    normal_quantile,
)

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_VERIFICATION_FAILED = 1
EXIT_USAGE = 2
EXIT_PRECONDITION = 3
EXIT_NUMERICAL = 4


class UsageError(Exception):
    pass


@dataclass
class ExperimentConfig:
    """Flat, serializable description of one run."""

    command: str
    group: str = "se3"
    connection: str = "levicivita"
    lam: float = 1.0
    dt: float = 1e-3
    steps: int = 1000
    replicas: int = 64
    seed: int = 0
    dts: str = "4e-3,2e-3,1e-3"
    driver: str = "bm"
    scheme: str = "ito"
    rule: str = ""
    cov: str = ""
    drift: str = ""
    buckets: int = 20
    significance: float = 0.0
    workers: int = 1
    out: str = ""
    fmt: str = "csv"

    def to_kv(self):
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name}={v!r}" if isinstance(v, float) else f"{f.name}={v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_kv(cls, text, command=None):
        data = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"config line {lineno}: expected key=value, got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            data[key] = value
        return cls._coerce(data, command)

    @classmethod
    def _coerce(cls, data, command=None):
        kwargs = {}
        valid = {f.name: f.type for f in fields(cls)}
        for key, value in data.items():
            if key not in valid:
                raise UsageError(f"unknown config key {key!r}")
            kind = valid[key]
            try:
                if kind == "int":
                    kwargs[key] = int(value)
                elif kind == "float":
                    kwargs[key] = float(value)
                else:
                    kwargs[key] = str(value)
            except ValueError as exc:
                raise UsageError(f"bad value for {key!r}: {value!r}") from exc
        if command is not None:
            kwargs["command"] = command
        if "command" not in kwargs:
            raise UsageError("config does not name a command")
        return cls(**kwargs)

    def dt_ladder(self):
        try:
            ladder = tuple(float(tok) for tok in self.dts.split(",") if tok.strip())
        except ValueError as exc:
            raise UsageError(f"bad --dts list: {self.dts!r}") from exc
        if not ladder or any(dt <= 0 for dt in ladder):
            raise UsageError(f"--dts needs positive entries, got {self.dts!r}")
        return ladder

    def grid(self):
        if self.dt <= 0 or self.steps <= 0:
            raise UsageError("dt and steps must be positive")
        return TimeGrid(self.dt * self.steps, self.steps)


def _connection(config):
    spec = get_group(config.group)
    if config.connection == "biinvariant":
        return spec, alpha_biinvariant(spec)
    if config.connection == "levicivita":
        return spec, alpha_levi_civita(metric_for(spec, config.lam))
    raise UsageError(f"unknown connection {config.connection!r}")


def _load_covariance(config, spec):
    if not config.cov:
        return None
    try:
        cov = np.loadtxt(config.cov, delimiter=",", ndmin=2)
    except OSError as exc:
        raise UsageError(f"cannot read covariance file {config.cov!r}: {exc}") from exc
    n = spec.algebra_dim
    if cov.shape != (n, n):
        raise UsageError(f"covariance must be {n}x{n}, got {cov.shape}")
    spd_cholesky(cov, what="covariance file")
    return cov


def _parse_drift(config, spec):
    if not config.drift:
        return None
    try:
        vec = np.array([float(tok) for tok in config.drift.split(",")])
    except ValueError as exc:
        raise UsageError(f"bad --drift list: {config.drift!r}") from exc
    if vec.shape != (spec.algebra_dim,):
        raise UsageError(f"drift needs {spec.algebra_dim} components")
    return vec


def _z_band(config):
    if config.significance <= 0.0:
        return martingale.DEFAULT_Z_BAND
    if not 0.0 < config.significance < 1.0:
        raise UsageError("--significance must be a confidence level in (0, 1)")
    return normal_quantile(1.0 - (1.0 - config.significance) / 2.0)


def _chunk_ranges(replicas, workers):
    workers = max(1, min(workers, replicas))
    base, extra = divmod(replicas, workers)
    ranges, start = [], 0
    for w in range(workers):
        size = base + (1 if w < extra else 0)
        if size:
            ranges.append((start, size))
        start += size
    return ranges


def _build_ensemble(config, spec, covariance=None, drift=None):
    """Replica-chunked ensemble construction (byte-identical to one shot)."""
    if config.replicas < 1:
        raise UsageError("--replicas must be at least 1")
    if config.seed < 0:
        raise UsageError("--seed must be a non-negative integer")
    grid = config.grid()

    def build(chunk):
        first, size = chunk
        if config.driver == "bm":
            return brownian_ensemble(
                spec, grid, config.seed, size, covariance=covariance, first_replica=first
            ).values
        if config.driver == "drift":
            return drift_diffusion_ensemble(
                spec, grid, config.seed, size,
                drift=drift, diffusion=np.eye(spec.algebra_dim),
                first_replica=first,
            ).values
        raise UsageError(f"unknown driver {config.driver!r}")

    ranges = _chunk_ranges(config.replicas, config.workers)
    if len(ranges) == 1:
        parts = [build(ranges[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(ranges)) as pool:
            parts = list(pool.map(build, ranges))
    values = np.concatenate(parts, axis=0)
    return Ensemble(spec, grid, config.seed, values, driver_covariance=covariance)


def _solve(config, ensemble, alpha):
    if config.scheme == "ito":
        return explog.ito_exponential(ensemble, alpha)
    if config.scheme == "strat":
        return explog.strat_exponential(ensemble)
    raise UsageError(f"unknown scheme {config.scheme!r}")


def _write_manifest(out, config):
    manifest = {"schema": SCHEMA_VERSION, "config": asdict(config)}
    with open(out + ".manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _open_out(config):
    if not config.out:
        raise UsageError("this command requires --out")
    try:
        return open(config.out, "w", newline="")
    except OSError as exc:
        raise UsageError(f"cannot write {config.out!r}: {exc}") from exc


def _cmd_exp(config):
    spec, alpha = _connection(config)
    cov = _load_covariance(config, spec)
    ensemble = _build_ensemble(config, spec, covariance=cov)
    solved = _solve(config, ensemble, alpha)
    with _open_out(config) as fh:
        dump_group_csv(solved, fh)
    _write_manifest(config.out, config)
    return EXIT_OK


def _cmd_log(config):
    spec, alpha = _connection(config)
    cov = _load_covariance(config, spec)
    ensemble = _build_ensemble(config, spec, covariance=cov)
    solved = _solve(config, ensemble, alpha)
    logs = explog.ito_logarithm(solved, alpha)
    with _open_out(config) as fh:
        dump_algebra_csv(logs, fh)
    _write_manifest(config.out, config)
    return EXIT_OK


def _roundtrip_errors(config, spec, alpha):
    ensemble = _build_ensemble(config, spec, covariance=_load_covariance(config, spec))
    solved = explog.ito_exponential(ensemble, alpha)
    back = explog.ito_logarithm(solved, alpha)
    return np.linalg.norm(back.values[:, -1] - ensemble.values[:, -1], axis=-1)


def _cmd_roundtrip(config):
    spec, alpha = _connection(config)
    err = _roundtrip_errors(config, spec, alpha)
    with _open_out(config) as fh:
        writer = csv.writer(fh)
        writer.writerow(["replica", "terminal_error"])
        for r, value in enumerate(err):
            writer.writerow([r, repr(float(value))])
        writer.writerow(["mean", repr(float(np.mean(err)))])
    _write_manifest(config.out, config)
    return EXIT_OK


def _cmd_convergence(config):
    spec, alpha = _connection(config)
    rows = []
    for dt in config.dt_ladder():
        steps = max(1, int(round(config.dt * config.steps / dt)))
        sub = ExperimentConfig(**{**asdict(config), "dt": dt, "steps": steps})
        err = _roundtrip_errors(sub, spec, alpha)
        rows.append((dt, float(np.mean(err)), float(np.std(err, ddof=1) / np.sqrt(len(err)))))
    with _open_out(config) as fh:
        writer = csv.writer(fh)
        writer.writerow(["dt", "mean_terminal_error", "stderr"])
        for dt, mean, se in rows:
            writer.writerow([repr(float(dt)), repr(mean), repr(se)])
    _write_manifest(config.out, config)
    return EXIT_OK


def _report_dict(report):
    d = asdict(report)
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in d.items()}


def _cmd_campbell(config):
    spec, alpha = _connection(config)
    dts = config.dt_ladder()
    rule = config.rule or "midpoint"
    exp_rep = campbell.ch_ladder(
        spec, alpha, dts=dts, replicas=config.replicas, base_seed=config.seed, rule=rule
    )
    log_rep = campbell.log_product_ladder(
        spec, alpha, dts=dts, replicas=config.replicas,
        base_seed=config.seed + 100, rule=config.rule or "ito",
    )
    reports = [exp_rep, log_rep]
    with _open_out(config) as fh:
        if config.fmt == "json":
            json.dump(
                {"schema": SCHEMA_VERSION, "reports": [_report_dict(r) for r in reports]},
                fh, indent=2, sort_keys=True,
            )
            fh.write("\n")
        else:
            writer = csv.writer(fh)
            writer.writerow(["kind", "rule", "dt", "mean_terminal", "max_terminal", "stderr"])
            for rep in reports:
                for i, dt in enumerate(rep.dt_ladder):
                    writer.writerow([
                        rep.kind, rep.rule, repr(dt),
                        repr(rep.mean_terminal[i]), repr(rep.max_terminal[i]),
                        repr(rep.stderr_terminal[i]),
                    ])
    _write_manifest(config.out, config)
    return EXIT_OK


def _cmd_martingale_test(config):
    spec, alpha = _connection(config)
    cov = _load_covariance(config, spec)
    drift = _parse_drift(config, spec)
    ensemble = _build_ensemble(config, spec, covariance=cov, drift=drift)
    solved = _solve(config, ensemble, alpha)
    report = martingale.martingale_verdict(
        solved, alpha, buckets=config.buckets, z_band=_z_band(config)
    )
    payload = {
        "schema": SCHEMA_VERSION,
        "group": report.group,
        "connection": report.connection,
        "replicas": report.replicas,
        "buckets": report.buckets,
        "z_band": report.z_band,
        "min_cell_fraction": report.min_cell_fraction,
        "cells_within": report.cells_within,
        "max_abs_z": report.max_abs_z,
        "passed": report.passed,
    }
    with _open_out(config) as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    zpath = config.out + ".zscores.csv"
    with open(zpath, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bucket", "component", "mean", "stderr", "z"])
        for b in range(report.buckets):
            for c in range(report.z.shape[1]):
                writer.writerow([
                    b, c, repr(float(report.mean[b, c])),
                    repr(float(report.stderr[b, c])), repr(float(report.z[b, c])),
                ])
    _write_manifest(config.out, config)
    print(f"verdict: {'pass' if report.passed else 'fail'} "
          f"(max |z| = {report.max_abs_z:.2f})")
    return EXIT_OK


def _cmd_u_table(config):
    spec = get_group(config.group)
    u = u_from_metric(metric_for(spec, config.lam)).coeffs
    n = spec.algebra_dim
    rows = [["i", "j"] + [f"c{k+1}" for k in range(n)]]
    for i in range(n):
        for j in range(n):
            rows.append([i + 1, j + 1] + [repr(float(u[k, i, j])) for k in range(n)])
    if config.out:
        with _open_out(config) as fh:
            csv.writer(fh).writerows(rows)
        _write_manifest(config.out, config)
    else:
        csv.writer(sys.stdout).writerows(rows)
    return EXIT_OK


def _cmd_regress(config):
    results = acceptance.run_all()
    if config.out:
        payload = {
            "schema": SCHEMA_VERSION,
            "criteria": [
                {
                    "name": r.name,
                    "passed": r.passed,
                    "details": r.details,
                    "runtime_seconds": round(r.seconds, 2),
                }
                for r in results
            ],
            "all_passed": all(r.passed for r in results),
        }
        with _open_out(config) as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        _write_manifest(config.out, config)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return EXIT_OK if not failed else EXIT_VERIFICATION_FAILED


_COMMANDS = {
    "exp": _cmd_exp,
    "log": _cmd_log,
    "roundtrip": _cmd_roundtrip,
    "convergence": _cmd_convergence,
    "campbell": _cmd_campbell,
    "martingale-test": _cmd_martingale_test,
    "u-table": _cmd_u_table,
    "regress": _cmd_regress,
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="liestoch",
        description="Seeded Monte Carlo experiments for stochastic calculus "
                    "on matrix Lie groups.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="flat key=value config file")
        p.add_argument("--group", default=None)
        p.add_argument("--connection", default=None, choices=["biinvariant", "levicivita"])
        p.add_argument("--lambda", dest="lam", type=float, default=None)
        p.add_argument("--dt", type=float, default=None)
        p.add_argument("--steps", type=int, default=None)
        p.add_argument("--replicas", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--dts", default=None, help="comma list of step sizes")
        p.add_argument("--driver", default=None, choices=["bm", "drift"])
        p.add_argument("--scheme", default=None, choices=["ito", "strat"])
        p.add_argument("--rule", default=None, choices=["ito", "midpoint"])
        p.add_argument("--cov", default=None, help="covariance CSV file")
        p.add_argument("--drift", default=None, help="comma list of drift components")
        p.add_argument("--buckets", type=int, default=None)
        p.add_argument("--significance", type=float, default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--format", dest="fmt", default=None, choices=["csv", "json"])
    return parser


def _resolve_config(args):
    if args.config:
        try:
            with open(args.config) as fh:
                config = ExperimentConfig.from_kv(fh.read(), command=args.command)
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config!r}: {exc}") from exc
    else:
        config = ExperimentConfig(command=args.command)
    for f in fields(ExperimentConfig):
        value = getattr(args, f.name, None)
        if value is not None and f.name != "command":
            setattr(config, f.name, value)
    return config


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _resolve_config(args)
        return _COMMANDS[config.command](config)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (HypothesisError, PowerError) as exc:
        print(f"precondition violated: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except LieStochError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
